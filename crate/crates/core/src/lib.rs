//! Quantitative individual discrimination (QID) for feedforward ReLU
//! classifiers over tabular data.
//!
//! * [`qid`]: counterfactual scores, epsilon-clustering and the Shannon /
//!   min-entropy measures.
//! * [`search`]: gradient-guided global/local search for high-QID inputs.
//! * [`debug`]: layer localization, neuron ACD and single-neuron mitigation.
//! * [`nn`], [`dataset`]: the network, training, schemas and CSV data.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod debug;
pub mod error;
pub mod fixtures;
pub mod nn;
pub mod qid;
pub mod report;
pub mod search;
pub mod synth;

pub use dataset::{Attribute, AttributeSchema, Dataset, ProtectedSpace};
pub use debug::{DebugConfig, Debugger, Localization, MitigationMode, MitigationResult};
pub use error::{Error, Result};
pub use nn::{Intervention, Network, TrainConfig};
pub use qid::{cluster_scores, qid_max, ClusterPartition, ScoreSet};
pub use search::{run_search, SearchConfig, SearchReport};

use dataset::Standardizer;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Takes raw integer rows; the standardization is folded into layer 1.
    pub network: Network,
    pub accuracy: f64,
}

/// Standardizes the non-protected columns, trains, and folds the scaling back
/// into the first layer.
pub fn train_classifier(data: &Dataset, schema: &AttributeSchema, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let scaler = Standardizer::fit(data, schema)?;
    let features: Vec<Vec<f64>> = data.rows().iter().map(|r| scaler.transform(r)).collect();
    let net = nn::train(&features, data.labels(), 2, cfg)?;
    let network = scaler.fold_into(&net)?;
    let accuracy = network.accuracy(data.samples().iter().map(|(x, y)| (x.as_slice(), *y)), None)?;
    Ok(TrainOutcome { network, accuracy })
}
