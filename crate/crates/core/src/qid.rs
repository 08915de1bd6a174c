//! Quantitative individual discrimination.
//!
//! For a fixed non-protected tuple `x`, the model is queried once per
//! protected tuple. The favorable-class scores are grouped into
//! equivalence classes whose score diameter is at most `epsilon`; the
//! number and sizes of those classes give the min-entropy (`log2 k`) and
//! Shannon measures of how much protected information the decision uses.

use serde::{Deserialize, Serialize};

use crate::dataset::{to_f64, AttributeSchema, ProtectedSpace};
use crate::error::{Error, Result};
use crate::nn::{argmax, Intervention, Network};

/// Favorable-class probability per protected tuple, in `ProtectedSpace` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet(Vec<f64>);

impl ScoreSet {
    /// Scores are clamped into `[0, 1]`; non-finite scores are rejected.
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Config(format!("score {i} is not finite")));
        }
        Ok(Self(scores.into_iter().map(|s| s.clamp(0.0, 1.0)).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Indices into the protected space.
    pub members: Vec<usize>,
    pub min: f64,
    pub max: f64,
    pub centroid: f64,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPartition {
    clusters: Vec<Cluster>,
    m: usize,
}

impl ClusterPartition {
    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Cluster::len).collect()
    }

    /// Cluster index of protected tuple `i`.
    pub fn cluster_of(&self, i: usize) -> Option<usize> {
        self.clusters.iter().position(|c| c.members.contains(&i))
    }

    /// First (lowest-score) cluster among those with the most members.
    pub fn largest(&self) -> &Cluster {
        let mut best = &self.clusters[0];
        for c in &self.clusters[1..] {
            if c.len() > best.len() {
                best = c;
            }
        }
        best
    }

    /// Spread between the outermost cluster centroids, 0 when `k = 1`.
    pub fn delta(&self) -> f64 {
        self.clusters.last().unwrap().centroid - self.clusters[0].centroid
    }

    pub fn q_infinity(&self) -> f64 {
        (self.k() as f64).log2()
    }

    pub fn q_shannon(&self) -> f64 {
        (self.m as f64).log2() - self.remaining_shannon()
    }

    /// Conditional min-entropy `log2(m / k)`.
    pub fn remaining_min_entropy(&self) -> f64 {
        (self.m as f64 / self.k() as f64).log2()
    }

    /// Conditional Shannon entropy `sum |c|/m log2 |c|`.
    pub fn remaining_shannon(&self) -> f64 {
        let m = self.m as f64;
        self.clusters
            .iter()
            .filter(|c| c.len() > 1)
            .map(|c| {
                let s = c.len() as f64;
                s / m * s.log2()
            })
            .sum()
    }

    /// `k + (1 - exp(-0.1 delta))`; the second term only breaks ties in `k`.
    pub fn objective(&self) -> f64 {
        self.k() as f64 + spread_bonus(self.delta())
    }

    pub fn measures(&self) -> QidMeasures {
        QidMeasures {
            q_inf: self.q_infinity(),
            q_shannon: self.q_shannon(),
            k: self.k(),
            delta: self.delta(),
        }
    }

    /// Builds a partition from explicit cluster sizes (members numbered consecutively,
    /// all scores zero). Only the cardinalities are meaningful.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Config("cluster sizes must be positive".into()));
        }
        let mut next = 0;
        let clusters = sizes
            .iter()
            .map(|&s| {
                let members = (next..next + s).collect();
                next += s;
                Cluster {
                    members,
                    min: 0.0,
                    max: 0.0,
                    centroid: 0.0,
                }
            })
            .collect();
        Ok(Self { clusters, m: next })
    }
}

pub fn spread_bonus(delta: f64) -> f64 {
    1.0 - (-0.1 * delta).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QidMeasures {
    pub q_inf: f64,
    pub q_shannon: f64,
    pub k: usize,
    pub delta: f64,
}

/// Sorted left-to-right sweep: a new cluster opens whenever the next score
/// exceeds the current cluster's minimum by more than `epsilon`. This gives
/// the fewest clusters of diameter at most `epsilon`.
pub fn cluster_scores(scores: &ScoreSet, epsilon: f64) -> Result<ClusterPartition> {
    if scores.is_empty() {
        return Err(Error::Config("cannot cluster an empty score set".into()));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let s = scores.as_slice();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut members: Vec<usize> = Vec::new();
    let close = |members: &mut Vec<usize>, clusters: &mut Vec<Cluster>| {
        let mut ms = std::mem::take(members);
        let min = s[ms[0]];
        let max = s[*ms.last().unwrap()];
        let centroid = ms.iter().map(|&i| s[i]).sum::<f64>() / ms.len() as f64;
        ms.sort_unstable();
        clusters.push(Cluster {
            members: ms,
            min,
            max,
            centroid,
        });
    };
    for i in order {
        if let Some(&first) = members.first() {
            if s[i] - s[first] > epsilon {
                close(&mut members, &mut clusters);
            }
        }
        members.push(i);
    }
    close(&mut members, &mut clusters);
    Ok(ClusterPartition {
        clusters,
        m: s.len(),
    })
}

/// Upper bound on `Q_inf`: `log2(min(ceil(1/epsilon), m))`.
pub fn qid_max(m: usize, epsilon: f64) -> f64 {
    assert!(epsilon > 0.0 && m >= 1);
    // guard 1/epsilon landing a hair above an integer
    let slots = (1.0 / epsilon - 1e-9).ceil().max(1.0);
    slots.min(m as f64).log2()
}

/// Favorable-class probability of each counterfactual of `x`.
pub fn counterfactual_scores(
    net: &Network,
    schema: &AttributeSchema,
    space: &ProtectedSpace,
    x: &[i64],
    intervention: Option<Intervention>,
) -> Result<ScoreSet> {
    let fav = schema.favorable_label();
    if fav >= net.output_dim() {
        return Err(Error::shape("favorable label bound", net.output_dim(), fav + 1));
    }
    let scores = space
        .counterfactuals(schema, x)?
        .iter()
        .map(|row| net.probabilities(&to_f64(row), intervention).map(|p| p[fav]))
        .collect::<Result<Vec<_>>>()?;
    ScoreSet::new(scores)
}

/// Clusters the counterfactual scores of `x` in one call.
pub fn partition_for(
    net: &Network,
    schema: &AttributeSchema,
    space: &ProtectedSpace,
    x: &[i64],
    epsilon: f64,
    intervention: Option<Intervention>,
) -> Result<ClusterPartition> {
    cluster_scores(&counterfactual_scores(net, schema, space, x, intervention)?, epsilon)
}

/// Clustered scores and predicted labels of all counterfactuals of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub partition: ClusterPartition,
    pub labels: Vec<usize>,
}

impl Evaluation {
    /// Protected-tuple indices `(unfavorable, favorable)` when the labels disagree.
    pub fn id_witness(&self, favorable: usize) -> Option<(usize, usize)> {
        let unfav = self.labels.iter().position(|&l| l != favorable)?;
        let fav = self.labels.iter().position(|&l| l == favorable)?;
        Some((unfav, fav))
    }
}

/// One forward pass per counterfactual, yielding both the partition and the labels.
pub fn evaluate(
    net: &Network,
    schema: &AttributeSchema,
    space: &ProtectedSpace,
    x: &[i64],
    epsilon: f64,
    intervention: Option<Intervention>,
) -> Result<Evaluation> {
    let fav = schema.favorable_label();
    if fav >= net.output_dim() {
        return Err(Error::shape("favorable label bound", net.output_dim(), fav + 1));
    }
    let rows = space.counterfactuals(schema, x)?;
    let mut scores = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for row in &rows {
        let p = net.probabilities(&to_f64(row), intervention)?;
        scores.push(p[fav]);
        labels.push(argmax(&p));
    }
    Ok(Evaluation {
        partition: cluster_scores(&ScoreSet::new(scores)?, epsilon)?,
        labels,
    })
}

/// Two protected tuples that receive different labels for the same `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub first: usize,
    pub second: usize,
}

/// Predicted label of every counterfactual of `x`.
pub fn counterfactual_labels(
    net: &Network,
    schema: &AttributeSchema,
    space: &ProtectedSpace,
    x: &[i64],
) -> Result<Vec<usize>> {
    space
        .counterfactuals(schema, x)?
        .iter()
        .map(|row| net.predict_label(&to_f64(row), None))
        .collect()
}

/// Individual discrimination: some pair of protected tuples changes the label.
pub fn is_discriminatory(
    net: &Network,
    schema: &AttributeSchema,
    space: &ProtectedSpace,
    x: &[i64],
) -> Result<Option<Witness>> {
    let labels = counterfactual_labels(net, schema, space, x)?;
    Ok(labels
        .iter()
        .position(|&l| l != labels[0])
        .map(|second| Witness { first: 0, second }))
}
