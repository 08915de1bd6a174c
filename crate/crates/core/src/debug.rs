//! Causal debugging: find the layer where protected information starts to
//! matter, rank its neurons by average causal difference (ACD) under
//! do-interventions, and apply a single-neuron mitigation.
//!
//! ACD sign convention: `acd > 0` means activating the neuron raises the
//! cluster count (it aggravates discrimination, so mitigation deactivates it);
//! `acd < 0` means activating it lowers the count (mitigation activates it).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{to_f64, AttributeSchema, Dataset, ProtectedSpace};
use crate::error::{Error, Result};
use crate::nn::{Intervention, Network};
use crate::qid::evaluate;
use crate::search::TestCase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebugConfig {
    /// Guard in the layer sensitivity rate.
    pub epsilon1: f64,
    /// Largest accuracy change an intervention may cause.
    pub epsilon2: f64,
    pub top_k: usize,
    /// Clustering tolerance for counting clusters.
    pub epsilon: f64,
    /// Highest-k test cases kept as the intervention test suite.
    pub max_cases: usize,
    pub workers: usize,
}

impl Default for DebugConfig {
    fn default() -> Self {
        Self {
            epsilon1: 1e-7,
            epsilon2: 0.05,
            top_k: 3,
            epsilon: 0.025,
            max_cases: 1000,
            workers: 1,
        }
    }
}

impl DebugConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon1 > 0.0 && self.epsilon2 >= 0.0 && self.epsilon > 0.0) {
            return Err(Error::Config("debug tolerances must be positive".into()));
        }
        if self.top_k == 0 || self.max_cases == 0 || self.workers == 0 {
            return Err(Error::Config("top_k, max_cases and workers must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerScore {
    pub layer: usize,
    pub delta: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSensitivity {
    /// One entry per hidden layer, in order.
    pub layers: Vec<LayerScore>,
    pub chosen: usize,
}

impl LayerSensitivity {
    pub fn score(&self, layer: usize) -> Option<&LayerScore> {
        self.layers.iter().find(|s| s.layer == layer)
    }

    pub fn chosen_rho(&self) -> f64 {
        self.score(self.chosen).map_or(0.0, |s| s.rho)
    }
}

/// Per-hidden-layer `delta` (largest summed L1 distance between two protected
/// tuples' traces) and its growth rate `rho` over the earlier layers.
pub fn layer_sensitivity(
    net: &Network,
    schema: &AttributeSchema,
    space: &ProtectedSpace,
    inputs: &[Vec<i64>],
    epsilon1: f64,
) -> Result<LayerSensitivity> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hidden: Vec<usize> = net.hidden_layers().collect();
    let m = space.m();
    let pairs = m * m.saturating_sub(1) / 2;
    // sums[l][pair] over inputs
    let mut sums = vec![vec![0.0f64; pairs]; hidden.len()];
    for x in inputs {
        let traces = space
            .counterfactuals(schema, x)?
            .iter()
            .map(|row| net.forward(&to_f64(row), None))
            .collect::<Result<Vec<_>>>()?;
        for (li, &l) in hidden.iter().enumerate() {
            let mut p = 0;
            for a in 0..m {
                for b in a + 1..m {
                    let d: f64 = traces[a]
                        .layer(l)
                        .iter()
                        .zip(traces[b].layer(l))
                        .map(|(u, v)| (u - v).abs())
                        .sum();
                    sums[li][p] += d;
                    p += 1;
                }
            }
        }
    }
    let mut layers = Vec::with_capacity(hidden.len());
    let mut prior_max = 0.0f64;
    for (li, &l) in hidden.iter().enumerate() {
        let delta = sums[li].iter().copied().fold(0.0, f64::max);
        let rho = (delta - prior_max) / (prior_max + epsilon1);
        layers.push(LayerScore { layer: l, delta, rho });
        prior_max = prior_max.max(delta);
    }
    let chosen = layers
        .iter()
        .fold(None::<&LayerScore>, |best, s| match best {
            Some(b) if b.rho >= s.rho => Some(b),
            _ => Some(s),
        })
        .map_or(1, |s| s.layer);
    Ok(LayerSensitivity { layers, chosen })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl ActivationStats {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
        }
    }

    /// `{min, max, mean, mean ± std, mean ± 2 std}` clipped at 0, ascending, deduplicated.
    pub fn menu(&self) -> Vec<f64> {
        let mut v: Vec<f64> = [
            self.min,
            self.max,
            self.mean,
            self.mean - self.std,
            self.mean + self.std,
            self.mean - 2.0 * self.std,
            self.mean + 2.0 * self.std,
        ]
        .iter()
        .map(|&c| c.max(0.0))
        .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateValue {
    pub value: f64,
    pub accuracy: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronCandidates {
    pub layer: usize,
    pub neuron: usize,
    pub stats: ActivationStats,
    pub candidates: Vec<CandidateValue>,
    /// Largest admissible positive value.
    pub v1: Option<f64>,
    /// 0 when admissible, else the smallest admissible value.
    pub v2: Option<f64>,
}

impl NeuronCandidates {
    pub fn skipped(&self) -> bool {
        self.v1.is_none() || self.v2.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairnessImpact {
    /// Activating the neuron lowers the cluster count.
    Positive,
    /// Activating the neuron raises the cluster count.
    Negative,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcdResult {
    pub layer: usize,
    pub neuron: usize,
    pub v1: f64,
    pub v2: f64,
    pub mean_k_active: f64,
    pub mean_k_inactive: f64,
    /// `(E[k | do(v1)] - E[k | do(v2)]) / E[k]`.
    pub acd: f64,
    /// `E[Q_inf | do(v1)] - E[Q_inf | do(v2)]` in bits, unnormalized.
    pub acd_q_inf: f64,
    pub impact: FairnessImpact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteStats {
    pub mean_k: f64,
    pub mean_q_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MitigationMode {
    /// Force the neuron to 0.
    Deactivate,
    /// Force the neuron to its admissible activated value.
    Activate,
}

impl fmt::Display for MitigationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MitigationMode::Deactivate => "deactivate",
            MitigationMode::Activate => "activate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MitigationResult {
    pub intervention: Intervention,
    pub mode: Option<MitigationMode>,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub mean_k_before: f64,
    pub mean_k_after: f64,
    pub cases: usize,
}

impl MitigationResult {
    /// Relative reduction of the mean cluster count.
    pub fn k_reduction(&self) -> f64 {
        if self.mean_k_before == 0.0 {
            0.0
        } else {
            (self.mean_k_before - self.mean_k_after) / self.mean_k_before
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub sensitivity: LayerSensitivity,
    pub baseline_accuracy: f64,
    pub baseline: SuiteStats,
    pub cases: usize,
    pub candidates: Vec<NeuronCandidates>,
    pub acd: Vec<AcdResult>,
    /// Up to `top_k` neurons with the most negative ACD (activation mitigates).
    pub positive: Vec<AcdResult>,
    /// Up to `top_k` neurons with the most positive ACD (activation aggravates).
    pub negative: Vec<AcdResult>,
    pub top_k: usize,
}

impl Localization {
    pub fn layer(&self) -> usize {
        self.sensitivity.chosen
    }

    /// Neuron indices padded to `top_k` with `None`.
    pub fn padded(list: &[AcdResult], top_k: usize) -> Vec<Option<AcdResult>> {
        (0..top_k).map(|i| list.get(i).copied()).collect()
    }

    /// Carrier of the largest |ACD| among ranked neurons.
    pub fn top_by_magnitude(&self) -> Option<&AcdResult> {
        self.acd
            .iter()
            .filter(|a| a.acd != 0.0)
            .fold(None, |best: Option<&AcdResult>, a| match best {
                Some(b) if b.acd.abs() >= a.acd.abs() => Some(b),
                _ => Some(a),
            })
    }
}

/// Everything the debugging steps share: model, data, protected space and the test suite.
pub struct Debugger<'a> {
    net: &'a Network,
    schema: &'a AttributeSchema,
    space: ProtectedSpace,
    samples: Vec<(Vec<f64>, usize)>,
    inputs: Vec<Vec<i64>>,
    cfg: DebugConfig,
    baseline_accuracy: f64,
}

impl<'a> Debugger<'a> {
    pub fn new(
        net: &'a Network,
        schema: &'a AttributeSchema,
        data: &Dataset,
        inputs: Vec<Vec<i64>>,
        cfg: DebugConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if net.input_dim() != schema.num_features() {
            return Err(Error::shape("network input vs schema", schema.num_features(), net.input_dim()));
        }
        for x in &inputs {
            schema.check_non_protected(x)?;
        }
        let samples = data.samples();
        let baseline_accuracy = accuracy(net, &samples, None)?;
        Ok(Self {
            net,
            schema,
            space: schema.enumerate_protected()?,
            samples,
            inputs,
            cfg,
            baseline_accuracy,
        })
    }

    /// Test suite from search output: the `max_cases` highest-k cases, ties in input order.
    pub fn from_test_cases(
        net: &'a Network,
        schema: &'a AttributeSchema,
        data: &Dataset,
        cases: &[TestCase],
        cfg: DebugConfig,
    ) -> Result<Self> {
        let mut order: Vec<usize> = (0..cases.len()).collect();
        order.sort_by(|&a, &b| cases[b].k.cmp(&cases[a].k).then(a.cmp(&b)));
        let inputs = order.iter().take(cfg.max_cases).map(|&i| cases[i].x.clone()).collect();
        Self::new(net, schema, data, inputs, cfg)
    }

    pub fn inputs(&self) -> &[Vec<i64>] {
        &self.inputs
    }

    pub fn baseline_accuracy(&self) -> f64 {
        self.baseline_accuracy
    }

    pub fn config(&self) -> &DebugConfig {
        &self.cfg
    }

    pub fn accuracy(&self, iv: Option<Intervention>) -> Result<f64> {
        accuracy(self.net, &self.samples, iv)
    }

    /// Mean cluster count and mean `Q_inf` over the test suite.
    pub fn suite_stats(&self, iv: Option<Intervention>) -> Result<SuiteStats> {
        suite_stats(self.net, self.schema, &self.space, &self.inputs, self.cfg.epsilon, iv)
    }

    pub fn layer_sensitivity(&self) -> Result<LayerSensitivity> {
        layer_sensitivity(self.net, self.schema, &self.space, &self.inputs, self.cfg.epsilon1)
    }

    /// Activation statistics of every neuron of `layer` over all counterfactual forwards.
    pub fn activation_stats(&self, layer: usize) -> Result<Vec<ActivationStats>> {
        Intervention::new(layer, 0, 0.0).validate(self.net)?;
        let width = self.net.width(layer);
        let mut values = vec![Vec::new(); width];
        for x in &self.inputs {
            for row in self.space.counterfactuals(self.schema, x)? {
                let trace = self.net.forward(&to_f64(&row), None)?;
                for (j, &a) in trace.layer(layer).iter().enumerate() {
                    values[j].push(a);
                }
            }
        }
        Ok(values.iter().map(|v| ActivationStats::from_values(v)).collect())
    }

    pub fn is_admissible(&self, accuracy: f64) -> bool {
        (accuracy - self.baseline_accuracy).abs() <= self.cfg.epsilon2
    }

    fn candidates_for(&self, layer: usize, neuron: usize, stats: ActivationStats) -> Result<NeuronCandidates> {
        let candidates = stats
            .menu()
            .into_iter()
            .map(|value| {
                let accuracy = self.accuracy(Some(Intervention::new(layer, neuron, value)))?;
                Ok(CandidateValue {
                    value,
                    accuracy,
                    admissible: self.is_admissible(accuracy),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let v1 = candidates
            .iter()
            .rev()
            .find(|c| c.admissible && c.value > 0.0)
            .map(|c| c.value);
        let v2 = candidates.iter().find(|c| c.admissible).map(|c| c.value);
        Ok(NeuronCandidates {
            layer,
            neuron,
            stats,
            candidates,
            v1,
            v2,
        })
    }

    /// Candidate values and their admissibility for every neuron of `layer`.
    pub fn neuron_candidates(&self, layer: usize) -> Result<Vec<NeuronCandidates>> {
        let stats = self.activation_stats(layer)?;
        self.map_neurons(stats.len(), |j| self.candidates_for(layer, j, stats[j]))
    }

    /// ACD of `do(layer, neuron, v1)` against `do(layer, neuron, v2)`, normalized by `baseline_k`.
    pub fn acd(&self, layer: usize, neuron: usize, v1: f64, v2: f64, baseline: SuiteStats) -> Result<AcdResult> {
        let active = self.suite_stats(Some(Intervention::new(layer, neuron, v1)))?;
        let inactive = self.suite_stats(Some(Intervention::new(layer, neuron, v2)))?;
        let acd = (active.mean_k - inactive.mean_k) / baseline.mean_k;
        let impact = if acd > 0.0 {
            FairnessImpact::Negative
        } else if acd < 0.0 {
            FairnessImpact::Positive
        } else {
            FairnessImpact::Neutral
        };
        Ok(AcdResult {
            layer,
            neuron,
            v1,
            v2,
            mean_k_active: active.mean_k,
            mean_k_inactive: inactive.mean_k,
            acd,
            acd_q_inf: active.mean_q_inf - inactive.mean_q_inf,
            impact,
        })
    }

    /// Layer choice, candidate screening and ACD ranking.
    pub fn localize(&self) -> Result<Localization> {
        let sensitivity = self.layer_sensitivity()?;
        let layer = sensitivity.chosen;
        let baseline = self.suite_stats(None)?;
        let candidates = self.neuron_candidates(layer)?;
        let ranked: Vec<&NeuronCandidates> = candidates.iter().filter(|c| !c.skipped()).collect();
        let acd = self.map_neurons(ranked.len(), |i| {
            let c = ranked[i];
            self.acd(layer, c.neuron, c.v1.unwrap(), c.v2.unwrap(), baseline)
        })?;

        let mut negative: Vec<AcdResult> = acd.iter().copied().filter(|a| a.acd > 0.0).collect();
        negative.sort_by(|a, b| b.acd.total_cmp(&a.acd).then(a.neuron.cmp(&b.neuron)));
        negative.truncate(self.cfg.top_k);
        let mut positive: Vec<AcdResult> = acd.iter().copied().filter(|a| a.acd < 0.0).collect();
        positive.sort_by(|a, b| a.acd.total_cmp(&b.acd).then(a.neuron.cmp(&b.neuron)));
        positive.truncate(self.cfg.top_k);

        Ok(Localization {
            sensitivity,
            baseline_accuracy: self.baseline_accuracy,
            baseline,
            cases: self.inputs.len(),
            candidates,
            acd,
            positive,
            negative,
            top_k: self.cfg.top_k,
        })
    }

    /// Accuracy and mean cluster count before and after permanently applying `iv`.
    pub fn mitigate(&self, iv: Intervention) -> Result<MitigationResult> {
        iv.validate(self.net)?;
        let accuracy_after = self.accuracy(Some(iv))?;
        let drop = self.baseline_accuracy - accuracy_after;
        if drop.abs() > self.cfg.epsilon2 {
            return Err(Error::Inadmissible {
                layer: iv.layer,
                neuron: iv.neuron,
                value: iv.value,
                drop,
                budget: self.cfg.epsilon2,
            });
        }
        let before = self.suite_stats(None)?;
        let after = self.suite_stats(Some(iv))?;
        Ok(MitigationResult {
            intervention: iv,
            mode: None,
            accuracy_before: self.baseline_accuracy,
            accuracy_after,
            mean_k_before: before.mean_k,
            mean_k_after: after.mean_k,
            cases: self.inputs.len(),
        })
    }

    /// Mitigation suggested by a localization: deactivate the top aggravating
    /// neuron, or activate the top mitigating one. `None` when the list is empty.
    pub fn mitigate_mode(&self, loc: &Localization, mode: MitigationMode) -> Result<Option<MitigationResult>> {
        let pick = match mode {
            MitigationMode::Deactivate => loc.negative.first().map(|a| Intervention::new(a.layer, a.neuron, a.v2)),
            MitigationMode::Activate => loc.positive.first().map(|a| Intervention::new(a.layer, a.neuron, a.v1)),
        };
        pick.map(|iv| {
            self.mitigate(iv).map(|mut r| {
                r.mode = Some(mode);
                r
            })
        })
        .transpose()
    }

    /// Runs `f` over `0..n`, on `cfg.workers` threads when above 1. Output is in index order.
    fn map_neurons<T: Send>(&self, n: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
        if self.cfg.workers <= 1 || n <= 1 {
            return (0..n).map(f).collect();
        }
        let workers = self.cfg.workers.min(n);
        let f = &f;
        let mut chunks: Vec<Vec<(usize, Result<T>)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| s.spawn(move || (w..n).step_by(workers).map(|i| (i, f(i))).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().map(|h| h.join().expect("debug worker panicked")).collect()
        });
        let mut all: Vec<(usize, Result<T>)> = chunks.drain(..).flatten().collect();
        all.sort_by_key(|(i, _)| *i);
        all.into_iter().map(|(_, r)| r).collect()
    }
}

fn accuracy(net: &Network, samples: &[(Vec<f64>, usize)], iv: Option<Intervention>) -> Result<f64> {
    net.accuracy(samples.iter().map(|(x, y)| (x.as_slice(), *y)), iv)
}

/// Mean cluster count and mean `Q_inf` of `inputs` under an optional intervention.
pub fn suite_stats(
    net: &Network,
    schema: &AttributeSchema,
    space: &ProtectedSpace,
    inputs: &[Vec<i64>],
    epsilon: f64,
    iv: Option<Intervention>,
) -> Result<SuiteStats> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut k, mut q) = (0.0, 0.0);
    for x in inputs {
        let p = evaluate(net, schema, space, x, epsilon, iv)?.partition;
        k += p.k() as f64;
        q += p.q_infinity();
    }
    let n = inputs.len() as f64;
    Ok(SuiteStats {
        mean_k: k / n,
        mean_q_inf: q / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{two_path_dataset, two_path_net, two_path_schema, CARRIER_LAYER, CARRIER_NEURON, DEAD_NEURON};

    fn suite() -> Vec<Vec<i64>> {
        (0..=10).flat_map(|x0| [0, 5, 10].map(|x1| vec![x0, x1])).collect()
    }

    fn debugger<'a>(net: &'a Network, schema: &'a AttributeSchema) -> Debugger<'a> {
        Debugger::new(net, schema, &two_path_dataset(), suite(), DebugConfig::default()).unwrap()
    }

    #[test]
    fn sensitivity_single_pair_single_input() {
        let net = two_path_net();
        let schema = two_path_schema();
        let space = ProtectedSpace::from_tuples(vec![vec![0], vec![4]]);
        let s = layer_sensitivity(&net, &schema, &space, &[vec![4, 0]], 1e-7).unwrap();
        // layer 1: n1 differs by 2.0, n3 by 0.4
        assert!((s.layers[0].delta - 2.4).abs() < 1e-12);
        assert!((s.layers[0].rho - 2.4 / 1e-7).abs() < 1e-3);
        // layer 2: m1 = relu(0.6 z - 0.3) differs by 2.1
        assert!((s.layers[1].delta - 2.1).abs() < 1e-12);
        assert!(s.layers[1].rho < 0.0);
        assert_eq!(s.chosen, CARRIER_LAYER);
    }

    #[test]
    fn sensitivity_cut_path_is_zero() {
        let schema = two_path_schema();
        let mut net = two_path_net();
        net.dense_mut(2).set_weight(1, 1, 0.0);
        net.dense_mut(2).set_weight(1, 3, 0.0);
        let space = schema.enumerate_protected().unwrap();
        let s = layer_sensitivity(&net, &schema, &space, &suite(), 1e-7).unwrap();
        assert!(s.layers[0].delta > 0.0);
        assert_eq!(s.layers[1].delta, 0.0);
        assert!(s.layers[1].rho < 0.0);
    }

    #[test]
    fn sensitivity_rejects_empty() {
        let schema = two_path_schema();
        let space = schema.enumerate_protected().unwrap();
        assert!(layer_sensitivity(&two_path_net(), &schema, &space, &[], 1e-7).is_err());
    }

    #[test]
    fn candidate_menu_and_admissibility() {
        let net = two_path_net();
        let schema = two_path_schema();
        let d = debugger(&net, &schema);
        let cands = d.neuron_candidates(CARRIER_LAYER).unwrap();
        let carrier = &cands[CARRIER_NEURON];
        // n1 = 0.5 z, z uniform over 0..7
        assert_eq!(carrier.stats.min, 0.0);
        assert_eq!(carrier.stats.max, 3.5);
        assert!((carrier.stats.mean - 1.75).abs() < 1e-12);
        assert!((carrier.stats.std - 0.5 * (63.0f64 / 12.0).sqrt()).abs() < 1e-12);
        // mean + std and above flip all 24 rows at x0 = 4
        assert!((carrier.v1.unwrap() - 1.75).abs() < 1e-12);
        assert_eq!(carrier.v2, Some(0.0));

        let dead = &cands[DEAD_NEURON];
        assert_eq!(dead.candidates.len(), 1);
        assert_eq!(dead.v2, Some(0.0));
        assert!(dead.v1.is_none() && dead.skipped());

        // label-carrying n0 fails every candidate
        assert!(cands[0].skipped());
    }

    #[test]
    fn acd_signs_and_antisymmetry() {
        let net = two_path_net();
        let schema = two_path_schema();
        let d = debugger(&net, &schema);
        let base = d.suite_stats(None).unwrap();
        let a = d.acd(1, CARRIER_NEURON, 1.75, 0.0, base).unwrap();
        assert!(a.acd > 0.0);
        assert_eq!(a.impact, FairnessImpact::Negative);
        assert_eq!(a.mean_k_inactive, 1.0);
        let b = d.acd(1, CARRIER_NEURON, 0.0, 1.75, base).unwrap();
        assert_eq!(a.acd, -b.acd);
        assert_eq!(b.impact, FairnessImpact::Positive);
    }

    #[test]
    fn acd_zero_for_invisible_neuron() {
        let schema = two_path_schema();
        let mut net = two_path_net();
        net.dense_mut(2).set_weight(1, 3, 0.0);
        let d = debugger(&net, &schema);
        let base = d.suite_stats(None).unwrap();
        let a = d.acd(1, 3, 5.0, 0.0, base).unwrap();
        assert_eq!(a.acd, 0.0);
        assert_eq!(a.impact, FairnessImpact::Neutral);
    }

    #[test]
    fn localize_picks_carrier() {
        let net = two_path_net();
        let schema = two_path_schema();
        let d = debugger(&net, &schema);
        let loc = d.localize().unwrap();
        assert_eq!(loc.layer(), CARRIER_LAYER);
        assert_eq!(loc.top_by_magnitude().unwrap().neuron, CARRIER_NEURON);
        assert_eq!(loc.negative[0].neuron, CARRIER_NEURON);
        let padded = Localization::padded(&loc.positive, 3);
        assert_eq!(padded.len(), 3);
        assert!(padded.iter().all(Option::is_none));
        assert_eq!(d.localize().unwrap(), loc);
    }

    #[test]
    fn parallel_localize_matches_serial() {
        let net = two_path_net();
        let schema = two_path_schema();
        let serial = debugger(&net, &schema).localize().unwrap();
        let cfg = DebugConfig {
            workers: 3,
            ..DebugConfig::default()
        };
        let par = Debugger::new(&net, &schema, &two_path_dataset(), suite(), cfg)
            .unwrap()
            .localize()
            .unwrap();
        assert_eq!(serial, par);
    }

    #[test]
    fn deactivating_carrier_reduces_k() {
        let net = two_path_net();
        let schema = two_path_schema();
        let d = debugger(&net, &schema);
        let r = d.mitigate(Intervention::new(1, CARRIER_NEURON, 0.0)).unwrap();
        assert!(r.mean_k_after < r.mean_k_before);
        assert!((r.accuracy_after - r.accuracy_before).abs() <= 0.05);
        assert_eq!(r.accuracy_after, 1.0);
        let loc = d.localize().unwrap();
        let via_mode = d.mitigate_mode(&loc, MitigationMode::Deactivate).unwrap().unwrap();
        assert_eq!(via_mode.intervention, Intervention::new(1, CARRIER_NEURON, 0.0));
        assert!(d.mitigate_mode(&loc, MitigationMode::Activate).unwrap().is_none());
    }

    #[test]
    fn dead_neuron_mitigation_is_noop() {
        let net = two_path_net();
        let schema = two_path_schema();
        let d = debugger(&net, &schema);
        let r = d.mitigate(Intervention::new(1, DEAD_NEURON, 0.0)).unwrap();
        assert_eq!(r.accuracy_after, r.accuracy_before);
        assert_eq!(r.mean_k_after, r.mean_k_before);
    }

    #[test]
    fn inadmissible_mitigation_rejected() {
        let net = two_path_net();
        let schema = two_path_schema();
        let d = debugger(&net, &schema);
        assert!(matches!(
            d.mitigate(Intervention::new(1, 0, 0.0)),
            Err(Error::Inadmissible { .. })
        ));
        assert!(matches!(d.mitigate(Intervention::new(3, 0, 0.0)), Err(Error::Intervention(_))));
    }

    #[test]
    fn from_test_cases_keeps_highest_k() {
        let net = two_path_net();
        let schema = two_path_schema();
        let case = |x0, k| TestCase {
            x: vec![x0, 0],
            k,
            q_inf: 0.0,
            q_shannon: 0.0,
            delta: 0.0,
            phase: crate::search::Phase::Global,
            wall_time: 0.0,
        };
        let cases = vec![case(1, 1), case(4, 7), case(2, 1), case(3, 2)];
        let cfg = DebugConfig {
            max_cases: 2,
            ..DebugConfig::default()
        };
        let d = Debugger::from_test_cases(&net, &schema, &two_path_dataset(), &cases, cfg).unwrap();
        assert_eq!(d.inputs(), &[vec![4, 0], vec![3, 0]]);
    }
}
