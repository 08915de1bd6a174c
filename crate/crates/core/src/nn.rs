//! Dense feedforward classifier: rectifier hidden layers, softmax output.
//!
//! Layers are numbered the way the rest of the crate talks about them:
//! layer 0 is the input, layers `1..N` are hidden, layer `N` is the
//! probability vector. Weight matrix `i` (0-based) maps layer `i` to
//! layer `i + 1`.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

/// One affine map, weights stored row-major (`rows` outputs x `cols` inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    pub fn from_rows(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let rows = weights.len();
        if bias.len() != rows {
            return Err(Error::shape("bias length", rows, bias.len()));
        }
        let cols = weights.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows * cols);
        for row in weights {
            if row.len() != cols {
                return Err(Error::shape("weight row length", cols, row.len()));
            }
            flat.extend(row);
        }
        Ok(Self {
            rows,
            cols,
            weights: flat,
            bias,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    pub fn set_weight(&mut self, row: usize, col: usize, value: f64) {
        self.weights[row * self.cols + col] = value;
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn set_bias(&mut self, row: usize, value: f64) {
        self.bias[row] = value;
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.rows).map(|r| {
            self.row(r)
                .iter()
                .zip(input)
                .fold(self.bias[r], |acc, (w, x)| acc + w * x)
        }));
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

/// Force the output of one hidden neuron to a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    /// Hidden layer, `1..N`.
    pub layer: usize,
    pub neuron: usize,
    pub value: f64,
}

impl Intervention {
    pub fn new(layer: usize, neuron: usize, value: f64) -> Self {
        Self {
            layer,
            neuron,
            value,
        }
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.layer == 0 || self.layer >= net.depth() {
            return Err(Error::Intervention(format!(
                "layer {} is not a hidden layer (valid: 1..{})",
                self.layer,
                net.depth()
            )));
        }
        let width = net.width(self.layer);
        if self.neuron >= width {
            return Err(Error::Intervention(format!(
                "neuron {} out of range for layer {} of width {}",
                self.neuron, self.layer, width
            )));
        }
        if !self.value.is_finite() {
            return Err(Error::Intervention("value must be finite".into()));
        }
        Ok(())
    }
}

/// Post-activation outputs of every non-input layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    layers: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// Output of layer `i` (1-based; `N` is the probability vector).
    pub fn layer(&self, i: usize) -> &[f64] {
        &self.layers[i - 1]
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn label(&self) -> usize {
        argmax(self.probabilities())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_dims: Vec<usize>,
    layers: Vec<Dense>,
}

impl Network {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let mut layer_dims = vec![layers[0].cols];
        for (i, layer) in layers.iter().enumerate() {
            let prev = layer_dims[i];
            if layer.cols != prev {
                return Err(Error::shape(format!("columns of weight matrix {i}"), prev, layer.cols));
            }
            if layer.rows == 0 {
                return Err(Error::Config(format!("layer {} has zero width", i + 1)));
            }
            layer_dims.push(layer.rows);
        }
        if layer_dims[0] == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        Ok(Self { layer_dims, layers })
    }

    /// All-zero network with the given dimensions (input first, output last).
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::Config("need input and output dimensions".into()));
        }
        Self::new(
            layer_dims
                .windows(2)
                .map(|w| Dense::zeros(w[1], w[0]))
                .collect(),
        )
    }

    /// He-uniform weights, zero biases.
    pub fn random(layer_dims: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(layer_dims)?;
        for layer in &mut net.layers {
            let bound = (6.0 / layer.cols as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Number of weight layers (`N`).
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn width(&self, layer: usize) -> usize {
        self.layer_dims[layer]
    }

    /// Hidden layer indices, `1..N`.
    pub fn hidden_layers(&self) -> std::ops::Range<usize> {
        1..self.depth()
    }

    /// Weight matrix feeding layer `layer` (1-based).
    pub fn dense(&self, layer: usize) -> &Dense {
        &self.layers[layer - 1]
    }

    pub fn dense_mut(&mut self, layer: usize) -> &mut Dense {
        &mut self.layers[layer - 1]
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), input.len()));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64], intervention: Option<Intervention>) -> Result<ForwardTrace> {
        self.check_input(input)?;
        if let Some(iv) = &intervention {
            iv.validate(self)?;
        }
        let mut layers: Vec<Vec<f64>> = Vec::with_capacity(self.depth());
        for (i, dense) in self.layers.iter().enumerate() {
            let prev = if i == 0 { input } else { &layers[i - 1] };
            let mut out = Vec::with_capacity(dense.rows);
            dense.apply(prev, &mut out);
            let layer = i + 1;
            if layer == self.depth() {
                softmax_in_place(&mut out);
            } else {
                relu_in_place(&mut out);
                if let Some(iv) = intervention.filter(|iv| iv.layer == layer) {
                    out[iv.neuron] = iv.value;
                }
            }
            layers.push(out);
        }
        Ok(ForwardTrace { layers })
    }

    /// Class probabilities without keeping the intermediate layers.
    pub fn probabilities(&self, input: &[f64], intervention: Option<Intervention>) -> Result<Vec<f64>> {
        self.check_input(input)?;
        if let Some(iv) = &intervention {
            iv.validate(self)?;
        }
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for (i, dense) in self.layers.iter().enumerate() {
            dense.apply(&cur, &mut next);
            let layer = i + 1;
            if layer == self.depth() {
                softmax_in_place(&mut next);
            } else {
                relu_in_place(&mut next);
                if let Some(iv) = intervention.filter(|iv| iv.layer == layer) {
                    next[iv.neuron] = iv.value;
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Argmax of the probability vector, ties to the lowest index.
    pub fn predict_label(&self, input: &[f64], intervention: Option<Intervention>) -> Result<usize> {
        Ok(argmax(&self.probabilities(input, intervention)?))
    }

    /// Gradient of the cross-entropy loss at `(input, label)` with respect to the input.
    pub fn input_gradient(&self, input: &[f64], label: usize) -> Result<Vec<f64>> {
        self.check_input(input)?;
        if label >= self.output_dim() {
            return Err(Error::shape("label index bound", self.output_dim(), label + 1));
        }
        let acts = self.activations(input);
        Ok(self.backward(input, &acts, label, None))
    }

    /// Fraction of rows whose predicted label equals the given label.
    pub fn accuracy<'a, I>(&self, rows: I, intervention: Option<Intervention>) -> Result<f64>
    where
        I: IntoIterator<Item = (&'a [f64], usize)>,
    {
        let mut total = 0usize;
        let mut correct = 0usize;
        for (x, y) in rows {
            total += 1;
            if self.predict_label(x, intervention)? == y {
                correct += 1;
            }
        }
        if total == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(correct as f64 / total as f64)
    }

    // Post-activation outputs, index 0 = first hidden layer.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.depth());
        for (i, dense) in self.layers.iter().enumerate() {
            let prev = if i == 0 { input } else { &acts[i - 1] };
            let mut out = Vec::with_capacity(dense.rows);
            dense.apply(prev, &mut out);
            if i + 1 == self.depth() {
                softmax_in_place(&mut out);
            } else {
                relu_in_place(&mut out);
            }
            acts.push(out);
        }
        acts
    }

    /// Backpropagates cross-entropy; accumulates parameter gradients when asked.
    fn backward(
        &self,
        input: &[f64],
        acts: &[Vec<f64>],
        label: usize,
        mut grads: Option<&mut [Dense]>,
    ) -> Vec<f64> {
        // softmax + cross-entropy: dL/dz = p - onehot(label)
        let mut delta: Vec<f64> = acts[self.depth() - 1].clone();
        delta[label] -= 1.0;
        for i in (0..self.depth()).rev() {
            let dense = &self.layers[i];
            let prev = if i == 0 { input } else { &acts[i - 1] };
            if let Some(g) = grads.as_deref_mut() {
                let g = &mut g[i];
                for (r, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[r] += d;
                    let row = &mut g.weights[r * dense.cols..(r + 1) * dense.cols];
                    for (w, x) in row.iter_mut().zip(prev) {
                        *w += d * x;
                    }
                }
            }
            let mut back = vec![0.0; dense.cols];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (b, w) in back.iter_mut().zip(dense.row(r)) {
                    *b += d * w;
                }
            }
            if i > 0 {
                // rectifier derivative, 0 at the kink
                for (b, a) in back.iter_mut().zip(&acts[i - 1]) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
            delta = back;
        }
        delta
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = WeightsFile {
            format_version: WEIGHTS_FORMAT_VERSION,
            layer_dims: self.layer_dims.clone(),
            hidden_activation: "relu".into(),
            output_activation: "softmax".into(),
            layers: self
                .layers
                .iter()
                .map(|d| LayerRecord {
                    weights: d.to_rows(),
                    bias: d.bias.clone(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: WeightsFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if file.format_version != WEIGHTS_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "weights file",
                found: file.format_version,
                expected: WEIGHTS_FORMAT_VERSION,
            });
        }
        if file.hidden_activation != "relu" {
            return Err(Error::Parse {
                field: "hidden_activation".into(),
                message: format!("unsupported activation `{}`", file.hidden_activation),
            });
        }
        if file.output_activation != "softmax" {
            return Err(Error::Parse {
                field: "output_activation".into(),
                message: format!("unsupported activation `{}`", file.output_activation),
            });
        }
        if file.layer_dims.len() != file.layers.len() + 1 {
            return Err(Error::shape(
                "layer_dims length",
                file.layers.len() + 1,
                file.layer_dims.len(),
            ));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, rec) in file.layers.into_iter().enumerate() {
            let (rows, cols) = (file.layer_dims[i + 1], file.layer_dims[i]);
            if rec.weights.len() != rows {
                return Err(Error::shape(format!("layers[{i}].weights rows"), rows, rec.weights.len()));
            }
            if let Some(bad) = rec.weights.iter().find(|r| r.len() != cols) {
                return Err(Error::shape(format!("layers[{i}].weights columns"), cols, bad.len()));
            }
            layers.push(Dense::from_rows(rec.weights, rec.bias).map_err(|e| match e {
                Error::Shape { expected, actual, .. } => {
                    Error::shape(format!("layers[{i}].bias length"), expected, actual)
                }
                other => other,
            })?);
        }
        Self::new(layers)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    format_version: u32,
    layer_dims: Vec<usize>,
    hidden_activation: String,
    output_activation: String,
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Hidden widths; the output width is the number of classes.
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![64, 32, 16, 8, 4],
            epochs: 1000,
            batch_size: 128,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Mini-batch SGD on mean cross-entropy. Deterministic for a fixed seed.
pub fn train(features: &[Vec<f64>], labels: &[usize], classes: usize, config: &TrainConfig) -> Result<Network> {
    config.validate()?;
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features.len() != labels.len() {
        return Err(Error::shape("label count", features.len(), labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::shape("label index bound", classes, bad + 1));
    }
    let input_dim = features[0].len();
    let mut dims = vec![input_dim];
    dims.extend(&config.hidden_layers);
    dims.push(classes);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Network::random(&dims, &mut rng)?;
    for f in features {
        net.check_input(f)?;
    }
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut grads: Vec<Dense> = net.layers.iter().map(|d| Dense::zeros(d.rows, d.cols)).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            for g in &mut grads {
                g.weights.iter_mut().for_each(|w| *w = 0.0);
                g.bias.iter_mut().for_each(|b| *b = 0.0);
            }
            for &idx in batch {
                let acts = net.activations(&features[idx]);
                epoch_loss -= acts[net.depth() - 1][labels[idx]].max(f64::MIN_POSITIVE).ln();
                net.backward(&features[idx], &acts, labels[idx], Some(&mut grads));
            }
            let scale = config.learning_rate / batch.len() as f64;
            for (layer, g) in net.layers.iter_mut().zip(&grads) {
                for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                    *w -= scale * gw;
                }
                for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                    *b -= scale * gb;
                }
            }
        }
        if !epoch_loss.is_finite() || net.layers.iter().any(|d| d.weights.iter().any(|w| !w.is_finite())) {
            return Err(Error::TrainingDiverged { epoch });
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 2-2-2 net with hand-picked weights.
    fn hand_net() -> Network {
        Network::new(vec![
            Dense::from_rows(vec![vec![1.0, -1.0], vec![0.5, 2.0]], vec![0.0, -1.0]).unwrap(),
            Dense::from_rows(vec![vec![1.0, 0.0], vec![-1.0, 1.0]], vec![0.1, 0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn zero_net_is_uniform() {
        let net = Network::zeros(&[3, 4, 2]).unwrap();
        let p = net.probabilities(&[1.0, -2.0, 3.0], None).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert_eq!(net.predict_label(&[0.0; 3], None).unwrap(), 0);
    }

    #[test]
    fn hand_built_forward() {
        // input (2, 1): hidden = relu(2-1, 1+2-1) = (1, 2)
        // logits = (1 + 0.1, -1 + 2) = (1.1, 1.0)
        let net = hand_net();
        let trace = net.forward(&[2.0, 1.0], None).unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace.layer(1), &[1.0, 2.0]);
        let e = (1.0f64 - 1.1).exp();
        let p0 = 1.0 / (1.0 + e);
        assert!((trace.probabilities()[0] - p0).abs() < 1e-12);
        assert!((trace.probabilities()[1] - e / (1.0 + e)).abs() < 1e-12);
        assert_eq!(trace.label(), 0);

        // input (0, 1): hidden = relu(-1, 2-1) = (0, 1); logits = (0.1, 1.0)
        let trace = net.forward(&[0.0, 1.0], None).unwrap();
        assert_eq!(trace.layer(1), &[0.0, 1.0]);
        assert_eq!(trace.label(), 1);
    }

    #[test]
    fn intervention_forces_value_and_is_noop_on_dead_neuron() {
        let net = hand_net();
        let base = net.forward(&[0.0, 1.0], None).unwrap();
        let same = net.forward(&[0.0, 1.0], Some(Intervention::new(1, 0, 0.0))).unwrap();
        assert_eq!(base, same);
        let forced = net.forward(&[0.0, 1.0], Some(Intervention::new(1, 1, 5.0))).unwrap();
        assert_eq!(forced.layer(1), &[0.0, 5.0]);
    }

    #[test]
    fn intervention_rejects_output_layer_and_bad_neuron() {
        let net = hand_net();
        assert!(matches!(
            net.forward(&[0.0, 0.0], Some(Intervention::new(2, 0, 1.0))),
            Err(Error::Intervention(_))
        ));
        assert!(net.forward(&[0.0, 0.0], Some(Intervention::new(1, 2, 1.0))).is_err());
        assert!(net.forward(&[0.0, 0.0], Some(Intervention::new(0, 0, 1.0))).is_err());
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let net = hand_net();
        assert!(matches!(net.forward(&[1.0], None), Err(Error::Shape { expected: 2, actual: 1, .. })));
        assert!(net.input_gradient(&[1.0, 2.0, 3.0], 0).is_err());
        assert!(net.input_gradient(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.8]), 1);
        assert_eq!(argmax(&[0.3, 0.7, 0.7]), 1);
    }

    #[test]
    fn zero_net_gradient_is_zero() {
        let net = Network::zeros(&[3, 5, 2]).unwrap();
        assert_eq!(net.input_gradient(&[1.0, 2.0, 3.0], 1).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn linear_net_gradient_closed_form() {
        // single softmax layer: dL/dx = W^T (p - e_y)
        let w = vec![vec![0.3, -1.2, 0.5], vec![-0.7, 0.4, 2.0]];
        let net = Network::new(vec![Dense::from_rows(w.clone(), vec![0.1, -0.2]).unwrap()]).unwrap();
        let x = [0.5, 1.5, -0.25];
        let z: Vec<f64> = (0..2)
            .map(|r| w[r].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + [0.1, -0.2][r])
            .collect();
        let s = z[0].exp() + z[1].exp();
        let p = [z[0].exp() / s, z[1].exp() / s];
        let y = 1;
        let g = net.input_gradient(&x, y).unwrap();
        for c in 0..3 {
            let expect: f64 = (0..2).map(|r| w[r][c] * (p[r] - if r == y { 1.0 } else { 0.0 })).sum();
            assert!((g[c] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracy_counts_matches() {
        // constant net always picks class 0
        let net = Network::zeros(&[1, 2]).unwrap();
        let xs = [vec![0.0], vec![1.0]];
        assert_eq!(net.accuracy(xs.iter().map(|x| (x.as_slice(), 0)), None).unwrap(), 1.0);
        assert_eq!(net.accuracy(xs.iter().map(|x| (x.as_slice(), 1)), None).unwrap(), 0.0);
        assert!(matches!(
            net.accuracy(std::iter::empty::<(&[f64], usize)>(), None),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn accuracy_hand_rows() {
        let net = hand_net();
        // labels by hand: (2,1)->0, (0,1)->1; (0,0): hidden (0,0), logits (0.1,0) -> 0;
        // (0,3): hidden (0,5), logits (0.1,5) -> 1
        let rows = [
            (vec![2.0, 1.0], 0usize),
            (vec![0.0, 1.0], 1),
            (vec![0.0, 0.0], 1),
            (vec![0.0, 3.0], 1),
        ];
        let acc = net.accuracy(rows.iter().map(|(x, y)| (x.as_slice(), *y)), None).unwrap();
        assert_eq!(acc, 0.75);
    }

    #[test]
    fn weights_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Network::random(&[4, 6, 3, 2], &mut rng).unwrap();
        let back = Network::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn truncated_weights_file_is_parse_error() {
        let json = hand_net().to_json().unwrap();
        let cut = &json[..json.len() / 2];
        match Network::from_json(cut) {
            Err(Error::Parse { field, .. }) => assert!(field.starts_with("layers"), "{field}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_dims_is_shape_error() {
        let json = hand_net().to_json().unwrap();
        let bad = json.replacen("\"layer_dims\": [\n    2,", "\"layer_dims\": [\n    3,", 1);
        assert_ne!(bad, json);
        assert!(matches!(Network::from_json(&bad), Err(Error::Shape { .. })));
    }

    #[test]
    fn single_row_training() {
        let cfg = TrainConfig {
            hidden_layers: vec![4],
            epochs: 50,
            batch_size: 8,
            learning_rate: 0.1,
            seed: 1,
        };
        let net = train(&[vec![1.0, -1.0]], &[1], 2, &cfg).unwrap();
        assert_eq!(net.predict_label(&[1.0, -1.0], None).unwrap(), 1);
    }

    #[test]
    fn training_rejects_empty_and_diverges_loudly() {
        let cfg = TrainConfig::default();
        assert!(matches!(train(&[], &[], 2, &cfg), Err(Error::EmptyDataset)));
        let cfg = TrainConfig {
            hidden_layers: vec![4],
            epochs: 5,
            batch_size: 1,
            learning_rate: 1e300,
            seed: 0,
        };
        let xs = vec![vec![1e10, -1e10], vec![-1e10, 1e10]];
        assert!(matches!(train(&xs, &[0, 1], 2, &cfg), Err(Error::TrainingDiverged { .. })));
    }
}
