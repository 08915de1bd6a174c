//! Hand-built networks with known counterfactual behaviour.
//!
//! The two-path network routes a protected attribute `z` (eight values)
//! to the output through two first-layer neurons:
//!
//! | layer 1 | formula            | role                         |
//! |---------|--------------------|------------------------------|
//! | n0      | relu(x0)           | label signal                 |
//! | n1      | relu(0.5 z)        | protected carrier            |
//! | n2      | relu(-1 - x0)      | dead                         |
//! | n3      | relu(0.1 z)        | weak second protected path   |
//!
//! Layer 2 computes `m0 = relu(n0)` and `m1 = relu(n1 + n3 - 0.3)`, and the
//! favorable logit is `10 (m0 - 4.5) + 2 m1`. Only `x0 = 4` sits close
//! enough to the boundary for the protected value to move the score, and
//! there the carrier flips the label for `z >= 5`.

use crate::dataset::{Attribute, AttributeSchema, Dataset};
use crate::error::Result;
use crate::nn::{Dense, Network};

pub const CARRIER_LAYER: usize = 1;
pub const CARRIER_NEURON: usize = 1;
pub const DEAD_NEURON: usize = 2;

/// `x0`, `x1` in `[0, 10]` (non-protected) and `z` in `[0, 7]` (protected).
pub fn two_path_schema() -> AttributeSchema {
    AttributeSchema::new(
        vec![
            Attribute::new("x0", 0, 10, false),
            Attribute::new("x1", 0, 10, false),
            Attribute::new("z", 0, 7, true).categorical(),
        ],
        "y",
        1,
    )
    .expect("fixture schema is valid")
}

pub fn two_path_net() -> Network {
    let l1 = Dense::from_rows(
        vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.5],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.1],
        ],
        vec![0.0, 0.0, -1.0, 0.0],
    );
    let l2 = Dense::from_rows(
        vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]],
        vec![0.0, -0.3],
    );
    let out = Dense::from_rows(vec![vec![0.0, 0.0], vec![10.0, 2.0]], vec![0.0, -45.0]);
    Network::new(vec![l1.unwrap(), l2.unwrap(), out.unwrap()]).expect("fixture shapes chain")
}

/// Every `(x0, x1, z)` on the grid `x1 in {0, 5, 10}`, labelled `x0 >= 5`.
pub fn two_path_dataset() -> Dataset {
    let schema = two_path_schema();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for x0 in 0..=10 {
        for x1 in [0, 5, 10] {
            for z in 0..=7 {
                rows.push(vec![x0, x1, z]);
                labels.push(usize::from(x0 >= 5));
            }
        }
    }
    Dataset::new(&schema, rows, labels).expect("fixture rows are in range")
}

/// Copy of `net` with every first-layer weight reading a protected input set to zero.
pub fn zero_protected_inputs(net: &Network, schema: &AttributeSchema) -> Result<Network> {
    let mut out = net.clone();
    let first = out.dense_mut(1);
    for r in 0..first.rows() {
        for &c in schema.protected_indices() {
            first.set_weight(r, c, 0.0);
        }
    }
    Ok(out)
}

/// Network whose output ignores its input entirely.
pub fn constant_net(input_dim: usize) -> Network {
    let mut net = Network::zeros(&[input_dim, 4, 2]).expect("valid dims");
    net.dense_mut(2).set_bias(1, 0.7);
    net
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::to_f64;

    #[test]
    fn two_path_scores_by_hand() {
        let net = two_path_net();
        // x0 = 4, z = 7: n1 = 3.5, n3 = 0.7, m1 = 3.9, logit = -5 + 7.8 = 2.8
        let p = net.probabilities(&[4.0, 0.0, 7.0], None).unwrap();
        let expect = 1.0 / (1.0 + (-2.8f64).exp());
        assert!((p[1] - expect).abs() < 1e-12);
        // z = 0: m1 = 0, logit = -5
        let p = net.probabilities(&[4.0, 0.0, 0.0], None).unwrap();
        assert!((p[1] - 1.0 / (1.0 + 5f64.exp())).abs() < 1e-12);
    }

    #[test]
    fn two_path_accuracy() {
        let net = two_path_net();
        let data = two_path_dataset();
        // mislabelled rows: x0 = 4 with z in {5, 6, 7}
        let acc = net
            .accuracy(data.samples().iter().map(|(x, y)| (x.as_slice(), *y)), None)
            .unwrap();
        let expect = 1.0 - 9.0 / data.len() as f64;
        assert!((acc - expect).abs() < 1e-12, "{acc}");
        let row = to_f64(&[4, 0, 5]);
        assert_eq!(net.predict_label(&row, None).unwrap(), 1);
    }
}
