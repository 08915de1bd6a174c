//! Independent oracles shared by the property tests and the acceptance target.
#![allow(dead_code)]

use qidfair::dataset::{to_f64, Attribute, AttributeSchema};
use qidfair::nn::{Dense, Network};
use qidfair::qid::{cluster_scores, ClusterPartition, ScoreSet};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// `Q_1 <= Q_inf <= log2 m` for a partition with the given sizes.
pub fn check_entropy_order(sizes: &[usize]) -> Result<(), String> {
    let p = ClusterPartition::from_sizes(sizes).map_err(|e| e.to_string())?;
    let m: usize = sizes.iter().sum();
    let (q1, qi) = (p.q_shannon(), p.q_infinity());
    let bound = (m as f64).log2();
    if q1 <= qi + 1e-12 && qi <= bound + 1e-12 && q1 >= -1e-12 {
        Ok(())
    } else {
        Err(format!("sizes {sizes:?}: Q1={q1} Qinf={qi} log2 m={bound}"))
    }
}

/// Smallest number of groups covering `scores` with each group's diameter at
/// most `eps`, by enumerating set partitions.
pub fn exhaustive_min_k(scores: &[f64], eps: f64) -> usize {
    fn rec(i: usize, scores: &[f64], eps: f64, groups: &mut Vec<(f64, f64)>, best: &mut usize) {
        if groups.len() >= *best {
            return;
        }
        if i == scores.len() {
            *best = groups.len();
            return;
        }
        let s = scores[i];
        for g in 0..groups.len() {
            let (lo, hi) = groups[g];
            let (nlo, nhi) = (lo.min(s), hi.max(s));
            if nhi - nlo <= eps {
                groups[g] = (nlo, nhi);
                rec(i + 1, scores, eps, groups, best);
                groups[g] = (lo, hi);
            }
        }
        groups.push((s, s));
        rec(i + 1, scores, eps, groups, best);
        groups.pop();
    }
    let mut best = scores.len();
    rec(0, scores, eps, &mut Vec::new(), &mut best);
    best
}

/// Every cluster respects the diameter bound, members partition the indices,
/// and `k` equals the exhaustive minimum.
pub fn check_clustering(scores: &[f64], eps: f64) -> Result<(), String> {
    let set = ScoreSet::new(scores.to_vec()).map_err(|e| e.to_string())?;
    let p = cluster_scores(&set, eps).map_err(|e| e.to_string())?;
    let mut seen = vec![false; scores.len()];
    for c in p.clusters() {
        let vals: Vec<f64> = c.members.iter().map(|&i| scores[i]).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > eps {
            return Err(format!("{scores:?}: cluster {:?} diameter {}", c.members, hi - lo));
        }
        for &i in &c.members {
            if std::mem::replace(&mut seen[i], true) {
                return Err(format!("{scores:?}: index {i} in two clusters"));
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(format!("{scores:?}: not every index clustered"));
    }
    let min_k = exhaustive_min_k(scores, eps);
    if p.k() != min_k {
        return Err(format!("{scores:?} eps {eps}: k={} but minimum is {min_k}", p.k()));
    }
    Ok(())
}

pub fn random_net(rng: &mut impl Rng) -> Network {
    let depth = rng.gen_range(2..=4);
    let mut dims = vec![rng.gen_range(1..=6)];
    for _ in 1..depth {
        dims.push(rng.gen_range(2..=7));
    }
    dims.push(rng.gen_range(2..=3));
    let layers = dims
        .windows(2)
        .map(|w| {
            let rows = (0..w[1])
                .map(|_| (0..w[0]).map(|_| rng.gen_range(-1.5..1.5)).collect())
                .collect();
            let bias = (0..w[1]).map(|_| rng.gen_range(-0.5..0.5)).collect();
            Dense::from_rows(rows, bias).unwrap()
        })
        .collect();
    Network::new(layers).unwrap()
}

/// Pre-activations of every layer (output logits last), computed from the raw weights.
pub fn pre_activations(net: &Network, input: &[f64]) -> Vec<Vec<f64>> {
    let mut a = input.to_vec();
    let mut out = Vec::new();
    for l in 1..=net.depth() {
        let d = net.dense(l);
        let z: Vec<f64> = (0..d.rows())
            .map(|r| d.bias()[r] + (0..d.cols()).map(|c| d.weight(r, c) * a[c]).sum::<f64>())
            .collect();
        a = z.iter().map(|v| v.max(0.0)).collect();
        out.push(z);
    }
    out
}

/// Cross-entropy from the logits, `log(1 + sum exp(z_j - z_max))` form to keep
/// precision when the prediction is confident.
pub fn loss(net: &Network, input: &[f64], label: usize) -> f64 {
    let z = pre_activations(net, input).pop().unwrap();
    let (top, &zmax) = z
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let rest: f64 = z
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != top)
        .map(|(_, &v)| (v - zmax).exp())
        .sum();
    (zmax - z[label]) + rest.ln_1p()
}

/// Analytic input gradient against central differences, away from ReLU kinks.
/// Returns the relative error `|g - fd| / |fd|` (2-norms).
pub fn gradient_check(net: &Network, rng: &mut impl Rng) -> Result<f64, String> {
    let input = loop {
        let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let pre = pre_activations(net, &x);
        if pre[..pre.len() - 1].iter().flatten().all(|z| z.abs() > 1e-3) {
            break x;
        }
    };
    let label = rng.gen_range(0..net.output_dim());
    let g = net.input_gradient(&input, label).map_err(|e| e.to_string())?;
    let fd: Vec<f64> = (0..input.len())
        .map(|i| {
            let mut hi = input.clone();
            let mut lo = input.clone();
            hi[i] += FD_STEP;
            lo[i] -= FD_STEP;
            (loss(net, &hi, label) - loss(net, &lo, label)) / (2.0 * FD_STEP)
        })
        .collect();
    let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-9 {
        // every path is inactive; the analytic gradient must vanish too
        return if diff < 1e-9 { Ok(0.0) } else { Err(format!("zero fd, analytic {g:?}")) };
    }
    let rel = diff / norm;
    if rel <= FD_TOLERANCE {
        Ok(rel)
    } else {
        Err(format!("relative error {rel:e}: analytic {g:?} vs fd {fd:?}"))
    }
}

pub fn random_schema(rng: &mut impl Rng) -> AttributeSchema {
    let n_prot = rng.gen_range(1..=3);
    let n_free = rng.gen_range(1..=3);
    let mut attrs = Vec::new();
    for i in 0..n_prot + n_free {
        let lo = rng.gen_range(-3..=3);
        let hi = lo + rng.gen_range(0..=3);
        attrs.push(Attribute::new(format!("a{i}"), lo, hi, i < n_prot));
    }
    // interleave protected and free columns
    let k = attrs.len();
    attrs.rotate_left(rng.gen_range(0..k));
    AttributeSchema::new(attrs, "y", 1).unwrap()
}

/// `m` is the product of protected domain sizes, tuples are distinct and in
/// range, and the counterfactuals of `x` cover every tuple with `x` unchanged.
pub fn check_protected_space(schema: &AttributeSchema, rng: &mut impl Rng) -> Result<(), String> {
    let space = schema.enumerate_protected().map_err(|e| e.to_string())?;
    let expect: usize = schema
        .protected_indices()
        .iter()
        .map(|&i| schema.attributes()[i].domain_size())
        .product();
    if space.m() != expect {
        return Err(format!("m={} expected {expect}", space.m()));
    }
    let x: Vec<i64> = schema.non_protected_attributes().map(|a| rng.gen_range(a.lo()..=a.hi())).collect();
    let rows = space.counterfactuals(schema, &x).map_err(|e| e.to_string())?;
    let mut zs: Vec<Vec<i64>> = Vec::new();
    for row in &rows {
        let (rx, rz) = schema.split(row);
        if rx != x {
            return Err(format!("x changed: {rx:?} vs {x:?}"));
        }
        for (&i, v) in schema.protected_indices().iter().zip(&rz) {
            if !schema.attributes()[i].contains(*v) {
                return Err(format!("tuple {rz:?} out of range"));
            }
        }
        zs.push(rz);
    }
    zs.sort();
    zs.dedup();
    if zs.len() != expect {
        return Err(format!("{} distinct tuples, expected {expect}", zs.len()));
    }
    Ok(())
}

/// Clamping is idempotent and lands inside every non-protected range.
pub fn check_clamp(schema: &AttributeSchema, raw: &[f64]) -> Result<(), String> {
    let once = schema.clamp(raw);
    let twice = schema.clamp(&to_f64(&once));
    if once != twice {
        return Err(format!("{raw:?}: {once:?} then {twice:?}"));
    }
    for (a, v) in schema.non_protected_attributes().zip(&once) {
        if !a.contains(*v) {
            return Err(format!("{raw:?}: {v} outside {}", a.name));
        }
    }
    Ok(())
}

/// Random partition of `m` into positive sizes.
pub fn random_sizes(rng: &mut impl Rng) -> Vec<usize> {
    let m = rng.gen_range(1..=64);
    let mut left = m;
    let mut sizes = Vec::new();
    while left > 0 {
        let s = rng.gen_range(1..=left);
        sizes.push(s);
        left -= s;
    }
    sizes
}

/// Up to 8 scores on a coarse grid so ties and exact-tolerance gaps occur.
pub fn random_scores(rng: &mut impl Rng) -> (Vec<f64>, f64) {
    let m = rng.gen_range(1..=8);
    let scores = (0..m).map(|_| rng.gen_range(0..=40) as f64 / 200.0).collect();
    let eps = [0.01, 0.025, 0.05, 0.1][rng.gen_range(0..4)];
    (scores, eps)
}
