//! Cluster counterfactual scores and read off the QID measures.
//!
//! Run with `cargo run --example qid_measures`.

use qidfair::qid::{cluster_scores, qid_max, ClusterPartition, ScoreSet};

fn main() -> qidfair::Result<()> {
    // 16 protected tuples observed through four distinct profiles
    for sizes in [vec![16], vec![1; 16], vec![4, 4, 4, 4], vec![8, 4, 2, 1, 1]] {
        let p = ClusterPartition::from_sizes(&sizes)?;
        println!(
            "{:<24} k={:<2} Q_inf={:.4} Q_1={:.4} remaining H_inf={:.4}",
            format!("{sizes:?}"),
            p.k(),
            p.q_infinity(),
            p.q_shannon(),
            p.remaining_min_entropy()
        );
    }

    let scores = ScoreSet::new(vec![0.10, 0.11, 0.12, 0.40, 0.41, 0.90, 0.93, 0.95])?;
    let p = cluster_scores(&scores, 0.025)?;
    println!("\nscores {:?}", scores.as_slice());
    for c in p.clusters() {
        println!("  cluster {:?} centroid {:.3}", c.members, c.centroid);
    }
    println!("k={} delta={:.3} objective={:.4}", p.k(), p.delta(), p.objective());

    println!("\nupper bound for eps=0.025: m=90 -> {:.2} bits, m=12 -> {:.2} bits", qid_max(90, 0.025), qid_max(12, 0.025));
    Ok(())
}
