//! Search a trained model for inputs whose counterfactual scores split into
//! many clusters, and collect individual discrimination instances.
//!
//! Run with `cargo run --release --example search_discrimination -- [seconds]`.

use qidfair::{run_search, synth, train_classifier, SearchConfig, TrainConfig};

fn main() -> qidfair::Result<()> {
    let secs: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let (schema, data) = synth::census_like(2000, 7);
    let trained = train_classifier(
        &data,
        &schema,
        &TrainConfig {
            epochs: 100,
            ..TrainConfig::default()
        },
    )?;
    println!("accuracy {:.4}", trained.accuracy);

    let cfg = SearchConfig {
        timeout_secs: secs,
        ..SearchConfig::default()
    };
    let report = run_search(&trained.network, &data, &schema, &cfg)?;
    let s = &report.summary;
    println!("m={} upper bound {:.2} bits", s.m, s.qid_max);
    println!("K_I={} K_F={} (after {:?} s)", s.k_initial, s.k_max, s.t_k_max);
    println!("Q_inf={:.3} Q_1={:.3}", s.q_inf, s.q_shannon);
    println!("test cases {}  ID instances {}  local success {:.3}", s.test_cases, s.id_instances, s.local_success_rate);
    for level in &s.severity {
        println!("  k={:<3} {} cases", level.k, level.count);
    }
    if let Some(id) = report.id_instances.first() {
        println!("first ID: x={:?} unfavorable under {:?}, favorable under {:?}", id.x, id.unfavorable, id.favorable);
    }
    Ok(())
}
