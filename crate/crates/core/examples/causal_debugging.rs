//! Localize and mitigate the neuron carrying a protected attribute in a
//! hand-built network.
//!
//! Run with `cargo run --example causal_debugging`.

use qidfair::debug::{DebugConfig, Debugger, MitigationMode};
use qidfair::fixtures::{two_path_dataset, two_path_net, two_path_schema};
use qidfair::report::{format_localization, format_mitigation};

fn main() -> qidfair::Result<()> {
    let net = two_path_net();
    let schema = two_path_schema();
    let data = two_path_dataset();
    let suite: Vec<Vec<i64>> = (0..=10).flat_map(|x0| [0, 5, 10].map(|x1| vec![x0, x1])).collect();

    let dbg = Debugger::new(&net, &schema, &data, suite, DebugConfig::default())?;
    let sens = dbg.layer_sensitivity()?;
    for s in &sens.layers {
        println!("layer {} delta {:.3} rho {:.3e}", s.layer, s.delta, s.rho);
    }

    let loc = dbg.localize()?;
    for c in &loc.candidates {
        println!(
            "neuron {} stats {:?} v1={:?} v2={:?}{}",
            c.neuron,
            c.stats,
            c.v1,
            c.v2,
            if c.skipped() { " (skipped)" } else { "" }
        );
    }
    print!("{}", format_localization(&loc));

    let results: Vec<_> = [MitigationMode::Deactivate, MitigationMode::Activate]
        .into_iter()
        .filter_map(|m| dbg.mitigate_mode(&loc, m).transpose())
        .collect::<qidfair::Result<_>>()?;
    print!("{}", format_mitigation(&results));
    Ok(())
}
