//! Drive the command-line pipeline (train, search, localize, mitigate,
//! report) in-process on generated data.
//!
//! Run with `cargo run --release --example cli_pipeline -- [out_dir]`.

use std::path::PathBuf;

use qidfair::cli::main_with;
use qidfair::synth;

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/qidfair-pipeline".into()));
    std::fs::create_dir_all(&out).expect("create output dir");
    let (schema, data) = synth::census_like(2000, 11);
    schema.save(out.join("schema.toml")).expect("write schema");
    data.write_csv(out.join("data.csv"), &schema).expect("write data");
    std::fs::write(
        out.join("run.toml"),
        "seed = 3\n\n[paths]\ndataset = \"data.csv\"\nschema = \"schema.toml\"\noutput_dir = \"out\"\n\n[train]\nepochs = 100\n\n[search]\ntimeout_secs = 10.0\n",
    )
    .expect("write config");

    let config = out.join("run.toml");
    let config = config.to_str().expect("utf-8 path");
    for cmd in [
        vec!["train"],
        vec!["search"],
        vec!["localize"],
        vec!["mitigate", "--mode", "both"],
        vec!["report"],
    ] {
        println!("$ qidfair --config {config} {}", cmd.join(" "));
        let mut args = vec!["qidfair", "--config", config];
        args.extend(cmd);
        let code = main_with(args);
        if code != 0 {
            std::process::exit(code.into());
        }
    }
}
