//! Generate a census-style dataset, train the default architecture and save
//! the schema, data and weights.
//!
//! Run with `cargo run --release --example train_model -- [out_dir] [epochs]`.

use std::path::PathBuf;

use qidfair::{synth, train_classifier, Network, TrainConfig};

fn main() -> qidfair::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/qidfair-demo".into()));
    let epochs = args.next().and_then(|e| e.parse().ok()).unwrap_or(200);
    std::fs::create_dir_all(&out).map_err(|e| qidfair::Error::Config(e.to_string()))?;

    let (schema, data) = synth::census_like(2000, 7);
    schema.save(out.join("schema.toml"))?;
    data.write_csv(out.join("data.csv"), &schema)?;

    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let trained = train_classifier(&data, &schema, &cfg)?;
    let path = out.join("model.json");
    trained.network.save(&path)?;
    println!("layers {:?}", trained.network.layer_dims());
    println!("training accuracy {:.4}", trained.accuracy);

    let back = Network::load(&path)?;
    assert_eq!(back, trained.network);
    println!("wrote {}", out.display());
    Ok(())
}
