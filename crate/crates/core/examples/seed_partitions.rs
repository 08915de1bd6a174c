//! Partition a dataset with k-means on standardized non-protected features,
//! as the search does to pick seeds.
//!
//! Run with `cargo run --example seed_partitions`.

use qidfair::dataset::kmeans_partition;
use qidfair::synth;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qidfair::Result<()> {
    let (schema, data) = synth::census_like(1000, 2);
    let parts = kmeans_partition(&data, &schema, 4, 0)?;
    for (i, g) in parts.groups.iter().enumerate() {
        let pos = g.iter().filter(|&&r| data.labels()[r] == 1).count();
        println!("group {i}: {} rows, {} favorable", g.len(), pos);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let seeds: Vec<usize> = (0..5).map(|_| parts.pick_seed(&mut rng)).collect();
    println!("seed rows {seeds:?}");
    for &r in &seeds {
        let (x, z) = schema.split(data.row(r));
        println!("  x={x:?} z={z:?}");
    }
    Ok(())
}
