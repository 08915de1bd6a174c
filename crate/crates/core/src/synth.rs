//! Seeded synthetic census-style data for demos and end-to-end tests.
//!
//! Three protected attributes give 16 protected combinations. The label
//! depends on the protected attributes on purpose, so a model trained on
//! this data is protected-sensitive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Attribute, AttributeSchema, Dataset};

pub fn census_schema() -> AttributeSchema {
    AttributeSchema::new(
        vec![
            Attribute::new("age", 0, 3, true),
            Attribute::new("education", 0, 15, false),
            Attribute::new("hours", 0, 9, false),
            Attribute::new("occupation", 0, 7, false).categorical(),
            Attribute::new("sex", 0, 1, true).categorical(),
            Attribute::new("capital", 0, 4, false),
            Attribute::new("race", 0, 1, true).categorical(),
            Attribute::new("experience", 0, 20, false),
            Attribute::new("marital", 0, 3, false).categorical(),
        ],
        "income",
        1,
    )
    .expect("census schema is valid")
}

const OCCUPATION_EFFECT: [f64; 8] = [-0.8, -0.3, 0.0, 0.2, 0.5, 0.9, -0.5, 0.3];
const AGE_EFFECT: [f64; 4] = [-0.9, 0.2, 0.6, -0.2];
const MARITAL_EFFECT: [f64; 4] = [-0.3, 0.4, 0.0, -0.2];

/// `rows` individuals drawn independently; labels are Bernoulli draws from a
/// logistic model with protected-attribute effects.
pub fn census_like(rows: usize, seed: u64) -> (AttributeSchema, Dataset) {
    let schema = census_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let age = rng.gen_range(0..=3i64);
        let edu = rng.gen_range(0..=15i64);
        let hours = rng.gen_range(0..=9i64);
        let occ = rng.gen_range(0..=7i64);
        let sex = rng.gen_range(0..=1i64);
        let capital = if rng.gen_bool(0.7) { 0 } else { rng.gen_range(1..=4i64) };
        let race = i64::from(rng.gen_bool(0.3));
        let exp = rng.gen_range(0..=20i64);
        let marital = rng.gen_range(0..=3i64);

        let logit = -4.2
            + 0.28 * edu as f64
            + 0.25 * hours as f64
            + OCCUPATION_EFFECT[occ as usize]
            + 0.7 * capital as f64
            + 0.06 * exp as f64
            + MARITAL_EFFECT[marital as usize]
            + 1.1 * sex as f64
            - 0.9 * race as f64
            + AGE_EFFECT[age as usize];
        let p = 1.0 / (1.0 + (-logit).exp());
        data.push(vec![age, edu, hours, occ, sex, capital, race, exp, marital]);
        labels.push(usize::from(rng.gen_bool(p)));
    }
    let data = Dataset::new(&schema, data, labels).expect("generated rows are in range");
    (schema, data)
}
