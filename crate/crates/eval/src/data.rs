//! Seeded synthetic datasets over a single integer attribute `x`.

use std::sync::Arc;

use noisecache::{Dataset, DomainSchema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

pub const ATTRIBUTE: &str = "x";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataKind {
    Uniform,
    /// Rank-frequency law with the given exponent; position 0 is the mode.
    Zipf { exponent: f64 },
    /// Uniform except for a region of one eighth of the domain, starting at
    /// one quarter, that holds almost no records.
    PlantedSparse,
}

impl DataKind {
    pub fn zipf() -> Self {
        Self::Zipf { exponent: 1.1 }
    }
}

pub fn positions(kind: DataKind, n: usize, rows: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        DataKind::Uniform => (0..rows).map(|_| rng.random_range(0..n)).collect(),
        DataKind::Zipf { exponent } => {
            let z = Zipf::new(n as f64, exponent).expect("valid zipf parameters");
            (0..rows).map(|_| (z.sample(&mut rng) as usize - 1).min(n - 1)).collect()
        }
        DataKind::PlantedSparse => {
            let lo = n / 4;
            let hi = (lo + (n / 8).max(1)).min(n);
            (0..rows)
                .map(|_| loop {
                    let v = rng.random_range(0..n);
                    if !(lo..hi).contains(&v) || rng.random_bool(0.01) {
                        break v;
                    }
                })
                .collect()
        }
    }
}

pub fn generate(kind: DataKind, n: usize, rows: usize, seed: u64) -> Arc<Dataset> {
    let data: Vec<Vec<usize>> = positions(kind, n, rows, seed).into_iter().map(|p| vec![p]).collect();
    Arc::new(Dataset::from_positions(DomainSchema::single(ATTRIBUTE, n), &data).expect("positions inside the domain"))
}
