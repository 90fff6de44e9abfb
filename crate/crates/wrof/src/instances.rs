//! Seeded random instances.
//!
//! Stream: `ChaCha8Rng::seed_from_u64(seed)` with `set_stream(index)`, so
//! instance `index` does not depend on how many others are generated or in
//! what order. Draws, in order: `d` in `1..=3`, `n` and `m` in
//! `1..=max_atoms`, `lambda` uniform in `[0.05, 1)`, then the coordinates of
//! `mu` (uniform in `[0, 1)`, row by row), its weights (uniform in
//! `[0.05, 1)`), and the same for `nu`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wrof_core::DiscreteMeasure;

pub const DEFAULT_MAX_ATOMS: usize = 30;

#[derive(Debug, Clone)]
pub struct Instance {
    pub index: usize,
    pub lambda: f64,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceShape {
    pub index: usize,
    pub dim: usize,
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
}

impl Instance {
    pub fn shape(&self) -> InstanceShape {
        InstanceShape {
            index: self.index,
            dim: self.mu.dim(),
            n: self.mu.len(),
            m: self.nu.len(),
            lambda: self.lambda,
        }
    }
}

pub fn rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn random_measure(rng: &mut impl Rng, dim: usize, atoms: usize) -> DiscreteMeasure {
    let coords: Vec<f64> = (0..dim * atoms).map(|_| rng.gen::<f64>()).collect();
    let weights: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.05..1.0)).collect();
    DiscreteMeasure::from_flat(dim, coords, weights)
        .expect("finite coordinates and positive weights")
}

pub fn generate(seed: u64, index: usize, max_atoms: usize) -> Instance {
    generate_with_rng(seed, index, max_atoms).0
}

/// As [`generate`], also returning the stream positioned after the instance
/// for any further draws the caller needs.
pub fn generate_with_rng(seed: u64, index: usize, max_atoms: usize) -> (Instance, ChaCha8Rng) {
    let mut rng = rng(seed, index);
    let dim = rng.gen_range(1..=3);
    let n = rng.gen_range(1..=max_atoms.max(1));
    let m = rng.gen_range(1..=max_atoms.max(1));
    let lambda = rng.gen_range(0.05..1.0);
    let mu = random_measure(&mut rng, dim, n);
    let nu = random_measure(&mut rng, dim, m);
    (
        Instance {
            index,
            lambda,
            mu,
            nu,
        },
        rng,
    )
}
