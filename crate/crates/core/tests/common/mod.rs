#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmlmc::level_stats::LevelMoments;

/// Random level chain with mixed strong and weak correlations and growing costs.
pub fn random_chain(seed: u64, levels: usize) -> Vec<LevelMoments> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(levels);
    let mut sigma = rng.random_range(0.5..2.0);
    let mut eta: f64 = 1.0;
    out.push(LevelMoments::synthetic(sigma, None, eta));
    for _ in 1..levels {
        let prev = sigma;
        sigma *= rng.random_range(0.7..1.3);
        eta *= rng.random_range(1.2..2.5);
        let rho = if rng.random_bool(0.7) { rng.random_range(0.9..0.9999) } else { rng.random_range(-0.3..0.9) };
        let coarse = prev * rng.random_range(0.95..1.05);
        out.push(LevelMoments::synthetic(sigma, Some((coarse, rho)), eta));
    }
    out
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
