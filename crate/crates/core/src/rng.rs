//! Counter-based Gaussian streams, one substream per (key, sample index).

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

const INDEX_BITS: u32 = 40;

/// Produces independent, reproducible substreams from a master seed.
#[derive(Clone, Debug)]
pub struct StreamFactory {
    base: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Substream for sample `index` under `key` (a level, or a packed multi-index).
    pub fn substream(&self, key: u32, index: u64) -> GaussianStream {
        assert!(key < (1 << (64 - INDEX_BITS)), "substream key out of range");
        assert!(index < (1u64 << INDEX_BITS), "sample index out of range");
        let mut rng = self.base.clone();
        rng.set_stream(((key as u64) << INDEX_BITS) | index);
        GaussianStream { rng }
    }
}

/// Standard normal variates by inversion of open-interval uniforms.
#[derive(Clone, Debug)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    #[inline]
    pub fn next_standard(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform())
    }

    pub fn fill_standard(&mut self, out: &mut [f64], scale: f64) {
        for x in out.iter_mut() {
            *x = scale * self.next_standard();
        }
    }
}

/// Standard normal quantile function.
#[inline]
pub fn inverse_normal_cdf(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}
