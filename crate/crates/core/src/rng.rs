//! Seeded randomness. Every random quantity is drawn from a ChaCha stream
//! addressed by `(seed, stream)`, so parallel work items can each own an
//! independent generator and results stay reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Symmetric Dirichlet draw of dimension `k`.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    loop {
        let draw: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let s: f64 = draw.iter().sum();
        if s > 0.0 && s.is_finite() {
            return draw.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Uniform draw from `[lo, hi)`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
