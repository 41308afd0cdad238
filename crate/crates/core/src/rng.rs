//! Counter-addressed Gaussian noise.
//!
//! Every `(step, particle)` pair owns a fixed window of a ChaCha8 keystream:
//! the stream id is the step and the word position is derived from the
//! particle index. Draws therefore do not depend on evaluation order or on
//! how particles are split across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id reserved for the initial condition; steps use ids `0..`.
const INIT_STREAM: u64 = u64::MAX;

/// 32-bit words reserved per particle and step (up to 3 Gaussians need two
/// Box-Muller pairs, each pair two `u64` draws).
const WORDS_PER_PARTICLE: u128 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sequential generator for sampling initial positions.
    pub fn initial_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(INIT_STREAM);
        rng
    }

    /// Standard normal draws for one particle at one step; `out.len() <= 3`.
    pub fn gaussians(&self, step: u64, particle: usize, out: &mut [f64]) {
        debug_assert!(out.len() <= 3);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(step);
        rng.set_word_pos(particle as u128 * WORDS_PER_PARTICLE);
        for pair in out.chunks_mut(2) {
            let (z0, z1) = box_muller(&mut rng);
            pair[0] = z0;
            if pair.len() > 1 {
                pair[1] = z1;
            }
        }
    }
}

fn box_muller(rng: &mut impl RngCore) -> (f64, f64) {
    // u1 in (0, 1] keeps the logarithm finite
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (radius * angle.cos(), radius * angle.sin())
}
