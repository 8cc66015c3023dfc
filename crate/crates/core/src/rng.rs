//! Counter-addressable uniform draws for the Monte-Carlo engine.
//!
//! Each trial owns one ChaCha8 stream selected by `(seed, trial)`; the draw
//! for layer `i` sits at a fixed word position inside that stream, so any
//! `(seed, trial, layer)` triple can be regenerated without replaying the
//! draws before it. Identical seeds therefore give identical draws across
//! field values, wavelengths and thread counts.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone)]
pub struct LayerStream {
    inner: ChaCha8Rng,
}

impl LayerStream {
    pub fn new(seed: u64, trial: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(trial);
        inner.set_word_pos(0);
        LayerStream { inner }
    }

    /// Uniform draw in [0, 1) for an arbitrary layer.
    pub fn draw_at(&mut self, layer: u64) -> f64 {
        self.inner.set_word_pos(2 * layer as u128);
        self.next_uniform()
    }

    /// Next sequential draw; layer `i` after `i` prior calls from a fresh stream.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * TWO_POW_M53
    }
}
