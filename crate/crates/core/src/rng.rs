//! Keyed counter-based randomness.
//!
//! A draw is addressed by `(seed, stream_id, draw_counter)`. Streams are ChaCha8 keystreams
//! keyed by the seed and selected by the stream id, so any draw can be regenerated in O(1)
//! without replaying its predecessors. Global and parallel samplers use one stream per
//! subprocess; tree samplers use one stream per heap index.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Address of a single uniform draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngKey {
    pub seed: u64,
    pub stream_id: u64,
    pub draw_counter: u64,
}

impl RngKey {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self {
            seed,
            stream_id,
            draw_counter: 0,
        }
    }

    pub fn with_counter(self, draw_counter: u64) -> Self {
        Self {
            draw_counter,
            ..self
        }
    }

    /// The uniform in `(0, 1)` at this address.
    pub fn uniform(&self) -> f64 {
        self.stream().next_uniform()
    }

    /// A sequential reader starting at this address.
    pub fn stream(&self) -> KeyedStream {
        KeyedStream::new(*self)
    }
}

/// Derive a child seed from a parent seed and two labels (bench reps, grid points, ...).
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z =
        seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finaliser
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A source of uniforms in the open interval `(0, 1)`.
pub trait UniformSource {
    fn next_uniform(&mut self) -> f64;
}

/// Map 64 random bits to the open unit interval; never returns 0 or 1.
#[inline]
pub fn bits_to_open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Sequential reader over one keyed stream.
#[derive(Clone)]
pub struct KeyedStream {
    rng: ChaCha8Rng,
}

impl KeyedStream {
    pub fn new(key: RngKey) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
        rng.set_stream(key.stream_id);
        // one u64 per draw = two 32-bit words
        rng.set_word_pos(2 * key.draw_counter as u128);
        Self { rng }
    }
}

impl UniformSource for KeyedStream {
    #[inline]
    fn next_uniform(&mut self) -> f64 {
        bits_to_open_unit(self.rng.next_u64())
    }
}

/// Replays a fixed list of uniforms; panics when exhausted.
#[derive(Debug, Clone)]
pub struct FixedUniforms {
    values: Vec<f64>,
    pos: usize,
}

impl FixedUniforms {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, pos: 0 }
    }
}

impl UniformSource for FixedUniforms {
    fn next_uniform(&mut self) -> f64 {
        let u = self.values[self.pos];
        self.pos += 1;
        u
    }
}
