//! Counter-based deterministic random streams.
//!
//! A stream is addressed by `(seed, stream_id)` and advanced by a 64-bit
//! counter; any `(seed, stream_id, counter)` triple reproduces the same next
//! draw. Backed by ChaCha8, whose keystream supports random access.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawKind {
    Uniform,
    Gaussian,
}

#[derive(Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    counter: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::at(seed, stream, 0)
    }

    /// State positioned at `counter` draws into the stream.
    pub fn at(seed: u64, stream: u64, counter: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        // one draw consumes one u64 = two 32-bit keystream words
        inner.set_word_pos(u128::from(counter) * 2);
        RngState {
            seed,
            stream,
            counter,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Independent stream sharing this state's seed.
    pub fn fork(&self, stream: u64) -> Self {
        RngState::new(self.seed, stream)
    }

    fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller on two uniform draws.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn draw(&mut self, kind: DrawKind) -> f64 {
        match kind {
            DrawKind::Uniform => self.uniform(),
            DrawKind::Gaussian => self.gaussian(),
        }
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl PartialEq for RngState {
    fn eq(&self, other: &Self) -> bool {
        (self.seed, self.stream, self.counter) == (other.seed, other.stream, other.counter)
    }
}

impl std::fmt::Debug for RngState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RngState")
            .field("seed", &self.seed)
            .field("stream", &self.stream)
            .field("counter", &self.counter)
            .finish()
    }
}

/// Free-function form: draw from `state` and advance it.
pub fn prng_draw(state: &mut RngState, kind: DrawKind) -> f64 {
    state.draw(kind)
}
