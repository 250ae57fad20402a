//! Seeded, labeled random substreams.
//!
//! All randomness in the crate flows through [`Substream`]s: ChaCha8 streams
//! keyed by a 64-bit master seed, with the stream counter derived from a
//! string label (FNV-1a hash). Distinct labels under one seed yield
//! independent, reproducible streams, so parallel consumers (per-tree, per
//! bootstrap replicate, per network init) never contend for RNG state and
//! results do not depend on thread scheduling.
//!
//! Derived variates are frozen here rather than delegated to a distributions
//! crate, so the byte-level output of every pipeline stage is pinned:
//!
//! * `uniform01` — 53-bit mantissa fill, values in `[0, 1)`;
//! * `standard_normal` — Box–Muller, cosine branch only (two uniforms per
//!   variate, no cached state);
//! * `index` — Lemire-style fixed-point reduction of one `u64`;
//! * `shuffle` — Fisher–Yates driven by `index`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// A deterministic ChaCha8 stream tied to `(seed, label)`.
pub struct Substream {
    rng: ChaCha8Rng,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl Substream {
    /// Stream for `label` under a master `seed`.
    pub fn new(seed: u64, label: &str) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(fnv1a(label.as_bytes()));
        Self { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random mantissa bits.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1)`.
    pub fn uniform_pm1(&mut self) -> f64 {
        2.0 * self.uniform01() - 1.0
    }

    /// Standard normal via Box–Muller (cosine branch).
    pub fn standard_normal(&mut self) -> f64 {
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index in `[0, n)` via 64x64->128 fixed-point multiply.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }

    /// `k` distinct values from `0..n`, ascending. Partial Fisher–Yates on a
    /// scratch pool, then sorted so downstream tie-breaking by index is
    /// well-defined.
    pub fn sample_indices(&mut self, n: usize, k: usize, pool: &mut Vec<usize>) -> Vec<usize> {
        debug_assert!(k <= n);
        pool.clear();
        pool.extend(0..n);
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
            out.push(pool[i]);
        }
        out.sort_unstable();
        out
    }
}
