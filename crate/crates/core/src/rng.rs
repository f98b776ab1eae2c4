//! Deterministic, splittable random streams.
//!
//! Every stream has a 64-bit key that identifies its derivation path from a
//! master seed. The generator is xoshiro256** seeded from the key with
//! SplitMix64, both with their published constants, so the sequences are
//! reproducible from any language.
//!
//! Fixed derivation schedule used by the crate:
//! - run stream: `RngStream::new(run_seed)`
//! - optimizer decisions: `run.derive(labels::OPTIMIZER)`
//! - evaluation `fe`: `run.derive(labels::EVALUATION).derive(fe)`
//! - benchmark run seeds: `master.derive(instance).derive(run).key()`

pub mod labels {
    pub const OPTIMIZER: u64 = 1;
    pub const EVALUATION: u64 = 2;
    pub const PLANNER: u64 = 3;
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    key: u64,
    s: [u64; 4],
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let mut next = || {
            sm = sm.wrapping_add(GOLDEN_GAMMA);
            splitmix64_mix(sm)
        };
        let s = [next(), next(), next(), next()];
        RngStream { key: seed, s }
    }

    /// Key identifying this stream's derivation path.
    pub fn key(&self) -> u64 {
        self.key
    }

    /// Child stream for `label`; depends only on this stream's key, never on
    /// how far it has been advanced.
    pub fn derive(&self, label: u64) -> RngStream {
        let child = splitmix64_mix(splitmix64_mix(self.key) ^ splitmix64_mix(label.wrapping_add(GOLDEN_GAMMA)));
        RngStream::new(child)
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform double in [0, 1) built from the top 53 bits.
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n) by 128-bit multiply-shift.
    pub fn next_below(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn uniform_in(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.next_uniform()
    }
}

pub fn derive(parent: &RngStream, label: u64) -> RngStream {
    parent.derive(label)
}

pub fn next_uniform(s: &mut RngStream) -> f64 {
    s.next_uniform()
}
