//! Deterministic, splittable random streams.
//!
//! Every sampler in this crate takes an explicit stream, so results are a
//! pure function of (inputs, stream). Streams are derived from a master seed
//! and a label path via SHA-256; a derived [`StreamFamily`] hands out
//! per-replicate substreams at no hashing cost through the ChaCha stream id.
//! Replicate `i` therefore sees the same randomness regardless of how work is
//! scheduled across threads.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

/// Source of uniform randomness plus the derived draws used by the samplers.
///
/// `next_u64` and `next_unit` are the primitives; everything else has a
/// default implementation on top of them so that scripted test sources only
/// need to provide units.
pub trait UnitRand {
    fn next_u64(&mut self) -> u64;

    /// Uniform in the open interval (0, 1), 53-bit resolution. Never returns
    /// 0 or 1 exactly.
    fn next_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Exponential with the given rate.
    fn next_exp(&mut self, rate: f64) -> f64 {
        debug_assert!(rate > 0.0);
        -self.next_unit().ln() / rate
    }

    /// Standard normal via Box-Muller. Consumes exactly two units per call.
    fn next_normal(&mut self) -> f64 {
        let u1 = self.next_unit();
        let u2 = self.next_unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `[0, n)`, unbiased via rejection.
    fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below(0)");
        if n == 1 {
            return 0;
        }
        let zone = n * (u64::MAX / n);
        loop {
            let r = self.next_u64();
            if r < zone {
                return r % n;
            }
        }
    }

    /// Gamma(shape, 1) by Marsaglia-Tsang. Shapes below one are boosted to
    /// shape+1 and corrected by a power of a uniform, which keeps the sampler
    /// accurate in the small-shape regime.
    fn next_gamma(&mut self, shape: f64) -> f64 {
        assert!(shape > 0.0, "gamma shape must be positive");
        if shape < 1.0 {
            let boost = self.next_gamma(shape + 1.0);
            let u = self.next_unit();
            return boost * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let z = self.next_normal();
            let t = 1.0 + c * z;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.next_unit();
            if u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
                return d * v;
            }
        }
    }

    /// Categorical draw from the given probability vector (assumed to sum
    /// to 1); returns the slot index.
    fn next_categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.next_unit();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u <= acc {
                return i;
            }
        }
        probs.len() - 1
    }
}

/// Counter-based random stream (ChaCha8 keystream).
#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn from_key(key: [u8; 32], stream_id: u64) -> Stream {
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_id);
        Stream { rng }
    }
}

impl UnitRand for Stream {
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// A keyed family of independent streams, one per replicate index.
///
/// The key is a SHA-256 hash of the master seed and the label path, so
/// distinct paths give collision-resistant independent families, and the
/// derivation is stable across versions.
#[derive(Clone, Debug)]
pub struct StreamFamily {
    key: [u8; 32],
}

impl StreamFamily {
    pub fn new(master_seed: u64, labels: &[(&str, u64)]) -> StreamFamily {
        assert!(!labels.is_empty(), "label path must be nonempty");
        let mut h = Sha256::new();
        h.update(b"pdc.stream.v1");
        h.update(master_seed.to_le_bytes());
        for (name, index) in labels {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            h.update(index.to_le_bytes());
        }
        let mut key = [0u8; 32];
        key.copy_from_slice(&h.finalize());
        StreamFamily { key }
    }

    pub fn stream(&self, replicate: u64) -> Stream {
        Stream::from_key(self.key, replicate)
    }
}

/// Derive a single stream from a master seed and a label path.
pub fn derive_stream(master_seed: u64, labels: &[(&str, u64)]) -> Stream {
    StreamFamily::new(master_seed, labels).stream(0)
}

/// Replays a fixed script of unit draws; for tests that pin stick-breaking
/// or transport inputs. Panics when the script runs out or `next_u64` is hit.
#[derive(Clone, Debug)]
pub struct ScriptedUnits {
    units: Vec<f64>,
    pos: usize,
}

impl ScriptedUnits {
    pub fn new(units: Vec<f64>) -> ScriptedUnits {
        ScriptedUnits { units, pos: 0 }
    }

    /// Repeats the same unit forever.
    pub fn constant(u: f64) -> ScriptedUnits {
        ScriptedUnits {
            units: vec![u],
            pos: usize::MAX,
        }
    }
}

impl UnitRand for ScriptedUnits {
    fn next_u64(&mut self) -> u64 {
        panic!("ScriptedUnits only provides unit draws");
    }

    fn next_unit(&mut self) -> f64 {
        if self.pos == usize::MAX {
            return self.units[0];
        }
        let u = *self
            .units
            .get(self.pos)
            .expect("scripted unit stream exhausted");
        self.pos += 1;
        u
    }
}
