//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(key, stream, counter)`, so a value can be
//! regenerated without replaying a sequence, and the coefficient of a given
//! mode does not depend on how many other modes were drawn. The algorithm is
//! fixed and must not change between releases:
//!
//! ```text
//! mix(z)   = z ^= z >> 30; z *= 0xbf58476d1ce4e5b9;
//!            z ^= z >> 27; z *= 0x94d049bb133111eb;
//!            z ^  z >> 31                       (wrapping u64 arithmetic)
//! word     = mix( mix( mix(key ^ 0x6a09e667f3bcc909) ^ stream )
//!                 + counter * 0x9e3779b97f4a7c15 )
//! uniform  = ((word >> 11) + 0.5) * 2^-53        in (0, 1)
//! gaussian = sqrt(-2 ln u(2c)) * cos(2 pi u(2c+1))
//! ```
//!
//! `mix` is the SplitMix64 finalizer.

const KEY_SALT: u64 = 0x6a09_e667_f3bc_c909;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless generator keyed by a 64-bit seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: seed }
    }

    pub fn seed(&self) -> u64 {
        self.key
    }

    /// Derives an independent generator, e.g. one per sample.
    pub fn split(&self, stream: u64) -> Self {
        Self {
            key: self.word(stream, u64::MAX),
        }
    }

    #[inline]
    pub fn word(&self, stream: u64, counter: u64) -> u64 {
        let h = mix(mix(self.key ^ KEY_SALT) ^ stream);
        mix(h.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, stream: u64, counter: u64) -> f64 {
        ((self.word(stream, counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box-Muller, cosine branch).
    #[inline]
    pub fn gaussian(&self, stream: u64, counter: u64) -> f64 {
        let u1 = self.uniform(stream, counter.wrapping_mul(2));
        let u2 = self.uniform(stream, counter.wrapping_mul(2).wrapping_add(1));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Band-independent counter for the coefficient of `component` at mode `k`.
///
/// Each axis index gets 20 bits, so modes up to 2^20 per axis never collide.
pub fn mode_counter(component: usize, k: &[usize]) -> u64 {
    let mut c = 0u64;
    for &kj in k.iter().rev() {
        c = (c << 20) | kj as u64;
    }
    c * 3 + component as u64
}
