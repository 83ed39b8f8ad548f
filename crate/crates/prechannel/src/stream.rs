//! Counter-based deterministic random streams.
//!
//! Every random draw in the crate is keyed by integer labels (root seed,
//! trial index, factor index, ...) and produced by the splitmix64 output
//! function, so a draw depends only on its labels: results are identical
//! across runs, platforms, and worker counts, and there is no shared mutable
//! RNG state to thread through parallel code. Not cryptographic.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer; full-avalanche 64-bit mixer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a label sequence into a stream key.
pub(crate) fn derive_key(words: &[u64]) -> u64 {
    let mut h = 0x6A09_E667_F3BC_C909_u64;
    for &w in words {
        h = mix64(h.wrapping_add(GOLDEN).wrapping_add(w));
    }
    h
}

/// Maps 64 random bits to the unit interval [0, 1) with 53-bit resolution.
#[inline]
pub(crate) fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A splitmix64 sequence at a derived key: a cheap stateful view over a
/// counter-based generator.
pub(crate) struct CounterStream {
    state: u64,
    spare_gaussian: Option<f64>,
}

impl CounterStream {
    pub(crate) fn new(domain: u64, label: u64) -> Self {
        CounterStream { state: derive_key(&[domain, label]), spare_gaussian: None }
    }

    pub(crate) fn from_key(key: u64) -> Self {
        CounterStream { state: key, spare_gaussian: None }
    }

    #[inline]
    pub(crate) fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform draw in [0, 1).
    pub(crate) fn unit(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Standard normal draw (Box-Muller; the paired value is cached).
    pub(crate) fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_gaussian.take() {
            return z;
        }
        // u1 in (0, 1] so the logarithm is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.unit();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_gaussian = Some(r * theta.sin());
        r * theta.cos()
    }
}
