//! Counter-based, splittable pseudo-random streams.
//!
//! A stream is a Weyl counter advanced by a per-stream odd increment, pushed
//! through the SplitMix64 finalizer. Identical `(seed, stream_id)` pairs give
//! identical sequences on every platform; distinct stream ids get distinct
//! increments and behave as statistically independent generators. There is no
//! global state, so trials can be seeded as `stream_id = trial index` and run
//! in any order.

/// One pseudo-random stream, identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    state: u64,
    gamma: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// Variant mixer used to derive per-stream increments (David Stafford's mix13
// companion from the SplittableRandom design).
#[inline]
fn mix_gamma(z: u64) -> u64 {
    let mut g = (z ^ (z >> 33)).wrapping_mul(0xff51_afd7_ed55_8ccd);
    g = (g ^ (g >> 33)).wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    g = (g ^ (g >> 33)) | 1; // increments must be odd
    if (g ^ (g >> 1)).count_ones() < 24 {
        g ^= 0xaaaa_aaaa_aaaa_aaaa;
    }
    g
}

/// Returns the stream for `(seed, stream_id)`.
pub fn rng_stream(seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(seed, stream_id)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let state = mix64(seed ^ mix64(stream_id.wrapping_mul(GOLDEN)));
        let gamma = mix_gamma(state.wrapping_add(stream_id).wrapping_add(GOLDEN));
        Self { state, gamma }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(self.gamma);
        mix64(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `(0, 1]`; safe to pass to `ln`.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the inverse CDF, one uniform per draw.
    pub fn next_gaussian(&mut self) -> f64 {
        crate::gauss::inv_phi(self.next_f64_open().min(1.0 - 1e-16))
    }

    /// Gamma(2, 1): exact as the sum of two unit exponentials.
    pub fn next_gamma2(&mut self) -> f64 {
        -libm::log(self.next_f64_open()) - libm::log(self.next_f64_open())
    }

    pub fn next_bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Poisson draw: Knuth's multiplication method below mean 30, Gaussian
    /// approximation with continuity correction above.
    pub fn next_poisson(&mut self, mean: f64) -> f64 {
        debug_assert!(mean >= 0.0);
        if mean == 0.0 {
            return 0.0;
        }
        if mean < 30.0 {
            let limit = libm::exp(-mean);
            let mut k = 0u64;
            let mut prod = self.next_f64_open();
            while prod > limit {
                k += 1;
                prod *= self.next_f64_open();
            }
            k as f64
        } else {
            let z = self.next_gaussian();
            let k = libm::floor(mean + libm::sqrt(mean) * z + 0.5);
            k.max(0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_keys_identical_draws() {
        let mut a = rng_stream(42, 7);
        let mut b = rng_stream(42, 7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_streams_decorrelated() {
        let mut a = rng_stream(42, 0);
        let mut b = rng_stream(42, 1);
        let n = 100_000;
        let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = a.next_f64();
            let y = b.next_f64();
            sa += x;
            sb += y;
            sab += x * y;
            saa += x * x;
            sbb += y * y;
        }
        let nf = n as f64;
        let cov = sab / nf - (sa / nf) * (sb / nf);
        let va = saa / nf - (sa / nf) * (sa / nf);
        let vb = sbb / nf - (sb / nf) * (sb / nf);
        let rho = cov / libm::sqrt(va * vb);
        assert!(rho.abs() < 0.02, "streams correlated: rho = {rho}");
    }

    #[test]
    fn uniform_draws_in_unit_interval() {
        let mut r = rng_stream(1, 2);
        for _ in 0..10_000 {
            let u = r.next_f64();
            assert!((0.0..1.0).contains(&u));
            let v = r.next_f64_open();
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn poisson_moments_match() {
        // Mean and variance of Poisson(5) over many draws, within 3 standard
        // errors of (5, 5).
        let mut r = rng_stream(99, 0);
        let mean = 5.0;
        let n = 100_000usize;
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..n {
            let x = r.next_poisson(mean);
            s += x;
            s2 += x * x;
        }
        let nf = n as f64;
        let m = s / nf;
        let v = s2 / nf - m * m;
        let se_mean = libm::sqrt(mean / nf);
        // Var of the sample variance of Poisson ~ (mu + 2 mu^2)/n.
        let se_var = libm::sqrt((mean + 2.0 * mean * mean) / nf);
        assert!((m - mean).abs() < 3.0 * se_mean, "mean {m}");
        assert!((v - mean).abs() < 3.0 * se_var, "var {v}");
    }

    #[test]
    fn gaussian_moments_match() {
        let mut r = rng_stream(3, 4);
        let n = 100_000usize;
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..n {
            let x = r.next_gaussian();
            s += x;
            s2 += x * x;
        }
        let nf = n as f64;
        assert!((s / nf).abs() < 3.0 / libm::sqrt(nf));
        assert!((s2 / nf - 1.0).abs() < 3.0 * libm::sqrt(2.0 / nf));
    }

    #[test]
    fn gamma2_moments_match() {
        let mut r = rng_stream(8, 1);
        let n = 200_000usize;
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..n {
            let x = r.next_gamma2();
            assert!(x >= 0.0);
            s += x;
            s2 += x * x;
        }
        let nf = n as f64;
        let m = s / nf;
        let v = s2 / nf - m * m;
        // Gamma(2,1): mean 2, variance 2.
        assert!((m - 2.0).abs() < 3.0 * libm::sqrt(2.0 / nf));
        assert!((v - 2.0).abs() < 0.05);
    }
}
