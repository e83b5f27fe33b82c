//! Standard normal CDF, density, and quantile.
//!
//! `phi_cdf` goes through `erfc` so the tails keep full relative accuracy;
//! the quantile is Wichura's PPND16 rational approximation (absolute error
//! well below 1e-9 over the open unit interval).

/// Standard normal density.
pub fn phi_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.3989422804014327;
    INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Standard normal CDF.
pub fn phi_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse standard normal CDF on (0, 1).
///
/// Returns `-inf`/`+inf` at 0 and 1 and NaN outside `[0, 1]`.
pub fn inv_phi(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = libm::sqrt(-libm::log(r));
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Two-sided critical value: `inv_phi((1 + level) / 2)`.
pub fn z_for_level(level: f64) -> f64 {
    inv_phi(0.5 * (1.0 + level))
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    let mut acc = coeffs[7];
    for &c in coeffs[..7].iter().rev() {
        acc = acc * x + c;
    }
    acc
}

const A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946_1e4,
    4.592_195_393_154_987_2e4,
    6.726_577_092_700_870_1e4,
    3.343_057_558_358_812_8e4,
    2.509_080_928_730_122_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_854_6e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_545,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_9e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_reference_values() {
        assert!((inv_phi(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((inv_phi(0.5)).abs() < 1e-15);
        assert!((inv_phi(0.75) - 0.674_489_750_196_081_7).abs() < 1e-9);
        assert!((inv_phi(0.025) + 1.959_963_984_540_054).abs() < 1e-9);
        // Far tail.
        assert!((inv_phi(1e-10) + 6.361_340_902_404_056).abs() < 1e-6);
    }

    #[test]
    fn cdf_reference_values() {
        assert!((phi_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((phi_cdf(1.96) - 0.975_002_104_851_780_2).abs() < 1e-12);
        assert!((phi_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-12);
    }

    #[test]
    fn cdf_quantile_round_trip() {
        for k in 1..999 {
            let p = k as f64 / 1000.0;
            let x = inv_phi(p);
            assert!((phi_cdf(x) - p).abs() < 1e-12, "p = {p}");
        }
    }

    #[test]
    fn z_for_usual_levels() {
        assert!((z_for_level(0.95) - 1.959_964).abs() < 1e-5);
        assert!((z_for_level(0.5) - 0.674_49).abs() < 1e-4);
    }
}
