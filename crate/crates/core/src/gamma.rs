//! Gamma-function analytics for the l1 norm on the Euclidean unit sphere.
//!
//! Everything is computed in the log domain: `Gamma(n/2)` overflows `f64`
//! long before the dimensions of interest (n up to 10^7).

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, LN_2, PI};
use thiserror::Error;

/// Euler-Mascheroni constant, 0.57721566490153286060651209008240243104...
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// Level below which the typical correction factor is claimed to fall.
pub const CERTIFICATION_LEVEL: f64 = 0.82;

const LN_SQRT_PI: f64 = 0.572_364_942_924_700_087_071_713_675_676_529_36;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_355_879_892_119_868_763_74;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GammaError {
    #[error("log_gamma requires a positive finite argument, got {0}")]
    NonPositiveArgument(f64),
    #[error("invalid dimension {n}: require n >= {min}")]
    InvalidDimension { n: u64, min: u64 },
}

fn require_dimension(n: u64, min: u64) -> Result<(), GammaError> {
    if n >= min {
        Ok(())
    } else {
        Err(GammaError::InvalidDimension { n, min })
    }
}

// Lanczos approximation, g = 671/128, 14 terms (Numerical Recipes, 3rd ed.).
// Full double precision for every x > 0.
const LANCZOS_G_SHIFT: f64 = 5.242_187_5;
const LANCZOS_C0: f64 = 0.999_999_999_999_997_092;
const LANCZOS_COEFFS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

fn ln_gamma_unchecked(x: f64) -> f64 {
    let tmp = x + LANCZOS_G_SHIFT;
    let lead = (x + 0.5) * tmp.ln() - tmp;
    let mut series = LANCZOS_C0;
    let mut denom = x;
    for c in LANCZOS_COEFFS {
        denom += 1.0;
        series += c / denom;
    }
    lead + (SQRT_2PI * series / x).ln()
}

/// Natural logarithm of `Gamma(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64, GammaError> {
    if x.is_finite() && x > 0.0 {
        Ok(ln_gamma_unchecked(x))
    } else {
        Err(GammaError::NonPositiveArgument(x))
    }
}

/// Tail of the Stirling series, `ln Gamma(z) - [(z - 1/2) ln z - z + ln sqrt(2 pi)]`.
fn stirling_tail(z: f64) -> f64 {
    let r = 1.0 / z;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0
            - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0)))))
}

/// `ln Gamma(z) - ln Gamma(z + 1/2)`.
///
/// For large `z` the two log-gammas are huge and nearly equal, so the
/// difference is expanded directly to keep full relative precision in
/// `Gamma(z) / Gamma(z + 1/2)`.
fn ln_gamma_half_ratio(z: f64) -> f64 {
    if z < 20.0 {
        return ln_gamma_unchecked(z) - ln_gamma_unchecked(z + 0.5);
    }
    -0.5 * z.ln() + (0.5 - z * (0.5 / z).ln_1p()) + stirling_tail(z) - stirling_tail(z + 0.5)
}

/// Expected l1 norm of a uniform point on the unit sphere in `R^n`:
/// `n Gamma(n/2) / (sqrt(pi) Gamma((n+1)/2))`.
pub fn expected_l1_norm(n: u64) -> Result<f64, GammaError> {
    require_dimension(n, 1)?;
    let nf = n as f64;
    Ok((nf.ln() - LN_SQRT_PI + ln_gamma_half_ratio(nf / 2.0)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(lower: f64, value: f64, upper: f64) -> Self {
        Self {
            lower,
            value,
            upper,
            holds: lower <= value && value <= upper,
        }
    }
}

/// `sqrt(2/n) <= Gamma(n/2) / Gamma((n+1)/2) <= sqrt(2/(n-1))`.
pub fn gamma_ratio_bounds(n: u64) -> Result<BoundCheck, GammaError> {
    require_dimension(n, 2)?;
    let nf = n as f64;
    Ok(BoundCheck::new(
        (2.0 / nf).sqrt(),
        ln_gamma_half_ratio(nf / 2.0).exp(),
        (2.0 / (nf - 1.0)).sqrt(),
    ))
}

fn normalized_upper(n: f64) -> f64 {
    (n / (n - 1.0)).sqrt() * SQRT_2_OVER_PI
}

/// `E(||y||_1) / sqrt(n)` together with its two-sided bound.
pub fn normalized_expectation_bounds(n: u64) -> Result<BoundCheck, GammaError> {
    require_dimension(n, 2)?;
    let nf = n as f64;
    let value = expected_l1_norm(n)? / nf.sqrt();
    Ok(BoundCheck::new(SQRT_2_OVER_PI, value, normalized_upper(nf)))
}

/// Expected l1 norm with both Gamma factors replaced by the two-term Stirling
/// expansion.
pub fn stirling_expectation(n: u64) -> Result<f64, GammaError> {
    require_dimension(n, 4)?;
    let nf = n as f64;
    let z = nf / 2.0;
    // Same rearrangement as ln_gamma_half_ratio, so both routes keep full
    // relative precision at large n.
    let ratio = -0.5 * z.ln() + (0.5 - z * (0.5 / z).ln_1p())
        + (1.0 / (12.0 * z)).ln_1p()
        - (1.0 / (12.0 * (z + 0.5))).ln_1p();
    Ok((nf.ln() - LN_SQRT_PI + ratio).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub n: u64,
    /// `sqrt(ln((pi/2) n^2))`.
    pub t: f64,
    /// `exp((t + pi/2 + sqrt(n/(n-1)) sqrt(2n/pi)) / sqrt(n) - 1)`.
    pub guarantee_value: f64,
    pub certified: bool,
}

/// Deviation level `t` with `sqrt(pi/2) exp(-t^2/2) = 1/n`, and the resulting
/// high-probability bound on `exp(||y||_1 / sqrt(n) - 1)`.
pub fn theorem2_threshold(n: u64) -> Result<Threshold, GammaError> {
    require_dimension(n, 2)?;
    let nf = n as f64;
    let t = (FRAC_PI_2.ln() + 2.0 * nf.ln()).sqrt();
    let l1_upper = normalized_upper(nf) * nf.sqrt();
    let guarantee_value = ((t + FRAC_PI_2 + l1_upper) / nf.sqrt() - 1.0).exp();
    Ok(Threshold {
        n,
        t,
        guarantee_value,
        certified: guarantee_value < CERTIFICATION_LEVEL,
    })
}

/// Smallest `n >= 2` whose threshold is certified. `guarantee_value` is
/// strictly decreasing in `n`, so a doubling search followed by bisection
/// finds it.
pub fn first_certified_dimension() -> u64 {
    let certified = |n: u64| theorem2_threshold(n).map(|t| t.certified).unwrap_or(false);
    let mut hi = 2u64;
    while !certified(hi) {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if certified(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Digamma at one half: `-gamma - 2 ln 2`.
pub fn digamma_half() -> f64 {
    -EULER_GAMMA - 2.0 * LN_2
}

/// `sqrt(2) exp(psi(1/2) / 2)`, the value around which
/// `sqrt(n) prod |y_i|^(1/n)` concentrates for uniform sphere points.
pub fn gm_concentration_constant() -> f64 {
    2f64.sqrt() * (digamma_half() / 2.0).exp()
}

/// `exp(sqrt(2/pi) - 1)`, the large-n centre of `exp(||y||_1 / sqrt(n) - 1)`.
pub fn asymptotic_bound_center() -> f64 {
    (SQRT_2_OVER_PI - 1.0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRow {
    pub n: u64,
    pub expected_l1: f64,
    pub normalized: f64,
    pub lower: f64,
    pub upper: f64,
    pub stirling_approx: Option<f64>,
    pub theorem2_t: f64,
    pub theorem2_exponent_bound: f64,
}

pub fn analytic_row(n: u64) -> Result<AnalyticRow, GammaError> {
    let bounds = normalized_expectation_bounds(n)?;
    let threshold = theorem2_threshold(n)?;
    Ok(AnalyticRow {
        n,
        expected_l1: expected_l1_norm(n)?,
        normalized: bounds.value,
        lower: bounds.lower,
        upper: bounds.upper,
        stirling_approx: stirling_expectation(n).ok(),
        theorem2_t: threshold.t,
        theorem2_exponent_bound: threshold.guarantee_value,
    })
}

/// `sqrt(pi/2) exp(-t^2/2)`, the tail bound for `| ||y||_1 - median |`.
pub fn l1_tail_bound(t: f64) -> f64 {
    (PI / 2.0).sqrt() * (-t * t / 2.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Exact `Gamma(k/2)` for small positive integers `k` by the recurrence
    /// from `Gamma(1) = 1` and `Gamma(1/2) = sqrt(pi)`.
    fn gamma_half_integer(k: u32) -> f64 {
        let (mut acc, mut z) = if k.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
        while z < k as f64 / 2.0 {
            acc *= z;
            z += 1.0;
        }
        acc
    }

    #[test]
    fn log_gamma_special_values() {
        assert!((log_gamma(0.5).unwrap() - 0.572_364_942_9).abs() < 1e-10);
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-15);
        assert!(rel(log_gamma(6.0).unwrap(), 120f64.ln()) < 1e-14);
        assert!((log_gamma(6.0).unwrap() - 4.787_491_742_8).abs() < 1e-10);
    }

    #[test]
    fn log_gamma_matches_half_integer_products() {
        for k in 1..=300u32 {
            let x = k as f64 / 2.0;
            if x == 1.0 || x == 2.0 {
                continue;
            }
            let expected = gamma_half_integer(k).ln();
            assert!(
                rel(log_gamma(x).unwrap(), expected) < 1e-13,
                "x={x}: {} vs {expected}",
                log_gamma(x).unwrap()
            );
        }
    }

    #[test]
    fn log_gamma_reference_values() {
        // mpmath.loggamma at 50 digits
        let table = [
            (0.7, 0.260_867_246_531_666_514_385_732_417_016_76),
            (3.3, 0.987_098_577_894_734_587_878_679_288_615_06),
            (123.4, 469.336_097_442_190_558_444_793_824_945_69),
            (1.0e5, 1_051_287.708_973_656_894_900_858_018_248_8),
            (5.0e6, 72_124_735.558_456_187_065_695_709_399_282),
            (1.0e7, 151_180_949.369_473_913_940_105_582_878_60),
        ];
        for (x, expected) in table {
            assert!(rel(log_gamma(x).unwrap(), expected) < 1e-13, "x={x}");
        }
    }

    #[test]
    fn log_gamma_recurrence() {
        for i in 0..100 {
            let x = 0.5 + i as f64;
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = log_gamma(x).unwrap() + x.ln();
            assert!((lhs - rhs).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn log_gamma_rejects_nonpositive() {
        for x in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(log_gamma(x).is_err());
        }
    }

    #[test]
    fn half_ratio_branches_agree() {
        for z in [20.0, 25.5, 40.0, 77.0] {
            let direct = ln_gamma_unchecked(z) - ln_gamma_unchecked(z + 0.5);
            assert!((ln_gamma_half_ratio(z) - direct).abs() < 1e-13, "z={z}");
        }
    }

    #[test]
    fn expected_l1_small_dimensions() {
        assert!((expected_l1_norm(1).unwrap() - 1.0).abs() < 1e-14);
        assert!(rel(expected_l1_norm(2).unwrap(), 4.0 / PI) < 1e-12);
        assert!(rel(expected_l1_norm(3).unwrap(), 1.5) < 1e-12);
        assert!(expected_l1_norm(0).is_err());
    }

    #[test]
    fn expected_l1_reference_values() {
        // mpmath at 50 digits
        let table = [
            (10, 2.586_899_392_477_790_854_402_174_185_610_4),
            (100, 7.998_817_343_488_405_983_512_008_265_528_4),
            (1000, 25.237_633_838_999_707_882_083_716_489_618),
            (100_000, 252.313_882_985_934_978_921_846_029_162_36),
            (1_000_000, 797.884_760_274_030_490_457_588_805_546_41),
        ];
        for (n, expected) in table {
            assert!(rel(expected_l1_norm(n).unwrap(), expected) < 1e-13, "n={n}");
        }
    }

    #[test]
    fn gamma_ratio_examples() {
        let b = gamma_ratio_bounds(2).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-15);
        assert!(rel(b.value, 2.0 / PI.sqrt()) < 1e-13);
        assert!(rel(b.upper, 2f64.sqrt()) < 1e-15);
        assert!(b.holds);

        let b = gamma_ratio_bounds(100).unwrap();
        assert!(b.holds && b.value >= 0.02f64.sqrt() && b.value <= (2.0 / 99.0f64).sqrt());

        let b = gamma_ratio_bounds(1_000_000).unwrap();
        assert!(b.holds);
        assert!(b.upper - b.lower < 1e-9);
        // relative width of the bracket is ~1/(2n)
        assert!(rel((b.upper - b.lower) / b.value, 0.5e-6) < 1e-3);

        assert!(gamma_ratio_bounds(1).is_err());
    }

    #[test]
    fn normalized_examples() {
        let b = normalized_expectation_bounds(2).unwrap();
        assert!(rel(b.value, 0.900_316_316_157_106_069_555_199_191) < 1e-13);
        assert!(rel(b.upper, std::f64::consts::FRAC_2_SQRT_PI) < 1e-13);
        assert!(b.holds);

        let b = normalized_expectation_bounds(100_000).unwrap();
        assert!(b.value >= 0.797_884_6 && b.value <= 0.797_888_6);
        assert!(b.holds);
    }

    #[test]
    fn stirling_examples() {
        let dev = |n: u64| rel(stirling_expectation(n).unwrap(), expected_l1_norm(n).unwrap());
        assert!(dev(10) < 0.1);
        // mpmath: relative deviation -1.8293e-5 at n = 10
        assert!(rel(dev(10), 1.829_321_391e-5) < 1e-6);
        assert!(dev(10_000) <= 1e-7);
        assert!(dev(100) / dev(1000) >= 100.0);
        for n in [10u64, 32, 100, 1000] {
            assert!(dev(n) <= 10.0 / (n * n) as f64);
        }
        assert!(stirling_expectation(3).is_err());
    }

    #[test]
    fn stirling_rearrangement_matches_direct_substitution() {
        // ln of e^-z z^(z-1/2) sqrt(2 pi) (1 + 1/(12z)), evaluated literally
        let two_term = |z: f64| -z + (z - 0.5) * z.ln() + SQRT_2PI.ln() + (1.0 / (12.0 * z)).ln_1p();
        for n in [4u64, 10, 57, 400] {
            let z = n as f64 / 2.0;
            let direct = ((n as f64).ln() - LN_SQRT_PI + two_term(z) - two_term(z + 0.5)).exp();
            assert!(rel(stirling_expectation(n).unwrap(), direct) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn threshold_examples() {
        let t = theorem2_threshold(100).unwrap();
        assert!(!t.certified && t.guarantee_value > CERTIFICATION_LEVEL);
        assert!(rel(t.t, (PI / 2.0 * 1e4).ln().sqrt()) < 1e-14);
        let far = theorem2_threshold(1 << 60).unwrap();
        assert!((far.guarantee_value - asymptotic_bound_center()).abs() < 1e-6);
        assert!(rel(asymptotic_bound_center(), 0.817_000_608_603_951_293_598) < 1e-15);
        assert!(theorem2_threshold(1).is_err());
    }

    #[test]
    fn t_makes_tail_bound_exactly_one_over_n() {
        for n in [2u64, 10, 1000, 1 << 30] {
            let t = theorem2_threshold(n).unwrap().t;
            assert!(rel(l1_tail_bound(t), 1.0 / n as f64) < 1e-12);
        }
    }

    #[test]
    fn first_certified_dimension_matches_scan() {
        // independent bisection in double precision (Python) gives 3_769_892
        let n = first_certified_dimension();
        assert_eq!(n, 3_769_892);
        assert!(theorem2_threshold(n).unwrap().certified);
        assert!(!theorem2_threshold(n - 1).unwrap().certified);
    }

    #[test]
    fn gm_constant() {
        let c = gm_concentration_constant();
        // the quoted 0.529 is the truncation to three decimals
        assert_eq!((c * 1000.0).floor(), 529.0);
        // mpmath: sqrt(2) * exp(digamma(0.5) / 2)
        assert!(rel(c, 0.529_839_354_694_838_221_123_596_883_538_81) < 1e-15);
        assert!(c > 0.394);
    }

    #[test]
    fn analytic_row_is_consistent() {
        let row = analytic_row(3).unwrap();
        assert!(rel(row.normalized, 0.866_025_403_784_438_646_763_723) < 1e-13);
        assert!(row.lower <= row.normalized && row.normalized <= row.upper);
        assert!(row.stirling_approx.is_none());
        assert!(analytic_row(16).unwrap().stirling_approx.is_some());
    }
}
