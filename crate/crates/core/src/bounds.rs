//! Refined AM-GM bounds for weighted nonnegative samples.
//!
//! For values `x_i >= 0` (not all zero) and weights `a_i > 0` summing to one,
//! the correction term
//!
//! ```text
//! c = 1 - (sum a_i sqrt(x_i)) / sqrt(sum a_i x_i)
//! ```
//!
//! satisfies `exp(2c) * GM <= AM`. The same quantity is sandwiched by the
//! variance of `sqrt(x) / ||sqrt(x)||_2` under the weight measure:
//! `Var / 2 <= c <= Var`, which yields the weaker `exp(Var) * GM <= AM`.
//!
//! All products are evaluated in the log domain. Internally every reduction
//! runs over the (value, weight) pairs in a canonical sorted order, so the
//! results do not depend on the order in which the pairs were supplied.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the raw weight sum before renormalization.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// Relative slack used by [`holder_refinement_check`].
pub const HOLDER_SLACK: f64 = 1e-10;

/// Absolute slack used by [`variance_sandwich`].
pub const SANDWICH_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("every value is zero; at least one value must be positive")]
    AllZeroValues,
    #[error("value at index {index} is negative or not finite: {value}")]
    NegativeValue { index: usize, value: f64 },
    #[error("weight at index {index} is not strictly positive and finite: {weight}")]
    NonPositiveWeight { index: usize, weight: f64 },
    #[error("weights sum to {sum}, which is outside 1 +/- {WEIGHT_SUM_TOLERANCE}")]
    WeightSumOutOfRange { sum: f64 },
    #[error("{values} values but {weights} weights")]
    LengthMismatch { values: usize, weights: usize },
    #[error("invalid exponents r={r}, s={s}: require 0 < r < s/2")]
    InvalidExponents { r: f64, s: f64 },
    #[error("invalid dimension {0}: require n >= 2")]
    InvalidDimension(usize),
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
}

/// Nonnegative values with strictly positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    /// Validates `values` and `weights`, renormalizing the weights.
    ///
    /// With `weights == None` every value gets weight `1/n`.
    pub fn new(values: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self, BoundsError> {
        let n = values.len();
        if n == 0 {
            return Err(BoundsError::EmptySample);
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != n {
                    return Err(BoundsError::LengthMismatch {
                        values: n,
                        weights: w.len(),
                    });
                }
                w
            }
            None => vec![1.0 / n as f64; n],
        };
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(BoundsError::NegativeValue { index, value });
        }
        if let Some((index, &weight)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(BoundsError::NonPositiveWeight { index, weight });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(BoundsError::WeightSumOutOfRange { sum });
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(BoundsError::AllZeroValues);
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { values, weights })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pairs in canonical order (by value, then by weight).
    fn canonical_pairs(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self
            .values
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pairs
    }

    fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    fn all_equal(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }
}

/// Convenience wrapper around [`WeightedSample::new`].
pub fn make_sample(values: &[f64], weights: Option<&[f64]>) -> Result<WeightedSample, BoundsError> {
    WeightedSample::new(values.to_vec(), weights.map(<[f64]>::to_vec))
}

/// Means and refinement terms for one weighted sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmGmReport {
    pub am: f64,
    pub gm: f64,
    /// Correction term `1 - sum a_i sqrt(x_i) / sqrt(AM)`.
    pub c: f64,
    /// `exp(2c) * gm`.
    pub refined_bound: f64,
    /// Variance of `sqrt(x) / ||sqrt(x)||_2` under the weight measure.
    pub variance: f64,
    /// `exp(variance) * gm`.
    pub variance_bound: f64,
}

/// Weighted power sums of `u_i^p` for `u` already scaled into `[0, 1]`.
fn power_mean_sum(pairs: &[(f64, f64)], scale: f64, p: f64) -> f64 {
    pairs
        .iter()
        .map(|&(x, w)| if x == 0.0 { 0.0 } else { w * (x / scale).powf(p) })
        .sum()
}

/// Returns `(am, m, dispersion)` with `m = sum a_i sqrt(x_i)` and
/// `dispersion = sum a_i (sqrt(x_i) - m)^2`, the two-pass form of `am - m^2`.
fn root_moments(pairs: &[(f64, f64)]) -> (f64, f64, f64) {
    let am: f64 = pairs.iter().map(|&(x, w)| w * x).sum();
    let m: f64 = pairs.iter().map(|&(x, w)| w * x.sqrt()).sum();
    let dispersion: f64 = pairs
        .iter()
        .map(|&(x, w)| {
            let d = x.sqrt() - m;
            w * d * d
        })
        .sum();
    (am, m, dispersion)
}

/// `1 - m / sqrt(A)` written as `D / (sqrt(A) (sqrt(A) + m))`, which has no
/// cancellation when the sample is nearly constant.
fn correction_from_moments(a: f64, m: f64, dispersion: f64) -> f64 {
    let root = a.sqrt();
    (dispersion / (root * (root + m))).clamp(0.0, 1.0)
}

fn geometric_mean(pairs: &[(f64, f64)]) -> f64 {
    if pairs.iter().any(|&(x, _)| x == 0.0) {
        return 0.0;
    }
    pairs.iter().map(|&(x, w)| w * x.ln()).sum::<f64>().exp()
}

pub fn refined_am_gm_report(sample: &WeightedSample) -> AmGmReport {
    let pairs = sample.canonical_pairs();
    let (am, m, dispersion) = root_moments(&pairs);
    let gm = geometric_mean(&pairs);
    let (c, variance) = if sample.all_equal() {
        (0.0, 0.0)
    } else {
        (
            correction_from_moments(am, m, dispersion),
            (dispersion / am).clamp(0.0, 1.0),
        )
    };
    AmGmReport {
        am,
        gm,
        c,
        refined_bound: (2.0 * c).exp() * gm,
        variance,
        variance_bound: variance.exp() * gm,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderCheck {
    pub r: f64,
    pub s: f64,
    /// `||x||_r` under the weight measure.
    pub lhs: f64,
    /// `||x||_s * [1 - (2r/s) c_s]^(1/r)`.
    pub rhs: f64,
    pub holds: bool,
}

fn validate_exponents(r: f64, s: f64) -> Result<(), BoundsError> {
    if r.is_finite() && s.is_finite() && r > 0.0 && r < s / 2.0 {
        Ok(())
    } else {
        Err(BoundsError::InvalidExponents { r, s })
    }
}

/// `||x||_p` under the weight measure, scaled by the maximum to avoid overflow.
fn weighted_norm(pairs: &[(f64, f64)], scale: f64, p: f64) -> f64 {
    scale * (power_mean_sum(pairs, scale, p).ln() / p).exp()
}

/// Compares `||x||_r` against the refined Hölder bound built from `||x||_s`.
pub fn holder_refinement_check(
    sample: &WeightedSample,
    r: f64,
    s: f64,
) -> Result<HolderCheck, BoundsError> {
    validate_exponents(r, s)?;
    let pairs = sample.canonical_pairs();
    let scale = sample.max_value();

    let lhs = weighted_norm(&pairs, scale, r);
    let norm_s = weighted_norm(&pairs, scale, s);

    // c_s for f^(s/2), computed on the scaled values (c_s is scale free).
    let half = s / 2.0;
    let powered: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(x, w)| {
            let u = if x == 0.0 { 0.0 } else { (x / scale).powf(half) };
            (u * u, w)
        })
        .collect();
    let c_s = if sample.all_equal() {
        0.0
    } else {
        let (a, m, dispersion) = root_moments(&powered);
        correction_from_moments(a, m, dispersion)
    };

    let bracket = ((-(2.0 * r / s) * c_s).ln_1p() / r).exp();
    let rhs = norm_s * bracket;
    Ok(HolderCheck {
        r,
        s,
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + HOLDER_SLACK),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitStep {
    pub r: f64,
    pub lhs_eq3: f64,
    pub rhs_eq3: f64,
    /// `|rhs(r) - am * exp(-2c)|`.
    pub gap_to_limit: f64,
    /// `gap_to_limit / (am * exp(-2c))`.
    pub relative_gap: f64,
}

/// Evaluates the `s = 1` refinement along a decreasing sequence of `r` in
/// `(0, 1/2)`, tracking how the right side approaches `am * exp(-2c)`.
pub fn power_mean_limit_check(
    sample: &WeightedSample,
    r_sequence: &[f64],
) -> Result<Vec<LimitStep>, BoundsError> {
    for (i, &r) in r_sequence.iter().enumerate() {
        validate_exponents(r, 1.0)?;
        if i > 0 && r >= r_sequence[i - 1] {
            return Err(BoundsError::InvalidExponents { r, s: 1.0 });
        }
    }
    let report = refined_am_gm_report(sample);
    let limit = report.am * (-2.0 * report.c).exp();
    let pairs = sample.canonical_pairs();
    let scale = sample.max_value();

    Ok(r_sequence
        .iter()
        .map(|&r| {
            let lhs_eq3 = weighted_norm(&pairs, scale, r);
            let rhs_eq3 = report.am * ((-2.0 * r * report.c).ln_1p() / r).exp();
            let gap_to_limit = (rhs_eq3 - limit).abs();
            LimitStep {
                r,
                lhs_eq3,
                rhs_eq3,
                gap_to_limit,
                relative_gap: gap_to_limit / limit,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceSandwich {
    pub half_var: f64,
    pub c: f64,
    pub var: f64,
    /// `sum a_i sqrt(x_i) / sqrt(am)`, always in `(0, 1]`.
    pub t: f64,
    pub holds: bool,
}

pub fn variance_sandwich(sample: &WeightedSample) -> VarianceSandwich {
    let report = refined_am_gm_report(sample);
    let pairs = sample.canonical_pairs();
    let (am, m, _) = root_moments(&pairs);
    let t = (m / am.sqrt()).min(1.0);
    let half_var = report.variance / 2.0;
    VarianceSandwich {
        half_var,
        c: report.c,
        var: report.variance,
        t,
        holds: half_var <= report.c + SANDWICH_SLACK && report.c <= report.variance + SANDWICH_SLACK,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegenerateGap {
    pub n: usize,
    pub epsilon: f64,
    /// GM-to-quadratic-mean ratio of `y = (eps, 1, ..., 1)`.
    pub lhs_eq7: f64,
    /// `exp(mean|y| / sqrt(mean y^2) - 1)`.
    pub rhs_eq7: f64,
    pub ratio: f64,
}

/// Equal-weight ratio form evaluated at `y = (eps, 1, ..., 1)`; as `eps`
/// shrinks the left side collapses while the right side barely moves.
pub fn degenerate_gap_demo(n: usize, epsilon: f64) -> Result<DegenerateGap, BoundsError> {
    if n < 2 {
        return Err(BoundsError::InvalidDimension(n));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(BoundsError::InvalidEpsilon(epsilon));
    }
    let nf = n as f64;
    let rest = nf - 1.0;
    let mean_sq = (epsilon * epsilon + rest) / nf;
    let mean_abs = (epsilon + rest) / nf;
    // prod |y_i|^(1/n) = eps^(1/n) since the other coordinates are 1
    let log_lhs = epsilon.ln() / nf - 0.5 * mean_sq.ln();
    let lhs_eq7 = log_lhs.exp();
    let rhs_eq7 = (mean_abs / mean_sq.sqrt() - 1.0).exp();
    Ok(DegenerateGap {
        n,
        epsilon,
        lhs_eq7,
        rhs_eq7,
        ratio: (log_lhs - (mean_abs / mean_sq.sqrt() - 1.0)).exp(),
    })
}
