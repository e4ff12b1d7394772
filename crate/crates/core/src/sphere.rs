//! Seeded Monte Carlo on the Euclidean unit sphere.
//!
//! Points are drawn as normalized standard Gaussian vectors. Trial `k` of an
//! experiment seeded with `seed` draws from its own ChaCha8 stream
//! (`seed`, stream `k`), so a trial's outcome depends only on `(seed, k)`.
//! Trials may run on any number of threads; per-trial records are collected
//! in trial order and reduced sequentially, which makes every summary
//! bit-reproducible.

use crate::gamma;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Consecutive all-zero Gaussian draws tolerated before giving up.
pub const MAX_ZERO_DRAWS: usize = 100;

/// Relative slack on the pointwise check `gm_side <= bound`.
pub const POINTWISE_SLACK: f64 = 1e-10;

/// Minimum trial count for the median and tail checks.
pub const MIN_CONCENTRATION_TRIALS: usize = 10_000;

/// Minimum dimension for the geometric-mean concentration statistics.
pub const MIN_GM_DIMENSION: usize = 100;

/// Asymptotic lower level for `sqrt(n) prod |y_i|^(1/n)`.
pub const GM_FLOOR: f64 = 0.394;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{trials} trials is below the required {required}")]
    InsufficientTrials { trials: usize, required: usize },
    #[error("dimension {n} is below the required {required}")]
    DimensionTooSmall { n: usize, required: usize },
    #[error("sampler drew {MAX_ZERO_DRAWS} consecutive zero vectors")]
    SamplerFault,
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A point on the unit sphere in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereVector {
    coords: Vec<f64>,
}

impl SphereVector {
    /// Normalizes `coords` onto the sphere; `None` for the zero vector or
    /// non-finite input.
    pub fn from_direction(mut coords: Vec<f64>) -> Option<Self> {
        normalize_in_place(&mut coords).then_some(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

fn normalize_in_place(coords: &mut [f64]) -> bool {
    let norm = compensated_sum(coords.iter().map(|x| x * x)).sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return false;
    }
    coords.iter_mut().for_each(|x| *x /= norm);
    true
}

/// Fills `buf` with a uniform point on the sphere in `R^n`.
fn fill_unit_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R, buf: &mut Vec<f64>) -> Result<(), McError> {
    for _ in 0..MAX_ZERO_DRAWS {
        buf.clear();
        buf.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        if normalize_in_place(buf) {
            return Ok(());
        }
    }
    Err(McError::SamplerFault)
}

pub fn sample_unit_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SphereVector, McError> {
    if n == 0 {
        return Err(McError::InvalidConfig("dimension must be at least 1".into()));
    }
    let mut coords = Vec::with_capacity(n);
    fill_unit_sphere(n, rng, &mut coords)?;
    Ok(SphereVector { coords })
}

/// The random stream owned by trial `trial` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Statistics of one sphere point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    /// `||y||_1`.
    pub l1: f64,
    /// `||y||_1 / sqrt(n)`.
    pub s1: f64,
    /// `exp(s1 - 1)`.
    pub bound: f64,
    /// `sqrt(n) prod |y_i|^(1/n)`; zero if any coordinate is zero.
    pub gm_side: f64,
    pub holds_eq8: bool,
}

fn stats_of(coords: &[f64]) -> SampleStats {
    let nf = coords.len() as f64;
    let l1: f64 = coords.iter().map(|y| y.abs()).sum();
    let s1 = l1 / nf.sqrt();
    let bound = (s1 - 1.0).exp();
    let log_sum: f64 = coords.iter().map(|y| y.abs().ln()).sum();
    // ln 0 = -inf propagates to gm_side = 0
    let gm_side = (0.5 * nf.ln() + log_sum / nf).exp();
    let gm_side = if gm_side.is_nan() { 0.0 } else { gm_side };
    SampleStats {
        l1,
        s1,
        bound,
        gm_side,
        holds_eq8: gm_side <= bound * (1.0 + POINTWISE_SLACK),
    }
}

pub fn per_sample_stats(y: &SphereVector) -> SampleStats {
    stats_of(&y.coords)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub threshold: f64,
    pub tail_ts: Vec<f64>,
}

impl McConfig {
    pub fn new(n: usize, trials: usize, seed: u64) -> Self {
        Self {
            n,
            trials,
            seed,
            threshold: gamma::CERTIFICATION_LEVEL,
            tail_ts: vec![1.0, 2.0, 3.0],
        }
    }

    pub fn validate(&self) -> Result<(), McError> {
        if self.n < 2 {
            return Err(McError::InvalidConfig(format!("n = {} but n >= 2 is required", self.n)));
        }
        if self.trials < 1 {
            return Err(McError::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(McError::InvalidConfig(format!(
                "threshold {} is outside (0, 1)",
                self.threshold
            )));
        }
        if let Some(t) = self.tail_ts.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(McError::InvalidConfig(format!("tail level {t} must be finite and >= 0")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; zero for one trial).
    pub std: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

impl StatSummary {
    pub fn from_values(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "summary of an empty sample");
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            std,
            median: median_of_sorted(&sorted),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self, trials: usize) -> f64 {
        self.std / (trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFraction {
    pub t: f64,
    /// Empirical `P(| ||y||_1 - median | > t)`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub threshold: f64,
    pub l1: StatSummary,
    pub s1: StatSummary,
    pub bound: StatSummary,
    pub gm_side: StatSummary,
    /// Fraction of trials with `bound < threshold`.
    pub below_threshold_fraction: f64,
    pub pointwise_violations: u64,
    pub tail_fractions: Vec<TailFraction>,
    /// Fraction of trials with `gm_side > 0.394`.
    pub above_gm_floor_fraction: f64,
    pub analytic_expected_l1: f64,
    pub analytic_expected_s1: f64,
    /// `|mean(||y||_1) - median(||y||_1)|`.
    pub median_gap: f64,
}

/// Draws every trial and returns the per-trial records in trial order.
///
/// Uses the current rayon pool; the result does not depend on its size.
pub fn run_trials(config: &McConfig) -> Result<Vec<SampleStats>, McError> {
    config.validate()?;
    let n = config.n;
    (0..config.trials as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, trial| {
                let mut rng = trial_rng(config.seed, trial);
                fill_unit_sphere(n, &mut rng, buf)?;
                Ok(stats_of(buf))
            },
        )
        .collect()
}

fn fraction(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

/// Reduces per-trial records (in trial order) into a summary.
pub fn summarize(config: &McConfig, records: &[SampleStats]) -> McSummary {
    let column = |f: fn(&SampleStats) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let l1_values = column(|r| r.l1);
    let l1 = StatSummary::from_values(&l1_values);
    let total = records.len();

    let tail_fractions = config
        .tail_ts
        .iter()
        .map(|&t| TailFraction {
            t,
            fraction: fraction(
                l1_values.iter().filter(|v| (*v - l1.median).abs() > t).count(),
                total,
            ),
        })
        .collect();

    let analytic_expected_l1 =
        gamma::expected_l1_norm(config.n as u64).expect("validated dimension is positive");

    McSummary {
        n: config.n,
        trials: total,
        seed: config.seed,
        threshold: config.threshold,
        l1,
        s1: StatSummary::from_values(&column(|r| r.s1)),
        bound: StatSummary::from_values(&column(|r| r.bound)),
        gm_side: StatSummary::from_values(&column(|r| r.gm_side)),
        below_threshold_fraction: fraction(
            records.iter().filter(|r| r.bound < config.threshold).count(),
            total,
        ),
        pointwise_violations: records.iter().filter(|r| !r.holds_eq8).count() as u64,
        tail_fractions,
        above_gm_floor_fraction: fraction(records.iter().filter(|r| r.gm_side > GM_FLOOR).count(), total),
        analytic_expected_l1,
        analytic_expected_s1: analytic_expected_l1 / (config.n as f64).sqrt(),
        median_gap: (l1.mean - l1.median).abs(),
    }
}

pub fn run_experiment(config: &McConfig) -> Result<McSummary, McError> {
    let records = run_trials(config)?;
    Ok(summarize(config, &records))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub t: f64,
    pub fraction: f64,
    /// `sqrt(pi/2) exp(-t^2/2)`.
    pub bound: f64,
    /// Three binomial standard errors at `p = min(bound, 1)`.
    pub allowance: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationCheck {
    pub median_gap: f64,
    /// `pi/2` plus three standard errors of the mean of `||y||_1`.
    pub median_gap_limit: f64,
    pub median_gap_ok: bool,
    pub tail_ok: Vec<TailCheck>,
}

/// Checks the mean-median gap of `||y||_1` against `pi/2` and the tail
/// fractions against `sqrt(pi/2) exp(-t^2/2)`, each with a three-sigma
/// Monte Carlo allowance.
pub fn median_and_tail_stats(summary: &McSummary) -> Result<ConcentrationCheck, McError> {
    if summary.trials < MIN_CONCENTRATION_TRIALS {
        return Err(McError::InsufficientTrials {
            trials: summary.trials,
            required: MIN_CONCENTRATION_TRIALS,
        });
    }
    let trials = summary.trials as f64;
    let median_gap_limit = PI / 2.0 + 3.0 * summary.l1.std_error(summary.trials);
    let tail_ok = summary
        .tail_fractions
        .iter()
        .map(|tf| {
            let bound = gamma::l1_tail_bound(tf.t);
            let p = bound.min(1.0);
            let allowance = 3.0 * (p * (1.0 - p) / trials).sqrt();
            TailCheck {
                t: tf.t,
                fraction: tf.fraction,
                bound,
                allowance,
                ok: tf.fraction <= bound + allowance,
            }
        })
        .collect();
    Ok(ConcentrationCheck {
        median_gap: summary.median_gap,
        median_gap_limit,
        median_gap_ok: summary.median_gap <= median_gap_limit,
        tail_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmConcentration {
    pub mean_gm_side: f64,
    pub above_0394_fraction: f64,
    pub abs_gap_to_constant: f64,
}

pub fn gm_concentration_stats(summary: &McSummary) -> Result<GmConcentration, McError> {
    if summary.n < MIN_GM_DIMENSION {
        return Err(McError::DimensionTooSmall {
            n: summary.n,
            required: MIN_GM_DIMENSION,
        });
    }
    Ok(GmConcentration {
        mean_gm_side: summary.gm_side.mean,
        above_0394_fraction: summary.above_gm_floor_fraction,
        abs_gap_to_constant: (summary.gm_side.mean - gamma::gm_concentration_constant()).abs(),
    })
}

/// Runs `config` and reports the geometric-mean concentration statistics.
pub fn gm_concentration_for(config: &McConfig) -> Result<GmConcentration, McError> {
    if config.n < MIN_GM_DIMENSION {
        return Err(McError::DimensionTooSmall {
            n: config.n,
            required: MIN_GM_DIMENSION,
        });
    }
    gm_concentration_stats(&run_experiment(config)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: u64,
}

/// Equal-width histogram over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    assert!(bins > 0, "histogram needs at least one bin");
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() {
        (lo, hi) = (0.0, 1.0);
    } else if lo == hi {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_left: lo + i as f64 * width,
            bin_right: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width },
            count,
        })
        .collect()
}
