//! `amgm check | mc | analytic`.
//!
//! Every command prints exactly one JSON envelope on stdout. Files are only
//! written when an output path flag is given.

use crate::bounds::{self, AmGmReport, HolderCheck, VarianceSandwich, WeightedSample};
use crate::gamma::{self, AnalyticRow};
use crate::output::{format_float, OutputEnvelope};
use crate::sphere::{self, ConcentrationCheck, GmConcentration, McConfig, McSummary};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const HISTOGRAM_BINS: usize = 100;
const MAX_ANALYTIC_ROWS: usize = 100_000;

type Column = fn(&sphere::SampleStats) -> f64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("internal fault: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<bounds::BoundsError> for CliError {
    fn from(e: bounds::BoundsError) -> Self {
        CliError::Validation(format!("{e:?}: {e}"))
    }
}

impl From<gamma::GammaError> for CliError {
    fn from(e: gamma::GammaError) -> Self {
        CliError::Validation(format!("{e:?}: {e}"))
    }
}

impl From<sphere::McError> for CliError {
    fn from(e: sphere::McError) -> Self {
        match e {
            sphere::McError::SamplerFault => CliError::Internal(e.to_string()),
            other => CliError::Validation(format!("{other:?}: {other}")),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "amgm", version, about = "Refined AM-GM bounds and unit-sphere Monte Carlo")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Refined AM-GM report for one weighted sample.
    Check(CheckArgs),
    /// Monte Carlo on the unit sphere.
    Mc(McArgs),
    /// Exact and bounded l1 expectations over a range of dimensions.
    Analytic(AnalyticArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    /// Comma-separated nonnegative values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "input")]
    pub values: Option<Vec<f64>>,
    /// Comma-separated positive weights (default: equal weights).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "input")]
    pub weights: Option<Vec<f64>>,
    /// CSV file with columns value[,weight]; header row optional.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Lower exponent of the Hölder refinement (requires --s).
    #[arg(long, requires = "s", allow_hyphen_values = true)]
    pub r: Option<f64>,
    /// Upper exponent of the Hölder refinement (requires --r).
    #[arg(long, requires = "r", allow_hyphen_values = true)]
    pub s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = gamma::CERTIFICATION_LEVEL)]
    pub threshold: f64,
    /// Deviation levels for the tail-fraction checks.
    #[arg(long = "tail-ts", value_delimiter = ',', default_value = "1,2,3")]
    pub tail_ts: Vec<f64>,
    /// Directory for s1.csv, bound.csv and gm_side.csv histograms.
    #[arg(long = "hist-out")]
    pub hist_out: Option<PathBuf>,
    /// Worker threads (0 = all cores). Never changes the output.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyticArgs {
    #[arg(long = "n-min")]
    pub n_min: Option<u64>,
    #[arg(long = "n-max")]
    pub n_max: Option<u64>,
    /// `linear:k` (add k) or `geometric:k` (multiply by k > 1).
    #[arg(long, default_value = "linear:1")]
    pub step: String,
    /// Also report the smallest certified dimension.
    #[arg(long = "find-certified")]
    pub find_certified: bool,
    /// Optional CSV copy of the rows.
    #[arg(long = "table-out")]
    pub table_out: Option<PathBuf>,
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    let envelope = match &cli.command {
        Command::Check(args) => cmd_check(args)?,
        Command::Mc(args) => cmd_mc(args)?,
        Command::Analytic(args) => cmd_analytic(args)?,
    };
    Ok(envelope.to_json())
}

fn envelope<P: Serialize, R: Serialize>(command: &str, p: &P, r: &R) -> Result<OutputEnvelope, CliError> {
    OutputEnvelope::new(command, p, r).map_err(|e| CliError::Internal(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResults {
    pub report: AmGmReport,
    pub sandwich: VarianceSandwich,
    pub holder: Option<HolderCheck>,
}

/// Reads `value[,weight]` rows. A first row whose leading field is not a
/// number is treated as a header.
pub fn read_sample_csv(path: &Path) -> Result<(Vec<f64>, Option<Vec<f64>>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_error(path, e))?;
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| io_error(path, e))?;
        let field = |i: usize| record.get(i).filter(|s| !s.is_empty());
        let Some(first) = field(0) else { continue };
        let value = match first.parse::<f64>() {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(e) => return Err(io_error(path, format!("row {}: {e}", row + 1))),
        };
        values.push(value);
        if let Some(w) = field(1) {
            let w = w
                .parse::<f64>()
                .map_err(|e| io_error(path, format!("row {}: {e}", row + 1)))?;
            weights.push(w);
        }
    }
    match weights.len() {
        0 => Ok((values, None)),
        k if k == values.len() => Ok((values, Some(weights))),
        k => Err(CliError::Validation(format!(
            "LengthMismatch: {} values but {k} weights in {}",
            values.len(),
            path.display()
        ))),
    }
}

pub fn cmd_check(args: &CheckArgs) -> Result<OutputEnvelope, CliError> {
    let (values, weights) = match (&args.input, &args.values) {
        (Some(path), _) => read_sample_csv(path)?,
        (None, Some(values)) => (values.clone(), args.weights.clone()),
        (None, None) => {
            return Err(CliError::Validation("one of --values or --input is required".into()))
        }
    };
    let sample = WeightedSample::new(values, weights)?;
    let holder = match (args.r, args.s) {
        (Some(r), Some(s)) => Some(bounds::holder_refinement_check(&sample, r, s)?),
        _ => None,
    };
    let results = CheckResults {
        report: bounds::refined_am_gm_report(&sample),
        sandwich: bounds::variance_sandwich(&sample),
        holder,
    };
    #[derive(Serialize)]
    struct Params<'a> {
        values: &'a [f64],
        weights: &'a [f64],
        input: &'a Option<PathBuf>,
        r: Option<f64>,
        s: Option<f64>,
    }
    let params = Params {
        values: sample.values(),
        weights: sample.weights(),
        input: &args.input,
        r: args.r,
        s: args.s,
    };
    envelope("check", &params, &results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResults {
    pub summary: McSummary,
    /// Present when the run has enough trials.
    pub concentration: Option<ConcentrationCheck>,
    /// Present for `n >= 100`.
    pub gm_concentration: Option<GmConcentration>,
}

fn write_histogram(path: &Path, values: &[f64]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    writer
        .write_record(["bin_left", "bin_right", "count"])
        .map_err(|e| io_error(path, e))?;
    for bin in sphere::histogram(values, HISTOGRAM_BINS) {
        writer
            .write_record([
                format_float(bin.bin_left),
                format_float(bin.bin_right),
                bin.count.to_string(),
            ])
            .map_err(|e| io_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))
}

pub fn cmd_mc(args: &McArgs) -> Result<OutputEnvelope, CliError> {
    let config = McConfig {
        n: args.n,
        trials: args.trials,
        seed: args.seed,
        threshold: args.threshold,
        tail_ts: args.tail_ts.clone(),
    };
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let records = pool.install(|| sphere::run_trials(&config))?;
    let summary = sphere::summarize(&config, &records);

    if let Some(dir) = &args.hist_out {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let columns: [(&str, Column); 3] = [
            ("s1", |r| r.s1),
            ("bound", |r| r.bound),
            ("gm_side", |r| r.gm_side),
        ];
        for (name, get) in columns {
            let values: Vec<f64> = records.iter().map(get).collect();
            write_histogram(&dir.join(format!("{name}.csv")), &values)?;
        }
    }

    let results = McResults {
        concentration: sphere::median_and_tail_stats(&summary).ok(),
        gm_concentration: sphere::gm_concentration_stats(&summary).ok(),
        summary,
    };
    // thread count is deliberately not echoed: output is identical for any pool size
    #[derive(Serialize)]
    struct Params<'a> {
        #[serde(flatten)]
        config: &'a McConfig,
        hist_out: &'a Option<PathBuf>,
    }
    envelope("mc", &Params { config: &config, hist_out: &args.hist_out }, &results)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Linear(u64),
    Geometric(f64),
}

impl std::str::FromStr for Step {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CliError::Validation(format!("invalid step '{s}': expected linear:k or geometric:k"));
        let (kind, k) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "linear" => match k.parse::<u64>() {
                Ok(k) if k >= 1 => Ok(Step::Linear(k)),
                _ => Err(bad()),
            },
            "geometric" => match k.parse::<f64>() {
                Ok(k) if k.is_finite() && k > 1.0 => Ok(Step::Geometric(k)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

/// Dimensions `n_min, ...` up to `n_max` under `step`.
pub fn dimension_grid(n_min: u64, n_max: u64, step: Step) -> Result<Vec<u64>, CliError> {
    if n_min < 2 || n_min > n_max {
        return Err(CliError::Validation(format!(
            "invalid range: need 2 <= n-min <= n-max, got {n_min}..{n_max}"
        )));
    }
    let mut grid = Vec::new();
    let mut n = n_min;
    while n <= n_max {
        if grid.len() == MAX_ANALYTIC_ROWS {
            return Err(CliError::Validation(format!(
                "range produces more than {MAX_ANALYTIC_ROWS} rows; use a coarser --step"
            )));
        }
        grid.push(n);
        n = match step {
            Step::Linear(k) => n.saturating_add(k),
            Step::Geometric(k) => ((n as f64 * k).ceil() as u64).max(n + 1),
        };
        if n == u64::MAX {
            break;
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedDimension {
    pub n: u64,
    pub guarantee_value: f64,
    pub previous_guarantee_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticResults {
    pub rows: Vec<AnalyticRow>,
    pub first_certified: Option<CertifiedDimension>,
}

fn write_table(path: &Path, rows: &[AnalyticRow]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    writer
        .write_record([
            "n",
            "expected_l1",
            "normalized",
            "lower",
            "upper",
            "stirling_approx",
            "theorem2_t",
            "theorem2_exponent_bound",
        ])
        .map_err(|e| io_error(path, e))?;
    for row in rows {
        writer
            .write_record([
                row.n.to_string(),
                format_float(row.expected_l1),
                format_float(row.normalized),
                format_float(row.lower),
                format_float(row.upper),
                row.stirling_approx.map(format_float).unwrap_or_default(),
                format_float(row.theorem2_t),
                format_float(row.theorem2_exponent_bound),
            ])
            .map_err(|e| io_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))
}

pub fn cmd_analytic(args: &AnalyticArgs) -> Result<OutputEnvelope, CliError> {
    let step: Step = args.step.parse()?;
    let range = match (args.n_min, args.n_max) {
        (None, None) if args.find_certified => None,
        (None, None) => {
            return Err(CliError::Validation(
                "--n-min/--n-max are required unless --find-certified is given".into(),
            ))
        }
        (Some(lo), None) => Some((lo, lo)),
        (None, Some(hi)) => Some((hi, hi)),
        (Some(lo), Some(hi)) => Some((lo, hi)),
    };
    let rows = match range {
        Some((lo, hi)) => dimension_grid(lo, hi, step)?
            .into_iter()
            .map(gamma::analytic_row)
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    let first_certified = if args.find_certified {
        let n = gamma::first_certified_dimension();
        Some(CertifiedDimension {
            n,
            guarantee_value: gamma::theorem2_threshold(n)?.guarantee_value,
            previous_guarantee_value: gamma::theorem2_threshold(n - 1)?.guarantee_value,
        })
    } else {
        None
    };
    if let Some(path) = &args.table_out {
        write_table(path, &rows)?;
    }
    envelope("analytic", args, &AnalyticResults { rows, first_certified })
}
