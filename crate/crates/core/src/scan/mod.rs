//! Configuration, counts ingestion, parameter sweeps and CSV output.

mod config;
mod counts;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{ModeKind, RunConfig, Scheme};
pub use counts::{read_counts, read_counts_file, write_counts, COUNTS_HEADER};

use crate::error::{Error, Result};
use crate::finitekey::finite_key_rate;
use crate::optimizer::{optimize_parameters, OptimizationResult, ParameterBounds, ParameterVector};
use crate::pipeline::model_key_rate;
use crate::protocol::Variant;
use crate::security::KeyRateReport;

/// Swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    /// Both arms set to the axis value, in km.
    DistancePerArm,
    /// Both arms set to half the axis value, in km.
    TotalDistance,
    /// Misalignment angle in degrees.
    Beta,
}

impl ScanAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "distance_per_arm" | "distance-per-arm" => Some(ScanAxis::DistancePerArm),
            "total_distance" | "total-distance" => Some(ScanAxis::TotalDistance),
            "beta" | "beta_deg" => Some(ScanAxis::Beta),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScanAxis::DistancePerArm => "distance_per_arm",
            ScanAxis::TotalDistance => "total_distance",
            ScanAxis::Beta => "beta_deg",
        }
    }

    fn apply(self, cfg: &mut RunConfig, value: f64) {
        match self {
            ScanAxis::DistancePerArm => (cfg.channel.dist_a, cfg.channel.dist_b) = (value, value),
            ScanAxis::TotalDistance => (cfg.channel.dist_a, cfg.channel.dist_b) = (value / 2.0, value / 2.0),
            ScanAxis::Beta => cfg.beta_deg = value,
        }
    }
}

/// Grid and comparison set of a sweep. The evaluation mode comes from the
/// run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub axis: ScanAxis,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub variants: Vec<Variant>,
    pub optimize: bool,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("step", "must be positive"));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start <= self.stop) {
            return Err(Error::invalid("range", format!("[{}, {}] is empty", self.start, self.stop)));
        }
        if self.variants.is_empty() {
            return Err(Error::invalid("variants", "at least one variant is required"));
        }
        Ok(())
    }

    /// `start, start + step, …` up to `stop`, which is included when it lies
    /// on the grid.
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// One evaluated point: the parameters used and their report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub parameters: ParameterVector,
    pub report: KeyRateReport,
    pub optimization: Option<OptimizationResult>,
}

/// Key rate at the configured point, optionally after optimising the
/// intensities and probabilities.
pub fn evaluate_point(config: &RunConfig, optimize: bool) -> Result<PointResult> {
    config.validate()?;
    let objective = config.objective()?;
    if optimize {
        let opt = optimize_parameters(&objective, &ParameterBounds::default(), &config.optimizer_settings())?;
        let report = objective.evaluate(&opt.best)?;
        Ok(PointResult { parameters: opt.best, report, optimization: Some(opt) })
    } else {
        let report = model_key_rate(&objective.protocol, &objective.params, &objective.mode)?;
        Ok(PointResult { parameters: ParameterVector::from_config(&objective.protocol), report, optimization: None })
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub variant: Variant,
    pub axis: ScanAxis,
    pub axis_value: f64,
    pub outcome: std::result::Result<PointResult, String>,
}

/// Evaluates every grid point for every variant, concurrently. Rows come
/// back in grid order, variants in the order given, and a failing point
/// yields a row with its error rather than aborting the sweep.
pub fn run_scan(plan: &SweepPlan, config: &RunConfig) -> Result<Vec<ScanRow>> {
    plan.validate()?;
    config.channel.validate()?;
    let jobs: Vec<(f64, Variant)> =
        plan.grid().into_iter().flat_map(|x| plan.variants.iter().map(move |&v| (x, v))).collect();
    Ok(jobs
        .into_par_iter()
        .map(|(x, variant)| {
            let mut cfg = config.clone();
            cfg.variant = variant;
            plan.axis.apply(&mut cfg, x);
            ScanRow {
                variant,
                axis: plan.axis,
                axis_value: x,
                outcome: evaluate_point(&cfg, plan.optimize).map_err(|e| e.to_string()),
            }
        })
        .collect())
}

pub const CSV_COLUMNS: [&str; 18] = [
    "variant",
    "axis",
    "axis_value",
    "status",
    "rate",
    "rate_unclamped",
    "c_value",
    "i_e",
    "s_zz_11_lower",
    "e_zz_11_upper",
    "q_zz_signal",
    "e_zz_signal",
    "mu_z",
    "mu_x",
    "nu_x",
    "p_z",
    "p_x",
    "p_x_signal",
];

/// `#`-prefixed metadata: rate unit and the resolved configuration.
pub fn metadata_lines(config: &RunConfig) -> Vec<String> {
    let unit = match config.resolved_prefactors() {
        crate::protocol::Prefactors::Unit => "secret bits per signal-signal Z pulse pair (unit prefactors)",
        crate::protocol::Prefactors::Sampling => "secret bits per transmitted pulse pair",
    };
    let mut lines = vec![format!("# rate unit: {unit}")];
    lines.extend(config.echo().into_iter().map(|l| format!("# {l}")));
    lines
}

/// Rates span many decades; exponent notation keeps them readable.
fn sci(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes metadata, header and rows. Missing values are empty cells.
pub fn write_scan_csv<W: Write>(mut w: W, config: &RunConfig, rows: &[ScanRow]) -> Result<()> {
    for line in metadata_lines(config) {
        writeln!(w, "{line}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(CSV_COLUMNS)?;
    for row in rows {
        let mut rec = vec![row.variant.to_string(), row.axis.as_str().to_string(), row.axis_value.to_string()];
        match &row.outcome {
            Ok(p) => {
                let r = &p.report;
                let v = &p.parameters;
                rec.push(if r.diagnostics.is_empty() {
                    "ok".into()
                } else {
                    format!("ok: {}", r.diagnostics.join("; "))
                });
                rec.extend([
                    sci(r.rate),
                    sci(r.rate_unclamped),
                    opt(r.c_value),
                    r.i_e.to_string(),
                    sci(r.s_zz_11_lower),
                    opt(r.e_zz_11_upper),
                    sci(r.q_zz),
                    r.e_zz.to_string(),
                ]);
                rec.extend([v.mu_z, v.mu_x, v.nu_x, v.p_z, v.p_x, v.p_x_signal].map(|x| x.to_string()));
            }
            Err(e) => {
                rec.push(format!("error: {e}"));
                rec.extend(std::iter::repeat_n(String::new(), CSV_COLUMNS.len() - 4));
            }
        }
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

/// Finite-size key rate from a counts file.
pub fn compute_from_counts(path: &Path, config: &RunConfig) -> Result<KeyRateReport> {
    let protocol = config.protocol()?;
    config.channel.validate()?;
    let counts = read_counts_file(path, &protocol)?;
    finite_key_rate(&counts, &config.finite, &protocol, &config.channel)
}
