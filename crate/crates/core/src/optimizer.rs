//! Multi-start compass search over intensities and sampling probabilities.
//!
//! Each sweep evaluates `x ± step·eᵢ` for every free coordinate against a
//! snapshot of the current point, in parallel, then moves to the best
//! candidate. Steps halve when a sweep fails to improve the rate by the
//! relative tolerance. A start ends once every step is below `min_step` of
//! its coordinate range or the evaluation budget runs out.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ChannelParams;
use crate::pipeline::{model_key_rate, Mode};
use crate::protocol::{IntensitySettings, ProtocolConfig, Sampling};
use crate::security::KeyRateReport;

const DIM: usize = 6;
const NAMES: [&str; DIM] = ["mu_z", "mu_x", "nu_x", "p_z", "p_x", "p_x_signal"];
const HALTON_BASES: [u32; DIM] = [2, 3, 5, 7, 11, 13];

/// Optimisation variables. In the symmetric scheme `mu_z` is the shared
/// signal `μ`, `mu_x` mirrors it and `nu_x` is `ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterVector {
    pub mu_z: f64,
    pub mu_x: f64,
    pub nu_x: f64,
    pub p_z: f64,
    pub p_x: f64,
    pub p_x_signal: f64,
}

impl ParameterVector {
    pub fn from_config(config: &ProtocolConfig) -> Self {
        let i = &config.intensities;
        let s = &config.sampling;
        Self { mu_z: i.mu_z(), mu_x: i.mu_x(), nu_x: i.nu_x(), p_z: s.p_z, p_x: s.p_x, p_x_signal: s.p_x_signal }
    }

    /// `config` with its intensities and sampling replaced.
    pub fn apply(&self, config: &ProtocolConfig) -> ProtocolConfig {
        let intensities = match config.intensities {
            IntensitySettings::Symmetric { .. } => IntensitySettings::Symmetric { mu: self.mu_z, nu: self.nu_x },
            IntensitySettings::Biased { .. } => {
                IntensitySettings::Biased { mu_z: self.mu_z, mu_x: self.mu_x, nu_x: self.nu_x }
            }
        };
        ProtocolConfig {
            intensities,
            sampling: Sampling { p_z: self.p_z, p_x: self.p_x, p_x_signal: self.p_x_signal },
            ..*config
        }
    }

    fn to_array(self) -> [f64; DIM] {
        [self.mu_z, self.mu_x, self.nu_x, self.p_z, self.p_x, self.p_x_signal]
    }

    fn from_array(a: [f64; DIM]) -> Self {
        Self { mu_z: a[0], mu_x: a[1], nu_x: a[2], p_z: a[3], p_x: a[4], p_x_signal: a[5] }
    }
}

/// Box constraints. A coordinate with `lo == hi` is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterBounds {
    pub lo: ParameterVector,
    pub hi: ParameterVector,
}

impl Default for ParameterBounds {
    fn default() -> Self {
        Self {
            lo: ParameterVector { mu_z: 0.01, mu_x: 0.01, nu_x: 1e-3, p_z: 0.01, p_x: 0.005, p_x_signal: 0.01 },
            hi: ParameterVector { mu_z: 1.5, mu_x: 1.5, nu_x: 1.0, p_z: 0.98, p_x: 0.49, p_x_signal: 0.99 },
        }
    }
}

impl ParameterBounds {
    pub fn validate(&self) -> Result<()> {
        for ((lo, hi), name) in self.lo.to_array().into_iter().zip(self.hi.to_array()).zip(NAMES) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(name, format!("bounds [{lo}, {hi}] are not an interval")));
            }
        }
        Ok(())
    }

    /// Holds one coordinate fixed at `value`.
    pub fn fix(mut self, name: &str, value: f64) -> Result<Self> {
        let idx = NAMES.iter().position(|n| *n == name).ok_or_else(|| Error::invalid(name, "unknown parameter"))?;
        let (mut lo, mut hi) = (self.lo.to_array(), self.hi.to_array());
        lo[idx] = value;
        hi[idx] = value;
        self.lo = ParameterVector::from_array(lo);
        self.hi = ParameterVector::from_array(hi);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerSettings {
    /// Quasi-random starts in addition to the configured point.
    pub starts: usize,
    pub seed: u64,
    pub max_evaluations: usize,
    /// Initial step as a fraction of each coordinate range.
    pub initial_step: f64,
    /// Smallest step, as a fraction of each coordinate range.
    pub min_step: f64,
    /// Sweeps improving the rate by less than this fraction shrink the step.
    pub relative_tolerance: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 1,
            max_evaluations: 20_000,
            initial_step: 0.1,
            min_step: 1e-4,
            relative_tolerance: 1e-3,
        }
    }
}

/// What is being maximised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub protocol: ProtocolConfig,
    pub params: ChannelParams,
    pub mode: Mode,
}

impl Objective {
    pub fn evaluate(&self, x: &ParameterVector) -> Result<KeyRateReport> {
        model_key_rate(&x.apply(&self.protocol), &self.params, &self.mode)
    }

    /// Unclamped rate, or `−∞` where the point is infeasible.
    fn score(&self, x: &ParameterVector) -> f64 {
        self.evaluate(x).map_or(f64::NEG_INFINITY, |r| r.rate_unclamped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub start: usize,
    pub evaluations: usize,
    pub rate: f64,
    pub point: ParameterVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best: ParameterVector,
    /// Clamped rate at `best`.
    pub best_rate: f64,
    pub best_rate_unclamped: f64,
    pub evaluations: usize,
    /// Every start finished on the step-size criterion.
    pub converged: bool,
    /// No start found a positive rate.
    pub zero_rate: bool,
    /// Score of each start point before its local search.
    pub start_rates: Vec<f64>,
    pub trace: Vec<TraceEntry>,
}

fn free_coordinates(objective: &Objective, bounds: &ParameterBounds) -> Vec<usize> {
    let (lo, hi) = (bounds.lo.to_array(), bounds.hi.to_array());
    let symmetric = !objective.protocol.intensities.is_biased();
    let sampling_matters = matches!(objective.mode, Mode::Finite(_))
        || objective.protocol.prefactors == crate::protocol::Prefactors::Sampling;
    (0..DIM)
        .filter(|&i| lo[i] < hi[i])
        .filter(|&i| !(symmetric && i == 1))
        .filter(|&i| sampling_matters || i < 3)
        .collect()
}

/// Pulls a point into the box and restores `ν < μ_x` and a non-negative
/// vacuum probability.
fn repair(mut x: [f64; DIM], bounds: &ParameterBounds, objective: &Objective) -> [f64; DIM] {
    let (lo, hi) = (bounds.lo.to_array(), bounds.hi.to_array());
    let symmetric = !objective.protocol.intensities.is_biased();
    for i in 0..DIM {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
    if symmetric {
        x[1] = x[0];
    }
    if x[2] >= x[1] {
        x[2] = (0.5 * x[1]).clamp(lo[2], hi[2]);
    }
    let k = if objective.protocol.variant == crate::protocol::Variant::Rfi { 2.0 } else { 1.0 };
    let used = x[3] + k * x[4];
    if used >= 1.0 {
        let scale = 0.95 / used;
        x[3] = (x[3] * scale).clamp(lo[3], hi[3]);
        x[4] = (x[4] * scale).clamp(lo[4], hi[4]);
    }
    x
}

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = f64::from(base);
    let (mut inv, mut f) = (0.0, 1.0 / b);
    while i > 0 {
        inv += f * (i % u64::from(base)) as f64;
        i /= u64::from(base);
        f /= b;
    }
    inv
}

fn start_points(objective: &Objective, bounds: &ParameterBounds, settings: &OptimizerSettings) -> Vec<[f64; DIM]> {
    let (lo, hi) = (bounds.lo.to_array(), bounds.hi.to_array());
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let shift: [f64; DIM] = std::array::from_fn(|_| rng.random::<f64>());
    let mut points = vec![repair(ParameterVector::from_config(&objective.protocol).to_array(), bounds, objective)];
    for s in 1..=settings.starts as u64 {
        let x = std::array::from_fn(|d| {
            let u = (radical_inverse(s, HALTON_BASES[d]) + shift[d]).fract();
            lo[d] + u * (hi[d] - lo[d])
        });
        points.push(repair(x, bounds, objective));
    }
    points
}

struct LocalOutcome {
    point: [f64; DIM],
    score: f64,
    evaluations: usize,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn local_search(
    objective: &Objective,
    bounds: &ParameterBounds,
    settings: &OptimizerSettings,
    free: &[usize],
    start: ([f64; DIM], f64),
    start_index: usize,
    budget: usize,
    trace: &mut Vec<TraceEntry>,
) -> LocalOutcome {
    let (lo, hi) = (bounds.lo.to_array(), bounds.hi.to_array());
    let symmetric = !objective.protocol.intensities.is_biased();
    let (mut x, mut fx) = start;
    let mut step: [f64; DIM] = std::array::from_fn(|i| settings.initial_step * (hi[i] - lo[i]));
    let mut evaluations = 0;
    loop {
        if free.iter().all(|&i| step[i] < settings.min_step * (hi[i] - lo[i])) {
            return LocalOutcome { point: x, score: fx, evaluations, converged: true };
        }
        if evaluations + 2 * free.len() > budget {
            return LocalOutcome { point: x, score: fx, evaluations, converged: false };
        }
        let candidates: Vec<[f64; DIM]> = free
            .iter()
            .flat_map(|&i| [1.0, -1.0].map(|sign| (i, sign)))
            .map(|(i, sign)| {
                let mut c = x;
                c[i] = (x[i] + sign * step[i]).clamp(lo[i], hi[i]);
                if symmetric {
                    c[1] = c[0];
                }
                c
            })
            .collect();
        let scores: Vec<f64> =
            candidates.par_iter().map(|c| objective.score(&ParameterVector::from_array(*c))).collect();
        evaluations += candidates.len();
        let mut best = None;
        for (j, &s) in scores.iter().enumerate() {
            if s > fx && best.is_none_or(|(_, bs)| s > bs) {
                best = Some((j, s));
            }
        }
        match best {
            Some((j, s)) => {
                let gain = s - fx;
                let relative = if fx.is_finite() && fx != 0.0 { gain / fx.abs() } else { f64::INFINITY };
                x = candidates[j];
                fx = s;
                trace.push(TraceEntry {
                    start: start_index,
                    evaluations,
                    rate: s,
                    point: ParameterVector::from_array(x),
                });
                if relative < settings.relative_tolerance {
                    step.iter_mut().for_each(|s| *s *= 0.5);
                }
            }
            None => step.iter_mut().for_each(|s| *s *= 0.5),
        }
    }
}

/// Maximises the unclamped key rate over the free coordinates. The result
/// depends only on the inputs and `settings.seed`.
pub fn optimize_parameters(
    objective: &Objective,
    bounds: &ParameterBounds,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    bounds.validate()?;
    objective.params.validate()?;
    if settings.starts < 1 {
        return Err(Error::invalid("starts", "need at least one quasi-random start"));
    }
    let free = free_coordinates(objective, bounds);
    let points = start_points(objective, bounds, settings);
    let start_rates: Vec<f64> = points.par_iter().map(|p| objective.score(&ParameterVector::from_array(*p))).collect();
    let mut evaluations = points.len();

    let mut trace = Vec::new();
    let mut best: Option<([f64; DIM], f64)> = None;
    let mut converged = true;
    for (idx, (&p, &s)) in points.iter().zip(&start_rates).enumerate() {
        let budget = settings.max_evaluations.saturating_sub(evaluations);
        let out = local_search(objective, bounds, settings, &free, (p, s), idx, budget, &mut trace);
        evaluations += out.evaluations;
        converged &= out.converged;
        if best.is_none_or(|(_, b)| out.score > b) {
            best = Some((out.point, out.score));
        }
    }

    let (point, _) = best.expect("at least one start");
    let best = ParameterVector::from_array(point);
    let (best_rate, best_rate_unclamped) = match objective.evaluate(&best) {
        Ok(r) => (r.rate, r.rate_unclamped),
        Err(_) => (0.0, f64::NEG_INFINITY),
    };
    Ok(OptimizationResult {
        best,
        best_rate,
        best_rate_unclamped,
        evaluations,
        converged,
        zero_rate: best_rate_unclamped.is_nan() || best_rate_unclamped <= 0.0,
        start_rates,
        trace,
    })
}
