//! Two-decoy analytic bounds on single-photon yields and error gains.
//!
//! Every bound is a fixed linear combination of observed rates divided by a
//! positive constant. Representing it as a [`LinearForm`] lets the same
//! estimator run on exact tables and on confidence intervals: for a lower
//! bound each term takes the interval end that makes it smallest, for an
//! upper bound the end that makes it largest.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::BasisPair;
use crate::observables::{CellKey, Observable, ObservableSource};
use crate::protocol::{IntensityLabel, IntensitySettings, Variant};

/// Crossings of a lower over an upper bound up to this size are snapped.
const CROSSING_TOLERANCE: f64 = 1e-12;

/// Poisson weights `λ^k e^{−λ} / k!` for `k = 0, 1, 2`.
///
/// `a`, `b` belong to the decoy intensities of Alice and Bob, `a_s`, `b_s`
/// to their signal intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonCoefficients {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub a_s: [f64; 3],
    pub b_s: [f64; 3],
}

fn poisson_head(lambda: f64) -> [f64; 3] {
    let p0 = (-lambda).exp();
    [p0, lambda * p0, 0.5 * lambda * lambda * p0]
}

impl PoissonCoefficients {
    pub fn new(nu_a: f64, nu_b: f64, mu_a: f64, mu_b: f64) -> Self {
        Self { a: poisson_head(nu_a), b: poisson_head(nu_b), a_s: poisson_head(mu_a), b_s: poisson_head(mu_b) }
    }

    pub fn symmetric(nu: f64, mu: f64) -> Self {
        Self::new(nu, nu, mu, mu)
    }

    /// `b1·b′2 − b′1·b2`, positive exactly when the decoy is weaker than the signal.
    pub fn lower_denominator(&self) -> f64 {
        self.b[1] * self.b_s[2] - self.b_s[1] * self.b[2]
    }
}

/// Coefficient on `M^{μo}` in the `T1` term of the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum T1Convention {
    /// `a1·b2·b′0`, the A↔B mirror of the `M^{oμ}` term.
    Mirrored,
    /// `a1·b2·a′0`, kept for audit only. Identical when `a′0 = b′0`.
    Printed,
}

/// Which end of an interval a term used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Lower,
    Upper,
}

impl Direction {
    fn flip(self) -> Self {
        match self {
            Direction::Lower => Direction::Upper,
            Direction::Upper => Direction::Lower,
        }
    }
}

/// One term of an evaluated bound, for the audit trail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TermChoice {
    pub cell: CellKey,
    pub observable: Observable,
    pub coefficient: f64,
    pub end: Direction,
    pub value: f64,
}

/// `Σ cᵢ·M(cellᵢ) / denominator` with `denominator > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub terms: Vec<(CellKey, f64)>,
    pub denominator: f64,
}

impl LinearForm {
    /// Evaluates the form as a bound in `direction`, appending the interval
    /// end chosen for each term to `choices`.
    pub fn evaluate<S: ObservableSource + ?Sized>(
        &self,
        source: &S,
        observable: Observable,
        direction: Direction,
        choices: &mut Vec<TermChoice>,
    ) -> Result<f64> {
        let mut sum = 0.0;
        for &(cell, coefficient) in &self.terms {
            let interval = source.interval(&cell, observable)?;
            let end = if coefficient >= 0.0 { direction } else { direction.flip() };
            let value = match end {
                Direction::Lower => interval.lower,
                Direction::Upper => interval.upper,
            };
            sum += coefficient * value;
            choices.push(TermChoice { cell, observable, coefficient, end, value });
        }
        Ok(sum / self.denominator)
    }
}

/// Lower bound on the `(1,1)` yield or error gain from signal, decoy and
/// vacuum data.
pub fn two_decoy_lower_form(
    c: &PoissonCoefficients,
    basis: BasisPair,
    signal: IntensityLabel,
    decoy: IntensityLabel,
    convention: T1Convention,
) -> LinearForm {
    use IntensityLabel::Vacuum as O;
    let (a, b, a_s, b_s) = (c.a, c.b, c.a_s, c.b_s);
    let t3_weight = a_s[1] * b_s[2];
    let mu_o = match convention {
        T1Convention::Mirrored => b_s[0],
        T1Convention::Printed => a_s[0],
    };
    let cell = |x, y| CellKey::new(basis, x, y);
    LinearForm {
        terms: vec![
            (cell(decoy, decoy), a_s[1] * b_s[2]),
            (cell(O, signal), a[1] * b[2] * a_s[0]),
            (cell(signal, O), a[1] * b[2] * mu_o),
            (cell(signal, signal), -a[1] * b[2]),
            (cell(O, O), -a[1] * b[2] * a_s[0] * b_s[0] + t3_weight * a[0] * b[0]),
            (cell(O, decoy), -t3_weight * a[0]),
            (cell(decoy, O), -t3_weight * b[0]),
        ],
        denominator: a[1] * a_s[1] * c.lower_denominator(),
    }
}

/// Upper bound `(M^{νν} − T3) / (a1·b1)` from decoy and vacuum data.
pub fn two_decoy_upper_form(c: &PoissonCoefficients, basis: BasisPair, decoy: IntensityLabel) -> LinearForm {
    use IntensityLabel::Vacuum as O;
    let cell = |x, y| CellKey::new(basis, x, y);
    LinearForm {
        terms: vec![
            (cell(decoy, decoy), 1.0),
            (cell(O, decoy), -c.a[0]),
            (cell(decoy, O), -c.b[0]),
            (cell(O, O), c.a[0] * c.b[0]),
        ],
        denominator: c.a[1] * c.b[1],
    }
}

/// Upper bound from signal and vacuum data only, for a basis without decoys.
pub fn signal_only_upper_form(c: &PoissonCoefficients, basis: BasisPair, signal: IntensityLabel) -> LinearForm {
    use IntensityLabel::Vacuum as O;
    let cell = |x, y| CellKey::new(basis, x, y);
    LinearForm {
        terms: vec![
            (cell(signal, signal), 1.0),
            (cell(O, signal), -c.a_s[0]),
            (cell(signal, O), -c.b_s[0]),
            (cell(O, O), c.a_s[0] * c.b_s[0]),
        ],
        denominator: c.a_s[1] * c.b_s[1],
    }
}

/// Single-photon yield interval `[S^{11,L}, S^{11,U}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YieldBounds {
    pub lower: f64,
    pub upper: f64,
}

fn clamp_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn order_bounds(basis: BasisPair, what: &str, lower: f64, upper: f64) -> Result<(f64, f64)> {
    if lower <= upper {
        Ok((lower, upper))
    } else if lower - upper <= CROSSING_TOLERANCE {
        Ok((upper, upper))
    } else {
        Err(Error::EstimationFailed {
            basis,
            reason: format!("{what} lower bound {lower:e} exceeds upper bound {upper:e}"),
        })
    }
}

fn coefficients(settings: &IntensitySettings) -> Result<PoissonCoefficients> {
    settings.validate()?;
    let c = PoissonCoefficients::symmetric(settings.nu_x(), settings.mu_x());
    let d = c.lower_denominator();
    if d.is_nan() || d <= 0.0 {
        return Err(Error::InvalidSettings("decoy denominator b1·b′2 − b′1·b2 is not positive".into()));
    }
    Ok(c)
}

fn decoy_forms(
    settings: &IntensitySettings,
    basis: BasisPair,
) -> Result<(PoissonCoefficients, IntensityLabel, IntensityLabel)> {
    if basis == BasisPair::ZZ && settings.is_biased() {
        return Err(Error::InvalidSettings("the biased scheme sends no decoy states in Z".into()));
    }
    let (s, d) = settings.x_labels();
    Ok((coefficients(settings)?, s, d))
}

fn yield_bounds_with<S: ObservableSource + ?Sized>(
    source: &S,
    basis: BasisPair,
    settings: &IntensitySettings,
    choices: &mut Vec<TermChoice>,
) -> Result<(YieldBounds, f64)> {
    let (c, s, d) = decoy_forms(settings, basis)?;
    let lower = two_decoy_lower_form(&c, basis, s, d, T1Convention::Mirrored).evaluate(
        source,
        Observable::Gain,
        Direction::Lower,
        choices,
    )?;
    let upper = two_decoy_upper_form(&c, basis, d).evaluate(source, Observable::Gain, Direction::Upper, choices)?;
    let printed = two_decoy_lower_form(&c, basis, s, d, T1Convention::Printed).evaluate(
        source,
        Observable::Gain,
        Direction::Lower,
        &mut Vec::new(),
    )?;
    let (lower, upper) = order_bounds(basis, "yield", clamp_unit(lower), clamp_unit(upper))?;
    Ok((YieldBounds { lower, upper }, clamp_unit(printed)))
}

/// `[S^{11,L}, S^{11,U}]` for one basis pair from its decoy data.
pub fn single_photon_yield_bounds<S: ObservableSource + ?Sized>(
    source: &S,
    basis: BasisPair,
    settings: &IntensitySettings,
) -> Result<YieldBounds> {
    Ok(yield_bounds_with(source, basis, settings, &mut Vec::new())?.0)
}

fn error_gain_upper_with<S: ObservableSource + ?Sized>(
    source: &S,
    basis: BasisPair,
    settings: &IntensitySettings,
    use_signal_only: bool,
    observable: Observable,
    choices: &mut Vec<TermChoice>,
) -> Result<f64> {
    let value = if use_signal_only {
        settings.validate()?;
        let signal = if basis == BasisPair::ZZ { settings.z_label() } else { settings.x_labels().0 };
        let mu = settings.intensity(signal)?;
        let c = PoissonCoefficients::new(settings.nu_x(), settings.nu_x(), mu, mu);
        signal_only_upper_form(&c, basis, signal).evaluate(source, observable, Direction::Upper, choices)?
    } else {
        let (c, _, d) = decoy_forms(settings, basis)?;
        two_decoy_upper_form(&c, basis, d).evaluate(source, observable, Direction::Upper, choices)?
    };
    Ok(clamp_unit(value))
}

/// Upper bound on the single-photon error gain `e^{11}·S^{11}`.
///
/// With `use_signal_only` the bound uses the signal, single-vacuum and
/// double-vacuum cells, as needed for a basis without decoy states.
pub fn single_photon_error_gain_upper<S: ObservableSource + ?Sized>(
    source: &S,
    basis: BasisPair,
    settings: &IntensitySettings,
    use_signal_only: bool,
) -> Result<f64> {
    error_gain_upper_with(source, basis, settings, use_signal_only, Observable::ErrorGain, &mut Vec::new())
}

/// Bounds for one basis pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisEstimate {
    pub basis: BasisPair,
    /// Error and correct outcomes were exchanged because the signal error
    /// rate exceeded one half.
    pub flipped: bool,
    pub s11_lower: f64,
    pub s11_upper: f64,
    /// Lower bound with the printed `T1` coefficient, for audit.
    pub s11_lower_printed_t1: f64,
    pub es11_lower: f64,
    pub es11_upper: f64,
    /// `None` when the yield bound in the denominator vanishes.
    pub e11_lower: Option<f64>,
    pub e11_upper: Option<f64>,
}

/// Everything the security analysis needs from the decoy estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinglePhotonEstimates {
    pub variant: Variant,
    pub s_zz_11_lower: f64,
    pub s_zz_11_upper: f64,
    pub es_zz_11_upper: f64,
    /// `None` when `s_zz_11_lower` is zero.
    pub e_zz_11_upper: Option<f64>,
    /// X/Y basis pairs used by the variant.
    pub bases: BTreeMap<BasisPair, BasisEstimate>,
    /// Interval end taken by every term of every bound.
    pub choices: Vec<TermChoice>,
}

impl SinglePhotonEstimates {
    pub fn e_upper(&self, basis: BasisPair) -> Option<f64> {
        match basis {
            BasisPair::ZZ => self.e_zz_11_upper,
            _ => self.bases.get(&basis).and_then(|b| b.e11_upper),
        }
    }

    /// Number of distinct `(cell, observable)` intervals the bounds read.
    pub fn distinct_bounds(&self) -> usize {
        let mut seen: Vec<_> = self.choices.iter().map(|c| (c.cell, c.observable)).collect();
        seen.sort();
        seen.dedup();
        seen.len()
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| clamp_unit(num / den))
}

fn estimate_basis<S: ObservableSource + ?Sized>(
    source: &S,
    basis: BasisPair,
    settings: &IntensitySettings,
    choices: &mut Vec<TermChoice>,
) -> Result<BasisEstimate> {
    let (s, d) = settings.x_labels();
    let flipped = source.point(&CellKey::new(basis, s, s))?.error_rate().is_some_and(|e| e > 0.5);
    let observable = if flipped { Observable::CorrectGain } else { Observable::ErrorGain };

    let (yields, printed) = yield_bounds_with(source, basis, settings, choices)?;
    let c = coefficients(settings)?;
    let es_lower = clamp_unit(two_decoy_lower_form(&c, basis, s, d, T1Convention::Mirrored).evaluate(
        source,
        observable,
        Direction::Lower,
        choices,
    )?);
    let es_upper = error_gain_upper_with(source, basis, settings, false, observable, choices)?;
    let (es_lower, es_upper) = order_bounds(basis, "error gain", es_lower, es_upper)?;

    let e11_upper = ratio(es_upper, yields.lower);
    let e11_lower = ratio(es_lower, yields.upper).map(|l| e11_upper.map_or(l, |u| l.min(u)));
    Ok(BasisEstimate {
        basis,
        flipped,
        s11_lower: yields.lower,
        s11_upper: yields.upper,
        s11_lower_printed_t1: printed,
        es11_lower: es_lower,
        es11_upper: es_upper,
        e11_lower,
        e11_upper,
    })
}

/// Like [`estimate_all_bases`], but leaves error rates undefined instead of
/// failing when a yield lower bound is zero.
pub(crate) fn estimate_bases_partial<S: ObservableSource + ?Sized>(
    source: &S,
    settings: &IntensitySettings,
    variant: Variant,
) -> Result<SinglePhotonEstimates> {
    let mut choices = Vec::new();
    let mut bases = BTreeMap::new();
    for &pair in variant.test_pairs() {
        bases.insert(pair, estimate_basis(source, pair, settings, &mut choices)?);
    }

    let (s_zz, es_zz_upper) = match settings {
        IntensitySettings::Symmetric { .. } => {
            let (y, _) = yield_bounds_with(source, BasisPair::ZZ, settings, &mut choices)?;
            let es =
                error_gain_upper_with(source, BasisPair::ZZ, settings, false, Observable::ErrorGain, &mut choices)?;
            (y, es)
        }
        // Z carries no decoys; the single-photon yield is basis independent
        // and is taken from XX.
        IntensitySettings::Biased { .. } => {
            let xx = bases
                .get(&BasisPair::XX)
                .copied()
                .map(Ok)
                .unwrap_or_else(|| estimate_basis(source, BasisPair::XX, settings, &mut choices))?;
            let es = error_gain_upper_with(source, BasisPair::ZZ, settings, true, Observable::ErrorGain, &mut choices)?;
            (YieldBounds { lower: xx.s11_lower, upper: xx.s11_upper }, es)
        }
    };

    Ok(SinglePhotonEstimates {
        variant,
        s_zz_11_lower: s_zz.lower,
        s_zz_11_upper: s_zz.upper,
        es_zz_11_upper: es_zz_upper,
        e_zz_11_upper: ratio(es_zz_upper, s_zz.lower),
        bases,
        choices,
    })
}

/// Yield and error-rate bounds for Z and every X/Y basis pair the variant
/// uses. Error-rate bounds divide error-gain bounds by the opposite yield
/// bound; a basis pair whose signal error rate exceeds one half is estimated
/// from its correct outcomes instead.
pub fn estimate_all_bases<S: ObservableSource + ?Sized>(
    source: &S,
    settings: &IntensitySettings,
    variant: Variant,
) -> Result<SinglePhotonEstimates> {
    let est = estimate_bases_partial(source, settings, variant)?;
    if est.e_zz_11_upper.is_none() {
        return Err(Error::EstimationFailed {
            basis: BasisPair::ZZ,
            reason: "single-photon yield lower bound is zero".into(),
        });
    }
    for b in est.bases.values() {
        if b.e11_upper.is_none() || b.e11_lower.is_none() {
            return Err(Error::EstimationFailed { basis: b.basis, reason: "single-photon yield bound is zero".into() });
        }
    }
    Ok(est)
}
