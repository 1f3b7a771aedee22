//! Closed-form gains and error gains for phase-randomised weak coherent
//! pulses sent by Alice and Bob through lossy fibres to a Bell-state
//! measurement with threshold detectors.
//!
//! The X/Y-basis expressions are sums of modified Bessel functions whose
//! leading terms cancel to many digits at long distances. Each bracket is
//! therefore rewritten with `d = 1 − y` and `I0 − 1` series, which keeps all
//! the listed symmetries exact to rounding for every loss level.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::Serialize;

use crate::bessel::{i0_minus_one, weighted_excess};
use crate::error::{check_probability, Error, Result};
use crate::observables::{CellKey, ObservableTable};
use crate::protocol::ProtocolConfig;

/// Detector and fibre parameters, plus the two arm lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelParams {
    /// Detector efficiency.
    pub eta_d: f64,
    /// Dark-count probability per gate.
    pub p_d: f64,
    /// Misalignment-error probability.
    pub e_d: f64,
    /// Fibre attenuation in dB/km.
    pub alpha: f64,
    /// Error-correction inefficiency, `f ≥ 1`.
    pub f_ec: f64,
    /// Alice → Charlie fibre length in km.
    pub dist_a: f64,
    /// Bob → Charlie fibre length in km.
    pub dist_b: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::reference(0.0)
    }
}

impl ChannelParams {
    /// Reference device parameters (12.5 % InGaAs detectors, 0.195 dB/km
    /// fibre) with `dist_per_arm` km on each side.
    pub fn reference(dist_per_arm: f64) -> Self {
        Self {
            eta_d: 0.125,
            p_d: 1.2e-6,
            e_d: 0.005,
            alpha: 0.195,
            f_ec: 1.16,
            dist_a: dist_per_arm,
            dist_b: dist_per_arm,
        }
    }

    pub fn with_arms(mut self, dist_a: f64, dist_b: f64) -> Self {
        self.dist_a = dist_a;
        self.dist_b = dist_b;
        self
    }

    /// Both arms set to half of the Alice–Bob distance.
    pub fn with_total_distance(self, total: f64) -> Self {
        self.with_arms(total / 2.0, total / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("eta_d", self.eta_d)?;
        check_probability("p_d", self.p_d)?;
        check_probability("e_d", self.e_d)?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", "attenuation must be finite and non-negative"));
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(Error::invalid("f_ec", "error-correction efficiency must be at least 1"));
        }
        for (name, d) in [("dist_a", self.dist_a), ("dist_b", self.dist_b)] {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::invalid(name, "distance must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Overall transmittance of one arm including detector efficiency,
    /// `η_d · 10^(−α·L/10)`.
    pub fn link_efficiency(&self, arm: Arm) -> f64 {
        let dist = match arm {
            Arm::Alice => self.dist_a,
            Arm::Bob => self.dist_b,
        };
        self.eta_d * 10f64.powf(-self.alpha * dist / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Alice,
    Bob,
}

/// Relative rotation of the X/Y reference frames, stored in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize)]
pub struct MisalignmentAngle(f64);

impl MisalignmentAngle {
    pub fn from_degrees(deg: f64) -> Self {
        Self(deg.to_radians())
    }

    pub fn from_radians(rad: f64) -> Self {
        Self(rad)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

/// Mean photon numbers of Alice's and Bob's pulses; `0` is the vacuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityPair {
    pub lambda_a: f64,
    pub lambda_b: f64,
}

impl IntensityPair {
    pub fn new(lambda_a: f64, lambda_b: f64) -> Self {
        Self { lambda_a, lambda_b }
    }

    pub fn symmetric(lambda: f64) -> Self {
        Self::new(lambda, lambda)
    }

    fn validate(&self) -> Result<()> {
        for (name, l) in [("lambda_a", self.lambda_a), ("lambda_b", self.lambda_b)] {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::invalid(name, "intensity must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Single-party preparation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Z" | "z" => Some(Basis::Z),
            "X" | "x" => Some(Basis::X),
            "Y" | "y" => Some(Basis::Y),
            _ => None,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
            Basis::Y => "Y",
        })
    }
}

/// Basis choices of Alice and Bob. Z is shared; X/Y pairs are rotated by β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BasisPair {
    ZZ,
    XX,
    YY,
    XY,
    YX,
}

impl BasisPair {
    pub const ALL: [BasisPair; 5] = [BasisPair::ZZ, BasisPair::XX, BasisPair::YY, BasisPair::XY, BasisPair::YX];

    /// The pairs whose correlations enter `C`, in `XX, YY, XY, YX` order.
    pub const CORRELATION_SET: [BasisPair; 4] = [BasisPair::XX, BasisPair::YY, BasisPair::XY, BasisPair::YX];

    pub fn from_parts(a: Basis, b: Basis) -> Option<Self> {
        match (a, b) {
            (Basis::Z, Basis::Z) => Some(BasisPair::ZZ),
            (Basis::X, Basis::X) => Some(BasisPair::XX),
            (Basis::Y, Basis::Y) => Some(BasisPair::YY),
            (Basis::X, Basis::Y) => Some(BasisPair::XY),
            (Basis::Y, Basis::X) => Some(BasisPair::YX),
            _ => None,
        }
    }

    pub fn parts(self) -> (Basis, Basis) {
        match self {
            BasisPair::ZZ => (Basis::Z, Basis::Z),
            BasisPair::XX => (Basis::X, Basis::X),
            BasisPair::YY => (Basis::Y, Basis::Y),
            BasisPair::XY => (Basis::X, Basis::Y),
            BasisPair::YX => (Basis::Y, Basis::X),
        }
    }
}

impl fmt::Display for BasisPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.parts();
        write!(f, "{a}{b}")
    }
}

/// Shared quantities of the gain expressions for one intensity pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelIntermediates {
    /// `η_A·λ_A + η_B·λ_B`
    pub mu_prime: f64,
    /// `sqrt(η_A·λ_A·η_B·λ_B) / 2`
    pub x: f64,
    /// `(1 − P_d)·exp(−μ′/4)`
    pub y: f64,
    /// Correct Z coincidences.
    pub q_c: f64,
    /// Erroneous Z coincidences.
    pub q_e: f64,
    pub b_arg: f64,
    pub e_arg: f64,
    pub theta: f64,
    pub xi: f64,
}

/// Gain `q` and error gain `eq` for one basis pair and intensity pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainErrorRecord {
    pub q: f64,
    pub eq: f64,
}

impl GainErrorRecord {
    pub fn new(q: f64, eq: f64) -> Self {
        Self { q, eq }
    }

    /// `eq / q`, or `None` when there were no coincidences at all.
    pub fn error_rate(&self) -> Option<f64> {
        (self.q > 0.0).then(|| self.eq / self.q)
    }
}

/// Per-pulse quantities after loss, in a form that keeps `1 − y` accurate.
struct Attenuated {
    ea: f64,
    eb: f64,
    mu_prime: f64,
    x: f64,
    ln_no_dark: f64,
}

impl Attenuated {
    fn new(params: &ChannelParams, intensities: &IntensityPair) -> Self {
        let ea = params.link_efficiency(Arm::Alice) * intensities.lambda_a;
        let eb = params.link_efficiency(Arm::Bob) * intensities.lambda_b;
        Self { ea, eb, mu_prime: ea + eb, x: (ea * eb).sqrt() / 2.0, ln_no_dark: (-params.p_d).ln_1p() }
    }

    /// `1 − (1 − P_d)·exp(−t)`
    fn no_click_complement(&self, t: f64) -> f64 {
        -(self.ln_no_dark - t).exp_m1()
    }

    fn y(&self) -> f64 {
        (self.ln_no_dark - self.mu_prime / 4.0).exp()
    }

    fn z_terms(&self, p_d: f64) -> (f64, f64) {
        let pre = 2.0 * (2.0 * self.ln_no_dark - self.mu_prime / 2.0).exp();
        let q_c = pre * self.no_click_complement(self.ea / 2.0) * self.no_click_complement(self.eb / 2.0);
        // I0(2x) − (1 − P_d)·e^{−μ′/2}
        let q_e = pre * p_d * (i0_minus_one(2.0 * self.x) + self.no_click_complement(self.mu_prime / 2.0));
        (q_c, q_e)
    }
}

/// Intermediate quantities for audit and testing.
pub fn model_intermediates(
    params: &ChannelParams,
    beta: MisalignmentAngle,
    intensities: &IntensityPair,
) -> Result<ModelIntermediates> {
    params.validate()?;
    intensities.validate()?;
    let att = Attenuated::new(params, intensities);
    let (q_c, q_e) = att.z_terms(params.p_d);
    let (s, c) = beta.radians().sin_cos();
    let x = att.x;
    Ok(ModelIntermediates {
        mu_prime: att.mu_prime,
        x,
        y: att.y(),
        q_c,
        q_e,
        b_arg: 2.0 * x * c,
        e_arg: 2.0 * x * s,
        theta: std::f64::consts::SQRT_2 * x * (c + s),
        xi: std::f64::consts::SQRT_2 * x * (c - s),
    })
}

/// Gain and error gain for one basis pair.
///
/// `ZZ` ignores β. `YY` equals `XX`, and the `YX` gain equals the `XY` gain;
/// the `YX` error gain swaps the roles of Θ and Ξ.
pub fn pair_observables(
    params: &ChannelParams,
    beta: MisalignmentAngle,
    intensities: &IntensityPair,
    basis: BasisPair,
) -> Result<GainErrorRecord> {
    params.validate()?;
    intensities.validate()?;
    if !beta.radians().is_finite() {
        return Err(Error::NonFinite("pair_observables"));
    }
    let att = Attenuated::new(params, intensities);
    let e_d = params.e_d;

    let (q, eq) = match basis {
        BasisPair::ZZ => {
            let (q_c, q_e) = att.z_terms(params.p_d);
            (q_c + q_e, e_d * q_c + (1.0 - e_d) * q_e)
        }
        _ => {
            let (s, c) = beta.radians().sin_cos();
            // Bessel arguments are 2x·p and 2x·q with p² + q² = 1.
            let (p, q, wp, wq) = match basis {
                BasisPair::XX | BasisPair::YY => (c, s, e_d, 1.0 - e_d),
                // p ↔ Θ, q ↔ Ξ
                BasisPair::XY => ((c + s) * FRAC_1_SQRT_2, (c - s) * FRAC_1_SQRT_2, 1.0 - e_d, e_d),
                BasisPair::YX => ((c + s) * FRAC_1_SQRT_2, (c - s) * FRAC_1_SQRT_2, e_d, 1.0 - e_d),
                BasisPair::ZZ => unreachable!(),
            };
            let y = att.y();
            let d = att.no_click_complement(att.mu_prime / 4.0);
            let j = i0_minus_one(att.x);
            let gain_bracket = 2.0 * d * d + 4.0 * d * j + weighted_excess(att.x, p, 1.0, q, 1.0, 4.0);
            let error_bracket = d * d + 2.0 * d * j + weighted_excess(att.x, p, wp, q, wq, 2.0);
            (2.0 * y * y * gain_bracket, 2.0 * y * y * error_bracket)
        }
    };

    let q = q.clamp(0.0, 1.0);
    Ok(GainErrorRecord::new(q, eq.clamp(0.0, q)))
}

/// Every cell the active protocol's estimators reference, vacuum entries
/// included.
pub fn observable_table(config: &ProtocolConfig, params: &ChannelParams) -> Result<ObservableTable> {
    config.validate()?;
    params.validate()?;
    let mut table = ObservableTable::default();
    for cell in config.required_cells() {
        table.insert(cell, cell_observables(config, params, &cell)?);
    }
    Ok(table)
}

pub(crate) fn cell_observables(
    config: &ProtocolConfig,
    params: &ChannelParams,
    cell: &CellKey,
) -> Result<GainErrorRecord> {
    let pair = IntensityPair::new(config.intensity(cell.a)?, config.intensity(cell.b)?);
    pair_observables(params, config.beta, &pair, cell.basis)
}
