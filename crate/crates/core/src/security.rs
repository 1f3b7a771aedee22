//! Entropy, the correlation quantity `C`, Eve's information and the secret
//! key rate.

use serde::Serialize;

use crate::decoy::SinglePhotonEstimates;
use crate::error::{check_probability, Error, Result};
use crate::model::BasisPair;
use crate::protocol::Variant;

/// `H(x) = −x·log2 x − (1−x)·log2(1−x)`, with `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_probability("x", x)?;
    Ok(entropy(x))
}

pub(crate) fn entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -(x * x.log2() + (1.0 - x) * (-x).ln_1p() / std::f64::consts::LN_2)
}

/// `Σ (1 − 2·min(0.5, e))²` over the upper bounds for `XX, YY, XY, YX`.
pub fn c_from_upper_bounds(e_upper: [f64; 4]) -> Result<f64> {
    let mut c = 0.0;
    for e in e_upper {
        check_probability("e11 upper bound", e)?;
        let corr = 1.0 - 2.0 * e.min(0.5);
        c += corr * corr;
    }
    Ok(c)
}

/// `C` from the single-photon error-rate upper bounds of the four X/Y pairs.
pub fn c_quantity(estimates: &SinglePhotonEstimates) -> Result<f64> {
    let mut uppers = [0.0; 4];
    for (slot, &basis) in uppers.iter_mut().zip(BasisPair::CORRELATION_SET.iter()) {
        *slot = estimates.e_upper(basis).ok_or_else(|| Error::EstimationFailed {
            basis,
            reason: "no single-photon error-rate upper bound".into(),
        })?;
    }
    c_from_upper_bounds(uppers)
}

/// Form of the `u` term in the reference-frame-independent bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RfiBound {
    /// `u = min(C/2 / (1−e), 1)`.
    Printed,
    /// `u = min(sqrt(C/2) / (1−e), 1)`, the standard RFI bound. This is the
    /// form that reproduces published `I_E` values from their `C` and `e`.
    SquareRoot,
}

impl RfiBound {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "printed" => Some(RfiBound::Printed),
            "sqrt" | "square_root" => Some(RfiBound::SquareRoot),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RfiBound::Printed => "printed",
            RfiBound::SquareRoot => "sqrt",
        }
    }
}

/// Intermediate values of the RFI bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecurityQuantities {
    pub c_value: f64,
    pub u: f64,
    pub v: f64,
    pub i_e: f64,
}

/// `I_E = (1−e)·H((1+u)/2) + e·H((1+v)/2)` with `u` per `bound` and
/// `v = sqrt(max(0, C/2 − (1−e)²u²)) / e`, both clamped to `[0, 1]`.
pub fn rfi_quantities(bound: RfiBound, e_zz_11_upper: f64, c_value: f64) -> Result<SecurityQuantities> {
    if !(0.0..=0.5).contains(&e_zz_11_upper) {
        return Err(Error::invalid("e_zz_11_upper", format!("{e_zz_11_upper} is outside [0, 0.5]")));
    }
    if !(c_value >= 0.0 && c_value.is_finite()) {
        return Err(Error::invalid("c_value", format!("{c_value} must be finite and non-negative")));
    }
    let e = e_zz_11_upper;
    let half_c = c_value / 2.0;
    let numerator = match bound {
        RfiBound::Printed => half_c,
        RfiBound::SquareRoot => half_c.sqrt(),
    };
    let u = (numerator / (1.0 - e)).min(1.0);
    let (v, i_e) = if e == 0.0 {
        (0.0, entropy((1.0 + u) / 2.0))
    } else {
        let radicand = (half_c - (1.0 - e) * (1.0 - e) * u * u).max(0.0);
        let v = (radicand.sqrt() / e).min(1.0);
        (v, (1.0 - e) * entropy((1.0 + u) / 2.0) + e * entropy((1.0 + v) / 2.0))
    };
    Ok(SecurityQuantities { c_value, u, v, i_e: i_e.clamp(0.0, 1.0) })
}

/// Eve's information for the RFI protocol with `u = min(C/2 / (1−e), 1)`.
pub fn eve_information_rfi(e_zz_11_upper: f64, c_value: f64) -> Result<f64> {
    Ok(rfi_quantities(RfiBound::Printed, e_zz_11_upper, c_value)?.i_e)
}

/// Eve's information for the original protocol, `H(e_XX^{11,U})`.
pub fn eve_information_mdi(e_xx_11_upper: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&e_xx_11_upper) {
        return Err(Error::invalid("e_xx_11_upper", format!("{e_xx_11_upper} is outside [0, 0.5]")));
    }
    Ok(entropy(e_xx_11_upper))
}

/// Inputs of the key-rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateInputs {
    pub variant: Variant,
    /// Signal-signal Z gain.
    pub q_zz: f64,
    /// Signal-signal Z error rate.
    pub e_zz: f64,
    pub s_zz_11_lower: f64,
    pub i_e: f64,
    pub mu_z: f64,
    pub p_zz: f64,
    pub p_zz_mumu: f64,
    pub f_ec: f64,
}

/// Finite-size bookkeeping attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteAudit {
    pub n_pairs: u64,
    pub epsilon: f64,
    /// Distinct confidence intervals used.
    pub bounds_used: usize,
    /// `bounds_used · ε`.
    pub total_failure_probability: f64,
    pub q_zz_interval: (f64, f64),
    pub eq_zz_interval: (f64, f64),
}

/// Key rate with every intermediate quantity that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateReport {
    pub variant: Variant,
    /// Secret bits per pulse pair, clamped at zero.
    pub rate: f64,
    pub rate_unclamped: f64,
    pub q_zz: f64,
    pub e_zz: f64,
    pub s_zz_11_lower: f64,
    pub e_zz_11_upper: Option<f64>,
    pub i_e: f64,
    pub c_value: Option<f64>,
    pub rfi_bound: Option<RfiBound>,
    /// `I_E` under both forms of the RFI bound, for comparison.
    pub i_e_printed: Option<f64>,
    pub i_e_square_root: Option<f64>,
    pub mu_z: f64,
    pub p_zz: f64,
    pub p_zz_mumu: f64,
    pub f_ec: f64,
    pub estimates: Option<SinglePhotonEstimates>,
    pub finite: Option<FiniteAudit>,
    pub diagnostics: Vec<String>,
}

impl KeyRateReport {
    pub fn inputs(&self) -> KeyRateInputs {
        KeyRateInputs {
            variant: self.variant,
            q_zz: self.q_zz,
            e_zz: self.e_zz,
            s_zz_11_lower: self.s_zz_11_lower,
            i_e: self.i_e,
            mu_z: self.mu_z,
            p_zz: self.p_zz,
            p_zz_mumu: self.p_zz_mumu,
            f_ec: self.f_ec,
        }
    }
}

/// `R = P_zz·P_zz^{μμ}·[μ²e^{−2μ}·S^{11,L}·(1 − I_E) − Q·f·H(E)]`, clamped
/// at zero.
pub fn secret_key_rate(inputs: &KeyRateInputs) -> Result<KeyRateReport> {
    let i = inputs;
    check_probability("q_zz", i.q_zz)?;
    check_probability("e_zz", i.e_zz)?;
    check_probability("s_zz_11_lower", i.s_zz_11_lower)?;
    check_probability("i_e", i.i_e)?;
    check_probability("p_zz", i.p_zz)?;
    check_probability("p_zz_mumu", i.p_zz_mumu)?;
    if !(i.mu_z > 0.0 && i.mu_z.is_finite()) {
        return Err(Error::invalid("mu_z", "must be positive and finite"));
    }
    if !(i.f_ec >= 1.0 && i.f_ec.is_finite()) {
        return Err(Error::invalid("f_ec", "must be at least 1"));
    }
    let single = i.mu_z * i.mu_z * (-2.0 * i.mu_z).exp() * i.s_zz_11_lower * (1.0 - i.i_e);
    let leak = i.q_zz * i.f_ec * entropy(i.e_zz);
    let rate_unclamped = i.p_zz * i.p_zz_mumu * (single - leak);
    Ok(KeyRateReport {
        variant: i.variant,
        rate: rate_unclamped.max(0.0),
        rate_unclamped,
        q_zz: i.q_zz,
        e_zz: i.e_zz,
        s_zz_11_lower: i.s_zz_11_lower,
        e_zz_11_upper: None,
        i_e: i.i_e,
        c_value: None,
        rfi_bound: None,
        i_e_printed: None,
        i_e_square_root: None,
        mu_z: i.mu_z,
        p_zz: i.p_zz,
        p_zz_mumu: i.p_zz_mumu,
        f_ec: i.f_ec,
        estimates: None,
        finite: None,
        diagnostics: Vec::new(),
    })
}
