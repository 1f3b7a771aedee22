//! Observables → single-photon bounds → Eve's information → key rate.

use serde::Serialize;

use crate::decoy::estimate_bases_partial;
use crate::error::Result;
use crate::finitekey::{finite_key_rate, synthesize_counts, FiniteKeyConfig};
use crate::model::{observable_table, BasisPair, ChannelParams};
use crate::observables::{CellKey, Observable, ObservableSource, ObservableTable};
use crate::protocol::{ProtocolConfig, Variant};
use crate::security::{
    c_from_upper_bounds, entropy, rfi_quantities, secret_key_rate, FiniteAudit, KeyRateInputs, KeyRateReport, RfiBound,
};

/// Asymptotic (exact expectations) or finite-size evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Asymptotic,
    Finite(FiniteKeyConfig),
}

/// Key rate from any observable source.
///
/// The signal Z gain enters through its upper end and the Z error rate as
/// `EQ^U / Q^L`, capped at one half. Error rates whose yield bound vanishes
/// are replaced by one half, which makes their contribution to Eve's
/// information maximal, and are listed in the diagnostics.
pub fn evaluate_key_rate<S: ObservableSource + ?Sized>(
    source: &S,
    protocol: &ProtocolConfig,
    f_ec: f64,
    finite: Option<&FiniteKeyConfig>,
) -> Result<KeyRateReport> {
    protocol.validate()?;
    let est = estimate_bases_partial(source, &protocol.intensities, protocol.variant)?;
    let mut diagnostics = Vec::new();
    if est.s_zz_11_lower == 0.0 {
        diagnostics.push("single-photon yield lower bound is zero".to_string());
    }
    let mut capped = |basis: BasisPair| match est.e_upper(basis) {
        Some(e) => e.min(0.5),
        None => {
            diagnostics.push(format!("{basis}: single-photon error rate undefined, taken as 0.5"));
            0.5
        }
    };

    let e_zz_upper = capped(BasisPair::ZZ);
    let (i_e, c_value, printed, square_root) = match protocol.variant {
        Variant::Rfi => {
            let uppers = BasisPair::CORRELATION_SET.map(&mut capped);
            let c = c_from_upper_bounds(uppers)?;
            let printed = rfi_quantities(RfiBound::Printed, e_zz_upper, c)?.i_e;
            let square_root = rfi_quantities(RfiBound::SquareRoot, e_zz_upper, c)?.i_e;
            let i_e = match protocol.rfi_bound {
                RfiBound::Printed => printed,
                RfiBound::SquareRoot => square_root,
            };
            (i_e, Some(c), Some(printed), Some(square_root))
        }
        Variant::Original => (entropy(capped(BasisPair::XX)), None, None, None),
    };

    let z = protocol.intensities.z_label();
    let signal = CellKey::new(BasisPair::ZZ, z, z);
    let gain = source.interval(&signal, Observable::Gain)?;
    let error_gain = source.interval(&signal, Observable::ErrorGain)?;
    let e_zz = if gain.lower > 0.0 { (error_gain.upper / gain.lower).min(0.5) } else { 0.5 };

    let (p_zz, p_zz_mumu) = protocol.prefactor_values();
    let mut report = secret_key_rate(&KeyRateInputs {
        variant: protocol.variant,
        q_zz: gain.upper,
        e_zz,
        s_zz_11_lower: est.s_zz_11_lower,
        i_e,
        mu_z: protocol.intensities.mu_z(),
        p_zz,
        p_zz_mumu,
        f_ec,
    })?;

    if let Some(cfg) = finite {
        let mut used: Vec<_> = est.choices.iter().map(|c| (c.cell, c.observable)).collect();
        used.extend([(signal, Observable::Gain), (signal, Observable::ErrorGain)]);
        used.sort();
        used.dedup();
        report.finite = Some(FiniteAudit {
            n_pairs: cfg.n_pairs,
            epsilon: cfg.epsilon,
            bounds_used: used.len(),
            total_failure_probability: used.len() as f64 * cfg.epsilon,
            q_zz_interval: (gain.lower, gain.upper),
            eq_zz_interval: (error_gain.lower, error_gain.upper),
        });
    }
    report.e_zz_11_upper = est.e_zz_11_upper;
    report.c_value = c_value;
    report.rfi_bound = (protocol.variant == Variant::Rfi).then_some(protocol.rfi_bound);
    report.i_e_printed = printed;
    report.i_e_square_root = square_root;
    report.estimates = Some(est);
    report.diagnostics = diagnostics;
    Ok(report)
}

/// Key rate on exact observables.
pub fn asymptotic_key_rate(
    table: &ObservableTable,
    protocol: &ProtocolConfig,
    params: &ChannelParams,
) -> Result<KeyRateReport> {
    params.validate()?;
    evaluate_key_rate(table, protocol, params.f_ec, None)
}

/// Key rate of the channel model: exact expectations in asymptotic mode,
/// expectation-valued counts with Chernoff intervals in finite mode.
pub fn model_key_rate(protocol: &ProtocolConfig, params: &ChannelParams, mode: &Mode) -> Result<KeyRateReport> {
    match mode {
        Mode::Asymptotic => asymptotic_key_rate(&observable_table(protocol, params)?, protocol, params),
        Mode::Finite(cfg) => {
            cfg.validate()?;
            let counts = synthesize_counts(protocol, params, cfg.n_pairs)?;
            finite_key_rate(&counts, cfg, protocol, params)
        }
    }
}
