//! Quantities measured on the experimental system. The closed-form channel
//! model does not reproduce them, so the comparisons are kept but ignored;
//! run with `--ignored` to see how far the model sits from the measurement.

use mdiqkd::model::{pair_observables, BasisPair, ChannelParams, IntensityPair, MisalignmentAngle};
use mdiqkd::pipeline::{model_key_rate, Mode};
use mdiqkd::protocol::{IntensitySettings, ProtocolConfig};
use mdiqkd::security::{secret_key_rate, KeyRateInputs};

const MODEL_GAP: &str = "laboratory-measured fixture; closed-form channel model does not reproduce it";

fn asymptotic(beta: f64) -> mdiqkd::security::KeyRateReport {
    let protocol = ProtocolConfig {
        intensities: IntensitySettings::Symmetric { mu: 0.67, nu: 0.01 },
        beta: MisalignmentAngle::from_degrees(beta),
        ..ProtocolConfig::default()
    };
    model_key_rate(&protocol, &ChannelParams::reference(80.0), &Mode::Asymptotic).unwrap()
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

#[test]
#[ignore = "laboratory-measured fixture; closed-form channel model does not reproduce it"]
fn measured_single_photon_yield_at_80_km() {
    let s = asymptotic(0.0).s_zz_11_lower;
    assert!(within(s, 1.084e-6, 0.05), "{MODEL_GAP}: model gives {s:e}");
}

#[test]
#[ignore = "laboratory-measured fixture; closed-form channel model does not reproduce it"]
fn measured_single_photon_error_bounds_at_80_km() {
    let rows = [(0.0, [0.004, 0.052, 0.035, 0.534, 0.527]), (25.0, [0.005, 0.174, 0.225, 0.176, 0.166])];
    for (beta, want) in rows {
        let report = asymptotic(beta);
        let est = report.estimates.unwrap();
        let got = [BasisPair::ZZ, BasisPair::XX, BasisPair::YY, BasisPair::XY, BasisPair::YX]
            .map(|b| est.e_upper(b).unwrap());
        for (g, w) in got.iter().zip(want) {
            assert!(within(*g, w, 0.10), "{MODEL_GAP}: beta {beta}: model {got:?} vs measured {want:?}");
        }
    }
}

/// The key rate at the measured operating point, with the signal gain from
/// the model. The measured yield bound is too small to pay for error
/// correction at the model's gain, so the unclamped rate is negative.
#[test]
fn measured_operating_point_rate_is_negative_under_the_model_gain() {
    let (mu, s, i_e, e) = (0.67, 1.084e-6, 0.254, 0.006);
    let q = pair_observables(
        &ChannelParams::reference(80.0),
        MisalignmentAngle::from_degrees(0.0),
        &IntensityPair::symmetric(mu),
        BasisPair::ZZ,
    )
    .unwrap()
    .q;
    let report = secret_key_rate(&KeyRateInputs {
        variant: mdiqkd::protocol::Variant::Rfi,
        q_zz: q,
        e_zz: e,
        s_zz_11_lower: s,
        i_e,
        mu_z: mu,
        p_zz: 1.0,
        p_zz_mumu: 1.0,
        f_ec: 1.16,
    })
    .unwrap();
    let h = -(e * e.log2() + (1.0 - e) * (1.0 - e).log2());
    let by_hand = mu * mu * (-2.0 * mu).exp() * s * (1.0 - i_e) - q * 1.16 * h;
    assert!((report.rate_unclamped - by_hand).abs() <= 1e-12 * by_hand.abs());
    assert!((report.rate_unclamped - -6.831e-8).abs() <= 1e-3 * 6.831e-8, "{:e}", report.rate_unclamped);
    assert_eq!(report.rate, 0.0);
}
