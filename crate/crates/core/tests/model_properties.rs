use mdiqkd::model::{pair_observables, BasisPair, ChannelParams, IntensityPair, MisalignmentAngle};
use mdiqkd::oracle::i0_by_quadrature;
use proptest::prelude::*;

/// Direct transcription of the closed-form gains, term by term, with the
/// Bessel function taken from quadrature. Loses digits to cancellation at
/// long distance, so comparisons stay at moderate loss.
fn naive(params: &ChannelParams, beta_deg: f64, la: f64, lb: f64, basis: BasisPair) -> (f64, f64) {
    let eta_a = params.eta_d * 10f64.powf(-params.alpha * params.dist_a / 10.0);
    let eta_b = params.eta_d * 10f64.powf(-params.alpha * params.dist_b / 10.0);
    let (pd, ed) = (params.p_d, params.e_d);
    let mu_p = eta_a * la + eta_b * lb;
    let x = (eta_a * la * eta_b * lb).sqrt() / 2.0;
    let y = (1.0 - pd) * (-mu_p / 4.0).exp();
    let b = beta_deg.to_radians();
    let big_b = 2.0 * x * b.cos();
    let big_e = 2.0 * x * b.sin();
    let theta = 2f64.sqrt() * x * (b.cos() + b.sin());
    let xi = 2f64.sqrt() * x * (b.cos() - b.sin());
    let i0 = i0_by_quadrature;
    match basis {
        BasisPair::ZZ => {
            let qc = 2.0
                * (1.0 - pd).powi(2)
                * (-mu_p / 2.0).exp()
                * (1.0 - (1.0 - pd) * (-eta_a * la / 2.0).exp())
                * (1.0 - (1.0 - pd) * (-eta_b * lb / 2.0).exp());
            let qe =
                2.0 * pd * (1.0 - pd).powi(2) * (-mu_p / 2.0).exp() * (i0(2.0 * x) - (1.0 - pd) * (-mu_p / 2.0).exp());
            (qc + qe, ed * qc + (1.0 - ed) * qe)
        }
        BasisPair::XX | BasisPair::YY => (
            2.0 * y * y * (2.0 * y * y - 4.0 * y * i0(x) + i0(big_b) + i0(big_e)),
            2.0 * y * y * (y * y - 2.0 * y * i0(x) + ed * i0(big_b) + (1.0 - ed) * i0(big_e)),
        ),
        BasisPair::XY => (
            2.0 * y * y * (2.0 * y * y - 4.0 * y * i0(x) + i0(theta) + i0(xi)),
            2.0 * y * y * (y * y - 2.0 * y * i0(x) + ed * i0(xi) + (1.0 - ed) * i0(theta)),
        ),
        BasisPair::YX => (
            2.0 * y * y * (2.0 * y * y - 4.0 * y * i0(x) + i0(theta) + i0(xi)),
            2.0 * y * y * (y * y - 2.0 * y * i0(x) + ed * i0(theta) + (1.0 - ed) * i0(xi)),
        ),
    }
}

fn channel() -> impl Strategy<Value = ChannelParams> {
    (0.05..0.9f64, -8.0..-4.0f64, 0.0..0.1f64, 0.15..0.25f64, 0.0..200.0f64, 0.0..200.0f64).prop_map(
        |(eta_d, log_pd, e_d, alpha, dist_a, dist_b)| ChannelParams {
            eta_d,
            p_d: 10f64.powf(log_pd),
            e_d,
            alpha,
            dist_a,
            dist_b,
            ..ChannelParams::reference(0.0)
        },
    )
}

fn obs(ch: &ChannelParams, beta: f64, la: f64, lb: f64, basis: BasisPair) -> (f64, f64) {
    let r = pair_observables(ch, MisalignmentAngle::from_degrees(beta), &IntensityPair::new(la, lb), basis).unwrap();
    (r.q, r.eq)
}

#[test]
fn reference_zz_point_matches_transcription() {
    let ch = ChannelParams::reference(80.0);
    let (q, eq) = naive(&ch, 0.0, 0.67, 0.67, BasisPair::ZZ);
    let (mq, meq) = obs(&ch, 0.0, 0.67, 0.67, BasisPair::ZZ);
    assert!((q - mq).abs() <= 1e-12 * q);
    assert!((eq / q - meq / mq).abs() <= 1e-12);
    assert!((mq - 2.662_199_739_147_342_8e-6).abs() <= 1e-12 * mq);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_naive_transcription(
        ch in channel().prop_map(|c| ChannelParams { dist_a: c.dist_a / 4.0, dist_b: c.dist_b / 4.0, ..c }),
        beta in 0.0..90.0f64,
        la in 0.01..1.0f64,
        lb in 0.01..1.0f64,
    ) {
        for basis in BasisPair::ALL {
            let (q, eq) = naive(&ch, beta, la, lb, basis);
            let (mq, meq) = obs(&ch, beta, la, lb, basis);
            prop_assert!((q - mq).abs() <= 1e-7 * q, "{basis} gain {mq} vs {q}");
            prop_assert!((eq - meq).abs() <= 1e-7 * q, "{basis} error gain {meq} vs {eq}");
        }
    }

    #[test]
    fn records_are_ordered_probabilities(ch in channel(), beta in -360.0..360.0f64, la in 0.0..3.0f64, lb in 0.0..3.0f64) {
        for basis in BasisPair::ALL {
            let (q, eq) = obs(&ch, beta, la, lb, basis);
            prop_assert!(0.0 <= eq && eq <= q && q <= 1.0, "{basis}: q {q}, eq {eq}");
            prop_assert!(q > 0.0, "{basis}: dark counts alone give a positive gain");
        }
    }

    #[test]
    fn xy_error_rate_is_symmetric_about_45(ch in channel(), beta in 0.0..90.0f64, la in 1e-3..1.5f64, lb in 1e-3..1.5f64) {
        for basis in [BasisPair::XY, BasisPair::YX] {
            let (q1, eq1) = obs(&ch, beta, la, lb, basis);
            let (q2, eq2) = obs(&ch, 90.0 - beta, la, lb, basis);
            prop_assert!((eq1 / q1 - eq2 / q2).abs() <= 1e-12);
        }
    }

    #[test]
    fn mirrored_pairs_agree(ch in channel(), beta in 0.0..90.0f64, la in 1e-3..1.5f64, lb in 1e-3..1.5f64) {
        prop_assert_eq!(obs(&ch, beta, la, lb, BasisPair::XX), obs(&ch, beta, la, lb, BasisPair::YY));
        prop_assert_eq!(obs(&ch, beta, la, lb, BasisPair::XY).0, obs(&ch, beta, la, lb, BasisPair::YX).0);
    }

    #[test]
    fn zz_gain_falls_with_each_arm(ch in channel(), extra in 0.0..50.0f64, la in 1e-3..1.5f64, lb in 1e-3..1.5f64) {
        let base = obs(&ch, 0.0, la, lb, BasisPair::ZZ).0;
        let longer_a = ChannelParams { dist_a: ch.dist_a + extra, ..ch };
        let longer_b = ChannelParams { dist_b: ch.dist_b + extra, ..ch };
        prop_assert!(obs(&longer_a, 0.0, la, lb, BasisPair::ZZ).0 <= base);
        prop_assert!(obs(&longer_b, 0.0, la, lb, BasisPair::ZZ).0 <= base);
    }
}

#[test]
fn beta_enters_only_modulo_symmetries() {
    let ch = ChannelParams::reference(30.0);
    for basis in BasisPair::ALL {
        let a = obs(&ch, 20.0, 0.5, 0.4, basis);
        let b = obs(&ch, 200.0, 0.5, 0.4, basis);
        assert!((a.0 - b.0).abs() <= 1e-12 * a.0, "{basis}");
        assert!((a.1 - b.1).abs() <= 1e-12 * a.0, "{basis}");
    }
}
