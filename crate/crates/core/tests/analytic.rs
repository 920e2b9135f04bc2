use agebid::analytic::{
    accumulated_hazard, asymptotic_regret, policy_value_quadrature, shading_closed_form, time_average,
};
use agebid::quadrature::Simpson;
use agebid::special::{regularized_upper_gamma, upper_incomplete_gamma};
use agebid::{BidPolicy64, CompetitionModel64, EnvParams64, Model64, ValueCurve64};
use proptest::prelude::*;

fn model(curve: ValueCurve64, mu: f64, gamma: f64) -> Model64 {
    Model64::new(
        EnvParams64::new(mu, gamma).unwrap(),
        CompetitionModel64::Uniform01,
        curve,
    )
    .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// Brute-force Simpson over [5, 60] with 2e5 panels, then frozen.
const GAMMA_4_5: f64 = 1.590_155_491_784_17;

#[test]
fn incomplete_gamma_against_frozen_oracle() {
    let got = upper_incomplete_gamma(4.0, 5.0).unwrap();
    assert!(rel(got, GAMMA_4_5) < 1e-12, "{got}");
    // Closed form for integer shape: 3! e^-5 (1 + 5 + 25/2 + 125/6) = 236 e^-5
    assert!(rel(got, 236.0 * (-5.0f64).exp()) < 1e-13);
}

#[test]
fn incomplete_gamma_oracle_by_quadrature() {
    let brute = Simpson::with_rel_tol(1e-13)
        .integrate(|t: f64| t.powi(3) * (-t).exp(), 5.0, 60.0)
        .unwrap();
    assert!(rel(brute, GAMMA_4_5) < 1e-11, "{brute}");
}

#[test]
fn incomplete_gamma_identities() {
    for i in 1..=80 {
        let x = i as f64 * 0.5;
        assert!(rel(upper_incomplete_gamma(1.0, x).unwrap(), (-x).exp()) < 1e-12);
    }
    let mut worst: f64 = 0.0;
    for i in 0..=39 {
        let s = 0.5 + i as f64 * 0.5;
        for j in 0..=79 {
            let x = 0.5 + j as f64 * 0.5;
            let lhs = upper_incomplete_gamma(s + 1.0, x).unwrap();
            let rhs = s * upper_incomplete_gamma(s, x).unwrap() + x.powf(s) * (-x).exp();
            worst = worst.max(rel(lhs, rhs));
        }
    }
    assert!(worst < 1e-12, "{worst:e}");
    assert!((regularized_upper_gamma(3.0f64, 1e-3).unwrap() - 1.0).abs() < 1e-9);
    assert!(upper_incomplete_gamma(-2.0, 1.0).is_err());
    assert!(upper_incomplete_gamma(1.0, 0.0).is_err());
}

#[test]
fn accumulated_hazard_of_greedy_exp() {
    let m = model(ValueCurve64::ExpSaturating, 1.0, 0.1);
    for tau in [0.1, 1.0, 3.0, 10.0] {
        let h = accumulated_hazard(&BidPolicy64::Greedy, &m, tau).unwrap();
        let exact = 0.1 * tau + tau - 1.0 + (-tau).exp();
        assert!((h - exact).abs() < 1e-10 * exact.max(1e-3), "tau={tau}: {h} vs {exact}");
    }
}

#[test]
fn constant_policy_has_closed_form_value() {
    let m = model(ValueCurve64::constant(0.9).unwrap(), 4.0, 0.05);
    let policy = BidPolicy64::constant(0.6).unwrap();
    let u = m.competition.expected_utility(0.9, 0.6);
    let eval = policy_value_quadrature(&policy, &m, &[0.0, 1.0, 7.0]).unwrap();
    let exact = m.env.mu * u / m.env.gamma;
    assert!(rel(eval.v0, exact) < 1e-9);
    for v in &eval.value_at {
        assert!(rel(*v, exact) < 1e-8);
    }
    assert!(rel(time_average(&policy, &m).unwrap(), m.env.mu * u) < 1e-9);
    assert!(rel(eval.avg_win_utility, u / 0.6) < 1e-9);
}

#[test]
fn value_splits_into_wins_times_utility() {
    for curve in [
        ValueCurve64::ExpSaturating,
        ValueCurve64::Hyperbolic,
        ValueCurve64::TwoStep,
    ] {
        for gamma in [0.1, 0.01, 0.001] {
            for policy in [BidPolicy64::Greedy, BidPolicy64::shading(0.4).unwrap()] {
                let m = model(curve.clone(), 5.0, gamma);
                let e = policy_value_quadrature(&policy, &m, &[0.0]).unwrap();
                let split = e.expected_wins * e.avg_win_utility;
                assert!(
                    rel(e.v0, split) < 1e-8,
                    "{} {} gamma={gamma}",
                    curve.kind_name(),
                    policy.label()
                );
                assert!(e.v0 >= 0.0);
                assert!(e.win_probability > 0.0 && e.win_probability < 1.0);
            }
        }
    }
}

#[test]
fn discounted_value_tends_to_time_average() {
    for curve in [ValueCurve64::ExpSaturating, ValueCurve64::Hyperbolic] {
        for policy in [BidPolicy64::Greedy, BidPolicy64::shading(0.7).unwrap()] {
            let m = model(curve.clone(), 5.0, 0.0);
            let ta = time_average(&policy, &m).unwrap();
            let gaps: Vec<f64> = [0.1, 0.01, 0.001]
                .iter()
                .map(|&g| {
                    let e = policy_value_quadrature(&policy, &m.with_env(5.0, g).unwrap(), &[0.0]).unwrap();
                    (g * e.v0 - ta).abs()
                })
                .collect();
            assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
            assert!(gaps[2] < 1e-3 * ta);
        }
    }
}

#[test]
fn shading_closed_form_equals_quadrature() {
    for mu in [2.0, 5.0, 10.0, 50.0] {
        for i in 1..=20 {
            let alpha = i as f64 * 0.05;
            if mu * alpha <= 1.05 {
                continue;
            }
            let m = model(ValueCurve64::Hyperbolic, mu, 0.0);
            let ta = time_average(&BidPolicy64::shading(alpha).unwrap(), &m).unwrap();
            let cf = shading_closed_form(alpha, mu).unwrap();
            assert!(rel(cf, ta) < 1e-8, "alpha={alpha} mu={mu}: {cf} vs {ta}");
        }
    }
    assert!(shading_closed_form(0.1, 5.0).is_err());
    assert!(shading_closed_form(0.5, 5.0).unwrap() > 0.0);
}

#[test]
fn time_average_needs_wins() {
    let m = model(ValueCurve64::Hyperbolic, 2.0, 0.0);
    let never = BidPolicy64::constant(0.0).unwrap();
    assert!(matches!(time_average(&never, &m), Err(agebid::Error::Divergence(_))));
    assert!(policy_value_quadrature(&BidPolicy64::Greedy, &m, &[0.0]).is_err());
}

#[test]
fn regret_slope_of_linear_start_cdfs() {
    let u = asymptotic_regret(&CompetitionModel64::Uniform01).unwrap();
    assert!((u - 0.5).abs() < 1e-6, "{u}");
    let steep = CompetitionModel64::piecewise_linear_cdf(vec![(0.0, 0.0), (0.1, 0.8), (1.0, 1.0)]).unwrap();
    assert!((asymptotic_regret(&steep).unwrap() - 0.5).abs() < 1e-6);
    let reserve = CompetitionModel64::piecewise_linear_cdf(vec![(0.0, 0.0), (0.3, 0.0), (1.0, 1.0)]).unwrap();
    assert!(matches!(asymptotic_regret(&reserve), Err(agebid::Error::Degenerate(_))));
}

#[test]
fn greedy_gap_grows_with_arrival_rate() {
    let mut last = 0.0;
    for mu in [0.1, 1.0, 5.0, 10.0, 100.0] {
        let m = model(ValueCurve64::ExpSaturating, mu, 0.0);
        let greedy = time_average(&BidPolicy64::Greedy, &m).unwrap();
        let best = (1..=20)
            .map(|i| time_average(&BidPolicy64::shading(i as f64 * 0.05).unwrap(), &m).unwrap())
            .fold(0.0, f64::max);
        let gap = 1.0 - greedy / best;
        assert!(gap >= last - 1e-9 && gap < 0.5, "mu={mu}: {gap}");
        last = gap;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_recurrence_holds(s in 0.5f64..20.0, x in 0.5f64..40.0) {
        let lhs = upper_incomplete_gamma(s + 1.0, x).unwrap();
        let rhs = s * upper_incomplete_gamma(s, x).unwrap() + x.powf(s) * (-x).exp();
        prop_assert!(rel(lhs, rhs) < 1e-12);
    }

    #[test]
    fn shading_never_beats_truthful_one_shot(alpha in 0.05f64..=1.0, mu in 0.5f64..20.0) {
        let m = model(ValueCurve64::ExpSaturating, mu, 0.0);
        let ta = time_average(&BidPolicy64::shading(alpha).unwrap(), &m).unwrap();
        prop_assert!(ta >= 0.0 && ta <= mu * m.competition.profit(1.0) + 1e-12);
    }
}
