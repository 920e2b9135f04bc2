use agebid::analytic::{policy_value_quadrature, time_average};
use agebid::simulator::{
    compare_policies, estimate_value, run_episode, run_episodes, Horizon, PolicyCase, SimConfig, ValueEstimate,
};
use agebid::{BidPolicy64, CompetitionModel64, EnvParams64, Model64, ValueCurve64};

fn model(curve: ValueCurve64, mu: f64, gamma: f64) -> Model64 {
    Model64::new(
        EnvParams64::new(mu, gamma).unwrap(),
        CompetitionModel64::Uniform01,
        curve,
    )
    .unwrap()
}

#[test]
fn same_seed_same_stream() {
    let m = model(ValueCurve64::Hyperbolic, 5.0, 0.1);
    let cfg = SimConfig::discounted(42, 64);
    let a = run_episodes(&BidPolicy64::Greedy, &m, &cfg).unwrap();
    let b = run_episodes(&BidPolicy64::Greedy, &m, &cfg).unwrap();
    assert_eq!(a, b);
    for (i, s) in a.iter().enumerate().step_by(9) {
        assert_eq!(*s, run_episode(&BidPolicy64::Greedy, &m, &cfg, i as u64).unwrap());
    }
    let c = run_episodes(&BidPolicy64::Greedy, &m, &SimConfig::discounted(43, 64)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn episode_totals_are_consistent() {
    let m = model(ValueCurve64::ExpSaturating, 3.0, 0.05);
    let cfg = SimConfig::discounted(7, 200);
    for s in run_episodes(&BidPolicy64::shading(0.6).unwrap(), &m, &cfg).unwrap() {
        assert!(s.spend >= 0.0 && s.final_age >= 0.0);
        // every win earns at most k_sup
        assert!(s.payoff + s.spend <= s.wins as f64 + 1e-9);
        if s.wins == 0 {
            assert_eq!(s.payoff, 0.0);
        }
    }
}

#[test]
fn discounted_mean_matches_quadrature() {
    for (curve, policy) in [
        (ValueCurve64::ExpSaturating, BidPolicy64::Greedy),
        (ValueCurve64::Hyperbolic, BidPolicy64::shading(0.5).unwrap()),
        (ValueCurve64::TwoStep, BidPolicy64::shading(0.8).unwrap()),
    ] {
        let m = model(curve, 5.0, 0.1);
        let est = estimate_value(&policy, &m, &SimConfig::discounted(1, 4000)).unwrap();
        let v0 = policy_value_quadrature(&policy, &m, &[0.0]).unwrap().v0;
        assert!(
            est.within_sigmas(v0, 3.0),
            "{}: {} ± {} vs {v0}",
            policy.label(),
            est.mean,
            est.std_err
        );
    }
}

#[test]
fn time_average_mode_matches_stationary_rate() {
    let m = model(ValueCurve64::ExpSaturating, 5.0, 0.0);
    for policy in [BidPolicy64::Greedy, BidPolicy64::shading(0.3).unwrap()] {
        let est = estimate_value(&policy, &m, &SimConfig::time_average(3, 32, 2000.0)).unwrap();
        let ta = time_average(&policy, &m).unwrap();
        assert!(
            est.within_sigmas(ta, 3.0),
            "{}: {} ± {} vs {ta}",
            policy.label(),
            est.mean,
            est.std_err
        );
    }
}

#[test]
fn win_counts_follow_the_geometric_law() {
    let m = model(ValueCurve64::constant(1.0).unwrap(), 2.0, 0.2);
    let policy = BidPolicy64::constant(0.5).unwrap();
    let stats = run_episodes(&policy, &m, &SimConfig::discounted(5, 20_000)).unwrap();
    let wins: Vec<f64> = stats.iter().map(|s| s.wins as f64).collect();
    let est = ValueEstimate::from_samples(&wins);
    let w = 0.5;
    let p = m.env.mu * w / (m.env.mu * w + m.env.gamma);
    let expected = policy_value_quadrature(&policy, &m, &[0.0]).unwrap().expected_wins;
    assert!((expected - p / (1.0 - p)).abs() < 1e-8);
    assert!(
        est.within_sigmas(expected, 3.0),
        "{} ± {} vs {expected}",
        est.mean,
        est.std_err
    );
    // geometric: P(no win) = 1 - P
    let zero = wins.iter().filter(|&&x| x == 0.0).count() as f64 / wins.len() as f64;
    assert!((zero - (1.0 - p)).abs() < 4.0 * (p * (1.0 - p) / wins.len() as f64).sqrt());
}

#[test]
fn comparison_rows_are_per_time_values() {
    let m = model(ValueCurve64::Hyperbolic, 1.0, 0.1);
    let cases = vec![
        PolicyCase {
            label: "greedy".into(),
            policy: BidPolicy64::Greedy,
            model: m.clone(),
        },
        PolicyCase {
            label: "half".into(),
            policy: BidPolicy64::shading(0.5).unwrap(),
            model: m.clone(),
        },
    ];
    let cfg = SimConfig::discounted(9, 500);
    let rows = compare_policies(&cases, &cfg).unwrap();
    assert_eq!(rows.len(), 2);
    let direct = estimate_value(&BidPolicy64::Greedy, &m, &cfg).unwrap();
    assert!((rows[0].value_per_time - 0.1 * direct.mean).abs() < 1e-12);
    assert_eq!(rows[1].policy, "half");
    assert!(rows[0].ci_low <= rows[0].value_per_time && rows[0].value_per_time <= rows[0].ci_high);
    assert_eq!((rows[0].n_reps, rows[0].seed), (500, 9));
}

#[test]
fn config_validation() {
    let m = model(ValueCurve64::Hyperbolic, 1.0, 0.0);
    assert!(run_episodes(&BidPolicy64::Greedy, &m, &SimConfig::discounted(0, 10)).is_err());
    assert!(SimConfig::<f64>::discounted(0, 0).validate().is_err());
    let mut ta = SimConfig::time_average(0, 4, 100.0f64);
    assert!((ta.warmup_time() - 5.0).abs() < 1e-12);
    ta.warmup = Some(100.0);
    assert!(ta.validate().is_err());
    let json = r#"{"seed":1,"n_reps":3,"horizon":{"mode":"time_average","T":50.0},"warmup":2.0}"#;
    let parsed: SimConfig<f64> = serde_json::from_str(json).unwrap();
    assert_eq!(parsed.horizon, Horizon::TimeAverage { t: 50.0 });
    assert!(
        serde_json::from_str::<SimConfig<f64>>(r#"{"seed":1,"n_reps":3,"horizon":{"mode":"discounted"},"x":1}"#)
            .is_err()
    );
}
