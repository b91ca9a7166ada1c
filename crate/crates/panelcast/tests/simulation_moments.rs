//! Closed-form moments, DGP calibration and experiment bookkeeping.

mod common;

use common::oracles::*;
use panelcast::simulation::{
    ar1_delta, ar1_eta_moment, ar1_y2eta, expected_pr2, generate_panel, realized_pr2, run_experiment,
    uniform_inverse_moment, DgpSpec, ExperimentCell, ExperimentConfig, KappaRule,
};
use panelcast::Method;

const CASES: [(f64, f64); 5] = [(0.3, 1.0), (0.45, 1.0), (0.49, 1.0), (0.4999, 1.0), (0.2, 0.6)];

#[test]
fn inverse_moment_matches_quadrature() {
    for (b, a) in CASES {
        let q = uniform_expectation(|e| 1.0 / (1.0 - (b + e).powi(2)), a);
        let c = uniform_inverse_moment(b, a).unwrap();
        assert!((q - c).abs() < 1e-6 * c, "beta0 {b}: {q} vs {c}");
    }
}

#[test]
fn eta_moments_match_quadrature() {
    for (b, a) in CASES {
        for big_b in [1.0 + b, 1.0 - b] {
            let q = uniform_expectation(|e| e / (big_b + e), a);
            assert!((q - ar1_eta_moment(big_b, a).unwrap()).abs() < 1e-6);
        }
        let q = uniform_expectation(|e| e / (1.0 - (b + e).powi(2)), a);
        assert!((q - ar1_y2eta(b, a, 1.0).unwrap()).abs() < 1e-5, "beta0 {b}");
    }
}

#[test]
fn delta_ar_converges_to_quadrature() {
    for (b, a) in [(0.3, 1.0), (0.45, 1.0), (0.2, 0.6)] {
        let exact = ar1_delta_quadrature(b, a, 1.0);
        let mc = ar1_delta(b, a, 1.0, 1_000_000, 3).unwrap();
        assert!(
            (mc.delta_ar - exact).abs() < 0.01,
            "beta0 {b}: {} vs {exact}",
            mc.delta_ar
        );
        assert!((mc.mc_check.e_inv.value - mc.e_inv).abs() < 4.0 * mc.mc_check.e_inv.std_error);
    }
}

#[test]
fn delta_ar_scales_with_sigma2() {
    let one = ar1_delta(0.3, 1.0, 1.0, 5000, 2).unwrap();
    let two = ar1_delta(0.3, 1.0, 2.0, 5000, 2).unwrap();
    assert!((two.delta_ar - 2.0 * one.delta_ar).abs() < 1e-12);
}

#[test]
fn pr2_zero_without_predictability() {
    let mut d = DgpSpec::homogeneous(10, 10);
    d.beta0 = 0.0;
    d.gamma_groups = [0.0, 0.0];
    assert!(expected_pr2(&d).unwrap().abs() < 1e-15);
}

#[test]
fn pr2_increases_with_gamma_signal() {
    let mut d = DgpSpec::setting(2, 10, 10, 0.0).unwrap();
    let base = expected_pr2(&d).unwrap();
    d.sigma_gamma2 += 0.05;
    assert!(expected_pr2(&d).unwrap() > base);
}

#[test]
fn brute_force_pr2_setting_one() {
    let mut d = DgpSpec::setting(1, 5000, 2, 0.0).unwrap();
    d.seed = 1;
    let realized = realized_pr2(&generate_panel(&d).unwrap());
    assert!((realized - expected_pr2(&d).unwrap()).abs() < 0.01);
}

#[test]
fn gamma_correlates_with_regressor_mean() {
    let mut d = DgpSpec::setting(3, 20_000, 2, 0.5).unwrap();
    d.gamma_groups = [0.1, 0.1];
    d.seed = 6;
    let truth = generate_panel(&d).unwrap().truth;
    let n = truth.len() as f64;
    let mg = truth.iter().map(|u| u.gamma).sum::<f64>() / n;
    let mm = truth.iter().map(|u| u.mu_x).sum::<f64>() / n;
    let (mut sgm, mut sgg, mut smm) = (0.0, 0.0, 0.0);
    for u in &truth {
        sgm += (u.gamma - mg) * (u.mu_x - mm);
        sgg += (u.gamma - mg).powi(2);
        smm += (u.mu_x - mm).powi(2);
    }
    let corr = sgm / (sgg * smm).sqrt();
    assert!((corr - 0.5).abs() < 0.03, "corr {corr}");
}

#[test]
fn long_homogeneous_series_hits_stationary_mean() {
    let mut d = DgpSpec::homogeneous(1, 200_000);
    d.seed = 4;
    let p = generate_panel(&d).unwrap();
    let mean = p.data.y_unit(0).iter().sum::<f64>() / 200_000.0;
    let target = p.truth[0].mean_y();
    assert!(
        (mean - target).abs() < 0.05 * target.abs().max(1.0),
        "{mean} vs {target}"
    );
}

#[test]
fn experiment_reports_every_kappa_and_method() {
    let cells = vec![ExperimentCell {
        name: "tiny".into(),
        dgp: DgpSpec::setting(2, 12, 15, 0.5).unwrap(),
    }];
    let methods = vec![
        Method::Individual,
        Method::Pooled,
        Method::CombPooled,
        Method::OraclePooled,
    ];
    let res = run_experiment(&ExperimentConfig::new(cells, methods.clone(), 6, 5)).unwrap();
    for k in KappaRule::ALL {
        for &m in &methods {
            assert!(res[0].rmsfe(k, m).unwrap().is_finite());
        }
        assert_eq!(res[0].rmsfe(k, Method::Individual), Some(1.0));
    }
}
