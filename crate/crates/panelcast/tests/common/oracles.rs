//! Criterion computations shared by the focused tests and the acceptance run.

use nalgebra::{DMatrix, DVector};
use panelcast::estimators::{fit_fixed_effects, fit_individual, fit_mean_group, fit_pooled, fit_random_effects};
use panelcast::{ForecastTarget, PanelDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub const ESTIMATOR_TOL: f64 = 1e-8;

/// `(panel, target)` pairs with `N <= 4`, `T <= 12`, `k <= 2`.
pub fn tiny_panels() -> Vec<(PanelDataset, ForecastTarget)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..50)
        .map(|_| {
            let n = rng.random_range(2..=4);
            let k = rng.random_range(1..=2);
            let t = rng.random_range(k + 4..=12);
            (random_panel(&mut rng, n, t, k, 0.7), random_target(&mut rng, n, k))
        })
        .collect()
}

/// Largest deviation of individual, pooled, FE, RE and MG estimates from
/// their oracles over the tiny-panel set.
pub fn estimator_deviation() -> f64 {
    let mut worst: f64 = 0.0;
    for (p, target) in tiny_panels() {
        let (n, t, k) = (p.n_units(), p.n_periods(), p.k_regressors());

        let ind = fit_individual(&p, &target).unwrap();
        for i in 0..n {
            worst = worst.max(max_abs(&ind.theta[i], &normal_equations(&p.design(i), &p.y_vector(i))));
        }

        let (w, y) = stacked_design(&p);
        let pooled = fit_pooled(&p, &target).unwrap();
        worst = worst.max(max_abs(&pooled.theta[0], &normal_equations(&w, &y)));

        // Dummy-variable regression: one intercept per unit plus common slopes.
        let mut d = DMatrix::zeros(n * t, n + k);
        for i in 0..n {
            for s in 0..t {
                let r = i * t + s;
                d[(r, i)] = 1.0;
                for j in 0..k {
                    d[(r, n + j)] = p.x_at(i, s)[j];
                }
            }
        }
        let lsdv = normal_equations(&d, &y);
        let fe = fit_fixed_effects(&p, &target).unwrap();
        for i in 0..n {
            worst = worst.max((fe.theta[i][0] - lsdv[i]).abs());
            for j in 0..k {
                worst = worst.max((fe.theta[i][j + 1] - lsdv[n + j]).abs());
            }
        }

        // GLS with the block-diagonal covariance implied by the estimated
        // variance components, followed by the BLUP intercept correction.
        let (re_fit, re) = fit_random_effects(&p, &target).unwrap();
        let block = DMatrix::identity(t, t) * re.sigma_u2 + DMatrix::from_element(t, t, re.sigma_eta2);
        let mut omega = DMatrix::zeros(n * t, n * t);
        for i in 0..n {
            omega.view_mut((i * t, i * t), (t, t)).copy_from(&block);
        }
        let b = gls(&w, &y, &omega);
        worst = worst.max((re.alpha_re - b[0]).abs());
        worst = worst.max(max_abs(&re.beta_re, &b.rows(1, k).into_owned()));
        let block_inv = block.clone().try_inverse().unwrap();
        let ones = DVector::from_element(t, 1.0);
        for i in 0..n {
            let resid = p.y_vector(i) - p.design(i) * &b;
            let blup = re.sigma_eta2 * ones.dot(&(&block_inv * resid));
            worst = worst.max((re_fit.theta[i][0] - (b[0] + blup)).abs());
        }

        let mg = fit_mean_group(&p).unwrap();
        let mean: DVector<f64> = ind.theta.iter().fold(DVector::zeros(k + 1), |a, th| a + th) / n as f64;
        worst = worst.max(max_abs(&mg, &mean));
    }
    worst
}

pub const COMBO_TOL: f64 = 1e-10;
pub const K1_TOL: f64 = 1e-12;

fn toy_case(seed: u64, n: usize, t: usize, k: usize, noise: f64) -> (PanelDataset, ForecastTarget) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (random_panel(&mut rng, n, t, k, noise), random_target(&mut rng, n, k))
}

/// `Delta-hat` against a double loop over `w' eta eta' w`.
pub fn delta_hat_deviation() -> f64 {
    use panelcast::combination::estimate_delta_hat;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (p, target) = toy_case(seed, 5, 12, 2, 0.8);
        let ind = fit_individual(&p, &target).unwrap();
        let pooled = fit_pooled(&p, &target).unwrap();
        let n = p.n_units();
        let mut acc = 0.0;
        for i in 0..n {
            let w = target.w(i);
            let eta = &pooled.theta[i] - &ind.theta[i];
            for a in 0..w.len() {
                for b in 0..w.len() {
                    acc += w[a] * eta[a] * eta[b] * w[b];
                }
            }
        }
        worst = worst.max((estimate_delta_hat(&ind, &pooled, &target) - acc / n as f64).abs());
    }
    worst
}

/// `h-hat` against the unsimplified `w'Q^-1 H Q^-1 w` with
/// `H = sigma^2 T^-1 sum w w'`.
pub fn h_hat_deviation() -> f64 {
    use panelcast::combination::estimate_h_hat;
    use panelcast::panel::all_unit_moments;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (p, target) = toy_case(100 + seed, 4, 11, 2, 1.3);
        let ind = fit_individual(&p, &target).unwrap();
        let moments = all_unit_moments(&p).unwrap();
        let tf = p.n_periods() as f64;
        let mut acc = 0.0;
        for i in 0..p.n_units() {
            let wm = p.design(i);
            let q = wm.transpose() * &wm / tf;
            let qi = q.clone().try_inverse().unwrap();
            let resid = p.y_vector(i) - &wm * normal_equations(&wm, &p.y_vector(i));
            let s2 = resid.norm_squared() / (tf - p.n_coef() as f64);
            let h = &q * s2;
            let w = target.w(i);
            acc += (w.transpose() * &qi * h * &qi * &w)[0];
        }
        let got = estimate_h_hat(&ind, &moments, &target).unwrap();
        worst = worst.max((got - acc / p.n_units() as f64).abs());
    }
    worst
}

/// Direct transcription of the half-jackknife psi estimator.
pub fn psi_transcription(p: &PanelDataset, target: &ForecastTarget) -> f64 {
    let (n, t, kk) = (p.n_units(), p.n_periods(), p.n_coef());
    let (nf, tf) = (n as f64, t as f64);
    let th = t / 2;
    let theta: Vec<DVector<f64>> = (0..n).map(|i| normal_equations(&p.design(i), &p.y_vector(i))).collect();
    let half = |i: usize, a: usize, b: usize| {
        let d = p.design(i).rows(a, b - a).into_owned();
        let y = p.y_vector(i).rows(a, b - a).into_owned();
        normal_equations(&d, &y)
    };
    let bias: Vec<DVector<f64>> = (0..n)
        .map(|i| (half(i, 0, th) + half(i, th, 2 * th)) * 0.5 - &theta[i])
        .collect();
    let theta_bar = theta.iter().fold(DVector::zeros(kk), |a, v| a + v) / nf;
    let mut q_bar = DMatrix::zeros(kk, kk);
    let mut q_eta = DVector::zeros(kk);
    for i in 0..n {
        let wtw = p.design(i).transpose() * p.design(i);
        q_bar += &wtw / (nf * tf);
        q_eta += &wtw * (&theta[i] - &theta_bar) / (nf * tf);
    }
    let solved = q_bar.try_inverse().unwrap() * q_eta;
    let mut lead = DVector::zeros(kk).transpose();
    let mut tail = 0.0;
    for i in 0..n {
        let w = target.w(i);
        let wwt = &w * w.transpose();
        lead += bias[i].transpose() * &wwt * (tf / nf);
        tail += (bias[i].transpose() * &wwt * (&theta[i] - &theta_bar))[0] * tf / nf;
    }
    (lead * solved)[0] - tail
}

pub fn psi_hat_deviation() -> f64 {
    use panelcast::combination::estimate_psi_hat;
    use panelcast::estimators::fit_half_jackknife;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (p, target) = toy_case(200 + seed, 3, 12, 1, 0.9);
        let ind = fit_individual(&p, &target).unwrap();
        let jk = fit_half_jackknife(&p).unwrap();
        let got = estimate_psi_hat(&p, &ind, &jk, &target).unwrap();
        worst = worst.max((got - psi_transcription(&p, &target)).abs());
    }
    worst
}

/// Largest `|psi-hat|` over noiseless panels with strictly exogenous regressors.
pub fn psi_noiseless_max() -> f64 {
    use panelcast::combination::estimate_psi_hat;
    use panelcast::estimators::fit_half_jackknife;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (p, target) = toy_case(300 + seed, 4, 16, 2, 0.0);
        let ind = fit_individual(&p, &target).unwrap();
        let jk = fit_half_jackknife(&p).unwrap();
        worst = worst.max(estimate_psi_hat(&p, &ind, &jk, &target).unwrap().abs());
    }
    worst
}

/// EB estimates against the precision-weighted posterior mean and the
/// weighted-average form built from the reported weight matrices.
pub fn eb_identity_deviation() -> f64 {
    use panelcast::shrinkage::fit_empirical_bayes;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (p, target) = toy_case(400 + seed, 6, 14, 2, 1.0);
        let ind = fit_individual(&p, &target).unwrap();
        let eb = fit_empirical_bayes(&p, &target).unwrap();
        let omega_inv = eb.omega_regularized().try_inverse().unwrap();
        let kk = p.n_coef();
        for i in 0..p.n_units() {
            let wm = p.design(i);
            let prec = wm.transpose() * &wm / ind.sigma2[i];
            let post =
                (&prec + &omega_inv).try_inverse().unwrap() * (&prec * &ind.theta[i] + &omega_inv * &eb.theta_bar);
            let w = &eb.weight_matrices[i];
            let avg = w * &ind.theta[i] + (DMatrix::identity(kk, kk) - w) * &eb.theta_bar;
            worst = worst
                .max(max_abs(&eb.theta_eb[i], &avg))
                .max(max_abs(&eb.theta_eb[i], &post));
        }
    }
    worst
}

/// Intercept-only panels: scalar EB weight against the unit-specific weight
/// and against the closed form `1 / (1 + sigma^2 / (T omega))`.
pub fn k1_weight_deviation() -> f64 {
    use panelcast::combination::unit_specific_weights;
    use panelcast::panel::all_unit_moments;
    use panelcast::shrinkage::fit_empirical_bayes;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let (n, t) = (7, 15);
        let y: Vec<f64> = (0..n)
            .flat_map(|_| {
                let mu = 2.0 * normal(&mut rng);
                (0..t).map(|_| mu + normal(&mut rng)).collect::<Vec<_>>()
            })
            .collect();
        let p = PanelDataset::new(n, t, 0, y, Vec::new()).unwrap();
        let target = ForecastTarget::intercept_only(n);
        let ind = fit_individual(&p, &target).unwrap();
        let eb = fit_empirical_bayes(&p, &target).unwrap();
        let moments = all_unit_moments(&p).unwrap();
        let uw = unit_specific_weights(&ind, &eb, &moments, &target, t).unwrap();
        let om = eb.omega_regularized()[(0, 0)];
        for i in 0..n {
            let closed = 1.0 / (1.0 + ind.sigma2[i] / (t as f64 * om));
            worst = worst
                .max((eb.weight_matrices[i][(0, 0)] - uw.omegas[i]).abs())
                .max((uw.omegas[i] - closed).abs());
        }
    }
    worst
}

/// Panel DM with one unit against the unit DM on the same losses: returns
/// whether statistic and long-run variance agree bit for bit.
pub fn dm_single_unit_bitwise() -> bool {
    use panelcast::evaluation::{dm_test_panel, dm_test_unit, ForecastRecord};
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut records = Vec::new();
    let (mut la, mut lb) = (Vec::new(), Vec::new());
    for origin in 0..60 {
        let actual = normal(&mut rng);
        let fa = actual + 0.8 * normal(&mut rng);
        let fb = actual + 1.1 * normal(&mut rng);
        la.push((actual - fa).powi(2));
        lb.push((actual - fb).powi(2));
        for (m, f) in [("a", fa), ("b", fb)] {
            records.push(ForecastRecord {
                unit: 0,
                origin,
                method: m.into(),
                forecast: f,
                actual,
            });
        }
    }
    (0..4).all(|lags| {
        let p = dm_test_panel(&records, "a", "b", Some(lags)).unwrap();
        let u = dm_test_unit(&la, &lb, Some(lags)).unwrap();
        p.statistic.map(f64::to_bits) == u.statistic.map(f64::to_bits)
            && p.long_run_variance.to_bits() == u.long_run_variance.to_bits()
            && p.mean_diff.to_bits() == u.mean_diff.to_bits()
    })
}

/// Zero-variance differentials must come back flagged with no infinite
/// statistic.
pub fn dm_degenerate_flagged() -> bool {
    use panelcast::evaluation::dm_test_unit;
    let base: Vec<f64> = (0..30).map(|t| (t as f64 * 0.37).sin().abs()).collect();
    let shifted: Vec<f64> = base.iter().map(|v| v + 0.25).collect();
    let cases = [
        (base.clone(), base.clone()),
        (base.clone(), shifted),
        (vec![1.0; 30], vec![1.0; 30]),
    ];
    cases.iter().all(|(a, b)| {
        (0..3).all(|lags| {
            let r = dm_test_unit(a, b, Some(lags)).unwrap();
            r.degenerate() && r.statistic.is_none_or(|s| s.is_finite())
        })
    })
}

/// Share of standard-normal `d` draws kept by the `kappa = 0` band.
pub fn conditioning_inclusion_rate(draws: usize, c: f64) -> f64 {
    use panelcast::evaluation::{conditioning_filter, DStat, ForecastRecord, KAPPA_ZERO};
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut records = Vec::with_capacity(draws);
    let mut stats = Vec::with_capacity(draws);
    for origin in 0..draws {
        records.push(ForecastRecord {
            unit: 0,
            origin,
            method: "m".into(),
            forecast: 0.0,
            actual: 0.0,
        });
        stats.push(DStat {
            unit: 0,
            origin,
            d: normal(&mut rng),
            mean: 0.0,
            sd: 1.0,
        });
    }
    let kept = conditioning_filter(&records, &stats, KAPPA_ZERO, c).unwrap();
    kept.records.len() as f64 / draws as f64
}

/// Frozen-block check on the conditional `theta_i` draw. Returns the largest
/// deviation of the sample mean from the independently computed posterior
/// mean, in Monte Carlo standard errors.
pub fn gibbs_frozen_block_z(draws: usize) -> f64 {
    use panelcast::shrinkage::gibbs::{draw_mvn, theta_block_moments};
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = random_panel(&mut rng, 1, 12, 2, 0.7);
    let kk = p.n_coef();
    let wm = p.design(0);
    let y = p.y_vector(0);
    let sigma2 = 0.6;
    let sigma_inv = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.2, 0.3, 1.5, 0.1, -0.2, 0.1, 1.0]);
    let theta_bar = DVector::from_column_slice(&[0.5, -1.0, 0.25]);

    let s = (wm.transpose() * &wm / sigma2 + &sigma_inv).try_inverse().unwrap();
    let b = &s * (wm.transpose() * &y / sigma2 + &sigma_inv * &theta_bar);

    let (mean, cov) = theta_block_moments(
        &(wm.transpose() * &wm),
        &(wm.transpose() * &y),
        sigma2,
        &sigma_inv,
        &theta_bar,
    )
    .unwrap();
    let mut jitters = 0;
    let mut sum = DVector::zeros(kk);
    let mut draw_rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..draws {
        sum += draw_mvn(&mut draw_rng, &mean, &cov, &mut jitters).unwrap();
    }
    let avg = sum / draws as f64;
    (0..kk)
        .map(|j| (avg[j] - b[j]).abs() / (s[(j, j)] / draws as f64).sqrt())
        .fold(0.0, f64::max)
}

/// Smallest pairwise gap between the HB forecasts of the three prior presets.
pub fn prior_presets_min_gap() -> f64 {
    use panelcast::shrinkage::{fit_hierarchical_bayes, GibbsConfig, PriorSetting};
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = random_panel(&mut rng, 6, 15, 1, 1.0);
    let target = random_target(&mut rng, 6, 1);
    let f: Vec<Vec<f64>> = PriorSetting::ALL
        .iter()
        .map(|&prior| {
            let cfg = GibbsConfig {
                n_iter: 1500,
                burn_in: 500,
                prior,
                seed: 4,
                ..GibbsConfig::default()
            };
            fit_hierarchical_bayes(&p, &target, &cfg).unwrap().forecast_mean
        })
        .collect();
    let mut gap = f64::INFINITY;
    for a in 0..3 {
        for b in a + 1..3 {
            gap = gap.min(max_abs_slice(&f[a], &f[b]));
        }
    }
    gap
}

/// Composite Simpson rule on `[lo, hi]` with `m` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, m: usize) -> f64 {
    let h = (hi - lo) / m as f64;
    let mut acc = f(lo) + f(hi);
    for j in 1..m {
        acc += f(lo + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// `E(g(eta))` for `eta ~ U(-a/2, a/2)` by quadrature.
pub fn uniform_expectation(g: impl Fn(f64) -> f64, a: f64) -> f64 {
    simpson(g, -a / 2.0, a / 2.0, 2_000_000) / a
}

/// `Delta_AR` with every moment computed by quadrature.
pub fn ar1_delta_quadrature(beta0: f64, a: f64, sigma2: f64) -> f64 {
    let inv = |e: f64| 1.0 / (1.0 - (beta0 + e).powi(2));
    let e1 = uniform_expectation(inv, a);
    let e_eta = uniform_expectation(|e| e * inv(e), a);
    let e_eta2 = uniform_expectation(|e| e * e * inv(e), a);
    sigma2 * (e_eta2 * e1 - e_eta * e_eta) / e1
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn run_cli(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_panelcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Every file in `dir` keyed by name.
pub fn dir_bytes(dir: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

/// Runs `args` twice into fresh directories; returns whether both runs
/// succeeded and wrote byte-identical files.
pub fn repeat_identical(args: &[&str]) -> bool {
    let outs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let mut full: Vec<&str> = args.to_vec();
            let path = dir.path().to_str().unwrap().to_string();
            full.extend(["--out", &path]);
            let status = run_cli(&full).status;
            (status.success(), dir_bytes(dir.path()))
        })
        .collect();
    outs[0].0 && outs[1].0 && !outs[0].1.is_empty() && outs[0].1 == outs[1].1
}

pub fn simulate_args() -> Vec<String> {
    vec![
        "simulate".into(),
        "--config".into(),
        fixture("simulate.toml").display().to_string(),
    ]
}

pub fn forecast_args() -> Vec<String> {
    vec![
        "forecast".into(),
        "--config".into(),
        fixture("forecast.toml").display().to_string(),
        "--methods".into(),
        "individual,pooled,comb_pooled,eb,hb1".into(),
    ]
}

pub fn as_strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}
