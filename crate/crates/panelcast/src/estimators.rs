//! Individual, pooled, fixed-effects, random-effects, mean-group and
//! half-jackknife estimators, each paired with its one-step forecast.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, lstsq};
use crate::panel::{ForecastTarget, PanelDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FitMethod {
    Individual,
    Pooled,
    FixedEffects,
    RandomEffects,
    MeanGroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub method: FitMethod,
    /// Per-unit coefficient vectors `(intercept, slopes)`.
    pub theta: Vec<DVector<f64>>,
    /// Per-unit residual variances `RSS_i / (T - K)`.
    pub sigma2: Vec<f64>,
    pub forecasts: Vec<f64>,
    /// Per-unit mean of the in-sample residuals.
    pub residual_means: Vec<f64>,
    /// Units solved through the pseudo-inverse fallback.
    pub near_singular_units: Vec<usize>,
}

impl FitResult {
    pub fn n_units(&self) -> usize {
        self.theta.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomEffectsFit {
    pub alpha_re: f64,
    pub beta_re: DVector<f64>,
    pub sigma_u2: f64,
    pub sigma_eta2: f64,
    pub rho_hat: f64,
    pub unit_shrinkage: f64,
    pub eps_bar: Vec<f64>,
    /// The between-variance estimate was negative and floored at zero.
    pub sigma_eta2_floored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JackknifeFit {
    pub t_half: usize,
    pub theta_full: Vec<DVector<f64>>,
    pub theta_a: Vec<DVector<f64>>,
    pub theta_b: Vec<DVector<f64>>,
    pub theta_jk: Vec<DVector<f64>>,
    pub bias_proxy: Vec<DVector<f64>>,
}

/// Half-jackknife on the common fixed-effects slope.
#[derive(Debug, Clone, PartialEq)]
pub struct FeJackknifeFit {
    pub t_half: usize,
    pub beta_fe: DVector<f64>,
    pub beta_a: DVector<f64>,
    pub beta_b: DVector<f64>,
    pub beta_jk: DVector<f64>,
    pub bias_proxy: DVector<f64>,
}

#[derive(Debug, Clone)]
struct UnitOls {
    theta: DVector<f64>,
    sigma2: f64,
    residual_mean: f64,
    near_singular: bool,
}

fn ols_unit(data: &PanelDataset, i: usize) -> Result<UnitOls> {
    let w = data.design(i);
    let y = data.y_vector(i);
    let sol = lstsq(&w, &y).ok_or(Error::Singular {
        context: "individual regression",
        unit: Some(i),
    })?;
    let dof = data.n_periods() as f64 - data.n_coef() as f64;
    Ok(UnitOls {
        sigma2: if dof > 0.0 { sol.rss / dof } else { 0.0 },
        residual_mean: sol.residuals.mean(),
        theta: sol.coef,
        near_singular: sol.near_singular,
    })
}

fn forecasts_from(theta: &[DVector<f64>], target: &ForecastTarget) -> Vec<f64> {
    theta.iter().enumerate().map(|(i, th)| th.dot(&target.w(i))).collect()
}

/// Per-unit residual variance and residual mean for given coefficients.
fn residual_stats(data: &PanelDataset, theta: &[DVector<f64>]) -> (Vec<f64>, Vec<f64>) {
    let dof = data.n_periods() as f64 - data.n_coef() as f64;
    let mut s2 = Vec::with_capacity(theta.len());
    let mut means = Vec::with_capacity(theta.len());
    for (i, th) in theta.iter().enumerate() {
        let r = data.y_vector(i) - data.design(i) * th;
        s2.push(if dof > 0.0 { r.norm_squared() / dof } else { 0.0 });
        means.push(r.mean());
    }
    (s2, means)
}

/// Unit-by-unit OLS coefficients without forecasting.
pub fn individual_coefficients(data: &PanelDataset) -> Result<Vec<DVector<f64>>> {
    (0..data.n_units())
        .map(|i| ols_unit(data, i).map(|u| u.theta))
        .collect()
}

pub fn fit_individual(data: &PanelDataset, target: &ForecastTarget) -> Result<FitResult> {
    data.ensure_valid()?;
    target.check_against(data)?;
    let units: Vec<UnitOls> = (0..data.n_units()).map(|i| ols_unit(data, i)).collect::<Result<_>>()?;
    let theta: Vec<DVector<f64>> = units.iter().map(|u| u.theta.clone()).collect();
    Ok(FitResult {
        method: FitMethod::Individual,
        forecasts: forecasts_from(&theta, target),
        sigma2: units.iter().map(|u| u.sigma2).collect(),
        residual_means: units.iter().map(|u| u.residual_mean).collect(),
        near_singular_units: units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.near_singular)
            .map(|(i, _)| i)
            .collect(),
        theta,
    })
}

fn stacked(data: &PanelDataset) -> (DMatrix<f64>, DVector<f64>) {
    let (n, t, kk) = (data.n_units(), data.n_periods(), data.n_coef());
    let mut w = DMatrix::zeros(n * t, kk);
    let mut y = DVector::zeros(n * t);
    for i in 0..n {
        for s in 0..t {
            let r = i * t + s;
            w[(r, 0)] = 1.0;
            for (j, v) in data.x_at(i, s).iter().enumerate() {
                w[(r, j + 1)] = *v;
            }
            y[r] = data.y_at(i, s);
        }
    }
    (w, y)
}

pub fn fit_pooled(data: &PanelDataset, target: &ForecastTarget) -> Result<FitResult> {
    data.ensure_valid()?;
    target.check_against(data)?;
    let (w, y) = stacked(data);
    let sol = lstsq(&w, &y).ok_or(Error::Singular {
        context: "pooled regression",
        unit: None,
    })?;
    let theta = vec![sol.coef; data.n_units()];
    let (sigma2, residual_means) = residual_stats(data, &theta);
    Ok(FitResult {
        method: FitMethod::Pooled,
        forecasts: forecasts_from(&theta, target),
        sigma2,
        residual_means,
        near_singular_units: Vec::new(),
        theta,
    })
}

/// Common slope `(sum X'M X)^-1 sum X'M y` on within-demeaned data.
pub fn fe_slopes(data: &PanelDataset) -> Result<DVector<f64>> {
    let (n, t, k) = (data.n_units(), data.n_periods(), data.k_regressors());
    if k == 0 {
        return Err(Error::NoRegressors("fixed effects"));
    }
    let mut xd = DMatrix::zeros(n * t, k);
    let mut yd = DVector::zeros(n * t);
    for i in 0..n {
        let ybar = data.y_unit(i).iter().sum::<f64>() / t as f64;
        let mut xbar = vec![0.0; k];
        for s in 0..t {
            for (j, v) in data.x_at(i, s).iter().enumerate() {
                xbar[j] += v / t as f64;
            }
        }
        for s in 0..t {
            let r = i * t + s;
            yd[r] = data.y_at(i, s) - ybar;
            for (j, v) in data.x_at(i, s).iter().enumerate() {
                xd[(r, j)] = v - xbar[j];
            }
        }
    }
    lstsq(&xd, &yd).map(|s| s.coef).ok_or(Error::Singular {
        context: "within regression",
        unit: None,
    })
}

fn unit_means(data: &PanelDataset, i: usize) -> (f64, DVector<f64>) {
    let t = data.n_periods() as f64;
    let ybar = data.y_unit(i).iter().sum::<f64>() / t;
    let mut xbar = DVector::zeros(data.k_regressors());
    for s in 0..data.n_periods() {
        for (j, v) in data.x_at(i, s).iter().enumerate() {
            xbar[j] += v / t;
        }
    }
    (ybar, xbar)
}

pub fn fit_fixed_effects(data: &PanelDataset, target: &ForecastTarget) -> Result<FitResult> {
    data.ensure_valid()?;
    target.check_against(data)?;
    let beta = fe_slopes(data)?;
    let theta: Vec<DVector<f64>> = (0..data.n_units())
        .map(|i| {
            let (ybar, xbar) = unit_means(data, i);
            let mut th = DVector::zeros(data.n_coef());
            th[0] = ybar - beta.dot(&xbar);
            th.rows_mut(1, beta.len()).copy_from(&beta);
            th
        })
        .collect();
    let (sigma2, residual_means) = residual_stats(data, &theta);
    Ok(FitResult {
        method: FitMethod::FixedEffects,
        forecasts: forecasts_from(&theta, target),
        sigma2,
        residual_means,
        near_singular_units: Vec::new(),
        theta,
    })
}

pub fn fit_random_effects(data: &PanelDataset, target: &ForecastTarget) -> Result<(FitResult, RandomEffectsFit)> {
    data.ensure_valid()?;
    target.check_against(data)?;
    let (n, t, k, kk) = (data.n_units(), data.n_periods(), data.k_regressors(), data.n_coef());
    if k == 0 {
        return Err(Error::NoRegressors("random effects"));
    }
    let nf = n as f64;
    let tf = t as f64;
    let beta_fe = fe_slopes(data)?;
    let means: Vec<(f64, DVector<f64>)> = (0..n).map(|i| unit_means(data, i)).collect();

    let mut within_rss = 0.0;
    for (i, (ybar, xbar)) in means.iter().enumerate() {
        let alpha_i = ybar - beta_fe.dot(xbar);
        for s in 0..t {
            let xs = DVector::from_column_slice(data.x_at(i, s));
            let e = data.y_at(i, s) - alpha_i - beta_fe.dot(&xs);
            within_rss += e * e;
        }
    }
    let within_dof = (n * (t - 1)) as f64 - kk as f64;
    if within_dof <= 0.0 {
        return Err(Error::TooFewPeriods { t, k: kk });
    }
    let sigma_u2 = within_rss / within_dof;

    let between: Vec<f64> = means.iter().map(|(yb, xb)| yb - beta_fe.dot(xb)).collect();
    let between_mean = between.iter().sum::<f64>() / nf;
    let between_ss: f64 = between.iter().map(|a| (a - between_mean).powi(2)).sum();
    let between_dof = (n as f64 - kk as f64).max(1.0);
    let raw_eta2 = between_ss / between_dof - sigma_u2 / tf;
    let sigma_eta2_floored = raw_eta2 < 0.0;
    let sigma_eta2 = raw_eta2.max(0.0);
    let denom = tf * sigma_eta2 + sigma_u2;
    let (rho_hat, unit_shrinkage) = if denom > 0.0 {
        (sigma_u2 / denom, tf * sigma_eta2 / denom)
    } else {
        (1.0, 0.0)
    };

    let ybar_all = means.iter().map(|m| m.0).sum::<f64>() / nf;
    let xbar_all = linalg::mean_vector(&means.iter().map(|m| m.1.clone()).collect::<Vec<_>>());
    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    for (i, (ybar, xbar)) in means.iter().enumerate() {
        for s in 0..t {
            let xd = DVector::from_column_slice(data.x_at(i, s)) - xbar;
            let yd = data.y_at(i, s) - ybar;
            a += &xd * xd.transpose() / (nf * tf);
            b += &xd * (yd / (nf * tf));
        }
        let xb = xbar - &xbar_all;
        a += &xb * xb.transpose() * (rho_hat / nf);
        b += &xb * ((ybar - ybar_all) * rho_hat / nf);
    }
    let beta_re = linalg::spd_solve(&a, &b).ok_or(Error::Singular {
        context: "random-effects moment matrix",
        unit: None,
    })?;
    let alpha_re = ybar_all - beta_re.dot(&xbar_all);
    let eps_bar: Vec<f64> = means.iter().map(|(yb, xb)| yb - alpha_re - beta_re.dot(xb)).collect();

    let gls_theta: Vec<DVector<f64>> = (0..n)
        .map(|_| {
            let mut th = DVector::zeros(kk);
            th[0] = alpha_re;
            th.rows_mut(1, k).copy_from(&beta_re);
            th
        })
        .collect();
    let (sigma2, residual_means) = residual_stats(data, &gls_theta);
    let theta: Vec<DVector<f64>> = gls_theta
        .into_iter()
        .zip(&eps_bar)
        .map(|(mut th, e)| {
            th[0] += unit_shrinkage * e;
            th
        })
        .collect();
    let fit = FitResult {
        method: FitMethod::RandomEffects,
        forecasts: forecasts_from(&theta, target),
        sigma2,
        residual_means,
        near_singular_units: Vec::new(),
        theta,
    };
    let re = RandomEffectsFit {
        alpha_re,
        beta_re,
        sigma_u2,
        sigma_eta2,
        rho_hat,
        unit_shrinkage,
        eps_bar,
        sigma_eta2_floored,
    };
    Ok((fit, re))
}

/// Cross-sectional mean of the unit OLS coefficients.
pub fn fit_mean_group(data: &PanelDataset) -> Result<DVector<f64>> {
    data.ensure_valid()?;
    Ok(linalg::mean_vector(&individual_coefficients(data)?))
}

/// Mean-group forecast fit: every unit uses the mean of the unit estimates.
pub fn fit_mean_group_forecast(data: &PanelDataset, target: &ForecastTarget) -> Result<FitResult> {
    target.check_against(data)?;
    let mg = fit_mean_group(data)?;
    let theta = vec![mg; data.n_units()];
    let (sigma2, residual_means) = residual_stats(data, &theta);
    Ok(FitResult {
        method: FitMethod::MeanGroup,
        forecasts: forecasts_from(&theta, target),
        sigma2,
        residual_means,
        near_singular_units: Vec::new(),
        theta,
    })
}

fn half_length(data: &PanelDataset) -> Result<usize> {
    let t_half = data.n_periods() / 2;
    if t_half <= data.n_coef() {
        return Err(Error::HalfSampleTooShort {
            t_half,
            k: data.n_coef(),
        });
    }
    Ok(t_half)
}

fn half_coefficients(half: &PanelDataset) -> Result<Vec<DVector<f64>>> {
    individual_coefficients(half).map_err(|e| match e {
        Error::Singular { unit, .. } => Error::Singular {
            context: "half-sample regression",
            unit,
        },
        other => other,
    })
}

/// Split-sample estimates on `1..T_h` and `T_h+1..2T_h`; the last period is
/// dropped when `T` is odd.
pub fn fit_half_jackknife(data: &PanelDataset) -> Result<JackknifeFit> {
    data.ensure_valid()?;
    let t_half = half_length(data)?;
    let theta_full = individual_coefficients(data)?;
    let theta_a = half_coefficients(&data.sub_periods(0, t_half)?)?;
    let theta_b = half_coefficients(&data.sub_periods(t_half, 2 * t_half)?)?;
    let mut theta_jk = Vec::with_capacity(theta_full.len());
    let mut bias_proxy = Vec::with_capacity(theta_full.len());
    for ((full, a), b) in theta_full.iter().zip(&theta_a).zip(&theta_b) {
        let bias = (a + b) * 0.5 - full;
        theta_jk.push(full - &bias);
        bias_proxy.push(bias);
    }
    Ok(JackknifeFit {
        t_half,
        theta_full,
        theta_a,
        theta_b,
        theta_jk,
        bias_proxy,
    })
}

/// Half-jackknife of the FE slope; each half is demeaned with its own means.
pub fn fit_fe_half_jackknife(data: &PanelDataset) -> Result<FeJackknifeFit> {
    data.ensure_valid()?;
    let t_half = half_length(data)?;
    let beta_fe = fe_slopes(data)?;
    let beta_a = fe_slopes(&data.sub_periods(0, t_half)?)?;
    let beta_b = fe_slopes(&data.sub_periods(t_half, 2 * t_half)?)?;
    let bias_proxy = (&beta_a + &beta_b) * 0.5 - &beta_fe;
    let beta_jk = &beta_fe - &bias_proxy;
    Ok(FeJackknifeFit {
        t_half,
        beta_fe,
        beta_a,
        beta_b,
        beta_jk,
        bias_proxy,
    })
}

/// `y_{i,T+1} - yhat_{i,T+1}` per unit.
pub fn forecast_errors(fit: &FitResult, actuals: &[f64]) -> Result<Vec<f64>> {
    if actuals.len() != fit.forecasts.len() {
        return Err(Error::Shape(format!(
            "{} actuals for {} forecasts",
            actuals.len(),
            fit.forecasts.len()
        )));
    }
    Ok(actuals.iter().zip(&fit.forecasts).map(|(a, f)| a - f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, t: usize) -> PanelDataset {
        PanelDataset::from_fn(
            n,
            t,
            1,
            |i, s| (1.0 + i as f64) + 0.5 * ((s * 7 + i * 3) % 5) as f64 + ((s * s + i) % 3) as f64,
            |i, s, _| ((s * 3 + i * 5) % 7) as f64 * 0.4 - 1.0,
        )
        .unwrap()
    }

    fn target_for(data: &PanelDataset) -> ForecastTarget {
        let rows: Vec<Vec<f64>> = (0..data.n_units())
            .map(|i| (0..data.k_regressors()).map(|j| 0.3 * (i + j) as f64 - 0.2).collect())
            .collect();
        ForecastTarget::from_regressors(&rows).unwrap()
    }

    #[test]
    fn individual_perfect_fit() {
        let p = PanelDataset::from_fn(1, 5, 1, |_, t| 2.0 + 3.0 * t as f64, |_, t, _| t as f64).unwrap();
        let fit = fit_individual(&p, &target_for(&p)).unwrap();
        assert!((fit.theta[0][0] - 2.0).abs() < 1e-12);
        assert!((fit.theta[0][1] - 3.0).abs() < 1e-12);
        assert!(fit.sigma2[0] < 1e-24);
    }

    #[test]
    fn intercept_only_individual_is_mean() {
        let p = PanelDataset::new(1, 4, 0, vec![1.0, 2.0, 3.0, 6.0], vec![]).unwrap();
        let fit = fit_individual(&p, &ForecastTarget::intercept_only(1)).unwrap();
        assert!((fit.forecasts[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_normal_equations() {
        let x = [0.3, -1.2, 2.0, 0.7];
        let y = [1.0, -0.5, 2.5, 0.9];
        let p = PanelDataset::new(1, 4, 1, y.to_vec(), x.to_vec()).unwrap();
        let fit = fit_individual(&p, &target_for(&p)).unwrap();
        let n = 4.0;
        let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        let b = (n * sxy - sx * sy) / det;
        let a = (sxx * sy - sx * sxy) / det;
        assert!((fit.theta[0][0] - a).abs() < 1e-12);
        assert!((fit.theta[0][1] - b).abs() < 1e-12);
    }

    #[test]
    fn pooled_single_unit_equals_individual() {
        let p = toy(1, 9);
        let tg = target_for(&p);
        let a = fit_individual(&p, &tg).unwrap();
        let b = fit_pooled(&p, &tg).unwrap();
        assert!((&a.theta[0] - &b.theta[0]).amax() < 1e-12);
    }

    #[test]
    fn pooled_duplicated_units_equal_individual() {
        let one = toy(1, 8);
        let p = PanelDataset::from_fn(2, 8, 1, |_, t| one.y_at(0, t), |_, t, _| one.x_at(0, t)[0]).unwrap();
        let fit = fit_pooled(&p, &target_for(&p)).unwrap();
        let ind = individual_coefficients(&one).unwrap();
        assert!((&fit.theta[1] - &ind[0]).amax() < 1e-12);
    }

    #[test]
    fn fe_and_pooled_agree_for_single_unit() {
        let p = toy(1, 10);
        let tg = target_for(&p);
        let fe = fit_fixed_effects(&p, &tg).unwrap();
        let ind = fit_individual(&p, &tg).unwrap();
        let pooled = fit_pooled(&p, &tg).unwrap();
        assert!((fe.forecasts[0] - ind.forecasts[0]).abs() < 1e-10);
        assert!((fe.forecasts[0] - pooled.forecasts[0]).abs() < 1e-10);
    }

    #[test]
    fn fe_recovers_noiseless_slope() {
        let p = PanelDataset::from_fn(
            3,
            6,
            2,
            |i, t| i as f64 * 2.0 + 0.5 * (t * t % 5) as f64 - 1.5 * ((t + i) % 3) as f64,
            |i, t, j| {
                if j == 0 {
                    (t * t % 5) as f64
                } else {
                    ((t + i) % 3) as f64
                }
            },
        )
        .unwrap();
        let beta = fe_slopes(&p).unwrap();
        assert!((beta[0] - 0.5).abs() < 1e-12);
        assert!((beta[1] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn re_rejects_intercept_only() {
        let p = PanelDataset::new(2, 4, 0, vec![1.0, 2.0, 3.0, 4.0, 2.0, 1.0, 0.0, 1.0], vec![]).unwrap();
        assert!(matches!(
            fit_random_effects(&p, &ForecastTarget::intercept_only(2)),
            Err(Error::NoRegressors(_))
        ));
    }

    #[test]
    fn re_identical_units_share_forecasts() {
        let one = toy(1, 8);
        let p = PanelDataset::from_fn(2, 8, 1, |_, t| one.y_at(0, t), |_, t, _| one.x_at(0, t)[0]).unwrap();
        let tg = ForecastTarget::from_regressors(&[vec![0.4], vec![0.4]]).unwrap();
        let (fit, re) = fit_random_effects(&p, &tg).unwrap();
        assert_eq!(re.eps_bar[0], re.eps_bar[1]);
        assert!((fit.forecasts[0] - fit.forecasts[1]).abs() < 1e-14);
    }

    #[test]
    fn re_shrinkage_complements_rho() {
        let p = toy(4, 10);
        let (fit, re) = fit_random_effects(&p, &target_for(&p)).unwrap();
        assert!((re.unit_shrinkage - (1.0 - re.rho_hat)).abs() < 1e-14);
        let tg = target_for(&p);
        for i in 0..4 {
            let direct = re.alpha_re + re.beta_re.dot(&tg.x(i)) + re.unit_shrinkage * re.eps_bar[i];
            assert!((fit.forecasts[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_group_arithmetic() {
        let p = toy(5, 9);
        let mg = fit_mean_group(&p).unwrap();
        let ind = individual_coefficients(&p).unwrap();
        for j in 0..2 {
            let m = ind.iter().map(|v| v[j]).sum::<f64>() / 5.0;
            assert!((mg[j] - m).abs() < 1e-14);
        }
    }

    #[test]
    fn jackknife_odd_t_drops_last() {
        let p = toy(2, 9);
        let jk = fit_half_jackknife(&p).unwrap();
        assert_eq!(jk.t_half, 4);
        let b = individual_coefficients(&p.sub_periods(4, 8).unwrap()).unwrap();
        assert_eq!(jk.theta_b, b);
        for i in 0..2 {
            let back = &jk.theta_jk[i] + &jk.bias_proxy[i];
            assert!((back - &jk.theta_full[i]).amax() < 1e-14);
        }
    }

    #[test]
    fn jackknife_too_short() {
        let p = toy(2, 5);
        assert!(matches!(fit_half_jackknife(&p), Err(Error::HalfSampleTooShort { .. })));
    }

    #[test]
    fn forecast_error_arithmetic() {
        let p = toy(1, 6);
        let mut fit = fit_individual(&p, &target_for(&p)).unwrap();
        fit.forecasts = vec![0.0];
        assert_eq!(forecast_errors(&fit, &[3.0]).unwrap(), vec![3.0]);
    }
}
