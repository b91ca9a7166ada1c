//! Combination weights between individual and pooled (or fixed-effects)
//! forecasts, plus unit-specific, equal and oracle weights.
//!
//! Every weight multiplies the individual forecast: `omega = 1` keeps the
//! individual forecast, `omega = 0` keeps the pooled one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::{FeJackknifeFit, FitResult, JackknifeFit};
use crate::linalg;
use crate::panel::{all_unit_moments, ForecastTarget, PanelDataset, UnitMoments};
use crate::shrinkage::EmpiricalBayesFit;

/// Denominators at or below this are treated as degenerate.
pub const DEGENERATE_DENOM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledComboComponents {
    pub delta_hat: f64,
    pub h_hat: f64,
    pub psi_hat: f64,
    pub omega_raw: f64,
    pub omega: f64,
    pub degenerate: bool,
    pub clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeComboComponents {
    pub delta_fe_hat: f64,
    pub h_beta_hat: f64,
    pub psi_fe_hat: f64,
    pub c_diff_hat: f64,
    pub omega_raw: f64,
    pub omega: f64,
    pub degenerate: bool,
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitWeightSet {
    pub omegas: Vec<f64>,
    /// Units where `w' Omega w` vanished and the weight was set to 0.
    pub zero_direction_units: Vec<usize>,
}

/// `N^-1 sum_i (w_i'(theta_pooled - theta_i))^2`.
pub fn estimate_delta_hat(individual: &FitResult, pooled: &FitResult, target: &ForecastTarget) -> f64 {
    let n = individual.n_units();
    (0..n)
        .map(|i| target.w(i).dot(&(&pooled.theta[i] - &individual.theta[i])).powi(2))
        .sum::<f64>()
        / n as f64
}

/// `N^-1 sum_i sigma_i^2 w_i' Q_iT^-1 w_i`.
pub fn estimate_h_hat(individual: &FitResult, moments: &[UnitMoments], target: &ForecastTarget) -> Result<f64> {
    let n = individual.n_units();
    let mut acc = 0.0;
    for i in 0..n {
        let w = target.w(i);
        let q_inv_w = linalg::spd_solve(&moments[i].q_it, &w).ok_or(Error::Singular {
            context: "unit moment matrix",
            unit: Some(i),
        })?;
        acc += individual.sigma2[i] * w.dot(&q_inv_w);
    }
    Ok(acc / n as f64)
}

/// Weakly-exogenous correction built from the half-jackknife bias proxy.
pub fn estimate_psi_hat(
    data: &PanelDataset,
    individual: &FitResult,
    jk: &JackknifeFit,
    target: &ForecastTarget,
) -> Result<f64> {
    let moments = all_unit_moments(data)?;
    psi_from_parts(&individual.theta, &jk.bias_proxy, &moments, target, data.n_periods())
}

fn psi_from_parts(
    theta: &[DVector<f64>],
    bias: &[DVector<f64>],
    moments: &[UnitMoments],
    target: &ForecastTarget,
    t: usize,
) -> Result<f64> {
    let n = theta.len();
    let kk = target.n_coef();
    let nf = n as f64;
    let tf = t as f64;
    let theta_bar = linalg::mean_vector(theta);
    let q_bar = linalg::mean_matrix(&moments.iter().map(|m| m.q_it.clone()).collect::<Vec<_>>());
    let mut q_eta = DVector::zeros(kk);
    let mut row = DVector::zeros(kk);
    let mut second = 0.0;
    for i in 0..n {
        let eta = &theta[i] - &theta_bar;
        let w = target.w(i);
        let bw = tf * bias[i].dot(&w);
        q_eta += &moments[i].q_it * &eta / nf;
        row += &w * (bw / nf);
        second += bw * w.dot(&eta) / nf;
    }
    let solved = linalg::spd_solve(&q_bar, &q_eta).ok_or(Error::Singular {
        context: "average moment matrix",
        unit: None,
    })?;
    Ok(row.dot(&solved) - second)
}

fn weight_from(numer: f64, denom: f64) -> (f64, f64, bool, bool) {
    if !(denom > DEGENERATE_DENOM) || !numer.is_finite() {
        return (f64::NAN, 0.5, true, false);
    }
    let raw = numer / denom;
    let omega = raw.clamp(0.0, 1.0);
    (raw, omega, false, omega != raw)
}

/// `(Delta - psi/T) / (Delta + h/T - 2 psi/T)`, clipped to `[0, 1]`.
pub fn pooled_combination_weight(delta_hat: f64, h_hat: f64, psi_hat: f64, t: usize) -> PooledComboComponents {
    let tf = t as f64;
    let (omega_raw, omega, degenerate, clipped) =
        weight_from(delta_hat - psi_hat / tf, delta_hat + h_hat / tf - 2.0 * psi_hat / tf);
    PooledComboComponents {
        delta_hat,
        h_hat,
        psi_hat,
        omega_raw,
        omega,
        degenerate,
        clipped,
    }
}

/// Infeasible weight computed from components evaluated at the true parameters.
pub fn oracle_weight(delta: f64, h: f64, psi: f64, t: usize) -> PooledComboComponents {
    pooled_combination_weight(delta, h, psi, t)
}

/// Quadratic MSFE surface whose minimizer is the common weight.
pub fn combination_loss(delta: f64, h: f64, psi: f64, t: usize, omega: f64) -> f64 {
    let tf = t as f64;
    delta * (1.0 - omega).powi(2) + (h / tf) * omega * omega + 2.0 * (psi / tf) * omega * (1.0 - omega)
}

/// Components of the individual/fixed-effects combination weight.
pub fn estimate_fe_components(
    data: &PanelDataset,
    individual: &FitResult,
    fe: &FitResult,
    fe_jk: Option<&FeJackknifeFit>,
    target: &ForecastTarget,
) -> Result<FeComboComponents> {
    let n = data.n_units();
    let k = data.k_regressors();
    if k == 0 {
        return Err(Error::NoRegressors("fixed-effects combination"));
    }
    let nf = n as f64;
    let tf = data.n_periods() as f64;
    let moments = all_unit_moments(data)?;
    let betas: Vec<DVector<f64>> = individual.theta.iter().map(|th| th.rows(1, k).into_owned()).collect();
    let beta_mean = linalg::mean_vector(&betas);
    let beta_fe = fe.theta[0].rows(1, k).into_owned();
    let q_bar = linalg::mean_matrix(&moments.iter().map(|m| m.q_it_beta.clone()).collect::<Vec<_>>());

    let mut first = 0.0;
    let mut q_eta = DVector::zeros(k);
    let mut h_beta = 0.0;
    let mut c_diff = 0.0;
    let mut xx_bar = DMatrix::zeros(k, k);
    let mut bias_terms = Vec::with_capacity(n);
    for i in 0..n {
        let eta = &betas[i] - &beta_mean;
        let xdd = target.x(i) - &moments[i].xbar;
        first += xdd.dot(&eta).powi(2) / nf;
        q_eta += &moments[i].q_it_beta * &eta / nf;
        let q_inv_x = linalg::spd_solve(&moments[i].q_it_beta, &xdd).ok_or(Error::Singular {
            context: "within moment matrix",
            unit: Some(i),
        })?;
        h_beta += individual.sigma2[i] * xdd.dot(&q_inv_x) / nf;
        c_diff += (&beta_fe - &betas[i]).dot(&xdd) * individual.residual_means[i] / nf;
        xx_bar += &xdd * xdd.transpose() / nf;
        bias_terms.push((xdd, eta));
    }
    let q_solve = linalg::spd_solve(&q_bar, &q_eta).ok_or(Error::Singular {
        context: "average within moment matrix",
        unit: None,
    })?;
    let delta_fe = first - q_eta.dot(&q_solve);

    let psi_fe = match fe_jk {
        Some(jk) => {
            let b = &jk.bias_proxy; // beta_FE - beta_FEJK
            let lead = tf * (xx_bar.transpose() * b).dot(&q_solve);
            let tail: f64 = bias_terms.iter().map(|(x, e)| b.dot(x) * x.dot(e)).sum::<f64>() * tf / nf;
            lead - tail
        }
        None => 0.0,
    };

    let (omega_raw, omega, degenerate, clipped) = weight_from(
        delta_fe - psi_fe / tf - c_diff,
        delta_fe + h_beta / tf - 2.0 * psi_fe / tf,
    );
    Ok(FeComboComponents {
        delta_fe_hat: delta_fe,
        h_beta_hat: h_beta,
        psi_fe_hat: psi_fe,
        c_diff_hat: c_diff,
        omega_raw,
        omega,
        degenerate,
        clipped,
    })
}

/// `[1 + sigma_i^2 T^-1 (w'Q^-1 w) / (w' Omega w)]^-1` per unit, using the
/// same regularized dispersion matrix as the EB fit.
pub fn unit_specific_weights(
    individual: &FitResult,
    eb: &EmpiricalBayesFit,
    moments: &[UnitMoments],
    target: &ForecastTarget,
    t: usize,
) -> Result<UnitWeightSet> {
    let omega = eb.omega_regularized();
    let tf = t as f64;
    let mut omegas = Vec::with_capacity(individual.n_units());
    let mut zero_direction_units = Vec::new();
    for i in 0..individual.n_units() {
        let w = target.w(i);
        let spread = linalg::quad_form(&omega, &w);
        if !(spread > DEGENERATE_DENOM) {
            omegas.push(0.0);
            zero_direction_units.push(i);
            continue;
        }
        let q_inv_w = linalg::spd_solve(&moments[i].q_it, &w).ok_or(Error::Singular {
            context: "unit moment matrix",
            unit: Some(i),
        })?;
        let noise = individual.sigma2[i] * w.dot(&q_inv_w) / tf;
        omegas.push(1.0 / (1.0 + noise / spread));
    }
    Ok(UnitWeightSet {
        omegas,
        zero_direction_units,
    })
}

#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    Common(f64),
    PerUnit(&'a [f64]),
}

/// `omega * f_a + (1 - omega) * f_b` elementwise.
pub fn combine(f_a: &[f64], f_b: &[f64], weight: Weight<'_>) -> Result<Vec<f64>> {
    if f_a.len() != f_b.len() {
        return Err(Error::Shape("forecast vectors differ in length".into()));
    }
    match weight {
        Weight::Common(w) => {
            if !w.is_finite() {
                return Err(Error::Domain("non-finite combination weight".into()));
            }
            Ok(f_a.iter().zip(f_b).map(|(a, b)| w * a + (1.0 - w) * b).collect())
        }
        Weight::PerUnit(ws) => {
            if ws.len() != f_a.len() || ws.iter().any(|w| !w.is_finite()) {
                return Err(Error::Shape(
                    "per-unit weights must match forecasts and be finite".into(),
                ));
            }
            Ok(f_a
                .iter()
                .zip(f_b)
                .zip(ws)
                .map(|((a, b), w)| w * a + (1.0 - w) * b)
                .collect())
        }
    }
}

pub fn equal_weight_combination(f_a: &[f64], f_b: &[f64]) -> Result<Vec<f64>> {
    combine(f_a, f_b, Weight::Common(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_boundary_cases() {
        assert_eq!(pooled_combination_weight(2.0, 0.0, 0.0, 10).omega, 1.0);
        assert_eq!(pooled_combination_weight(0.0, 3.0, 0.0, 10).omega, 0.0);
        let c = pooled_combination_weight(1.0, 5.0, 0.0, 10);
        assert!((c.omega - 2.0 / 3.0).abs() < 1e-15);
        assert!(!c.clipped);
    }

    #[test]
    fn degenerate_denominator_falls_back_to_half() {
        let c = pooled_combination_weight(0.0, 0.0, 0.0, 10);
        assert!(c.degenerate);
        assert_eq!(c.omega, 0.5);
        assert_eq!(oracle_weight(0.0, 0.0, 0.0, 10).omega, 0.5);
    }

    #[test]
    fn clipping_is_flagged() {
        let c = pooled_combination_weight(1.0, 1.0, 5.0, 10);
        assert!(c.clipped);
        assert!(c.omega_raw > 1.0 && c.omega == 1.0);
    }

    #[test]
    fn combine_examples() {
        assert_eq!(combine(&[2.0], &[4.0], Weight::Common(1.0)).unwrap(), vec![2.0]);
        assert_eq!(combine(&[2.0], &[4.0], Weight::Common(0.0)).unwrap(), vec![4.0]);
        assert_eq!(equal_weight_combination(&[2.0], &[4.0]).unwrap(), vec![3.0]);
        let per = combine(&[1.0, 1.0], &[0.0, 0.0], Weight::PerUnit(&[0.25, 0.75])).unwrap();
        assert_eq!(per, vec![0.25, 0.75]);
    }

    #[test]
    fn loss_minimized_at_weight() {
        let (d, h, p, t) = (0.4, 12.0, 1.5, 20);
        let c = pooled_combination_weight(d, h, p, t);
        let at = combination_loss(d, h, p, t, c.omega);
        assert!(at <= combination_loss(d, h, p, t, 0.0));
        assert!(at <= combination_loss(d, h, p, t, 1.0));
    }
}
