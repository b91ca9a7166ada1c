use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::{fit_individual, FitResult};
use crate::linalg;
use crate::panel::{ForecastTarget, PanelDataset};

/// Relative size of the ridge added to the dispersion matrix before inversion.
pub const OMEGA_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalBayesFit {
    /// Sample dispersion of the unit estimates around their mean.
    pub omega_eta: DMatrix<f64>,
    /// Ridge `lambda` added to `omega_eta` before inversion.
    pub ridge: f64,
    pub theta_bar: DVector<f64>,
    pub theta_eb: Vec<DVector<f64>>,
    pub weight_matrices: Vec<DMatrix<f64>>,
    pub forecasts: Vec<f64>,
    /// Largest deviation between `theta_eb` and its weighted-average form.
    pub identity_residual: f64,
}

impl EmpiricalBayesFit {
    /// `omega_eta + ridge * I`, the matrix actually inverted.
    pub fn omega_regularized(&self) -> DMatrix<f64> {
        let k = self.omega_eta.nrows();
        &self.omega_eta + DMatrix::identity(k, k) * self.ridge
    }
}

/// Mean and `N^-1`-scaled dispersion of a set of coefficient vectors.
pub fn coefficient_dispersion(theta: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let mean = linalg::mean_vector(theta);
    let k = mean.len();
    let mut omega = DMatrix::zeros(k, k);
    for th in theta {
        let d = th - &mean;
        omega += &d * d.transpose();
    }
    (mean, omega / theta.len().max(1) as f64)
}

pub fn fit_empirical_bayes(data: &PanelDataset, target: &ForecastTarget) -> Result<EmpiricalBayesFit> {
    let individual = fit_individual(data, target)?;
    let (_, omega) = coefficient_dispersion(&individual.theta);
    empirical_bayes_with_omega(data, target, &individual, &omega)
}

/// EB estimates for a caller-supplied dispersion matrix, shrinking towards
/// the mean of the individual estimates.
pub fn empirical_bayes_with_omega(
    data: &PanelDataset,
    target: &ForecastTarget,
    individual: &FitResult,
    omega: &DMatrix<f64>,
) -> Result<EmpiricalBayesFit> {
    target.check_against(data)?;
    let kk = data.n_coef();
    let tf = data.n_periods() as f64;
    let theta_bar = linalg::mean_vector(&individual.theta);
    let trace = omega.trace();
    if !(trace > 1e-14 * theta_bar.norm_squared().max(1.0)) {
        return Err(Error::DegenerateHeterogeneity);
    }
    let ridge = OMEGA_RIDGE * trace / kk as f64;
    let omega_reg = omega + DMatrix::identity(kk, kk) * ridge;
    let omega_inv = linalg::spd_inverse(&omega_reg).ok_or(Error::DegenerateHeterogeneity)?;

    let mut theta_eb = Vec::with_capacity(data.n_units());
    let mut weight_matrices = Vec::with_capacity(data.n_units());
    let mut identity_residual: f64 = 0.0;
    for i in 0..data.n_units() {
        let w = data.design(i);
        let wtw = w.transpose() * &w;
        let wty = w.transpose() * data.y_vector(i);
        let s2 = individual.sigma2[i];
        // Both sides multiplied through by sigma_i^2 so a perfect fit stays defined.
        let lhs = &wtw + &omega_inv * s2;
        let rhs = &wty + &omega_inv * &theta_bar * s2;
        let th = linalg::solve(&lhs, &rhs).ok_or(Error::Singular {
            context: "empirical Bayes system",
            unit: Some(i),
        })?;
        let q_inv = linalg::spd_inverse(&(&wtw / tf)).ok_or(Error::Singular {
            context: "unit moment matrix",
            unit: Some(i),
        })?;
        let inner = DMatrix::identity(kk, kk) + q_inv * &omega_inv * (s2 / tf);
        let wm = inner.try_inverse().ok_or(Error::Singular {
            context: "empirical Bayes weight matrix",
            unit: Some(i),
        })?;
        let avg = &wm * &individual.theta[i] + (DMatrix::identity(kk, kk) - &wm) * &theta_bar;
        identity_residual = identity_residual.max((&th - avg).amax());
        theta_eb.push(th);
        weight_matrices.push(wm);
    }
    let forecasts = theta_eb
        .iter()
        .enumerate()
        .map(|(i, th)| th.dot(&target.w(i)))
        .collect();
    Ok(EmpiricalBayesFit {
        omega_eta: omega.clone(),
        ridge,
        theta_bar,
        theta_eb,
        weight_matrices,
        forecasts,
        identity_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(n: usize, t: usize) -> PanelDataset {
        PanelDataset::from_fn(
            n,
            t,
            1,
            |i, s| {
                let x = ((s * 5 + i * 3) % 7) as f64 - 3.0;
                (0.5 + 0.2 * i as f64) * x + ((s * s + 2 * i) % 5) as f64 * 0.3 + i as f64
            },
            |i, s, _| ((s * 5 + i * 3) % 7) as f64 - 3.0,
        )
        .unwrap()
    }

    fn target(n: usize) -> ForecastTarget {
        ForecastTarget::from_regressors(&(0..n).map(|i| vec![0.5 * i as f64 - 1.0]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn weighted_average_identity() {
        let p = panel(6, 15);
        let fit = fit_empirical_bayes(&p, &target(6)).unwrap();
        assert!(fit.identity_residual < 1e-10);
    }

    #[test]
    fn huge_dispersion_returns_individual() {
        let p = panel(6, 15);
        let tg = target(6);
        let ind = fit_individual(&p, &tg).unwrap();
        let (_, omega) = coefficient_dispersion(&ind.theta);
        let fit = empirical_bayes_with_omega(&p, &tg, &ind, &(omega * 1e6)).unwrap();
        for (a, b) in fit.theta_eb.iter().zip(&ind.theta) {
            assert!((a - b).amax() <= 1e-4 * b.amax().max(1.0));
        }
    }

    #[test]
    fn identical_units_are_degenerate() {
        let one = panel(1, 12);
        let p = PanelDataset::from_fn(3, 12, 1, |_, t| one.y_at(0, t), |_, t, _| one.x_at(0, t)[0]).unwrap();
        assert!(matches!(
            fit_empirical_bayes(&p, &target(3)),
            Err(Error::DegenerateHeterogeneity)
        ));
    }
}
