//! Shared fixtures and independent reference computations for the
//! integration tests.
#![allow(dead_code)]

pub mod oracles;

use nalgebra::{DMatrix, DVector};
use panelcast::{ForecastTarget, PanelDataset};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Panel with unit-specific coefficients and Gaussian regressors and noise.
pub fn random_panel<R: Rng>(rng: &mut R, n: usize, t: usize, k: usize, noise: f64) -> PanelDataset {
    let mut x = Vec::with_capacity(n * t * k);
    let mut y = Vec::with_capacity(n * t);
    for _ in 0..n {
        let theta: Vec<f64> = (0..=k).map(|_| normal(rng)).collect();
        let shift: Vec<f64> = (0..k).map(|_| normal(rng)).collect();
        for _ in 0..t {
            let row: Vec<f64> = shift.iter().map(|s| s + normal(rng)).collect();
            let fit = theta[0] + row.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>();
            y.push(fit + noise * normal(rng));
            x.extend(row);
        }
    }
    PanelDataset::new(n, t, k, y, x).unwrap()
}

pub fn random_target<R: Rng>(rng: &mut R, n: usize, k: usize) -> ForecastTarget {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| normal(rng)).collect()).collect();
    ForecastTarget::from_regressors(&rows).unwrap()
}

/// Least squares through the normal equations and an LU solve, a route
/// independent of the library's QR path.
pub fn normal_equations(w: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    (w.transpose() * w)
        .lu()
        .solve(&(w.transpose() * y))
        .expect("full-rank oracle design")
}

/// Generalized least squares with an explicit error covariance.
pub fn gls(z: &DMatrix<f64>, y: &DVector<f64>, omega: &DMatrix<f64>) -> DVector<f64> {
    let oi = omega.clone().try_inverse().expect("invertible covariance");
    let a = z.transpose() * &oi * z;
    a.lu().solve(&(z.transpose() * &oi * y)).expect("full-rank GLS design")
}

pub fn max_abs(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

pub fn max_abs_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Stacked `(NT x K)` design with an intercept column and the stacked `y`.
pub fn stacked_design(data: &PanelDataset) -> (DMatrix<f64>, DVector<f64>) {
    let (n, t, kk) = (data.n_units(), data.n_periods(), data.n_coef());
    let mut w = DMatrix::zeros(n * t, kk);
    let mut y = DVector::zeros(n * t);
    for i in 0..n {
        for s in 0..t {
            let r = i * t + s;
            w.set_row(r, &data.w_row(i, s).transpose());
            y[r] = data.y_at(i, s);
        }
    }
    (w, y)
}
