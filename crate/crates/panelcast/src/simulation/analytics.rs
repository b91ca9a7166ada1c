use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::dgp::{DgpSpec, SimulatedPanel};
use crate::error::{Error, Result};

/// Below this width the uniform moments use their `a -> 0` limits.
const SMALL_WIDTH: f64 = 1e-6;

fn check_width(beta0: f64, a: f64) -> Result<()> {
    if !(beta0.abs() < 1.0) || !(a >= 0.0) || a / 2.0 >= 1.0 - beta0.abs() {
        return Err(Error::Domain(format!(
            "need a/2 < 1 - |beta0|, got beta0 = {beta0}, a = {a}"
        )));
    }
    Ok(())
}

/// `ln((B + a/2)/(B - a/2)) / a`, i.e. `E(1/(B + eta))` for uniform `eta`.
fn inv_mean(b: f64, a: f64) -> f64 {
    let h = a / 2.0;
    ((h / b).ln_1p() - (-h / b).ln_1p()) / a
}

/// `E(1/(1 - beta_i^2))` for `beta_i = beta0 + U(-a/2, a/2)`.
pub fn uniform_inverse_moment(beta0: f64, a: f64) -> Result<f64> {
    check_width(beta0, a)?;
    if a < SMALL_WIDTH {
        return Ok(1.0 / (1.0 - beta0 * beta0));
    }
    Ok(0.5 * (inv_mean(1.0 + beta0, a) + inv_mean(1.0 - beta0, a)))
}

/// `E(eta/(B + eta))` for `eta ~ U(-a/2, a/2)`.
pub fn ar1_eta_moment(b: f64, a: f64) -> Result<f64> {
    if !(b * b > a * a / 4.0) || !(a >= 0.0) {
        return Err(Error::Domain(format!("need B^2 > a^2/4, got B = {b}, a = {a}")));
    }
    if a < SMALL_WIDTH {
        return Ok(0.0);
    }
    Ok(1.0 - b * inv_mean(b, a))
}

/// `E(y_{t-1}^2 eta_i) = sigma^2 E(eta/(1 - beta_i^2))` in closed form.
pub fn ar1_y2eta(beta0: f64, a: f64, sigma2: f64) -> Result<f64> {
    check_width(beta0, a)?;
    if a < SMALL_WIDTH {
        return Ok(0.0);
    }
    let plus = ar1_eta_moment(1.0 + beta0, a)?;
    let minus = ar1_eta_moment(1.0 - beta0, a)?;
    // eta/(1 - beta0 - eta) = -(-eta)/(1 - beta0 + (-eta)) and -eta has the same law.
    Ok(sigma2 / 2.0 * (plus - minus))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ar1McCheck {
    pub e_inv: MomentEstimate,
    pub e_eta_inv: MomentEstimate,
    pub e_eta2_inv: MomentEstimate,
    /// Delta computed from the three simulated moments alone.
    pub delta_ar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ar1AnalyticsResult {
    pub beta0: f64,
    pub a: f64,
    pub sigma2: f64,
    pub e_inv: f64,
    pub e_y2eta: f64,
    pub delta_ar: f64,
    pub n_draws: usize,
    pub mc_check: Ar1McCheck,
}

fn estimate(values: &[f64]) -> MomentEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    MomentEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
    }
}

/// `Delta_AR` for the uniform-slope AR(1) panel with `sigma_i^2` independent
/// of `beta_i`. `E(1/(1-beta^2))` is closed form while `E(eta/(1-beta^2))`
/// and `E(eta^2/(1-beta^2))` are simulated from `n_draws` uniforms.
/// `e_y2eta` reports the closed form of `sigma^2 E(eta/(1-beta^2))`.
pub fn ar1_delta(beta0: f64, a: f64, sigma2: f64, n_draws: usize, seed: u64) -> Result<Ar1AnalyticsResult> {
    check_width(beta0, a)?;
    if n_draws < 2 {
        return Err(Error::Domain("need at least two draws".into()));
    }
    let e_inv = uniform_inverse_moment(beta0, a)?;
    let e_y2eta = ar1_y2eta(beta0, a, sigma2)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inv = Vec::with_capacity(n_draws);
    let mut eta_inv = Vec::with_capacity(n_draws);
    let mut eta2_inv = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let eta = if a > 0.0 {
            rng.random_range(-a / 2.0..a / 2.0)
        } else {
            0.0
        };
        let b = beta0 + eta;
        let r = 1.0 / (1.0 - b * b);
        inv.push(r);
        eta_inv.push(eta * r);
        eta2_inv.push(eta * eta * r);
    }
    let mc = (estimate(&inv), estimate(&eta_inv), estimate(&eta2_inv));

    let delta =
        |e_eta2: f64, e_eta: f64, e_one: f64| -> f64 { (sigma2 * (e_eta2 * e_one - e_eta * e_eta) / e_one).max(0.0) };
    let delta_ar = delta(mc.2.value, mc.1.value, e_inv);
    Ok(Ar1AnalyticsResult {
        beta0,
        a,
        sigma2,
        e_inv,
        e_y2eta,
        delta_ar,
        n_draws,
        mc_check: Ar1McCheck {
            e_inv: mc.0,
            e_eta_inv: mc.1,
            e_eta2_inv: mc.2,
            delta_ar: delta(mc.2.value, mc.1.value, mc.0.value),
        },
    })
}

/// Large-N pooled R-squared `(gE + E - 1)/(gE + E)` with `g = E(gamma_i^2)`,
/// `E = E(1/(1 - beta_i^2))` and unit means for `sigma_i^2` and `sigma_xi^2`.
pub fn expected_pr2(spec: &DgpSpec) -> Result<f64> {
    spec.validate()?;
    let e = uniform_inverse_moment(spec.beta0, spec.a_beta)?;
    let g = 0.5 * (spec.gamma_groups[0].powi(2) + spec.gamma_groups[1].powi(2)) + spec.sigma_gamma2 + spec.pi().powi(2);
    let total = g * e + e;
    Ok((total - 1.0) / total)
}

/// Sample analogue of [`expected_pr2`] from the realized unit parameters.
pub fn realized_pr2(panel: &SimulatedPanel) -> f64 {
    let n = panel.truth.len() as f64;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for u in &panel.truth {
        let inv = 1.0 / (1.0 - u.beta * u.beta);
        a += u.sigma2;
        b += u.gamma * u.gamma * u.sigma_x2 * inv;
        c += u.sigma2 * inv;
    }
    let (a, b, c) = (a / n, b / n, c / n);
    (b + c - a) / (b + c)
}
