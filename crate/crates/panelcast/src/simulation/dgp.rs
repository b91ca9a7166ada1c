use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{ForecastTarget, PanelDataset};

/// How the forecast-origin predictor offset `kappa_i` is assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaRule {
    /// Predictors at their stationary means.
    Zero,
    /// `+1` standard deviation for the first half of units, `-1` for the rest.
    PlusMinusOne,
}

impl KappaRule {
    pub const ALL: [KappaRule; 2] = [KappaRule::Zero, KappaRule::PlusMinusOne];

    pub fn kappa(self, unit: usize, n: usize) -> f64 {
        match self {
            KappaRule::Zero => 0.0,
            KappaRule::PlusMinusOne => {
                if unit < n / 2 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KappaRule::Zero => "0",
            KappaRule::PlusMinusOne => "pm1",
        }
    }
}

/// ARX(1) design with correlated heterogeneity:
/// `y_it = alpha_i + beta_i y_{i,t-1} + gamma_i x_it + eps_it`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub n_units: usize,
    pub n_periods: usize,
    pub beta0: f64,
    pub a_beta: f64,
    /// Intercept means for units `i < N/2` and `i >= N/2`.
    pub alpha_groups: [f64; 2],
    /// Variance of the idiosyncratic intercept shock.
    pub sigma_alpha2: f64,
    /// `gamma_0i` for units `i < N/2` and `i >= N/2`.
    pub gamma_groups: [f64; 2],
    /// Variance of the idiosyncratic `gamma` shock.
    pub sigma_gamma2: f64,
    pub rho_gamma_x: f64,
    pub rho_alpha_x: f64,
    pub kappa_rule: KappaRule,
    #[serde(default)]
    pub seed: u64,
}

impl DgpSpec {
    /// All units share `(alpha, beta0, gamma0)`.
    pub fn homogeneous(n_units: usize, n_periods: usize) -> Self {
        Self {
            n_units,
            n_periods,
            beta0: 0.775,
            a_beta: 0.0,
            alpha_groups: [1.0, 1.0],
            sigma_alpha2: 0.0,
            gamma_groups: [0.1, 0.1],
            sigma_gamma2: 0.0,
            rho_gamma_x: 0.0,
            rho_alpha_x: 0.0,
            kappa_rule: KappaRule::Zero,
            seed: 0,
        }
    }

    /// The three heterogeneity settings (1 = low, 3 = high) with common
    /// correlation `rho` for both `alpha` and `gamma`.
    pub fn setting(level: usize, n_units: usize, n_periods: usize, rho: f64) -> Result<Self> {
        let (beta0, a_beta, sigma_alpha2, gamma_groups, sigma_gamma2) = match level {
            1 => (0.775, 0.0, 0.5, [0.1, 0.1], 0.0),
            2 => (0.688, 0.5, 0.5, [0.2 / 3.0, 0.4 / 3.0], 0.1),
            3 => (0.486, 1.0, 1.0, [0.2 / 3.0, 0.4 / 3.0], 0.2),
            _ => return Err(Error::Config(format!("unknown heterogeneity setting {level}"))),
        };
        Ok(Self {
            n_units,
            n_periods,
            beta0,
            a_beta,
            alpha_groups: [2.0 / 3.0, 4.0 / 3.0],
            sigma_alpha2,
            gamma_groups,
            sigma_gamma2,
            rho_gamma_x: rho,
            rho_alpha_x: rho,
            kappa_rule: KappaRule::Zero,
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 || self.n_periods < 2 {
            return Err(Error::Config("need N >= 1 and T >= 2".into()));
        }
        if !(self.beta0.abs() < 1.0) {
            return Err(Error::Domain("|beta0| must be below 1".into()));
        }
        if !(self.a_beta >= 0.0 && self.a_beta < 2.0 * (1.0 - self.beta0.abs())) {
            return Err(Error::Domain("a_beta must lie in [0, 2(1-|beta0|))".into()));
        }
        if !(self.rho_gamma_x.abs() < 1.0 && self.rho_alpha_x.abs() < 1.0) {
            return Err(Error::Domain("correlations must lie in (-1, 1)".into()));
        }
        if self.sigma_alpha2 < 0.0 || self.sigma_gamma2 < 0.0 {
            return Err(Error::Domain("variances must be nonnegative".into()));
        }
        Ok(())
    }

    /// Loading of `gamma_i` on `mu_xi`.
    pub fn pi(&self) -> f64 {
        self.rho_gamma_x * self.sigma_gamma2.sqrt() / (1.0 - self.rho_gamma_x.powi(2)).sqrt()
    }

    /// Loading of `alpha_i` on `mu_xi`.
    pub fn phi(&self) -> f64 {
        self.rho_alpha_x * self.sigma_alpha2.sqrt() / (1.0 - self.rho_alpha_x.powi(2)).sqrt()
    }

    fn group(&self, unit: usize) -> usize {
        usize::from(unit >= self.n_units / 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitTruth {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma2: f64,
    pub mu_x: f64,
    pub rho_x: f64,
    pub sigma_x2: f64,
}

impl UnitTruth {
    /// Stationary mean `(alpha + gamma mu_x) / (1 - beta)`.
    pub fn mean_y(&self) -> f64 {
        (self.alpha + self.gamma * self.mu_x) / (1.0 - self.beta)
    }

    pub fn var_y(&self) -> f64 {
        let b2 = 1.0 - self.beta * self.beta;
        let br = self.beta * self.rho_x;
        self.sigma2 / b2 + self.gamma * self.gamma * self.sigma_x2 / b2 * (1.0 + br) / (1.0 - br)
    }

    pub fn theta(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.alpha, self.beta, self.gamma])
    }

    /// `(1, E(y) + kappa sd(y), mu_x + kappa sd(x))`.
    pub fn target_row(&self, kappa: f64) -> [f64; 3] {
        [
            1.0,
            self.mean_y() + kappa * self.var_y().sqrt(),
            self.mu_x + kappa * self.sigma_x2.sqrt(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    /// Regressors are `(y_{i,t-1}, x_it)`.
    pub data: PanelDataset,
    pub target: ForecastTarget,
    pub actuals: Vec<f64>,
    pub truth: Vec<UnitTruth>,
    /// Shock `eps_{i,T+1}` shared by every target built from this panel.
    pub eps_next: Vec<f64>,
}

impl SimulatedPanel {
    /// Target and realized outcomes for a given kappa rule.
    pub fn target_for(&self, rule: KappaRule) -> (ForecastTarget, Vec<f64>) {
        let n = self.truth.len();
        let rows: Vec<[f64; 3]> = (0..n).map(|i| self.truth[i].target_row(rule.kappa(i, n))).collect();
        let w = DMatrix::from_fn(n, 3, |i, c| rows[i][c]);
        let actuals = (0..n)
            .map(|i| {
                let t = &self.truth[i];
                t.alpha + t.beta * rows[i][1] + t.gamma * rows[i][2] + self.eps_next[i]
            })
            .collect();
        (
            ForecastTarget::new(w).expect("finite target with unit intercept"),
            actuals,
        )
    }
}

/// Centered, unit-variance chi-square(1) draw `(z^2 - 1)/sqrt(2)`.
fn centered_chi2<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (z * z - 1.0) / std::f64::consts::SQRT_2
}

fn half_one_plus_chi2<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (1.0 + z * z) / 2.0
}

/// Draws the unit parameters in a fixed order.
pub fn draw_unit_truth<R: Rng + ?Sized>(spec: &DgpSpec, unit: usize, rng: &mut R) -> UnitTruth {
    let g = spec.group(unit);
    let mu_x = centered_chi2(rng);
    let sigma2 = half_one_plus_chi2(rng);
    let sigma_x2 = half_one_plus_chi2(rng);
    let rho_x = rng.random_range(0.0..0.95);
    let eta_beta = if spec.a_beta > 0.0 {
        rng.random_range(-spec.a_beta / 2.0..spec.a_beta / 2.0)
    } else {
        0.0
    };
    let eta: f64 = rng.sample(StandardNormal);
    let zeta: f64 = rng.sample(StandardNormal);
    UnitTruth {
        alpha: spec.alpha_groups[g] + spec.phi() * mu_x + spec.sigma_alpha2.sqrt() * eta,
        beta: spec.beta0 + eta_beta,
        gamma: spec.gamma_groups[g] + spec.pi() * mu_x + spec.sigma_gamma2.sqrt() * zeta,
        sigma2,
        mu_x,
        rho_x,
        sigma_x2,
    }
}

/// Simulates one unit's `(y_t, y_{t-1}, x_t)` for `t = 1..T` from the
/// stationary initial value, then the out-of-sample shock.
fn simulate_unit<R: Rng + ?Sized>(u: &UnitTruth, t_len: usize, rng: &mut R) -> (Vec<f64>, Vec<[f64; 2]>, f64) {
    let b2 = 1.0 - u.beta * u.beta;
    let m0 = (u.alpha + u.gamma * u.mu_x) / (1.0 - u.beta);
    let s0 = ((u.gamma * u.gamma * u.sigma_x2 + u.sigma2) / b2).sqrt();
    let mut y_prev = rng.sample(Normal::new(m0, s0).expect("finite initial moments"));
    let sigma = u.sigma2.sqrt();
    let innov = u.sigma_x2.sqrt() * (1.0 - u.rho_x * u.rho_x).sqrt();
    let mut xi = 0.0;
    let mut y = Vec::with_capacity(t_len);
    let mut x = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        let nu: f64 = rng.sample(StandardNormal);
        xi = u.rho_x * xi + innov * nu;
        let xt = u.mu_x + xi;
        let eps = sigma * centered_chi2(rng);
        let yt = u.alpha + u.beta * y_prev + u.gamma * xt + eps;
        x.push([y_prev, xt]);
        y.push(yt);
        y_prev = yt;
    }
    let eps_next = sigma * centered_chi2(rng);
    (y, x, eps_next)
}

pub fn generate_panel_with_rng<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<SimulatedPanel> {
    spec.validate()?;
    let (n, t) = (spec.n_units, spec.n_periods);
    let truth: Vec<UnitTruth> = (0..n).map(|i| draw_unit_truth(spec, i, rng)).collect();
    let mut ys = Vec::with_capacity(n * t);
    let mut xs = Vec::with_capacity(n * t * 2);
    let mut eps_next = Vec::with_capacity(n);
    for u in &truth {
        let (y, x, e) = simulate_unit(u, t, rng);
        ys.extend(y);
        for row in x {
            xs.extend(row);
        }
        eps_next.push(e);
    }
    let data = PanelDataset::new(n, t, 2, ys, xs)?;
    let mut sim = SimulatedPanel {
        data,
        target: ForecastTarget::intercept_only(n),
        actuals: Vec::new(),
        truth,
        eps_next,
    };
    let (target, actuals) = sim.target_for(spec.kappa_rule);
    sim.target = target;
    sim.actuals = actuals;
    Ok(sim)
}

/// Simulates a panel from `spec.seed`.
pub fn generate_panel(spec: &DgpSpec) -> Result<SimulatedPanel> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    generate_panel_with_rng(spec, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_spec_has_identical_coefficients() {
        let spec = DgpSpec::homogeneous(8, 10);
        let sim = generate_panel(&spec).unwrap();
        for u in &sim.truth {
            assert_eq!(u.alpha, 1.0);
            assert_eq!(u.beta, 0.775);
            assert_eq!(u.gamma, 0.1);
        }
    }

    #[test]
    fn betas_inside_stationary_region() {
        let spec = DgpSpec::setting(3, 500, 5, 0.5).unwrap();
        let sim = generate_panel(&spec).unwrap();
        assert!(sim.truth.iter().all(|u| u.beta.abs() < 1.0));
    }

    #[test]
    fn regressor_is_lagged_outcome() {
        let spec = DgpSpec::setting(2, 3, 6, 0.0).unwrap();
        let sim = generate_panel(&spec).unwrap();
        for i in 0..3 {
            for t in 1..6 {
                assert_eq!(sim.data.x_at(i, t)[0], sim.data.y_at(i, t - 1));
            }
        }
    }

    #[test]
    fn kappa_targets_match_truth() {
        let mut spec = DgpSpec::setting(1, 4, 6, 0.0).unwrap();
        spec.kappa_rule = KappaRule::PlusMinusOne;
        let sim = generate_panel(&spec).unwrap();
        let u = sim.truth[0];
        let w = sim.target.w(0);
        assert!((w[1] - (u.mean_y() + u.var_y().sqrt())).abs() < 1e-12);
        let u3 = sim.truth[3];
        assert!((sim.target.w(3)[2] - (u3.mu_x - u3.sigma_x2.sqrt())).abs() < 1e-12);
        let expected = u.theta().dot(&w) + sim.eps_next[0];
        assert!((sim.actuals[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn invalid_width_rejected() {
        let mut spec = DgpSpec::homogeneous(2, 5);
        spec.a_beta = 0.5;
        assert!(spec.validate().is_err());
    }
}
