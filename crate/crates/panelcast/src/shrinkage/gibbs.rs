use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::individual_coefficients;
use crate::linalg;
use crate::panel::{ForecastTarget, PanelDataset};
use crate::shrinkage::eb::{coefficient_dispersion, OMEGA_RIDGE};

const JITTER: f64 = 1e-10;

/// Prior scale presets for `(S_thetabar, S_Sigma)`, both multiples of `I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSetting {
    /// `S_thetabar = 1e6 I`, `S_Sigma = 10 I`.
    Diffuse,
    /// `S_thetabar = 1e2 I`, `S_Sigma = 1e2 I`.
    Moderate,
    /// `S_thetabar = I`, `S_Sigma = I`.
    Tight,
}

impl PriorSetting {
    pub const ALL: [PriorSetting; 3] = [PriorSetting::Diffuse, PriorSetting::Moderate, PriorSetting::Tight];

    pub fn scales(self) -> (f64, f64) {
        match self {
            PriorSetting::Diffuse => (1e6, 10.0),
            PriorSetting::Moderate => (1e2, 1e2),
            PriorSetting::Tight => (1.0, 1.0),
        }
    }

    /// 1-based preset number.
    pub fn number(self) -> usize {
        match self {
            PriorSetting::Diffuse => 1,
            PriorSetting::Moderate => 2,
            PriorSetting::Tight => 3,
        }
    }

    pub fn from_number(n: usize) -> Option<Self> {
        match n {
            1 => Some(PriorSetting::Diffuse),
            2 => Some(PriorSetting::Moderate),
            3 => Some(PriorSetting::Tight),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperpriors {
    pub nu_sigma: f64,
    pub s2: f64,
    /// Wishart prior degrees of freedom; `None` means `K`.
    pub nu_big_sigma: Option<f64>,
}

impl Default for Hyperpriors {
    fn default() -> Self {
        Self {
            nu_sigma: 0.1,
            s2: 0.1,
            nu_big_sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub prior: PriorSetting,
    pub hyper: Hyperpriors,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_iter: 1500,
            burn_in: 500,
            prior: PriorSetting::Diffuse,
            hyper: Hyperpriors::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsTrace {
    /// `theta_draws[r][i]` is the retained draw `r` for unit `i`.
    pub theta_draws: Vec<Vec<DVector<f64>>>,
    pub sigma2_draws: Vec<f64>,
    pub thetabar_draws: Vec<DVector<f64>>,
    pub sigma_inv_draws: Vec<DMatrix<f64>>,
    pub forecast_mean: Vec<f64>,
    pub jitter_count: usize,
}

impl GibbsTrace {
    /// Posterior mean of `theta_i` over retained draws.
    pub fn posterior_mean(&self, unit: usize) -> DVector<f64> {
        let draws: Vec<DVector<f64>> = self.theta_draws.iter().map(|d| d[unit].clone()).collect();
        linalg::mean_vector(&draws)
    }
}

/// Cholesky factor after symmetrizing, adding diagonal jitter on failure.
pub fn cholesky_jittered(m: &DMatrix<f64>, jitters: &mut usize) -> Result<Cholesky<f64, Dyn>> {
    let mut a = linalg::symmetrize(m);
    let k = a.nrows();
    let scale = (a.trace().abs() / k.max(1) as f64).max(1.0);
    for attempt in 0..12 {
        if let Some(c) = Cholesky::new(a.clone()) {
            return Ok(c);
        }
        *jitters += 1;
        let bump = JITTER * scale * 10f64.powi(attempt);
        for d in 0..k {
            a[(d, d)] += bump;
        }
    }
    Err(Error::Singular {
        context: "Gibbs covariance draw",
        unit: None,
    })
}

/// Conditional mean and covariance of `theta_i` given the other blocks.
pub fn theta_block_moments(
    wtw: &DMatrix<f64>,
    wty: &DVector<f64>,
    sigma2: f64,
    sigma_inv: &DMatrix<f64>,
    theta_bar: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let prec = wtw / sigma2 + sigma_inv;
    let cov = linalg::spd_inverse(&prec).ok_or(Error::Singular {
        context: "theta conditional precision",
        unit: None,
    })?;
    let mean = &cov * (wty / sigma2 + sigma_inv * theta_bar);
    Ok((mean, cov))
}

pub fn draw_mvn<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    jitters: &mut usize,
) -> Result<DVector<f64>> {
    let l = cholesky_jittered(cov, jitters)?.l();
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(mean + l * z)
}

/// Wishart draw by the Bartlett decomposition.
pub fn draw_wishart<R: Rng + ?Sized>(
    rng: &mut R,
    df: f64,
    scale: &DMatrix<f64>,
    jitters: &mut usize,
) -> Result<DMatrix<f64>> {
    let k = scale.nrows();
    if df < k as f64 {
        return Err(Error::Domain(format!("Wishart df {df} below dimension {k}")));
    }
    let l = cholesky_jittered(scale, jitters)?.l();
    let mut a = DMatrix::zeros(k, k);
    for i in 0..k {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::Domain(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let la = l * a;
    Ok(linalg::symmetrize(&(&la * la.transpose())))
}

/// Inverse-gamma draw as `scale / Gamma(shape, 1)`.
pub fn draw_inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> Result<f64> {
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(scale / g.sample(rng))
}

pub fn fit_hierarchical_bayes(
    data: &PanelDataset,
    target: &ForecastTarget,
    config: &GibbsConfig,
) -> Result<GibbsTrace> {
    data.ensure_valid()?;
    target.check_against(data)?;
    let (n, t, kk) = (data.n_units(), data.n_periods(), data.n_coef());
    if n < 2 {
        return Err(Error::Domain("hierarchical Bayes needs N > 1".into()));
    }
    if config.burn_in >= config.n_iter {
        return Err(Error::Config("burn_in must be below n_iter".into()));
    }
    let nu_big = config.hyper.nu_big_sigma.unwrap_or(kk as f64);
    if nu_big < kk as f64 {
        return Err(Error::Config("Wishart prior df must be at least K".into()));
    }
    let (s_bar_scale, s_sigma_scale) = config.prior.scales();
    let eye = DMatrix::<f64>::identity(kk, kk);
    let s_bar_inv = &eye / s_bar_scale;
    let prior_d = DVector::<f64>::zeros(kk);
    let nu_s_sigma = &eye * (nu_big * s_sigma_scale);

    let designs: Vec<DMatrix<f64>> = (0..n).map(|i| data.design(i)).collect();
    let ys: Vec<DVector<f64>> = (0..n).map(|i| data.y_vector(i)).collect();
    let wtw: Vec<DMatrix<f64>> = designs.iter().map(|w| w.transpose() * w).collect();
    let wty: Vec<DVector<f64>> = designs.iter().zip(&ys).map(|(w, y)| w.transpose() * y).collect();

    let theta_hat = individual_coefficients(data)?;
    let rss0: f64 = (0..n)
        .map(|i| (&ys[i] - &designs[i] * &theta_hat[i]).norm_squared())
        .sum();
    let mut sigma2 = rss0 / (n * t - kk) as f64;
    if !(sigma2 > 0.0) {
        sigma2 = config.hyper.s2;
    }
    let (mut theta_bar, cov0) = coefficient_dispersion(&theta_hat);
    let ridge = OMEGA_RIDGE * cov0.trace().max(f64::MIN_POSITIVE) / kk as f64;
    let mut sigma_inv = linalg::spd_inverse(&(&cov0 + &eye * ridge)).unwrap_or_else(|| eye.clone());
    let mut theta = theta_hat;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut jitters = 0usize;
    let kept = config.n_iter - config.burn_in;
    let mut trace = GibbsTrace {
        theta_draws: Vec::with_capacity(kept),
        sigma2_draws: Vec::with_capacity(kept),
        thetabar_draws: Vec::with_capacity(kept),
        sigma_inv_draws: Vec::with_capacity(kept),
        forecast_mean: vec![0.0; n],
        jitter_count: 0,
    };
    let ws: Vec<DVector<f64>> = (0..n).map(|i| target.w(i)).collect();

    for iter in 0..config.n_iter {
        for i in 0..n {
            let (m, c) = theta_block_moments(&wtw[i], &wty[i], sigma2, &sigma_inv, &theta_bar)?;
            theta[i] = draw_mvn(&mut rng, &m, &c, &mut jitters)?;
        }

        let rss: f64 = (0..n).map(|i| (&ys[i] - &designs[i] * &theta[i]).norm_squared()).sum();
        let shape = (n * t) as f64 / 2.0 + config.hyper.nu_sigma / 2.0;
        let scale = 0.5 * (rss + config.hyper.nu_sigma * config.hyper.s2);
        sigma2 = draw_inv_gamma(&mut rng, shape, scale)?;

        let sum_theta = theta.iter().fold(DVector::zeros(kk), |acc, th| acc + th);
        let prec = &sigma_inv * n as f64 + &s_bar_inv;
        let cov_bar = linalg::spd_inverse(&prec).ok_or(Error::Singular {
            context: "theta-bar conditional precision",
            unit: None,
        })?;
        let mean_bar = &cov_bar * (&sigma_inv * sum_theta + &s_bar_inv * &prior_d);
        theta_bar = draw_mvn(&mut rng, &mean_bar, &cov_bar, &mut jitters)?;

        let mut spread = nu_s_sigma.clone();
        for th in &theta {
            let d = th - &theta_bar;
            spread += &d * d.transpose();
        }
        let w_scale = linalg::spd_inverse(&spread).ok_or(Error::Singular {
            context: "Wishart scale",
            unit: None,
        })?;
        sigma_inv = draw_wishart(&mut rng, n as f64 + nu_big, &w_scale, &mut jitters)?;

        if iter >= config.burn_in {
            for i in 0..n {
                trace.forecast_mean[i] += theta[i].dot(&ws[i]);
            }
            trace.theta_draws.push(theta.clone());
            trace.sigma2_draws.push(sigma2);
            trace.thetabar_draws.push(theta_bar.clone());
            trace.sigma_inv_draws.push(sigma_inv.clone());
        }
    }
    for f in &mut trace.forecast_mean {
        *f /= kept as f64;
    }
    trace.jitter_count = jitters;
    Ok(trace)
}
