//! Named forecasting methods and a driver that computes any subset of them
//! for one panel and one or more forecast targets.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::combination::{
    self, estimate_delta_hat, estimate_fe_components, estimate_h_hat, pooled_combination_weight, unit_specific_weights,
    FeComboComponents, PooledComboComponents, Weight,
};
use crate::error::{Error, Result};
use crate::estimators::{
    fit_fe_half_jackknife, fit_fixed_effects, fit_half_jackknife, fit_individual, fit_mean_group_forecast, fit_pooled,
    fit_random_effects, FeJackknifeFit, FitResult, JackknifeFit,
};
use crate::linalg;
use crate::panel::{all_unit_moments, ForecastTarget, PanelDataset, UnitMoments};
use crate::shrinkage::{
    coefficient_dispersion, empirical_bayes_with_omega, fit_hierarchical_bayes, EmpiricalBayesFit, GibbsConfig,
    PriorSetting,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Individual,
    Pooled,
    FixedEffects,
    RandomEffects,
    MeanGroup,
    /// Common weight between individual and pooled forecasts.
    CombPooled,
    /// Common weight between individual and fixed-effects forecasts.
    CombFe,
    /// Unit-specific weights between individual and pooled forecasts.
    CombUnit,
    EqualPooled,
    EqualFe,
    EmpiricalBayes,
    HierBayes(PriorSetting),
    /// Infeasible individual/pooled combination using true parameters.
    OraclePooled,
}

impl Method {
    pub const FEASIBLE: [Method; 14] = [
        Method::Individual,
        Method::Pooled,
        Method::FixedEffects,
        Method::RandomEffects,
        Method::MeanGroup,
        Method::CombPooled,
        Method::CombFe,
        Method::CombUnit,
        Method::EqualPooled,
        Method::EqualFe,
        Method::EmpiricalBayes,
        Method::HierBayes(PriorSetting::Diffuse),
        Method::HierBayes(PriorSetting::Moderate),
        Method::HierBayes(PriorSetting::Tight),
    ];

    /// Default method set without the Gibbs sampler.
    pub const STANDARD: [Method; 10] = [
        Method::Individual,
        Method::Pooled,
        Method::FixedEffects,
        Method::RandomEffects,
        Method::CombPooled,
        Method::CombFe,
        Method::CombUnit,
        Method::EqualPooled,
        Method::EqualFe,
        Method::EmpiricalBayes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Individual => "individual",
            Method::Pooled => "pooled",
            Method::FixedEffects => "fe",
            Method::RandomEffects => "re",
            Method::MeanGroup => "mg",
            Method::CombPooled => "comb_pooled",
            Method::CombFe => "comb_fe",
            Method::CombUnit => "comb_unit",
            Method::EqualPooled => "equal_pooled",
            Method::EqualFe => "equal_fe",
            Method::EmpiricalBayes => "eb",
            Method::HierBayes(PriorSetting::Diffuse) => "hb1",
            Method::HierBayes(PriorSetting::Moderate) => "hb2",
            Method::HierBayes(PriorSetting::Tight) => "hb3",
            Method::OraclePooled => "oracle_pooled",
        }
    }

    /// Parses a comma-separated list of method names.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("empty method list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::FEASIBLE
            .iter()
            .chain(std::iter::once(&Method::OraclePooled))
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// True unit parameters, used only by the oracle combination.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleInputs {
    pub theta: Vec<DVector<f64>>,
    pub sigma2: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct EngineOptions {
    /// Gibbs settings; the prior field is overridden per HB method.
    pub gibbs: GibbsConfig,
    pub oracle: Option<OracleInputs>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub pooled_combo: Option<PooledComboComponents>,
    pub fe_combo: Option<FeComboComponents>,
    pub oracle_combo: Option<PooledComboComponents>,
    pub unit_weights: Option<Vec<f64>>,
    /// The half-jackknife was unavailable (`T < 2K + 2`) and psi was set to 0.
    pub psi_skipped: bool,
    pub hb_jitters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    pub forecasts: BTreeMap<Method, Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl ForecastSet {
    pub fn get(&self, m: Method) -> Option<&[f64]> {
        self.forecasts.get(&m).map(|v| v.as_slice())
    }
}

struct Fits<'a> {
    data: &'a PanelDataset,
    target0: &'a ForecastTarget,
    individual: Option<FitResult>,
    pooled: Option<FitResult>,
    fe: Option<FitResult>,
    re: Option<FitResult>,
    mg: Option<FitResult>,
    jk: Option<Option<JackknifeFit>>,
    fe_jk: Option<Option<FeJackknifeFit>>,
    eb: Option<EmpiricalBayesFit>,
    moments: Option<Vec<UnitMoments>>,
    hb: BTreeMap<PriorSetting, Vec<DVector<f64>>>,
}

impl<'a> Fits<'a> {
    fn individual(&mut self) -> Result<&FitResult> {
        if self.individual.is_none() {
            self.individual = Some(fit_individual(self.data, self.target0)?);
        }
        Ok(self.individual.as_ref().unwrap())
    }

    fn pooled(&mut self) -> Result<&FitResult> {
        if self.pooled.is_none() {
            self.pooled = Some(fit_pooled(self.data, self.target0)?);
        }
        Ok(self.pooled.as_ref().unwrap())
    }

    fn fe(&mut self) -> Result<&FitResult> {
        if self.fe.is_none() {
            self.fe = Some(fit_fixed_effects(self.data, self.target0)?);
        }
        Ok(self.fe.as_ref().unwrap())
    }

    fn moments(&mut self) -> Result<&[UnitMoments]> {
        if self.moments.is_none() {
            self.moments = Some(all_unit_moments(self.data)?);
        }
        Ok(self.moments.as_ref().unwrap())
    }

    fn jk(&mut self) -> Result<Option<&JackknifeFit>> {
        if self.jk.is_none() {
            self.jk = Some(match fit_half_jackknife(self.data) {
                Ok(j) => Some(j),
                Err(Error::HalfSampleTooShort { .. }) => None,
                Err(e) => return Err(e),
            });
        }
        Ok(self.jk.as_ref().unwrap().as_ref())
    }

    fn fe_jk(&mut self) -> Result<Option<&FeJackknifeFit>> {
        if self.fe_jk.is_none() {
            self.fe_jk = Some(match fit_fe_half_jackknife(self.data) {
                Ok(j) => Some(j),
                Err(Error::HalfSampleTooShort { .. }) => None,
                Err(e) => return Err(e),
            });
        }
        Ok(self.fe_jk.as_ref().unwrap().as_ref())
    }

    fn eb(&mut self) -> Result<&EmpiricalBayesFit> {
        if self.eb.is_none() {
            let ind = self.individual()?.clone();
            let (_, omega) = coefficient_dispersion(&ind.theta);
            self.eb = Some(empirical_bayes_with_omega(self.data, self.target0, &ind, &omega)?);
        }
        Ok(self.eb.as_ref().unwrap())
    }
}

fn dot_forecasts(theta: &[DVector<f64>], target: &ForecastTarget) -> Vec<f64> {
    theta.iter().enumerate().map(|(i, th)| th.dot(&target.w(i))).collect()
}

/// Psi estimate from the half-jackknife and the given target.
fn psi_for(data: &PanelDataset, ind: &FitResult, jk: &JackknifeFit, target: &ForecastTarget) -> Result<f64> {
    combination::estimate_psi_hat(data, ind, jk, target)
}

/// Computes the requested forecasts for every target. All estimators are fit
/// once; only target-dependent quantities are recomputed per target.
pub fn forecast_methods_multi(
    data: &PanelDataset,
    targets: &[ForecastTarget],
    methods: &[Method],
    opts: &EngineOptions,
) -> Result<Vec<ForecastSet>> {
    let target0 = targets
        .first()
        .ok_or_else(|| Error::Shape("no forecast target".into()))?;
    for t in targets {
        t.check_against(data)?;
    }
    let mut fits = Fits {
        data,
        target0,
        individual: None,
        pooled: None,
        fe: None,
        re: None,
        mg: None,
        jk: None,
        fe_jk: None,
        eb: None,
        moments: None,
        hb: BTreeMap::new(),
    };
    let tt = data.n_periods();
    let mut hb_jitters = 0;
    for &m in methods {
        match m {
            Method::Individual => {
                fits.individual()?;
            }
            Method::Pooled | Method::EqualPooled => {
                fits.individual()?;
                fits.pooled()?;
            }
            Method::FixedEffects | Method::EqualFe => {
                fits.individual()?;
                fits.fe()?;
            }
            Method::RandomEffects => {
                if fits.re.is_none() {
                    fits.re = Some(fit_random_effects(data, target0)?.0);
                }
            }
            Method::MeanGroup => {
                if fits.mg.is_none() {
                    fits.mg = Some(fit_mean_group_forecast(data, target0)?);
                }
            }
            Method::CombPooled | Method::OraclePooled => {
                fits.individual()?;
                fits.pooled()?;
                fits.moments()?;
                fits.jk()?;
            }
            Method::CombFe => {
                fits.individual()?;
                fits.fe()?;
                fits.fe_jk()?;
            }
            Method::CombUnit => {
                fits.individual()?;
                fits.pooled()?;
                fits.moments()?;
                fits.eb()?;
            }
            Method::EmpiricalBayes => {
                fits.eb()?;
            }
            Method::HierBayes(prior) => {
                if let std::collections::btree_map::Entry::Vacant(slot) = fits.hb.entry(prior) {
                    let cfg = GibbsConfig {
                        prior,
                        ..opts.gibbs.clone()
                    };
                    let trace = fit_hierarchical_bayes(data, target0, &cfg)?;
                    hb_jitters += trace.jitter_count;
                    let means = (0..data.n_units()).map(|i| trace.posterior_mean(i)).collect();
                    slot.insert(means);
                }
            }
        }
    }
    if methods.contains(&Method::OraclePooled) && opts.oracle.is_none() {
        return Err(Error::Config("oracle combination needs true parameters".into()));
    }

    let mut out = Vec::with_capacity(targets.len());
    for target in targets {
        let mut diag = Diagnostics {
            hb_jitters,
            ..Diagnostics::default()
        };
        let mut forecasts = BTreeMap::new();
        let ind_f = fits.individual.as_ref().map(|f| dot_forecasts(&f.theta, target));
        let pooled_f = fits.pooled.as_ref().map(|f| dot_forecasts(&f.theta, target));
        let fe_f = fits.fe.as_ref().map(|f| dot_forecasts(&f.theta, target));
        for &m in methods {
            let f = match m {
                Method::Individual => ind_f.clone().unwrap(),
                Method::Pooled => pooled_f.clone().unwrap(),
                Method::FixedEffects => fe_f.clone().unwrap(),
                Method::RandomEffects => dot_forecasts(&fits.re.as_ref().unwrap().theta, target),
                Method::MeanGroup => dot_forecasts(&fits.mg.as_ref().unwrap().theta, target),
                Method::EqualPooled => {
                    combination::equal_weight_combination(ind_f.as_ref().unwrap(), pooled_f.as_ref().unwrap())?
                }
                Method::EqualFe => {
                    combination::equal_weight_combination(ind_f.as_ref().unwrap(), fe_f.as_ref().unwrap())?
                }
                Method::CombPooled => {
                    let ind = fits.individual.as_ref().unwrap();
                    let pooled = fits.pooled.as_ref().unwrap();
                    let delta = estimate_delta_hat(ind, pooled, target);
                    let h = estimate_h_hat(ind, fits.moments.as_ref().unwrap(), target)?;
                    let psi = match fits.jk.as_ref().unwrap() {
                        Some(jk) => psi_for(data, ind, jk, target)?,
                        None => {
                            diag.psi_skipped = true;
                            0.0
                        }
                    };
                    let c = pooled_combination_weight(delta, h, psi, tt);
                    diag.pooled_combo = Some(c);
                    combination::combine(
                        ind_f.as_ref().unwrap(),
                        pooled_f.as_ref().unwrap(),
                        Weight::Common(c.omega),
                    )?
                }
                Method::OraclePooled => {
                    let c = oracle_components(data, &fits, target, opts.oracle.as_ref().unwrap())?;
                    diag.oracle_combo = Some(c);
                    combination::combine(
                        ind_f.as_ref().unwrap(),
                        pooled_f.as_ref().unwrap(),
                        Weight::Common(c.omega),
                    )?
                }
                Method::CombFe => {
                    let ind = fits.individual.as_ref().unwrap();
                    let fe = fits.fe.as_ref().unwrap();
                    let fe_jk = fits.fe_jk.as_ref().unwrap().as_ref();
                    if fe_jk.is_none() {
                        diag.psi_skipped = true;
                    }
                    let c = estimate_fe_components(data, ind, fe, fe_jk, target)?;
                    diag.fe_combo = Some(c);
                    combination::combine(ind_f.as_ref().unwrap(), fe_f.as_ref().unwrap(), Weight::Common(c.omega))?
                }
                Method::CombUnit => {
                    let ind = fits.individual.as_ref().unwrap();
                    let eb = fits.eb.as_ref().unwrap();
                    let w = unit_specific_weights(ind, eb, fits.moments.as_ref().unwrap(), target, tt)?;
                    let f = combination::combine(
                        ind_f.as_ref().unwrap(),
                        pooled_f.as_ref().unwrap(),
                        Weight::PerUnit(&w.omegas),
                    )?;
                    diag.unit_weights = Some(w.omegas);
                    f
                }
                Method::EmpiricalBayes => dot_forecasts(&fits.eb.as_ref().unwrap().theta_eb, target),
                Method::HierBayes(prior) => dot_forecasts(&fits.hb[&prior], target),
            };
            forecasts.insert(m, f);
        }
        out.push(ForecastSet {
            forecasts,
            diagnostics: diag,
        });
    }
    Ok(out)
}

pub fn forecast_methods(
    data: &PanelDataset,
    target: &ForecastTarget,
    methods: &[Method],
    opts: &EngineOptions,
) -> Result<ForecastSet> {
    Ok(forecast_methods_multi(data, std::slice::from_ref(target), methods, opts)?.remove(0))
}

/// Oracle components: heterogeneity measured against the pooled
/// pseudo-true value `Qbar^-1 N^-1 sum Q_i theta_i`, noise from the true
/// error variances, and the cross term taken from the half-jackknife.
fn oracle_components(
    data: &PanelDataset,
    fits: &Fits<'_>,
    target: &ForecastTarget,
    truth: &OracleInputs,
) -> Result<PooledComboComponents> {
    let moments = fits.moments.as_ref().unwrap();
    let n = data.n_units();
    let nf = n as f64;
    let kk = data.n_coef();
    let mut q_bar = nalgebra::DMatrix::zeros(kk, kk);
    let mut q_theta = DVector::zeros(kk);
    for i in 0..n {
        q_bar += &moments[i].q_it / nf;
        q_theta += &moments[i].q_it * &truth.theta[i] / nf;
    }
    let pseudo = linalg::spd_solve(&q_bar, &q_theta).ok_or(Error::Singular {
        context: "average moment matrix",
        unit: None,
    })?;
    let mut delta = 0.0;
    let mut h = 0.0;
    for i in 0..n {
        let w = target.w(i);
        delta += w.dot(&(&pseudo - &truth.theta[i])).powi(2) / nf;
        let q_inv_w = linalg::spd_solve(&moments[i].q_it, &w).ok_or(Error::Singular {
            context: "unit moment matrix",
            unit: Some(i),
        })?;
        h += truth.sigma2[i] * w.dot(&q_inv_w) / nf;
    }
    let psi = match fits.jk.as_ref().unwrap() {
        Some(jk) => psi_for(data, fits.individual.as_ref().unwrap(), jk, target)?,
        None => 0.0,
    };
    Ok(combination::oracle_weight(delta, h, psi, data.n_periods()))
}
