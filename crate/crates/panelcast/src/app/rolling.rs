//! Rolling-window out-of-sample forecasting and evaluation.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::individual_coefficients;
use crate::evaluation::{
    conditioning_filter, dm_test_panel, dm_test_unit_records, msfe_report, DStat, DmResult, EvaluationReport,
    ForecastRecord, Subset, KAPPA_ONE_SD, KAPPA_ZERO,
};
use crate::methods::{forecast_methods, EngineOptions, Method};
use crate::panel::{ForecastTarget, PanelDataset};
use crate::shrinkage::GibbsConfig;

/// Two-sided 5% critical value used to classify unit DM statistics.
pub const DM_CRITICAL: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub struct RollingConfig {
    pub window: usize,
    pub methods: Vec<Method>,
    pub benchmark: Method,
    pub hac_lags: Option<usize>,
    pub conditioning_c: f64,
    /// Gibbs settings for HB methods; the seed is offset by the origin.
    pub gibbs: GibbsConfig,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            window: 60,
            methods: Method::STANDARD.to_vec(),
            benchmark: Method::Individual,
            hac_lags: None,
            conditioning_c: 0.1,
            gibbs: GibbsConfig::default(),
        }
    }
}

impl RollingConfig {
    pub fn validate(&self, data: &PanelDataset) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if !self.methods.contains(&self.benchmark) {
            return Err(Error::Config(format!(
                "benchmark {} is not among the methods",
                self.benchmark
            )));
        }
        if self.window <= data.n_coef() + 1 {
            return Err(Error::Config(format!(
                "window {} must exceed K + 1 = {}",
                self.window,
                data.n_coef() + 1
            )));
        }
        if data.n_periods() < self.window + 2 {
            return Err(Error::InvalidPanel(format!(
                "{} periods are too few for window {} (need w + 2)",
                data.n_periods(),
                self.window
            )));
        }
        if !(self.conditioning_c > 0.0) {
            return Err(Error::Config("conditioning constant must be positive".into()));
        }
        Ok(())
    }
}

/// Counts of unit-level DM outcomes for one method against the benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DmUnitSummary {
    pub method: String,
    /// Method significantly more accurate.
    pub negative: usize,
    /// Benchmark significantly more accurate.
    pub positive: usize,
    pub insignificant: usize,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingOutput {
    /// Sorted by `(origin, unit, method)`.
    pub records: Vec<ForecastRecord>,
    pub d_stats: Vec<DStat>,
    /// Origins whose fits failed, with the reason; excluded for every method.
    pub failed_origins: Vec<(usize, String)>,
    pub reports: Vec<EvaluationReport>,
    pub dm_panel: Vec<DmResult>,
    pub dm_units: Vec<DmUnitSummary>,
    /// `(unit, origin)` pairs whose window had zero spread in `d`.
    pub zero_sd: Vec<(usize, usize)>,
}

struct OriginResult {
    records: Vec<ForecastRecord>,
    d_stats: Vec<DStat>,
}

fn sample_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Forecasts period `origin` from the window `origin - w .. origin`.
fn run_origin(data: &PanelDataset, config: &RollingConfig, origin: usize) -> Result<OriginResult> {
    let window = data.sub_periods(origin - config.window, origin)?;
    let x_next: Vec<Vec<f64>> = (0..data.n_units()).map(|i| data.x_at(i, origin).to_vec()).collect();
    let target = ForecastTarget::from_regressors(&x_next)?;
    let mut opts = EngineOptions {
        gibbs: config.gibbs.clone(),
        oracle: None,
    };
    opts.gibbs.seed = config.gibbs.seed.wrapping_add(origin as u64);
    let set = forecast_methods(&window, &target, &config.methods, &opts)?;

    let theta = individual_coefficients(&window)?;
    let d_stats = (0..data.n_units())
        .map(|i| {
            let fitted: Vec<f64> = (0..window.n_periods())
                .map(|s| theta[i].dot(&window.w_row(i, s)))
                .collect();
            let (mean, sd) = sample_sd(&fitted);
            DStat {
                unit: i,
                origin,
                d: theta[i].dot(&target.w(i)),
                mean,
                sd,
            }
        })
        .collect();

    let mut methods = config.methods.clone();
    methods.sort_by_key(|m| m.name());
    let mut records = Vec::with_capacity(data.n_units() * methods.len());
    for i in 0..data.n_units() {
        for &m in &methods {
            let f = set
                .get(m)
                .ok_or_else(|| Error::Experiment(format!("method {m} produced no forecasts")))?;
            records.push(ForecastRecord {
                unit: i,
                origin,
                method: m.name().to_string(),
                forecast: f[i],
                actual: data.y_at(i, origin),
            });
        }
    }
    Ok(OriginResult { records, d_stats })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub reports: Vec<EvaluationReport>,
    pub dm_panel: Vec<DmResult>,
    pub dm_units: Vec<DmUnitSummary>,
    pub zero_sd: Vec<(usize, usize)>,
}

/// Evaluation of an existing record set: reports for every subset and DM
/// tests on the full sample.
pub fn evaluate_records(
    records: &[ForecastRecord],
    d_stats: Option<&[DStat]>,
    benchmark: &str,
    methods: &[String],
    c: f64,
    hac_lags: Option<usize>,
) -> Result<Evaluation> {
    let mut reports = vec![msfe_report(records, benchmark, methods, Subset::All)?];
    let mut zero_sd = Vec::new();
    if let Some(d) = d_stats {
        for (subset, kappas) in [(Subset::NearMean, KAPPA_ZERO), (Subset::OneSdAway, KAPPA_ONE_SD)] {
            let f = conditioning_filter(records, d, kappas, c)?;
            zero_sd = f.zero_sd;
            if f.records.is_empty() {
                continue;
            }
            reports.push(msfe_report(&f.records, benchmark, methods, subset)?);
        }
    }

    let mut units: Vec<usize> = records.iter().map(|r| r.unit).collect();
    units.sort_unstable();
    units.dedup();
    let mut dm_panel = Vec::new();
    let mut dm_units = Vec::new();
    for m in methods.iter().filter(|m| m.as_str() != benchmark) {
        dm_panel.push(dm_test_panel(records, m, benchmark, hac_lags)?);
        let mut s = DmUnitSummary {
            method: m.clone(),
            negative: 0,
            positive: 0,
            insignificant: 0,
            degenerate: 0,
        };
        for &u in &units {
            match dm_test_unit_records(records, u, m, benchmark, hac_lags)?.statistic {
                None => s.degenerate += 1,
                Some(v) if v < -DM_CRITICAL => s.negative += 1,
                Some(v) if v > DM_CRITICAL => s.positive += 1,
                Some(_) => s.insignificant += 1,
            }
        }
        dm_units.push(s);
    }
    Ok(Evaluation {
        reports,
        dm_panel,
        dm_units,
        zero_sd,
    })
}

/// One-step-ahead forecasts for origins `w..T-1` (0-based forecast periods),
/// each fit on the preceding `w` observations.
pub fn run_rolling(data: &PanelDataset, config: &RollingConfig) -> Result<RollingOutput> {
    config.validate(data)?;
    let origins: Vec<usize> = (config.window..data.n_periods()).collect();
    let results: Vec<(usize, Result<OriginResult>)> =
        origins.par_iter().map(|&o| (o, run_origin(data, config, o))).collect();

    let mut records = Vec::new();
    let mut d_stats = Vec::new();
    let mut failed_origins = Vec::new();
    for (o, r) in results {
        match r {
            Ok(r) => {
                records.extend(r.records);
                d_stats.extend(r.d_stats);
            }
            Err(e) => failed_origins.push((o, e.to_string())),
        }
    }
    if records.is_empty() {
        return Err(Error::Experiment(format!(
            "every origin failed; first: {}",
            failed_origins.first().map(|f| f.1.as_str()).unwrap_or("none")
        )));
    }
    records.sort_by(|a, b| (a.origin, a.unit, &a.method).cmp(&(b.origin, b.unit, &b.method)));

    let names: Vec<String> = config.methods.iter().map(|m| m.name().to_string()).collect();
    let ev = evaluate_records(
        &records,
        Some(&d_stats),
        config.benchmark.name(),
        &names,
        config.conditioning_c,
        config.hac_lags,
    )?;
    Ok(RollingOutput {
        records,
        d_stats,
        failed_origins,
        reports: ev.reports,
        dm_panel: ev.dm_panel,
        dm_units: ev.dm_units,
        zero_sd: ev.zero_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(t: usize) -> PanelDataset {
        PanelDataset::from_fn(
            3,
            t,
            1,
            |i, t| 0.5 * i as f64 + ((t * 7 + i * 3) % 5) as f64 * 0.3 + (t as f64 * 0.9).sin(),
            |i, t, _| (t as f64 * 0.9).sin() + 0.1 * i as f64 + ((t * 3 + i) % 4) as f64 * 0.2,
        )
        .unwrap()
    }

    #[test]
    fn boundary_gives_two_origins() {
        let cfg = RollingConfig {
            window: 8,
            methods: vec![Method::Individual, Method::Pooled],
            hac_lags: Some(0),
            ..RollingConfig::default()
        };
        let out = run_rolling(&toy(10), &cfg).unwrap();
        let mut origins: Vec<usize> = out.records.iter().map(|r| r.origin).collect();
        origins.dedup();
        assert_eq!(origins, vec![8, 9]);
    }

    #[test]
    fn self_benchmark_is_one() {
        let cfg = RollingConfig {
            window: 8,
            methods: vec![Method::Individual],
            hac_lags: Some(0),
            ..RollingConfig::default()
        };
        let out = run_rolling(&toy(12), &cfg).unwrap();
        assert_eq!(out.reports[0].rmsfe["individual"], 1.0);
    }

    #[test]
    fn too_short_panel_rejected() {
        let cfg = RollingConfig {
            window: 8,
            ..RollingConfig::default()
        };
        assert!(run_rolling(&toy(9), &cfg).is_err());
    }

    #[test]
    fn benchmark_must_be_listed() {
        let cfg = RollingConfig {
            window: 8,
            methods: vec![Method::Pooled],
            ..RollingConfig::default()
        };
        assert!(cfg.validate(&toy(12)).is_err());
    }
}
