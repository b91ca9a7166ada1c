use std::collections::BTreeMap;

use serde::Serialize;

use super::ForecastRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DmScope {
    Panel,
    Unit(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmResult {
    /// `None` when the long-run variance vanishes.
    pub statistic: Option<f64>,
    pub mean_diff: f64,
    pub long_run_variance: f64,
    pub comparison: (String, String),
    pub scope: DmScope,
    pub hac_lags: usize,
    pub n_obs: usize,
}

impl DmResult {
    pub fn degenerate(&self) -> bool {
        self.statistic.is_none()
    }
}

/// `floor(4 (n/100)^(2/9))`.
pub fn default_hac_lags(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Bartlett-kernel Newey-West long-run variance with `1/n` autocovariances.
pub fn newey_west_lrv(d: &[f64], lags: usize) -> f64 {
    let n = d.len();
    let mean = d.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = d.iter().map(|v| v - mean).collect();
    let gamma = |l: usize| -> f64 { (l..n).map(|t| dev[t] * dev[t - l]).sum::<f64>() / n as f64 };
    let mut lrv = gamma(0);
    for l in 1..=lags.min(n.saturating_sub(1)) {
        lrv += 2.0 * (1.0 - l as f64 / (lags as f64 + 1.0)) * gamma(l);
    }
    lrv
}

fn dm_core(loss_a: &[f64], loss_b: &[f64], hac_lags: Option<usize>) -> Result<(Option<f64>, f64, f64, usize, usize)> {
    if loss_a.len() != loss_b.len() {
        return Err(Error::Misaligned("loss series differ in length".into()));
    }
    let n = loss_a.len();
    let lags = hac_lags.unwrap_or_else(|| default_hac_lags(n));
    if n < lags + 2 {
        return Err(Error::Domain(format!("{n} observations too few for {lags} HAC lags")));
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let mean_sq = d.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let lrv = newey_west_lrv(&d, lags);
    let stat = if lrv <= 0.0 || lrv <= 1e-14 * mean_sq || !lrv.is_finite() {
        None
    } else {
        Some(mean / (lrv / n as f64).sqrt())
    };
    Ok((stat, mean, lrv, lags, n))
}

/// DM statistic on `d_t = loss_a - loss_b`; negative values favour `a`.
pub fn dm_test_unit(loss_a: &[f64], loss_b: &[f64], hac_lags: Option<usize>) -> Result<DmResult> {
    let (statistic, mean_diff, long_run_variance, hac_lags, n_obs) = dm_core(loss_a, loss_b, hac_lags)?;
    Ok(DmResult {
        statistic,
        mean_diff,
        long_run_variance,
        comparison: ("a".into(), "b".into()),
        scope: DmScope::Unit(0),
        hac_lags,
        n_obs,
    })
}

fn losses_by_origin(records: &[ForecastRecord], method: &str, unit: Option<usize>) -> BTreeMap<usize, Vec<f64>> {
    let mut out: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for r in records {
        if r.method == method && unit.is_none_or(|u| u == r.unit) {
            out.entry(r.origin).or_default().push((r.unit, r.loss()));
        }
    }
    out.into_iter()
        .map(|(o, mut v)| {
            v.sort_by_key(|p| p.0);
            (o, v.into_iter().map(|p| p.1).collect())
        })
        .collect()
}

fn aligned_series(
    records: &[ForecastRecord],
    method: &str,
    benchmark: &str,
    unit: Option<usize>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = losses_by_origin(records, method, unit);
    let b = losses_by_origin(records, benchmark, unit);
    if a.keys().ne(b.keys()) {
        return Err(Error::Misaligned(format!(
            "{method} and {benchmark} cover different origins"
        )));
    }
    let mut sa = Vec::with_capacity(a.len());
    let mut sb = Vec::with_capacity(b.len());
    for (o, la) in &a {
        let lb = &b[o];
        if la.len() != lb.len() {
            return Err(Error::Misaligned(format!("origin {o} has unequal unit counts")));
        }
        sa.push(la.iter().sum::<f64>() / la.len() as f64);
        sb.push(lb.iter().sum::<f64>() / lb.len() as f64);
    }
    Ok((sa, sb))
}

pub fn dm_test_unit_records(
    records: &[ForecastRecord],
    unit: usize,
    method: &str,
    benchmark: &str,
    hac_lags: Option<usize>,
) -> Result<DmResult> {
    let (a, b) = aligned_series(records, method, benchmark, Some(unit))?;
    let mut r = dm_test_unit(&a, &b, hac_lags)?;
    r.comparison = (method.into(), benchmark.into());
    r.scope = DmScope::Unit(unit);
    Ok(r)
}

/// Averages squared errors across units at each origin, then applies the
/// unit test to the averaged series.
pub fn dm_test_panel(
    records: &[ForecastRecord],
    method: &str,
    benchmark: &str,
    hac_lags: Option<usize>,
) -> Result<DmResult> {
    let (a, b) = aligned_series(records, method, benchmark, None)?;
    let mut r = dm_test_unit(&a, &b, hac_lags)?;
    r.comparison = (method.into(), benchmark.into());
    r.scope = DmScope::Panel;
    Ok(r)
}
