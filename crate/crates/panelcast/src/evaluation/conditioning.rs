use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ForecastRecord;
use crate::error::{Error, Result};

/// Predicted value `d = theta_i'w` for one `(unit, origin)` with the mean and
/// standard deviation of `d` over that origin's estimation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DStat {
    pub unit: usize,
    pub origin: usize,
    pub d: f64,
    pub mean: f64,
    pub sd: f64,
}

pub const KAPPA_ZERO: &[f64] = &[0.0];
pub const KAPPA_ONE_SD: &[f64] = &[1.0, -1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub records: Vec<ForecastRecord>,
    /// `(unit, origin)` pairs dropped because `sd` was zero.
    pub zero_sd: Vec<(usize, usize)>,
}

/// `|d - mean - kappa * sd| < c * sd`.
pub fn in_band(d: f64, mean: f64, sd: f64, kappa: f64, c: f64) -> bool {
    (d - mean - kappa * sd).abs() < c * sd
}

/// Keeps records whose `(unit, origin)` lies in the band for any of `kappas`.
pub fn conditioning_filter(
    records: &[ForecastRecord],
    d_stats: &[DStat],
    kappas: &[f64],
    c: f64,
) -> Result<FilterOutcome> {
    let index: BTreeMap<(usize, usize), &DStat> = d_stats.iter().map(|s| ((s.unit, s.origin), s)).collect();
    let mut zero_sd: Vec<(usize, usize)> = d_stats
        .iter()
        .filter(|s| !(s.sd > 0.0))
        .map(|s| (s.unit, s.origin))
        .collect();
    zero_sd.sort_unstable();
    let mut kept = Vec::new();
    for r in records {
        let s = index
            .get(&(r.unit, r.origin))
            .ok_or_else(|| Error::Misaligned(format!("no d statistic for unit {} origin {}", r.unit, r.origin)))?;
        if !(s.sd > 0.0) {
            continue;
        }
        if kappas.iter().any(|&k| in_band(s.d, s.mean, s.sd, k, c)) {
            kept.push(r.clone());
        }
    }
    Ok(FilterOutcome { records: kept, zero_sd })
}
