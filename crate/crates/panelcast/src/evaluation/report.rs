use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub unit: usize,
    pub origin: usize,
    pub method: String,
    pub forecast: f64,
    pub actual: f64,
}

impl ForecastRecord {
    pub fn error(&self) -> f64 {
        self.actual - self.forecast
    }

    pub fn loss(&self) -> f64 {
        self.error().powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    All,
    NearMean,
    OneSdAway,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::All, Subset::NearMean, Subset::OneSdAway];

    pub fn name(self) -> &'static str {
        match self {
            Subset::All => "all",
            Subset::NearMean => "near_mean",
            Subset::OneSdAway => "one_sd",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub subset: Subset,
    pub benchmark: String,
    /// Method names in lexicographic order, benchmark included.
    pub methods: Vec<String>,
    /// Units with at least one record, ascending.
    pub units: Vec<usize>,
    /// Per-method MSFE aligned with `units`.
    pub msfe: BTreeMap<String, Vec<f64>>,
    pub rmsfe: BTreeMap<String, f64>,
    pub beat_freq: BTreeMap<String, f64>,
    pub best_freq: BTreeMap<String, f64>,
    pub worst_freq: BTreeMap<String, f64>,
    pub n_obs: usize,
}

/// Per-unit MSFE, rMSFE against `benchmark` and beat/best/worst shares.
///
/// Every `(unit, origin)` present must carry a record for every method.
/// Ties in best/worst go to the lexicographically first method name.
pub fn msfe_report(
    records: &[ForecastRecord],
    benchmark: &str,
    methods: &[String],
    subset: Subset,
) -> Result<EvaluationReport> {
    let mut names: BTreeSet<String> = methods.iter().cloned().collect();
    names.insert(benchmark.to_string());
    let names: Vec<String> = names.into_iter().collect();

    let mut cells: BTreeMap<(usize, usize), BTreeMap<&str, f64>> = BTreeMap::new();
    for r in records {
        if !names.iter().any(|m| m == &r.method) {
            continue;
        }
        if !r.forecast.is_finite() || !r.actual.is_finite() {
            return Err(Error::Misaligned(format!(
                "non-finite record for unit {} origin {} method {}",
                r.unit, r.origin, r.method
            )));
        }
        let cell = cells.entry((r.unit, r.origin)).or_default();
        if cell.insert(r.method.as_str(), r.loss()).is_some() {
            return Err(Error::Misaligned(format!(
                "duplicate record for unit {} origin {} method {}",
                r.unit, r.origin, r.method
            )));
        }
    }
    if cells.is_empty() {
        return Err(Error::Misaligned("no records for the requested methods".into()));
    }
    for ((u, o), cell) in &cells {
        if cell.len() != names.len() {
            let missing: Vec<&str> = names
                .iter()
                .filter(|m| !cell.contains_key(m.as_str()))
                .map(|m| m.as_str())
                .collect();
            return Err(Error::Misaligned(format!(
                "unit {u} origin {o} lacks methods {}",
                missing.join(",")
            )));
        }
    }

    let mut per_unit: BTreeMap<usize, (usize, Vec<f64>)> = BTreeMap::new();
    for ((u, _), cell) in &cells {
        let entry = per_unit.entry(*u).or_insert_with(|| (0, vec![0.0; names.len()]));
        entry.0 += 1;
        for (j, m) in names.iter().enumerate() {
            entry.1[j] += cell[m.as_str()];
        }
    }
    let units: Vec<usize> = per_unit.keys().cloned().collect();
    let mut msfe: BTreeMap<String, Vec<f64>> = names.iter().map(|m| (m.clone(), Vec::new())).collect();
    for (count, sums) in per_unit.values() {
        for (j, m) in names.iter().enumerate() {
            msfe.get_mut(m).unwrap().push(sums[j] / *count as f64);
        }
    }

    let nu = units.len() as f64;
    let bench = &msfe[benchmark];
    let bench_mean = bench.iter().sum::<f64>() / nu;
    let mut rmsfe = BTreeMap::new();
    let mut beat_freq = BTreeMap::new();
    let mut best_freq: BTreeMap<String, f64> = names.iter().map(|m| (m.clone(), 0.0)).collect();
    let mut worst_freq = best_freq.clone();
    for m in &names {
        let v = &msfe[m];
        let mean = v.iter().sum::<f64>() / nu;
        rmsfe.insert(m.clone(), if m == benchmark { 1.0 } else { mean / bench_mean });
        let beats = v.iter().zip(bench).filter(|(a, b)| a < b).count();
        beat_freq.insert(m.clone(), beats as f64 / nu);
    }
    for u in 0..units.len() {
        let (mut best, mut worst) = (0usize, 0usize);
        for j in 1..names.len() {
            let v = msfe[&names[j]][u];
            if v < msfe[&names[best]][u] {
                best = j;
            }
            if v > msfe[&names[worst]][u] {
                worst = j;
            }
        }
        *best_freq.get_mut(&names[best]).unwrap() += 1.0 / nu;
        *worst_freq.get_mut(&names[worst]).unwrap() += 1.0 / nu;
    }

    Ok(EvaluationReport {
        subset,
        benchmark: benchmark.to_string(),
        methods: names,
        units,
        msfe,
        rmsfe,
        beat_freq,
        best_freq,
        worst_freq,
        n_obs: cells.len(),
    })
}
