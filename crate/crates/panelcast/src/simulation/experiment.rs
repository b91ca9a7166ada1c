use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate_panel_with_rng, DgpSpec, KappaRule};
use crate::error::{Error, Result};
use crate::methods::{forecast_methods_multi, EngineOptions, Method, OracleInputs};
use crate::shrinkage::GibbsConfig;

/// Largest tolerated share of failed replications in a cell.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub name: String,
    pub dgp: DgpSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub cells: Vec<ExperimentCell>,
    pub methods: Vec<Method>,
    pub kappas: Vec<KappaRule>,
    pub n_reps: usize,
    pub seed: u64,
    /// Iteration counts and hyperpriors for HB methods; the seed is replaced
    /// per replication.
    pub gibbs: GibbsConfig,
}

impl ExperimentConfig {
    pub fn new(cells: Vec<ExperimentCell>, methods: Vec<Method>, n_reps: usize, seed: u64) -> Self {
        Self {
            cells,
            methods,
            kappas: KappaRule::ALL.to_vec(),
            n_reps,
            seed,
            gibbs: GibbsConfig::default(),
        }
    }
}

/// Sum over units of squared forecast errors, per kappa rule and method.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationLosses {
    pub rep: usize,
    pub sse: BTreeMap<(KappaRule, Method), f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub name: String,
    pub n_reps: usize,
    pub failures: usize,
    pub failed: bool,
    pub first_error: Option<String>,
    /// Totals over successful replications.
    pub sse: BTreeMap<(KappaRule, Method), f64>,
    /// `sse` relative to the individual benchmark.
    pub rmsfe: BTreeMap<(KappaRule, Method), f64>,
    pub replications: Vec<ReplicationLosses>,
}

impl CellResult {
    pub fn rmsfe(&self, kappa: KappaRule, method: Method) -> Option<f64> {
        self.rmsfe.get(&(kappa, method)).copied()
    }
}

/// Replication RNG: the master seed is mixed with the cell index, the
/// replication selects a ChaCha stream, so adding replications or cells never
/// disturbs existing ones.
pub fn replication_rng(seed: u64, cell: usize, rep: usize) -> ChaCha8Rng {
    let mixed = seed ^ (cell as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    rng.set_stream(rep as u64);
    rng
}

fn method_list(methods: &[Method]) -> Vec<Method> {
    let mut out = vec![Method::Individual];
    out.extend(methods.iter().copied().filter(|m| *m != Method::Individual));
    out
}

pub fn run_replication(
    dgp: &DgpSpec,
    methods: &[Method],
    kappas: &[KappaRule],
    gibbs: &GibbsConfig,
    mut rng: ChaCha8Rng,
    rep: usize,
) -> Result<ReplicationLosses> {
    let sim = generate_panel_with_rng(dgp, &mut rng)?;
    let methods = method_list(methods);
    let mut opts = EngineOptions {
        gibbs: gibbs.clone(),
        oracle: None,
    };
    opts.gibbs.seed = rng.random();
    if methods.contains(&Method::OraclePooled) {
        opts.oracle = Some(OracleInputs {
            theta: sim.truth.iter().map(|u| u.theta()).collect(),
            sigma2: sim.truth.iter().map(|u| u.sigma2).collect(),
        });
    }
    let (targets, actuals): (Vec<_>, Vec<_>) = kappas.iter().map(|&k| sim.target_for(k)).unzip();
    let sets = forecast_methods_multi(&sim.data, &targets, &methods, &opts)?;
    let mut sse = BTreeMap::new();
    for ((&kappa, set), y) in kappas.iter().zip(&sets).zip(&actuals) {
        for &m in &methods {
            let f = set
                .get(m)
                .ok_or_else(|| Error::Experiment(format!("method {m} produced no forecasts")))?;
            let s: f64 = f.iter().zip(y).map(|(f, y)| (y - f).powi(2)).sum();
            if !s.is_finite() {
                return Err(Error::Experiment(format!("non-finite loss for {m}")));
            }
            sse.insert((kappa, m), s);
        }
    }
    Ok(ReplicationLosses { rep, sse })
}

pub fn run_cell(cell_index: usize, cell: &ExperimentCell, config: &ExperimentConfig) -> Result<CellResult> {
    cell.dgp.validate()?;
    let outcomes: Vec<Result<ReplicationLosses>> = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| {
            run_replication(
                &cell.dgp,
                &config.methods,
                &config.kappas,
                &config.gibbs,
                replication_rng(config.seed, cell_index, rep),
                rep,
            )
        })
        .collect();

    let mut failures = 0;
    let mut first_error = None;
    let mut replications = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            Ok(r) => replications.push(r),
            Err(e) => {
                failures += 1;
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    let mut sse: BTreeMap<(KappaRule, Method), f64> = BTreeMap::new();
    for r in &replications {
        for (k, v) in &r.sse {
            *sse.entry(*k).or_default() += v;
        }
    }
    let rmsfe = sse
        .iter()
        .filter_map(|(&(kappa, m), v)| {
            let b = sse.get(&(kappa, Method::Individual))?;
            Some(((kappa, m), v / b))
        })
        .collect();
    let failed = config.n_reps == 0 || failures as f64 > MAX_FAILURE_RATE * config.n_reps as f64;
    Ok(CellResult {
        name: cell.name.clone(),
        n_reps: config.n_reps,
        failures,
        failed,
        first_error,
        sse,
        rmsfe,
        replications,
    })
}

/// Runs every cell; replications within a cell run in parallel and are
/// reduced in replication order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    if config.methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    if config.kappas.is_empty() {
        return Err(Error::Config("no kappa rule requested".into()));
    }
    config
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| run_cell(i, c, config))
        .collect()
}
