//! `panelcast` command-line interface.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{load_config, load_spatial, parse_methods, ForecastConfig, KappaChoice, SimulateConfig};
use super::csv_io::{ingest_csv, read_dstats, read_records, CsvSchema};
use super::output::{fmt_num, sha256_hex, Manifest, OutputSet, Table};
use super::rolling::{evaluate_records, run_rolling, DmUnitSummary, RollingConfig};
use super::spatial::build_spatial_regressors;
use crate::error::{Error, Result};
use crate::evaluation::{
    default_grid, density_curve, msfe_report, DmResult, EvaluationReport, Subset, DEFAULT_BANDWIDTH,
};
use crate::methods::Method;
use crate::panel::PanelDataset;
use crate::shrinkage::GibbsConfig;
use crate::simulation::{ar1_delta, expected_pr2, run_experiment, CellResult, DgpSpec, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "panelcast", version, about = "Forecasting with heterogeneous panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo grid and report rMSFE per cell, kappa rule and method.
    Simulate(SimulateArgs),
    /// Rolling-window forecasts on a CSV panel with full evaluation.
    Forecast(ForecastArgs),
    /// Evaluate a forecast record file written by `forecast`.
    Evaluate(EvaluateArgs),
    /// Correlated-heterogeneity moments of the uniform-slope AR(1) panel.
    Ar1Table(Ar1Args),
    /// Expected pooled R-squared of the three Monte Carlo settings.
    Pr2Table(OutArgs),
    /// Kernel densities of unit MSFE ratios against the benchmark.
    Density(DensityArgs),
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output directory; tables go to standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated method names.
    #[arg(long)]
    methods: Option<String>,
    /// 0, pm1 or all.
    #[arg(long)]
    kappa: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct ForecastArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Panel CSV, used when no config is given.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Lag directive for `--input`, e.g. `y=1` or `y=1;x=1`.
    #[arg(long, default_value = "y=1")]
    lags: String,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long = "hac-lags")]
    hac_lags: Option<usize>,
    /// Seed for the Gibbs sampler.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Record file with columns unit,origin,method,forecast,actual.
    #[arg(long)]
    input: PathBuf,
    /// Optional d-statistics file for the conditioning subsets.
    #[arg(long)]
    dstats: Option<PathBuf>,
    #[arg(long, default_value = "individual")]
    benchmark: String,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    c: f64,
    #[arg(long = "hac-lags")]
    hac_lags: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct Ar1Args {
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct DensityArgs {
    /// Record file with columns unit,origin,method,forecast,actual.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "individual")]
    benchmark: String,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
    bandwidth: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[command(flatten)]
    out: OutArgs,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on runtime errors, 2 on usage errors.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Forecast(a) => forecast(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Ar1Table(a) => ar1_table(a),
        Command::Pr2Table(a) => pr2_table(a),
        Command::Density(a) => density(a),
    }
}

/// Writes tables to `out`, or prints the first one to stdout.
fn emit(out: &OutArgs, tables: Vec<(String, Table)>, manifest: Manifest) -> Result<()> {
    match &out.out {
        Some(dir) => {
            let mut set = OutputSet::new(dir);
            for (name, t) in tables {
                set.add(&name, t);
            }
            set.write(manifest)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if let Some((_, t)) = tables.into_iter().next() {
                stdout.write_all(t.to_csv()?.as_bytes())?;
            }
        }
    }
    Ok(())
}

fn method_names(s: &str) -> Result<Vec<Method>> {
    Method::parse_list(s)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = load_config::<SimulateConfig>(&a.config)?;
    let c = &cfg.value;
    let seed = a.seed.or(c.seed).unwrap_or(0);
    let reps = a.reps.or(c.reps).unwrap_or(1000);
    let methods = match (&a.methods, &c.methods) {
        (Some(m), _) => method_names(m)?,
        (None, Some(m)) => parse_methods(m)?,
        (None, None) => Method::STANDARD.to_vec(),
    };
    let kappa = KappaChoice::parse(a.kappa.as_deref().or(c.kappa.as_deref()).unwrap_or("all"))?;
    let cells = c.cell.iter().map(|cc| cc.to_cell()).collect::<Result<Vec<_>>>()?;
    if cells.is_empty() {
        return Err(Error::Config("no [[cell]] tables".into()));
    }
    let mut exp = ExperimentConfig::new(cells, methods.clone(), reps, seed);
    exp.kappas = kappa.rules();
    exp.gibbs = c.gibbs.apply(GibbsConfig::default());
    let results = run_experiment(&exp)?;

    let mut rmsfe = Table::new(&["cell", "kappa", "method", "rmsfe", "msfe"]);
    let mut cells_t = Table::new(&[
        "cell",
        "n_units",
        "n_periods",
        "reps",
        "failures",
        "failed",
        "first_error",
    ]);
    for (r, cell) in results.iter().zip(&exp.cells) {
        let ok = (r.n_reps - r.failures).max(1) as f64 * cell.dgp.n_units as f64;
        for ((k, m), v) in &r.rmsfe {
            rmsfe.push(vec![
                r.name.clone(),
                k.name().into(),
                m.name().into(),
                fmt_num(*v),
                fmt_num(r.sse[&(*k, *m)] / ok),
            ]);
        }
        cells_t.push(vec![
            r.name.clone(),
            cell.dgp.n_units.to_string(),
            cell.dgp.n_periods.to_string(),
            r.n_reps.to_string(),
            r.failures.to_string(),
            r.failed.to_string(),
            r.first_error.clone().unwrap_or_default(),
        ]);
    }
    let mut manifest = Manifest::new("simulate");
    manifest.seed = Some(seed);
    manifest.config_sha256 = Some(sha256_hex(cfg.text.as_bytes()));
    manifest.settings = BTreeMap::from([
        ("reps".into(), reps.to_string()),
        ("methods".into(), names_joined(&methods)),
        (
            "kappa".into(),
            exp.kappas.iter().map(|k| k.name()).collect::<Vec<_>>().join(","),
        ),
    ]);
    emit(
        &a.out,
        vec![("rmsfe.csv".into(), rmsfe), ("cells.csv".into(), cells_t)],
        manifest,
    )?;
    report_failed_cells(&results)
}

fn report_failed_cells(results: &[CellResult]) -> Result<()> {
    let failed: Vec<String> = results
        .iter()
        .filter(|r| r.failed)
        .map(|r| {
            format!(
                "{} ({} of {} failed: {})",
                r.name,
                r.failures,
                r.n_reps,
                r.first_error.as_deref().unwrap_or("")
            )
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Experiment(format!("cells failed: {}", failed.join("; "))))
    }
}

fn names_joined(methods: &[Method]) -> String {
    methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")
}

struct PreparedPanel {
    data: PanelDataset,
    dropped: Vec<String>,
}

fn forecast(a: ForecastArgs) -> Result<()> {
    let loaded = a.config.as_deref().map(load_config::<ForecastConfig>).transpose()?;
    let mut rc = RollingConfig::default();
    let mut manifest = Manifest::new("forecast");
    let prepared = match &loaded {
        Some(cfg) => {
            let c = &cfg.value;
            manifest.config_sha256 = Some(sha256_hex(cfg.text.as_bytes()));
            let raw = ingest_csv(&cfg.resolve(&c.data.path), &c.data.schema())?;
            let r = &c.rolling;
            if let Some(v) = r.window {
                rc.window = v;
            }
            if let Some(m) = &r.methods {
                rc.methods = parse_methods(m)?;
            }
            if let Some(b) = &r.benchmark {
                rc.benchmark = b.parse()?;
            }
            rc.hac_lags = r.hac_lags;
            if let Some(v) = r.c {
                rc.conditioning_c = v;
            }
            if let Some(s) = r.seed {
                rc.gibbs.seed = s;
            }
            rc.gibbs = c.gibbs.apply(rc.gibbs.clone());
            match &c.spatial {
                Some(s) => {
                    let units: Vec<String> = (0..raw.n_units()).map(|i| raw.unit_label(i)).collect();
                    let spec = load_spatial(s, &units, |p| cfg.resolve(p))?;
                    let sp = build_spatial_regressors(&raw, &spec)?;
                    PreparedPanel {
                        data: sp.data,
                        dropped: sp.dropped,
                    }
                }
                None => PreparedPanel {
                    data: raw,
                    dropped: Vec::new(),
                },
            }
        }
        None => {
            let input = a
                .input
                .as_deref()
                .ok_or_else(|| Error::Config("forecast needs --config or --input".into()))?;
            let schema = CsvSchema::parse_directive(&a.lags)?;
            manifest
                .settings
                .insert("input_sha256".into(), sha256_hex(&std::fs::read(input)?));
            PreparedPanel {
                data: ingest_csv(input, &schema)?,
                dropped: Vec::new(),
            }
        }
    };
    if let Some(v) = a.window {
        rc.window = v;
    }
    if let Some(m) = &a.methods {
        rc.methods = method_names(m)?;
    }
    if let Some(b) = &a.benchmark {
        rc.benchmark = b.parse()?;
    }
    if a.hac_lags.is_some() {
        rc.hac_lags = a.hac_lags;
    }
    if let Some(s) = a.seed {
        rc.gibbs.seed = s;
    }
    if !rc.methods.contains(&rc.benchmark) {
        rc.methods.insert(0, rc.benchmark);
    }
    let data = &prepared.data;
    data.ensure_valid()?;
    let out = run_rolling(data, &rc)?;

    let period = |o: usize| {
        data.period_labels()
            .map(|p| p[o].clone())
            .unwrap_or_else(|| o.to_string())
    };
    let mut records = Table::new(&["unit", "unit_id", "origin", "period", "method", "forecast", "actual"]);
    for r in &out.records {
        records.push(vec![
            r.unit.to_string(),
            data.unit_label(r.unit),
            r.origin.to_string(),
            period(r.origin),
            r.method.clone(),
            fmt_num(r.forecast),
            fmt_num(r.actual),
        ]);
    }
    let mut dstats = Table::new(&["unit", "origin", "d", "mean", "sd"]);
    for d in &out.d_stats {
        dstats.push(vec![
            d.unit.to_string(),
            d.origin.to_string(),
            fmt_num(d.d),
            fmt_num(d.mean),
            fmt_num(d.sd),
        ]);
    }
    let mut failed = Table::new(&["origin", "error"]);
    for (o, e) in &out.failed_origins {
        failed.push(vec![o.to_string(), e.clone()]);
    }
    let mut dropped = Table::new(&["unit_id"]);
    for u in &prepared.dropped {
        dropped.push(vec![u.clone()]);
    }

    manifest.seed = Some(rc.gibbs.seed);
    manifest.settings.extend([
        ("window".to_string(), rc.window.to_string()),
        ("methods".to_string(), names_joined(&rc.methods)),
        ("benchmark".to_string(), rc.benchmark.name().to_string()),
        (
            "hac_lags".to_string(),
            rc.hac_lags.map(|v| v.to_string()).unwrap_or_else(|| "auto".into()),
        ),
        ("c".to_string(), fmt_num(rc.conditioning_c)),
    ]);
    let mut tables = report_tables(&out.reports);
    tables.push(("dm_panel.csv".into(), dm_panel_table(&out.dm_panel)));
    tables.push(("dm_units.csv".into(), dm_units_table(&out.dm_units)));
    tables.push(("records.csv".into(), records));
    tables.push(("dstats.csv".into(), dstats));
    tables.push(("failed_origins.csv".into(), failed));
    tables.push(("dropped_units.csv".into(), dropped));
    emit(&a.out, tables, manifest)
}

fn report_tables(reports: &[EvaluationReport]) -> Vec<(String, Table)> {
    reports
        .iter()
        .map(|r| {
            let mut t = Table::new(&[
                "method",
                "avg_msfe",
                "rmsfe",
                "beat_freq",
                "best_freq",
                "worst_freq",
                "n_units",
                "n_obs",
            ]);
            for m in &r.methods {
                let avg = r.msfe[m].iter().sum::<f64>() / r.units.len() as f64;
                t.push(vec![
                    m.clone(),
                    fmt_num(avg),
                    fmt_num(r.rmsfe[m]),
                    fmt_num(r.beat_freq[m]),
                    fmt_num(r.best_freq[m]),
                    fmt_num(r.worst_freq[m]),
                    r.units.len().to_string(),
                    r.n_obs.to_string(),
                ]);
            }
            (format!("report_{}.csv", r.subset.name()), t)
        })
        .collect()
}

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_else(|| "NA".into())
}

fn dm_panel_table(rows: &[DmResult]) -> Table {
    let mut t = Table::new(&[
        "method",
        "benchmark",
        "statistic",
        "mean_diff",
        "long_run_variance",
        "hac_lags",
        "n_obs",
    ]);
    for r in rows {
        t.push(vec![
            r.comparison.0.clone(),
            r.comparison.1.clone(),
            opt_num(r.statistic),
            fmt_num(r.mean_diff),
            fmt_num(r.long_run_variance),
            r.hac_lags.to_string(),
            r.n_obs.to_string(),
        ]);
    }
    t
}

fn dm_units_table(rows: &[DmUnitSummary]) -> Table {
    let mut t = Table::new(&["method", "negative", "positive", "insignificant", "degenerate"]);
    for r in rows {
        t.push(vec![
            r.method.clone(),
            r.negative.to_string(),
            r.positive.to_string(),
            r.insignificant.to_string(),
            r.degenerate.to_string(),
        ]);
    }
    t
}

fn record_methods(records: &[crate::evaluation::ForecastRecord], list: Option<&str>) -> Vec<String> {
    match list {
        Some(s) => s
            .split(',')
            .map(|m| m.trim().to_string())
            .filter(|m| !m.is_empty())
            .collect(),
        None => {
            let mut m: Vec<String> = records.iter().map(|r| r.method.clone()).collect();
            m.sort();
            m.dedup();
            m
        }
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let records = read_records(&a.input)?;
    let d = a.dstats.as_deref().map(read_dstats).transpose()?;
    let methods = record_methods(&records, a.methods.as_deref());
    let ev = evaluate_records(&records, d.as_deref(), &a.benchmark, &methods, a.c, a.hac_lags)?;
    let mut manifest = Manifest::new("evaluate");
    manifest.settings = BTreeMap::from([
        ("input_sha256".into(), sha256_hex(&std::fs::read(&a.input)?)),
        ("benchmark".into(), a.benchmark.clone()),
        ("c".into(), fmt_num(a.c)),
    ]);
    let mut tables = report_tables(&ev.reports);
    tables.push(("dm_panel.csv".into(), dm_panel_table(&ev.dm_panel)));
    tables.push(("dm_units.csv".into(), dm_units_table(&ev.dm_units)));
    emit(&a.out, tables, manifest)
}

/// Slope means of the AR(1) table, with `a = sigma^2 = 1`.
pub const AR1_BETA0: [f64; 4] = [0.3, 0.45, 0.49, 0.4999];

fn ar1_table(a: Ar1Args) -> Result<()> {
    let mut t = Table::new(&["beta0", "e_y2eta", "delta_ar", "e_inv", "mc_delta_ar"]);
    for b in AR1_BETA0 {
        let r = ar1_delta(b, 1.0, 1.0, a.draws, a.seed)?;
        t.push(vec![
            fmt_num(b),
            format!("{:.3}", r.e_y2eta),
            format!("{:.3}", r.delta_ar),
            fmt_num(r.e_inv),
            fmt_num(r.mc_check.delta_ar),
        ]);
    }
    let mut manifest = Manifest::new("ar1-table");
    manifest.seed = Some(a.seed);
    manifest.settings.insert("draws".into(), a.draws.to_string());
    emit(&a.out, vec![("ar1_table.csv".into(), t)], manifest)
}

/// `(a_beta, beta0)` rows of the PR-squared calibration.
pub const PR2_ROWS: [(usize, f64, f64); 3] = [(1, 0.0, 0.775), (2, 0.5, 0.688), (3, 1.0, 0.486)];

fn pr2_table(a: OutArgs) -> Result<()> {
    let mut t = Table::new(&["a_beta", "beta0", "pr2_rho0", "pr2_rho05"]);
    for (setting, ab, b0) in PR2_ROWS {
        let v = |rho: f64| -> Result<f64> { expected_pr2(&DgpSpec::setting(setting, 1, 2, rho)?) };
        t.push(vec![
            fmt_num(ab),
            fmt_num(b0),
            format!("{:.3}", v(0.0)?),
            format!("{:.3}", v(0.5)?),
        ]);
    }
    emit(&a, vec![("pr2_table.csv".into(), t)], Manifest::new("pr2-table"))
}

fn density(a: DensityArgs) -> Result<()> {
    let records = read_records(&a.input)?;
    let mut methods = record_methods(&records, a.methods.as_deref());
    methods.retain(|m| m != &a.benchmark);
    let report = msfe_report(&records, &a.benchmark, &methods, Subset::All)?;
    let bench = &report.msfe[&a.benchmark];
    let mut t = Table::new(&["method", "grid", "density"]);
    for m in &methods {
        let ratios: Vec<f64> = report.msfe[m].iter().zip(bench).map(|(v, b)| v / b).collect();
        let grid = default_grid(&ratios, a.bandwidth, a.points);
        for (g, d) in density_curve(&ratios, a.bandwidth, &grid)? {
            t.push(vec![m.clone(), fmt_num(g), fmt_num(d)]);
        }
    }
    let mut manifest = Manifest::new("density");
    manifest.settings = BTreeMap::from([
        ("bandwidth".into(), fmt_num(a.bandwidth)),
        ("points".into(), a.points.to_string()),
        ("benchmark".into(), a.benchmark.clone()),
    ]);
    emit(&a.out, vec![("density.csv".into(), t)], manifest)
}
