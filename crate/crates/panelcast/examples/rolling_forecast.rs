//! Rolling-window evaluation on the bundled CSV panel: rMSFE tables for the
//! full sample and the conditioned subsets, plus DM tests.

use std::path::Path;

use panelcast::app::csv_io::{ingest_csv, CsvSchema};
use panelcast::app::rolling::{run_rolling, RollingConfig};
use panelcast::Method;

fn main() -> panelcast::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/panel.csv");
    let data = ingest_csv(&path, &CsvSchema::y_lag(1))?;
    let config = RollingConfig {
        window: 30,
        methods: vec![
            Method::Individual,
            Method::Pooled,
            Method::FixedEffects,
            Method::CombPooled,
            Method::EmpiricalBayes,
        ],
        conditioning_c: 0.5,
        ..RollingConfig::default()
    };
    let out = run_rolling(&data, &config)?;
    println!(
        "{} records, {} failed origins",
        out.records.len(),
        out.failed_origins.len()
    );
    for rep in &out.reports {
        let cells: Vec<String> = rep.rmsfe.iter().map(|(m, v)| format!("{m}={v:.3}")).collect();
        println!("{:<10} n={:<4} {}", rep.subset.name(), rep.n_obs, cells.join(" "));
    }
    for dm in &out.dm_panel {
        let stat = dm.statistic.map_or("degenerate".to_string(), |s| format!("{s:.3}"));
        println!("DM {} vs {}: {stat}", dm.comparison.0, dm.comparison.1);
    }
    Ok(())
}
