//! Adds lagged neighbour, region and country averages to the bundled panel
//! and runs a short rolling evaluation on the augmented design.

use std::path::Path;

use panelcast::app::config::{load_spatial, SpatialSection};
use panelcast::app::csv_io::{ingest_csv, CsvSchema};
use panelcast::app::rolling::{run_rolling, RollingConfig};
use panelcast::app::spatial::build_spatial_regressors;
use panelcast::Method;

fn main() -> panelcast::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let data = ingest_csv(&dir.join("panel.csv"), &CsvSchema::y_lag(1))?;
    let section = SpatialSection {
        edges: "edges.csv".into(),
        regions: "regions.csv".into(),
        country: true,
    };
    let units: Vec<String> = (0..data.n_units()).map(|i| data.unit_label(i)).collect();
    let spec = load_spatial(&section, &units, |p| dir.join(p))?;
    for (i, u) in units.iter().enumerate().take(2) {
        println!("{u} neighbours {:?}", spec.neighbours(i));
    }
    let sp = build_spatial_regressors(&data, &spec)?;
    println!(
        "K {} -> {}, dropped {:?}",
        data.k_regressors(),
        sp.data.k_regressors(),
        sp.dropped
    );

    let config = RollingConfig {
        window: 30,
        methods: vec![Method::Individual, Method::Pooled, Method::EmpiricalBayes],
        conditioning_c: 0.5,
        ..RollingConfig::default()
    };
    let out = run_rolling(&sp.data, &config)?;
    for (m, v) in &out.reports[0].rmsfe {
        println!("{m:<11} {v:.3}");
    }
    Ok(())
}
