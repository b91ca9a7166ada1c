//! Diebold-Mariano tests and the density of unit-level MSFE ratios on a
//! synthetic set of forecast records.

use panelcast::evaluation::{
    default_grid, density_curve, dm_test_panel, dm_test_unit, msfe_report, ForecastRecord, Subset,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> panelcast::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut records = Vec::new();
    for unit in 0..20 {
        let noise_b = 1.0 + 0.05 * unit as f64;
        for origin in 0..60 {
            let actual: f64 = rng.random_range(-1.0..1.0);
            for (method, scale) in [("a", 0.8), ("b", noise_b)] {
                let e: f64 = rng.random_range(-1.0..1.0) * scale;
                records.push(ForecastRecord {
                    unit,
                    origin,
                    method: method.into(),
                    forecast: actual - e,
                    actual,
                });
            }
        }
    }
    let methods = vec!["a".to_string(), "b".to_string()];
    let rep = msfe_report(&records, "b", &methods, Subset::All)?;
    println!(
        "rMSFE a/b = {:.3}, a beats b in {:.0}% of units",
        rep.rmsfe["a"],
        100.0 * rep.beat_freq["a"]
    );

    let panel = dm_test_panel(&records, "a", "b", None)?;
    println!("panel DM {:?} with {} lags", panel.statistic, panel.hac_lags);
    let loss = |u: usize, m: &str| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.unit == u && r.method == m)
            .map(|r| r.loss())
            .collect()
    };
    let unit0 = dm_test_unit(&loss(0, "a"), &loss(0, "b"), Some(4))?;
    println!("unit 0 DM {:?}", unit0.statistic);

    let ratios: Vec<f64> = rep.msfe["a"].iter().zip(&rep.msfe["b"]).map(|(a, b)| a / b).collect();
    let grid = default_grid(&ratios, 0.1, 9);
    for (x, f) in density_curve(&ratios, 0.1, &grid)? {
        println!("{x:>7.3} {f:>8.3}");
    }
    Ok(())
}
