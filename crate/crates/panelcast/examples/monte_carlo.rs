//! A small Monte Carlo grid: relative MSFE of each method against the
//! individual forecasts, for both target rules.

use panelcast::simulation::{run_experiment, DgpSpec, ExperimentCell, ExperimentConfig, KappaRule};
use panelcast::Method;

fn main() -> panelcast::Result<()> {
    let cells = vec![
        ExperimentCell {
            name: "hom_T20".into(),
            dgp: DgpSpec::homogeneous(50, 20),
        },
        ExperimentCell {
            name: "high_T20".into(),
            dgp: DgpSpec::setting(3, 50, 20, 0.5)?,
        },
        ExperimentCell {
            name: "high_T100".into(),
            dgp: DgpSpec::setting(3, 50, 100, 0.5)?,
        },
    ];
    let methods = vec![
        Method::Individual,
        Method::Pooled,
        Method::FixedEffects,
        Method::CombPooled,
        Method::EmpiricalBayes,
    ];
    let config = ExperimentConfig::new(cells, methods.clone(), 200, 1);
    let results = run_experiment(&config)?;

    print!("{:<10} {:<7}", "cell", "kappa");
    for m in &methods {
        print!(" {:>12}", m.name());
    }
    println!();
    for r in &results {
        for k in KappaRule::ALL {
            print!("{:<10} {:<7}", r.name, k.name());
            for &m in &methods {
                print!(" {:>12.3}", r.rmsfe(k, m).unwrap_or(f64::NAN));
            }
            println!();
        }
    }
    Ok(())
}
