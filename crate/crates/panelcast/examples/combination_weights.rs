//! Estimated combination weights between individual and pooled (or fixed
//! effects) forecasts, next to the infeasible weight built from the true
//! parameters.

use panelcast::methods::OracleInputs;
use panelcast::simulation::{generate_panel, DgpSpec};
use panelcast::{forecast_methods, EngineOptions, Method};

fn main() -> panelcast::Result<()> {
    let methods = [
        Method::Individual,
        Method::Pooled,
        Method::CombPooled,
        Method::CombFe,
        Method::CombUnit,
        Method::OraclePooled,
    ];
    println!(
        "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "panel", "delta", "h", "psi", "omega", "oracle"
    );
    for (name, spec) in [
        ("hom", DgpSpec::homogeneous(100, 20)),
        ("low", DgpSpec::setting(1, 100, 20, 0.5)?),
        ("high", DgpSpec::setting(3, 100, 20, 0.5)?),
    ] {
        let sim = generate_panel(&spec)?;
        let opts = EngineOptions {
            oracle: Some(OracleInputs {
                theta: sim.truth.iter().map(|u| u.theta()).collect(),
                sigma2: sim.truth.iter().map(|u| u.sigma2).collect(),
            }),
            ..EngineOptions::default()
        };
        let set = forecast_methods(&sim.data, &sim.target, &methods, &opts)?;
        let d = &set.diagnostics;
        let p = d.pooled_combo.expect("pooled combination requested");
        let o = d.oracle_combo.expect("oracle requested");
        println!(
            "{name:<10} {:>8.4} {:>8.4} {:>8.4} {:>8.3} {:>8.3}",
            p.delta_hat, p.h_hat, p.psi_hat, p.omega, o.omega
        );
        if let Some(fe) = d.fe_combo {
            println!("{:<10} fe weight {:.3}", "", fe.omega);
        }
        if let Some(w) = &d.unit_weights {
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            println!("{:<10} mean unit weight {mean:.3}", "");
        }
    }
    Ok(())
}
