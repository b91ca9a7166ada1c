//! Empirical Bayes shrinkage and the hierarchical Bayes Gibbs sampler under
//! the three prior presets.

use panelcast::estimators::fit_individual;
use panelcast::shrinkage::{fit_empirical_bayes, fit_hierarchical_bayes, GibbsConfig, PriorSetting};
use panelcast::simulation::{generate_panel, DgpSpec};

fn msfe(f: &[f64], y: &[f64]) -> f64 {
    f.iter().zip(y).map(|(f, y)| (y - f).powi(2)).sum::<f64>() / y.len() as f64
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|c| (c * 1000.0).round() / 1000.0).collect()
}

fn main() -> panelcast::Result<()> {
    let sim = generate_panel(&DgpSpec::setting(2, 40, 25, 0.5)?)?;
    let ind = fit_individual(&sim.data, &sim.target)?;
    let eb = fit_empirical_bayes(&sim.data, &sim.target)?;
    println!("individual msfe {:.4}", msfe(&ind.forecasts, &sim.actuals));
    println!(
        "eb         msfe {:.4} (ridge {:.2e})",
        msfe(&eb.forecasts, &sim.actuals),
        eb.ridge
    );
    println!("unit 0 individual {:?}", rounded(ind.theta[0].as_slice()));
    println!("unit 0 eb         {:?}", rounded(eb.theta_eb[0].as_slice()));

    for prior in PriorSetting::ALL {
        let config = GibbsConfig {
            n_iter: 1000,
            burn_in: 300,
            prior,
            seed: 5,
            ..GibbsConfig::default()
        };
        let trace = fit_hierarchical_bayes(&sim.data, &sim.target, &config)?;
        let s2 = trace.sigma2_draws.iter().sum::<f64>() / trace.sigma2_draws.len() as f64;
        println!(
            "hb{} msfe {:.4} posterior sigma2 {s2:.3} draws {}",
            prior.number(),
            msfe(&trace.forecast_mean, &sim.actuals),
            trace.theta_draws.len()
        );
    }
    Ok(())
}
