//! Analytic quantities behind the simulation design: the AR(1) bias term and
//! the population R-squared of each heterogeneity setting.

use panelcast::simulation::{ar1_delta, expected_pr2, generate_panel, realized_pr2, DgpSpec};

fn main() -> panelcast::Result<()> {
    println!("{:>8} {:>10} {:>10} {:>10}", "b0", "E(1/1-b2)", "E(y2 eta)", "Delta_AR");
    for b in [0.3, 0.45, 0.49, 0.4999] {
        let r = ar1_delta(b, 1.0, 1.0, 10_000, 1)?;
        println!("{b:>8} {:>10.4} {:>10.4} {:>10.4}", r.e_inv, r.e_y2eta, r.delta_ar);
    }

    println!();
    println!("{:>8} {:>5} {:>10} {:>12}", "setting", "rho", "PR2", "N=2000 draw");
    for setting in 1..=3 {
        for rho in [0.0, 0.5] {
            let spec = DgpSpec::setting(setting, 2000, 2, rho)?;
            let brute = realized_pr2(&generate_panel(&spec)?);
            println!("{setting:>8} {rho:>5} {:>10.4} {brute:>12.4}", expected_pr2(&spec)?);
        }
    }
    Ok(())
}
