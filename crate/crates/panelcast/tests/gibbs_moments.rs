//! Conditional-draw moments and prior-preset behaviour of the Gibbs sampler.

mod common;

use common::oracles::*;
use common::*;
use nalgebra::DMatrix;
use panelcast::shrinkage::gibbs::{draw_inv_gamma, draw_wishart};
use panelcast::shrinkage::{fit_hierarchical_bayes, GibbsConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn frozen_theta_block_matches_posterior_mean() {
    let z = gibbs_frozen_block_z(100_000);
    assert!(z < 3.0, "max |z| = {z}");
}

#[test]
fn prior_presets_are_distinct() {
    let gap = prior_presets_min_gap();
    assert!(gap > 1e-6, "gap {gap:e}");
}

#[test]
fn inverse_gamma_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (shape, scale) = (6.0, 10.0);
    let n = 200_000;
    let mean: f64 = (0..n)
        .map(|_| draw_inv_gamma(&mut rng, shape, scale).unwrap())
        .sum::<f64>()
        / n as f64;
    assert!((mean - scale / (shape - 1.0)).abs() < 0.02, "{mean}");
}

#[test]
fn wishart_rejects_low_df() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut j = 0;
    assert!(draw_wishart(&mut rng, 1.5, &DMatrix::identity(2, 2), &mut j).is_err());
}

#[test]
fn default_run_keeps_post_burn_in_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = random_panel(&mut rng, 8, 12, 1, 1.0);
    let target = random_target(&mut rng, 8, 1);
    let trace = fit_hierarchical_bayes(&p, &target, &GibbsConfig::default()).unwrap();
    assert_eq!(trace.theta_draws.len(), 1000);
    assert!(trace.sigma2_draws.iter().all(|s| *s > 0.0));
}
