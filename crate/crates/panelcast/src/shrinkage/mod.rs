//! Empirical Bayes shrinkage and the hierarchical Bayes Gibbs sampler.

pub mod eb;
pub mod gibbs;

pub use eb::{coefficient_dispersion, empirical_bayes_with_omega, fit_empirical_bayes, EmpiricalBayesFit};
pub use gibbs::{fit_hierarchical_bayes, GibbsConfig, GibbsTrace, Hyperpriors, PriorSetting};
