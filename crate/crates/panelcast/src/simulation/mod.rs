//! Monte Carlo designs: ARX(1) panels with correlated heterogeneity, the
//! closed-form AR(1) and pooled R-squared analytics, and the replication
//! runner.

pub mod analytics;
pub mod dgp;
pub mod experiment;

pub use analytics::{
    ar1_delta, ar1_eta_moment, ar1_y2eta, expected_pr2, realized_pr2, uniform_inverse_moment, Ar1AnalyticsResult,
    Ar1McCheck, MomentEstimate,
};
pub use dgp::{generate_panel, generate_panel_with_rng, DgpSpec, KappaRule, SimulatedPanel, UnitTruth};
pub use experiment::{
    replication_rng, run_cell, run_experiment, run_replication, CellResult, ExperimentCell, ExperimentConfig,
    ReplicationLosses,
};
