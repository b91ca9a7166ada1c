//! Forecasting with heterogeneous panels: individual, pooled, fixed and
//! random effects estimators, MSFE-optimal combinations, empirical and
//! hierarchical Bayes shrinkage, forecast evaluation and Monte Carlo tools.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod combination;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod linalg;
pub mod methods;
pub mod panel;
pub mod shrinkage;
pub mod simulation;

pub use error::{Error, Result};
pub use methods::{forecast_methods, forecast_methods_multi, EngineOptions, ForecastSet, Method};
pub use panel::{ForecastTarget, PanelDataset};
