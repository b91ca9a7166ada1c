//! Out-of-sample accuracy: MSFE reports, conditioning subsets,
//! Diebold-Mariano tests and kernel density curves.

mod conditioning;
mod density;
mod dm;
mod report;

pub use conditioning::{conditioning_filter, in_band, DStat, FilterOutcome, KAPPA_ONE_SD, KAPPA_ZERO};
pub use density::{default_grid, density_curve, DEFAULT_BANDWIDTH};
pub use dm::{default_hac_lags, dm_test_panel, dm_test_unit, dm_test_unit_records, newey_west_lrv, DmResult, DmScope};
pub use report::{msfe_report, EvaluationReport, ForecastRecord, Subset};
