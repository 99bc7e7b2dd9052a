//! O-, G- and C-errors, bound curves, constant and rate fits, CSV records.

pub mod bounds;
pub mod errors;
pub mod fit;
pub mod record;

pub use bounds::{bound_curve, dynamic_overhead, BoundConstants, BoundKind, BoundPoint};
pub use errors::{c_error, g_error, o_error, CError, GError, OError};
pub use fit::{fit_constants, fit_power_law, fit_rate_slope, ConstantsFit, FitCoefficients, RunObservation};
pub use record::{csv_header, read_csv, to_csv_string, write_csv, MetricsRecord};
