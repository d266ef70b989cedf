//! Value functions: the log investor's intensity component by Feynman-Kac
//! Monte Carlo, and the power and exponential components by fixed-point
//! iteration on an intensity grid.

mod fixed_point;
mod grid;
mod log;
mod quadrature;

pub use fixed_point::{
    exponential_g_without_jumps, g_fixed_point, power_g_without_jumps, FixedPointSpec, GField, IterationRecord,
};
pub use grid::{Axis, Grid};
pub use log::{
    f_feynman_kac, f_source, hjb_residual_log, log_value_field, required_horizon, transversality_check, FkEstimate,
    HjbPoint, HjbReport, LogSource, LogValueField, LogValueFn, McSpec, TransversalityReport,
};
pub use quadrature::{default_bounds, default_grid, default_h_max, discounted_integral, fitted_weights, visit_nodes};
