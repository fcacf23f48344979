//! Sparse quantile regression with multiple structural changes: penalized
//! per-segment estimators, dynamic-programming change-point search, and a
//! Monte Carlo harness.

pub mod changepoint;
pub mod io;
pub mod model;
pub mod simulation;
pub mod solver;

pub use changepoint::{
    detect_changepoints, refit_segments, segment_cost, ChangePointError, SearchConfig,
    SegmentMethod,
};
pub use model::{
    active_set, check_loss, penalized_objective, scad_derivative, scad_value, ChangePointFit,
    Dataset, ModelError, PenaltySpec, QuantileLevel, SegmentFit, Segmentation,
};
pub use solver::{
    adaptive_weights_lasso_type, fit_lasso_type, fit_scad_lla, kkt_check_scad,
    kkt_check_weighted_l1, pilot_qlasso, solve_quantile, solve_weighted_l1_qr, Backend,
    SolverConfig, SolverError,
};
