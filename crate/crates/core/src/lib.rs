//! Training-subset selection from unlabeled pools of feature vectors.
//!
//! The centerpiece is a density-aware variant of farthest point sampling:
//! greedy max-min selection whose distances are scaled by integer ball
//! counts derived from adaptive k-nearest-neighbor density estimates, so
//! the selection balances space coverage against the pool's density
//! profile. Around it sit the baseline selectors it is compared against
//! (random, plain farthest point sampling, facility location, k-medoids++
//! and FPS-prefixed hybrids), the weighted-fill-distance diagnostics the
//! greedy provably approximates, brute-force checkers for those
//! approximation bounds at desk scale, kernel ridge regression as the
//! downstream evaluator, and a multi-seed experiment harness.

pub mod data;
pub mod density;
pub mod error;
pub mod harness;
pub mod knn;
pub mod krr;
pub mod metrics;
pub mod oracle;
pub mod predio;
pub mod select;

pub use data::{
    load_points, normalize_unit_interval, parse_points, save_points, synth_mixture, synth_uniform,
    LabelColumn, MixtureSpec, PointSet,
};
pub use density::{
    adaptive_radius, estimate_density_pool, estimate_density_selected, estimated_weight, omega,
    unit_ball_volume, DensityEstimate, WeightState, DEFAULT_EPS_X,
};
pub use error::{Error, Result};
pub use knn::{build_table, build_table_bruteforce, NeighborTable};
pub use krr::{cv_grid_search, kernel_value, krr_fit, krr_predict, GridSpec, Kernel, KrrModel};
pub use metrics::{
    distance_label_correlation, estimated_wfd, eval_errors, fill_distance, CorrelationReport,
    EvalReport,
};
pub use oracle::{
    brute_optimal_fill, brute_optimal_wfd, check_2k_bound, check_sigma_gamma_bound, run_sweep,
    sweep_to_csv, BoundReport, SweepConfig,
};
pub use select::{
    fps_prefix_then, select_dafps, select_facility_location, select_fps, select_kmedoidspp,
    select_random, tune_gamma, DafpsConfig, FacilityVariant, GainCurve, InnerMethod, Method,
    Selection, SelectionParams, TraceEntry,
};
