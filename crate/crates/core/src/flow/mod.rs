//! Shifted inverse curvature flow of axisymmetric surfaces in H³: the round
//! solution, the rescaled graph equation and its runtime diagnostics.

pub mod diagnostics;
pub mod rescaled;
pub mod run;
pub mod spherical;

pub use diagnostics::{
    fit_decay, hausdorff_roundness, mode_amplitudes, optimal_center, pinch_ratio, recentre, reconstruct,
    rescaled_curvature_range, RescaledRange,
};
pub use rescaled::{a_coefficient, a_infinity, l2_bulk_rate, linearized_rate, rescaled_rhs_at, FlowState, RhsEval};
pub use run::{
    diagnose, initial_profile, run, write_diagnostics_csv, write_outputs, DecayFit, DiagnosticsRecord, Event,
    FlowParams, GuardMode, OutputConfig, Perturbation, RunOutcome, RunSummary, SimulationConfig, SurfaceConfig,
    SurfaceKind,
};
pub use spherical::{
    maximal_time, maximal_time_p1, q_of_theta, spherical_p1, spherical_solve, spherical_trajectory, theta_of_q, Clock,
    SphericalState,
};
