//! Discrete-time delayed HIV infection model with CTL immune response.
//!
//! The model is discretized with a nonstandard finite-difference (NSFD)
//! scheme using the denominator function `phi(h) = h`. Every update is
//! linear in the new value, so the implicit scheme has an explicit closed
//! form which keeps all compartments positive for any step size.
//!
//! Modules:
//!
//! - [`model`]: parameters, states, delay history and the one-step map.
//! - [`equilibria`]: reproduction numbers, equilibrium points, regimes.
//! - [`lyapunov`]: discrete Lyapunov functions used as stability monitors.
//! - [`simulate`]: trajectory runner, boundedness monitors, convergence.
//! - [`sweep`]: parameter grids cross-checked against threshold theory.

pub mod equilibria;
pub mod lyapunov;
pub mod model;
pub mod simulate;
pub mod sweep;

pub use equilibria::{
    check_lemma2, classify_regime, equilibrium_set, reproduction_numbers, EquilibriumError,
    EquilibriumSet, Lemma2Witness, RegimeClassification, RegimeKind, ReproductionNumbers,
};
pub use lyapunov::{
    check_monotone, g, lyapunov_e0, lyapunov_ebar, lyapunov_estar, lyapunov_series, LyapunovError,
    LyapunovSeries, LyapunovTarget, MonotonicityVerdict,
};
pub use model::{
    implicit_residual, implicit_residual_scale, make_parameters, nsfd_step, DelayLine, History,
    InitialData, InitialDataError, ParameterError, ParameterValues, Parameters, State,
};
pub use simulate::{
    bounds_report, detect_convergence, run, run_to_convergence, BoundsReport, ConvergenceSettings,
    ConvergenceVerdict, Monitors, SimulateError, TrajectoryRecord,
};
pub use sweep::{
    run_sweep, sweep_summary, CellFailure, Observed, SweepCell, SweepError, SweepGrid, SweepSummary,
};
