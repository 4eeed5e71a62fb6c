//! Parameter grids over `(beta, c)` and optionally `tau`, simulated cell by
//! cell and compared with the regime predicted by `R0` and `R1`.

use rayon::prelude::*;
use thiserror::Error;

use crate::equilibria::{classify_regime, equilibrium_set, RegimeKind};
use crate::model::{make_parameters, InitialData, ParameterError, ParameterValues, State};
use crate::simulate::{run_to_convergence, ConvergenceSettings, SimulateError, RELATIVE_FLOOR};

/// Relative sup-norm distance within which a limit is matched to an equilibrium.
pub const MATCH_TOLERANCE: f64 = 1e-2;

/// Cells with `|R0 - 1|` or `|R1 - 1|` at or below this are near-threshold.
pub const THRESHOLD_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("sweep has no cells")]
    EmptySweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    /// Rates shared by every cell; its `beta`, `c` and (when `tau_values` is
    /// given) `tau` are overridden per cell.
    pub base: ParameterValues,
    pub beta_values: Vec<f64>,
    pub c_values: Vec<f64>,
    pub tau_values: Option<Vec<f64>>,
    pub h: f64,
    /// Convergence tolerance, window and per-cell step budget.
    pub settings: ConvergenceSettings,
}

impl SweepGrid {
    /// `count` evenly spaced values from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }

    fn taus(&self) -> Vec<f64> {
        self.tau_values
            .clone()
            .unwrap_or_else(|| vec![self.base.tau])
    }

    /// Cell coordinates in grid order: tau outermost, then beta, then c.
    pub fn coordinates(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for tau in self.taus() {
            for &beta in &self.beta_values {
                for &c in &self.c_values {
                    out.push((beta, c, tau));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observed {
    Regime(RegimeKind),
    Unresolved,
}

impl Observed {
    pub fn name(self) -> &'static str {
        match self {
            Observed::Regime(kind) => kind.name(),
            Observed::Unresolved => "Unresolved",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub beta: f64,
    pub c: f64,
    pub tau: f64,
    pub r0: f64,
    pub r1: f64,
    pub predicted: RegimeKind,
    pub observed: Observed,
    pub agree: bool,
    pub near_threshold: bool,
    /// Relative sup-norm distance (floored) from the simulated limit, or the
    /// final state when the run did not settle, to the predicted attractor.
    pub sup_error: f64,
    pub converged: bool,
    pub steps_used: usize,
}

/// A cell whose parameters or initial data were rejected.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("cell {index} (beta = {beta}, c = {c}, tau = {tau}): {reason}")]
pub struct CellFailure {
    pub index: usize,
    pub beta: f64,
    pub c: f64,
    pub tau: f64,
    pub reason: CellFailureReason,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CellFailureReason {
    #[error(transparent)]
    Parameters(#[from] ParameterError),
    #[error(transparent)]
    Simulation(#[from] SimulateError),
}

/// Simulates every cell from a constant history at `init`.
///
/// Cells run in parallel; results come back in grid order.
pub fn run_sweep(grid: &SweepGrid, init: State) -> Vec<Result<SweepCell, CellFailure>> {
    grid.coordinates()
        .into_par_iter()
        .enumerate()
        .map(|(index, (beta, c, tau))| {
            run_cell(grid, init, beta, c, tau)
                .map_err(|reason| CellFailure {
                    index,
                    beta,
                    c,
                    tau,
                    reason,
                })
                .map(|mut cell| {
                    cell.index = index;
                    cell
                })
        })
        .collect()
}

fn run_cell(
    grid: &SweepGrid,
    init: State,
    beta: f64,
    c: f64,
    tau: f64,
) -> Result<SweepCell, CellFailureReason> {
    let values = grid
        .base
        .with_infection(beta, c)
        .with_delay(tau)
        .with_step(grid.h);
    let params = make_parameters(values)?;
    let eqs = equilibrium_set(&params);
    let nums = eqs.numbers;
    let predicted = classify_regime(&nums, &eqs);

    let init = InitialData::constant(init, params.delay_steps()).map_err(SimulateError::from)?;
    let verdict = run_to_convergence(&params, &init, &grid.settings)?;
    let end = verdict.limit.unwrap_or(verdict.final_state);

    let observed = if verdict.converged {
        eqs.present()
            .into_iter()
            .map(|(kind, e)| (kind, end.relative_distance(&e, RELATIVE_FLOOR)))
            .filter(|&(_, dist)| dist <= MATCH_TOLERANCE)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map_or(Observed::Unresolved, |(kind, _)| Observed::Regime(kind))
    } else {
        Observed::Unresolved
    };

    Ok(SweepCell {
        index: 0,
        beta,
        c,
        tau,
        r0: nums.r0,
        r1: nums.r1,
        predicted: predicted.kind,
        observed,
        agree: observed == Observed::Regime(predicted.kind),
        near_threshold: (nums.r0 - 1.0).abs() <= THRESHOLD_MARGIN
            || (nums.r1 - 1.0).abs() <= THRESHOLD_MARGIN,
        sup_error: end.relative_distance(&predicted.predicted_attractor, RELATIVE_FLOOR),
        converged: verdict.converged,
        steps_used: verdict.steps_used,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub total: usize,
    /// Cells counted in the agreement rate.
    pub considered: usize,
    pub agreeing: usize,
    pub near_threshold_excluded: usize,
    /// `agreeing / considered`; 1.0 when nothing is considered.
    pub agreement_rate: f64,
    /// Considered cells whose observed regime differs from the prediction
    /// (including unresolved ones).
    pub disagreeing: Vec<SweepCell>,
    pub unresolved: Vec<SweepCell>,
}

/// Aggregates a sweep, leaving near-threshold cells out of the statistics.
pub fn sweep_summary(cells: &[SweepCell]) -> Result<SweepSummary, SweepError> {
    SweepSummary::from_cells(cells, false)
}

impl SweepSummary {
    pub fn from_cells(
        cells: &[SweepCell],
        include_near_threshold: bool,
    ) -> Result<SweepSummary, SweepError> {
        if cells.is_empty() {
            return Err(SweepError::EmptySweep);
        }
        let (counted, excluded): (Vec<&SweepCell>, Vec<&SweepCell>) = cells
            .iter()
            .partition(|c| include_near_threshold || !c.near_threshold);
        let agreeing = counted.iter().filter(|c| c.agree).count();
        let considered = counted.len();
        Ok(SweepSummary {
            total: cells.len(),
            considered,
            agreeing,
            near_threshold_excluded: excluded.len(),
            agreement_rate: if considered == 0 {
                1.0
            } else {
                agreeing as f64 / considered as f64
            },
            disagreeing: counted
                .iter()
                .filter(|c| !c.agree)
                .map(|&c| c.clone())
                .collect(),
            unresolved: counted
                .iter()
                .filter(|c| c.observed == Observed::Unresolved)
                .map(|&c| c.clone())
                .collect(),
        })
    }
}
