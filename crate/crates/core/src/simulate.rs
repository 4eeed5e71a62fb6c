//! Trajectory runner, boundedness monitors and convergence detection.

use std::collections::VecDeque;

use thiserror::Error;

use crate::lyapunov::LyapunovSeries;
use crate::model::{
    DelayLine, History, InitialData, InitialDataError, ParameterValues, Parameters, State,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error(transparent)]
    InitialData(#[from] InitialDataError),
    #[error("convergence window of {window} steps exceeds the {available} recorded states")]
    WindowTooLarge { window: usize, available: usize },
    #[error("trajectory was run without monitors")]
    MonitorsAbsent,
    #[error("a run needs at least one step")]
    NoSteps,
}

/// Per-coordinate floor used when measuring relative distances, so that
/// zero components (E0, E*) have a well-defined scale.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Relative slack used by the boundedness checks.
pub const BOUND_SLACK: f64 = 1e-9;

/// `Q = min(d, a/2, mu)`.
pub fn decay_floor(params: &Parameters) -> f64 {
    let v = params.values();
    v.d.min(v.a / 2.0).min(v.mu)
}

/// `N1 = a N lambda / Q`, the ultimate bound on X, Y and V.
pub fn absorbing_bound(params: &Parameters) -> f64 {
    let v = params.values();
    v.a * v.big_n * v.lambda / decay_floor(params)
}

/// Per-step monitor series, filled in a second pass after the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitors {
    /// `Omega_n = a N X_n + a N Y_{n+m} + (a/2) V_{n+m}` for `n = 0..=steps-m`.
    pub omega: Vec<f64>,
    /// `c X_n beta X_{n-m+1} V_{n-m} / (p s)` for `n = 0..steps`; bounds `Z_{n+1}`.
    pub n2: Vec<f64>,
    /// Whether step `n` lies in the region `0 < X, Y, V <= N1`, `Z < N2`.
    pub in_gamma: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    params: Parameters,
    /// Initial history followed by the computed steps; step `n` sits at
    /// index `n + m`.
    full: Vec<State>,
    pub monitors: Option<Monitors>,
    pub lyapunov: Option<LyapunovSeries>,
}

impl TrajectoryRecord {
    pub fn params(&self) -> &Parameters {
        &self.params
    }

    /// States for steps `0..=steps`.
    pub fn states(&self) -> &[State] {
        &self.full[self.params.delay_steps()..]
    }

    /// Number of steps taken (one less than the number of states).
    pub fn steps(&self) -> usize {
        self.states().len() - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.params.phi()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states().len()).map(|n| self.time(n)).collect()
    }

    /// States `n - m ..= n`, oldest first; reaches into the initial history
    /// for `n < m`.
    pub fn window(&self, n: usize) -> &[State] {
        &self.full[n..=n + self.params.delay_steps()]
    }

    pub fn initial_history(&self) -> &[State] {
        &self.full[..=self.params.delay_steps()]
    }

    pub fn last(&self) -> State {
        *self.full.last().expect("trajectory is never empty")
    }
}

/// Iterates the NSFD map `steps` times from `init`.
pub fn run(
    params: &Parameters,
    init: &InitialData,
    steps: usize,
    record_monitors: bool,
) -> Result<TrajectoryRecord, SimulateError> {
    if steps == 0 {
        return Err(SimulateError::NoSteps);
    }
    init.check_for(params)?;
    let mut line = DelayLine::new(init);
    let mut full = Vec::with_capacity(init.history().len() + steps);
    full.extend_from_slice(init.history());
    for _ in 0..steps {
        full.push(line.advance(params));
    }
    let mut record = TrajectoryRecord {
        params: *params,
        full,
        monitors: None,
        lyapunov: None,
    };
    if record_monitors {
        record.monitors = Some(compute_monitors(&record));
    }
    Ok(record)
}

fn compute_monitors(traj: &TrajectoryRecord) -> Monitors {
    let ParameterValues {
        beta,
        a,
        p,
        big_n,
        c,
        s,
        ..
    } = *traj.params.values();
    let m = traj.params.delay_steps();
    let states = traj.states();
    let steps = traj.steps();
    let n1 = absorbing_bound(&traj.params);

    let omega = if steps >= m {
        (0..=steps - m)
            .map(|n| {
                let ahead = states[n + m];
                a * big_n * states[n].x + a * big_n * ahead.y + a / 2.0 * ahead.v
            })
            .collect()
    } else {
        Vec::new()
    };

    let n2_at = |n: usize| {
        let w = traj.window(n);
        let x_lag = if m == 0 { states[n].x } else { w[1].x };
        c * states[n].x * beta * x_lag * w[0].v / (p * s)
    };
    let n2: Vec<f64> = (0..steps).map(n2_at).collect();

    let in_gamma = (0..=steps)
        .map(|n| {
            let st = states[n];
            let xyv = [st.x, st.y, st.v];
            xyv.iter().all(|&u| u > 0.0 && u <= n1) && st.z < n2_at(n)
        })
        .collect();

    Monitors {
        omega,
        n2,
        in_gamma,
    }
}

/// Outcome of the boundedness checks along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    /// `min(d, a/2, mu)`.
    pub q: f64,
    /// `a N lambda / q`.
    pub n1: f64,
    /// `Omega_{n+1} (1 + q h) <= a N lambda h + Omega_n` at every step.
    pub recursion_ok: bool,
    /// Largest relative excess in the recursion (negative when it holds with margin).
    pub worst_recursion_excess: f64,
    /// `Omega_n <= r^n Omega_0 + N1 (1 - r^n)` with `r = 1 / (1 + q h)`.
    pub envelope_ok: bool,
    /// Recursion and envelope both hold, hence `limsup Omega_n <= N1`.
    pub omega_limsup_ok: bool,
    /// X, Y, V stay below `N1` over the trailing half of the run.
    pub xyv_bounded_ok: bool,
    /// `Z_{n+1} <= N2_n` over the trailing half of the run.
    pub z_bound_ok: bool,
}

pub fn bounds_report(traj: &TrajectoryRecord) -> Result<BoundsReport, SimulateError> {
    let monitors = traj
        .monitors
        .as_ref()
        .ok_or(SimulateError::MonitorsAbsent)?;
    let v = traj.params.values();
    let phi = traj.params.phi();
    let q = decay_floor(&traj.params);
    let n1 = absorbing_bound(&traj.params);
    let source = v.a * v.big_n * v.lambda * phi;

    let mut worst = f64::NEG_INFINITY;
    for w in monitors.omega.windows(2) {
        let lhs = w[1] * (1.0 + q * phi);
        let rhs = source + w[0];
        worst = worst.max((lhs - rhs) / rhs.abs());
    }
    let recursion_ok = worst <= BOUND_SLACK;

    let ratio = 1.0 / (1.0 + q * phi);
    let omega0 = monitors.omega.first().copied().unwrap_or(0.0);
    let envelope_ok = monitors.omega.iter().enumerate().all(|(n, &om)| {
        let decay = ratio.powi(n as i32);
        om <= (decay * omega0 + n1 * (1.0 - decay)) * (1.0 + BOUND_SLACK)
    });

    let states = traj.states();
    let half = states.len() / 2;
    let xyv_bounded_ok = states[half..]
        .iter()
        .all(|s| s.x.max(s.y).max(s.v) <= n1 * (1.0 + 1e-6));

    let z_bound_ok = (half..monitors.n2.len()).all(|n| {
        let bound = monitors.n2[n];
        !bound.is_finite() || states[n + 1].z <= bound * (1.0 + BOUND_SLACK) + f64::MIN_POSITIVE
    });

    Ok(BoundsReport {
        q,
        n1,
        recursion_ok,
        worst_recursion_excess: worst,
        envelope_ok,
        omega_limsup_ok: recursion_ok && envelope_ok,
        xyv_bounded_ok,
        z_bound_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSettings {
    /// Relative sup-norm variation allowed over the trailing window.
    pub tol: f64,
    /// Trailing window length in steps.
    pub window: usize,
    /// Step budget for [`run_to_convergence`].
    pub max_steps: usize,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            window: 100,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceVerdict {
    pub converged: bool,
    /// Mean of the trailing window when converged.
    pub limit: Option<State>,
    pub steps_used: usize,
    /// Largest relative deviation from the window mean over the window.
    pub sup_error: f64,
    pub final_state: State,
}

/// Mean of `window` and the largest relative deviation from it.
fn window_spread<'a>(window: impl Iterator<Item = &'a State> + Clone) -> (State, f64) {
    let mut sum = [0.0; 4];
    let mut count = 0usize;
    for s in window.clone() {
        for (acc, c) in sum.iter_mut().zip(s.to_array()) {
            *acc += c;
        }
        count += 1;
    }
    let mean = State::from_array(sum.map(|t| t / count as f64));
    let spread = window
        .map(|s| s.relative_distance(&mean, RELATIVE_FLOOR))
        .fold(0.0, f64::max);
    (mean, spread)
}

/// Checks whether the last `window` recorded states have settled.
pub fn detect_convergence(
    traj: &TrajectoryRecord,
    tol: f64,
    window: usize,
) -> Result<ConvergenceVerdict, SimulateError> {
    let states = traj.states();
    if window == 0 || window > states.len() {
        return Err(SimulateError::WindowTooLarge {
            window,
            available: states.len(),
        });
    }
    let (mean, spread) = window_spread(states[states.len() - window..].iter());
    let converged = spread <= tol;
    Ok(ConvergenceVerdict {
        converged,
        limit: converged.then_some(mean),
        steps_used: traj.steps(),
        sup_error: spread,
        final_state: traj.last(),
    })
}

/// Runs until the trailing window settles or the step budget is spent,
/// keeping only the delay line and the window in memory.
pub fn run_to_convergence(
    params: &Parameters,
    init: &InitialData,
    settings: &ConvergenceSettings,
) -> Result<ConvergenceVerdict, SimulateError> {
    init.check_for(params)?;
    let window = settings.window.max(1);
    let mut line = DelayLine::new(init);
    let mut trailing: VecDeque<State> = VecDeque::with_capacity(window);
    trailing.push_back(init.current());
    let mut spread = f64::INFINITY;

    for n in 1..=settings.max_steps {
        let next = line.advance(params);
        if trailing.len() == window {
            trailing.pop_front();
        }
        trailing.push_back(next);
        if trailing.len() == window && (n % window == 0 || n == settings.max_steps) {
            let (mean, s) = window_spread(trailing.iter());
            spread = s;
            if s <= settings.tol {
                return Ok(ConvergenceVerdict {
                    converged: true,
                    limit: Some(mean),
                    steps_used: n,
                    sup_error: s,
                    final_state: next,
                });
            }
        }
    }
    Ok(ConvergenceVerdict {
        converged: false,
        limit: None,
        steps_used: settings.max_steps,
        sup_error: spread,
        final_state: line.newest(),
    })
}
