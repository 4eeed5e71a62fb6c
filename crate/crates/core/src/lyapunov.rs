//! Discrete Lyapunov functions for the three equilibria.
//!
//! All three are built from `G(x) = x - ln x - 1`, which is nonnegative on
//! `x > 0` and vanishes only at `x = 1`. Each function carries a delay sum
//! over the last `m` products `X[j+1] V[j]`, so it needs the full history
//! window rather than just the current state.
//!
//! Along a trajectory the sequence of values is expected to be
//! nonincreasing when the matching threshold condition holds;
//! [`check_monotone`] turns that into a pass/fail certificate.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::equilibria::reproduction_numbers;
use crate::model::{History, ParameterValues, Parameters, State};
use crate::simulate::TrajectoryRecord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LyapunovError {
    #[error("G is undefined at {0} (argument must be strictly positive)")]
    DomainError(f64),
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
}

/// `G(x) = x - ln(x) - 1`.
pub fn g(x: f64) -> Result<f64, LyapunovError> {
    if !(x.is_finite() && x > 0.0) {
        return Err(LyapunovError::DomainError(x));
    }
    // ln_1p keeps the value accurate near the minimum at x = 1.
    let u = x - 1.0;
    Ok((u - u.ln_1p()).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LyapunovTarget {
    E0,
    EStar,
    EBar,
}

impl LyapunovTarget {
    pub fn name(self) -> &'static str {
        match self {
            LyapunovTarget::E0 => "e0",
            LyapunovTarget::EStar => "estar",
            LyapunovTarget::EBar => "ebar",
        }
    }
}

impl fmt::Display for LyapunovTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LyapunovTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "e0" => Ok(LyapunovTarget::E0),
            "estar" => Ok(LyapunovTarget::EStar),
            "ebar" => Ok(LyapunovTarget::EBar),
            other => Err(format!(
                "unknown Lyapunov target `{other}` (expected e0, estar or ebar)"
            )),
        }
    }
}

/// `sum_{j=n-m}^{n-1} f(X[j+1] V[j])`.
fn delay_sum<H, F>(hist: &H, mut f: F) -> Result<f64, LyapunovError>
where
    H: History + ?Sized,
    F: FnMut(f64) -> Result<f64, LyapunovError>,
{
    let m = hist.delay_steps();
    let mut sum = 0.0;
    for k in 1..=m {
        sum += f(hist.lag(k - 1).x * hist.lag(k).v)?;
    }
    Ok(sum)
}

fn check_window<H: History + ?Sized>(params: &Parameters, hist: &H) {
    assert_eq!(
        hist.delay_steps(),
        params.delay_steps(),
        "history length does not match tau / h"
    );
}

/// Lyapunov function for the disease-free equilibrium.
///
/// `n1` is the ultimate bound on the uninfected level, normally
/// [`crate::simulate::absorbing_bound`].
pub fn lyapunov_e0<H: History + ?Sized>(
    params: &Parameters,
    hist: &H,
    n1: f64,
) -> Result<f64, LyapunovError> {
    check_window(params, hist);
    let ParameterValues {
        beta,
        p,
        mu,
        big_n,
        c,
        s,
        ..
    } = *params.values();
    let phi = params.phi();
    let x0 = params.x0();
    let cur = hist.newest();

    let local = x0 * g(cur.x / x0)?
        + cur.y
        + (1.0 + mu * phi) / big_n * cur.v
        + p / (c * n1) * (1.0 + s * phi) * cur.z;
    let delayed = delay_sum(hist, |xv| Ok(beta * xv))?;
    Ok(local / phi + delayed)
}

/// Lyapunov function for the endemic equilibrium without immune response.
pub fn lyapunov_estar<H: History + ?Sized>(
    params: &Parameters,
    hist: &H,
    e_star: &State,
    n1: f64,
) -> Result<f64, LyapunovError> {
    check_window(params, hist);
    if !(e_star.x > 0.0 && e_star.y > 0.0 && e_star.v > 0.0) {
        return Err(LyapunovError::NotApplicable("E* must be strictly positive"));
    }
    let ParameterValues {
        beta,
        p,
        mu,
        big_n,
        c,
        s,
        ..
    } = *params.values();
    let phi = params.phi();
    let State {
        x: xs,
        y: ys,
        v: vs,
        ..
    } = *e_star;
    let cur = hist.newest();

    let local = xs * g(cur.x / xs)?
        + ys * g(cur.y / ys)?
        + (1.0 + mu * phi) * vs / big_n * g(cur.v / vs)?
        + p * (1.0 + s * phi) / (c * n1) * cur.z;
    let delayed = beta * xs * vs * delay_sum(hist, |xv| g(xv / (xs * vs)))?;
    Ok(local / phi + delayed)
}

/// Lyapunov function for the endemic equilibrium with immune response.
///
/// The CTL level enters through two `G(Z / Z̄)` terms, one with weight
/// `p Ȳ Z̄` and one with weight `p Z̄ / (c X̄ phi)`; both are kept.
pub fn lyapunov_ebar<H: History + ?Sized>(
    params: &Parameters,
    hist: &H,
    e_bar: &State,
) -> Result<f64, LyapunovError> {
    check_window(params, hist);
    if reproduction_numbers(params).r1 <= 1.0 {
        return Err(LyapunovError::NotApplicable("requires R1 > 1"));
    }
    if !e_bar.is_strictly_positive() {
        return Err(LyapunovError::NotApplicable("Ē must be strictly positive"));
    }
    let ParameterValues { beta, p, mu, c, .. } = *params.values();
    let phi = params.phi();
    let State {
        x: xb,
        y: yb,
        v: vb,
        z: zb,
    } = *e_bar;
    let cur = hist.newest();
    let gz = g(cur.z / zb)?;

    let delayed = beta * xb * vb * delay_sum(hist, |xv| g(xv / (xb * vb)))?;
    let local = xb * g(cur.x / xb)?
        + yb * g(cur.y / yb)?
        + beta * xb * vb * (1.0 + mu * phi) / mu * g(cur.v / vb)?
        + p * zb / (c * xb) * gz;
    Ok(delayed + p * yb * zb * gz + local / phi)
}

/// Values of one Lyapunov function along a trajectory, indexed by step.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSeries {
    pub target: LyapunovTarget,
    pub values: Vec<f64>,
    /// `values[n + 1] - values[n]`.
    pub deltas: Vec<f64>,
}

impl LyapunovSeries {
    pub fn from_values(target: LyapunovTarget, values: Vec<f64>) -> Self {
        let deltas = values.windows(2).map(|w| w[1] - w[0]).collect();
        Self {
            target,
            values,
            deltas,
        }
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

/// Evaluates the chosen Lyapunov function at every recorded step.
pub fn lyapunov_series(
    traj: &TrajectoryRecord,
    target: LyapunovTarget,
) -> Result<LyapunovSeries, LyapunovError> {
    let params = traj.params();
    let eqs = crate::equilibria::equilibrium_set(params);
    let n1 = crate::simulate::absorbing_bound(params);
    let steps = traj.states().len();

    let values = match target {
        LyapunovTarget::E0 => (0..steps)
            .map(|n| lyapunov_e0(params, traj.window(n), n1))
            .collect::<Result<Vec<_>, _>>()?,
        LyapunovTarget::EStar => {
            let e_star = eqs
                .e_star
                .ok_or(LyapunovError::NotApplicable("E* does not exist (R0 <= 1)"))?;
            (0..steps)
                .map(|n| lyapunov_estar(params, traj.window(n), &e_star, n1))
                .collect::<Result<Vec<_>, _>>()?
        }
        LyapunovTarget::EBar => {
            let e_bar = eqs
                .e_bar
                .ok_or(LyapunovError::NotApplicable("Ē does not exist (R1 <= 1)"))?;
            (0..steps)
                .map(|n| lyapunov_ebar(params, traj.window(n), &e_bar))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    Ok(LyapunovSeries::from_values(target, values))
}

/// Outcome of checking `values[n+1] - values[n] <= slack * (1 + |values[n]|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityVerdict {
    pub holds: bool,
    pub from_step: usize,
    pub checked: usize,
    pub violations: usize,
    pub first_violation: Option<usize>,
    /// Largest `delta / (1 + |value|)` seen; negative when strictly decreasing.
    pub worst_relative_increase: f64,
}

/// Default slack for rounding in the monotone-decrease check.
pub const MONOTONE_SLACK: f64 = 1e-9;

pub fn check_monotone(
    series: &LyapunovSeries,
    from_step: usize,
    slack: f64,
) -> MonotonicityVerdict {
    let mut violations = 0;
    let mut first_violation = None;
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for n in from_step..series.deltas.len() {
        let rel = series.deltas[n] / (1.0 + series.values[n].abs());
        worst = worst.max(rel);
        checked += 1;
        if rel > slack {
            violations += 1;
            first_violation.get_or_insert(n);
        }
    }
    MonotonicityVerdict {
        holds: violations == 0,
        from_step,
        checked,
        violations,
        first_violation,
        worst_relative_increase: worst,
    }
}
