//! Parameters, compartment states, delay history and the NSFD update map.
//!
//! One step of the scheme reads
//!
//! ```text
//! (X' - X)/h = lambda - d X' - beta X' V
//! (Y' - Y)/h = beta X[n-m+1] V[n-m] - a Y' - p Y' Z
//! (V' - V)/h = a N Y' - mu V'
//! (Z' - Z)/h = c X Y' Z - s Z'
//! ```
//!
//! where primes denote step `n+1` and `m = tau / h`. Each equation is linear
//! in its primed unknown, so solving them in the order X, Y, V, Z gives the
//! explicit map implemented by [`nsfd_step`].

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

/// Tolerance used when deciding whether `tau / h` is an integer.
pub const DELAY_RATIO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParameterError {
    #[error("tau / h = {ratio} is not an integer (tau = {tau}, h = {h})")]
    NonIntegerDelayRatio { tau: f64, h: f64, ratio: f64 },
    #[error("parameter `{name}` must be {requirement}, got {value}")]
    NonPositiveParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
}

/// Unvalidated model rates plus delay and step size.
///
/// Units follow the usual within-host conventions: concentrations in cells
/// (or virions) per microlitre, time in days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterValues {
    /// Source rate of CD4+ T cells.
    pub lambda: f64,
    /// Death rate of uninfected cells.
    pub d: f64,
    /// Infection rate.
    pub beta: f64,
    /// Death rate of infected cells.
    pub a: f64,
    /// Rate at which CTLs clear infected cells.
    pub p: f64,
    /// Clearance rate of free virus.
    pub mu: f64,
    /// Virions produced per infected cell.
    pub big_n: f64,
    /// CTL activation rate.
    pub c: f64,
    /// CTL decay rate.
    pub s: f64,
    /// Intracellular delay in days.
    pub tau: f64,
    /// Step size in days.
    pub h: f64,
}

impl ParameterValues {
    /// Field names in declaration order, as used by configuration files.
    pub const FIELD_NAMES: [&'static str; 11] = [
        "lambda", "d", "beta", "a", "p", "mu", "N", "c", "s", "tau", "h",
    ];

    /// Fixed rates used for the three reference regimes, with `beta` and `c`
    /// set to the first (disease-free) case, `tau = 2` and `h = 0.1`.
    pub fn reference() -> Self {
        Self {
            lambda: 1.0,
            d: 0.1,
            beta: 0.00025,
            a: 0.2,
            p: 0.0001,
            mu: 3.0,
            big_n: 750.0,
            c: 0.005,
            s: 0.2,
            tau: 2.0,
            h: 0.1,
        }
    }

    pub fn with_infection(mut self, beta: f64, c: f64) -> Self {
        self.beta = beta;
        self.c = c;
        self
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_delay(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }
}

/// Validated parameters together with the number of delay steps `m = tau / h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters {
    values: ParameterValues,
    delay_steps: usize,
}

impl Parameters {
    pub fn new(values: ParameterValues) -> Result<Self, ParameterError> {
        make_parameters(values)
    }

    pub fn values(&self) -> &ParameterValues {
        &self.values
    }

    /// Number of steps spanned by the delay, `m`.
    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Denominator function of the scheme; always equal to the step size.
    pub fn phi(&self) -> f64 {
        self.values.h
    }

    /// Uninfected-cell level of the disease-free state, `lambda / d`.
    pub fn x0(&self) -> f64 {
        self.values.lambda / self.values.d
    }
}

/// Validates raw parameter values and derives the delay step count.
///
/// All rates must be strictly positive except `beta`, which may be zero
/// (the infection-free limit). `tau` must be nonnegative and an integer
/// multiple of `h`.
pub fn make_parameters(values: ParameterValues) -> Result<Parameters, ParameterError> {
    let ParameterValues {
        lambda,
        d,
        beta,
        a,
        p,
        mu,
        big_n,
        c,
        s,
        tau,
        h,
    } = values;

    let positive = [
        ("lambda", lambda),
        ("d", d),
        ("a", a),
        ("p", p),
        ("mu", mu),
        ("N", big_n),
        ("c", c),
        ("s", s),
        ("h", h),
    ];
    for (name, value) in positive {
        if !(value.is_finite() && value > 0.0) {
            return Err(ParameterError::NonPositiveParameter {
                name,
                value,
                requirement: "finite and strictly positive",
            });
        }
    }
    for (name, value) in [("beta", beta), ("tau", tau)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(ParameterError::NonPositiveParameter {
                name,
                value,
                requirement: "finite and nonnegative",
            });
        }
    }

    let ratio = tau / h;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > DELAY_RATIO_TOLERANCE || rounded > u32::MAX as f64 {
        return Err(ParameterError::NonIntegerDelayRatio { tau, h, ratio });
    }

    Ok(Parameters {
        values,
        delay_steps: rounded as usize,
    })
}

/// Concentrations of the four compartments at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    /// Uninfected CD4+ T cells.
    pub x: f64,
    /// Infected cells.
    pub y: f64,
    /// Free virus.
    pub v: f64,
    /// CTL cells.
    pub z: f64,
}

impl State {
    pub const fn new(x: f64, y: f64, v: f64, z: f64) -> Self {
        Self { x, y, v, z }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.v, self.z]
    }

    pub fn from_array([x, y, v, z]: [f64; 4]) -> Self {
        Self { x, y, v, z }
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.to_array().iter().all(|&c| c > 0.0 && c.is_finite())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|&c| c >= 0.0 && c.is_finite())
    }

    /// Largest per-coordinate distance to `target`, measured relative to
    /// `max(|target_i|, floor)`.
    pub fn relative_distance(&self, target: &State, floor: f64) -> f64 {
        self.to_array()
            .iter()
            .zip(target.to_array())
            .map(|(&a, b)| (a - b).abs() / b.abs().max(floor))
            .fold(0.0, f64::max)
    }

    /// Largest absolute coordinate difference.
    pub fn sup_distance(&self, other: &State) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(&a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x, self.y, self.v, self.z)
    }
}

/// Read access to the last `m + 1` states of a trajectory.
///
/// `lag(0)` is the newest state (step `n`), `lag(m)` the oldest (step `n - m`).
pub trait History {
    fn delay_steps(&self) -> usize;

    /// State at step `n - k`. Panics if `k > delay_steps()`.
    fn lag(&self, k: usize) -> State;

    fn newest(&self) -> State {
        self.lag(0)
    }
}

/// A window of consecutive states, oldest first.
impl History for [State] {
    fn delay_steps(&self) -> usize {
        assert!(!self.is_empty(), "history window must not be empty");
        self.len() - 1
    }

    fn lag(&self, k: usize) -> State {
        self[self.len() - 1 - k]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InitialDataError {
    #[error("initial history must contain {expected} states (m + 1), got {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("initial history entry {index} has a negative or non-finite coordinate")]
    Negative { index: usize },
    #[error("the newest initial state must be strictly positive in every coordinate")]
    NewestNotPositive,
}

/// Initial history `psi_k` for `k = -m, ..., 0`, stored oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    history: Vec<State>,
}

impl InitialData {
    /// Constant history equal to `state` over all `m + 1` entries.
    pub fn constant(state: State, delay_steps: usize) -> Result<Self, InitialDataError> {
        Self::from_history(vec![state; delay_steps + 1])
    }

    pub fn from_history(history: Vec<State>) -> Result<Self, InitialDataError> {
        if history.is_empty() {
            return Err(InitialDataError::WrongLength {
                expected: 1,
                found: 0,
            });
        }
        if let Some(index) = history.iter().position(|s| !s.is_nonnegative()) {
            return Err(InitialDataError::Negative { index });
        }
        if !history[history.len() - 1].is_strictly_positive() {
            return Err(InitialDataError::NewestNotPositive);
        }
        Ok(Self { history })
    }

    /// Checks that the history length matches the parameters' delay.
    pub fn check_for(&self, params: &Parameters) -> Result<(), InitialDataError> {
        let expected = params.delay_steps() + 1;
        if self.history.len() != expected {
            return Err(InitialDataError::WrongLength {
                expected,
                found: self.history.len(),
            });
        }
        Ok(())
    }

    pub fn history(&self) -> &[State] {
        &self.history
    }

    pub fn delay_steps(&self) -> usize {
        self.history.len() - 1
    }

    /// State at step 0.
    pub fn current(&self) -> State {
        self.history[self.history.len() - 1]
    }
}

/// Sliding window of the last `m + 1` states, fed by the step loop.
#[derive(Debug, Clone)]
pub struct DelayLine {
    window: VecDeque<State>,
    delay_steps: usize,
}

impl DelayLine {
    pub fn new(init: &InitialData) -> Self {
        Self {
            window: init.history().iter().copied().collect(),
            delay_steps: init.delay_steps(),
        }
    }

    /// History that sits at `state` for all `m + 1` entries.
    pub fn constant(state: State, delay_steps: usize) -> Self {
        Self {
            window: std::iter::repeat_n(state, delay_steps + 1).collect(),
            delay_steps,
        }
    }

    /// Appends the state for step `n + 1` and drops the oldest entry.
    pub fn push(&mut self, state: State) {
        self.window.pop_front();
        self.window.push_back(state);
    }

    /// Computes the next state, pushes it and returns it.
    pub fn advance(&mut self, params: &Parameters) -> State {
        let next = nsfd_step(params, self);
        self.push(next);
        next
    }

    pub fn iter(&self) -> impl Iterator<Item = &State> + '_ {
        self.window.iter()
    }

    pub fn to_vec(&self) -> Vec<State> {
        self.window.iter().copied().collect()
    }
}

impl History for DelayLine {
    fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    fn lag(&self, k: usize) -> State {
        assert!(
            k <= self.delay_steps,
            "lag {k} exceeds delay {}",
            self.delay_steps
        );
        self.window[self.delay_steps - k]
    }
}

/// Computes step `n + 1` from the history ending at step `n`.
///
/// Updates are evaluated sequentially (X, then Y, then V, then Z) so that the
/// Y update can use the fresh `X[n+1]` when `m = 0` and the V and Z updates
/// use the fresh `Y[n+1]`.
pub fn nsfd_step<H: History + ?Sized>(params: &Parameters, hist: &H) -> State {
    let m = hist.delay_steps();
    assert_eq!(
        m,
        params.delay_steps(),
        "history length does not match tau / h"
    );
    let ParameterValues {
        lambda,
        d,
        beta,
        a,
        p,
        mu,
        big_n,
        c,
        s,
        ..
    } = params.values;
    let phi = params.phi();
    let cur = hist.lag(0);

    let x = (lambda * phi + cur.x) / (1.0 + d * phi + beta * phi * cur.v);
    let x_lag = if m == 0 { x } else { hist.lag(m - 1).x };
    let v_lag = hist.lag(m).v;
    let y = (cur.y + beta * phi * x_lag * v_lag) / (1.0 + a * phi + p * phi * cur.z);
    let v = (cur.v + a * big_n * phi * y) / (1.0 + mu * phi);
    let z = (cur.z + c * phi * cur.x * y * cur.z) / (1.0 + s * phi);

    State { x, y, v, z }
}

/// Left-minus-right residuals of the implicit scheme at a proposed `next`.
pub fn implicit_residual<H: History + ?Sized>(
    params: &Parameters,
    hist: &H,
    next: &State,
) -> [f64; 4] {
    let phi = params.phi();
    implicit_terms(params, hist, next).map(|eq| eq.residual(phi))
}

/// Sum of the magnitudes of the terms entering each residual; the natural
/// scale against which a residual is judged to be zero.
pub fn implicit_residual_scale<H: History + ?Sized>(
    params: &Parameters,
    hist: &H,
    next: &State,
) -> [f64; 4] {
    let phi = params.phi();
    implicit_terms(params, hist, next).map(|eq| eq.scale(phi))
}

/// `(next - now) / phi = sum(rhs)` for one compartment.
struct ImplicitEquation {
    now: f64,
    next: f64,
    rhs: [f64; 3],
}

impl ImplicitEquation {
    fn residual(&self, phi: f64) -> f64 {
        (self.next - self.now) / phi - self.rhs.iter().sum::<f64>()
    }

    fn scale(&self, phi: f64) -> f64 {
        (self.next.abs() + self.now.abs()) / phi + self.rhs.iter().map(|t| t.abs()).sum::<f64>()
    }
}

fn implicit_terms<H: History + ?Sized>(
    params: &Parameters,
    hist: &H,
    next: &State,
) -> [ImplicitEquation; 4] {
    let m = hist.delay_steps();
    let ParameterValues {
        lambda,
        d,
        beta,
        a,
        p,
        mu,
        big_n,
        c,
        s,
        ..
    } = params.values;
    let cur = hist.lag(0);
    let x_lag = if m == 0 { next.x } else { hist.lag(m - 1).x };
    let v_lag = hist.lag(m).v;

    [
        ImplicitEquation {
            now: cur.x,
            next: next.x,
            rhs: [lambda, -d * next.x, -beta * next.x * cur.v],
        },
        ImplicitEquation {
            now: cur.y,
            next: next.y,
            rhs: [beta * x_lag * v_lag, -a * next.y, -p * next.y * cur.z],
        },
        ImplicitEquation {
            now: cur.v,
            next: next.v,
            rhs: [a * big_n * next.y, -mu * next.v, 0.0],
        },
        ImplicitEquation {
            now: cur.z,
            next: next.z,
            rhs: [c * cur.x * next.y * cur.z, -s * next.z, 0.0],
        },
    ]
}
