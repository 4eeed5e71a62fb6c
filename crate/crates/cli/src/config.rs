//! Run configuration: a flat `key = value` document.
//!
//! ```text
//! # Case II, constant history at set I
//! lambda = 1
//! d = 0.1
//! beta = 0.0005
//! a = 0.2
//! p = 0.0001
//! mu = 3
//! N = 750
//! c = 0.01
//! s = 0.2
//! tau = 2
//! h = 0.1
//! initial = set-I
//! steps = 50000
//! ```
//!
//! `#` starts a comment, lists are comma separated. Unknown and repeated
//! keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hivnsfd_core::model::DELAY_RATIO_TOLERANCE;
use hivnsfd_core::{
    make_parameters, ConvergenceSettings, InitialData, LyapunovTarget, ParameterError,
    ParameterValues, Parameters, State, SweepGrid,
};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        ConfigError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            field: field.to_owned(),
            message: message.into(),
        }
    }
}

impl From<ParameterError> for ConfigError {
    fn from(err: ParameterError) -> Self {
        let field = match &err {
            ParameterError::NonPositiveParameter { name, .. } => name,
            ParameterError::NonIntegerDelayRatio { .. } => "tau",
        };
        ConfigError::invalid(field, err.to_string())
    }
}

/// Initial set I: `(X, Y, V, Z) = (5, 1, 1, 2)` over the whole history.
pub const SET_ONE: State = State::new(5.0, 1.0, 1.0, 2.0);
/// Initial set II: `(15, 2, 1, 4)` over the whole history.
pub const SET_TWO: State = State::new(15.0, 2.0, 1.0, 4.0);

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    SetOne,
    SetTwo,
    /// Constant history at one state.
    Constant(State),
    /// Explicit history `psi_{-m}, ..., psi_0`, oldest first.
    History(Vec<State>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Duration {
    Steps(usize),
    /// Final time in days; `t_end / h` is an integer.
    TEnd(f64),
}

/// Grid axes for the `sweep` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub beta_values: Vec<f64>,
    pub c_values: Vec<f64>,
    pub tau_values: Option<Vec<f64>>,
}

/// A validated configuration document.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: ParameterValues,
    params: Parameters,
    initial: InitialSpec,
    init: InitialData,
    duration: Duration,
    omega: bool,
    lyapunov: Option<LyapunovTarget>,
    output: Option<PathBuf>,
    sweep: Option<SweepSpec>,
    tol: Option<f64>,
    window: Option<usize>,
}

const PARAMETER_KEYS: [&str; 11] = [
    "lambda", "d", "beta", "a", "p", "mu", "N", "c", "s", "tau", "h",
];

const OTHER_KEYS: [&str; 11] = [
    "initial",
    "steps",
    "t_end",
    "omega",
    "lyapunov",
    "output",
    "beta_values",
    "c_values",
    "tau_values",
    "tol",
    "window",
];

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    column: usize,
    text: String,
}

impl Entry {
    fn error(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::parse(self.line, self.column, message)
    }

    fn number(&self) -> Result<f64, ConfigError> {
        parse_number(&self.text)
            .ok_or_else(|| self.error(format!("expected a number, got `{}`", self.text)))
    }

    fn integer(&self) -> Result<usize, ConfigError> {
        self.text.parse().map_err(|_| {
            self.error(format!(
                "expected a nonnegative integer, got `{}`",
                self.text
            ))
        })
    }

    fn boolean(&self) -> Result<bool, ConfigError> {
        match self.text.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.error(format!("expected true or false, got `{other}`"))),
        }
    }

    /// Comma-separated numbers, with the column of each item for diagnostics.
    fn numbers(&self) -> Result<Vec<f64>, ConfigError> {
        let mut out = Vec::new();
        let mut offset = 0;
        for item in self.text.split(',') {
            let lead = item.len() - item.trim_start().len();
            let column = self.column + self.text[..offset + lead].chars().count();
            let trimmed = item.trim();
            let value = parse_number(trimmed).ok_or_else(|| {
                ConfigError::parse(
                    self.line,
                    column,
                    format!("expected a number, got `{trimmed}`"),
                )
            })?;
            out.push(value);
            offset += item.len() + 1;
        }
        Ok(out)
    }
}

fn parse_number(text: &str) -> Option<f64> {
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let key_column = content.chars().take_while(|c| c.is_whitespace()).count() + 1;
        let Some(eq) = content.find('=') else {
            return Err(ConfigError::parse(
                line,
                key_column,
                "expected `key = value`",
            ));
        };
        let key = content[..eq].trim();
        if key.is_empty() {
            return Err(ConfigError::parse(
                line,
                key_column,
                "missing key before `=`",
            ));
        }
        if !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::parse(
                line,
                key_column,
                format!("malformed key `{key}`"),
            ));
        }
        if !PARAMETER_KEYS.contains(&key) && !OTHER_KEYS.contains(&key) {
            return Err(ConfigError::parse(
                line,
                key_column,
                format!("unknown key `{key}`"),
            ));
        }
        let rest = &content[eq + 1..];
        let lead = rest.len() - rest.trim_start().len();
        let column = content[..eq + 1 + lead].chars().count() + 1;
        let value = rest.trim();
        if value.is_empty() {
            return Err(ConfigError::parse(
                line,
                column,
                format!("missing value for `{key}`"),
            ));
        }
        if let Some(first) = entries.get(key) {
            return Err(ConfigError::parse(
                line,
                key_column,
                format!("`{key}` already set on line {}", first.line),
            ));
        }
        entries.insert(
            key.to_owned(),
            Entry {
                line,
                column,
                text: value.to_owned(),
            },
        );
    }
    Ok(entries)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let entries = tokenize(text)?;
    let get = |key: &str| entries.get(key);

    let number = |key: &str| get(key).map(Entry::number).transpose();
    let list = |key: &str| get(key).map(Entry::numbers).transpose();

    let beta_values = list("beta_values")?;
    let c_values = list("c_values")?;
    let tau_values = list("tau_values")?;
    let sweep = match (beta_values, c_values) {
        (Some(beta_values), Some(c_values)) => Some(SweepSpec {
            beta_values,
            c_values,
            tau_values,
        }),
        (None, None) if tau_values.is_none() => None,
        (None, _) => {
            return Err(ConfigError::invalid(
                "beta_values",
                "sweeps need both beta_values and c_values",
            ))
        }
        (Some(_), None) => {
            return Err(ConfigError::invalid(
                "c_values",
                "sweeps need both beta_values and c_values",
            ))
        }
    };

    let defaults = ParameterValues::reference();
    let required = |key: &str, fallback: Option<f64>| -> Result<f64, ConfigError> {
        number(key)?
            .or(fallback)
            .ok_or_else(|| ConfigError::invalid(key, "missing"))
    };
    // In a sweep, beta and c default to the first grid value.
    let beta_fallback = sweep.as_ref().map(|s| s.beta_values[0]);
    let c_fallback = sweep.as_ref().map(|s| s.c_values[0]);
    let values = ParameterValues {
        lambda: required("lambda", None)?,
        d: required("d", None)?,
        beta: required("beta", beta_fallback)?,
        a: required("a", None)?,
        p: required("p", None)?,
        mu: required("mu", None)?,
        big_n: required("N", None)?,
        c: required("c", c_fallback)?,
        s: required("s", None)?,
        tau: required("tau", Some(defaults.tau))?,
        h: required("h", Some(defaults.h))?,
    };
    let params = make_parameters(values)?;

    let initial = match get("initial") {
        None => return Err(ConfigError::invalid("initial", "missing")),
        Some(entry) => match entry.text.as_str() {
            "set-I" => InitialSpec::SetOne,
            "set-II" => InitialSpec::SetTwo,
            _ => {
                let numbers = entry.numbers()?;
                let states = || {
                    numbers
                        .chunks_exact(4)
                        .map(|q| State::new(q[0], q[1], q[2], q[3]))
                        .collect::<Vec<_>>()
                };
                let m = params.delay_steps();
                match numbers.len() {
                    4 => InitialSpec::Constant(states()[0]),
                    n if n == 4 * (m + 1) => InitialSpec::History(states()),
                    n => {
                        return Err(ConfigError::invalid(
                            "initial",
                            format!(
                                "expected set-I, set-II, 4 numbers or {} numbers (m + 1 = {} states), got {n}",
                                4 * (m + 1),
                                m + 1
                            ),
                        ))
                    }
                }
            }
        },
    };
    let init = expand_initial(&initial, params.delay_steps())?;

    let duration = match (get("steps"), get("t_end")) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::invalid(
                "steps",
                "steps and t_end are mutually exclusive",
            ))
        }
        (None, None) => {
            return Err(ConfigError::invalid(
                "steps",
                "one of steps or t_end is required",
            ))
        }
        (Some(entry), None) => {
            let steps = entry.integer()?;
            if steps == 0 {
                return Err(ConfigError::invalid("steps", "must be at least 1"));
            }
            Duration::Steps(steps)
        }
        (None, Some(entry)) => {
            let t_end = entry.number()?;
            let ratio = t_end / values.h;
            if t_end <= 0.0
                || (ratio - ratio.round()).abs() > DELAY_RATIO_TOLERANCE
                || ratio.round() < 1.0
            {
                return Err(ConfigError::invalid(
                    "t_end",
                    format!("must be a positive integer multiple of h, got t_end / h = {ratio}"),
                ));
            }
            Duration::TEnd(t_end)
        }
    };

    let omega = get("omega")
        .map(Entry::boolean)
        .transpose()?
        .unwrap_or(false);
    let lyapunov = get("lyapunov")
        .map(|e| e.text.parse::<LyapunovTarget>().map_err(|msg| e.error(msg)))
        .transpose()?;
    let output = get("output").map(|e| PathBuf::from(&e.text));

    let tol = number("tol")?;
    if let Some(tol) = tol {
        if tol <= 0.0 {
            return Err(ConfigError::invalid("tol", "must be strictly positive"));
        }
    }
    let window = get("window").map(Entry::integer).transpose()?;
    if window == Some(0) {
        return Err(ConfigError::invalid("window", "must be at least 1"));
    }

    if let Some(spec) = &sweep {
        validate_sweep(spec, &values, &initial)?;
    }

    Ok(RunConfig {
        values,
        params,
        initial,
        init,
        duration,
        omega,
        lyapunov,
        output,
        sweep,
        tol,
        window,
    })
}

fn expand_initial(initial: &InitialSpec, m: usize) -> Result<InitialData, ConfigError> {
    let result = match initial {
        InitialSpec::SetOne => InitialData::constant(SET_ONE, m),
        InitialSpec::SetTwo => InitialData::constant(SET_TWO, m),
        InitialSpec::Constant(state) => InitialData::constant(*state, m),
        InitialSpec::History(states) => InitialData::from_history(states.clone()),
    };
    result.map_err(|err| ConfigError::invalid("initial", err.to_string()))
}

fn validate_sweep(
    spec: &SweepSpec,
    values: &ParameterValues,
    initial: &InitialSpec,
) -> Result<(), ConfigError> {
    if matches!(initial, InitialSpec::History(_)) {
        return Err(ConfigError::invalid(
            "initial",
            "sweeps start every cell from a constant history; use set-I, set-II or 4 numbers",
        ));
    }
    for &beta in &spec.beta_values {
        make_parameters(ParameterValues { beta, ..*values })
            .map_err(|e| ConfigError::invalid("beta_values", e.to_string()))?;
    }
    for &c in &spec.c_values {
        make_parameters(ParameterValues { c, ..*values })
            .map_err(|e| ConfigError::invalid("c_values", e.to_string()))?;
    }
    for &tau in spec.tau_values.iter().flatten() {
        make_parameters(ParameterValues { tau, ..*values })
            .map_err(|e| ConfigError::invalid("tau_values", e.to_string()))?;
    }
    Ok(())
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl RunConfig {
    pub fn values(&self) -> &ParameterValues {
        &self.values
    }

    pub fn parameters(&self) -> &Parameters {
        &self.params
    }

    pub fn initial(&self) -> &InitialSpec {
        &self.initial
    }

    /// The initial history expanded to `m + 1` states.
    pub fn initial_data(&self) -> &InitialData {
        &self.init
    }

    pub fn duration(&self) -> Duration {
        self.duration
    }

    /// Number of steps to run; for sweeps this is the per-cell budget.
    pub fn steps(&self) -> usize {
        match self.duration {
            Duration::Steps(n) => n,
            Duration::TEnd(t) => (t / self.values.h).round() as usize,
        }
    }

    pub fn omega(&self) -> bool {
        self.omega
    }

    pub fn lyapunov(&self) -> Option<LyapunovTarget> {
        self.lyapunov
    }

    pub fn set_lyapunov(&mut self, target: Option<LyapunovTarget>) {
        self.lyapunov = target;
    }

    pub fn output(&self) -> Option<&Path> {
        self.output.as_deref()
    }

    pub fn sweep(&self) -> Option<&SweepSpec> {
        self.sweep.as_ref()
    }

    pub fn convergence_settings(&self) -> ConvergenceSettings {
        let defaults = ConvergenceSettings::default();
        ConvergenceSettings {
            tol: self.tol.unwrap_or(defaults.tol),
            window: self.window.unwrap_or(defaults.window),
            max_steps: self.steps(),
        }
    }

    /// The sweep grid, when the document has sweep axes.
    pub fn sweep_grid(&self) -> Option<SweepGrid> {
        self.sweep.as_ref().map(|spec| SweepGrid {
            base: self.values,
            beta_values: spec.beta_values.clone(),
            c_values: spec.c_values.clone(),
            tau_values: spec.tau_values.clone(),
            h: self.values.h,
            settings: self.convergence_settings(),
        })
    }

    /// Starting state shared by every sweep cell.
    pub fn sweep_start(&self) -> State {
        self.init.current()
    }

    /// Serializes back to a document that parses to an equal config.
    pub fn to_document(&self) -> String {
        let v = &self.values;
        let mut out = String::new();
        for (key, value) in PARAMETER_KEYS.iter().zip([
            v.lambda, v.d, v.beta, v.a, v.p, v.mu, v.big_n, v.c, v.s, v.tau, v.h,
        ]) {
            let _ = writeln!(out, "{key} = {value:?}");
        }
        let initial = match &self.initial {
            InitialSpec::SetOne => "set-I".to_owned(),
            InitialSpec::SetTwo => "set-II".to_owned(),
            InitialSpec::Constant(s) => join(&s.to_array()),
            InitialSpec::History(states) => {
                join(&states.iter().flat_map(|s| s.to_array()).collect::<Vec<_>>())
            }
        };
        let _ = writeln!(out, "initial = {initial}");
        match self.duration {
            Duration::Steps(n) => {
                let _ = writeln!(out, "steps = {n}");
            }
            Duration::TEnd(t) => {
                let _ = writeln!(out, "t_end = {t:?}");
            }
        }
        let _ = writeln!(out, "omega = {}", self.omega);
        if let Some(target) = self.lyapunov {
            let _ = writeln!(out, "lyapunov = {target}");
        }
        if let Some(path) = &self.output {
            let _ = writeln!(out, "output = {}", path.display());
        }
        if let Some(spec) = &self.sweep {
            let _ = writeln!(out, "beta_values = {}", join(&spec.beta_values));
            let _ = writeln!(out, "c_values = {}", join(&spec.c_values));
            if let Some(taus) = &spec.tau_values {
                let _ = writeln!(out, "tau_values = {}", join(taus));
            }
        }
        if let Some(tol) = self.tol {
            let _ = writeln!(out, "tol = {tol:?}");
        }
        if let Some(window) = self.window {
            let _ = writeln!(out, "window = {window}");
        }
        out
    }
}
