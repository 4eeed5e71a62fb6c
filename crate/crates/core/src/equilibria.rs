//! Threshold quantities, equilibrium points and regime classification.
//!
//! The discrete scheme has the same equilibria as the delayed ODE model:
//! the disease-free point `E0`, the endemic point without immune response
//! `E*` (exists for `R0 > 1`) and the endemic point with CTL response `Ē`
//! (exists for `R1 > 1`). The regime is fixed by where `R0` and `R1` sit
//! relative to one.

use std::fmt;

use thiserror::Error;

use crate::model::{ParameterValues, Parameters, State};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproductionNumbers {
    /// Basic reproduction number, `beta N lambda / (d mu)`.
    pub r0: f64,
    /// Immune response reproduction number,
    /// `beta N (lambda c mu - beta s a N) / (d c mu^2)`.
    pub r1: f64,
}

pub fn reproduction_numbers(params: &Parameters) -> ReproductionNumbers {
    let ParameterValues {
        lambda,
        d,
        beta,
        a,
        mu,
        big_n,
        c,
        s,
        ..
    } = *params.values();
    ReproductionNumbers {
        r0: beta * big_n * lambda / (d * mu),
        r1: beta * big_n * (lambda * c * mu - beta * s * a * big_n) / (d * c * mu * mu),
    }
}

/// `lambda c mu - beta s a N`; `Ē` can only be positive when this is.
fn immune_margin(v: &ParameterValues) -> f64 {
    v.lambda * v.c * v.mu - v.beta * v.s * v.a * v.big_n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSet {
    pub e0: State,
    /// Present iff `R0 > 1`.
    pub e_star: Option<State>,
    /// Present iff `R1 > 1`.
    pub e_bar: Option<State>,
    pub numbers: ReproductionNumbers,
}

impl EquilibriumSet {
    /// All equilibria that exist, in the order E0, E*, Ē.
    pub fn present(&self) -> Vec<(RegimeKind, State)> {
        let mut out = vec![(RegimeKind::DiseaseFreeStable, self.e0)];
        if let Some(e) = self.e_star {
            out.push((RegimeKind::NoImmuneEndemic, e));
        }
        if let Some(e) = self.e_bar {
            out.push((RegimeKind::ImmuneEndemic, e));
        }
        out
    }
}

/// Equilibria in terms of `R0` and `R1`.
pub fn equilibrium_set(params: &Parameters) -> EquilibriumSet {
    let numbers = reproduction_numbers(params);
    let v = params.values();
    let ReproductionNumbers { r0, r1 } = numbers;
    let x0 = params.x0();

    let e_star = (r0 > 1.0).then(|| {
        State::new(
            x0 / r0,
            v.lambda * (r0 - 1.0) / (v.a * r0),
            v.big_n * v.lambda * (r0 - 1.0) / (v.mu * r0),
            0.0,
        )
    });

    let e_bar = (immune_margin(v) > 0.0 && r1 > 1.0).then(|| {
        State::new(
            r1 * v.mu / (v.beta * v.big_n),
            v.s * v.beta * v.big_n / (v.mu * v.c * r1),
            v.beta * v.big_n * v.big_n * v.a * v.s / (v.mu * v.mu * v.c * r1),
            v.a * (r1 - 1.0) / v.p,
        )
    });

    EquilibriumSet {
        e0: State::new(x0, 0.0, 0.0, 0.0),
        e_star,
        e_bar,
        numbers,
    }
}

/// `E*` written directly in the model rates.
pub fn e_star_from_rates(v: &ParameterValues) -> State {
    let growth = v.beta * v.big_n * v.lambda - v.d * v.mu;
    State::new(
        v.mu / (v.beta * v.big_n),
        growth / (v.beta * v.big_n * v.a),
        growth / (v.beta * v.mu),
        0.0,
    )
}

/// `Ē` written directly in the model rates.
pub fn e_bar_from_rates(v: &ParameterValues) -> State {
    let margin = immune_margin(v);
    State::new(
        margin / (v.d * v.c * v.mu),
        v.d * v.mu * v.s / margin,
        v.s * v.a * v.big_n * v.d / margin,
        (v.beta * v.a * v.big_n * margin - v.a * v.d * v.c * v.mu * v.mu)
            / (v.p * v.d * v.c * v.mu * v.mu),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeKind {
    /// `R0 <= 1`: infection dies out.
    DiseaseFreeStable,
    /// `R1 <= 1 < R0`: infection persists without CTL response.
    NoImmuneEndemic,
    /// `R1 > 1`: infection persists with an active CTL response.
    ImmuneEndemic,
}

impl RegimeKind {
    pub fn name(self) -> &'static str {
        match self {
            RegimeKind::DiseaseFreeStable => "DiseaseFreeStable",
            RegimeKind::NoImmuneEndemic => "NoImmuneEndemic",
            RegimeKind::ImmuneEndemic => "ImmuneEndemic",
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeClassification {
    pub kind: RegimeKind,
    pub predicted_attractor: State,
}

/// Picks the globally attracting equilibrium from the thresholds.
///
/// Ties go to the stable side: `R0 = 1` is disease-free, `R1 = 1` is
/// endemic without immune response.
pub fn classify_regime(nums: &ReproductionNumbers, eqs: &EquilibriumSet) -> RegimeClassification {
    if nums.r0 <= 1.0 {
        RegimeClassification {
            kind: RegimeKind::DiseaseFreeStable,
            predicted_attractor: eqs.e0,
        }
    } else if nums.r1 <= 1.0 {
        RegimeClassification {
            kind: RegimeKind::NoImmuneEndemic,
            predicted_attractor: eqs.e_star.expect("E* exists whenever R0 > 1"),
        }
    } else {
        RegimeClassification {
            kind: RegimeKind::ImmuneEndemic,
            predicted_attractor: eqs.e_bar.expect("Ē exists whenever R1 > 1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma2Witness {
    pub y_star: f64,
    pub y_bar: f64,
    /// `y_star < y_bar`.
    pub holds: bool,
}

/// Compares the infected level of `E*` with the `Ē` formula `s beta N / (mu c R1)`
/// when `R1 < 1 < R0`.
///
/// For `R1 <= 0` the `Ē` formula is negative and the comparison fails; the
/// witness reports that rather than hiding it.
pub fn check_lemma2(params: &Parameters) -> Result<Lemma2Witness, EquilibriumError> {
    let ReproductionNumbers { r0, r1 } = reproduction_numbers(params);
    if !(r1 < 1.0 && 1.0 < r0) {
        return Err(EquilibriumError::NotApplicable("requires R1 < 1 < R0"));
    }
    let v = params.values();
    let y_star = v.lambda * (r0 - 1.0) / (v.a * r0);
    let y_bar = v.s * v.beta * v.big_n / (v.mu * v.c * r1);
    Ok(Lemma2Witness {
        y_star,
        y_bar,
        holds: y_star < y_bar,
    })
}
