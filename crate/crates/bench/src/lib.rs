//! Shared fixtures for the benchmarks.

use hivnsfd_core::{make_parameters, InitialData, ParameterValues, Parameters, State};

pub const SET_ONE: State = State::new(5.0, 1.0, 1.0, 2.0);
pub const SET_TWO: State = State::new(15.0, 2.0, 1.0, 4.0);

/// Reference rates with the given infection and CTL activation rates.
pub fn case(beta: f64, c: f64) -> Parameters {
    make_parameters(ParameterValues::reference().with_infection(beta, c))
        .expect("reference rates are valid")
}

pub fn constant(params: &Parameters, state: State) -> InitialData {
    InitialData::constant(state, params.delay_steps()).expect("state is positive")
}
