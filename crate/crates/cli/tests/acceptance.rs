//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runtime budgets are part of each criterion and are checked against wall
//! time of this process.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hivnsfd_core::lyapunov::MONOTONE_SLACK;
use hivnsfd_core::simulate::{absorbing_bound, RELATIVE_FLOOR};
use hivnsfd_core::{
    bounds_report, check_monotone, equilibrium_set, implicit_residual, implicit_residual_scale,
    lyapunov_e0, lyapunov_ebar, lyapunov_estar, lyapunov_series, make_parameters, nsfd_step,
    reproduction_numbers, run, run_sweep, run_to_convergence, sweep_summary, ConvergenceSettings,
    InitialData, LyapunovTarget, ParameterValues, Parameters, State, SweepGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SET_ONE: State = State::new(5.0, 1.0, 1.0, 2.0);
const SET_TWO: State = State::new(15.0, 2.0, 1.0, 4.0);

const CASES: [(&str, f64, f64); 3] = [
    ("Case I", 0.00025, 0.005),
    ("Case II", 0.0005, 0.01),
    ("Case III", 0.0007, 0.1),
];

fn case(beta: f64, c: f64) -> Parameters {
    make_parameters(ParameterValues::reference().with_infection(beta, c)).unwrap()
}

fn constant(p: &Parameters, s: State) -> InitialData {
    InitialData::constant(s, p.delay_steps()).unwrap()
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

/// Outcome of one criterion: whether the property held, and a short account.
struct Verdict {
    ok: bool,
    detail: String,
}

impl Verdict {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Self {
            ok,
            detail: detail.into(),
        }
    }
}

fn reproduction_numbers_match() -> Verdict {
    let expected = [(0.625, 0.3125), (1.25, 0.625), (1.75, 1.6275)];
    let mut worst: f64 = 0.0;
    for ((_, beta, c), (r0, r1)) in CASES.iter().zip(expected) {
        let n = reproduction_numbers(&case(*beta, *c));
        worst = worst.max(rel(n.r0, r0)).max(rel(n.r1, r1));
    }
    Verdict::new(worst <= 1e-12, format!("worst relative error {worst:.2e}"))
}

fn equilibria_match() -> Verdict {
    let case_one = equilibrium_set(&case(0.00025, 0.005));
    let e0_exact = case_one.e0 == State::new(10.0, 0.0, 0.0, 0.0);

    let e_star = equilibrium_set(&case(0.0005, 0.01)).e_star.unwrap();
    let star_err = [rel(e_star.x, 8.0), rel(e_star.y, 1.0), rel(e_star.v, 50.0)]
        .into_iter()
        .fold(0.0, f64::max);
    let star_ok = star_err <= 1e-9 && e_star.z == 0.0;

    let e_bar = equilibrium_set(&case(0.0007, 0.1)).e_bar.unwrap();
    let printed = [9.3, 0.215, 10.75, 1255.0];
    let bar_err = e_bar
        .to_array()
        .iter()
        .zip(printed)
        .map(|(&got, want)| rel(got, want))
        .fold(0.0, f64::max);
    Verdict::new(
        e0_exact && star_ok && bar_err <= 5e-3,
        format!(
            "E0 exact: {e0_exact}; E* error {star_err:.2e}; Ebar error {bar_err:.2e} against the printed values"
        ),
    )
}

fn fixed_points_hold() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (_, beta, c) in CASES {
        for _ in 0..100 {
            // h = tau / k with tau = 2 keeps tau / h an integer and h in [0.01, 1].
            let k = rng.gen_range(2..=200);
            let h = 2.0 / k as f64;
            let p = make_parameters(
                ParameterValues::reference()
                    .with_infection(beta, c)
                    .with_step(h),
            )
            .unwrap();
            for (_, e) in equilibrium_set(&p).present() {
                let hist = vec![e; p.delay_steps() + 1];
                worst = worst.max(nsfd_step(&p, hist.as_slice()).sup_distance(&e));
                checked += 1;
            }
        }
    }
    Verdict::new(
        worst <= 1e-10,
        format!("{checked} equilibrium steps, worst absolute deviation {worst:.2e}"),
    )
}

/// Rates drawn from the literature ranges used for the reference runs.
fn table_parameters(rng: &mut ChaCha8Rng, h: f64, m: usize) -> Parameters {
    make_parameters(ParameterValues {
        lambda: rng.gen_range(1.0..=10.0),
        d: rng.gen_range(0.007..=0.1),
        beta: rng.gen_range(0.00025..=0.5),
        a: rng.gen_range(0.2..=0.3),
        p: rng.gen_range(1e-4..=4.048e-4),
        mu: rng.gen_range(2.06..=3.81),
        big_n: rng.gen_range(6.25..=23599.9),
        c: rng.gen_range(0.0051..=3.912),
        s: rng.gen_range(0.004..=8.087),
        tau: m as f64 * h,
        h,
    })
    .unwrap()
}

fn random_state(rng: &mut ChaCha8Rng) -> State {
    State::new(
        rng.gen_range(1.0..20.0),
        rng.gen_range(0.1..5.0),
        rng.gen_range(0.1..5.0),
        rng.gen_range(0.1..5.0),
    )
}

fn implicit_explicit_agree() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let h = [0.01, 0.05, 0.1, 0.25, 0.5, 1.0][rng.gen_range(0..6)];
        let m = rng.gen_range(0..=30);
        let p = table_parameters(&mut rng, h, m);
        let hist: Vec<State> = (0..=m).map(|_| random_state(&mut rng)).collect();
        let next = nsfd_step(&p, hist.as_slice());
        let r = implicit_residual(&p, hist.as_slice(), &next);
        let scale = implicit_residual_scale(&p, hist.as_slice(), &next);
        for (ri, si) in r.iter().zip(scale) {
            worst = worst.max(ri.abs() / si);
        }
    }
    Verdict::new(
        worst <= 1e-12,
        format!("10000 draws, worst relative residual {worst:.2e}"),
    )
}

fn regimes_converge() -> Verdict {
    let settings = ConvergenceSettings::default();
    let mut ok = true;
    let mut parts = Vec::new();
    let targets = [
        (SET_ONE, State::new(10.0, 0.0, 0.0, 0.0)),
        (SET_ONE, State::new(8.0, 1.0, 50.0, 0.0)),
        (SET_TWO, State::new(9.3, 0.215, 10.75, 1255.0)),
    ];
    for (i, ((name, beta, c), (init, target))) in CASES.iter().zip(targets).enumerate() {
        let start = Instant::now();
        let p = case(*beta, *c);
        let verdict = run_to_convergence(&p, &constant(&p, init), &settings).unwrap();
        let elapsed = start.elapsed();
        let limit = verdict.limit.unwrap_or(verdict.final_state);
        let (err, tol) = match i {
            0 => (limit.sup_distance(&target), 1e-3),
            1 => (limit.relative_distance(&target, RELATIVE_FLOOR), 1e-3),
            _ => (limit.relative_distance(&target, RELATIVE_FLOOR), 1e-2),
        };
        let case_ok = verdict.converged
            && err <= tol
            && verdict.steps_used <= 1_000_000
            && elapsed <= Duration::from_secs(5);
        ok &= case_ok;
        parts.push(format!(
            "{name} error {err:.2e} after {} steps in {:.2} s",
            verdict.steps_used,
            elapsed.as_secs_f64()
        ));
    }
    Verdict::new(ok, parts.join("; "))
}

fn positivity_and_boundedness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws = 1000;
    let steps = 1000;
    let mut not_positive = 0;
    let mut underflowed = 0;
    let mut recursion_failures = 0;
    let mut smallest = f64::INFINITY;
    for _ in 0..draws {
        let h = [0.1, 0.25, 0.5, 1.0][rng.gen_range(0..4)];
        let tau = rng.gen_range(7..=21) as f64;
        let p = table_parameters(&mut rng, h, (tau / h).round() as usize);
        let init = constant(&p, random_state(&mut rng));
        let traj = run(&p, &init, steps, true).unwrap();
        let states = traj.states();
        for s in states {
            smallest = smallest.min(s.x.min(s.y).min(s.v).min(s.z));
        }
        if !states.iter().all(State::is_strictly_positive) {
            not_positive += 1;
            // Zero reached only from a value already below the smallest
            // normal double: exact arithmetic would stay positive.
            let only_underflow = states.windows(2).all(|w| {
                w[1].to_array()
                    .iter()
                    .zip(w[0].to_array())
                    .all(|(&now, before)| now > 0.0 || (now == 0.0 && before < f64::MIN_POSITIVE))
            });
            if only_underflow {
                underflowed += 1;
            }
        }
        if !bounds_report(&traj).unwrap().recursion_ok {
            recursion_failures += 1;
        }
    }
    Verdict::new(
        not_positive == 0 && recursion_failures == 0,
        format!(
            "{draws} draws x {steps} steps: {not_positive} with a nonpositive state \
             ({underflowed} of them by underflow to zero), smallest coordinate {smallest:.3e}, \
             {recursion_failures} recursion failures"
        ),
    )
}

fn lyapunov_certificates() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    let runs = [
        (0.00025, 0.005, SET_ONE, LyapunovTarget::E0, 20_000),
        (0.0005, 0.01, SET_ONE, LyapunovTarget::EStar, 50_000),
        (0.0007, 0.1, SET_TWO, LyapunovTarget::EBar, 50_000),
    ];
    for (beta, c, init, target, steps) in runs {
        let start = Instant::now();
        let p = case(beta, c);
        let traj = run(&p, &constant(&p, init), steps, false).unwrap();
        let series = lyapunov_series(&traj, target).unwrap();
        let verdict = check_monotone(&series, p.delay_steps(), MONOTONE_SLACK);
        let first = series.values[0];
        let last = series.last().unwrap();
        let vanishes = last <= 1e-6 * first;

        let eqs = equilibrium_set(&p);
        let n1 = absorbing_bound(&p);
        let m = p.delay_steps();
        let at_own = match target {
            LyapunovTarget::E0 => lyapunov_e0(&p, vec![eqs.e0; m + 1].as_slice(), n1),
            LyapunovTarget::EStar => {
                let e = eqs.e_star.unwrap();
                lyapunov_estar(&p, vec![e; m + 1].as_slice(), &e, n1)
            }
            LyapunovTarget::EBar => {
                let e = eqs.e_bar.unwrap();
                lyapunov_ebar(&p, vec![e; m + 1].as_slice(), &e)
            }
        }
        .unwrap();
        let elapsed = start.elapsed();
        let case_ok =
            verdict.holds && vanishes && at_own.abs() <= 1e-12 && elapsed <= Duration::from_secs(5);
        ok &= case_ok;
        parts.push(format!(
            "{target}: {} ({} of {} steps increase, worst {:.2e}), final/initial {:.1e}, value at equilibrium {at_own:.1e}, {:.2} s",
            if case_ok { "ok" } else { "violated" },
            verdict.violations,
            verdict.checked,
            verdict.worst_relative_increase,
            last / first,
            elapsed.as_secs_f64(),
        ));
    }
    Verdict::new(ok, parts.join("; "))
}

fn step_size_consistency() -> Verdict {
    let start = Instant::now();
    let e_star = State::new(8.0, 1.0, 50.0, 0.0);
    let mut limits = Vec::new();
    let mut converged = true;
    for h in [0.05, 0.1, 0.5, 1.0] {
        let p = make_parameters(
            ParameterValues::reference()
                .with_infection(0.0005, 0.01)
                .with_step(h),
        )
        .unwrap();
        let v = run_to_convergence(&p, &constant(&p, SET_ONE), &ConvergenceSettings::default())
            .unwrap();
        converged &= v.converged;
        limits.push(v.limit.unwrap_or(v.final_state));
    }
    let reference = limits[1];
    let spread = limits
        .iter()
        .map(|l| l.relative_distance(&reference, RELATIVE_FLOOR))
        .fold(0.0, f64::max);
    let to_e_star = limits
        .iter()
        .map(|l| l.relative_distance(&e_star, RELATIVE_FLOOR))
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    Verdict::new(
        converged && spread <= 1e-3 && to_e_star <= 1e-3 && elapsed <= Duration::from_secs(10),
        format!(
            "spread across h {spread:.2e}, distance to E* {to_e_star:.2e}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn sweep_agrees() -> Verdict {
    let start = Instant::now();
    let grid = SweepGrid {
        base: ParameterValues::reference(),
        beta_values: SweepGrid::linspace(0.0001, 0.001, 11),
        c_values: SweepGrid::linspace(0.001, 0.2, 11),
        tau_values: Some(vec![2.0]),
        h: 0.1,
        settings: ConvergenceSettings::default(),
    };
    let cells: Vec<_> = run_sweep(&grid, SET_ONE)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let summary = sweep_summary(&cells).unwrap();
    let elapsed = start.elapsed();
    Verdict::new(
        summary.agreement_rate == 1.0 && elapsed <= Duration::from_secs(120),
        format!(
            "{}/{} cells agree, {} near-threshold excluded, {:.2} s",
            summary.agreeing,
            summary.considered,
            summary.near_threshold_excluded,
            elapsed.as_secs_f64()
        ),
    )
}

fn simulate_is_deterministic() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/case3.cfg");
    let mut outputs = Vec::new();
    for name in ["first.csv", "second.csv"] {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_hivnsfd"))
            .arg("simulate")
            .arg(&config)
            .arg("--output")
            .arg(&path)
            .output()
            .unwrap()
            .status;
        if !status.success() {
            return Verdict::new(false, format!("simulate exited with {status}"));
        }
        outputs.push(std::fs::read(&path).unwrap());
    }
    Verdict::new(
        !outputs[0].is_empty() && outputs[0] == outputs[1],
        format!(
            "two runs, {} and {} bytes",
            outputs[0].len(),
            outputs[1].len()
        ),
    )
}

type Check = fn() -> Verdict;

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("reproduction numbers", reproduction_numbers_match),
        ("equilibria", equilibria_match),
        ("fixed-point oracle", fixed_points_hold),
        ("implicit-explicit equivalence", implicit_explicit_agree),
        ("regime convergence", regimes_converge),
        ("positivity and boundedness", positivity_and_boundedness),
        ("Lyapunov certificates", lyapunov_certificates),
        ("step-size consistency", step_size_consistency),
        ("sweep agreement", sweep_agrees),
        ("determinism", simulate_is_deterministic),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        let start = Instant::now();
        let verdict = check();
        let status = if verdict.ok { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {status} {name}: {} [{:.2} s]",
            verdict.detail,
            start.elapsed().as_secs_f64()
        );
        if !verdict.ok {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 10 criteria pass");
    } else {
        println!(
            "acceptance: {} of 10 criteria fail: {failed:?}",
            failed.len()
        );
        std::process::exit(1);
    }
}
