//! Five-step Adams–Bashforth continuation of a trajectory.
//!
//! [`Ab5State`] is the classical explicit scheme for any right-hand side.
//! For the semi-discrete wave equation the stiff part `A_h` makes the
//! explicit scheme unstable at practical steps (its stability region misses
//! the imaginary axis near the top of the discrete spectrum), so
//! [`extend_trajectory`] defaults to the integrating-factor form: the same
//! Adams–Bashforth weights applied to `e^(-tA_h) y`, which treats `A_h`
//! exactly and only extrapolates the damping term.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linop::{energy, State};
use crate::linwave::{steps_for, DuhamelSolver, Trajectory};
use crate::picard::DampingLaw;

/// `β_j` for `y_{n+1} = y_n + δ Σ_j β_j g_{n-j}`.
pub const AB5_WEIGHTS: [f64; 5] = [
    1901.0 / 720.0,
    -2774.0 / 720.0,
    2616.0 / 720.0,
    -1274.0 / 720.0,
    251.0 / 720.0,
];

const HISTORY: usize = 5;

/// History of the last five `(t_i, y_i, g_i)`, oldest first.
#[derive(Debug, Clone)]
pub struct Ab5State {
    delta: f64,
    entries: VecDeque<(f64, DVector<f64>, DVector<f64>)>,
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() != HISTORY {
        return invalid(format!("need {HISTORY} history points, got {}", times.len()));
    }
    let delta = times[1] - times[0];
    if !(delta > 0.0) {
        return invalid("history times must increase");
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - delta).abs() > 1e-9 * delta {
            return invalid(format!("non-uniform history spacing {} vs {delta}", w[1] - w[0]));
        }
    }
    Ok(delta)
}

impl Ab5State {
    /// Fill the history from five uniformly spaced points, evaluating the
    /// right-hand side at each.
    pub fn init(tail: &[(f64, DVector<f64>)], rhs: &mut dyn FnMut(f64, &DVector<f64>) -> DVector<f64>) -> Result<Self> {
        let times: Vec<f64> = tail.iter().map(|(t, _)| *t).collect();
        let delta = check_uniform(&times)?;
        let entries = tail.iter().map(|(t, y)| (*t, y.clone(), rhs(*t, y))).collect();
        Ok(Ab5State { delta, entries })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn time(&self) -> f64 {
        self.entries.back().expect("history is full").0
    }

    pub fn current(&self) -> &DVector<f64> {
        &self.entries.back().expect("history is full").1
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn rhs_history(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.entries.iter().map(|e| &e.2)
    }

    /// Advance one step and rotate the history.
    pub fn step(&mut self, rhs: &mut dyn FnMut(f64, &DVector<f64>) -> DVector<f64>) -> DVector<f64> {
        let mut next = self.current().clone();
        for (j, beta) in AB5_WEIGHTS.iter().enumerate() {
            let g = &self.entries[HISTORY - 1 - j].2;
            next.axpy(self.delta * beta, g, 1.0);
        }
        let t = self.time() + self.delta;
        let g = rhs(t, &next);
        self.entries.pop_front();
        self.entries.push_back((t, next.clone(), g));
        next
    }
}

/// Which multistep form continues the wave trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MultistepScheme {
    /// Adams–Bashforth on the integrating-factor variable.
    #[default]
    Exponential,
    /// Adams–Bashforth on `y' = A_h y + F(y)` directly.
    Explicit,
}

/// Integrating-factor AB5 for `y' = A_h y + (0, F(y))`:
/// `y_{n+1} = P y_n + δ Σ_j β_j P^(j+1) (0, F_{n-j})` with `P = e^(δA_h)`.
#[derive(Debug, Clone)]
pub struct ExponentialAb5 {
    delta: f64,
    /// `P^1 ..= P^5`
    powers: Vec<DMatrix<f64>>,
}

impl ExponentialAb5 {
    pub fn new(solver: &DuhamelSolver) -> Self {
        let prop = solver.propagator();
        let base = prop.power(prop.count()).clone();
        let mut powers = vec![base.clone()];
        for j in 1..HISTORY {
            let next = &powers[j - 1] * &base;
            powers.push(next);
        }
        ExponentialAb5 {
            delta: solver.delta(),
            powers,
        }
    }

    fn step(&self, y: &State, forcing: &VecDeque<DVector<f64>>) -> State {
        let n = y.dim();
        let mut out = &self.powers[0] * y.stacked();
        for (j, beta) in AB5_WEIGHTS.iter().enumerate() {
            let f = &forcing[HISTORY - 1 - j];
            let cols = self.powers[j].columns(n, n);
            out.gemv(self.delta * beta, &cols, f, 1.0);
        }
        State::from_stacked(out)
    }
}

/// Continue `traj` (ending at `T₁`) to `horizon` with the self-consistent
/// damping term, seeding the history with the last five stored states.
pub fn extend_trajectory(
    traj: &Trajectory,
    solver: &DuhamelSolver,
    damping: DampingLaw,
    horizon: f64,
    scheme: MultistepScheme,
) -> Result<Trajectory> {
    let t1 = traj.end_time();
    if horizon < t1 - 1e-12 {
        return invalid(format!("extension target {horizon} precedes trajectory end {t1}"));
    }
    if (traj.dt - solver.delta()).abs() > 1e-12 * traj.dt {
        return Err(Error::GridMismatch(format!(
            "trajectory step {} differs from solver step {}",
            traj.dt,
            solver.delta()
        )));
    }
    let steps = steps_for(horizon - t1, traj.dt)?;
    let mut out = traj.clone();
    if steps == 0 {
        return Ok(out);
    }
    if traj.len() < HISTORY {
        return invalid(format!("need at least {HISTORY} states to start the extension"));
    }
    let ops = solver.operators();
    let first = traj.len() - HISTORY;
    let tail_times: Vec<f64> = (first..traj.len()).map(|i| traj.time(i)).collect();
    check_uniform(&tail_times)?;
    let reference = energy(ops, traj.last());
    let limit = 10.0 * reference.max(f64::MIN_POSITIVE);
    out.states.reserve(steps);

    match scheme {
        MultistepScheme::Exponential => {
            let ab = ExponentialAb5::new(solver);
            let mut forcing: VecDeque<DVector<f64>> =
                traj.states[first..].iter().map(|y| damping.forcing(ops, y)).collect();
            for i in 0..steps {
                let next = ab.step(out.last(), &forcing);
                let e = energy(ops, &next);
                if !(e <= limit) {
                    return Err(Error::MultistepInstability {
                        time: t1 + (i + 1) as f64 * traj.dt,
                        energy: e,
                        initial: reference,
                    });
                }
                forcing.pop_front();
                forcing.push_back(damping.forcing(ops, &next));
                out.states.push(next);
            }
        }
        MultistepScheme::Explicit => {
            let gen = solver.generator();
            let mut rhs = |_t: f64, y: &DVector<f64>| {
                let s = State::from_stacked(y.clone());
                let mut g = gen.apply(&s).into_stacked();
                let f = damping.forcing(ops, &s);
                let n = f.len();
                g.rows_mut(n, n).axpy(1.0, &f, 1.0);
                g
            };
            let tail: Vec<(f64, DVector<f64>)> = (first..traj.len())
                .map(|i| (traj.time(i), traj.states[i].stacked().clone()))
                .collect();
            let mut ab = Ab5State::init(&tail, &mut rhs)?;
            for _ in 0..steps {
                let next = State::from_stacked(ab.step(&mut rhs));
                let e = energy(ops, &next);
                if !(e <= limit) {
                    return Err(Error::MultistepInstability {
                        time: ab.time(),
                        energy: e,
                        initial: reference,
                    });
                }
                out.states.push(next);
            }
        }
    }
    Ok(out)
}
