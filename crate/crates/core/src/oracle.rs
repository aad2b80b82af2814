//! Independent reference solutions.
//!
//! For eigenfunction data `u₀ = c₀E_k`, `u₁ = c₁E_k` the ansatz
//! `u(t, x) = φ(t; x) E_k(x)` turns the PDE into one damped oscillator per
//! spatial point, `φ'' + λ_k φ + α E_k(x)^(2m) φ^(2m) φ' = 0`, integrated
//! here with classical RK4. The finite-dimensional oscillator
//! `ẍ + k̂x + α x^(2m) ẋ = 0` and its stability sweep live here too.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::linop::{energy, energy_norm, State};
use crate::linwave::{steps_for, Trajectory};
use crate::mesh::{eigenfunction, eigenvalue, Mesh, SpatialOperators};

/// One classical Runge–Kutta step for a planar system.
#[inline]
pub fn rk4_step(f: impl Fn(f64, [f64; 2]) -> [f64; 2], t: f64, y: [f64; 2], dt: f64) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, add(y, k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, add(y, k2, 0.5 * dt));
    let k4 = f(t + dt, add(y, k3, dt));
    [
        y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Per-point ODE family for eigenfunction initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzProblem {
    pub k: usize,
    pub c0: f64,
    pub c1: f64,
    pub alpha: f64,
    pub m: u32,
    pub samples: Vec<f64>,
}

impl AnsatzProblem {
    pub fn new(k: usize, c0: f64, c1: f64, alpha: f64, m: u32, samples: Vec<f64>) -> Result<Self> {
        if k == 0 || m == 0 {
            return invalid("mode and exponent start at 1");
        }
        if samples.len() < 2 {
            return invalid("need at least two spatial samples");
        }
        if samples.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return invalid("samples must lie in [0, 1]");
        }
        if !(alpha >= 0.0) {
            return invalid("damping coefficient must be nonnegative");
        }
        Ok(AnsatzProblem {
            k,
            c0,
            c1,
            alpha,
            m,
            samples,
        })
    }

    /// Samples at the interior nodes of `mesh`.
    pub fn on_mesh(mesh: &Mesh, k: usize, c0: f64, c1: f64, alpha: f64, m: u32) -> Result<Self> {
        Self::new(k, c0, c1, alpha, m, mesh.nodes())
    }

    /// Displacement amplitude on `E_k` of `u₀ = (2/kπ) sin(kπx)`.
    pub fn unit_energy_amplitude(k: usize) -> f64 {
        SQRT_2 / (k as f64 * PI)
    }

    pub fn lambda(&self) -> f64 {
        eigenvalue(self.k)
    }

    /// Damping coefficient `α E_k(x)^(2m)` at a sample.
    fn coefficient(&self, x: f64) -> f64 {
        self.alpha * eigenfunction(self.k, x).powi(2 * self.m as i32)
    }
}

/// `φ(t; x_s)` and `φ'(t; x_s)` on a uniform output grid.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub problem: AnsatzProblem,
    pub dt: f64,
    /// `[time index][sample]`
    pub phi: Vec<Vec<f64>>,
    pub dphi: Vec<Vec<f64>>,
}

impl OracleSolution {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Grid index of `t`, rejecting off-grid times.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let pos = t / self.dt;
        let i = pos.round();
        if (pos - i).abs() > 1e-6 || i < 0.0 || i as usize >= self.len() {
            return Err(Error::GridMismatch(format!("t = {t} is not on the oracle grid")));
        }
        Ok(i as usize)
    }

    /// Modal energy `½λφ² + ½φ'²` at every sample for time index `i`.
    pub fn modal_energy(&self, i: usize) -> Vec<f64> {
        let lam = self.problem.lambda();
        self.phi[i]
            .iter()
            .zip(&self.dphi[i])
            .map(|(p, q)| 0.5 * lam * p * p + 0.5 * q * q)
            .collect()
    }
}

/// RK4 on every sample with step `output_step / substeps`, recording every
/// `substeps` steps up to `horizon`.
pub fn rk4_ansatz(problem: &AnsatzProblem, horizon: f64, output_step: f64, substeps: usize) -> Result<OracleSolution> {
    if substeps == 0 {
        return invalid("substeps must be positive");
    }
    let outputs = steps_for(horizon, output_step)?;
    let dt = output_step / substeps as f64;
    let lam = problem.lambda();
    let m2 = 2 * problem.m as i32;
    // per-sample trajectories, computed independently
    let columns: Vec<(Vec<f64>, Vec<f64>)> = problem
        .samples
        .par_iter()
        .map(|&x| {
            let c = problem.coefficient(x);
            let f = |_t: f64, y: [f64; 2]| [y[1], -lam * y[0] - c * y[0].powi(m2) * y[1]];
            let mut y = [problem.c0, problem.c1];
            let mut p = Vec::with_capacity(outputs + 1);
            let mut q = Vec::with_capacity(outputs + 1);
            p.push(y[0]);
            q.push(y[1]);
            let mut t = 0.0;
            for i in 0..outputs {
                for s in 0..substeps {
                    y = rk4_step(f, t, y, dt);
                    t = (i * substeps + s + 1) as f64 * dt;
                }
                p.push(y[0]);
                q.push(y[1]);
            }
            (p, q)
        })
        .collect();
    let s = problem.samples.len();
    let mut phi = vec![vec![0.0; s]; outputs + 1];
    let mut dphi = vec![vec![0.0; s]; outputs + 1];
    for (j, (p, q)) in columns.iter().enumerate() {
        for i in 0..=outputs {
            phi[i][j] = p[i];
            dphi[i][j] = q[i];
        }
    }
    Ok(OracleSolution {
        problem: problem.clone(),
        dt: output_step,
        phi,
        dphi,
    })
}

/// Nodal `(u, u̇) = (φ E_k, φ' E_k)` at time `t`; the oracle samples must be
/// the mesh nodes.
pub fn oracle_field(sol: &OracleSolution, t: f64, mesh: &Mesh) -> Result<State> {
    let i = sol.index_of(t)?;
    oracle_state(sol, i, mesh)
}

fn oracle_state(sol: &OracleSolution, i: usize, mesh: &Mesh) -> Result<State> {
    let nodes = mesh.nodes();
    if nodes.len() != sol.problem.samples.len()
        || nodes
            .iter()
            .zip(&sol.problem.samples)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::GridMismatch("oracle samples are not the mesh nodes".into()));
    }
    let k = sol.problem.k;
    let e: Vec<f64> = nodes.iter().map(|&x| eigenfunction(k, x)).collect();
    let u = nalgebra::DVector::from_iterator(e.len(), sol.phi[i].iter().zip(&e).map(|(p, e)| p * e));
    let v = nalgebra::DVector::from_iterator(e.len(), sol.dphi[i].iter().zip(&e).map(|(p, e)| p * e));
    State::new(&u, &v)
}

/// Worst-case discrepancy between a finite element trajectory and the
/// oracle over the common time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleDiscrepancy {
    /// `max_t ‖y_fem - y_oracle‖_E`
    pub max_norm: f64,
    /// `max_t E(y_fem - y_oracle) = max_t ½‖y_fem - y_oracle‖_E²`
    pub max_energy: f64,
    pub time_of_max: f64,
}

pub fn compare_energy_norm(
    fem: &Trajectory,
    oracle: &OracleSolution,
    ops: &SpatialOperators,
) -> Result<OracleDiscrepancy> {
    if (fem.dt - oracle.dt).abs() > 1e-12 * oracle.dt || fem.t0.abs() > 1e-12 {
        return Err(Error::GridMismatch(format!(
            "trajectory grid (t0={}, dt={}) vs oracle dt={}",
            fem.t0, fem.dt, oracle.dt
        )));
    }
    if fem.len() > oracle.len() {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} points, oracle only {}",
            fem.len(),
            oracle.len()
        )));
    }
    let mut worst = OracleDiscrepancy {
        max_norm: 0.0,
        max_energy: 0.0,
        time_of_max: 0.0,
    };
    for (i, y) in fem.states.iter().enumerate() {
        let diff = y.sub(&oracle_state(oracle, i, &ops.mesh)?);
        let norm = energy_norm(ops, &diff);
        if norm > worst.max_norm {
            worst = OracleDiscrepancy {
                max_norm: norm,
                max_energy: energy(ops, &diff),
                time_of_max: fem.time(i),
            };
        }
    }
    Ok(worst)
}

/// `ẍ + k̂ x + α x^(2m) ẋ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorProblem {
    pub stiffness: f64,
    pub alpha: f64,
    pub m: u32,
    pub x0: f64,
    pub x1: f64,
}

impl OscillatorProblem {
    pub fn new(stiffness: f64, alpha: f64, m: u32, x0: f64, x1: f64) -> Result<Self> {
        if !(stiffness > 0.0) {
            return invalid("oscillator stiffness must be positive");
        }
        if !(alpha >= 0.0) || m == 0 {
            return invalid("need α ≥ 0 and m ≥ 1");
        }
        Ok(OscillatorProblem {
            stiffness,
            alpha,
            m,
            x0,
            x1,
        })
    }

    /// Equivalent norm `|y|² = ½k̂y₁² + ½y₂²`.
    pub fn norm(&self, y: [f64; 2]) -> f64 {
        (0.5 * self.stiffness * y[0] * y[0] + 0.5 * y[1] * y[1]).sqrt()
    }

    fn rhs(&self) -> impl Fn(f64, [f64; 2]) -> [f64; 2] + '_ {
        let m2 = 2 * self.m as i32;
        move |_t, y| [y[1], -self.alpha * y[0].powi(m2) * y[1] - self.stiffness * y[0]]
    }
}

#[derive(Debug, Clone)]
pub struct OscillatorTrajectory {
    pub dt: f64,
    pub states: Vec<[f64; 2]>,
    pub norms: Vec<f64>,
}

impl OscillatorTrajectory {
    /// First time with `|y| < eps`.
    pub fn first_time_below(&self, eps: f64) -> Option<f64> {
        self.norms.iter().position(|&n| n < eps).map(|i| i as f64 * self.dt)
    }

    /// Largest relative increase of the norm between consecutive samples.
    pub fn max_relative_increase(&self) -> f64 {
        self.norms
            .windows(2)
            .map(|w| if w[0] > 0.0 { (w[1] - w[0]) / w[0] } else { w[1] })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn simulate_oscillator(problem: &OscillatorProblem, horizon: f64, step: f64) -> Result<OscillatorTrajectory> {
    if !(step > 0.0) {
        return invalid("step must be positive");
    }
    let steps = (horizon / step).round() as usize;
    let f = problem.rhs();
    let mut y = [problem.x0, problem.x1];
    let mut states = Vec::with_capacity(steps + 1);
    let mut norms = Vec::with_capacity(steps + 1);
    states.push(y);
    norms.push(problem.norm(y));
    for i in 0..steps {
        y = rk4_step(&f, i as f64 * step, y, step);
        states.push(y);
        norms.push(problem.norm(y));
    }
    Ok(OscillatorTrajectory {
        dt: step,
        states,
        norms,
    })
}

/// Settings for [`uniform_stability_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSettings {
    pub stiffness: f64,
    pub alpha: f64,
    pub m: u32,
    pub radius: f64,
    pub samples: usize,
    pub target: f64,
    pub horizon: f64,
    pub step: f64,
    /// Rotates the sample lattice; zero gives the canonical lattice.
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub settings: SweepSettings,
    pub initial: Vec<[f64; 2]>,
    /// `inf{t : |y(t)| < target}` per sample, `None` if never within the horizon.
    pub times_to_target: Vec<Option<f64>>,
    /// Largest relative one-step increase of `|y|` over all samples.
    pub max_relative_increase: f64,
}

impl SweepReport {
    pub fn max_time(&self) -> Option<f64> {
        self.times_to_target
            .iter()
            .try_fold(0.0f64, |acc, t| t.map(|t| acc.max(t)))
    }

    pub fn non_decaying(&self) -> usize {
        self.times_to_target.iter().filter(|t| t.is_none()).count()
    }
}

fn splitmix(mut z: u64) -> f64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Deterministic low-discrepancy points filling the ball `|y| ≤ radius` of
/// the equivalent norm (a golden-angle spiral, area-uniform in radius).
pub fn ball_samples(stiffness: f64, radius: f64, count: usize, seed: u64) -> Vec<[f64; 2]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let shift = if seed == 0 { 0.0 } else { 2.0 * PI * splitmix(seed) };
    (0..count)
        .map(|i| {
            let r = radius * ((i as f64 + 0.5) / count as f64).sqrt();
            let theta = i as f64 * golden + shift;
            // |y| = r when y₁ = r cosθ √(2/k̂), y₂ = r sinθ √2
            [r * theta.cos() * (2.0 / stiffness).sqrt(), r * theta.sin() * SQRT_2]
        })
        .collect()
}

/// Time for each sampled initial state to enter the ball of radius
/// `target`; a finite maximum is the empirical uniform-stability evidence.
pub fn uniform_stability_sweep(settings: SweepSettings) -> Result<SweepReport> {
    if settings.samples == 0 {
        return invalid("need at least one sample");
    }
    let initial = ball_samples(settings.stiffness, settings.radius, settings.samples, settings.seed);
    let runs: Vec<Result<(Option<f64>, f64)>> = initial
        .par_iter()
        .map(|y0| {
            let p = OscillatorProblem::new(settings.stiffness, settings.alpha, settings.m, y0[0], y0[1])?;
            let traj = simulate_oscillator(&p, settings.horizon, settings.step)?;
            Ok((traj.first_time_below(settings.target), traj.max_relative_increase()))
        })
        .collect();
    let mut times = Vec::with_capacity(runs.len());
    let mut worst = f64::NEG_INFINITY;
    for r in runs {
        let (t, inc) = r?;
        times.push(t);
        worst = worst.max(inc);
    }
    Ok(SweepReport {
        settings,
        initial,
        times_to_target: times,
        max_relative_increase: worst,
    })
}
