//! Drivers for the instability experiments.
//!
//! Frequency families of unit-energy sine data, energy and norm traces,
//! comparison with the conservative flow, the primitive (velocity potential)
//! problem and decay-rate fits.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::linop::{energy, State};
use crate::linwave::{DuhamelSolver, ModalState, NewtonCotes, Spectrum, Trajectory};
use crate::mesh::{Mesh, SpatialOperators};
use crate::multistep::{extend_trajectory, MultistepScheme};
use crate::picard::{picard_solve, DampingLaw, PicardConfig, WindowReport};
use crate::quadrature::GaussRule;

/// Sine data `u₀^(k) = (2/kπ) sin(kπx)`, `u₁ = 0` for a list of frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyFamily {
    pub ks: Vec<usize>,
    /// Rescale each member so its discrete energy is exactly one.
    pub normalize: bool,
}

impl FrequencyFamily {
    pub fn new(ks: Vec<usize>) -> Result<Self> {
        if ks.is_empty() || ks.contains(&0) {
            return invalid("frequencies must be a nonempty list of positive integers");
        }
        Ok(FrequencyFamily { ks, normalize: false })
    }

    pub fn normalized(mut self) -> Self {
        self.normalize = true;
        self
    }

    /// Continuous amplitude `2/kπ`.
    pub fn nominal_amplitude(k: usize) -> f64 {
        2.0 / (k as f64 * PI)
    }

    /// Amplitude of `sin(kπx)` actually used on `mesh`.
    pub fn amplitude(&self, ops: &SpatialOperators, k: usize) -> f64 {
        let a = Self::nominal_amplitude(k);
        if !self.normalize {
            return a;
        }
        let e = energy(ops, &Self::sine_state(ops, k, a));
        a / e.sqrt()
    }

    fn sine_state(ops: &SpatialOperators, k: usize, a: f64) -> State {
        let u = ops.ritz_project_h1(|x| a * (k as f64 * PI * x).sin());
        State::new(&u, &DVector::zeros(u.len())).expect("equal lengths")
    }

    /// Discrete initial state for member `k`.
    pub fn initial_state(&self, ops: &SpatialOperators, k: usize) -> State {
        Self::sine_state(ops, k, self.amplitude(ops, k))
    }
}

/// Largest frequency resolved on a mesh with `n` interior nodes.
pub fn max_resolved_frequency(n: usize) -> usize {
    n / 8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub label: String,
    pub k: usize,
    pub alpha: f64,
    pub m: u32,
    pub h: f64,
    pub delta: f64,
    pub scheme: String,
}

/// Energy and displacement norms sampled along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    pub meta: TraceMeta,
}

impl EnergyTrace {
    pub fn from_trajectory(ops: &SpatialOperators, traj: &Trajectory, meta: TraceMeta) -> Self {
        let rows: Vec<(f64, f64, f64)> = traj
            .states
            .par_iter()
            .map(|y| (energy(ops, y), ops.l2_norm(y.u_slice()), ops.h1_seminorm(y.u_slice())))
            .collect();
        EnergyTrace {
            times: traj.times(),
            energy: rows.iter().map(|r| r.0).collect(),
            l2: rows.iter().map(|r| r.1).collect(),
            h1: rows.iter().map(|r| r.2).collect(),
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.energy
            .iter()
            .chain(&self.l2)
            .chain(&self.h1)
            .chain(&self.times)
            .all(|x| x.is_finite())
    }

    /// Nearest sampled energy at time `t`.
    pub fn energy_at(&self, t: f64) -> f64 {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.energy[i]
    }

    pub fn final_energy(&self) -> f64 {
        *self.energy.last().unwrap_or(&f64::NAN)
    }

    /// Largest per-step increase `(E_{i+1} - E_i) / E_i`, or a negative
    /// number when the energy never increases.
    pub fn max_relative_increase(&self) -> f64 {
        self.energy
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_nonincreasing(&self, rel_tol: f64) -> bool {
        self.len() < 2 || self.max_relative_increase() <= rel_tol
    }

    /// Start times of unit windows `[t, t + window]` over which the energy
    /// fails to decrease strictly, considering only windows that start
    /// with `E > floor`.
    pub fn stalled_windows(&self, window: f64, floor: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let Some(&t_end) = self.times.last() else {
            return out;
        };
        let mut t = self.times[0];
        while t + window <= t_end + 1e-9 {
            let a = self.energy_at(t);
            let b = self.energy_at(t + window);
            if a > floor && b >= a {
                out.push(t);
            }
            t += window;
        }
        out
    }
}

/// Parameters shared by the frequency experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub family: FrequencyFamily,
    pub alpha: f64,
    pub m: u32,
    pub n: usize,
    pub delta: f64,
    /// Picard horizon.
    pub horizon: f64,
    /// Optional multistep continuation beyond `horizon`.
    pub extension: Option<f64>,
    pub rule: NewtonCotes,
    pub scheme: MultistepScheme,
    pub window: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl SweepParams {
    pub fn new(family: FrequencyFamily, alpha: f64, m: u32, n: usize, delta: f64, horizon: f64) -> Self {
        SweepParams {
            family,
            alpha,
            m,
            n,
            delta,
            horizon,
            extension: None,
            rule: NewtonCotes::default(),
            scheme: MultistepScheme::default(),
            window: 1.0,
            tolerance: 1e-8,
            max_iterations: 50,
        }
    }

    pub fn picard_config(&self, damping: DampingLaw) -> PicardConfig {
        PicardConfig {
            window: self.window.min(self.horizon),
            delta: self.delta,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            damping,
            rule: self.rule,
        }
    }

    fn scheme_label(&self) -> String {
        let rule = match self.rule {
            NewtonCotes::Boole => "boole",
            NewtonCotes::Simpson38 => "simpson38",
        };
        match self.extension {
            None => format!("picard+{rule}"),
            Some(t) => {
                let ms = match self.scheme {
                    MultistepScheme::Exponential => "exp-ab5",
                    MultistepScheme::Explicit => "ab5",
                };
                format!("picard+{rule}, {ms} after t={}", self.horizon.min(t))
            }
        }
    }
}

/// Output of one damped run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trajectory: Trajectory,
    pub trace: EnergyTrace,
    pub windows: Vec<WindowReport>,
}

impl RunResult {
    pub fn converged(&self) -> bool {
        self.windows.iter().all(|w| w.converged)
    }
}

/// Picard on `[0, horizon]`, optionally continued by AB5.
pub fn damped_run(
    ops: &SpatialOperators,
    solver: &DuhamelSolver,
    y0: &State,
    damping: DampingLaw,
    params: &SweepParams,
    meta: TraceMeta,
) -> Result<RunResult> {
    let outcome = picard_solve(solver, y0, params.horizon, &params.picard_config(damping))?;
    let mut trajectory = outcome.trajectory;
    if let Some(t_end) = params.extension {
        if t_end > params.horizon {
            trajectory = extend_trajectory(&trajectory, solver, damping, t_end, params.scheme)?;
        }
    }
    let trace = EnergyTrace::from_trajectory(ops, &trajectory, meta);
    Ok(RunResult {
        trajectory,
        trace,
        windows: outcome.windows,
    })
}

/// One member of a frequency sweep.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub k: usize,
    pub amplitude: f64,
    pub result: RunResult,
}

/// Degenerately damped runs for every member of the family, in the order
/// of `params.family.ks`.
pub fn frequency_sweep(params: &SweepParams) -> Result<Vec<SweepRun>> {
    let limit = max_resolved_frequency(params.n);
    if let Some(&k) = params.family.ks.iter().find(|&&k| k > limit) {
        return invalid(format!(
            "frequency {k} is under-resolved on {} interior nodes (need k ≤ {limit})",
            params.n
        ));
    }
    let damping = DampingLaw::degenerate(params.alpha, params.m)?;
    let mesh = Mesh::new(params.n)?;
    let ops = SpatialOperators::assemble(&mesh);
    let solver = DuhamelSolver::new(&ops, params.delta, params.rule)?;
    let label = params.scheme_label();
    params
        .family
        .ks
        .par_iter()
        .map(|&k| {
            let amplitude = params.family.amplitude(&ops, k);
            let y0 = params.family.initial_state(&ops, k);
            let meta = TraceMeta {
                label: format!("k={k}"),
                k,
                alpha: params.alpha,
                m: params.m,
                h: mesh.element_size(),
                delta: params.delta,
                scheme: label.clone(),
            };
            let result = damped_run(&ops, &solver, &y0, damping, params, meta)?;
            Ok(SweepRun { k, amplitude, result })
        })
        .collect()
}

/// `E_z(t)` for `z = u - w`, with `w` the undamped evolution of the same
/// discrete data.
///
/// The nodal sine vector is an exact eigenvector of the discrete
/// generator, so `w` is the single-mode group with the Galerkin eigenvalue
/// and carries no spatial discretization error of its own.
pub fn conservative_comparison(ops: &SpatialOperators, run: &SweepRun) -> Vec<f64> {
    let mesh = &ops.mesh;
    let spectrum = Spectrum::Galerkin { h: mesh.element_size() };
    // E_k = √2 sin(kπx)
    let modal = ModalState::single(run.k, run.amplitude / 2f64.sqrt(), 0.0).expect("k ≥ 1");
    let traj = &run.result.trajectory;
    traj.states
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let w = modal.evolve(traj.time(i), spectrum).to_nodal(mesh);
            energy(ops, &y.sub(&w))
        })
        .collect()
}

/// Data for the primitive problem `ϕ̈ - ϕ_xx + f̃(ϕ̇) = 0`.
#[derive(Debug, Clone)]
pub struct PrimitiveSetup {
    pub k: usize,
    pub alpha: f64,
    pub m: u32,
    pub amplitude: f64,
    /// Coefficients of `Φ` with `Φ_xx = f̃(u₀)`, `Φ(0) = Φ(1) = 0`.
    pub phi: DVector<f64>,
    /// Coefficients of `u₀`.
    pub u0: DVector<f64>,
    /// `|K Φ + b|_∞` for the assembled load `b`.
    pub residual: f64,
}

impl PrimitiveSetup {
    /// `f̃(s) = α s^(2m+1) / (2m+1)`
    pub fn damping(&self) -> DampingLaw {
        DampingLaw::VelocityPower {
            alpha: self.alpha,
            m: self.m,
        }
    }

    /// `(ϕ(0), ϕ̇(0)) = (Φ, u₀)`
    pub fn initial_state(&self) -> State {
        State::new(&self.phi, &self.u0).expect("equal lengths")
    }
}

pub fn primitive_damping(alpha: f64, m: u32, s: f64) -> f64 {
    let p = 2 * m + 1;
    alpha * s.powi(p as i32) / p as f64
}

/// Solve the elliptic problem for `Φ` with data `u₀ = amplitude·sin(kπx)`.
pub fn primitive_setup(ops: &SpatialOperators, k: usize, alpha: f64, m: u32, amplitude: f64) -> Result<PrimitiveSetup> {
    if k == 0 || m == 0 {
        return invalid("need k ≥ 1 and m ≥ 1");
    }
    if k > max_resolved_frequency(ops.dim()) {
        return invalid(format!(
            "frequency {k} is under-resolved on {} interior nodes",
            ops.dim()
        ));
    }
    let kp = k as f64 * PI;
    let g = |x: f64| primitive_damping(alpha, m, amplitude * (kp * x).sin());
    // the integrand is smooth but not polynomial; 8 points per element is
    // far below discretization error
    let load = ops.load_vector(g, &GaussRule::new(8));
    let phi = ops.solve_stiffness(&(-&load));
    let residual = (ops.stiffness.mul(&phi) + &load).amax();
    let u0 = ops.ritz_project_h1(|x| amplitude * (kp * x).sin());
    Ok(PrimitiveSetup {
        k,
        alpha,
        m,
        amplitude,
        phi,
        u0,
        residual,
    })
}

/// `Φ` and `Φ'` in closed form for `m = 1`, using
/// `sin³θ = (3 sin θ - sin 3θ) / 4`.
pub fn primitive_closed_form(k: usize, alpha: f64, amplitude: f64) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let kp = k as f64 * PI;
    let c = -alpha * amplitude.powi(3) / 3.0;
    let (c1, c3) = (3.0 / (4.0 * kp * kp), 1.0 / (36.0 * kp * kp));
    let value = move |x: f64| c * (c1 * (kp * x).sin() - c3 * (3.0 * kp * x).sin());
    let slope = move |x: f64| c * (c1 * kp * (kp * x).cos() - 3.0 * c3 * kp * (3.0 * kp * x).cos());
    (value, slope)
}

/// Primitive trajectory and its comparison with the damped solution.
#[derive(Debug, Clone)]
pub struct PrimitiveRun {
    pub trajectory: Trajectory,
    /// Energy trace of `ϕ`.
    pub trace: EnergyTrace,
    pub windows: Vec<WindowReport>,
    /// `sup_t |ϕ̇(t) - u(t)|₀` over the common range, if `u` was given.
    pub velocity_mismatch: Option<f64>,
}

pub fn primitive_solve(
    ops: &SpatialOperators,
    solver: &DuhamelSolver,
    setup: &PrimitiveSetup,
    params: &SweepParams,
    damped: Option<&Trajectory>,
) -> Result<PrimitiveRun> {
    let meta = TraceMeta {
        label: format!("primitive k={}", setup.k),
        k: setup.k,
        alpha: setup.alpha,
        m: setup.m,
        h: ops.mesh.element_size(),
        delta: params.delta,
        scheme: params.scheme_label(),
    };
    let run = damped_run(ops, solver, &setup.initial_state(), setup.damping(), params, meta)?;
    let velocity_mismatch = damped.map(|u| velocity_mismatch(ops, &run.trajectory, u)).transpose()?;
    Ok(PrimitiveRun {
        trajectory: run.trajectory,
        trace: run.trace,
        windows: run.windows,
        velocity_mismatch,
    })
}

/// `sup_t |ϕ̇(t) - u(t)|₀` over the shared time grid.
pub fn velocity_mismatch(ops: &SpatialOperators, primitive: &Trajectory, damped: &Trajectory) -> Result<f64> {
    if (primitive.dt - damped.dt).abs() > 1e-12 * damped.dt || (primitive.t0 - damped.t0).abs() > 1e-12 {
        return Err(Error::GridMismatch("primitive and damped grids differ".into()));
    }
    let n = primitive.len().min(damped.len());
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let d: Vec<f64> = primitive.states[i]
                .v_slice()
                .iter()
                .zip(damped.states[i].u_slice())
                .map(|(a, b)| a - b)
                .collect();
            ops.l2_norm(&d)
        })
        .reduce(|| 0.0, f64::max))
}

/// Least-squares exponent `p` in `E ≈ c t^(-p)` on `[t1, t2]`.
pub fn decay_rate_fit(trace: &EnergyTrace, t1: f64, t2: f64) -> Result<f64> {
    if !(t1 > 0.0 && t2 > t1) {
        return invalid(format!("fit window [{t1}, {t2}] must satisfy 0 < t1 < t2"));
    }
    let eps = 1e-9 * t2;
    let pts: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.energy)
        .filter(|(t, _)| **t >= t1 - eps && **t <= t2 + eps)
        .map(|(t, e)| (*t, *e))
        .collect();
    if pts.len() < 2 {
        return invalid("fewer than two samples in the fit window");
    }
    if let Some((t, e)) = pts.iter().find(|(_, e)| !(*e > 0.0)) {
        return invalid(format!("nonpositive energy {e} at t = {t}"));
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, e)| (a + t.ln(), b + e.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, e) in &pts {
        let dx = t.ln() - mx;
        sxy += dx * (e.ln() - my);
        sxx += dx * dx;
    }
    Ok(-sxy / sxx)
}

/// `|u(t)|₀` against `|u(t)|₀² ≤ 2E_ϕ(0) = |Φ|₁² + |u₀|₀²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerOrderReport {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub bound: f64,
    pub holds: Vec<bool>,
}

impl LowerOrderReport {
    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|&b| b)
    }

    /// Smallest `bound - |u|₀²` over the samples.
    pub fn min_slack(&self) -> f64 {
        self.l2.iter().map(|l| self.bound - l * l).fold(f64::INFINITY, f64::min)
    }
}

pub fn lower_order_decay(ops: &SpatialOperators, trace: &EnergyTrace, setup: &PrimitiveSetup) -> LowerOrderReport {
    let bound = ops.stiffness.bilinear(setup.phi.as_slice(), setup.phi.as_slice())
        + ops.mass.bilinear(setup.u0.as_slice(), setup.u0.as_slice());
    LowerOrderReport {
        times: trace.times.clone(),
        l2: trace.l2.clone(),
        bound,
        holds: trace.l2.iter().map(|l| l * l <= bound).collect(),
    }
}

/// `|u|_s² = ½ Σ_j (jπ)^(2s) |û_j|²` from the discrete sine coefficients
/// of the nodal values, `u ≈ Σ û_j sin(jπx)`.
pub fn fractional_norm(mesh: &Mesh, u: &[f64], s: f64) -> f64 {
    let n = mesh.interior_nodes();
    let scale = 2.0 / (n + 1) as f64;
    (1..=n)
        .map(|j| {
            let c: f64 = u
                .iter()
                .enumerate()
                .map(|(i, ui)| ui * (PI * (j * (i + 1)) as f64 / (n + 1) as f64).sin())
                .sum::<f64>()
                * scale;
            0.5 * (j as f64 * PI).powf(2.0 * s) * c * c
        })
        .sum::<f64>()
        .sqrt()
}

/// Linearly damped single-mode run against the analytic solution.
#[derive(Debug, Clone)]
pub struct LinearReference {
    pub result: RunResult,
    /// `(|u_h - u|₁² + |v_h - u̇|₀²)^½` at every step.
    pub errors: Vec<f64>,
    pub analytic_energy: Vec<f64>,
}

impl LinearReference {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

/// FEM solution of `ü - u_xx + β u̇ = 0` from `(amplitude·sin(kπx), 0)`.
pub fn linear_damped_reference(
    n: usize,
    beta: f64,
    k: usize,
    amplitude: f64,
    params: &SweepParams,
) -> Result<LinearReference> {
    let exact = crate::linwave::LinearDampedMode::new(beta, k, amplitude)?;
    let mesh = Mesh::new(n)?;
    let ops = SpatialOperators::assemble(&mesh);
    let solver = DuhamelSolver::new(&ops, params.delta, params.rule)?;
    let kp = k as f64 * PI;
    let u = ops.ritz_project_h1(|x| amplitude * (kp * x).sin());
    let y0 = State::new(&u, &DVector::zeros(n))?;
    let meta = TraceMeta {
        label: format!("linear k={k}"),
        k,
        alpha: beta,
        m: 0,
        h: mesh.element_size(),
        delta: params.delta,
        scheme: params.scheme_label(),
    };
    let result = damped_run(&ops, &solver, &y0, DampingLaw::Linear { beta }, params, meta)?;
    let traj = &result.trajectory;
    let errors = traj
        .states
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let t = traj.time(i);
            let eu = ops.h1_error(y.u_slice(), |x| exact.slope(t, x));
            let ev = ops.l2_error(y.v_slice(), |x| exact.velocity(t, x));
            (eu * eu + ev * ev).sqrt()
        })
        .collect();
    let analytic_energy = traj.times().iter().map(|&t| exact.energy(t)).collect();
    Ok(LinearReference {
        result,
        errors,
        analytic_energy,
    })
}

/// `u(t, x₀)` along a trajectory by piecewise-linear evaluation.
pub fn point_trace(mesh: &Mesh, traj: &Trajectory, x0: f64) -> Vec<f64> {
    traj.states.iter().map(|y| mesh.evaluate(y.u_slice(), x0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> TraceMeta {
        TraceMeta {
            label: "t".into(),
            k: 1,
            alpha: 1.0,
            m: 1,
            h: 0.1,
            delta: 0.1,
            scheme: "x".into(),
        }
    }

    fn synthetic(e: impl Fn(f64) -> f64) -> EnergyTrace {
        let times: Vec<f64> = (1..=100).map(|i| i as f64 * 0.5).collect();
        EnergyTrace {
            energy: times.iter().map(|&t| e(t)).collect(),
            l2: vec![0.0; times.len()],
            h1: vec![0.0; times.len()],
            times,
            meta: meta(),
        }
    }

    #[test]
    fn decay_fit_synthetic() {
        let p = decay_rate_fit(&synthetic(|t| 1.0 / t), 10.0, 50.0).unwrap();
        assert!((p - 1.0).abs() < 1e-10);
        let p = decay_rate_fit(&synthetic(|_| 3.0), 10.0, 50.0).unwrap();
        assert!(p.abs() < 1e-12);
        assert!(decay_rate_fit(&synthetic(|t| if t > 20.0 { 0.0 } else { 1.0 }), 10.0, 50.0).is_err());
        assert!(decay_rate_fit(&synthetic(|t| 1.0 / t), 50.0, 10.0).is_err());
    }

    #[test]
    fn family_amplitudes() {
        let mesh = Mesh::new(99).unwrap();
        let ops = SpatialOperators::assemble(&mesh);
        let fam = FrequencyFamily::new(vec![1, 2, 4, 8]).unwrap();
        for &k in &fam.ks {
            let y = fam.initial_state(&ops, k);
            assert!((energy(&ops, &y) - 1.0).abs() < 6e-3);
            let l2 = ops.l2_norm(y.u_slice());
            assert!((l2 - 2f64.sqrt() / (k as f64 * PI)).abs() < 1e-3);
        }
        let fam = fam.normalized();
        for &k in &fam.ks {
            assert!((energy(&ops, &fam.initial_state(&ops, k)) - 1.0).abs() < 1e-13);
        }
        assert!(FrequencyFamily::new(vec![]).is_err());
    }

    #[test]
    fn underresolved_frequency_rejected() {
        let fam = FrequencyFamily::new(vec![1, 4]).unwrap();
        let p = SweepParams::new(fam, 1.0, 1, 19, 0.01, 0.1);
        assert!(frequency_sweep(&p).is_err());
    }

    #[test]
    fn undamped_sweep_is_conservative() {
        let fam = FrequencyFamily::new(vec![1, 2]).unwrap().normalized();
        let p = SweepParams::new(fam, 0.0, 1, 31, 0.01, 2.0);
        let runs = frequency_sweep(&p).unwrap();
        let mesh = Mesh::new(31).unwrap();
        let ops = SpatialOperators::assemble(&mesh);
        for r in &runs {
            assert!(r.result.trace.energy.iter().all(|e| (e - 1.0).abs() < 1e-10));
            let ez = conservative_comparison(&ops, r);
            assert!(
                ez.iter().all(|e| *e < 1e-18),
                "{:?}",
                ez.iter().cloned().fold(0.0, f64::max)
            );
        }
    }

    #[test]
    fn primitive_closed_form_agrees() {
        let mut errs = Vec::new();
        for n in [31, 63] {
            let mesh = Mesh::new(n).unwrap();
            let ops = SpatialOperators::assemble(&mesh);
            let a = 2.0 / PI;
            let s = primitive_setup(&ops, 1, 1.0, 1, a).unwrap();
            assert!(s.residual < 1e-12);
            let (phi, _) = primitive_closed_form(1, 1.0, a);
            errs.push(ops.l2_error(s.phi.as_slice(), phi));
        }
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
        let ops = SpatialOperators::assemble(&Mesh::new(15).unwrap());
        let zero = primitive_setup(&ops, 1, 1.0, 1, 0.0).unwrap();
        assert_eq!(zero.phi.amax(), 0.0);
    }

    #[test]
    fn primitive_without_damping_reproduces_conservative_velocity() {
        let mesh = Mesh::new(31).unwrap();
        let ops = SpatialOperators::assemble(&mesh);
        let fam = FrequencyFamily::new(vec![1]).unwrap();
        let p = SweepParams::new(fam.clone(), 0.0, 1, 31, 0.01, 1.0);
        let solver = DuhamelSolver::new(&ops, 0.01, NewtonCotes::Boole).unwrap();
        let setup = primitive_setup(&ops, 1, 0.0, 1, fam.amplitude(&ops, 1)).unwrap();
        let u = frequency_sweep(&p).unwrap().remove(0);
        let run = primitive_solve(&ops, &solver, &setup, &p, Some(&u.result.trajectory)).unwrap();
        // ϕ̇ solves the same linear problem as u; the Duhamel step is exact
        // up to the matrix exponential
        assert!(run.velocity_mismatch.unwrap() < 1e-9);
        let e0 = run.trace.energy[0];
        let expected =
            0.5 * ops.h1_seminorm(setup.phi.as_slice()).powi(2) + 0.5 * ops.l2_norm(setup.u0.as_slice()).powi(2);
        assert!((e0 - expected).abs() < 1e-14);
    }

    #[test]
    fn stalled_windows_detects_plateau() {
        let tr = synthetic(|t| if t < 10.0 { 1.0 / t } else { 0.1 });
        let stalled = tr.stalled_windows(1.0, 1e-4);
        assert!(stalled.iter().all(|&t| t >= 9.5));
        assert!(!stalled.is_empty());
        assert!(synthetic(|t| 1.0 / t).stalled_windows(1.0, 1e-4).is_empty());
    }

    #[test]
    fn fractional_norm_of_sine() {
        let mesh = Mesh::new(63).unwrap();
        let u: Vec<f64> = mesh.nodes().iter().map(|x| (3.0 * PI * x).sin()).collect();
        // |sin 3πx|_s² = ½ (3π)^(2s)
        for s in [0.0, 0.5, 1.0] {
            let want = (0.5 * (3.0 * PI).powf(2.0 * s)).sqrt();
            assert!((fractional_norm(&mesh, &u, s) - want).abs() < 1e-10);
        }
    }

    #[test]
    fn lower_order_bound_at_start() {
        let mesh = Mesh::new(63).unwrap();
        let ops = SpatialOperators::assemble(&mesh);
        let fam = FrequencyFamily::new(vec![2]).unwrap();
        let setup = primitive_setup(&ops, 2, 1.0, 1, fam.amplitude(&ops, 2)).unwrap();
        let y = fam.initial_state(&ops, 2);
        let traj = Trajectory::new(0.0, 0.1, y);
        let trace = EnergyTrace::from_trajectory(&ops, &traj, meta());
        let rep = lower_order_decay(&ops, &trace, &setup);
        assert!(rep.all_hold());
        assert!(rep.min_slack() > 0.0);
    }
}
