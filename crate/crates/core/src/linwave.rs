//! Linear wave solvers: the exact modal group, the Duhamel integrator with
//! a closed Newton–Cotes rule, and the analytic single-mode solution with
//! linear damping.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linop::{BlockGenerator, Propagator, State};
use crate::mesh::{eigenfunction, eigenvalue, galerkin_eigenvalue, Mesh, SpatialOperators};

/// Closed Newton–Cotes rule used on each time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NewtonCotes {
    /// Five points, exact for quintics.
    #[default]
    Boole,
    /// Four points, exact for cubics.
    Simpson38,
}

impl NewtonCotes {
    pub fn points(self) -> usize {
        match self {
            NewtonCotes::Boole => 5,
            NewtonCotes::Simpson38 => 4,
        }
    }

    /// Global order of the composite rule.
    pub fn order(self) -> u32 {
        match self {
            NewtonCotes::Boole => 6,
            NewtonCotes::Simpson38 => 4,
        }
    }

    /// Weights for a panel of total length `delta`.
    pub fn weights(self, delta: f64) -> Vec<f64> {
        match self {
            NewtonCotes::Boole => [7.0, 32.0, 12.0, 32.0, 7.0].iter().map(|w| w * delta / 90.0).collect(),
            NewtonCotes::Simpson38 => [1.0, 3.0, 3.0, 1.0].iter().map(|w| w * delta / 8.0).collect(),
        }
    }

    /// Offsets of the abscissae inside `[t̄, t̄ + delta]`.
    pub fn abscissae(self, delta: f64) -> Vec<f64> {
        let m = self.points();
        (0..m).map(|j| delta * j as f64 / (m - 1) as f64).collect()
    }

    /// Spacing of the abscissae, the propagator step.
    pub fn substep(self, delta: f64) -> f64 {
        delta / (self.points() - 1) as f64
    }
}

/// Which eigenvalues drive the modal group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spectrum {
    /// `λ_k = k²π²` of the continuous Laplacian.
    Continuous,
    /// Eigenvalues of `K v = λ M v` for the nodal sine vectors on a mesh of
    /// element size `h`.
    Galerkin { h: f64 },
}

impl Spectrum {
    pub fn eigenvalue(&self, k: usize) -> f64 {
        match *self {
            Spectrum::Continuous => eigenvalue(k),
            Spectrum::Galerkin { h } => galerkin_eigenvalue(h, k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub k: usize,
    /// displacement coefficient on `E_k`
    pub a: f64,
    /// velocity coefficient on `E_k`
    pub b: f64,
}

/// Finite expansion `u = Σ a_k E_k`, `u̇ = Σ b_k E_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    modes: Vec<Mode>,
}

impl ModalState {
    pub fn new(modes: Vec<Mode>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for m in &modes {
            if m.k == 0 {
                return invalid("mode index starts at 1");
            }
            if !seen.insert(m.k) {
                return invalid(format!("mode {} listed twice", m.k));
            }
        }
        Ok(ModalState { modes })
    }

    pub fn single(k: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![Mode { k, a, b }])
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Apply the group for time `t`: one 2×2 rotation per mode.
    pub fn evolve(&self, t: f64, spectrum: Spectrum) -> ModalState {
        let modes = self
            .modes
            .iter()
            .map(|m| {
                let w = spectrum.eigenvalue(m.k).sqrt();
                let (s, c) = (w * t).sin_cos();
                Mode {
                    k: m.k,
                    a: c * m.a + s / w * m.b,
                    b: -w * s * m.a + c * m.b,
                }
            })
            .collect();
        ModalState { modes }
    }

    /// `Σ ½ λ_k a_k² + ½ b_k²`
    pub fn energy(&self, spectrum: Spectrum) -> f64 {
        self.modes
            .iter()
            .map(|m| 0.5 * spectrum.eigenvalue(m.k) * m.a * m.a + 0.5 * m.b * m.b)
            .sum()
    }

    pub fn to_nodal(&self, mesh: &Mesh) -> State {
        let mut u = DVector::zeros(mesh.interior_nodes());
        let mut v = DVector::zeros(mesh.interior_nodes());
        for m in &self.modes {
            let e = mesh.sample(|x| eigenfunction(m.k, x));
            u.axpy(m.a, &e, 1.0);
            v.axpy(m.b, &e, 1.0);
        }
        State::new(&u, &v).expect("equal lengths")
    }
}

/// The exact linear group applied to a modal state with continuous
/// eigenvalues.
pub fn exact_group(modal: &ModalState, t: f64) -> ModalState {
    modal.evolve(t, Spectrum::Continuous)
}

/// Velocity-block forcing sampled at the abscissae of one step.
#[derive(Debug, Clone)]
pub struct ForcingSamples {
    pub times: Vec<f64>,
    pub values: Vec<DVector<f64>>,
}

impl ForcingSamples {
    pub fn zero(times: Vec<f64>, n: usize) -> Self {
        let values = vec![DVector::zeros(n); times.len()];
        ForcingSamples { times, values }
    }
}

/// Advances `y(t̄)` to `y(t̄ + δ)` by
/// `P^(m-1) y + Σ_j w_j P^(m-1-j) (0, f(s_j))`.
pub fn duhamel_step(prop: &Propagator, rule: NewtonCotes, y: &State, forcing: &ForcingSamples) -> Result<State> {
    let m = rule.points();
    if forcing.values.len() != m || forcing.times.len() != m {
        return Err(Error::AbscissaMismatch(format!(
            "{} samples for a {m}-point rule",
            forcing.values.len()
        )));
    }
    if prop.count() < m - 1 {
        return Err(Error::AbscissaMismatch(format!(
            "propagator caches {} powers, rule needs {}",
            prop.count(),
            m - 1
        )));
    }
    let tau = prop.step();
    for (j, w) in forcing.times.windows(2).enumerate() {
        if ((w[1] - w[0]) - tau).abs() > 1e-9 * tau.abs().max(1e-300) {
            return Err(Error::AbscissaMismatch(format!(
                "abscissa gap {} at {j} differs from propagator step {tau}",
                w[1] - w[0]
            )));
        }
    }
    let delta = tau * (m - 1) as f64;
    Ok(duhamel_step_unchecked(prop, &rule.weights(delta), y, &forcing.values))
}

pub(crate) fn duhamel_step_unchecked(prop: &Propagator, weights: &[f64], y: &State, forcing: &[DVector<f64>]) -> State {
    let m = weights.len();
    let mut out = prop.power(m - 1) * y.stacked();
    for (j, (w, f)) in weights.iter().zip(forcing).enumerate() {
        prop.apply_velocity_block(m - 1 - j, f, &mut out, *w);
    }
    State::from_stacked(out)
}

/// Uniform-step sequence of states.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, first: State) -> Self {
        Trajectory {
            t0,
            dt,
            states: vec![first],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory is never empty")
    }

    /// Piecewise-linear interpolation in time, clamped to the stored range.
    pub fn interpolate(&self, t: f64) -> State {
        let pos = ((t - self.t0) / self.dt).clamp(0.0, (self.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.len().saturating_sub(2));
        let s = pos - i as f64;
        if self.len() == 1 {
            return self.states[0].clone();
        }
        if s <= 1e-12 {
            return self.states[i].clone();
        }
        if s >= 1.0 - 1e-12 {
            return self.states[i + 1].clone();
        }
        self.states[i].lerp(&self.states[i + 1], s)
    }

    /// Append `other`, whose first state duplicates our last one.
    pub fn append(&mut self, other: Trajectory) -> Result<()> {
        if (other.dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::GridMismatch(format!("step {} vs {}", other.dt, self.dt)));
        }
        if (other.t0 - self.end_time()).abs() > 1e-9 * self.dt {
            return Err(Error::GridMismatch(format!(
                "splice at {} but trajectory ends at {}",
                other.t0,
                self.end_time()
            )));
        }
        self.states.extend(other.states.into_iter().skip(1));
        Ok(())
    }
}

/// Exponential integrator for `y' = A_h y + (0, f(t))` with uniform steps.
///
/// Holds the propagator powers for the substep `δ / (m - 1)`, computed once.
#[derive(Debug, Clone)]
pub struct DuhamelSolver {
    generator: BlockGenerator,
    propagator: Propagator,
    rule: NewtonCotes,
    delta: f64,
    weights: Vec<f64>,
}

impl DuhamelSolver {
    pub fn new(ops: &SpatialOperators, delta: f64, rule: NewtonCotes) -> Result<Self> {
        if !(delta > 0.0) {
            return invalid(format!("time step {delta} must be positive"));
        }
        let generator = BlockGenerator::new(ops);
        let propagator = Propagator::new(&generator, rule.substep(delta), rule.points() - 1)?;
        Ok(DuhamelSolver {
            generator,
            propagator,
            rule,
            delta,
            weights: rule.weights(delta),
        })
    }

    pub fn operators(&self) -> &SpatialOperators {
        self.generator.operators()
    }

    pub fn generator(&self) -> &BlockGenerator {
        &self.generator
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn rule(&self) -> NewtonCotes {
        self.rule
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// One step from `t` given a forcing callable.
    pub fn step(&self, t: f64, y: &State, forcing: &mut dyn FnMut(f64) -> DVector<f64>) -> State {
        let tau = self.propagator.step();
        let samples: Vec<DVector<f64>> = (0..self.rule.points()).map(|j| forcing(t + j as f64 * tau)).collect();
        duhamel_step_unchecked(&self.propagator, &self.weights, y, &samples)
    }

    /// Trajectory at `t0 + iδ`, `i = 0..=steps`. The homogeneous part is
    /// carried recursively by the cached propagator.
    pub fn solve(&self, t0: f64, y0: &State, steps: usize, forcing: &mut dyn FnMut(f64) -> DVector<f64>) -> Trajectory {
        let mut traj = Trajectory::new(t0, self.delta, y0.clone());
        traj.states.reserve(steps);
        for i in 0..steps {
            let t = t0 + i as f64 * self.delta;
            let next = self.step(t, traj.last(), forcing);
            traj.states.push(next);
        }
        traj
    }
}

/// Solve `y' = A_h y + (0, f(t))` on `[0, T]` with `T = n δ`.
pub fn solve_linear_inhomogeneous(
    solver: &DuhamelSolver,
    y0: &State,
    horizon: f64,
    forcing: &mut dyn FnMut(f64) -> DVector<f64>,
) -> Result<Trajectory> {
    let steps = steps_for(horizon, solver.delta())?;
    Ok(solver.solve(0.0, y0, steps, forcing))
}

/// `T / δ` as an integer, rejecting horizons that are not a multiple.
pub fn steps_for(horizon: f64, delta: f64) -> Result<usize> {
    if !(horizon >= 0.0) || !(delta > 0.0) {
        return invalid(format!("horizon {horizon} and step {delta} must be positive"));
    }
    let n = (horizon / delta).round();
    if (n * delta - horizon).abs() > 1e-9 * horizon.max(delta) {
        return invalid(format!("step {delta} does not divide horizon {horizon}"));
    }
    Ok(n as usize)
}

/// Analytic single-mode solution of `ü - u_xx + β u̇ = 0` with data
/// `(c₀ sin(kπx), 0)`, underdamped regime only.
#[derive(Debug, Clone, Copy)]
pub struct LinearDampedMode {
    beta: f64,
    k: usize,
    amplitude: f64,
    omega: f64,
}

impl LinearDampedMode {
    pub fn new(beta: f64, k: usize, amplitude: f64) -> Result<Self> {
        if k == 0 {
            return invalid("mode index starts at 1");
        }
        let lambda = eigenvalue(k);
        if !(beta > 0.0) || beta >= 2.0 * lambda.sqrt() {
            return invalid(format!(
                "damping {beta} outside the underdamped range (0, {})",
                2.0 * lambda.sqrt()
            ));
        }
        Ok(LinearDampedMode {
            beta,
            k,
            amplitude,
            omega: (lambda - beta * beta / 4.0).sqrt(),
        })
    }

    fn kx(&self, x: f64) -> f64 {
        self.k as f64 * std::f64::consts::PI * x
    }

    /// Time factor `g(t)` and its derivative.
    fn time_factor(&self, t: f64) -> (f64, f64) {
        let (b, w) = (self.beta, self.omega);
        let decay = (-b * t / 2.0).exp();
        let (s, c) = (w * t).sin_cos();
        let g = decay * (c + b / (2.0 * w) * s);
        let dg = -decay * (w + b * b / (4.0 * w)) * s;
        (self.amplitude * g, self.amplitude * dg)
    }

    pub fn displacement(&self, t: f64, x: f64) -> f64 {
        self.time_factor(t).0 * self.kx(x).sin()
    }

    pub fn velocity(&self, t: f64, x: f64) -> f64 {
        self.time_factor(t).1 * self.kx(x).sin()
    }

    /// `∂_x u`
    pub fn slope(&self, t: f64, x: f64) -> f64 {
        self.time_factor(t).0 * self.k as f64 * std::f64::consts::PI * self.kx(x).cos()
    }

    /// `½|u_x|² + ½|u̇|²` of the continuous solution.
    pub fn energy(&self, t: f64) -> f64 {
        let (g, dg) = self.time_factor(t);
        let kp = self.k as f64 * std::f64::consts::PI;
        0.25 * (kp * kp * g * g + dg * dg)
    }

    /// Nodal samples of `(u, u̇)`.
    pub fn nodal(&self, mesh: &Mesh, t: f64) -> State {
        let u = mesh.sample(|x| self.displacement(t, x));
        let v = mesh.sample(|x| self.velocity(t, x));
        State::new(&u, &v).expect("equal lengths")
    }
}

/// Nodal samples of the analytic linearly damped single-mode solution.
pub fn analytic_linear_damped(mesh: &Mesh, beta: f64, k: usize, amplitude: f64, t: f64) -> Result<State> {
    Ok(LinearDampedMode::new(beta, k, amplitude)?.nodal(mesh, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{energy, energy_norm, expm};
    use crate::mesh::Mesh;
    use std::f64::consts::PI;

    #[test]
    fn modal_group_basics() {
        let m = ModalState::single(3, 1.0, 0.0).unwrap();
        assert_eq!(exact_group(&m, 0.0), m);
        let period = 2.0 * PI / eigenvalue(3).sqrt();
        let back = exact_group(&m, period);
        assert!((back.modes()[0].a - 1.0).abs() < 1e-12);
        assert!(back.modes()[0].b.abs() < 1e-10);
        let mixed = ModalState::new(vec![Mode { k: 1, a: 0.3, b: -0.2 }, Mode { k: 4, a: 0.05, b: 0.7 }]).unwrap();
        let e0 = mixed.energy(Spectrum::Continuous);
        for t in [0.1, 1.7, 23.0] {
            let e = exact_group(&mixed, t).energy(Spectrum::Continuous);
            assert!((e - e0).abs() < 1e-12);
        }
        assert!(ModalState::new(vec![Mode { k: 0, a: 1.0, b: 0.0 }]).is_err());
        assert!(ModalState::new(vec![Mode { k: 2, a: 1.0, b: 0.0 }, Mode { k: 2, a: 0.0, b: 1.0 }]).is_err());
    }

    #[test]
    fn boole_is_exact_for_quintics() {
        let delta = 0.37;
        let w = NewtonCotes::Boole.weights(delta);
        let x = NewtonCotes::Boole.abscissae(delta);
        for d in 0..=5 {
            let q: f64 = w.iter().zip(&x).map(|(w, x)| w * x.powi(d)).sum();
            let exact = delta.powi(d + 1) / (d as f64 + 1.0);
            assert!((q - exact).abs() < 1e-13, "degree {d}");
        }
        let q6: f64 = w.iter().zip(&x).map(|(w, x)| w * x.powi(6)).sum();
        assert!((q6 - delta.powi(7) / 7.0).abs() > 1e-8);
        let w = NewtonCotes::Simpson38.weights(delta);
        let x = NewtonCotes::Simpson38.abscissae(delta);
        for d in 0..=3 {
            let q: f64 = w.iter().zip(&x).map(|(w, x)| w * x.powi(d)).sum();
            assert!((q - delta.powi(d + 1) / (d as f64 + 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn duhamel_step_checks_abscissae() {
        let ops = SpatialOperators::assemble(&Mesh::new(3).unwrap());
        let gen = BlockGenerator::new(&ops);
        let prop = Propagator::new(&gen, 0.01, 4).unwrap();
        let y = State::zeros(3);
        let ok = ForcingSamples::zero(vec![0.0, 0.01, 0.02, 0.03, 0.04], 3);
        assert!(duhamel_step(&prop, NewtonCotes::Boole, &y, &ok).is_ok());
        let short = ForcingSamples::zero(vec![0.0, 0.01, 0.02, 0.03], 3);
        assert!(matches!(
            duhamel_step(&prop, NewtonCotes::Boole, &y, &short),
            Err(Error::AbscissaMismatch(_))
        ));
        let skewed = ForcingSamples::zero(vec![0.0, 0.01, 0.025, 0.03, 0.04], 3);
        assert!(duhamel_step(&prop, NewtonCotes::Boole, &y, &skewed).is_err());
    }

    #[test]
    fn zero_forcing_is_pure_propagation() {
        let ops = SpatialOperators::assemble(&Mesh::new(5).unwrap());
        let gen = BlockGenerator::new(&ops);
        let prop = Propagator::new(&gen, 0.01, 4).unwrap();
        let y = State::new(&DVector::from_element(5, 0.2), &DVector::from_element(5, -0.1)).unwrap();
        let f = ForcingSamples::zero(vec![0.0, 0.01, 0.02, 0.03, 0.04], 5);
        let next = duhamel_step(&prop, NewtonCotes::Boole, &y, &f).unwrap();
        assert!((next.stacked() - prop.apply(4, &y).stacked()).amax() < 1e-15);
    }

    #[test]
    fn constant_forcing_single_node_closed_form() {
        // ∫₀^δ exp((δ-s)A) F ds = A⁻¹(exp(δA) - I) F for invertible A
        let ops = SpatialOperators::assemble(&Mesh::new(1).unwrap());
        let delta = 0.05;
        let solver = DuhamelSolver::new(&ops, delta, NewtonCotes::Boole).unwrap();
        let f = DVector::from_element(1, 0.8);
        let y = solver.step(0.0, &State::zeros(1), &mut |_| f.clone());
        let a = solver.generator().dense().clone();
        let e = expm(&(&a * delta)).unwrap();
        let rhs = (e - nalgebra::DMatrix::identity(2, 2)) * DVector::from_vec(vec![0.0, 0.8]);
        let exact = a.lu().solve(&rhs).unwrap();
        // Boole on a rotation of frequency √12 over δ: error ~ (ωδ)^7
        assert!((y.stacked() - exact).amax() < 1e-10);
    }

    #[test]
    fn polynomial_forcing_with_zero_generator_is_exact() {
        // With A = 0 the step reduces to Boole quadrature of f.
        let gen_zero = nalgebra::DMatrix::<f64>::zeros(2, 2);
        let p = expm(&gen_zero).unwrap();
        assert_eq!(p, nalgebra::DMatrix::identity(2, 2));
        let delta = 0.3;
        let rule = NewtonCotes::Boole;
        let f = |s: f64| 1.0 - 2.0 * s + 0.5 * s.powi(3) + 3.0 * s.powi(5);
        let q: f64 = rule
            .weights(delta)
            .iter()
            .zip(rule.abscissae(delta))
            .map(|(w, s)| w * f(s))
            .sum();
        let exact = delta - delta.powi(2) + 0.125 * delta.powi(4) + 0.5 * delta.powi(6);
        assert!((q - exact).abs() < 1e-13);
    }

    #[test]
    fn homogeneous_solve_matches_discrete_group() {
        let mesh = Mesh::new(99).unwrap();
        let ops = SpatialOperators::assemble(&mesh);
        let solver = DuhamelSolver::new(&ops, 2e-3, NewtonCotes::Boole).unwrap();
        let modal = ModalState::single(1, 2.0 / PI / 2f64.sqrt(), 0.0).unwrap();
        let y0 = modal.to_nodal(&mesh);
        let traj = solve_linear_inhomogeneous(&solver, &y0, 10.0, &mut |_| DVector::zeros(99)).unwrap();
        let spectrum = Spectrum::Galerkin { h: mesh.element_size() };
        let e0 = energy(&ops, &y0);
        let mut worst: f64 = 0.0;
        let mut drift: f64 = 0.0;
        for (i, y) in traj.states.iter().enumerate() {
            let exact = modal.evolve(traj.time(i), spectrum).to_nodal(&mesh);
            worst = worst.max(energy_norm(&ops, &y.sub(&exact)));
            drift = drift.max((energy(&ops, y) - e0).abs());
        }
        assert!(worst < 1e-8, "{worst}");
        assert!(drift < 1e-9, "{drift}");
    }

    #[test]
    fn linear_damped_mode() {
        let mesh = Mesh::new(9).unwrap();
        let beta = (2.0 / PI).powi(2);
        let c0 = 2.0 / PI;
        let s0 = analytic_linear_damped(&mesh, beta, 1, c0, 0.0).unwrap();
        let expect = mesh.sample(|x| c0 * (PI * x).sin());
        assert!((s0.u() - expect).amax() < 1e-15);
        assert!(s0.v().amax() < 1e-15);
        let m = LinearDampedMode::new(beta, 1, c0).unwrap();
        let mut prev = m.energy(0.0);
        assert!((prev - 1.0).abs() < 1e-12);
        for i in 1..500 {
            let e = m.energy(i as f64 * 0.02);
            assert!(e <= prev + 1e-15);
            prev = e;
        }
        // velocity is the time derivative of displacement
        let (t, x, dt) = (1.3, 0.4, 1e-6);
        let fd = (m.displacement(t + dt, x) - m.displacement(t - dt, x)) / (2.0 * dt);
        assert!((fd - m.velocity(t, x)).abs() < 1e-8);
        assert!(LinearDampedMode::new(10.0, 1, 1.0).is_err());
        assert!(LinearDampedMode::new(-1.0, 1, 1.0).is_err());
    }

    #[test]
    fn step_counts() {
        assert_eq!(steps_for(10.0, 2e-3).unwrap(), 5000);
        assert!(steps_for(1.0, 0.3).is_err());
    }

    #[test]
    fn interpolation_and_splice() {
        let a = State::from_stacked(DVector::from_vec(vec![0.0, 0.0]));
        let b = State::from_stacked(DVector::from_vec(vec![1.0, 2.0]));
        let mut tr = Trajectory::new(0.0, 0.5, a.clone());
        tr.states.push(b.clone());
        let mid = tr.interpolate(0.25);
        assert!((mid.stacked()[0] - 0.5).abs() < 1e-15);
        assert_eq!(tr.interpolate(5.0), b);
        let mut other = Trajectory::new(0.5, 0.5, b.clone());
        other.states.push(a.clone());
        tr.append(other).unwrap();
        assert_eq!(tr.len(), 3);
        let bad = Trajectory::new(7.0, 0.5, a);
        assert!(tr.append(bad).is_err());
    }
}
