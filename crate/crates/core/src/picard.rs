//! Successive approximations for the semilinear problem.
//!
//! Each iterate solves the linear wave equation forced by the damping term
//! of the previous iterate. Long horizons are split into windows, each
//! iterated to tolerance and restarted from the previous window's end state.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linop::{energy_norm, State};
use crate::linwave::{steps_for, DuhamelSolver, NewtonCotes, Trajectory};
use crate::mesh::SpatialOperators;
use crate::quadrature::GaussRule;

/// The damping term `D(u, u̇)` in `ü - u_xx + D = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum DampingLaw {
    /// Conservative wave equation.
    None,
    /// `α u^(2m) u̇`
    Degenerate { alpha: f64, m: u32 },
    /// `β u̇`
    Linear { beta: f64 },
    /// `α u̇^(2m+1) / (2m+1)`, the velocity damping of the primitive problem.
    VelocityPower { alpha: f64, m: u32 },
}

impl DampingLaw {
    pub fn degenerate(alpha: f64, m: u32) -> Result<Self> {
        if !(alpha >= 0.0) || m == 0 {
            return invalid(format!("need α ≥ 0 and m ≥ 1, got α={alpha}, m={m}"));
        }
        Ok(DampingLaw::Degenerate { alpha, m })
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            DampingLaw::None => true,
            DampingLaw::Degenerate { alpha, .. } | DampingLaw::VelocityPower { alpha, .. } => alpha == 0.0,
            DampingLaw::Linear { beta } => beta == 0.0,
        }
    }

    /// Coefficient vector of `-R⁰_h[D(u, v)]`, the velocity-block forcing.
    pub fn forcing(&self, ops: &SpatialOperators, y: &State) -> DVector<f64> {
        let (u, v) = (y.u_slice(), y.v_slice());
        match *self {
            DampingLaw::None => DVector::zeros(ops.dim()),
            DampingLaw::Degenerate { alpha, m } => cubic_forcing(ops, u, v, alpha, m),
            DampingLaw::Linear { beta } => DVector::from_column_slice(v) * -beta,
            DampingLaw::VelocityPower { alpha, m } => {
                let p = 2 * m + 1;
                let mut load = if m == 1 {
                    ops.quartic.contract(v, v, v)
                } else {
                    quadrature_load(ops, u, v, GaussRule::exact_for_degree(p as usize + 1), |_, vv| {
                        vv.powi(p as i32)
                    })
                };
                load *= -alpha / p as f64;
                ops.solve_mass_in_place(load.as_mut_slice());
                load
            }
        }
    }
}

/// `-R⁰_h[α u^(2m) v]` as a coefficient vector.
///
/// For `m = 1` the load is the quartic-tensor contraction
/// `B_p = Σ C_pqrs u_q u_r v_s`; larger `m` uses per-element Gauss
/// quadrature exact for the degree-`2m+2` integrand.
pub fn cubic_forcing(ops: &SpatialOperators, u: &[f64], v: &[f64], alpha: f64, m: u32) -> DVector<f64> {
    let mut load = if m == 1 {
        ops.quartic.contract(u, u, v)
    } else {
        let rule = GaussRule::exact_for_degree(2 * m as usize + 2);
        quadrature_load(ops, u, v, rule, |uu, vv| uu.powi(2 * m as i32) * vv)
    };
    load *= -alpha;
    ops.solve_mass_in_place(load.as_mut_slice());
    load
}

/// `(g(u_h, v_h), φ_p)` by Gauss quadrature on each element.
pub fn quadrature_load(
    ops: &SpatialOperators,
    u: &[f64],
    v: &[f64],
    rule: GaussRule,
    g: impl Fn(f64, f64) -> f64,
) -> DVector<f64> {
    let mesh = &ops.mesh;
    let n = mesh.interior_nodes();
    let h = mesh.element_size();
    let mut load = DVector::zeros(n);
    for e in 0..mesh.elements() {
        let (ul, ur) = mesh.element_coeffs(u, e);
        let (vl, vr) = mesh.element_coeffs(v, e);
        let (mut to_left, mut to_right) = (0.0, 0.0);
        for (s, w) in rule.nodes.iter().zip(&rule.weights) {
            let val = g(ul * (1.0 - s) + ur * s, vl * (1.0 - s) + vr * s) * w * h;
            to_left += val * (1.0 - s);
            to_right += val * s;
        }
        if e > 0 {
            load[e - 1] += to_left;
        }
        if e < n {
            load[e] += to_right;
        }
    }
    load
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    /// Window length `T_w`; must be a multiple of `delta`.
    pub window: f64,
    pub delta: f64,
    pub max_iterations: usize,
    /// Stop once the sup-in-time energy-norm change drops below this.
    pub tolerance: f64,
    pub damping: DampingLaw,
    pub rule: NewtonCotes,
}

impl PicardConfig {
    pub fn new(damping: DampingLaw, delta: f64) -> Self {
        PicardConfig {
            window: 1.0,
            delta,
            max_iterations: 50,
            tolerance: 1e-8,
            damping,
            rule: NewtonCotes::Boole,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.window > 0.0 && self.tolerance > 0.0) {
            return invalid("window, step and tolerance must be positive");
        }
        if self.max_iterations == 0 {
            return invalid("max_iterations must be at least 1");
        }
        steps_for(self.window, self.delta).map(|_| ())?;
        match self.damping {
            DampingLaw::Degenerate { alpha, m } | DampingLaw::VelocityPower { alpha, m } => {
                if !(alpha >= 0.0) || m == 0 {
                    return invalid(format!("need α ≥ 0 and m ≥ 1, got α={alpha}, m={m}"));
                }
            }
            DampingLaw::Linear { beta } if !(beta >= 0.0) => {
                return invalid(format!("linear damping {beta} must be nonnegative"));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowReport {
    pub start: f64,
    pub end: f64,
    pub iterations: usize,
    pub distances: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub trajectory: Trajectory,
    pub windows: Vec<WindowReport>,
}

impl PicardOutcome {
    pub fn iterations(&self) -> usize {
        self.windows.iter().map(|w| w.iterations).sum()
    }

    /// Largest final consecutive-iterate distance over all windows.
    pub fn final_distance(&self) -> f64 {
        self.windows
            .iter()
            .map(|w| w.distances.last().copied().unwrap_or(0.0))
            .fold(0.0, f64::max)
    }

    pub fn converged(&self) -> bool {
        self.windows.iter().all(|w| w.converged)
    }
}

/// Windowed Picard iteration on `[0, horizon]` from projected data `y0`.
///
/// Inside a window the first iterate uses the forcing of the window's
/// initial state held constant in time; later iterates evaluate the forcing
/// on the previous iterate, linearly interpolated to the quadrature
/// abscissae.
pub fn picard_solve(solver: &DuhamelSolver, y0: &State, horizon: f64, config: &PicardConfig) -> Result<PicardOutcome> {
    config.validate()?;
    if (solver.delta() - config.delta).abs() > 1e-15 * config.delta || solver.rule() != config.rule {
        return invalid("solver step or rule differs from the Picard config");
    }
    let total_steps = steps_for(horizon, config.delta)?;
    let window_steps = steps_for(config.window, config.delta)?;
    let ops = solver.operators();

    let mut trajectory = Trajectory::new(0.0, config.delta, y0.clone());
    let mut windows = Vec::new();
    let mut done = 0usize;
    while done < total_steps {
        let steps = window_steps.min(total_steps - done);
        let t_a = done as f64 * config.delta;
        let (piece, report) = picard_window(solver, ops, trajectory.last(), t_a, steps, config)?;
        trajectory.append(piece)?;
        windows.push(report);
        done += steps;
    }
    Ok(PicardOutcome { trajectory, windows })
}

fn picard_window(
    solver: &DuhamelSolver,
    ops: &SpatialOperators,
    start: &State,
    t_a: f64,
    steps: usize,
    config: &PicardConfig,
) -> Result<(Trajectory, WindowReport)> {
    let end = t_a + steps as f64 * config.delta;
    let law = config.damping;
    if law.is_zero() {
        let zero = DVector::zeros(ops.dim());
        let traj = solver.solve(t_a, start, steps, &mut |_| zero.clone());
        let report = WindowReport {
            start: t_a,
            end,
            iterations: 1,
            distances: vec![0.0],
            converged: true,
        };
        return Ok((traj, report));
    }

    let f0 = law.forcing(ops, start);
    let mut prev = solver.solve(t_a, start, steps, &mut |_| f0.clone());
    let mut distances = Vec::new();
    let mut iterations = 1;
    let mut converged = false;
    while iterations < config.max_iterations {
        let next = {
            let prev_ref = &prev;
            solver.solve(t_a, start, steps, &mut |s| law.forcing(ops, &prev_ref.interpolate(s)))
        };
        let d = sup_distance(ops, &prev, &next);
        iterations += 1;
        distances.push(d);
        prev = next;
        if !d.is_finite() {
            return Err(Error::PicardDivergence { time: t_a, distances });
        }
        if d < config.tolerance {
            converged = true;
            break;
        }
        let k = distances.len();
        if k >= 4
            && distances[k - 1] > distances[k - 2]
            && distances[k - 2] > distances[k - 3]
            && distances[k - 3] > distances[k - 4]
        {
            return Err(Error::PicardDivergence { time: t_a, distances });
        }
    }
    let report = WindowReport {
        start: t_a,
        end,
        iterations,
        distances,
        converged,
    };
    Ok((prev, report))
}

/// `max_i ‖a_i - b_i‖_E` over a common grid.
pub fn sup_distance(ops: &SpatialOperators, a: &Trajectory, b: &Trajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| energy_norm(ops, &x.sub(y)))
        .fold(0.0, f64::max)
}

/// One more application of the Picard map to a converged trajectory,
/// returning the sup-in-time distance it moves.
pub fn fixed_point_residual(solver: &DuhamelSolver, trajectory: &Trajectory, damping: DampingLaw) -> f64 {
    let ops = solver.operators();
    let steps = trajectory.len() - 1;
    let again = solver.solve(trajectory.t0, &trajectory.states[0], steps, &mut |s| {
        damping.forcing(ops, &trajectory.interpolate(s))
    });
    sup_distance(ops, trajectory, &again)
}

/// Upper bound `γ` on the Lipschitz constant of the Picard map over a
/// window of length `window` on the ball of radius `radius` in the energy
/// norm.
///
/// Writing `f(s) = α s^(2m)`, the difference of damping terms splits as
/// `φ₁ M(φ₀, φ̃₀)(φ₀ - φ̃₀) + f(φ̃₀)(φ₁ - φ̃₁)` with
/// `M(s, r) = α Σ_j s^j r^(2m-1-j)`. Bounding displacements through
/// `‖w‖_∞ ≤ ½ |w|₁` on H¹₀(0, 1) gives `|M| ≤ 2mα (R/2)^(2m-1)` and
/// `|f| ≤ α (R/2)^(2m)`, so the map is Lipschitz with constant
/// `T α (2m + 1) (R/2)^(2m)`.
pub fn estimate_contraction(radius: f64, window: f64, alpha: f64, m: u32) -> f64 {
    window * alpha * (2 * m + 1) as f64 * (0.5 * radius).powi(2 * m as i32)
}

/// `ε γ / (1 - γ)` when `γ < 1`.
pub fn certified_error_bound(tolerance: f64, gamma: f64) -> Option<f64> {
    (gamma < 1.0).then(|| tolerance * gamma / (1.0 - gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::energy;
    use crate::mesh::Mesh;
    use std::f64::consts::PI;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    #[test]
    fn forcing_vanishes_with_either_factor() {
        let ops = SpatialOperators::assemble(&Mesh::new(8).unwrap());
        let v = DVector::from_element(8, 0.3);
        let zero = DVector::zeros(8);
        let law = DampingLaw::Degenerate { alpha: 1.0, m: 1 };
        assert_eq!(law.forcing(&ops, &State::new(&zero, &v).unwrap()).amax(), 0.0);
        assert_eq!(law.forcing(&ops, &State::new(&v, &zero).unwrap()).amax(), 0.0);
    }

    #[test]
    fn tensor_forcing_matches_quadrature_projection() {
        let ops = SpatialOperators::assemble(&Mesh::new(8).unwrap());
        let mut seed = 11;
        for _ in 0..5 {
            let u: Vec<f64> = (0..8).map(|_| lcg(&mut seed)).collect();
            let v: Vec<f64> = (0..8).map(|_| lcg(&mut seed)).collect();
            let tensor = cubic_forcing(&ops, &u, &v, 1.0, 1);
            let mut quad = quadrature_load(&ops, &u, &v, GaussRule::new(4), |a, b| -a * a * b);
            ops.solve_mass_in_place(quad.as_mut_slice());
            assert!((tensor - quad).amax() < 1e-12);
        }
    }

    #[test]
    fn higher_exponent_uses_exact_quadrature() {
        let ops = SpatialOperators::assemble(&Mesh::new(6).unwrap());
        let u = [0.2, -0.4, 0.9, 0.1, 0.5, -0.3];
        let v = [0.7, 0.1, -0.2, 0.4, -0.6, 0.3];
        let low = cubic_forcing(&ops, &u, &v, 2.0, 2);
        let mut high = quadrature_load(&ops, &u, &v, GaussRule::new(10), |a, b| -2.0 * a.powi(4) * b);
        ops.solve_mass_in_place(high.as_mut_slice());
        assert!((low - high).amax() < 1e-13);
    }

    #[test]
    fn velocity_power_tensor_matches_quadrature() {
        let ops = SpatialOperators::assemble(&Mesh::new(7).unwrap());
        let u = DVector::zeros(7);
        let v = DVector::from_fn(7, |i, _| (i as f64 * 0.9).cos());
        let y = State::new(&u, &v).unwrap();
        let f = DampingLaw::VelocityPower { alpha: 1.0, m: 1 }.forcing(&ops, &y);
        let mut q = quadrature_load(&ops, u.as_slice(), v.as_slice(), GaussRule::new(5), |_, b| {
            -b.powi(3) / 3.0
        });
        ops.solve_mass_in_place(q.as_mut_slice());
        assert!((f - q).amax() < 1e-13);
    }

    #[test]
    fn zero_damping_converges_immediately() {
        let mesh = Mesh::new(19).unwrap();
        let ops = SpatialOperators::assemble(&mesh);
        let solver = DuhamelSolver::new(&ops, 0.01, NewtonCotes::Boole).unwrap();
        let u0 = ops.ritz_project_h1(|x| (PI * x).sin());
        let y0 = State::new(&u0, &DVector::zeros(19)).unwrap();
        let mut cfg = PicardConfig::new(DampingLaw::Degenerate { alpha: 0.0, m: 1 }, 0.01);
        cfg.window = 2.0;
        let out = picard_solve(&solver, &y0, 2.0, &cfg).unwrap();
        assert_eq!(out.iterations(), 1);
        assert!(out.converged());
        let e0 = energy(&ops, &y0);
        assert!(out
            .trajectory
            .states
            .iter()
            .all(|y| (energy(&ops, y) - e0).abs() < 1e-10));
    }

    #[test]
    fn degenerate_damping_converges_geometrically_and_is_a_fixed_point() {
        let mesh = Mesh::new(19).unwrap();
        let ops = SpatialOperators::assemble(&mesh);
        let delta = 0.01;
        let solver = DuhamelSolver::new(&ops, delta, NewtonCotes::Boole).unwrap();
        let u0 = ops.ritz_project_h1(|x| 2.0 / PI * (PI * x).sin());
        let y0 = State::new(&u0, &DVector::zeros(19)).unwrap();
        let cfg = PicardConfig::new(DampingLaw::Degenerate { alpha: 1.0, m: 1 }, delta);
        let out = picard_solve(&solver, &y0, 2.0, &cfg).unwrap();
        assert!(out.converged());
        assert!(out.final_distance() < 1e-8);
        for w in &out.windows {
            let d = &w.distances;
            let tail = &d[d.len().saturating_sub(4)..];
            for pair in tail.windows(2) {
                assert!(pair[1] / pair[0] < 1.0, "{d:?}");
            }
        }
        let residual = fixed_point_residual(&solver, &out.trajectory, cfg.damping);
        assert!(residual < 1e-7, "{residual}");
        let e: Vec<f64> = out.trajectory.states.iter().map(|y| energy(&ops, y)).collect();
        for w in e.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6));
        }
        assert!(e[e.len() - 1] < e[0]);
    }

    #[test]
    fn contraction_bound() {
        assert_eq!(estimate_contraction(2f64.sqrt(), 0.0, 1.0, 1), 0.0);
        let g = |t| estimate_contraction(2f64.sqrt(), t, 1.0, 1);
        assert!((g(0.1) - 0.15).abs() < 1e-14);
        assert!((g(0.5) - 0.75).abs() < 1e-14);
        assert!((g(1.0) - 1.5).abs() < 1e-14);
        assert!(estimate_contraction(2.0, 1.0, 1.0, 1) > estimate_contraction(1.0, 1.0, 1.0, 1));
        assert!(estimate_contraction(1.0, 1.0, 2.0, 1) > estimate_contraction(1.0, 1.0, 1.0, 1));
        assert_eq!(certified_error_bound(1e-8, 1.5), None);
        assert!((certified_error_bound(1e-8, 0.5).unwrap() - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn config_validation() {
        let mut c = PicardConfig::new(DampingLaw::Degenerate { alpha: 1.0, m: 1 }, 0.3);
        assert!(c.validate().is_err());
        c.delta = 0.25;
        assert!(c.validate().is_ok());
        c.damping = DampingLaw::Degenerate { alpha: 1.0, m: 0 };
        assert!(c.validate().is_err());
        assert!(DampingLaw::degenerate(-1.0, 1).is_err());
    }
}
