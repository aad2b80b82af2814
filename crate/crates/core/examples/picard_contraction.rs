//! Windowed Picard iteration with the contraction estimate that sizes its
//! windows.
//!
//!     cargo run --release --example picard_contraction

use degenwave::linop::{energy_norm, State};
use degenwave::linwave::{DuhamelSolver, NewtonCotes};
use degenwave::mesh::{Mesh, SpatialOperators};
use degenwave::picard::{
    certified_error_bound, estimate_contraction, fixed_point_residual, picard_solve, DampingLaw, PicardConfig,
};
use nalgebra::DVector;

fn main() -> degenwave::Result<()> {
    let ops = SpatialOperators::assemble(&Mesh::new(49)?);
    let u = ops.ritz_project_h1(|x| 2.0 / std::f64::consts::PI * (std::f64::consts::PI * x).sin());
    let y0 = State::new(&u, &DVector::zeros(49))?;
    let radius = energy_norm(&ops, &y0);

    let damping = DampingLaw::degenerate(1.0, 1)?;
    let config = PicardConfig::new(damping, 0.01);
    let gamma = estimate_contraction(radius, config.window, 1.0, 1);
    println!(
        "R = {radius:.4}, gamma = {gamma:.4}, bound {:?}",
        certified_error_bound(config.tolerance, gamma)
    );

    let solver = DuhamelSolver::new(&ops, config.delta, NewtonCotes::Boole)?;
    let outcome = picard_solve(&solver, &y0, 5.0, &config)?;
    for w in &outcome.windows {
        println!(
            "[{:.0}, {:.0}]  {} iterations, last distance {:.2e}",
            w.start,
            w.end,
            w.iterations,
            w.distances.last().unwrap_or(&0.0)
        );
    }
    println!(
        "fixed-point residual {:.2e}",
        fixed_point_residual(&solver, &outcome.trajectory, damping)
    );
    Ok(())
}
