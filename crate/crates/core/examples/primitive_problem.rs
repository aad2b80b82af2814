//! The velocity potential: elliptic data Φ, the primitive evolution and its
//! energy decay rate.
//!
//!     cargo run --release --example primitive_problem

use degenwave::experiments::{
    decay_rate_fit, frequency_sweep, primitive_closed_form, primitive_setup, primitive_solve, FrequencyFamily,
    SweepParams,
};
use degenwave::linwave::{DuhamelSolver, NewtonCotes};
use degenwave::mesh::{Mesh, SpatialOperators};

fn main() -> degenwave::Result<()> {
    let amplitude = FrequencyFamily::nominal_amplitude(1);
    for n in [49, 99] {
        let ops = SpatialOperators::assemble(&Mesh::new(n)?);
        let setup = primitive_setup(&ops, 1, 1.0, 1, amplitude)?;
        let (phi, _) = primitive_closed_form(1, 1.0, amplitude);
        println!(
            "N = {n}: |Phi_h - Phi|_0 = {:.3e}",
            ops.l2_error(setup.phi.as_slice(), phi)
        );
    }

    let params = SweepParams::new(FrequencyFamily::new(vec![1])?, 1.0, 1, 99, 2e-3, 10.0);
    let ops = SpatialOperators::assemble(&Mesh::new(99)?);
    let solver = DuhamelSolver::new(&ops, params.delta, NewtonCotes::Boole)?;
    let setup = primitive_setup(&ops, 1, 1.0, 1, amplitude)?;
    let u = frequency_sweep(&params)?.remove(0);

    let mut long = params.clone();
    long.extension = Some(50.0);
    let run = primitive_solve(&ops, &solver, &setup, &long, Some(&u.result.trajectory))?;
    println!(
        "sup_t |phi_t - u|_0 on [0, 10] = {:.3e}",
        run.velocity_mismatch.unwrap()
    );
    println!(
        "E_phi(0) = {:.6}, E_phi(50) = {:.6}",
        run.trace.energy[0],
        run.trace.final_energy()
    );
    println!(
        "fitted exponent on [10, 50]: {:.4}",
        decay_rate_fit(&run.trace, 10.0, 50.0)?
    );
    Ok(())
}
