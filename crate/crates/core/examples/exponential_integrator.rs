//! Matrix exponential of the block generator and one Duhamel step.
//!
//!     cargo run --release --example exponential_integrator

use degenwave::linop::{energy, expm, BlockGenerator, Propagator, State};
use degenwave::linwave::{duhamel_step, ForcingSamples, NewtonCotes};
use degenwave::mesh::{Mesh, SpatialOperators};
use nalgebra::DVector;

fn main() -> degenwave::Result<()> {
    let ops = SpatialOperators::assemble(&Mesh::new(49)?);
    let gen = BlockGenerator::new(&ops);
    let p = expm(&(gen.dense() * 0.5))?;
    let u = ops.ritz_project_h1(|x| (std::f64::consts::PI * x).sin());
    let y = State::new(&u, &DVector::zeros(49))?;
    let z = State::from_stacked(&p * y.stacked());
    println!(
        "energy before {:.12}, after t = 0.5: {:.12}",
        energy(&ops, &y),
        energy(&ops, &z)
    );

    let rule = NewtonCotes::Boole;
    let delta = 0.01;
    let prop = Propagator::new(&gen, rule.substep(delta), rule.points() - 1)?;
    let forcing = ForcingSamples {
        times: rule.abscissae(delta),
        values: vec![DVector::from_element(49, 1.0); rule.points()],
    };
    let next = duhamel_step(&prop, rule, &y, &forcing)?;
    println!("one step with unit forcing: E = {:.12}", energy(&ops, &next));
    Ok(())
}
