//! Picard on [0, 10] continued by exponential AB5 to t = 50, with the
//! displacement L² norm against its bound from the primitive problem.
//!
//!     cargo run --release --example long_time_extension

use degenwave::experiments::{frequency_sweep, lower_order_decay, primitive_setup, FrequencyFamily, SweepParams};
use degenwave::mesh::{Mesh, SpatialOperators};

fn main() -> degenwave::Result<()> {
    let mut params = SweepParams::new(FrequencyFamily::new(vec![1, 8])?, 1.0, 1, 99, 2e-3, 10.0);
    params.extension = Some(50.0);
    let ops = SpatialOperators::assemble(&Mesh::new(params.n)?);
    for run in frequency_sweep(&params)? {
        let trace = &run.result.trace;
        let setup = primitive_setup(&ops, run.k, 1.0, 1, run.amplitude)?;
        let bound = lower_order_decay(&ops, trace, &setup);
        println!("k = {}", run.k);
        for t in [0.0, 10.0, 20.0, 30.0, 40.0, 50.0] {
            let i = (t / params.delta).round() as usize;
            println!("  t = {t:>4}  E = {:.6}  |u|_0 = {:.6}", trace.energy[i], trace.l2[i]);
        }
        println!(
            "  bound |u|_0^2 <= {:.4e} holds everywhere: {}",
            bound.bound,
            bound.all_hold()
        );
    }
    Ok(())
}
