//! Energy decay of unit-energy sine data at k = 1, 2, 4, 8 and the error
//! against the ansatz oracle.
//!
//!     cargo run --release --example frequency_sweep

use degenwave::experiments::{conservative_comparison, frequency_sweep, FrequencyFamily, SweepParams};
use degenwave::mesh::{Mesh, SpatialOperators};
use degenwave::oracle::{compare_energy_norm, rk4_ansatz, AnsatzProblem};

fn main() -> degenwave::Result<()> {
    let family = FrequencyFamily::new(vec![1, 2, 4, 8])?;
    let params = SweepParams::new(family, 1.0, 1, 99, 2e-3, 10.0);
    let ops = SpatialOperators::assemble(&Mesh::new(params.n)?);

    println!(
        "{:>3} {:>10} {:>10} {:>12} {:>12}",
        "k", "E(0)", "E(10)", "e_k", "E_z(10)"
    );
    for run in frequency_sweep(&params)? {
        let trace = &run.result.trace;
        let problem = AnsatzProblem::on_mesh(&ops.mesh, run.k, run.amplitude / 2f64.sqrt(), 0.0, 1.0, 1)?;
        let oracle = rk4_ansatz(&problem, 10.0, params.delta, 10)?;
        let e = compare_energy_norm(&run.result.trajectory, &oracle, &ops)?;
        let ez = conservative_comparison(&ops, &run);
        println!(
            "{:>3} {:>10.6} {:>10.6} {:>12.4e} {:>12.4e}",
            run.k,
            trace.energy[0],
            trace.final_energy(),
            e.max_energy,
            ez.last().unwrap()
        );
    }
    Ok(())
}
