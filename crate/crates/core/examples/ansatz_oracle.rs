//! Per-point RK4 for eigenfunction data and its fourth-order convergence.
//!
//!     cargo run --release --example ansatz_oracle

use degenwave::mesh::Mesh;
use degenwave::oracle::{rk4_ansatz, AnsatzProblem};

fn main() -> degenwave::Result<()> {
    let mesh = Mesh::new(9)?;
    let c0 = AnsatzProblem::unit_energy_amplitude(1);

    // undamped: φ = c₀ cos(πt)
    let free = AnsatzProblem::on_mesh(&mesh, 1, c0, 0.0, 0.0, 1)?;
    let mut prev = None;
    for substeps in [5, 10, 20] {
        let sol = rk4_ansatz(&free, 10.0, 0.1, substeps)?;
        let err = (sol.phi.last().unwrap()[0] - c0 * (10.0 * std::f64::consts::PI).cos()).abs();
        print!("dt = {:.4}  error {err:.3e}", 0.1 / substeps as f64);
        if let Some(p) = prev {
            print!("  ratio {:.2}", p / err);
        }
        println!();
        prev = Some(err);
    }

    let damped = AnsatzProblem::on_mesh(&mesh, 1, c0, 0.0, 1.0, 1)?;
    let sol = rk4_ansatz(&damped, 10.0, 0.01, 10)?;
    let end = sol.modal_energy(sol.len() - 1);
    for (x, e) in mesh.nodes().iter().zip(end) {
        println!("x = {x:.1}  point energy at t = 10: {e:.6}");
    }
    Ok(())
}
