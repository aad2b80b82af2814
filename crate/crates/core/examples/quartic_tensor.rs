//! The quartic tensor behind the cubic forcing.
//!
//!     cargo run --release --example quartic_tensor

use degenwave::mesh::{Mesh, SpatialOperators};
use degenwave::picard::cubic_forcing;

fn main() -> degenwave::Result<()> {
    let ops = SpatialOperators::assemble(&Mesh::new(9)?);
    let t = &ops.quartic;
    println!("distinct values (h = 0.1): {:?}", t.distinct_values());
    println!(
        "C_3333 = {:.5}, C_3334 = {:.5}, C_3344 = {:.5}, C_3345 = {}",
        t.entry(3, 3, 3, 3),
        t.entry(3, 3, 3, 4),
        t.entry(3, 3, 4, 4),
        t.entry(3, 3, 4, 5)
    );

    let u: Vec<f64> = ops
        .mesh
        .nodes()
        .iter()
        .map(|x| (std::f64::consts::PI * x).sin())
        .collect();
    let v = vec![1.0; 9];
    let f = cubic_forcing(&ops, &u, &v, 1.0, 1);
    println!("-M^-1 (u^2 v, phi_p) = {:.4}", f);
    Ok(())
}
