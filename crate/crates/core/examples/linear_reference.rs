//! Linearly damped single mode against its closed form, on two meshes.
//!
//!     cargo run --release --example linear_reference

use degenwave::experiments::{linear_damped_reference, FrequencyFamily, SweepParams};
use std::f64::consts::PI;

fn main() -> degenwave::Result<()> {
    let beta = (2.0 / PI).powi(2);
    let mut last: Option<f64> = None;
    for n in [24, 49, 99] {
        let params = SweepParams::new(FrequencyFamily::new(vec![1])?, 0.0, 1, n, 2e-3, 10.0);
        let r = linear_damped_reference(n, beta, 1, 2.0 / PI, &params)?;
        let h = 1.0 / (n + 1) as f64;
        let err = r.max_error();
        print!("h = {h:.4}  max error {err:.4e}  error/h {:.3}", err / h);
        match last {
            Some(prev) => println!("  ratio {:.3}", prev / err),
            None => println!(),
        }
        last = Some(err);
    }
    Ok(())
}
