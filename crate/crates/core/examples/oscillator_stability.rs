//! The finite-dimensional analogue is uniformly stable: every start in the
//! ball of radius √2 enters |y| < 0.1 by a common time.
//!
//!     cargo run --release --example oscillator_stability

use degenwave::oracle::{simulate_oscillator, uniform_stability_sweep, OscillatorProblem, SweepSettings};

fn main() -> degenwave::Result<()> {
    let p = OscillatorProblem::new(1.0, 1.0, 1, 1.0, 0.0)?;
    let tr = simulate_oscillator(&p, 100.0, 0.01)?;
    println!("|y(100)| / |y(0)| = {:.4}", tr.norms.last().unwrap() / tr.norms[0]);

    let report = uniform_stability_sweep(SweepSettings {
        stiffness: 1.0,
        alpha: 1.0,
        m: 1,
        radius: 2f64.sqrt(),
        samples: 64,
        target: 0.1,
        horizon: 500.0,
        step: 0.01,
        seed: 0,
    })?;
    println!("max time to |y| < 0.1: {:?}", report.max_time());
    println!("largest one-step norm increase: {:.3e}", report.max_relative_increase);

    let undamped = uniform_stability_sweep(SweepSettings {
        alpha: 0.0,
        horizon: 50.0,
        ..report.settings
    })?;
    println!("without damping, {} of 64 samples never decay", undamped.non_decaying());
    Ok(())
}
