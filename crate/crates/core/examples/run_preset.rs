//! Drive a full preset programmatically, as the binary does.
//!
//!     cargo run --release --example run_preset -- fig2 /tmp/degenwave-fig2

use degenwave::config::{Preset, RunConfig};
use degenwave::runner::{execute, Command};

fn main() -> degenwave::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset: Preset = args.next().as_deref().unwrap_or("fig2").parse()?;
    let mut cfg = RunConfig::preset(preset);
    if let Some(out) = args.next() {
        cfg.out = out.into();
    }
    let outcome = execute(Command::Run, &cfg);
    print!("{}", outcome.report.render());
    println!("status {:?}, artifacts in {}", outcome.status, outcome.out.display());
    Ok(())
}
