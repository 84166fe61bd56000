//! Velocity and spin spectra of an existing `generate` output, computed in
//! single precision with about 24 bytes per grid point. This is how the
//! 27-qubit reference configuration is analysed on a machine with a few GiB
//! of memory, where the full `measure`/`diagnose` stages do not fit.
//!
//! ```text
//! turbogen generate --config crates/core/configs/reference.toml --precision single
//! cargo run --release --example streaming_spectra -- crates/core/configs/reference.toml [OUT_DIR]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use turbogen::config::RunConfig;
use turbogen::pipeline::{memory_cap, streaming_spectra};

fn main() -> turbogen::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "crates/core/configs/scaled_24.toml".into()));
    let mut cfg = RunConfig::load(&config)?;
    if let Some(dir) = args.next() {
        cfg.output.dir = dir.into();
    }
    let start = Instant::now();
    let summary = streaming_spectra(&cfg, &cfg.output.dir, memory_cap()?)?;
    print!("{}", turbogen::io::to_toml(&summary)?);
    eprintln!("streamed spectra of {} in {:.1} s", summary.grid, start.elapsed().as_secs_f64());
    Ok(())
}
