//! The three pipeline stages on a bundled configuration, as the `turbogen`
//! binary runs them, writing into a directory of your choice.
//!
//! ```text
//! cargo run --release --example end_to_end -- crates/core/configs/scaled_18.toml /tmp/run18
//! ```

use std::path::PathBuf;

use turbogen::config::RunConfig;
use turbogen::pipeline::{self, memory_cap};

fn main() -> turbogen::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "crates/core/configs/scaled_18.toml".into()));
    let mut cfg = RunConfig::load(&config)?;
    if let Some(dir) = args.next() {
        cfg.output.dir = dir.into();
    }
    let dir = cfg.output.dir.clone();
    let cap = memory_cap()?;

    let g = pipeline::generate(&cfg, &dir, cap)?;
    println!("generate: {} ({} qubits) in {:.2} s", g.grid, g.n_q, g.wall_seconds);
    let m = pipeline::measure(&cfg, &dir, cap)?;
    println!(
        "measure: support radius {} -> {}, {} regularized points, {:.2} s",
        m.support_psi_plus, m.support_density, m.regularized, m.wall_seconds
    );
    let s = pipeline::diagnose(&cfg, &dir, cap)?;
    print!("{}", turbogen::io::to_toml(&s)?);
    println!("outputs in {}", dir.display());
    Ok(())
}
