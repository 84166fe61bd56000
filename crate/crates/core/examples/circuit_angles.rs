//! Shaping factor, sampled rotation angles and the gate list of the
//! 27-qubit reference circuit.
//!
//! ```text
//! cargo run --release --example circuit_angles
//! ```

use turbogen::circuit::qubit_wavenumber;
use turbogen::config::RunConfig;
use turbogen::simulator::Spin;
use turbogen::{build_circuit, sample_angles, shaping_factor};

fn main() -> turbogen::Result<()> {
    let cfg = RunConfig::reference();
    let spec = cfg.circuit_spec(Spin::Up);

    println!("shaping factor f(kappa) of the reference parameters:");
    for kappa in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0] {
        println!("  kappa = {kappa:>5}: {:.12}", shaping_factor(kappa, &spec.shaping));
    }

    let angles = sample_angles(&spec)?;
    println!("\nfirst repetition of module 1 (theta, phi, gamma) per qubit of direction x:");
    for m in 1..=cfg.grid.n_alpha()[0] {
        let [t, p, g] = angles.get(m, 0, 0);
        println!(
            "  qubit {m} (kappa = {:>3}): {t:+.4} {p:+.4} {g:+.4}",
            qubit_wavenumber(m, &cfg.grid)?
        );
    }

    let gates = build_circuit(&spec)?;
    println!("\n{} gates ({} qubits, seed {}); first lines of the exported list:", gates.len(), gates.n_q(), spec.seed);
    for line in gates.to_text().lines().take(5) {
        println!("  {line}");
    }
    Ok(())
}
