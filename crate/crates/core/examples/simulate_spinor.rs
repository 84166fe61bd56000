//! Runs both spin circuits of a small grid on the statevector simulator and
//! assembles the spinor whose Fourier coefficients are the amplitudes.
//!
//! ```text
//! cargo run --release --example simulate_spinor
//! ```

use turbogen::config::RunConfig;
use turbogen::madelung::density_field;
use turbogen::simulator::{run_audited, Spin, StateVector};
use turbogen::{build_circuit, prepare_spinor};

fn main() -> turbogen::Result<()> {
    // The 18-qubit (64^3) configuration runs in a fraction of a second.
    let cfg = RunConfig::scaled_reference(6)?;
    for spin in Spin::BOTH {
        let gates = build_circuit(&cfg.circuit_spec(spin))?;
        let (state, audit): (StateVector<f64>, _) = run_audited(&gates)?;
        println!(
            "{}: {} gates on {} qubits, |psi|^2 - 1 = {:.1e}, worst per-gate drift {:.1e}",
            spin.label(),
            audit.gates_applied,
            state.n_q(),
            audit.final_norm_sqr - 1.0,
            audit.max_gate_drift
        );
    }

    let spinor = prepare_spinor(&cfg.circuit_spec(Spin::Up), &cfg.circuit_spec(Spin::Down))?;
    let rho = density_field(&spinor);
    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
    let (lo, hi) = rho.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    println!("density on {}: mean {mean:.12}, range [{lo:.3e}, {hi:.3}]", cfg.grid);
    Ok(())
}
