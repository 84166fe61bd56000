//! Shell-averaged energy spectrum and power-law fit, first on a synthetic
//! field with a prescribed k^(-5/3) spectrum, then on a generated flow.
//!
//! ```text
//! cargo run --release --example energy_spectrum
//! ```

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use turbogen::config::RunConfig;
use turbogen::diagnostics::{fit_power_law, k_peak, reynolds_estimate, shell_spectrum};
use turbogen::simulator::Spin;
use turbogen::{prepare_spinor, FieldSet, GridSpec, SpinConvention};

fn main() -> turbogen::Result<()> {
    // Random phases with |f(k)|^2 ∝ k^(-5/3 - 2), so that the shell sum
    // (∝ k^2 points per shell) follows k^(-5/3).
    let g = GridSpec::cube(3, 6)?;
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let coeffs: Vec<Complex64> = (0..g.len())
        .map(|f| {
            let k2: i64 = g.wavenumbers(f).iter().map(|k| k * k).sum();
            if k2 == 0 {
                return Complex64::new(0.0, 0.0);
            }
            let amp = (k2 as f64).powf(-(5.0 / 3.0 + 2.0) / 4.0);
            Complex64::from_polar(amp, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let spec = shell_spectrum(&[&coeffs], &g, "synthetic")?;
    let fit = fit_power_law(&spec, (4.0, 24.0))?;
    println!("synthetic k^(-5/3) field on {g}: fitted slope {:.3} +- {:.3}", fit.exponent, fit.stderr);

    let cfg = RunConfig::scaled_reference(6)?;
    let spinor = prepare_spinor(&cfg.circuit_spec(Spin::Up), &cfg.circuit_spec(Spin::Down))?;
    let fields = FieldSet::compute(&spinor, SpinConvention::Kernel)?;
    let hats: Vec<Vec<Complex64>> = fields.velocity.iter().map(|c| fields.spectral(c)).collect();
    let refs: Vec<&[Complex64]> = hats.iter().map(Vec::as_slice).collect();
    let mut energy = shell_spectrum(&refs, &cfg.grid, "velocity")?;
    energy.energy.iter_mut().for_each(|e| *e *= 0.5);
    let mut enstrophy = energy.clone();
    enstrophy.energy.iter_mut().zip(&energy.k).for_each(|(e, k)| *e *= k * k);
    let kp = k_peak(&enstrophy)?;
    println!("generated flow on {}: total energy {:.3}, enstrophy peak k = {kp}", cfg.grid, energy.total());
    println!("  Reynolds estimate (k_eta = 5 k_peak): {:.0}", reynolds_estimate(1.0, 5.0 * kp)?);
    for (k, e) in energy.points().step_by(4) {
        println!("  k = {k:>4}: E = {e:.4e}");
    }
    Ok(())
}
