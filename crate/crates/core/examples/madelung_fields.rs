//! Density, momentum, velocity and spin fields of a circuit-generated
//! spinor, with the checks every measurement stage relies on.
//!
//! ```text
//! cargo run --release --example madelung_fields
//! ```

use turbogen::config::RunConfig;
use turbogen::diagnostics::{vorticity_from_spin, vorticity_from_velocity};
use turbogen::simulator::Spin;
use turbogen::synthetic::unit_density_spinor;
use turbogen::{prepare_spinor, FieldSet, GridSpec, SpinConvention};

fn rms(v: &[Vec<f64>]) -> f64 {
    let n = v[0].len() as f64;
    (v.iter().flatten().map(|x| x * x).sum::<f64>() / n).sqrt()
}

fn main() -> turbogen::Result<()> {
    let cfg = RunConfig::scaled_reference(6)?;
    let spinor = prepare_spinor(&cfg.circuit_spec(Spin::Up), &cfg.circuit_spec(Spin::Down))?;
    let f = FieldSet::compute(&spinor, SpinConvention::Kernel)?;
    let n = f.rho.len() as f64;
    println!("grid {}", f.grid);
    println!("  <rho> = {:.12}", f.rho.iter().sum::<f64>() / n);
    println!("  rms |J| = {:.4}, rms |u| = {:.4}", rms(&f.momentum), rms(&f.velocity));
    println!("  |s| - 1 worst = {:.1e}", f.spin_norm_defect());
    println!("  regularized points (rho < {:.1e}): {}", f.eps_rho, f.regularized);

    // Where the density is uniform, the spin texture alone carries the
    // vorticity.
    let g = GridSpec::cube(3, 5)?;
    let uniform = FieldSet::compute(&unit_density_spinor(&g), SpinConvention::Kernel)?;
    let curl = vorticity_from_velocity(&uniform.velocity, &g)?;
    let spin = vorticity_from_spin(&uniform.spin, &g, SpinConvention::Kernel)?;
    let diff: Vec<Vec<f64>> = curl.iter().zip(&spin).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    println!("unit-density spinor on {g}: |curl u - omega(s)| / |curl u| = {:.2e}", rms(&diff) / rms(&curl));
    Ok(())
}
