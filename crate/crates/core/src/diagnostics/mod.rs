//! Turbulence statistics of generated fields.
//!
//! All reductions use fixed-size chunks combined in index order, so results
//! are bit-identical from run to run regardless of thread scheduling.

mod invariants;
mod spectrum;
mod structure;
mod vorticity;

pub use invariants::{qr_invariants, qr_of, vieillefosse_curve, QrHistogram, QrInvariants, QrOptions};
pub use spectrum::{
    fit_log_log, fit_power_law, k_peak, shell_spectrum, support_radius, ScalingFit, ShellSpectrum,
};
pub use structure::{
    k41_exponent, sl94_exponent, structure_functions, Directions, MIN_SAMPLES, StructureFunctionOptions, StructureFunctions,
};
pub use vorticity::{
    excess_kurtosis, fit_stretched_exponential, helicity_density, skewness, vorticity_from_gradient,
    vorticity_from_spin, vorticity_from_velocity, vorticity_pdf, StretchedExpFit, VorticityPdf,
};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::GridSpec;
use crate::madelung::VectorField;
use crate::spectral::{Nyquist, Transform};

/// Chunk length of deterministic parallel reductions.
const REDUCE_CHUNK: usize = 1 << 15;

/// `Σ_i f(i)` over `0..len`, reproducible bit for bit.
pub(crate) fn det_sum(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = (0..len.div_ceil(REDUCE_CHUNK))
        .into_par_iter()
        .map(|c| (c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(len)).map(&f).sum())
        .collect();
    partial.iter().sum()
}

/// Mean of `f(i)` over `0..len`.
pub(crate) fn det_mean(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    det_sum(len, f) / len as f64
}

fn require_3d(grid: &GridSpec, what: &str) -> Result<()> {
    if grid.dims() != 3 {
        return Err(Error::Unsupported(format!(
            "{what} needs a 3-dimensional grid, got {} dimensions",
            grid.dims()
        )));
    }
    Ok(())
}

fn check_vector(grid: &GridSpec, v: &VectorField, what: &str) -> Result<()> {
    if v.len() != grid.dims() || v.iter().any(|c| c.len() != grid.len()) {
        return Err(Error::GridMismatch {
            expected: format!("{} components of {} points", grid.dims(), grid.len()),
            found: format!("{what} with {} components", v.len()),
        });
    }
    Ok(())
}

/// Spectral gradient of a real field: `out[i] = ∂_i f`.
pub fn gradient(field: &[f64], grid: &GridSpec) -> VectorField {
    let t = Transform::for_grid(grid);
    let hat = t.analyze_real(field);
    (0..grid.dims())
        .map(|axis| {
            let d = t.derivative(&hat, axis, grid.k_unit(), Nyquist::Zero);
            t.synthesize_real(&d).0
        })
        .collect()
}

/// Velocity-gradient tensor `A[i][j] = ∂u_j / ∂x_i`.
pub fn velocity_gradient(u: &VectorField, grid: &GridSpec) -> Result<Vec<VectorField>> {
    check_vector(grid, u, "velocity")?;
    let mut a: Vec<VectorField> = vec![Vec::new(); grid.dims()];
    for uj in u {
        for (i, g) in gradient(uj, grid).into_iter().enumerate() {
            a[i].push(g);
        }
    }
    Ok(a)
}

/// Spectral divergence `∇·v`.
pub fn divergence(v: &VectorField, grid: &GridSpec) -> Result<Vec<f64>> {
    check_vector(grid, v, "vector field")?;
    let t = Transform::for_grid(grid);
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (axis, comp) in v.iter().enumerate() {
        let d = t.derivative(&t.analyze_real(comp), axis, grid.k_unit(), Nyquist::Zero);
        acc.par_iter_mut().zip(&d).for_each(|(a, b)| *a += b);
    }
    Ok(t.synthesize_real(&acc).0)
}

/// `(k_η / k_L)^{4/3}`.
pub fn reynolds_estimate(k_l: f64, k_eta: f64) -> Result<f64> {
    if !(k_l > 0.0 && k_eta >= k_l) {
        return Err(Error::domain(format!(
            "Reynolds estimate needs 0 < k_L <= k_eta, got k_L = {k_l}, k_eta = {k_eta}"
        )));
    }
    Ok((k_eta / k_l).powf(4.0 / 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::sample_vector_field;

    #[test]
    fn reynolds_values() {
        let re = reynolds_estimate(1.0, 1280.0).unwrap();
        assert!((re - 13_897.818_196_965_92).abs() < 1e-8);
        assert!((re - 13_900.0).abs() / 13_900.0 < 0.01);
        assert_eq!(reynolds_estimate(1.0, 1.0).unwrap(), 1.0);
        assert!((reynolds_estimate(2.0, 16.0).unwrap() - 16.0).abs() < 1e-12);
        assert!(reynolds_estimate(4.0, 2.0).is_err());
        assert!(reynolds_estimate(0.0, 2.0).is_err());
    }

    #[test]
    fn det_sum_is_exactly_reproducible() {
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let a = det_sum(1 << 20, f);
        let b = det_sum(1 << 20, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn divergence_of_curl_vanishes() {
        let g = GridSpec::cube(3, 5).unwrap();
        let u = sample_vector_field(&g, |x| {
            [
                (x[1] + 2.0 * x[2]).sin() * x[0].cos(),
                (3.0 * x[0]).cos() + x[2].sin() * x[1].sin(),
                (x[0] - x[1]).sin() * (2.0 * x[2]).cos(),
            ]
        });
        let w = vorticity_from_velocity(&u, &g).unwrap();
        let div = divergence(&w, &g).unwrap();
        assert!(div.iter().all(|v| v.abs() < 1e-10));
    }
}
