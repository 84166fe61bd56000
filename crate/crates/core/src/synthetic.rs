//! Constructed inputs with known answers: band-limited random spinors, an
//! analytic unit-density spinor, sampled analytic fields and heavy-tailed
//! samples. Used by the oracle tests and the examples.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::lattice::GridSpec;
use crate::madelung::in_half_band;
use crate::simulator::SpinorField;
use crate::spectral::Transform;

/// Random Gaussian coefficients on the central half-band of every
/// direction, zero elsewhere, scaled so that `⟨ρ⟩ = 1`.
pub fn random_band_limited_spinor(grid: &GridSpec, seed: u64) -> SpinorField {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = |f: usize| {
        if in_half_band(&grid.wavenumbers(f), grid.n_alpha()) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let mut plus: Vec<Complex64> = (0..grid.len()).map(&mut draw).collect();
    let mut minus: Vec<Complex64> = (0..grid.len()).map(&mut draw).collect();
    let energy: f64 = plus.iter().chain(&minus).map(|a| a.norm_sqr()).sum();
    let scale = energy.sqrt().recip();
    plus.iter_mut().chain(minus.iter_mut()).for_each(|a| *a *= scale);
    SpinorField::new(grid.clone(), plus, minus).expect("lengths match grid")
}

/// Physical coordinates of a flat grid point.
pub fn coordinates(grid: &GridSpec, flat: usize) -> Vec<f64> {
    grid.multi_index(flat)
        .iter()
        .enumerate()
        .map(|(a, &j)| j as f64 * grid.spacing(a))
        .collect()
}

/// Samples `f` at every grid point.
pub fn sample_field(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..grid.len()).map(|x| f(&coordinates(grid, x))).collect()
}

/// Samples a 3-vector function at every grid point, one array per component.
pub fn sample_vector_field(grid: &GridSpec, f: impl Fn(&[f64]) -> [f64; 3]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(grid.len())).collect();
    for x in 0..grid.len() {
        let v = f(&coordinates(grid, x));
        for (c, val) in out.iter_mut().zip(v) {
            c.push(val);
        }
    }
    out
}

/// Smooth spinor with `ρ ≡ 1` on a 3-D grid,
/// `ψ = (cos a · e^{ib}, sin a · e^{ic})` with
/// `a = 0.6 + 0.3(sin x + cos y)`, `b = sin y + 0.5 cos z`, `c = sin z + cos x`.
///
/// Its spectrum decays faster than exponentially, so on 64³ and above the
/// truncation to the band is below double precision.
pub fn unit_density_spinor(grid: &GridSpec) -> SpinorField {
    assert_eq!(grid.dims(), 3, "unit_density_spinor needs a 3-D grid");
    let t = Transform::for_grid(grid);
    let mut plus = Vec::with_capacity(grid.len());
    let mut minus = Vec::with_capacity(grid.len());
    for f in 0..grid.len() {
        let x = coordinates(grid, f);
        let a = 0.6 + 0.3 * (x[0].sin() + x[1].cos());
        let b = x[1].sin() + 0.5 * x[2].cos();
        let c = x[2].sin() + x[0].cos();
        plus.push(Complex64::from_polar(a.cos(), b));
        minus.push(Complex64::from_polar(a.sin(), c));
    }
    t.analyze(&mut plus);
    t.analyze(&mut minus);
    SpinorField::new(grid.clone(), plus, minus).expect("lengths match grid")
}

/// Signed samples with density `∝ exp(−c|x|^β)`.
///
/// `c|x|^β` is Gamma(1/β, 1) distributed, so `|x| = (G / c)^{1/β}`.
pub fn stretched_exponential_samples(c: f64, beta: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let gamma = Gamma::new(1.0 / beta, 1.0).expect("positive shape");
    (0..count)
        .map(|_| {
            let g: f64 = gamma.sample(&mut rng);
            let mag = (g / c).powf(1.0 / beta);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::madelung::{density_field, out_of_half_band};

    #[test]
    fn band_limited_spinor_is_confined_and_normalized() {
        let g = GridSpec::new(&[3, 2, 1]).unwrap();
        let s = random_band_limited_spinor(&g, 1);
        assert_eq!(out_of_half_band(&s), 0.0);
        assert!((s.spectral_energy() - 1.0).abs() < 1e-14);
        assert_eq!(s, random_band_limited_spinor(&g, 1));
    }

    #[test]
    fn unit_density_spinor_has_unit_density() {
        let g = GridSpec::cube(3, 5).unwrap();
        let s = unit_density_spinor(&g);
        assert!(density_field(&s).iter().all(|r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn stretched_samples_are_symmetric() {
        let x = stretched_exponential_samples(1.0, 1.0, 100_000, 3);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        // Laplace(1): variance 2.
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!(mean.abs() < 0.02);
        assert!((var - 2.0).abs() < 0.05);
    }
}
