use num_complex::Complex64;
use rayon::prelude::*;

use super::{check_vector, det_mean, det_sum, gradient, require_3d};
use crate::error::{Error, Result};
use crate::lattice::GridSpec;
use crate::madelung::{SpinConvention, VectorField};
use crate::spectral::{Nyquist, Transform};

/// Bins of the log-spaced tail histogram used by the stretched-exponential fit.
const TAIL_BINS: usize = 40;
/// Tail bins with fewer samples are left out of the fit.
const MIN_BIN_COUNT: u64 = 10;
/// Fewer tail samples than this mark a fit as unreliable.
const MIN_TAIL_SAMPLES: u64 = 1000;
/// Start of the fitted tail in units of `ω′`.
const TAIL_START: f64 = 2.0;
/// Scanned range and step of the stretched-exponential exponent.
const BETA_RANGE: (f64, f64) = (0.05, 3.0);
const BETA_STEP: f64 = 1e-3;

/// Tail fit `P(x) = A e^{−c x^β}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StretchedExpFit {
    pub c: f64,
    pub beta: f64,
    pub log_amplitude: f64,
    pub tail_samples: u64,
    pub bins_used: usize,
    /// Enough tail samples and `β` strictly inside the scanned range.
    pub reliable: bool,
}

/// Histogram of normalized vorticity components plus tail statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct VorticityPdf {
    /// `ω′ = (⟨|ω|²⟩ / 3)^{1/2}`.
    pub omega_prime: f64,
    pub bin_centers: Vec<f64>,
    pub density: Vec<f64>,
    /// Excess kurtosis of each component.
    pub excess_kurtosis: Vec<f64>,
    pub fit: StretchedExpFit,
}

/// `ω = ∇ × u` from spectral derivatives.
pub fn vorticity_from_velocity(u: &VectorField, grid: &GridSpec) -> Result<VectorField> {
    require_3d(grid, "vorticity")?;
    check_vector(grid, u, "velocity")?;
    let t = Transform::for_grid(grid);
    let hat: Vec<Vec<Complex64>> = u.iter().map(|c| t.analyze_real(c)).collect();
    Ok((0..3)
        .map(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            // ω_i = ∂_j u_k − ∂_k u_j
            let mut a = t.derivative(&hat[k], j, grid.k_unit(), Nyquist::Zero);
            let b = t.derivative(&hat[j], k, grid.k_unit(), Nyquist::Zero);
            a.par_iter_mut().zip(&b).for_each(|(x, y)| *x -= y);
            t.synthesize_real(&a).0
        })
        .collect())
}

/// Vorticity from a velocity-gradient tensor `A[i][j] = ∂u_j/∂x_i`.
pub fn vorticity_from_gradient(a: &[VectorField]) -> VectorField {
    (0..3)
        .map(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            a[j][k].par_iter().zip(&a[k][j]).map(|(x, y)| x - y).collect()
        })
        .collect()
}

/// `ω = ¼ ε_{abc} s_a ∇s_b × ∇s_c`, signed by the orientation of the spin
/// convention the field was built with.
pub fn vorticity_from_spin(s: &VectorField, grid: &GridSpec, convention: SpinConvention) -> Result<VectorField> {
    require_3d(grid, "vorticity")?;
    if s.len() != 3 || s.iter().any(|c| c.len() != grid.len()) {
        return Err(Error::GridMismatch {
            expected: format!("3 spin components of {} points", grid.len()),
            found: format!("{} components", s.len()),
        });
    }
    let grads: Vec<VectorField> = s.iter().map(|c| gradient(c, grid)).collect();
    let factor = 0.5 * convention.orientation();
    Ok((0..3)
        .map(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            (0..grid.len())
                .into_par_iter()
                .map(|x| {
                    // ½ Σ_cyclic(a,b,c) s_a (∇s_b × ∇s_c)_i
                    let mut acc = 0.0;
                    for a in 0..3 {
                        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                        let cross = grads[b][j][x] * grads[c][k][x] - grads[b][k][x] * grads[c][j][x];
                        acc += s[a][x] * cross;
                    }
                    factor * acc
                })
                .collect()
        })
        .collect())
}

/// Pointwise `h = u · ω`.
pub fn helicity_density(u: &VectorField, omega: &VectorField) -> Result<Vec<f64>> {
    if u.len() != omega.len() || u.iter().zip(omega).any(|(a, b)| a.len() != b.len()) || u.is_empty() {
        return Err(Error::GridMismatch {
            expected: format!("{} components", u.len()),
            found: format!("{} components", omega.len()),
        });
    }
    Ok((0..u[0].len())
        .into_par_iter()
        .map(|x| u.iter().zip(omega).map(|(a, b)| a[x] * b[x]).sum())
        .collect())
}

/// Sample skewness `⟨(x−μ)³⟩ / ⟨(x−μ)²⟩^{3/2}`.
pub fn skewness(x: &[f64]) -> f64 {
    let mu = det_mean(x.len(), |i| x[i]);
    let m2 = det_mean(x.len(), |i| (x[i] - mu).powi(2));
    let m3 = det_mean(x.len(), |i| (x[i] - mu).powi(3));
    m3 / m2.powf(1.5)
}

/// Sample excess kurtosis `⟨(x−μ)⁴⟩ / ⟨(x−μ)²⟩² − 3`.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let mu = det_mean(x.len(), |i| x[i]);
    let m2 = det_mean(x.len(), |i| (x[i] - mu).powi(2));
    let m4 = det_mean(x.len(), |i| (x[i] - mu).powi(4));
    m4 / (m2 * m2) - 3.0
}

/// Component PDF of `ω/ω′` with a stretched-exponential fit of the tail
/// `|ω|/ω′ ≥ 2`.
pub fn vorticity_pdf(omega: &VectorField, bins: usize) -> Result<VorticityPdf> {
    let n = omega.first().map_or(0, |c| c.len());
    if n == 0 || bins == 0 {
        return Err(Error::Degenerate("empty vorticity field".into()));
    }
    let total = (omega.len() * n) as u64;
    let omega_prime = (det_sum(n, |x| omega.iter().map(|c| c[x] * c[x]).sum::<f64>())
        / (n * omega.len()) as f64)
        .sqrt();
    let (lo, hi) = omega
        .iter()
        .flat_map(|c| c.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if omega_prime == 0.0 || lo == hi {
        return Err(Error::Degenerate("vorticity field is constant".into()));
    }
    let x_max = lo.abs().max(hi.abs()) / omega_prime;
    let comps: Vec<&[f64]> = omega.iter().map(|c| c.as_slice()).collect();

    let width = 2.0 * x_max / bins as f64;
    let counts = histogram(&comps, bins, |v| {
        let x = v / omega_prime;
        Some((((x + x_max) / width) as usize).min(bins - 1))
    });
    let bin_centers = (0..bins).map(|b| -x_max + (b as f64 + 0.5) * width).collect();
    let density = counts.iter().map(|&c| c as f64 / (total as f64 * width)).collect();

    let fit = fit_tail(&comps, omega_prime, total, TAIL_START)?;
    Ok(VorticityPdf {
        omega_prime,
        bin_centers,
        density,
        excess_kurtosis: omega.iter().map(|c| excess_kurtosis(c)).collect(),
        fit,
    })
}

/// Fits `P(|x|) = A e^{−c |x|^β}` to the samples with `|x| ≥ lo`, in the
/// samples' own units.
pub fn fit_stretched_exponential(samples: &[f64], lo: f64) -> Result<StretchedExpFit> {
    fit_tail(&[samples], 1.0, samples.len() as u64, lo)
}

fn histogram(data: &[&[f64]], bins: usize, bin_of: impl Fn(f64) -> Option<usize> + Sync) -> Vec<u64> {
    let partial: Vec<Vec<u64>> = data
        .iter()
        .flat_map(|c| c.chunks(1 << 16))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|chunk| {
            let mut h = vec![0u64; bins];
            for &v in chunk.iter() {
                if let Some(b) = bin_of(v) {
                    h[b] += 1;
                }
            }
            h
        })
        .collect();
    let mut out = vec![0u64; bins];
    for h in partial {
        for (o, c) in out.iter_mut().zip(h) {
            *o += c;
        }
    }
    out
}

fn fit_tail(data: &[&[f64]], scale: f64, total: u64, lo: f64) -> Result<StretchedExpFit> {
    let hi = data
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        / scale;
    if hi <= lo {
        return Err(Error::Degenerate(format!("no samples beyond {lo} (max {hi})")));
    }
    let log_span = (hi / lo).ln();
    let counts = histogram(data, TAIL_BINS, |v| {
        let x = v.abs() / scale;
        (x >= lo).then(|| (((x / lo).ln() / log_span * TAIL_BINS as f64) as usize).min(TAIL_BINS - 1))
    });
    let tail_samples: u64 = counts.iter().sum();
    let edge = |b: usize| lo * (log_span * b as f64 / TAIL_BINS as f64).exp();
    let pts: Vec<(f64, f64, f64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= MIN_BIN_COUNT)
        .map(|(b, &c)| {
            let (e0, e1) = (edge(b), edge(b + 1));
            let p = c as f64 / (total as f64 * (e1 - e0));
            ((e0 * e1).sqrt(), p.ln(), (c as f64).sqrt())
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate(format!(
            "stretched-exponential fit has {} populated tail bins, need 3",
            pts.len()
        )));
    }

    // For fixed β the model is linear in (ln A, c); scan β and keep the
    // smallest weighted residual.
    let mut best: Option<(f64, f64, f64, f64)> = None;
    let steps = ((BETA_RANGE.1 - BETA_RANGE.0) / BETA_STEP).round() as usize;
    for step in 0..=steps {
        let beta = BETA_RANGE.0 + step as f64 * BETA_STEP;
        let (mut sw, mut sz, mut sy, mut szz, mut szy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, y, w) in &pts {
            let (w2, z) = (w * w, -x.powf(beta));
            sw += w2;
            sz += w2 * z;
            sy += w2 * y;
            szz += w2 * z * z;
            szy += w2 * z * y;
        }
        let det = sw * szz - sz * sz;
        if det.abs() < 1e-300 {
            continue;
        }
        let c = (sw * szy - sz * sy) / det;
        let a = (sy - c * sz) / sw;
        let res: f64 = pts.iter().map(|&(x, y, w)| (w * (y - a + c * x.powf(beta))).powi(2)).sum();
        if best.is_none_or(|b| res < b.0) {
            best = Some((res, beta, a, c));
        }
    }
    let (_, beta, log_amplitude, c) = best.ok_or_else(|| Error::Degenerate("tail fit is singular".into()))?;
    Ok(StretchedExpFit {
        c,
        beta,
        log_amplitude,
        tail_samples,
        bins_used: pts.len(),
        // A β pinned to the end of the scan means the tail is not
        // stretched-exponential over the fitted range (e.g. a power law).
        reliable: tail_samples >= MIN_TAIL_SAMPLES
            && beta > BETA_RANGE.0 + 0.5 * BETA_STEP
            && beta < BETA_RANGE.1 - 0.5 * BETA_STEP,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{sample_vector_field, stretched_exponential_samples};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn grid() -> GridSpec {
        GridSpec::cube(3, 5).unwrap()
    }

    fn max_err(a: &[f64], f: impl Fn(usize) -> f64) -> f64 {
        a.iter().enumerate().map(|(i, v)| (v - f(i)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn analytic_curls() {
        let g = grid();
        let coords = |i: usize| crate::synthetic::coordinates(&g, i);
        let uniform = sample_vector_field(&g, |_| [1.0, -2.0, 0.5]);
        let w = vorticity_from_velocity(&uniform, &g).unwrap();
        assert!(w.iter().flatten().all(|v| v.abs() < 1e-12));

        let shear = sample_vector_field(&g, |x| [x[1].sin(), 0.0, 0.0]);
        let w = vorticity_from_velocity(&shear, &g).unwrap();
        assert!(max_err(&w[2], |i| -coords(i)[1].cos()) < 1e-12);
        assert!(max_err(&w[0], |_| 0.0) < 1e-12);

        let rot = sample_vector_field(&g, |x| [-x[1].sin(), x[0].sin(), 0.0]);
        let w = vorticity_from_velocity(&rot, &g).unwrap();
        assert!(max_err(&w[2], |i| coords(i)[0].cos() + coords(i)[1].cos()) < 1e-12);
        assert!(vorticity_from_velocity(&rot, &GridSpec::cube(2, 3).unwrap()).is_err());
    }

    #[test]
    fn spin_vorticity_trivial_cases() {
        let g = grid();
        let conv = SpinConvention::Kernel;
        let constant = sample_vector_field(&g, |_| [0.6, 0.0, 0.8]);
        let w = vorticity_from_spin(&constant, &g, conv).unwrap();
        assert!(w.iter().flatten().all(|v| v.abs() < 1e-12));

        let one_d = sample_vector_field(&g, |x| [x[2].cos(), x[2].sin(), 0.0]);
        let w = vorticity_from_spin(&one_d, &g, conv).unwrap();
        assert!(w.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn helicity_examples() {
        let u = vec![vec![1.0, 2.0], vec![0.0, 0.0], vec![3.0, 1.0]];
        let perp = vec![vec![0.0, 0.0], vec![5.0, -1.0], vec![0.0, 0.0]];
        assert_eq!(helicity_density(&u, &perp).unwrap(), vec![0.0, 0.0]);
        assert_eq!(helicity_density(&u, &u).unwrap(), vec![10.0, 5.0]);
        assert!(helicity_density(&u, &u[..2].to_vec()).is_err());
    }

    #[test]
    fn helicity_sum_matches_independent_evaluation() {
        let g = grid();
        let u = sample_vector_field(&g, |x| [x[1].sin() + x[2].cos(), x[2].sin(), x[0].cos() * x[1].cos()]);
        let w = vorticity_from_velocity(&u, &g).unwrap();
        let h: f64 = helicity_density(&u, &w).unwrap().iter().sum();
        let mut direct = 0.0;
        for x in 0..g.len() {
            direct += u[0][x] * w[0][x] + u[1][x] * w[1][x] + u[2][x] * w[2][x];
        }
        assert!((h - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn moments_of_known_samples() {
        let x = [1.0, 2.0, 3.0, 4.0, 10.0];
        // Central moments m2 = 10, m3 = 36, m4 = 278.8.
        assert!((skewness(&x) - 36.0 / 10f64.powf(1.5)).abs() < 1e-14);
        assert!((excess_kurtosis(&x) - (2.788 - 3.0)).abs() < 1e-14);
        let sym = [-2.0, -1.0, 0.0, 1.0, 2.0];
        assert_eq!(skewness(&sym), 0.0);
    }

    #[test]
    fn gaussian_tail_has_beta_two() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let comps: VectorField = (0..3)
            .map(|_| (0..2_000_000).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let pdf = vorticity_pdf(&comps, 101).unwrap();
        assert!((pdf.omega_prime - 1.0).abs() < 0.01);
        assert!((pdf.fit.beta - 2.0).abs() < 0.15, "beta = {}", pdf.fit.beta);
        assert!(pdf.fit.reliable);
        assert!(pdf.excess_kurtosis.iter().all(|k| k.abs() < 0.05));
        let area: f64 = pdf.density.iter().sum::<f64>() * (pdf.bin_centers[1] - pdf.bin_centers[0]);
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stretched_exponential_recovery() {
        let x = stretched_exponential_samples(14.0, 0.2, 4_000_000, 11);
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        let fit = fit_stretched_exponential(&x, 2.0 * rms).unwrap();
        assert!((fit.beta - 0.2).abs() < 0.02, "beta = {}", fit.beta);
        assert!((fit.c - 14.0).abs() < 1.4, "c = {}", fit.c);
    }

    #[test]
    fn constant_field_is_degenerate() {
        let w = vec![vec![1.0; 64]; 3];
        assert!(matches!(vorticity_pdf(&w, 10), Err(Error::Degenerate(_))));
        let z = vec![vec![0.0; 64]; 3];
        assert!(matches!(vorticity_pdf(&z, 10), Err(Error::Degenerate(_))));
    }
}
