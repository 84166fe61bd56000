use num_complex::Complex;
use num_traits::Float;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::GridSpec;

const CHUNK: usize = 1 << 15;

/// Spectral energy summed over integer-centered shells `[k − ½, k + ½)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellSpectrum {
    pub label: String,
    /// Shell centers `0, 1, …, k_max` in units of the fundamental wavenumber.
    pub k: Vec<f64>,
    pub energy: Vec<f64>,
}

impl ShellSpectrum {
    pub fn total(&self) -> f64 {
        self.energy.iter().sum()
    }

    /// `(k, E)` pairs for `k ≥ 1`.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.k.iter().copied().zip(self.energy.iter().copied()).skip(1)
    }
}

/// Power-law fit `y ∝ x^exponent` over a closed range.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    pub range: (f64, f64),
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Shell spectrum of a scalar (one component) or vector field (component
/// energies added).
pub fn shell_spectrum<T: Float + Sync>(components: &[&[Complex<T>]], grid: &GridSpec, label: &str) -> Result<ShellSpectrum> {
    for c in components {
        if c.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: format!("{} coefficients", grid.len()),
                found: c.len().to_string(),
            });
        }
    }
    let tables: Vec<Vec<i64>> = grid
        .n_alpha()
        .iter()
        .map(|&n| {
            let size = 1usize << n;
            (0..size)
                .map(|j| if j < size / 2 { j as i64 } else { j as i64 - size as i64 })
                .collect()
        })
        .collect();
    let offsets: Vec<u32> = (0..grid.dims()).map(|a| grid.qubit_offset(a)).collect();
    let k_max_sq: i64 = tables.iter().map(|t| (t.len() as i64 / 2).pow(2)).sum();
    let n_shells = shell_of(k_max_sq) + 1;
    let partial: Vec<Vec<f64>> = (0..grid.len().div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut bins = vec![0.0; n_shells];
            for f in c * CHUNK..((c + 1) * CHUNK).min(grid.len()) {
                let k2: i64 = tables
                    .iter()
                    .zip(&offsets)
                    .map(|(t, &o)| {
                        let k = t[(f >> o) & (t.len() - 1)];
                        k * k
                    })
                    .sum();
                bins[shell_of(k2)] += components.iter().map(|v| v[f].norm_sqr().to_f64().unwrap_or(f64::NAN)).sum::<f64>();
            }
            bins
        })
        .collect();
    let mut energy = vec![0.0; n_shells];
    for bins in &partial {
        for (e, b) in energy.iter_mut().zip(bins) {
            *e += b;
        }
    }
    Ok(ShellSpectrum {
        label: label.to_string(),
        k: (0..n_shells).map(|k| k as f64).collect(),
        energy,
    })
}

/// Shell index `⌊|k| + ½⌋` from `|k|²`.
fn shell_of(k2: i64) -> usize {
    ((k2 as f64).sqrt() + 0.5).floor() as usize
}

/// Least-squares line through `(ln x, ln y)`: `(slope, intercept, stderr)`.
pub fn fit_log_log(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&a, &b)| a > 0.0 && b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("log-log fit needs 3 positive points, got {n}")));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("log-log fit over a single abscissa".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (ssr / (n as f64 - 2.0) / sxx).sqrt();
    Ok((slope, intercept, stderr))
}

/// Slope of `ln E` against `ln k` over shells with `k ∈ [lo, hi]`.
pub fn fit_power_law(spec: &ShellSpectrum, range: (f64, f64)) -> Result<ScalingFit> {
    let (lo, hi) = range;
    let (x, y): (Vec<f64>, Vec<f64>) = spec
        .points()
        .filter(|&(k, e)| k >= lo && k <= hi && e > 0.0)
        .unzip();
    if x.len() < 4 {
        return Err(Error::Degenerate(format!(
            "power-law fit over [{lo}, {hi}] has {} usable shells, need 4",
            x.len()
        )));
    }
    let (exponent, intercept, stderr) = fit_log_log(&x, &y)?;
    Ok(ScalingFit {
        range,
        exponent,
        intercept,
        stderr,
        points: x.len(),
    })
}

/// Shell with the largest energy among `k ≥ 1`.
pub fn k_peak(spec: &ShellSpectrum) -> Result<f64> {
    spec.points()
        .filter(|(_, e)| e.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .filter(|(_, e)| *e > 0.0)
        .map(|(k, _)| k)
        .ok_or_else(|| Error::Degenerate(format!("{} spectrum has no energy above k = 0", spec.label)))
}

/// Smallest shell radius enclosing `fraction` of the energy above `k = 0`
/// (the mean is excluded so that a large uniform part does not mask the
/// spectral support of the fluctuations).
pub fn support_radius(spec: &ShellSpectrum, fraction: f64) -> f64 {
    let target = fraction * spec.points().map(|(_, e)| e).sum::<f64>();
    let mut acc = 0.0;
    for (k, e) in spec.points() {
        acc += e;
        if acc >= target {
            return k;
        }
    }
    spec.k.last().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, Normal};

    fn zeros(g: &GridSpec) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); g.len()]
    }

    #[test]
    fn single_and_paired_modes() {
        let g = GridSpec::cube(3, 4).unwrap();
        let mut v = zeros(&g);
        let a = Complex64::new(0.3, -0.4);
        v[g.flat_of_wavenumbers(&[3, 0, 0]).unwrap()] = a;
        let s = shell_spectrum(&[&v], &g, "f").unwrap();
        for (k, e) in s.k.iter().zip(&s.energy) {
            let expect = if *k == 3.0 { a.norm_sqr() } else { 0.0 };
            assert!((e - expect).abs() < 1e-15);
        }
        v[g.flat_of_wavenumbers(&[0, 3, -4]).unwrap()] = a;
        v[g.flat_of_wavenumbers(&[3, 0, 0]).unwrap()] = Complex64::new(0.0, 0.0);
        v[g.flat_of_wavenumbers(&[-5, 0, 0]).unwrap()] = a;
        let s = shell_spectrum(&[&v], &g, "f").unwrap();
        assert!((s.energy[5] - 2.0 * a.norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn white_noise_follows_mode_count() {
        let g = GridSpec::cube(3, 5).unwrap();
        let v: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); g.len()];
        let s = shell_spectrum(&[&v], &g, "white").unwrap();
        let mut count = vec![0.0; s.k.len()];
        for f in 0..g.len() {
            let k2: i64 = g.wavenumbers(f).iter().map(|k| k * k).sum();
            count[((k2 as f64).sqrt() + 0.5).floor() as usize] += 1.0;
        }
        assert_eq!(s.energy, count);
        // Shells well inside the band hold ≈ 4πk² modes; single shells
        // fluctuate by lattice-point counting, a range of shells does not.
        let modes: f64 = s.energy[6..=14].iter().sum();
        let sphere: f64 = (6..=14).map(|k| 4.0 * std::f64::consts::PI * (k * k) as f64).sum();
        assert!((modes / sphere - 1.0).abs() < 0.03, "{}", modes / sphere);
    }

    #[test]
    fn parseval_closure() {
        let g = GridSpec::new(&[4, 3, 5]).unwrap();
        let a: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new((i as f64).sin(), 0.5)).collect();
        let b: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new(0.1, (i as f64).cos())).collect();
        let s = shell_spectrum(&[&a, &b], &g, "v").unwrap();
        let total: f64 = a.iter().chain(&b).map(|z| z.norm_sqr()).sum();
        assert!((s.total() - total).abs() < 1e-10 * total);
    }

    fn synthetic(exponent: f64, scale: f64) -> ShellSpectrum {
        let k: Vec<f64> = (0..=64).map(|k| k as f64).collect();
        let energy = k.iter().map(|&k| if k == 0.0 { 0.0 } else { scale * k.powf(exponent) }).collect();
        ShellSpectrum { label: "synthetic".into(), k, energy }
    }

    #[test]
    fn exact_power_laws() {
        for (p, c) in [(-5.0 / 3.0, 1.0), (-10.0 / 3.0, 7.5)] {
            let fit = fit_power_law(&synthetic(p, c), (4.0, 40.0)).unwrap();
            assert!((fit.exponent - p).abs() < 1e-12);
            assert!(fit.stderr < 1e-12);
            assert_eq!(fit.points, 37);
        }
        assert!(fit_power_law(&synthetic(-1.0, 1.0), (10.0, 12.0)).is_err());
    }

    #[test]
    fn noisy_power_law() {
        let normal = Normal::new(0.0, 0.1).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut s = synthetic(-5.0 / 3.0, 1.0);
            for e in s.energy.iter_mut() {
                *e *= f64::exp(normal.sample(&mut rng));
            }
            let fit = fit_power_law(&s, (4.0, 64.0)).unwrap();
            assert!((fit.exponent + 5.0 / 3.0).abs() < 0.05, "seed {seed}: {}", fit.exponent);
        }
    }

    #[test]
    fn peak_and_support() {
        let mut s = synthetic(-2.0, 1.0);
        s.energy[1] = 0.0;
        assert_eq!(k_peak(&s).unwrap(), 2.0);
        assert_eq!(support_radius(&s, 0.0), 1.0);
        assert_eq!(support_radius(&s, 1.0), 64.0);
        let empty = ShellSpectrum { label: "e".into(), k: vec![0.0, 1.0], energy: vec![1.0, 0.0] };
        assert!(k_peak(&empty).is_err());
    }
}
