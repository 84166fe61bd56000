use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::{check_vector, fit_log_log, ScalingFit};
use crate::error::{Error, Result};
use crate::lattice::GridSpec;
use crate::madelung::VectorField;

/// Smallest accepted Monte Carlo sample count per separation.
pub const MIN_SAMPLES: usize = 100_000;

/// Directions along which separations are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Directions {
    /// A uniformly random lattice axis per sample (cubic grids only).
    Lattice,
    /// A fixed axis.
    Axis(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureFunctionOptions {
    pub orders: Vec<u32>,
    /// Point pairs per separation.
    pub samples: usize,
    pub seed: u64,
    /// Number of log-spaced separations between one cell and half the box
    /// (duplicates after rounding to lattice lags are dropped).
    pub separations: usize,
    /// Fit window in physical units; `None` uses `[8Δx, L/8]`.
    pub fit_range: Option<(f64, f64)>,
    pub directions: Directions,
}

impl Default for StructureFunctionOptions {
    fn default() -> Self {
        Self {
            orders: vec![2, 3, 4, 5],
            samples: 1_000_000,
            seed: 0,
            separations: 32,
            fit_range: None,
            directions: Directions::Lattice,
        }
    }
}

/// Monte Carlo estimates `S_p(r) = ⟨|u(x + r) − u(x)|^p⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureFunctions {
    pub orders: Vec<u32>,
    /// Separations in lattice steps.
    pub lags: Vec<usize>,
    /// Separations in physical units.
    pub r: Vec<f64>,
    /// `values[i][j]`: order `orders[i]` at separation `r[j]`.
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Scaling fit per order over the fit window, when it has enough points.
    pub fits: Vec<Option<ScalingFit>>,
    pub samples: usize,
}

impl StructureFunctions {
    /// Fitted `ζ_p`, if order `p` was computed and fitted.
    pub fn zeta(&self, p: u32) -> Option<f64> {
        let i = self.orders.iter().position(|&o| o == p)?;
        self.fits[i].as_ref().map(|f| f.exponent)
    }

    /// `ζ₄ − ζ₃ < ζ₃ − ζ₂`.
    pub fn is_concave(&self) -> Option<bool> {
        let (z2, z3, z4) = (self.zeta(2)?, self.zeta(3)?, self.zeta(4)?);
        Some(z4 - z3 < z3 - z2)
    }
}

/// Kolmogorov 1941: `ζ_p = p/3`.
pub fn k41_exponent(p: f64) -> f64 {
    p / 3.0
}

/// She–Lévêque 1994: `ζ_p = p/9 + 2(1 − (2/3)^{p/3})`.
pub fn sl94_exponent(p: f64) -> f64 {
    p / 9.0 + 2.0 * (1.0 - (2.0f64 / 3.0).powf(p / 3.0))
}

/// Estimates structure functions of the full vector increment `|Δu|`.
///
/// Each separation draws from its own ChaCha20 stream derived from the root
/// seed, so results do not depend on scheduling.
pub fn structure_functions(
    u: &VectorField,
    grid: &GridSpec,
    opts: &StructureFunctionOptions,
) -> Result<StructureFunctions> {
    check_vector(grid, u, "velocity")?;
    if opts.samples < MIN_SAMPLES {
        return Err(Error::domain(format!(
            "structure functions need at least {MIN_SAMPLES} samples, got {}",
            opts.samples
        )));
    }
    let axes: Vec<usize> = match opts.directions {
        Directions::Axis(a) if a < grid.dims() => vec![a],
        Directions::Axis(a) => return Err(Error::domain(format!("axis {a} on a {}-D grid", grid.dims()))),
        Directions::Lattice => {
            if grid.n_alpha().iter().any(|&n| n != grid.n_alpha()[0]) {
                return Err(Error::Unsupported(
                    "random lattice directions need equal extents; pick a fixed axis".into(),
                ));
            }
            (0..grid.dims()).collect()
        }
    };
    let extent = grid.extent(axes[0]);
    let dx = grid.spacing(axes[0]);
    let lags = log_spaced_lags(extent / 2, opts.separations);

    let per_lag: Vec<(Vec<f64>, Vec<f64>)> = lags
        .par_iter()
        .enumerate()
        .map(|(stream, &lag)| {
            let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
            rng.set_stream(stream as u64);
            let mut sum = vec![0.0; opts.orders.len()];
            let mut sum_sq = vec![0.0; opts.orders.len()];
            for _ in 0..opts.samples {
                let x = rng.random_range(0..grid.len());
                let axis = axes[if axes.len() == 1 { 0 } else { rng.random_range(0..axes.len()) }];
                let y = shifted(grid, x, axis, lag);
                let du: f64 = u.iter().map(|c| (c[y] - c[x]).powi(2)).sum::<f64>().sqrt();
                for (i, &p) in opts.orders.iter().enumerate() {
                    let v = du.powi(p as i32);
                    sum[i] += v;
                    sum_sq[i] += v * v;
                }
            }
            let n = opts.samples as f64;
            let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
            let se = sum_sq
                .iter()
                .zip(&mean)
                .map(|(s2, m)| ((s2 / n - m * m).max(0.0) / (n - 1.0)).sqrt())
                .collect();
            (mean, se)
        })
        .collect();

    let r: Vec<f64> = lags.iter().map(|&l| l as f64 * dx).collect();
    let values: Vec<Vec<f64>> = (0..opts.orders.len())
        .map(|i| per_lag.iter().map(|(m, _)| m[i]).collect())
        .collect();
    let stderr: Vec<Vec<f64>> = (0..opts.orders.len())
        .map(|i| per_lag.iter().map(|(_, s)| s[i]).collect())
        .collect();
    let (lo, hi) = opts
        .fit_range
        .unwrap_or((8.0 * dx, grid.domain_length() / 8.0));
    let fits = values
        .iter()
        .map(|s| {
            let (x, y): (Vec<f64>, Vec<f64>) = r
                .iter()
                .zip(s)
                .filter(|(&r, &v)| r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12) && v > 0.0)
                .unzip();
            fit_log_log(&x, &y).ok().map(|(exponent, intercept, stderr)| ScalingFit {
                range: (lo, hi),
                exponent,
                intercept,
                stderr,
                points: x.len(),
            })
        })
        .collect();
    Ok(StructureFunctions {
        orders: opts.orders.clone(),
        lags,
        r,
        values,
        stderr,
        fits,
        samples: opts.samples,
    })
}

/// Distinct integers `round(max^{i/(count−1)})`, ascending, from 1 to `max`.
fn log_spaced_lags(max: usize, count: usize) -> Vec<usize> {
    if max <= 1 || count <= 1 {
        return vec![1];
    }
    let mut lags: Vec<usize> = (0..count)
        .map(|i| ((max as f64).ln() * i as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    lags.dedup();
    lags
}

fn shifted(grid: &GridSpec, flat: usize, axis: usize, lag: usize) -> usize {
    let off = grid.qubit_offset(axis);
    let mask = grid.extent(axis) - 1;
    let j = ((flat >> off) & mask) + lag;
    (flat & !(mask << off)) | ((j & mask) << off)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::sample_vector_field;

    #[test]
    fn reference_exponents() {
        assert_eq!(k41_exponent(3.0), 1.0);
        assert!((sl94_exponent(3.0) - 1.0).abs() < 1e-15);
        assert!((sl94_exponent(6.0) - (6.0 / 9.0 + 2.0 * (1.0 - 4.0 / 9.0))).abs() < 1e-15);
        // SL94 is concave and below K41 beyond p = 3.
        assert!(sl94_exponent(5.0) < k41_exponent(5.0));
    }

    #[test]
    fn lags_are_log_spaced() {
        assert_eq!(log_spaced_lags(64, 7), vec![1, 2, 4, 8, 16, 32, 64]);
        let l = log_spaced_lags(128, 32);
        assert_eq!((l[0], *l.last().unwrap()), (1, 128));
        assert!(l.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn shift_wraps_along_one_axis() {
        let g = GridSpec::new(&[3, 2]).unwrap();
        let f = g.flat_index(&[6, 3]).unwrap();
        assert_eq!(g.multi_index(shifted(&g, f, 0, 3)), vec![1, 3]);
        assert_eq!(g.multi_index(shifted(&g, f, 1, 2)), vec![6, 1]);
    }

    #[test]
    fn constant_field_has_zero_structure_functions() {
        let g = GridSpec::cube(3, 4).unwrap();
        let u = sample_vector_field(&g, |_| [1.0, -1.0, 2.0]);
        let sf = structure_functions(&u, &g, &StructureFunctionOptions { samples: MIN_SAMPLES, ..Default::default() }).unwrap();
        assert!(sf.values.iter().flatten().all(|&v| v == 0.0));
        assert!(sf.fits.iter().all(Option::is_none));
    }

    #[test]
    fn single_mode_matches_analytic_average() {
        let g = GridSpec::cube(3, 6).unwrap();
        let u = sample_vector_field(&g, |x| [x[0].sin(), 0.0, 0.0]);
        let opts = StructureFunctionOptions {
            orders: vec![2],
            samples: 1_000_000,
            seed: 5,
            separations: 12,
            fit_range: None,
            directions: Directions::Axis(0),
        };
        let sf = structure_functions(&u, &g, &opts).unwrap();
        for (j, &r) in sf.r.iter().enumerate() {
            let expect = 1.0 - r.cos();
            let z = (sf.values[0][j] - expect).abs() / sf.stderr[0][j].max(1e-300);
            assert!(z < 3.0 || (sf.values[0][j] - expect).abs() < 1e-12, "r = {r}: z = {z}");
        }
    }

    #[test]
    fn standard_error_shrinks_with_samples() {
        let g = GridSpec::cube(3, 5).unwrap();
        let u = sample_vector_field(&g, |x| [(x[0] + x[1]).sin(), x[2].cos(), (2.0 * x[1]).sin()]);
        let run = |samples| {
            let opts = StructureFunctionOptions {
                samples,
                separations: 6,
                ..Default::default()
            };
            structure_functions(&u, &g, &opts).unwrap()
        };
        let (a, b) = (run(100_000), run(400_000));
        for (x, y) in a.stderr.iter().flatten().zip(b.stderr.iter().flatten()) {
            let ratio = y / x;
            assert!((ratio - 0.5).abs() < 0.15, "ratio {ratio}");
        }
    }

    #[test]
    fn deterministic_and_guarded() {
        let g = GridSpec::cube(3, 4).unwrap();
        let u = sample_vector_field(&g, |x| [x[1].sin(), x[2].sin(), x[0].sin()]);
        let opts = StructureFunctionOptions { samples: MIN_SAMPLES, separations: 4, ..Default::default() };
        assert_eq!(structure_functions(&u, &g, &opts).unwrap(), structure_functions(&u, &g, &opts).unwrap());
        let few = StructureFunctionOptions { samples: 10, ..opts };
        assert!(structure_functions(&u, &g, &few).is_err());
    }
}
