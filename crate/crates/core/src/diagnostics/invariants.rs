use rayon::prelude::*;

use super::{det_mean, require_3d, velocity_gradient, vorticity::skewness};
use crate::error::{Error, Result};
use crate::lattice::GridSpec;
use crate::madelung::VectorField;

/// Binning of the joint R-Q histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct QrOptions {
    pub bins: usize,
    /// Half-width of the plotted window in normalized units
    /// (`R / Q_w^{3/2}` and `Q / Q_w`).
    pub half_width: f64,
}

impl Default for QrOptions {
    fn default() -> Self {
        Self {
            bins: 101,
            half_width: 5.0,
        }
    }
}

/// Pointwise second and third invariants of `A_ij = ∂u_j/∂x_i`.
#[derive(Clone, Debug)]
pub struct QrInvariants {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    /// `Q_w = ⟨|ω|²⟩ / 4`, the scale used to normalize the histogram
    /// (unit scale when the field is irrotational).
    pub q_w: f64,
    pub skewness_r: f64,
}

/// Joint density of normalized `(R, Q)`; `density[iq][ir]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QrHistogram {
    pub r_centers: Vec<f64>,
    pub q_centers: Vec<f64>,
    pub density: Vec<Vec<f64>>,
    /// Share of grid points inside the histogram window.
    pub in_range: f64,
}

impl QrHistogram {
    /// `∫∫ P dR dQ` over the window.
    pub fn integral(&self) -> f64 {
        let dr = self.r_centers[1] - self.r_centers[0];
        let dq = self.q_centers[1] - self.q_centers[0];
        self.density.iter().flatten().sum::<f64>() * dr * dq
    }
}

/// `(Q, R) = (−½ A_ij A_ji, −det A)` for one tensor.
pub fn qr_of(a: &[[f64; 3]; 3]) -> (f64, f64) {
    let mut tr2 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            tr2 += a[i][j] * a[j][i];
        }
    }
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    (-0.5 * tr2, -det)
}

/// Q and R fields of a velocity field and their joint histogram.
pub fn qr_invariants(u: &VectorField, grid: &GridSpec, opts: &QrOptions) -> Result<(QrInvariants, QrHistogram)> {
    require_3d(grid, "Q-R invariants")?;
    if opts.bins < 2 || opts.half_width <= 0.0 {
        return Err(Error::domain("Q-R histogram needs at least 2 bins and a positive window"));
    }
    let a = velocity_gradient(u, grid)?;
    let tensor = |x: usize| {
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][j][x];
            }
        }
        t
    };
    let (q, r): (Vec<f64>, Vec<f64>) = (0..grid.len()).into_par_iter().map(|x| qr_of(&tensor(x))).unzip();
    let q_w = det_mean(grid.len(), |x| {
        let t = tensor(x);
        let w = [t[1][2] - t[2][1], t[2][0] - t[0][2], t[0][1] - t[1][0]];
        w.iter().map(|c| c * c).sum::<f64>()
    }) / 4.0;
    drop(a);
    if q.iter().chain(&r).all(|&v| v == 0.0) {
        return Err(Error::Degenerate("velocity field has no gradients".into()));
    }
    let skewness_r = skewness(&r);
    // Irrotational fields have no natural scale; plot them unnormalized.
    let q_scale = if q_w > 0.0 { q_w } else { 1.0 };

    let (bins, hw) = (opts.bins, opts.half_width);
    let width = 2.0 * hw / bins as f64;
    let bin = |v: f64| -> Option<usize> {
        let b = ((v + hw) / width).floor();
        (b >= 0.0 && b < bins as f64).then_some(b as usize)
    };
    let r_scale = q_scale.powf(1.5);
    let chunk = 1 << 15;
    let partial: Vec<Vec<u64>> = (0..grid.len().div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut h = vec![0u64; bins * bins];
            for x in c * chunk..((c + 1) * chunk).min(grid.len()) {
                if let (Some(ir), Some(iq)) = (bin(r[x] / r_scale), bin(q[x] / q_scale)) {
                    h[iq * bins + ir] += 1;
                }
            }
            h
        })
        .collect();
    let mut counts = vec![0u64; bins * bins];
    for h in partial {
        for (o, c) in counts.iter_mut().zip(h) {
            *o += c;
        }
    }
    let inside: u64 = counts.iter().sum();
    let norm = if inside == 0 { 0.0 } else { 1.0 / (inside as f64 * width * width) };
    let centers: Vec<f64> = (0..bins).map(|b| -hw + (b as f64 + 0.5) * width).collect();
    let hist = QrHistogram {
        r_centers: centers.clone(),
        q_centers: centers,
        density: counts.chunks(bins).map(|row| row.iter().map(|&c| c as f64 * norm).collect()).collect(),
        in_range: inside as f64 / grid.len() as f64,
    };
    Ok((
        QrInvariants {
            q,
            r,
            q_w,
            skewness_r,
        },
        hist,
    ))
}

/// Points `(R, Q)` on the Vieillefosse line `27R² + 4Q³ = 0`.
pub fn vieillefosse_curve(r: &[f64]) -> Vec<(f64, f64)> {
    r.iter().map(|&r| (r, -(27.0 * r * r / 4.0).cbrt())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::sample_vector_field;

    #[test]
    fn hand_algebra() {
        let rot = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        assert_eq!(qr_of(&rot), (1.0, 0.0));
        let strain = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]];
        assert_eq!(qr_of(&strain), (-1.0, 0.0));
        let diag = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -3.0]];
        assert_eq!(qr_of(&diag).1, 6.0);
    }

    #[test]
    fn spot_values_on_64_cube() {
        let g = GridSpec::cube(3, 6).unwrap();
        let opts = QrOptions::default();
        let rot = sample_vector_field(&g, |x| [-x[1].sin(), x[0].sin(), 0.0]);
        let (inv, hist) = qr_invariants(&rot, &g, &opts).unwrap();
        assert!((inv.q[0] - 1.0).abs() < 1e-6 && inv.r[0].abs() < 1e-6);
        assert!((hist.integral() - 1.0).abs() < 1e-12);

        let strain = sample_vector_field(&g, |x| [x[0].sin(), -x[1].sin(), 0.0]);
        let (inv, _) = qr_invariants(&strain, &g, &opts).unwrap();
        assert!((inv.q[0] + 1.0).abs() < 1e-6 && inv.r[0].abs() < 1e-6);
    }

    #[test]
    fn vieillefosse_points_satisfy_the_curve() {
        for (r, q) in vieillefosse_curve(&[-2.0, -0.1, 0.0, 0.5, 3.0]) {
            assert!((27.0 * r * r + 4.0 * q * q * q).abs() < 1e-12);
        }
    }

    #[test]
    fn still_field_is_degenerate() {
        let g = GridSpec::cube(3, 3).unwrap();
        let u = vec![vec![0.0; g.len()]; 3];
        assert!(matches!(
            qr_invariants(&u, &g, &QrOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }
}
