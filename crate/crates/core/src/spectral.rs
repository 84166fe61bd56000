//! Multi-dimensional FFTs over flat arrays in lattice order (direction 0
//! fastest), with the normalization used throughout the crate:
//!
//! * synthesis  `f(x) = Σ_k f̂(k) e^{ik·x}` (no factor),
//! * analysis   `f̂(k) = (1/N) Σ_x f(x) e^{-ik·x}`.
//!
//! With this pair the spectral coefficients of a product of fields are the
//! (circular) convolution of the factors' coefficients.

use std::sync::Arc;

use num_complex::{Complex, Complex64};
use num_traits::Float;
use rayon::prelude::*;
use rustfft::{Fft, FftNum, FftPlanner};

use crate::lattice::GridSpec;

const COLUMN_BATCH: usize = 16;

struct AxisPlan<T> {
    len: usize,
    stride: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

/// Cached FFT plans for one array shape, at either float precision.
pub struct Fourier<T> {
    extents: Vec<usize>,
    total: usize,
    axes: Vec<AxisPlan<T>>,
}

/// Double-precision transform used by the measurement and diagnostics
/// stages.
pub type Transform = Fourier<f64>;

/// How the unpaired `-N/2` mode is differentiated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nyquist {
    /// Multiply by `i·(-N/2)` like every other mode (matches the band
    /// definition used by the direct convolutions).
    Keep,
    /// Drop the mode; keeps derivatives of real fields real.
    Zero,
}

impl<T: FftNum + Float> Fourier<T> {
    pub fn new(extents: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let mut stride = 1;
        let axes = extents
            .iter()
            .map(|&len| {
                let plan = AxisPlan {
                    len,
                    stride,
                    forward: planner.plan_fft_forward(len),
                    inverse: planner.plan_fft_inverse(len),
                };
                stride *= len;
                plan
            })
            .collect();
        Self {
            extents: extents.to_vec(),
            total: extents.iter().product(),
            axes,
        }
    }

    pub fn for_grid(grid: &GridSpec) -> Self {
        Self::new(&grid.extents())
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Spectral → physical, in place.
    pub fn synthesize(&self, data: &mut [Complex<T>]) {
        assert_eq!(data.len(), self.total, "array does not match transform shape");
        for axis in &self.axes {
            transform_axis(data, axis, &axis.inverse);
        }
    }

    /// Physical → spectral, in place.
    pub fn analyze(&self, data: &mut [Complex<T>]) {
        assert_eq!(data.len(), self.total, "array does not match transform shape");
        for axis in &self.axes {
            transform_axis(data, axis, &axis.forward);
        }
        let scale = T::from_f64(1.0 / self.total as f64).expect("representable scale");
        data.par_iter_mut().for_each(|v| *v = v.scale(scale));
    }

    /// Signed integer wavenumber of index `j` along `axis` (DFT order).
    pub fn signed_wavenumber(&self, axis: usize, j: usize) -> i64 {
        signed_k(j, self.extents[axis])
    }

    /// Integer wavenumbers along one axis, in storage order.
    pub fn axis_wavenumbers(&self, axis: usize) -> Vec<i64> {
        let n = self.extents[axis];
        (0..n).map(|j| signed_k(j, n)).collect()
    }

    /// Multiplies coefficients by `i k_axis · k_unit`, in place.
    pub fn differentiate(&self, coeffs: &mut [Complex<T>], axis: usize, k_unit: f64, nyquist: Nyquist) {
        let n = self.extents[axis];
        let stride = self.axes[axis].stride;
        let factors: Vec<Complex<T>> = (0..n)
            .map(|j| {
                let k = if nyquist == Nyquist::Zero && n.is_multiple_of(2) && j == n / 2 {
                    0.0
                } else {
                    signed_k(j, n) as f64 * k_unit
                };
                Complex::new(T::zero(), T::from_f64(k).expect("representable wavenumber"))
            })
            .collect();
        coeffs.par_iter_mut().enumerate().for_each(|(flat, v)| {
            *v = *v * factors[(flat / stride) % n];
        });
    }
}

impl Transform {

    pub fn analyze_real(&self, field: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = field.par_iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.analyze(&mut buf);
        buf
    }

    pub fn synthesize_copy(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = coeffs.to_vec();
        self.synthesize(&mut buf);
        buf
    }

    /// Synthesizes and keeps the real part; also returns the largest
    /// discarded imaginary magnitude.
    pub fn synthesize_real(&self, coeffs: &[Complex64]) -> (Vec<f64>, f64) {
        let buf = self.synthesize_copy(coeffs);
        let residue = buf.par_iter().map(|v| v.im.abs()).reduce(|| 0.0, f64::max);
        (buf.into_par_iter().map(|v| v.re).collect(), residue)
    }

    pub fn derivative(&self, coeffs: &[Complex64], axis: usize, k_unit: f64, nyquist: Nyquist) -> Vec<Complex64> {
        let mut out = coeffs.to_vec();
        self.differentiate(&mut out, axis, k_unit, nyquist);
        out
    }
}

fn signed_k(j: usize, n: usize) -> i64 {
    if j < n.div_ceil(2) {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

struct SharedMut<T>(*mut Complex<T>);

// SAFETY: tasks built from this pointer touch pairwise disjoint column sets.
unsafe impl<T: Send> Send for SharedMut<T> {}
unsafe impl<T: Sync> Sync for SharedMut<T> {}

fn transform_axis<T: FftNum + Float>(data: &mut [Complex<T>], axis: &AxisPlan<T>, fft: &Arc<dyn Fft<T>>) {
    let zero = Complex::new(T::zero(), T::zero());
    let (len, stride) = (axis.len, axis.stride);
    if len <= 1 {
        return;
    }
    if stride == 1 {
        let lines_per_task = (4096 / len).max(1);
        data.par_chunks_mut(len * lines_per_task).for_each(|chunk| {
            let mut scratch = vec![zero; fft.get_inplace_scratch_len()];
            fft.process_with_scratch(chunk, &mut scratch);
        });
        return;
    }
    let block = len * stride;
    let outer = data.len() / block;
    if outer > 1 {
        data.par_chunks_mut(block).for_each(|blk| {
            let mut lines = vec![zero; len * COLUMN_BATCH];
            let mut scratch = vec![zero; fft.get_inplace_scratch_len()];
            for c0 in (0..stride).step_by(COLUMN_BATCH) {
                let width = COLUMN_BATCH.min(stride - c0);
                columns(blk, len, stride, c0, width, &mut lines, fft.as_ref(), &mut scratch);
            }
        });
    } else {
        let base = SharedMut(data.as_mut_ptr());
        let base = &base;
        let total = data.len();
        (0..stride)
            .into_par_iter()
            .step_by(COLUMN_BATCH)
            .for_each_init(
                || {
                    (
                        vec![zero; len * COLUMN_BATCH],
                        vec![zero; fft.get_inplace_scratch_len()],
                    )
                },
                |(lines, scratch), c0| {
                    let width = COLUMN_BATCH.min(stride - c0);
                    // SAFETY: this task only reads and writes columns
                    // c0..c0+width of each row; column ranges of distinct
                    // tasks never overlap and the slice outlives the loop.
                    let blk = unsafe { std::slice::from_raw_parts_mut(base.0, total) };
                    columns(blk, len, stride, c0, width, lines, fft.as_ref(), scratch);
                },
            );
    }
}

#[allow(clippy::too_many_arguments)]
fn columns<T: FftNum>(
    blk: &mut [Complex<T>],
    len: usize,
    stride: usize,
    c0: usize,
    width: usize,
    lines: &mut [Complex<T>],
    fft: &dyn Fft<T>,
    scratch: &mut [Complex<T>],
) {
    for i in 0..len {
        let row = &blk[i * stride + c0..i * stride + c0 + width];
        for (b, v) in row.iter().enumerate() {
            lines[b * len + i] = *v;
        }
    }
    let lines = &mut lines[..width * len];
    fft.process_with_scratch(lines, scratch);
    for i in 0..len {
        let row = &mut blk[i * stride + c0..i * stride + c0 + width];
        for (b, v) in row.iter_mut().enumerate() {
            *v = lines[b * len + i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    /// Direct O(N²) synthesis for the oracle.
    fn naive_synthesis(coeffs: &[Complex64], extents: &[usize]) -> Vec<Complex64> {
        let t = Transform::new(extents);
        let total = coeffs.len();
        let idx = |mut f: usize| -> Vec<usize> {
            extents
                .iter()
                .map(|&n| {
                    let j = f % n;
                    f /= n;
                    j
                })
                .collect()
        };
        (0..total)
            .map(|x| {
                let xi = idx(x);
                (0..total)
                    .map(|k| {
                        let ki = idx(k);
                        let phase: f64 = (0..extents.len())
                            .map(|a| {
                                TAU * t.signed_wavenumber(a, ki[a]) as f64 * xi[a] as f64
                                    / extents[a] as f64
                            })
                            .sum();
                        coeffs[k] * Complex64::from_polar(1.0, phase)
                    })
                    .sum()
            })
            .collect()
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<Complex64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        (0..n).map(|_| Complex64::new(next(), next())).collect()
    }

    #[test]
    fn synthesis_matches_naive_sum() {
        for extents in [vec![8], vec![4, 2], vec![2, 4, 8], vec![3, 6], vec![4, 4, 4]] {
            let total = extents.iter().product();
            let c = pseudo_random(total, 3);
            let t = Transform::new(&extents);
            let fast = t.synthesize_copy(&c);
            let slow = naive_synthesis(&c, &extents);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-11, "{extents:?}");
            }
        }
    }

    #[test]
    fn analysis_inverts_synthesis() {
        let extents = [16, 32, 64];
        let c = pseudo_random(16 * 32 * 64, 5);
        let t = Transform::new(&extents);
        let mut buf = c.clone();
        t.synthesize(&mut buf);
        t.analyze(&mut buf);
        let worst = buf.iter().zip(&c).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-13);
    }

    #[test]
    fn single_precision_matches_double() {
        let extents = [8, 16, 4];
        let c = pseudo_random(8 * 16 * 4, 7);
        let mut narrow: Vec<Complex<f32>> = c.iter().map(|z| Complex::new(z.re as f32, z.im as f32)).collect();
        let t32 = Fourier::<f32>::new(&extents);
        t32.differentiate(&mut narrow, 1, 0.5, Nyquist::Keep);
        t32.synthesize(&mut narrow);
        let t = Transform::new(&extents);
        let wide = t.synthesize_copy(&t.derivative(&c, 1, 0.5, Nyquist::Keep));
        let worst = narrow
            .iter()
            .zip(&wide)
            .map(|(a, b)| (Complex64::new(f64::from(a.re), f64::from(a.im)) - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "worst = {worst}");
        t32.analyze(&mut narrow);
        t32.synthesize(&mut narrow);
    }

    #[test]
    fn derivative_of_sine() {
        let n = 32;
        let t = Transform::new(&[n]);
        let f: Vec<f64> = (0..n).map(|j| (3.0 * TAU * j as f64 / n as f64).sin()).collect();
        let d = t.derivative(&t.analyze_real(&f), 0, 1.0, Nyquist::Zero);
        let (df, residue) = t.synthesize_real(&d);
        assert!(residue < 1e-12);
        for (j, v) in df.iter().enumerate() {
            let expect = 3.0 * (3.0 * TAU * j as f64 / n as f64).cos();
            assert!((v - expect).abs() < 1e-12);
        }
    }
}
