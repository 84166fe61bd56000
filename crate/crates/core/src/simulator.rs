//! Statevector execution of encoding circuits.
//!
//! Qubit `m` (1-based) addresses bit `m - 1` of the flat amplitude index, so a
//! state's amplitude array is directly the spectral array of the lattice
//! ordering: no reshuffling is needed between simulator and field code.

use num_complex::{Complex, Complex64};
use num_traits::Float;
use rayon::prelude::*;

use crate::circuit::{build_circuit, mat2_mul, u3_matrix, CircuitSpec, Gate, GateList, Mat2};
use crate::error::{Error, Result};
use crate::lattice::GridSpec;

/// Below this many amplitudes kernels run sequentially.
const PAR_THRESHOLD: usize = 1 << 14;

/// Largest qubit count a [`StateVector`] will allocate.
pub const MAX_QUBITS: u32 = 34;

/// Floating-point types amplitudes can be stored in.
pub trait Amplitude: Float + Send + Sync + std::fmt::Debug + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Amplitude for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Amplitude for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Amplitude = f64> {
    n_q: u32,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Amplitude> StateVector<T> {
    /// `|0…0⟩` on `n_q` qubits.
    pub fn ground(n_q: u32) -> Result<Self> {
        if n_q > MAX_QUBITS {
            return Err(Error::ResourceLimit(format!(
                "{n_q} qubits exceeds the simulator limit of {MAX_QUBITS}"
            )));
        }
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1usize << n_q];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Ok(Self { n_q, amplitudes })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return Err(Error::domain(format!("{len} amplitudes is not a power of two")));
        }
        Ok(Self {
            n_q: len.trailing_zeros(),
            amplitudes,
        })
    }

    pub fn n_q(&self) -> u32 {
        self.n_q
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex<T>> {
        self.amplitudes
    }

    /// `Σ |a_j|²`, accumulated in f64 in index order.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.re.to_f64().powi(2) + a.im.to_f64().powi(2))
            .sum()
    }

    fn check_qubit(&self, q: u32) -> Result<()> {
        if q == 0 || q > self.n_q {
            return Err(Error::domain(format!("qubit {q} outside 1..={}", self.n_q)));
        }
        Ok(())
    }

    /// In-place single-qubit update over bit `qubit - 1`.
    pub fn apply_u3_mut(&mut self, qubit: u32, gate: &Mat2) -> Result<()> {
        self.check_qubit(qubit)?;
        let g: [[Complex<T>; 2]; 2] = cast_mat(gate);
        let half = 1usize << (qubit - 1);
        let kernel = |lo: &mut [Complex<T>], hi: &mut [Complex<T>]| {
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a0, *a1);
                *a0 = g[0][0] * x + g[0][1] * y;
                *a1 = g[1][0] * x + g[1][1] * y;
            }
        };
        if self.amplitudes.len() < PAR_THRESHOLD {
            for block in self.amplitudes.chunks_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                kernel(lo, hi);
            }
        } else if half >= PAR_THRESHOLD {
            for block in self.amplitudes.chunks_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                lo.par_chunks_mut(PAR_THRESHOLD)
                    .zip(hi.par_chunks_mut(PAR_THRESHOLD))
                    .for_each(|(l, h)| kernel(l, h));
            }
        } else {
            let per_task = (PAR_THRESHOLD / (2 * half)).max(1) * 2 * half;
            self.amplitudes.par_chunks_mut(per_task).for_each(|task| {
                for block in task.chunks_mut(2 * half) {
                    let (lo, hi) = block.split_at_mut(half);
                    kernel(lo, hi);
                }
            });
        }
        Ok(())
    }

    /// In-place CX: swaps the target-bit pairs wherever the control bit is set.
    pub fn apply_cx_mut(&mut self, control: u32, target: u32) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::domain(format!(
                "CX control and target are both qubit {control}"
            )));
        }
        let cbit = 1usize << (control - 1);
        let tbit = 1usize << (target - 1);
        let span = (cbit.max(tbit)) << 1;
        let swap_block = |offset: usize, block: &mut [Complex<T>]| {
            debug_assert_eq!(offset % span, 0);
            for i in 0..block.len() {
                if i & cbit != 0 && i & tbit == 0 {
                    block.swap(i, i | tbit);
                }
            }
        };
        if self.amplitudes.len() < PAR_THRESHOLD || span == self.amplitudes.len() {
            for (b, block) in self.amplitudes.chunks_mut(span).enumerate() {
                swap_block(b * span, block);
            }
        } else {
            self.amplitudes
                .par_chunks_mut(span)
                .enumerate()
                .for_each(|(b, block)| swap_block(b * span, block));
        }
        Ok(())
    }

    pub fn apply_gate_mut(&mut self, gate: &Gate) -> Result<()> {
        match *gate {
            Gate::U3 {
                qubit,
                theta,
                phi,
                gamma,
            } => self.apply_u3_mut(qubit, &u3_matrix(theta, phi, gamma)),
            Gate::Cx { control, target } => self.apply_cx_mut(control, target),
        }
    }
}

impl<T: Amplitude> StateVector<T> {
    /// Amplitudes widened to f64, in flat lattice order.
    pub fn to_spectral(&self) -> Vec<Complex64> {
        self.amplitudes
            .iter()
            .map(|a| Complex64::new(Amplitude::to_f64(a.re), Amplitude::to_f64(a.im)))
            .collect()
    }
}

fn cast_mat<T: Amplitude>(m: &Mat2) -> [[Complex<T>; 2]; 2] {
    let c = |z: Complex64| Complex::new(T::from_f64(z.re), T::from_f64(z.im));
    [[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]]
}

/// Returns `gate · state` on `qubit`; the input is left untouched.
pub fn apply_u3<T: Amplitude>(state: &StateVector<T>, qubit: u32, gate: &Mat2) -> Result<StateVector<T>> {
    let mut out = state.clone();
    out.apply_u3_mut(qubit, gate)?;
    Ok(out)
}

/// Returns `CX(control, target) · state`; the input is left untouched.
pub fn apply_cx<T: Amplitude>(state: &StateVector<T>, control: u32, target: u32) -> Result<StateVector<T>> {
    let mut out = state.clone();
    out.apply_cx_mut(control, target)?;
    Ok(out)
}

/// Norm bookkeeping of an audited run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NormAudit {
    /// Largest `|‖ψ‖² - 1|` seen after any applied gate.
    pub max_gate_drift: f64,
    pub final_norm_sqr: f64,
    pub gates_applied: usize,
}

/// `T|0…0⟩` for the gate list.
pub fn run<T: Amplitude>(gates: &GateList) -> Result<StateVector<T>> {
    run_inner(gates, false).map(|(s, _)| s)
}

/// As [`run`], measuring the norm after every applied (fused) gate.
pub fn run_audited<T: Amplitude>(gates: &GateList) -> Result<(StateVector<T>, NormAudit)> {
    run_inner(gates, true)
}

fn run_inner<T: Amplitude>(gates: &GateList, audit: bool) -> Result<(StateVector<T>, NormAudit)> {
    let mut state = StateVector::<T>::ground(gates.n_q())?;
    let mut report = NormAudit::default();
    let mut pending: Option<(u32, Mat2)> = None;
    let record = |state: &StateVector<T>, report: &mut NormAudit| {
        report.gates_applied += 1;
        if audit {
            report.max_gate_drift = report.max_gate_drift.max((state.norm_sqr() - 1.0).abs());
        }
    };
    for gate in gates.gates() {
        match *gate {
            Gate::U3 {
                qubit,
                theta,
                phi,
                gamma,
            } => {
                let u = u3_matrix(theta, phi, gamma);
                pending = match pending.take() {
                    Some((q, acc)) if q == qubit => Some((q, mat2_mul(&u, &acc))),
                    Some((q, acc)) => {
                        state.apply_u3_mut(q, &acc)?;
                        record(&state, &mut report);
                        Some((qubit, u))
                    }
                    None => Some((qubit, u)),
                };
            }
            Gate::Cx { control, target } => {
                if let Some((q, acc)) = pending.take() {
                    state.apply_u3_mut(q, &acc)?;
                    record(&state, &mut report);
                }
                state.apply_cx_mut(control, target)?;
                record(&state, &mut report);
            }
        }
    }
    if let Some((q, acc)) = pending.take() {
        state.apply_u3_mut(q, &acc)?;
        record(&state, &mut report);
    }
    report.final_norm_sqr = state.norm_sqr();
    Ok((state, report))
}

/// Spin label of a spinor component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    pub fn label(self) -> &'static str {
        match self {
            Spin::Up => "psi_plus",
            Spin::Down => "psi_minus",
        }
    }
}

/// Spectral coefficients `(ψ̂₊, ψ̂₋)` on a common grid, flat lattice order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorField {
    grid: GridSpec,
    psi_plus: Vec<Complex64>,
    psi_minus: Vec<Complex64>,
    normalization: f64,
}

impl SpinorField {
    /// Scale applied to unit-norm amplitudes so that the spatial mean of the
    /// density is one.
    pub const BOX_NORMALIZATION: f64 = std::f64::consts::FRAC_1_SQRT_2;

    /// Builds a field from already-scaled spectral coefficients.
    pub fn new(grid: GridSpec, psi_plus: Vec<Complex64>, psi_minus: Vec<Complex64>) -> Result<Self> {
        Self::with_normalization(grid, psi_plus, psi_minus, 1.0)
    }

    pub fn with_normalization(
        grid: GridSpec,
        psi_plus: Vec<Complex64>,
        psi_minus: Vec<Complex64>,
        normalization: f64,
    ) -> Result<Self> {
        for (label, v) in [("psi_plus", &psi_plus), ("psi_minus", &psi_minus)] {
            if v.len() != grid.len() {
                return Err(Error::GridMismatch {
                    expected: format!("{} coefficients ({grid})", grid.len()),
                    found: format!("{} in {label}", v.len()),
                });
            }
        }
        Ok(Self {
            grid,
            psi_plus,
            psi_minus,
            normalization,
        })
    }

    /// Scales unit-norm circuit outputs by [`Self::BOX_NORMALIZATION`].
    pub fn from_states<T: Amplitude>(
        grid: GridSpec,
        up: &StateVector<T>,
        down: &StateVector<T>,
    ) -> Result<Self> {
        let c = Self::BOX_NORMALIZATION;
        let scale = |v: Vec<Complex64>| v.into_iter().map(|a| a * c).collect::<Vec<_>>();
        Self::with_normalization(grid, scale(up.to_spectral()), scale(down.to_spectral()), c)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn component(&self, s: Spin) -> &[Complex64] {
        match s {
            Spin::Up => &self.psi_plus,
            Spin::Down => &self.psi_minus,
        }
    }

    pub fn psi_plus(&self) -> &[Complex64] {
        &self.psi_plus
    }

    pub fn psi_minus(&self) -> &[Complex64] {
        &self.psi_minus
    }

    /// Multiplies both components by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let f = |v: &[Complex64]| v.iter().map(|a| a * c).collect();
        Self {
            grid: self.grid.clone(),
            psi_plus: f(&self.psi_plus),
            psi_minus: f(&self.psi_minus),
            normalization: self.normalization * c.norm(),
        }
    }

    /// `Σ_s Σ_k |ψ̂_s(k)|²`.
    pub fn spectral_energy(&self) -> f64 {
        self.psi_plus
            .iter()
            .chain(&self.psi_minus)
            .map(|a| a.norm_sqr())
            .sum()
    }
}

/// Runs the spin-up and spin-down circuits and assembles the spinor.
pub fn prepare_spinor(spec_up: &CircuitSpec, spec_down: &CircuitSpec) -> Result<SpinorField> {
    if spec_up.grid != spec_down.grid {
        return Err(Error::GridMismatch {
            expected: spec_up.grid.to_string(),
            found: spec_down.grid.to_string(),
        });
    }
    let up: StateVector<f64> = run(&build_circuit(spec_up)?)?;
    let down: StateVector<f64> = run(&build_circuit(spec_down)?)?;
    SpinorField::from_states(spec_up.grid.clone(), &up, &down)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ShapingParams, QubitPair};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    type Dense = Vec<Vec<Complex64>>;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn identity(n: usize) -> Dense {
        (0..n)
            .map(|i| (0..n).map(|j| c(if i == j { 1.0 } else { 0.0 })).collect())
            .collect()
    }

    fn matmul(a: &Dense, b: &Dense) -> Dense {
        let n = a.len();
        let mut out = vec![vec![c(0.0); n]; n];
        for i in 0..n {
            for k in 0..n {
                if a[i][k] == c(0.0) {
                    continue;
                }
                for j in 0..n {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    }

    /// Full 2^n x 2^n matrix of a gate, built from the definition on basis
    /// states rather than from the simulator kernels.
    fn dense_gate(g: &Gate, n_q: u32) -> Dense {
        let dim = 1usize << n_q;
        let mut m = vec![vec![c(0.0); dim]; dim];
        match *g {
            Gate::U3 {
                qubit,
                theta,
                phi,
                gamma,
            } => {
                let u = u3_matrix(theta, phi, gamma);
                let b = (qubit - 1) as usize;
                for col in 0..dim {
                    let bit = (col >> b) & 1;
                    for out_bit in 0..2 {
                        let row = (col & !(1 << b)) | (out_bit << b);
                        m[row][col] += u[out_bit][bit];
                    }
                }
            }
            Gate::Cx { control, target } => {
                for col in 0..dim {
                    let row = if (col >> (control - 1)) & 1 == 1 {
                        col ^ (1 << (target - 1))
                    } else {
                        col
                    };
                    m[row][col] = c(1.0);
                }
            }
        }
        m
    }

    fn random_gates(n_q: u32, count: usize, seed: u64) -> GateList {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gates = Vec::new();
        for _ in 0..count {
            if n_q > 1 && rng.random_bool(0.3) {
                let a = rng.random_range(1..=n_q);
                let mut b = rng.random_range(1..=n_q);
                while b == a {
                    b = rng.random_range(1..=n_q);
                }
                gates.push(Gate::cx(a, b));
            } else {
                gates.push(Gate::u3(
                    rng.random_range(1..=n_q),
                    rng.random_range(-PI..PI),
                    rng.random_range(-PI..PI),
                    rng.random_range(-PI..PI),
                ));
            }
        }
        GateList::new(n_q, gates).unwrap()
    }

    #[test]
    fn u3_examples() {
        let s = StateVector::<f64>::ground(2).unwrap();
        let x = u3_matrix(PI, 0.0, PI);
        let out = apply_u3(&s, 1, &x).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[1].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.norm_sqr(), 1.0, epsilon = 1e-15);
        // input untouched
        assert_eq!(s.amplitudes()[0], c(1.0));

        let id = u3_matrix(0.0, 0.0, 0.0);
        let r = run::<f64>(&random_gates(3, 20, 1)).unwrap();
        assert_eq!(apply_u3(&r, 2, &id).unwrap(), r);

        let h = u3_matrix(PI / 2.0, 0.0, PI);
        let one = StateVector::<f64>::ground(1).unwrap();
        let out = apply_u3(&one, 1, &h).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[0].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitudes()[1].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert!(apply_u3(&one, 2, &h).is_err());
        assert!(apply_u3(&one, 0, &h).is_err());
    }

    #[test]
    fn cx_examples() {
        let mut s = StateVector::<f64>::ground(2).unwrap();
        assert_eq!(apply_cx(&s, 1, 2).unwrap(), s);
        s.apply_u3_mut(1, &u3_matrix(PI, 0.0, PI)).unwrap();
        // |01> (qubit 1 set) -> |11>
        let out = apply_cx(&s, 1, 2).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[3].re, 1.0, epsilon = 1e-15);

        let r = run::<f64>(&random_gates(5, 40, 2)).unwrap();
        let twice = apply_cx(&apply_cx(&r, 4, 2).unwrap(), 4, 2).unwrap();
        assert_eq!(twice, r);
        assert!(apply_cx(&r, 3, 3).is_err());
        assert!(apply_cx(&r, 6, 1).is_err());
    }

    #[test]
    fn run_examples() {
        let empty = run::<f64>(&GateList::empty(4)).unwrap();
        assert_eq!(empty.amplitudes()[0], c(1.0));
        assert!(empty.amplitudes()[1..].iter().all(|a| *a == c(0.0)));
        for m in 1..=4 {
            let g = GateList::new(4, vec![Gate::u3(m, PI, 0.0, PI)]).unwrap();
            let s = run::<f64>(&g).unwrap();
            assert_abs_diff_eq!(s.amplitudes()[1 << (m - 1)].norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn matches_dense_oracle() {
        for n_q in 1..=6 {
            for seed in 0..3 {
                let gates = random_gates(n_q, 30, 100 * n_q as u64 + seed);
                let mut u = identity(1 << n_q);
                for g in gates.gates() {
                    u = matmul(&dense_gate(g, n_q), &u);
                }
                let s = run::<f64>(&gates).unwrap();
                for (i, a) in s.amplitudes().iter().enumerate() {
                    assert!((a - u[i][0]).norm() < 1e-12, "n_q={n_q} i={i}");
                }
            }
        }
    }

    #[test]
    fn large_state_kernels_agree_with_small_path() {
        // exercises the parallel branches (2^16 amplitudes)
        let gates = random_gates(16, 60, 9);
        let fused = run::<f64>(&gates).unwrap();
        let mut step = StateVector::<f64>::ground(16).unwrap();
        for g in gates.gates() {
            step.apply_gate_mut(g).unwrap();
        }
        let worst = fused
            .amplitudes()
            .iter()
            .zip(step.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12);
        assert_abs_diff_eq!(fused.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn norm_audit() {
        let (s, audit) = run_audited::<f64>(&random_gates(8, 200, 4)).unwrap();
        assert!(audit.max_gate_drift < 1e-12);
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn disjoint_cx_order_is_irrelevant() {
        let base = run::<f64>(&random_gates(6, 30, 5)).unwrap();
        let pairs: [QubitPair; 3] = [(1, 2), (3, 4), (6, 5)];
        let apply = |order: &[usize]| {
            let mut s = base.clone();
            for &i in order {
                s.apply_cx_mut(pairs[i].0, pairs[i].1).unwrap();
            }
            s
        };
        let a = apply(&[0, 1, 2]);
        for order in [[2, 1, 0], [1, 0, 2], [2, 0, 1]] {
            assert_eq!(apply(&order), a);
        }
    }

    #[test]
    fn single_precision_tracks_double() {
        let g = random_gates(10, 80, 6);
        let d = run::<f64>(&g).unwrap();
        let s = run::<f32>(&g).unwrap();
        let worst = d
            .amplitudes()
            .iter()
            .zip(s.to_spectral())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-5);
    }

    fn spec(seed: u64, pairs: Vec<Vec<QubitPair>>) -> CircuitSpec {
        CircuitSpec {
            grid: GridSpec::new(&[2, 2]).unwrap(),
            reps: 2,
            pair_sets: pairs,
            shaping: ShapingParams::reference(),
            seed,
        }
    }

    #[test]
    fn spinor_with_no_modules_is_uniform() {
        let s = prepare_spinor(&spec(1, vec![]), &spec(2, vec![])).unwrap();
        for v in [s.psi_plus(), s.psi_minus()] {
            assert_abs_diff_eq!(v[0].re, SpinorField::BOX_NORMALIZATION, epsilon = 1e-15);
            assert!(v[1..].iter().all(|a| a.norm() == 0.0));
        }
        assert_abs_diff_eq!(s.spectral_energy(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_angle_spin_down_stays_uniform() {
        let up = spec(1, vec![vec![(1, 3)], vec![]]);
        let mut down = spec(2, vec![vec![(1, 3)], vec![]]);
        down.shaping.lambda = 0.0;
        down.shaping.c_l = 0.0;
        down.shaping.beta = 1e9; // every factor underflows to zero
        let s = prepare_spinor(&up, &down).unwrap();
        assert!(s.psi_minus()[1..].iter().all(|a| a.norm() < 1e-300));
        assert!(s.psi_plus()[1..].iter().any(|a| a.norm() > 1e-3));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let mut other = spec(2, vec![]);
        other.grid = GridSpec::new(&[2, 3]).unwrap();
        assert!(matches!(
            prepare_spinor(&spec(1, vec![]), &other),
            Err(Error::GridMismatch { .. })
        ));
    }
}
