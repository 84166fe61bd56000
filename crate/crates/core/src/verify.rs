//! Desk-scale conformance suite: exhaustive lattice checks, the simulator
//! against dense gate matrices, and the three-way agreement of direct
//! convolution, measurement-operator expectation and FFT path.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::circuit::{build_circuit, u3_matrix, CircuitSpec, Gate, GateList, QubitPair};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::lattice::{self, GridSpec};
use crate::madelung::{
    all_kernels, build_measurement_operator_with, convolve_observable_direct, density_field, hermitian_split,
    observable_spectrum, KernelKind, SpinConvention,
};
use crate::simulator::{run, run_audited, Spin, StateVector};
use crate::synthetic::random_band_limited_spinor;

/// Largest qubit count the suite accepts.
pub const MAX_VERIFY_QUBITS: u32 = 12;
/// Largest qubit count compared against dense `2^n × 2^n` gate matrices.
pub const MAX_DENSE_QUBITS: u32 = 8;
/// Agreement required between the three convolution paths.
pub const TRIANGLE_TOLERANCE: f64 = 1e-10;
/// Elementwise agreement required between simulator and dense oracle.
pub const DENSE_TOLERANCE: f64 = 1e-12;

/// A deliberately wrong kernel, to confirm the suite notices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Flip the sign of the momentum kernel inside measurement operators.
    MomentumSign,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub qubits: u32,
    pub seed: u64,
    pub mutation: Option<Mutation>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            qubits: 6,
            seed: 1,
            mutation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub grid: GridSpec,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One `PASS`/`FAIL` line per check.
    pub fn to_text(&self) -> String {
        self.checks
            .iter()
            .map(|c| format!("{} {:<34} {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

/// Splits `qubits` over `dims` directions, the remainder going to the
/// lowest directions.
pub fn desk_grid(qubits: u32, dims: usize) -> Result<GridSpec> {
    if qubits > MAX_VERIFY_QUBITS {
        return Err(Error::ResourceLimit(format!(
            "verification is desk-scale: at most {MAX_VERIFY_QUBITS} qubits, got {qubits}"
        )));
    }
    let d = dims as u32;
    if qubits < d {
        return Err(Error::Config(format!("{qubits} qubits cannot cover {dims} directions")));
    }
    let n: Vec<u32> = (0..d).map(|a| qubits / d + u32::from(a < qubits % d)).collect();
    GridSpec::new(&n)
}

/// Ring couplings shifted per module so every module differs.
fn ring_pairs(n_q: u32, modules: usize) -> Vec<Vec<QubitPair>> {
    if n_q < 2 {
        return vec![Vec::new(); modules];
    }
    (0..modules)
        .map(|l| {
            let shift = l as u32 % (n_q - 1) + 1;
            (1..=n_q).map(|m| (m, (m - 1 + shift) % n_q + 1)).collect()
        })
        .collect()
}

fn desk_spec(cfg: &RunConfig, grid: GridSpec, seed: u64) -> CircuitSpec {
    let pair_sets = ring_pairs(grid.n_q(), cfg.pair_sets.len());
    CircuitSpec {
        grid,
        reps: cfg.reps,
        pair_sets,
        shaping: cfg.shaping.clone(),
        seed,
    }
}

/// Runs the suite on a grid of `opts.qubits` qubits shaped like the
/// configured grid.
pub fn verify(cfg: &RunConfig, opts: &VerifyOptions) -> Result<VerifyReport> {
    let grid = desk_grid(opts.qubits, cfg.grid.dims())?;
    let mut checks = Vec::new();
    checks.push(lattice_roundtrip(&grid));
    checks.push(summation_sets(&grid));

    let dense_grid = desk_grid(opts.qubits.min(MAX_DENSE_QUBITS), cfg.grid.dims())?;
    checks.push(dense_oracle(&desk_spec(cfg, dense_grid, opts.seed))?);
    let spec = desk_spec(cfg, grid.clone(), opts.seed);
    checks.push(norm_audit(&spec)?);

    let spinor = random_band_limited_spinor(&grid, opts.seed);
    let conv = cfg.diagnostics.spin_convention;
    for kind in all_kernels(&grid) {
        checks.push(triangle(&spinor, kind, conv, opts.mutation)?);
    }
    checks.push(split_check(&spinor)?);
    let rho = density_field(&spinor);
    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
    let energy = spinor.spectral_energy();
    let gap = (mean - energy).abs();
    checks.push(Check {
        name: "madelung.parseval".into(),
        passed: gap <= 1e-12 * energy.max(1.0),
        detail: format!("mean density {mean:.15} vs spectral energy {energy:.15}"),
    });
    Ok(VerifyReport { grid, checks })
}

fn lattice_roundtrip(grid: &GridSpec) -> Check {
    let mut bad = 0usize;
    for f in 0..grid.len() {
        let multi = grid.multi_index(f);
        bad += usize::from(grid.flat_index(&multi).ok() != Some(f));
        bad += usize::from(grid.flat_of_wavenumbers(&grid.wavenumbers(f)).ok() != Some(f));
        for (a, (&j, &n)) in multi.iter().zip(grid.n_alpha()).enumerate() {
            let k = lattice::index_to_wavenumber(j, n);
            bad += usize::from(k.as_ref().ok() != Some(&grid.wavenumbers(f)[a]));
            bad += usize::from(k.and_then(|k| lattice::wavenumber_to_index(k, n)).ok() != Some(j));
        }
    }
    Check {
        name: "lattice.roundtrip".into(),
        passed: bad == 0,
        detail: format!("{} points of {grid}, {bad} mismatches", grid.len()),
    }
}

fn summation_sets(grid: &GridSpec) -> Check {
    let mut bad = 0usize;
    let mut n_values: Vec<u32> = grid.n_alpha().to_vec();
    n_values.sort_unstable();
    n_values.dedup();
    for &n in &n_values {
        let size = 1usize << n;
        let h = 1i64 << (n - 1);
        for j in 0..size {
            let k = lattice::index_to_wavenumber(j, n).expect("in range");
            let brute: Vec<usize> = (0..size)
                .filter(|&jp| {
                    let kk = k + lattice::index_to_wavenumber(jp, n).expect("in range");
                    (-h..h).contains(&kk)
                })
                .collect();
            let mut set = lattice::summation_set_j(j, n).unwrap_or_default();
            set.sort_unstable();
            bad += usize::from(set != brute);
        }
    }
    // The coupled flat index addresses the summed wavenumber, for every j.
    for f in 0..grid.len() {
        let j = grid.multi_index(f);
        let k = grid.wavenumbers(f);
        let sets: Vec<Vec<usize>> = j
            .iter()
            .zip(grid.n_alpha())
            .map(|(&ja, &n)| lattice::summation_set_j(ja, n).unwrap_or_default())
            .collect();
        lattice::for_each_product(&sets, |jp| {
            let ok = match (lattice::flat_index_m(&j, jp, grid), grid.flat_index(jp)) {
                (Ok(m), Ok(p)) => {
                    let (km, kp) = (grid.wavenumbers(m), grid.wavenumbers(p));
                    km.iter().zip(&k).zip(&kp).all(|((a, b), c)| *a == b + c)
                }
                _ => false,
            };
            bad += usize::from(!ok);
        });
    }
    Check {
        name: "lattice.summation_sets".into(),
        passed: bad == 0,
        detail: format!("per-direction sizes {n_values:?} exhaustive, {bad} mismatches"),
    }
}

/// Full `2^n × 2^n` matrix of one gate, built from its action on basis
/// states.
fn dense_gate(g: &Gate, n_q: u32) -> Vec<Vec<Complex64>> {
    let dim = 1usize << n_q;
    let zero = Complex64::new(0.0, 0.0);
    let mut m = vec![vec![zero; dim]; dim];
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
                    m[(col & !(1 << b)) | (out_bit << b)][col] += u[out_bit][bit];
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
                m[row][col] = Complex64::new(1.0, 0.0);
            }
        }
    }
    m
}

fn dense_oracle(spec: &CircuitSpec) -> Result<Check> {
    let gates = build_circuit(spec)?;
    // A few extra random gates exercise every qubit pair orientation.
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let n_q = spec.grid.n_q();
    let mut all = gates.gates().to_vec();
    for _ in 0..4 * n_q {
        let a = rng.random_range(1..=n_q);
        let b = rng.random_range(1..=n_q);
        if a != b {
            all.push(Gate::cx(a, b));
        }
        all.push(Gate::u3(a, rng.random_range(0.0..6.3), rng.random_range(0.0..6.3), rng.random_range(0.0..6.3)));
    }
    let list = GateList::new(n_q, all)?;
    let fast: StateVector<f64> = run(&list)?;
    let dim = 1usize << n_q;
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    psi[0] = Complex64::new(1.0, 0.0);
    for g in list.gates() {
        let m = dense_gate(g, n_q);
        psi = m
            .iter()
            .map(|row| row.iter().zip(&psi).map(|(a, b)| a * b).sum())
            .collect();
    }
    let worst = fast
        .amplitudes()
        .iter()
        .zip(&psi)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(Check {
        name: "simulator.dense_oracle".into(),
        passed: worst <= DENSE_TOLERANCE,
        detail: format!("{} gates on {n_q} qubits, max |diff| = {worst:.2e}", list.len()),
    })
}

fn norm_audit(spec: &CircuitSpec) -> Result<Check> {
    let gates = build_circuit(spec)?;
    let count_ok = gates.len() == spec.gate_count();
    let (state, audit): (StateVector<f64>, _) = run_audited(&gates)?;
    let drift = (state.norm_sqr() - 1.0).abs();
    Ok(Check {
        name: "simulator.norm".into(),
        passed: count_ok && drift <= 1e-10 && audit.max_gate_drift <= 1e-10,
        detail: format!(
            "{} gates (expected {}), final |norm^2 - 1| = {drift:.2e}, worst per gate {:.2e}",
            gates.len(),
            spec.gate_count(),
            audit.max_gate_drift
        ),
    })
}

fn triangle(
    spinor: &crate::simulator::SpinorField,
    kind: KernelKind,
    conv: SpinConvention,
    mutation: Option<Mutation>,
) -> Result<Check> {
    let grid = spinor.grid();
    let fft = observable_spectrum(spinor, kind, conv)?;
    let with_operator = matches!(kind, KernelKind::Density | KernelKind::Momentum(_));
    let flip = matches!((mutation, kind), (Some(Mutation::MomentumSign), KernelKind::Momentum(_)));
    let (mut fft_direct, mut op_direct, mut op_fft) = (0.0f64, 0.0f64, 0.0f64);
    for f in 0..grid.len() {
        let k = grid.wavenumbers(f);
        let direct = convolve_observable_direct(spinor, kind, &k, conv)?;
        fft_direct = fft_direct.max((fft[f] - direct).norm());
        if with_operator {
            let op = build_measurement_operator_with(kind, &grid.multi_index(f), grid, |k, kp| {
                let c = kind.coefficient(Spin::Up, Spin::Up, k, kp, grid.k_unit(), conv);
                if flip {
                    -c
                } else {
                    c
                }
            })?;
            let q = op.expectation(spinor)?;
            op_direct = op_direct.max((q - direct).norm());
            op_fft = op_fft.max((q - fft[f]).norm());
        }
    }
    let worst = fft_direct.max(op_direct).max(op_fft);
    let detail = if with_operator {
        format!(
            "{} wavenumbers: |fft-direct| {fft_direct:.1e}, |op-direct| {op_direct:.1e}, |op-fft| {op_fft:.1e}",
            grid.len()
        )
    } else {
        format!("{} wavenumbers: |fft-direct| {fft_direct:.1e}", grid.len())
    };
    Ok(Check {
        name: format!("madelung.triangle[{}]", kind.label()),
        passed: worst <= TRIANGLE_TOLERANCE,
        detail,
    })
}

fn split_check(spinor: &crate::simulator::SpinorField) -> Result<Check> {
    let grid = spinor.grid();
    let mut worst = 0.0f64;
    let mut hermitian = true;
    for kind in [KernelKind::Density, KernelKind::Momentum(0)] {
        for f in 0..grid.len() {
            let op = build_measurement_operator_with(kind, &grid.multi_index(f), grid, |k, kp| {
                kind.coefficient(Spin::Up, Spin::Up, k, kp, grid.k_unit(), SpinConvention::Kernel)
            })?;
            let (h1, h2) = hermitian_split(op.operator());
            hermitian &= h1.is_hermitian(1e-14) && h2.is_hermitian(1e-14);
            let mut total = Complex64::new(0.0, 0.0);
            for s in Spin::BOTH {
                let psi = spinor.component(s);
                total += h1.expectation(psi)? + Complex64::new(0.0, 1.0) * h2.expectation(psi)?;
            }
            worst = worst.max((total - op.expectation(spinor)?).norm());
        }
    }
    Ok(Check {
        name: "madelung.hermitian_split".into(),
        passed: hermitian && worst <= 1e-12,
        detail: format!("both parts Hermitian: {hermitian}, max |<H1> + i<H2> - <Q>| = {worst:.1e}"),
    })
}
