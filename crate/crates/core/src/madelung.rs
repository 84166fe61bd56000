//! Generalized Madelung transform in spectral space.
//!
//! Each observable is a bilinear form in the spinor coefficients,
//!
//! ```text
//! Q̂(k) = Σ_{s,s'} Σ_{k'} ĉ_{s,s'}(k, k') ψ̂_s(k + k') ψ̂*_{s'}(k'),
//! ```
//!
//! evaluated three ways that must agree: the brute-force truncated sum
//! ([`convolve_observable_direct`]), the expectation of an explicit sparse
//! operator ([`build_measurement_operator`]), and pointwise products in
//! physical space followed by an FFT ([`observable_spectrum`]).
//! [`FieldSet::compute`] then divides momentum by density to obtain velocity
//! and normalizes the spin bilinears to the unit spin vector.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{self, GridSpec};
use crate::simulator::{Spin, SpinorField};
use crate::spectral::{Nyquist, Transform};

/// Components of a vector field, each a flat physical-space array.
pub type VectorField = Vec<Vec<f64>>;

/// Vacuum threshold relative to the maximum density.
pub const VACUUM_RELATIVE: f64 = 1e-12;

/// Largest tolerated fraction of vacuum-regularized grid points.
pub const MAX_REGULARIZED_FRACTION: f64 = 0.01;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Sign convention of the second spin component.
///
/// `Kernel` (the sign of the convolution kernels) uses `ĉ₊₋ = −i, ĉ₋₊ = i`, i.e. `s₂ = 2 Im(ψ₊ ψ₋*) / ρ`; `Pauli`
/// is the textbook `⟨σ_y⟩ = 2 Im(ψ₊* ψ₋) / ρ`. The two differ by a sign in
/// `s₂` only, which reverses the orientation of the spin map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinConvention {
    #[default]
    Kernel,
    Pauli,
}

impl SpinConvention {
    pub(crate) fn spin2_sign(self) -> f64 {
        match self {
            SpinConvention::Kernel => 1.0,
            SpinConvention::Pauli => -1.0,
        }
    }

    /// Orientation of the spin map relative to the textbook convention.
    pub fn orientation(self) -> f64 {
        -self.spin2_sign()
    }
}

/// Observable kernels `ĉ_{s,s'}(k, k')`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Density,
    /// Momentum component along the given axis (0-based).
    Momentum(usize),
    Spin1,
    Spin2,
    Spin3,
}

impl KernelKind {
    /// `true` for kernels with `ĉ₊₋ = ĉ₋₊ = 0`.
    pub fn is_spin_diagonal(self) -> bool {
        matches!(self, KernelKind::Density | KernelKind::Momentum(_) | KernelKind::Spin3)
    }

    pub fn label(self) -> String {
        match self {
            KernelKind::Density => "density".into(),
            KernelKind::Momentum(a) => format!("momentum{a}"),
            KernelKind::Spin1 => "spin1".into(),
            KernelKind::Spin2 => "spin2".into(),
            KernelKind::Spin3 => "spin3".into(),
        }
    }

    /// Kernel value for integer wavenumbers `k`, `k'`; momentum kernels are
    /// scaled by the grid's fundamental wavenumber `k_unit`.
    pub fn coefficient(
        self,
        s: Spin,
        s_prime: Spin,
        k: &[i64],
        k_prime: &[i64],
        k_unit: f64,
        convention: SpinConvention,
    ) -> Complex64 {
        use Spin::{Down, Up};
        match (self, s, s_prime) {
            (KernelKind::Density, Up, Up) | (KernelKind::Density, Down, Down) => ONE,
            (KernelKind::Momentum(a), Up, Up) | (KernelKind::Momentum(a), Down, Down) => {
                Complex64::new((k[a] as f64 / 2.0 + k_prime[a] as f64) * k_unit, 0.0)
            }
            (KernelKind::Spin1, Up, Down) | (KernelKind::Spin1, Down, Up) => ONE,
            (KernelKind::Spin2, Up, Down) => -I * convention.spin2_sign(),
            (KernelKind::Spin2, Down, Up) => I * convention.spin2_sign(),
            (KernelKind::Spin3, Up, Up) => ONE,
            (KernelKind::Spin3, Down, Down) => -ONE,
            _ => ZERO,
        }
    }

    fn check(self, grid: &GridSpec) -> Result<()> {
        match self {
            KernelKind::Momentum(a) if a >= grid.dims() => Err(Error::domain(format!(
                "momentum axis {a} on a {}-dimensional grid",
                grid.dims()
            ))),
            _ => Ok(()),
        }
    }
}

/// Every kernel available on `grid`, in a fixed order.
pub fn all_kernels(grid: &GridSpec) -> Vec<KernelKind> {
    let mut out = vec![KernelKind::Density];
    out.extend((0..grid.dims()).map(KernelKind::Momentum));
    out.extend([KernelKind::Spin1, KernelKind::Spin2, KernelKind::Spin3]);
    out
}

/// Brute-force truncated convolution `Q̂(k)` for one in-band `k`.
pub fn convolve_observable_direct(
    spinor: &SpinorField,
    kind: KernelKind,
    k: &[i64],
    convention: SpinConvention,
) -> Result<Complex64> {
    let grid = spinor.grid();
    kind.check(grid)?;
    grid.flat_of_wavenumbers(k)?;
    let k_unit = grid.k_unit();
    let sets = k
        .iter()
        .zip(grid.n_alpha())
        .map(|(&ka, &n)| lattice::summation_set_k(ka, n))
        .collect::<Result<Vec<_>>>()?;
    let positions: Vec<Vec<usize>> = sets.iter().map(|s| (0..s.len()).collect()).collect();
    let pairs: Vec<(Spin, Spin)> = Spin::BOTH
        .iter()
        .flat_map(|&s| Spin::BOTH.iter().map(move |&t| (s, t)))
        .collect();

    let mut kp = vec![0i64; k.len()];
    let mut kk = vec![0i64; k.len()];
    let mut total = ZERO;
    let mut err = None;
    lattice::for_each_product(&positions, |pos| {
        for (a, &p) in pos.iter().enumerate() {
            kp[a] = sets[a][p];
            kk[a] = k[a] + kp[a];
        }
        let (Ok(fp), Ok(fk)) = (grid.flat_of_wavenumbers(&kp), grid.flat_of_wavenumbers(&kk)) else {
            err.get_or_insert_with(|| Error::domain("summation set left the band"));
            return;
        };
        for &(s, t) in &pairs {
            let c = kind.coefficient(s, t, k, &kp, k_unit, convention);
            if c != ZERO {
                total += c * spinor.component(s)[fk] * spinor.component(t)[fp].conj();
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Sparse square matrix stored as `(row, col, value)` triples, sorted by
/// `(row, col)` with no duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOperator {
    /// Builds an operator, summing duplicate positions and dropping zeros.
    pub fn from_triples(dim: usize, triples: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for (r, c, v) in triples {
            if r >= dim || c >= dim {
                return Err(Error::domain(format!("entry ({r}, {c}) outside a {dim}x{dim} operator")));
            }
            *map.entry((r, c)).or_insert(ZERO) += v;
        }
        Ok(Self {
            dim,
            entries: map
                .into_iter()
                .filter(|(_, v)| *v != ZERO)
                .map(|((r, c), v)| (r, c, v))
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn adjoint(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        Self { dim: self.dim, entries }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let adj = self.adjoint();
        let diff = Self::from_triples(
            self.dim,
            self.entries
                .iter()
                .copied()
                .chain(adj.entries.iter().map(|&(r, c, v)| (r, c, -v))),
        )
        .expect("same dimension");
        diff.entries.iter().all(|(_, _, v)| v.norm() <= tol)
    }

    /// `⟨ψ|Q|ψ⟩ = Σ Q_rc ψ_r* ψ_c`.
    pub fn expectation(&self, psi: &[Complex64]) -> Result<Complex64> {
        if psi.len() != self.dim {
            return Err(Error::GridMismatch {
                expected: format!("{} amplitudes", self.dim),
                found: psi.len().to_string(),
            });
        }
        Ok(self
            .entries
            .iter()
            .map(|&(r, c, v)| v * psi[r].conj() * psi[c])
            .sum())
    }

    /// Dense copy, row-major; for small operators only.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut out = vec![vec![ZERO; self.dim]; self.dim];
        for &(r, c, v) in &self.entries {
            out[r][c] += v;
        }
        out
    }
}

/// Operator whose expectation in the spin-`s` state yields that spin's
/// contribution to `Q̂(k)` for a spin-diagonal kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementOperator {
    kind: KernelKind,
    k_target: Vec<i64>,
    operator: SparseOperator,
}

impl MeasurementOperator {
    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn k_target(&self) -> &[i64] {
        &self.k_target
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.operator
    }

    /// `Σ_s ⟨ψ_s|Q̂|ψ_s⟩`, the operator estimate of `Q̂(k)`.
    ///
    /// Density and momentum kernels are identical for both spins, so one
    /// operator serves both components.
    pub fn expectation(&self, spinor: &SpinorField) -> Result<Complex64> {
        Ok(self.operator.expectation(spinor.psi_plus())? + self.operator.expectation(spinor.psi_minus())?)
    }
}

/// Builds the measurement operator for a density or momentum kernel at the
/// lattice multi-index `j`.
///
/// The operator is `Σ_{j'} 𝒞(j, j') |n(j')⟩⟨m(j, j')|`, where `m` addresses
/// the coupled wavenumber `k(j) + k(j')` and `𝒞 = k_α/2 + k'_α` for momentum.
pub fn build_measurement_operator(kind: KernelKind, j: &[usize], grid: &GridSpec) -> Result<MeasurementOperator> {
    build_measurement_operator_with(kind, j, grid, |k, kp| {
        kind.coefficient(Spin::Up, Spin::Up, k, kp, grid.k_unit(), SpinConvention::Kernel)
    })
}

/// [`build_measurement_operator`] with an explicit coefficient function of
/// `(k, k')`; used to audit that the oracle comparisons catch wrong kernels.
pub fn build_measurement_operator_with(
    kind: KernelKind,
    j: &[usize],
    grid: &GridSpec,
    coefficient: impl Fn(&[i64], &[i64]) -> Complex64,
) -> Result<MeasurementOperator> {
    if !matches!(kind, KernelKind::Density | KernelKind::Momentum(_)) {
        return Err(Error::Unsupported(format!(
            "measurement operators are built for density and momentum only, not {}",
            kind.label()
        )));
    }
    kind.check(grid)?;
    let flat_j = grid.flat_index(j)?;
    let k = grid.wavenumbers(flat_j);
    let sets = j
        .iter()
        .zip(grid.n_alpha())
        .map(|(&ja, &n)| lattice::summation_set_j(ja, n))
        .collect::<Result<Vec<_>>>()?;
    let mut triples = Vec::new();
    let mut err = None;
    lattice::for_each_product(&sets, |jp| {
        let built = (|| -> Result<(usize, usize, Complex64)> {
            let m = lattice::flat_index_m(j, jp, grid)?;
            let n = lattice::flat_index_n(jp, grid)?;
            Ok((n, m, coefficient(&k, &grid.wavenumbers(n))))
        })();
        match built {
            Ok(t) => triples.push(t),
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(MeasurementOperator {
        kind,
        k_target: k,
        operator: SparseOperator::from_triples(grid.len(), triples)?,
    })
}

/// Splits `Q̂` into Hermitian observables `H₁ = (Q̂ + Q̂†)/2` and
/// `H₂ = (Q̂ − Q̂†)/(2i)`, so that `⟨Q̂⟩ = ⟨H₁⟩ + i⟨H₂⟩`.
pub fn hermitian_split(op: &SparseOperator) -> (SparseOperator, SparseOperator) {
    let adj = op.adjoint();
    let half = Complex64::new(0.5, 0.0);
    let minus_half_i = Complex64::new(0.0, -0.5);
    let h1 = SparseOperator::from_triples(
        op.dim,
        op.entries
            .iter()
            .chain(adj.entries.iter())
            .map(|&(r, c, v)| (r, c, v * half)),
    )
    .expect("same dimension");
    let h2 = SparseOperator::from_triples(
        op.dim,
        op.entries
            .iter()
            .map(|&(r, c, v)| (r, c, v * minus_half_i))
            .chain(adj.entries.iter().map(|&(r, c, v)| (r, c, -v * minus_half_i))),
    )
    .expect("same dimension");
    (h1, h2)
}

/// Both spinor components in physical space.
pub fn physical_spinor(spinor: &SpinorField, transform: &Transform) -> [Vec<Complex64>; 2] {
    [
        transform.synthesize_copy(spinor.psi_plus()),
        transform.synthesize_copy(spinor.psi_minus()),
    ]
}

/// `ρ(x) = Σ_s |ψ_s(x)|²`.
pub fn density_field(spinor: &SpinorField) -> Vec<f64> {
    let t = Transform::for_grid(spinor.grid());
    let [p, m] = physical_spinor(spinor, &t);
    density_from_physical(&p, &m)
}

fn density_from_physical(p: &[Complex64], m: &[Complex64]) -> Vec<f64> {
    p.par_iter().zip(m).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect()
}

/// `J(x) = Σ_s Im(ψ_s* ∇ψ_s)`, one component per grid direction.
pub fn momentum_field(spinor: &SpinorField) -> VectorField {
    let t = Transform::for_grid(spinor.grid());
    let phys = physical_spinor(spinor, &t);
    momentum_from_physical(spinor, &phys, &t)
}

fn momentum_from_physical(spinor: &SpinorField, phys: &[Vec<Complex64>; 2], t: &Transform) -> VectorField {
    let grid = spinor.grid();
    (0..grid.dims())
        .map(|axis| {
            let mut j = vec![0.0; grid.len()];
            for (s, psi) in Spin::BOTH.iter().zip(phys) {
                let mut d = spinor.component(*s).to_vec();
                t.differentiate(&mut d, axis, grid.k_unit(), Nyquist::Keep);
                t.synthesize(&mut d);
                j.par_iter_mut()
                    .zip(psi.par_iter().zip(d.par_iter()))
                    .for_each(|(out, (p, dp))| *out += (p.conj() * dp).im);
            }
            j
        })
        .collect()
}

/// Pointwise bilinear `Σ_{s,s'} ĉ_{s,s'} ψ_s ψ_{s'}*` of a spin kernel.
fn spin_bilinear(kind: KernelKind, p: &[Complex64], m: &[Complex64], convention: SpinConvention) -> Vec<f64> {
    let sign2 = convention.spin2_sign();
    p.par_iter()
        .zip(m)
        .map(|(a, b)| match kind {
            KernelKind::Spin1 => 2.0 * (a * b.conj()).re,
            KernelKind::Spin2 => sign2 * 2.0 * (a * b.conj()).im,
            KernelKind::Spin3 => a.norm_sqr() - b.norm_sqr(),
            _ => unreachable!("not a spin kernel"),
        })
        .collect()
}

/// Spectral coefficients of any observable via pointwise products in
/// physical space. Equals the truncated convolution whenever the spinor is
/// supported in the central half-band of every direction.
pub fn observable_spectrum(spinor: &SpinorField, kind: KernelKind, convention: SpinConvention) -> Result<Vec<Complex64>> {
    let grid = spinor.grid();
    kind.check(grid)?;
    let t = Transform::for_grid(grid);
    let phys = physical_spinor(spinor, &t);
    let field = match kind {
        KernelKind::Density => density_from_physical(&phys[0], &phys[1]),
        KernelKind::Momentum(a) => {
            let mut d = VectorField::new();
            for (i, s) in Spin::BOTH.iter().enumerate() {
                let mut g = spinor.component(*s).to_vec();
                t.differentiate(&mut g, a, grid.k_unit(), Nyquist::Keep);
                t.synthesize(&mut g);
                d.push(
                    phys[i]
                        .par_iter()
                        .zip(&g)
                        .map(|(p, dp)| (p.conj() * dp).im)
                        .collect(),
                );
            }
            d[0].iter().zip(&d[1]).map(|(a, b)| a + b).collect()
        }
        _ => spin_bilinear(kind, &phys[0], &phys[1], convention),
    };
    Ok(t.analyze_real(&field))
}

/// Exact truncated convolution for arbitrary spinor support, computed on a
/// grid zero-padded by the 3/2 rule.
pub fn observable_spectrum_padded(
    spinor: &SpinorField,
    kind: KernelKind,
    convention: SpinConvention,
) -> Result<Vec<Complex64>> {
    let grid = spinor.grid();
    kind.check(grid)?;
    let padded: Vec<usize> = grid.extents().iter().map(|&n| n + n.div_ceil(2)).collect();
    let t = Transform::new(&padded);
    let embed = |coeffs: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![ZERO; t.len()];
        for (f, v) in coeffs.iter().enumerate() {
            out[padded_index(&grid.wavenumbers(f), &padded)] = *v;
        }
        out
    };
    let mut phys = [embed(spinor.psi_plus()), embed(spinor.psi_minus())];
    let mut grads = Vec::new();
    if let KernelKind::Momentum(a) = kind {
        for p in &phys {
            let mut g = t.derivative(p, a, grid.k_unit(), Nyquist::Keep);
            t.synthesize(&mut g);
            grads.push(g);
        }
    }
    for p in phys.iter_mut() {
        t.synthesize(p);
    }
    let field: Vec<f64> = match kind {
        KernelKind::Density => density_from_physical(&phys[0], &phys[1]),
        KernelKind::Momentum(_) => (0..t.len())
            .map(|x| (phys[0][x].conj() * grads[0][x]).im + (phys[1][x].conj() * grads[1][x]).im)
            .collect(),
        _ => spin_bilinear(kind, &phys[0], &phys[1], convention),
    };
    let full = t.analyze_real(&field);
    Ok((0..grid.len())
        .map(|f| full[padded_index(&grid.wavenumbers(f), &padded)])
        .collect())
}

fn padded_index(k: &[i64], extents: &[usize]) -> usize {
    let mut flat = 0;
    let mut stride = 1;
    for (&ka, &n) in k.iter().zip(extents) {
        flat += ka.rem_euclid(n as i64) as usize * stride;
        stride *= n;
    }
    flat
}

/// Largest `|ψ̂(k)|` outside the central half-band `[-h/2, h/2)` of any
/// direction, where `h = 2^{n-1}`; zero means the FFT path is alias-free.
pub fn out_of_half_band(spinor: &SpinorField) -> f64 {
    let grid = spinor.grid();
    (0..grid.len())
        .filter(|&f| !in_half_band(&grid.wavenumbers(f), grid.n_alpha()))
        .map(|f| spinor.psi_plus()[f].norm().max(spinor.psi_minus()[f].norm()))
        .fold(0.0, f64::max)
}

/// Whether a wavenumber lies in the alias-free central half-band.
pub fn in_half_band(k: &[i64], n_alpha: &[u32]) -> bool {
    k.iter().zip(n_alpha).all(|(&ka, &n)| {
        let h = 1i64 << (n - 1);
        ka >= -(h / 2) && ka < h - h / 2
    })
}

/// Velocity plus the count of vacuum-regularized points.
#[derive(Clone, Debug)]
pub struct Velocity {
    pub u: VectorField,
    pub regularized: usize,
    pub eps_rho: f64,
}

/// Vacuum threshold `ε_ρ = 10⁻¹² max ρ`.
pub fn vacuum_threshold(rho: &[f64]) -> f64 {
    VACUUM_RELATIVE * rho.par_iter().copied().reduce(|| 0.0, f64::max)
}

/// `u = J / ρ`, with `u = 0` where `ρ < ε_ρ`.
///
/// Fails with [`Error::Unphysical`] when more than 1% of the points are
/// regularized.
pub fn velocity_field(rho: &[f64], momentum: &VectorField) -> Result<Velocity> {
    for (a, j) in momentum.iter().enumerate() {
        if j.len() != rho.len() {
            return Err(Error::GridMismatch {
                expected: format!("{} points", rho.len()),
                found: format!("{} in momentum component {a}", j.len()),
            });
        }
    }
    let eps = vacuum_threshold(rho);
    let regularized = count_regularized(rho, eps)?;
    let u = momentum
        .iter()
        .map(|j| {
            j.par_iter()
                .zip(rho)
                .map(|(&j, &r)| if r < eps || r == 0.0 { 0.0 } else { j / r })
                .collect()
        })
        .collect();
    Ok(Velocity {
        u,
        regularized,
        eps_rho: eps,
    })
}

fn count_regularized(rho: &[f64], eps: f64) -> Result<usize> {
    let regularized = rho.par_iter().filter(|&&r| r < eps || r == 0.0).count();
    if regularized as f64 > MAX_REGULARIZED_FRACTION * rho.len() as f64 {
        return Err(Error::Unphysical {
            regularized,
            total: rho.len(),
        });
    }
    Ok(regularized)
}

/// Unit spin vector `s = ⟨ψ|σ|ψ⟩ / ρ`; `(0, 0, 1)` at vacuum points.
pub fn spin_field(spinor: &SpinorField, convention: SpinConvention) -> Result<VectorField> {
    let t = Transform::for_grid(spinor.grid());
    let [p, m] = physical_spinor(spinor, &t);
    let rho = density_from_physical(&p, &m);
    let eps = vacuum_threshold(&rho);
    count_regularized(&rho, eps)?;
    Ok(spin_from_physical(&p, &m, &rho, eps, convention))
}

fn spin_from_physical(
    p: &[Complex64],
    m: &[Complex64],
    rho: &[f64],
    eps: f64,
    convention: SpinConvention,
) -> VectorField {
    [KernelKind::Spin1, KernelKind::Spin2, KernelKind::Spin3]
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let mut s = spin_bilinear(kind, p, m, convention);
            s.par_iter_mut().zip(rho).for_each(|(v, &r)| {
                *v = if r < eps || r == 0.0 {
                    if i == 2 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    *v / r
                }
            });
            s
        })
        .collect()
}

/// Physical fields derived from one spinor.
#[derive(Clone, Debug)]
pub struct FieldSet {
    pub grid: GridSpec,
    pub rho: Vec<f64>,
    pub momentum: VectorField,
    pub velocity: VectorField,
    pub spin: VectorField,
    pub regularized: usize,
    pub eps_rho: f64,
    pub convention: SpinConvention,
}

impl FieldSet {
    /// Computes ρ, J, u and s with one synthesis per spinor component.
    pub fn compute(spinor: &SpinorField, convention: SpinConvention) -> Result<Self> {
        let grid = spinor.grid().clone();
        let t = Transform::for_grid(&grid);
        let phys = physical_spinor(spinor, &t);
        let rho = density_from_physical(&phys[0], &phys[1]);
        let momentum = momentum_from_physical(spinor, &phys, &t);
        let vel = velocity_field(&rho, &momentum)?;
        let spin = spin_from_physical(&phys[0], &phys[1], &rho, vel.eps_rho, convention);
        Ok(Self {
            grid,
            rho,
            momentum,
            velocity: vel.u,
            spin,
            regularized: vel.regularized,
            eps_rho: vel.eps_rho,
            convention,
        })
    }

    /// Spectral coefficients of a physical field on this grid.
    pub fn spectral(&self, field: &[f64]) -> Vec<Complex64> {
        Transform::for_grid(&self.grid).analyze_real(field)
    }

    /// Largest `| |s| − 1 |` over non-vacuum points.
    pub fn spin_norm_defect(&self) -> f64 {
        (0..self.grid.len())
            .into_par_iter()
            .filter(|&x| self.rho[x] >= self.eps_rho)
            .map(|x| {
                let n2: f64 = self.spin.iter().map(|c| c[x] * c[x]).sum();
                (n2.sqrt() - 1.0).abs()
            })
            .reduce(|| 0.0, f64::max)
    }
}
