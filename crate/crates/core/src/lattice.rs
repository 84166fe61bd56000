//! Grid geometry and the index/wavenumber algebra of the encoding.
//!
//! A `d`-dimensional grid spends `n_alpha[a]` qubits on direction `a`, giving
//! `2^n_alpha[a]` points per direction. Amplitudes are stored in one flat array
//! with direction 0 as the least-significant block:
//!
//! ```text
//! flat = j_0 + 2^{n_0} j_1 + 2^{n_0 + n_1} j_2 + ...
//! ```
//!
//! Within a direction the sub-index `j` maps to the signed wavenumber `k` in
//! standard DFT order (`0, 1, .., 2^{n-1}-1, -2^{n-1}, .., -1`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest per-direction qubit count accepted by [`GridSpec`].
pub const MAX_QUBITS_PER_DIM: u32 = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n_alpha: Vec<u32>,
    domain_length: f64,
}

impl GridSpec {
    /// Grid over a periodic box of side `2π`.
    pub fn new(n_alpha: &[u32]) -> Result<Self> {
        Self::with_domain_length(n_alpha, std::f64::consts::TAU)
    }

    pub fn with_domain_length(n_alpha: &[u32], domain_length: f64) -> Result<Self> {
        if n_alpha.is_empty() {
            return Err(Error::domain("grid needs at least one dimension"));
        }
        if let Some(&n) = n_alpha.iter().find(|&&n| n == 0 || n > MAX_QUBITS_PER_DIM) {
            return Err(Error::domain(format!(
                "per-dimension qubit count {n} outside 1..={MAX_QUBITS_PER_DIM}"
            )));
        }
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(Error::domain(format!("domain length {domain_length} must be positive")));
        }
        Ok(Self {
            n_alpha: n_alpha.to_vec(),
            domain_length,
        })
    }

    /// Cube with `n` qubits in each of `d` directions.
    pub fn cube(d: usize, n: u32) -> Result<Self> {
        Self::new(&vec![n; d])
    }

    pub fn dims(&self) -> usize {
        self.n_alpha.len()
    }

    pub fn n_alpha(&self) -> &[u32] {
        &self.n_alpha
    }

    pub fn n_q(&self) -> u32 {
        self.n_alpha.iter().sum()
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    /// Grid points along direction `alpha`.
    pub fn extent(&self, alpha: usize) -> usize {
        1usize << self.n_alpha[alpha]
    }

    pub fn extents(&self) -> Vec<usize> {
        (0..self.dims()).map(|a| self.extent(a)).collect()
    }

    /// Total number of amplitudes / grid points.
    pub fn len(&self) -> usize {
        1usize << self.n_q()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of qubits spent on directions before `alpha`.
    pub fn qubit_offset(&self, alpha: usize) -> u32 {
        self.n_alpha[..alpha].iter().sum()
    }

    /// Flat-index stride of direction `alpha`.
    pub fn stride(&self, alpha: usize) -> usize {
        1usize << self.qubit_offset(alpha)
    }

    /// Grid spacing along `alpha`.
    pub fn spacing(&self, alpha: usize) -> f64 {
        self.domain_length / self.extent(alpha) as f64
    }

    /// Fundamental wavenumber `2π / domain_length`.
    pub fn k_unit(&self) -> f64 {
        std::f64::consts::TAU / self.domain_length
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        self.n_alpha
            .iter()
            .scan(flat, |rest, &n| {
                let j = *rest & ((1usize << n) - 1);
                *rest >>= n;
                Some(j)
            })
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> Result<usize> {
        self.check_multi(multi)?;
        Ok(multi
            .iter()
            .enumerate()
            .map(|(a, &j)| j << self.qubit_offset(a))
            .sum())
    }

    /// Signed multi-wavenumber of a flat index.
    pub fn wavenumbers(&self, flat: usize) -> Vec<i64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.n_alpha)
            .map(|(&j, &n)| signed_wavenumber(j, n))
            .collect()
    }

    /// Flat index of an in-band multi-wavenumber.
    pub fn flat_of_wavenumbers(&self, k: &[i64]) -> Result<usize> {
        if k.len() != self.dims() {
            return Err(Error::domain(format!(
                "wavenumber has {} components, grid has {} dimensions",
                k.len(),
                self.dims()
            )));
        }
        let mut flat = 0;
        for (a, (&ka, &n)) in k.iter().zip(&self.n_alpha).enumerate() {
            flat |= wavenumber_to_index(ka, n)? << self.qubit_offset(a);
        }
        Ok(flat)
    }

    /// `|k|²` in integer units for every flat index.
    pub fn k_squared(&self) -> Vec<i64> {
        (0..self.len())
            .map(|f| self.wavenumbers(f).iter().map(|k| k * k).sum())
            .collect()
    }

    fn check_multi(&self, multi: &[usize]) -> Result<()> {
        if multi.len() != self.dims() {
            return Err(Error::domain(format!(
                "multi-index has {} components, grid has {} dimensions",
                multi.len(),
                self.dims()
            )));
        }
        for (a, &j) in multi.iter().enumerate() {
            if j >= self.extent(a) {
                return Err(Error::domain(format!(
                    "sub-index {j} out of range for direction {a} (extent {})",
                    self.extent(a)
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ext: Vec<String> = self.extents().iter().map(|e| e.to_string()).collect();
        write!(f, "{}", ext.join("x"))
    }
}

#[inline]
fn half(n: u32) -> i64 {
    1i64 << (n - 1)
}

#[inline]
fn signed_wavenumber(j: usize, n: u32) -> i64 {
    let size = 1i64 << n;
    (j as i64 + half(n)).rem_euclid(size) - half(n)
}

fn check_n(n: u32) -> Result<()> {
    if n == 0 || n > 62 {
        return Err(Error::domain(format!("qubit count {n} outside 1..=62")));
    }
    Ok(())
}

fn check_k(k: i64, n: u32) -> Result<()> {
    check_n(n)?;
    if k < -half(n) || k > half(n) - 1 {
        return Err(Error::domain(format!(
            "wavenumber {k} outside band [{}, {}]",
            -half(n),
            half(n) - 1
        )));
    }
    Ok(())
}

fn check_j(j: usize, n: u32) -> Result<()> {
    check_n(n)?;
    if j as u128 >= 1u128 << n {
        return Err(Error::domain(format!("sub-index {j} outside 0..2^{n}")));
    }
    Ok(())
}

/// `k = mod(j + 2^{n-1}, 2^n) - 2^{n-1}`.
pub fn index_to_wavenumber(j: usize, n: u32) -> Result<i64> {
    check_j(j, n)?;
    Ok(signed_wavenumber(j, n))
}

/// `j = k + 2^n (1 - H(k))` with `H(0) = 1`.
pub fn wavenumber_to_index(k: i64, n: u32) -> Result<usize> {
    check_k(k, n)?;
    let heaviside = i64::from(k >= 0);
    Ok((k + (1i64 << n) * (1 - heaviside)) as usize)
}

/// Wavenumbers `k'` in the band whose partner `k + k'` is also in the band,
/// ascending.
pub fn summation_set_k(k: i64, n: u32) -> Result<Vec<i64>> {
    check_k(k, n)?;
    let lo = (-half(n)).max(-half(n) - k);
    let hi = (half(n) - 1).min(half(n) - 1 - k);
    Ok((lo..=hi).collect())
}

/// Index-space counterpart of [`summation_set_k`], ascending.
pub fn summation_set_j(j: usize, n: u32) -> Result<Vec<usize>> {
    check_j(j, n)?;
    let h = 1usize << (n - 1);
    let size = 1usize << n;
    let set = if j < h {
        (0..h - j).chain(h..size).collect()
    } else {
        (0..h).chain(3 * h - j..size).collect()
    };
    Ok(set)
}

/// Flat index of the coupled wavenumber `k(j) + k(j')`.
///
/// Errors when `j'_a` is not in `summation_set_j(j_a)` for some direction,
/// i.e. when the coupled wavenumber falls off the band.
pub fn flat_index_m(j: &[usize], j_prime: &[usize], grid: &GridSpec) -> Result<usize> {
    grid.check_multi(j)?;
    grid.check_multi(j_prime)?;
    let mut flat = 0;
    for (a, &n) in grid.n_alpha().iter().enumerate() {
        let k = signed_wavenumber(j[a], n) + signed_wavenumber(j_prime[a], n);
        let sub = wavenumber_to_index(k, n).map_err(|_| {
            Error::domain(format!(
                "pair ({}, {}) in direction {a} couples to wavenumber {k} outside the band",
                j[a], j_prime[a]
            ))
        })?;
        flat |= sub << grid.qubit_offset(a);
    }
    Ok(flat)
}

/// Flat index of the multi-index `j'` (the ket/bra label of the second factor).
pub fn flat_index_n(j_prime: &[usize], grid: &GridSpec) -> Result<usize> {
    grid.flat_index(j_prime)
}

/// Calls `f` with every element of the Cartesian product of `sets`, first
/// component varying fastest.
pub(crate) fn for_each_product(sets: &[Vec<usize>], mut f: impl FnMut(&[usize])) {
    let mut cur = vec![0usize; sets.len()];
    let mut pos = vec![0usize; sets.len()];
    if sets.iter().any(|s| s.is_empty()) {
        return;
    }
    loop {
        for (a, s) in sets.iter().enumerate() {
            cur[a] = s[pos[a]];
        }
        f(&cur);
        let mut a = 0;
        loop {
            if a == sets.len() {
                return;
            }
            pos[a] += 1;
            if pos[a] < sets[a].len() {
                break;
            }
            pos[a] = 0;
            a += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_wavenumber_examples() {
        assert_eq!(index_to_wavenumber(0, 3).unwrap(), 0);
        assert_eq!(index_to_wavenumber(4, 3).unwrap(), -4);
        assert_eq!(index_to_wavenumber(7, 3).unwrap(), -1);
        assert_eq!(wavenumber_to_index(0, 3).unwrap(), 0);
        assert_eq!(wavenumber_to_index(-4, 3).unwrap(), 4);
        assert_eq!(wavenumber_to_index(3, 4).unwrap(), 3);
        assert!(index_to_wavenumber(8, 3).is_err());
        assert!(wavenumber_to_index(4, 3).is_err());
        assert!(wavenumber_to_index(-5, 3).is_err());
    }

    #[test]
    fn summation_set_examples() {
        assert_eq!(summation_set_k(0, 2).unwrap(), vec![-2, -1, 0, 1]);
        assert_eq!(summation_set_k(1, 2).unwrap(), vec![-2, -1, 0]);
        assert_eq!(summation_set_k(-2, 2).unwrap(), vec![0, 1]);
        assert_eq!(summation_set_j(0, 2).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(summation_set_j(1, 2).unwrap(), vec![0, 2, 3]);
        assert_eq!(summation_set_j(2, 2).unwrap(), vec![0, 1]);
        assert!(summation_set_j(4, 2).is_err());
    }

    #[test]
    fn flat_index_examples() {
        let g1 = GridSpec::new(&[2]).unwrap();
        assert_eq!(flat_index_m(&[0], &[0], &g1).unwrap(), 0);
        assert_eq!(flat_index_m(&[1], &[3], &g1).unwrap(), 0);
        let g2 = GridSpec::new(&[2, 2]).unwrap();
        assert_eq!(flat_index_m(&[1, 0], &[0, 0], &g2).unwrap(), 1);

        assert_eq!(flat_index_n(&[0], &g1).unwrap(), 0);
        assert_eq!(flat_index_n(&[3], &g1).unwrap(), 3);
        assert_eq!(flat_index_n(&[1, 2], &g2).unwrap(), 9);
    }

    #[test]
    fn coupled_pair_off_band_is_rejected() {
        let g = GridSpec::new(&[2]).unwrap();
        // k(1) = 1, k(1) = 1 -> 2 is outside [-2, 1]
        assert!(flat_index_m(&[1], &[1], &g).is_err());
    }

    #[test]
    fn round_trip_exhaustive() {
        for n in 1..=10 {
            for j in 0..(1usize << n) {
                let k = index_to_wavenumber(j, n).unwrap();
                assert!((-(1 << (n - 1))..(1 << (n - 1))).contains(&k));
                assert_eq!(wavenumber_to_index(k, n).unwrap(), j);
            }
        }
    }

    #[test]
    fn summation_sets_agree_exhaustive() {
        for n in 1..=6 {
            for j in 0..(1usize << n) {
                let k = index_to_wavenumber(j, n).unwrap();
                let ks = summation_set_k(k, n).unwrap();
                assert_eq!(ks.len() as i64, (1i64 << n) - k.abs());
                let mut image: Vec<usize> =
                    ks.iter().map(|&kp| wavenumber_to_index(kp, n).unwrap()).collect();
                image.sort_unstable();
                assert_eq!(image, summation_set_j(j, n).unwrap(), "n={n} j={j}");
            }
        }
    }

    #[test]
    fn flat_index_m_couples_wavenumbers_exhaustive() {
        for dims in [vec![8], vec![4, 4], vec![3, 2, 3], vec![2, 3]] {
            let grid = GridSpec::new(&dims).unwrap();
            for f in 0..grid.len() {
                let j = grid.multi_index(f);
                let kj = grid.wavenumbers(f);
                let sets: Vec<Vec<usize>> = j
                    .iter()
                    .zip(grid.n_alpha())
                    .map(|(&ja, &n)| summation_set_j(ja, n).unwrap())
                    .collect();
                for_each_product(&sets, |jp| {
                    let m = flat_index_m(&j, jp, &grid).unwrap();
                    assert!(m < grid.len());
                    let kjp = grid.wavenumbers(grid.flat_index(jp).unwrap());
                    let km = grid.wavenumbers(m);
                    for a in 0..grid.dims() {
                        assert_eq!(km[a], kj[a] + kjp[a]);
                    }
                });
            }
        }
    }

    #[test]
    fn grid_geometry() {
        let g = GridSpec::new(&[3, 2, 1]).unwrap();
        assert_eq!(g.n_q(), 6);
        assert_eq!(g.len(), 64);
        assert_eq!(g.extents(), vec![8, 4, 2]);
        assert_eq!(g.stride(2), 32);
        assert_eq!(g.multi_index(g.flat_index(&[5, 3, 1]).unwrap()), vec![5, 3, 1]);
        assert_eq!(g.to_string(), "8x4x2");
        assert!(GridSpec::new(&[]).is_err());
        assert!(GridSpec::new(&[0, 2]).is_err());
    }
}
