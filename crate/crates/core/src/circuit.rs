//! The shallow encoding circuit.
//!
//! Each of the `R` modules applies, to every qubit, `r` consecutive U3
//! rotations with normally distributed angles scaled by a spectrum-shaping
//! factor, followed by CX gates over a module-specific list of qubit pairs.
//! Qubits are numbered from 1 and qubit `m` drives bit `m - 1` of the flat
//! amplitude index.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::GridSpec;

/// Row-major 2x2 complex matrix.
pub type Mat2 = [[Complex64; 2]; 2];

/// Ordered (control, target) pair, 1-based.
pub type QubitPair = (u32, u32);

/// Parameters of the shaping factor `κ^{-λ} f_L(κL) f_η(κη)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingParams {
    pub lambda: f64,
    /// Integral length scale `L`.
    #[serde(rename = "L")]
    pub integral_scale: f64,
    #[serde(rename = "c_L")]
    pub c_l: f64,
    pub p0: f64,
    pub eta: f64,
    pub c_eta: f64,
    pub beta: f64,
}

impl ShapingParams {
    /// The 27-qubit reference parameters.
    pub fn reference() -> Self {
        Self {
            lambda: 5.0 / 3.0,
            integral_scale: std::f64::consts::TAU,
            c_l: 1.0,
            p0: 2.0,
            eta: 0.01,
            c_eta: 0.01,
            beta: 15.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.integral_scale > 0.0, "L must be > 0"),
            (self.eta > 0.0, "eta must be > 0"),
            (self.beta >= 0.0, "beta must be >= 0"),
            (self.c_l >= 0.0, "c_L must be >= 0"),
            (self.c_eta >= 0.0, "c_eta must be >= 0"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(format!("shaping: {msg}")));
            }
        }
        let all = [
            self.lambda,
            self.integral_scale,
            self.c_l,
            self.p0,
            self.eta,
            self.c_eta,
            self.beta,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("shaping: parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn factor(&self, kappa: f64) -> f64 {
        shaping_factor(kappa, self)
    }
}

/// `κ^{-λ} (κL / √((κL)² + c_L))^{p₀+λ} exp(-β{[(κη)⁴ + c_η⁴]^{1/4} - c_η})`.
pub fn shaping_factor(kappa: f64, p: &ShapingParams) -> f64 {
    let kl = kappa * p.integral_scale;
    let large = (kl / (kl * kl + p.c_l).sqrt()).powf(p.p0 + p.lambda);
    let ke = kappa * p.eta;
    let small = (-p.beta * ((ke.powi(4) + p.c_eta.powi(4)).powf(0.25) - p.c_eta)).exp();
    kappa.powf(-p.lambda) * large * small
}

/// Wavenumber magnitude `2^{m-1-offset}` carried by global qubit `m`.
pub fn qubit_wavenumber(m: u32, grid: &GridSpec) -> Result<f64> {
    let (_, local) = qubit_direction(m, grid)?;
    Ok((local as f64).exp2())
}

/// Direction of qubit `m` and its 0-based position inside that direction.
pub fn qubit_direction(m: u32, grid: &GridSpec) -> Result<(usize, u32)> {
    if m == 0 || m > grid.n_q() {
        return Err(Error::domain(format!(
            "qubit {m} outside 1..={}",
            grid.n_q()
        )));
    }
    let mut offset = 0;
    for (a, &n) in grid.n_alpha().iter().enumerate() {
        if m <= offset + n {
            return Ok((a, m - 1 - offset));
        }
        offset += n;
    }
    unreachable!("m <= n_q was checked")
}

/// General single-qubit rotation
/// `[[cos(θ/2), -e^{iγ} sin(θ/2)], [e^{iφ} sin(θ/2), e^{i(φ+γ)} cos(θ/2)]]`.
pub fn u3_matrix(theta: f64, phi: f64, gamma: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), -Complex64::from_polar(s, gamma)],
        [
            Complex64::from_polar(s, phi),
            Complex64::from_polar(c, phi + gamma),
        ],
    ]
}

pub(crate) fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub grid: GridSpec,
    /// U3 repetitions per qubit per module (`r`).
    pub reps: u32,
    /// One CX pair list per module; the module count `R` is its length.
    pub pair_sets: Vec<Vec<QubitPair>>,
    pub shaping: ShapingParams,
    pub seed: u64,
}

impl CircuitSpec {
    pub fn modules(&self) -> usize {
        self.pair_sets.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.shaping.validate()?;
        let n_q = self.grid.n_q();
        for (l, set) in self.pair_sets.iter().enumerate() {
            for &(i, j) in set {
                if i == j || i == 0 || j == 0 || i > n_q || j > n_q {
                    return Err(Error::Config(format!(
                        "pairs.{}: invalid pair ({i}, {j}); qubits are 1..={n_q} and must differ",
                        l + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of gates `build_circuit` emits.
    pub fn gate_count(&self) -> usize {
        let singles = self.grid.n_q() as usize * self.reps as usize * self.modules();
        singles + self.pair_sets.iter().map(Vec::len).sum::<usize>()
    }
}

/// Angles `(θ, φ, γ)` indexed by qubit `m` (1-based), repetition `l` and
/// module `ℓ` (both 0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct AngleTable {
    n_q: u32,
    reps: u32,
    modules: usize,
    angles: Vec<[f64; 3]>,
}

impl AngleTable {
    pub fn get(&self, m: u32, l: u32, module: usize) -> [f64; 3] {
        self.angles[self.slot(m, l, module)]
    }

    pub fn n_q(&self) -> u32 {
        self.n_q
    }

    pub fn reps(&self) -> u32 {
        self.reps
    }

    pub fn modules(&self) -> usize {
        self.modules
    }

    /// All angles in draw order.
    pub fn as_slice(&self) -> &[[f64; 3]] {
        &self.angles
    }

    fn slot(&self, m: u32, l: u32, module: usize) -> usize {
        assert!(m >= 1 && m <= self.n_q && l < self.reps && module < self.modules);
        (module * self.n_q as usize + (m - 1) as usize) * self.reps as usize + l as usize
    }
}

/// Draws every rotation angle as `ξ · shaping_factor(κ(m))`, `ξ ~ N(0, 1)`
/// independent per angle.
///
/// Draw order: module outer, qubit middle, repetition inner, then θ, φ, γ.
pub fn sample_angles(spec: &CircuitSpec) -> Result<AngleTable> {
    spec.shaping.validate()?;
    let n_q = spec.grid.n_q();
    let scale: Vec<f64> = (1..=n_q)
        .map(|m| qubit_wavenumber(m, &spec.grid).map(|k| spec.shaping.factor(k)))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let total = spec.modules() * n_q as usize * spec.reps as usize;
    let mut angles = Vec::with_capacity(total);
    for _module in 0..spec.modules() {
        for f in &scale {
            for _ in 0..spec.reps {
                let mut draw = || -> f64 {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    xi * f
                };
                angles.push([draw(), draw(), draw()]);
            }
        }
    }
    Ok(AngleTable {
        n_q,
        reps: spec.reps,
        modules: spec.modules(),
        angles,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    U3 {
        qubit: u32,
        theta: f64,
        phi: f64,
        gamma: f64,
    },
    Cx {
        control: u32,
        target: u32,
    },
}

impl Gate {
    pub fn u3(qubit: u32, theta: f64, phi: f64, gamma: f64) -> Self {
        Gate::U3 {
            qubit,
            theta,
            phi,
            gamma,
        }
    }

    pub fn cx(control: u32, target: u32) -> Self {
        Gate::Cx { control, target }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateList {
    n_q: u32,
    gates: Vec<Gate>,
}

impl GateList {
    pub fn new(n_q: u32, gates: Vec<Gate>) -> Result<Self> {
        let list = Self { n_q, gates };
        list.validate()?;
        Ok(list)
    }

    pub fn empty(n_q: u32) -> Self {
        Self {
            n_q,
            gates: Vec::new(),
        }
    }

    pub fn n_q(&self) -> u32 {
        self.n_q
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        check_gate(&gate, self.n_q)?;
        self.gates.push(gate);
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.gates.iter().try_for_each(|g| check_gate(g, self.n_q))
    }

    /// One gate per line: `u3 q<m> <θ> <φ> <γ>` or `cx q<i> q<j>`, angles
    /// with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.gates.len() * 72);
        for g in &self.gates {
            match *g {
                Gate::U3 {
                    qubit,
                    theta,
                    phi,
                    gamma,
                } => writeln!(out, "u3 q{qubit} {theta:.16e} {phi:.16e} {gamma:.16e}"),
                Gate::Cx { control, target } => writeln!(out, "cx q{control} q{target}"),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }

    /// Parses the format written by [`GateList::to_text`]. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse_text(text: &str, n_q: u32) -> Result<Self> {
        let mut gates = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| Error::Config(format!("gate list line {}: {why}: `{line}`", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            let qubit = |s: &str| -> Result<u32> {
                s.strip_prefix('q')
                    .and_then(|q| q.parse().ok())
                    .ok_or_else(|| bad("bad qubit label"))
            };
            let angle = |s: &str| -> Result<f64> { s.parse().map_err(|_| bad("bad angle")) };
            let gate = match fields.as_slice() {
                ["u3", q, t, p, g] => Gate::u3(qubit(q)?, angle(t)?, angle(p)?, angle(g)?),
                ["cx", c, t] => Gate::cx(qubit(c)?, qubit(t)?),
                _ => return Err(bad("unrecognised gate")),
            };
            check_gate(&gate, n_q).map_err(|e| bad(&e.to_string()))?;
            gates.push(gate);
        }
        Ok(Self { n_q, gates })
    }
}

fn check_gate(g: &Gate, n_q: u32) -> Result<()> {
    let in_range = |q: u32| q >= 1 && q <= n_q;
    match *g {
        Gate::U3 { qubit, .. } if !in_range(qubit) => {
            Err(Error::domain(format!("U3 qubit {qubit} outside 1..={n_q}")))
        }
        Gate::Cx { control, target } if !in_range(control) || !in_range(target) => Err(
            Error::domain(format!("CX({control}, {target}) outside 1..={n_q}")),
        ),
        Gate::Cx { control, target } if control == target => Err(Error::domain(format!(
            "CX control and target are both qubit {control}"
        ))),
        _ => Ok(()),
    }
}

/// Expands a spec into its gate sequence: per module, the rotation layer
/// (qubit by qubit, `r` U3s each) and then the module's CX pairs in order.
pub fn build_circuit(spec: &CircuitSpec) -> Result<GateList> {
    spec.validate()?;
    let angles = sample_angles(spec)?;
    let n_q = spec.grid.n_q();
    let mut gates = Vec::with_capacity(spec.gate_count());
    for (module, pairs) in spec.pair_sets.iter().enumerate() {
        for m in 1..=n_q {
            for l in 0..spec.reps {
                let [theta, phi, gamma] = angles.get(m, l, module);
                gates.push(Gate::u3(m, theta, phi, gamma));
            }
        }
        gates.extend(pairs.iter().map(|&(c, t)| Gate::cx(c, t)));
    }
    Ok(GateList { n_q, gates })
}

/// CX pair sets of the 27-qubit (9 qubits per direction) reference circuit.
pub fn reference_pair_sets() -> Vec<Vec<QubitPair>> {
    vec![
        vec![
            (1, 3),
            (2, 4),
            (5, 6),
            (8, 9),
            (9, 7),
            (10, 12),
            (11, 13),
            (14, 15),
            (17, 18),
            (18, 16),
            (19, 21),
            (20, 22),
            (23, 24),
            (26, 27),
            (27, 25),
        ],
        vec![
            (1, 11),
            (10, 20),
            (19, 2),
            (3, 13),
            (12, 22),
            (21, 4),
            (3, 12),
            (12, 21),
            (21, 3),
        ],
        vec![
            (2, 12),
            (11, 21),
            (20, 3),
            (1, 13),
            (10, 22),
            (19, 4),
            (4, 13),
            (13, 22),
            (22, 4),
        ],
        vec![
            (1, 12),
            (10, 21),
            (19, 3),
            (2, 13),
            (11, 22),
            (20, 4),
            (5, 14),
            (14, 23),
            (23, 5),
        ],
    ]
}

/// The reference pair sets carried over to a cube with `n` qubits per
/// direction (`6 <= n`). Local labels 1..=6 are kept; the three highest
/// local labels 7, 8, 9 move to `n-2, n-1, n` so that pairs which couple the
/// top of a direction keep doing so.
pub fn scaled_pair_sets(n: u32) -> Result<Vec<Vec<QubitPair>>> {
    const REF_N: u32 = 9;
    if n < 6 {
        return Err(Error::Config(format!(
            "reference pair sets need at least 6 qubits per direction, got {n}"
        )));
    }
    let remap = |q: u32| {
        let dir = (q - 1) / REF_N;
        let local = (q - 1) % REF_N + 1;
        let local = if local <= 6 { local } else { local + n - REF_N };
        dir * n + local
    };
    Ok(reference_pair_sets()
        .into_iter()
        .map(|set| set.into_iter().map(|(c, t)| (remap(c), remap(t))).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn assert_mat(a: &Mat2, b: [[(f64, f64); 2]; 2]) {
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(a[i][j].re, b[i][j].0, epsilon = 1e-15);
                assert_abs_diff_eq!(a[i][j].im, b[i][j].1, epsilon = 1e-15);
            }
        }
    }

    fn unitarity_defect(u: &Mat2) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let v = u[0][i].conj() * u[0][j] + u[1][i].conj() * u[1][j];
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }

    fn spec(n_alpha: &[u32], reps: u32, pairs: Vec<Vec<QubitPair>>, seed: u64) -> CircuitSpec {
        CircuitSpec {
            grid: GridSpec::new(n_alpha).unwrap(),
            reps,
            pair_sets: pairs,
            shaping: ShapingParams::reference(),
            seed,
        }
    }

    #[test]
    fn u3_examples() {
        assert_mat(&u3_matrix(0.0, 0.0, 0.0), [[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (1.0, 0.0)]]);
        assert_mat(&u3_matrix(PI, 0.0, PI), [[(0.0, 0.0), (1.0, 0.0)], [(1.0, 0.0), (0.0, 0.0)]]);
        let h = FRAC_1_SQRT_2;
        assert_mat(
            &u3_matrix(PI / 2.0, PI / 2.0, 0.0),
            [[(h, 0.0), (-h, 0.0)], [(0.0, h), (0.0, h)]],
        );
    }

    #[test]
    fn qubit_wavenumber_examples() {
        let g = GridSpec::new(&[9, 9, 9]).unwrap();
        assert_eq!(qubit_wavenumber(1, &g).unwrap(), 1.0);
        assert_eq!(qubit_wavenumber(9, &g).unwrap(), 256.0);
        assert_eq!(qubit_wavenumber(10, &g).unwrap(), 1.0);
        assert_eq!(qubit_wavenumber(27, &g).unwrap(), 256.0);
        assert!(qubit_wavenumber(0, &g).is_err());
        assert!(qubit_wavenumber(28, &g).is_err());
        let uneven = GridSpec::new(&[2, 3]).unwrap();
        assert_eq!(qubit_wavenumber(3, &uneven).unwrap(), 1.0);
        assert_eq!(qubit_wavenumber(5, &uneven).unwrap(), 4.0);
    }

    #[test]
    fn shaping_factor_limits() {
        let p = ShapingParams::reference();
        assert!(shaping_factor(1e6, &p) < 1e-300);
        let flat = ShapingParams {
            lambda: 0.0,
            c_l: 0.0,
            beta: 0.0,
            ..p.clone()
        };
        for k in [0.5, 1.0, 7.0, 300.0] {
            assert_abs_diff_eq!(shaping_factor(k, &flat), 1.0, epsilon = 1e-15);
        }
    }

    /// Frozen values from a 40-digit evaluation of the closed form.
    #[test]
    fn shaping_factor_frozen_values() {
        let p = ShapingParams::reference();
        let cases = [
            (1.0, 0.928_447_414_203_141_6),
            (2.0, 0.266_761_602_923_464_8),
            (256.0, 2.368_658_673_951_424e-21),
        ];
        for (k, expect) in cases {
            let got = shaping_factor(k, &p);
            assert!(((got - expect) / expect).abs() < 1e-12, "f({k}) = {got:e}");
        }
    }

    #[test]
    fn shaping_factor_reference_monotone() {
        let p = ShapingParams::reference();
        let vals: Vec<f64> = (1..=256).map(|k| shaping_factor(k as f64, &p)).collect();
        assert!(vals.iter().all(|&v| v > 0.0));
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn build_structure() {
        let s = spec(&[1, 1], 1, vec![vec![(1, 2)]], 3);
        let c = build_circuit(&s).unwrap();
        assert_eq!(c.len(), 3);
        assert!(matches!(c.gates()[0], Gate::U3 { qubit: 1, .. }));
        assert!(matches!(c.gates()[1], Gate::U3 { qubit: 2, .. }));
        assert_eq!(c.gates()[2], Gate::cx(1, 2));

        let none = spec(&[2, 2], 3, vec![], 3);
        assert!(build_circuit(&none).unwrap().is_empty());
    }

    #[test]
    fn reference_gate_count() {
        let s = spec(&[9, 9, 9], 10, reference_pair_sets(), 0);
        assert_eq!(s.gate_count(), 1122);
        assert_eq!(build_circuit(&s).unwrap().len(), 1122);
    }

    #[test]
    fn invalid_pairs_rejected() {
        for bad in [(0, 2), (2, 2), (1, 5)] {
            let s = spec(&[2, 2], 1, vec![vec![bad]], 0);
            assert!(matches!(build_circuit(&s), Err(Error::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = spec(&[3, 3], 4, vec![vec![], vec![]], 42);
        assert_eq!(sample_angles(&s).unwrap(), sample_angles(&s).unwrap());
        let other = CircuitSpec { seed: 43, ..s.clone() };
        assert_ne!(sample_angles(&s).unwrap(), sample_angles(&other).unwrap());
    }

    #[test]
    fn huge_beta_silences_high_qubits() {
        let mut s = spec(&[6], 2, vec![vec![]], 1);
        s.shaping.beta = 1e4;
        let t = sample_angles(&s).unwrap();
        for m in 4..=6 {
            for l in 0..2 {
                assert!(t.get(m, l, 0).iter().all(|a| a.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn angle_spread_matches_shaping_factor() {
        // empirical std of θ for qubit m over 2·10⁴ draws vs f(κ(m))
        let s = spec(&[3], 20_000, vec![vec![]], 7);
        let t = sample_angles(&s).unwrap();
        for m in 1..=3u32 {
            let f = shaping_factor(qubit_wavenumber(m, &s.grid).unwrap(), &s.shaping);
            let xs: Vec<f64> = (0..s.reps).map(|l| t.get(m, l, 0)[0]).collect();
            let n = xs.len() as f64;
            let var = xs.iter().map(|x| x * x).sum::<f64>() / n;
            let sd = var.sqrt();
            // standard error of the sample standard deviation is σ/√(2n)
            let se = f / (2.0 * n).sqrt();
            assert!((sd - f).abs() < 3.0 * se, "m={m} sd={sd} f={f}");
        }
    }

    #[test]
    fn every_u3_is_unitary() {
        let s = spec(&[4, 4], 5, vec![vec![(1, 5)]; 3], 11);
        for g in build_circuit(&s).unwrap().gates() {
            if let Gate::U3 { theta, phi, gamma, .. } = *g {
                assert!(unitarity_defect(&u3_matrix(theta, phi, gamma)) < 1e-12);
            }
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let s = spec(&[3, 3], 2, vec![vec![(1, 4), (6, 2)]], 5);
        let c = build_circuit(&s).unwrap();
        let text = c.to_text();
        assert!(text.lines().any(|l| l == "cx q6 q2"));
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("u3 q1 "));
        let parsed = GateList::parse_text(&text, 6).unwrap();
        assert_eq!(parsed, c);
        assert!(GateList::parse_text("cx q1 q1\n", 6).is_err());
        assert!(GateList::parse_text("h q1\n", 6).is_err());
    }

    #[test]
    fn scaled_pairs() {
        assert_eq!(scaled_pair_sets(9).unwrap(), reference_pair_sets());
        let p8 = scaled_pair_sets(8).unwrap();
        assert_eq!(p8[0][3], (7, 8));
        assert_eq!(p8[0][4], (8, 6));
        assert_eq!(p8[3][6], (5, 13));
        for n in 6..=9 {
            let s = spec(&[n, n, n], 1, scaled_pair_sets(n).unwrap(), 0);
            s.validate().unwrap();
        }
        assert!(scaled_pair_sets(5).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gate_count_formula(
                n in 2u32..6,
                reps in 0u32..4,
                sets in prop::collection::vec(prop::collection::vec((1u32..6, 1u32..6), 0..5), 0..4),
            ) {
                let sets: Vec<Vec<QubitPair>> = sets
                    .into_iter()
                    .map(|s| s.into_iter()
                        .map(|(a, b)| (a.min(n), b.min(n)))
                        .filter(|(a, b)| a != b)
                        .collect())
                    .collect();
                let s = spec(&[n], reps, sets.clone(), 1);
                let expected = n as usize * reps as usize * sets.len()
                    + sets.iter().map(Vec::len).sum::<usize>();
                prop_assert_eq!(build_circuit(&s).unwrap().len(), expected);
            }
        }
    }
}
