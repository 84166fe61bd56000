//! Run configuration: a TOML file with sections `[grid]`, `[shaping]`,
//! `[circuit]`, `[pairs.N]` (one per module, `N = 1..=R`), `[diagnostics]`
//! and `[output]`.
//!
//! Every key is checked individually so that errors name the offending key
//! path; unknown keys and sections are rejected, and missing required keys
//! are reported all at once.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::circuit::{reference_pair_sets, scaled_pair_sets, CircuitSpec, QubitPair, ShapingParams};
use crate::diagnostics::MIN_SAMPLES;
use crate::error::{Error, Result};
use crate::io::Precision;
use crate::lattice::GridSpec;
use crate::madelung::SpinConvention;
use crate::simulator::Spin;

/// The 27-qubit reference configuration shipped with the crate.
pub const REFERENCE_TOML: &str = include_str!("../configs/reference.toml");

/// Analysis settings of the diagnose stage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsConfig {
    pub spin_convention: SpinConvention,
    /// Shell range `[k_lo, k_hi]` of the energy-spectrum slope fit.
    pub spectrum_fit: [f64; 2],
    /// Integral-scale wavenumber `k_L` of the Reynolds estimate.
    pub k_l: f64,
    /// `k_η = k_eta_factor · k_peak` with `k_peak` the enstrophy peak.
    pub k_eta_factor: f64,
    pub pdf_bins: usize,
    pub qr_bins: usize,
    pub qr_half_width: f64,
    pub sf_samples: usize,
    pub sf_separations: usize,
    pub sf_seed: u64,
    /// Structure-function fit window in physical units (default: the
    /// separations `L / k` of the spectral fit band).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sf_fit_range: Option<[f64; 2]>,
    /// Use the alias-free (3/2-padded) path for the density spectrum.
    pub padded: bool,
    pub vorticity_pdf: bool,
    pub qr: bool,
    pub structure_functions: bool,
    pub spin_vorticity: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            spin_convention: SpinConvention::default(),
            spectrum_fit: [4.0, 64.0],
            k_l: 1.0,
            k_eta_factor: 5.0,
            pdf_bins: 201,
            qr_bins: 101,
            qr_half_width: 5.0,
            sf_samples: 1_000_000,
            sf_separations: 32,
            sf_seed: 0,
            sf_fit_range: None,
            padded: false,
            vorticity_pdf: true,
            qr: true,
            structure_functions: true,
            spin_vorticity: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub precision: Precision,
    /// Also dump spectral coefficients of the measured fields.
    pub spectral_dumps: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            precision: Precision::Double,
            spectral_dumps: true,
        }
    }
}

/// A validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub shaping: ShapingParams,
    /// U3 repetitions per qubit per module (`r`).
    pub reps: u32,
    /// One pair set per module; `R` is its length.
    pub pair_sets: Vec<Vec<QubitPair>>,
    pub seed_up: u64,
    pub seed_down: u64,
    pub allow_equal_seeds: bool,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
}

const GRID_KEYS: &[&str] = &["n_alpha", "domain_length"];
const SHAPING_KEYS: &[&str] = &["lambda", "L", "c_L", "p0", "eta", "c_eta", "beta"];
const CIRCUIT_KEYS: &[&str] = &["r", "R", "seed_up", "seed_down", "allow_equal_seeds"];
const DIAGNOSTICS_KEYS: &[&str] = &[
    "spin_convention",
    "spectrum_fit",
    "k_l",
    "k_eta_factor",
    "pdf_bins",
    "qr_bins",
    "qr_half_width",
    "sf_samples",
    "sf_separations",
    "sf_seed",
    "sf_fit_range",
    "padded",
    "vorticity_pdf",
    "qr",
    "structure_functions",
    "spin_vorticity",
];
const OUTPUT_KEYS: &[&str] = &["dir", "precision", "spectral_dumps"];
const SECTIONS: &[&str] = &["grid", "shaping", "circuit", "pairs", "diagnostics", "output"];

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Collects missing and unknown keys before any value is interpreted.
#[derive(Default)]
struct Problems {
    missing: Vec<String>,
    unknown: Vec<String>,
}

impl Problems {
    fn section<'a>(&mut self, root: &'a Table, name: &str, allowed: &[&str], required: &[&str]) -> Option<&'a Table> {
        match root.get(name) {
            None => {
                self.missing.extend(required.iter().map(|k| format!("{name}.{k}")));
                None
            }
            Some(Value::Table(t)) => {
                self.missing.extend(
                    required
                        .iter()
                        .filter(|k| !t.contains_key(**k))
                        .map(|k| format!("{name}.{k}")),
                );
                self.unknown.extend(
                    t.keys()
                        .filter(|k| !allowed.contains(&k.as_str()))
                        .map(|k| format!("{name}.{k}")),
                );
                Some(t)
            }
            Some(_) => {
                self.unknown.push(format!("{name} (expected a table)"));
                None
            }
        }
    }

    fn into_result(self) -> Result<()> {
        let mut parts = Vec::new();
        if !self.missing.is_empty() {
            parts.push(format!("missing keys: {}", self.missing.join(", ")));
        }
        if !self.unknown.is_empty() {
            parts.push(format!("unknown keys: {}", self.unknown.join(", ")));
        }
        if parts.is_empty() {
            Ok(())
        } else {
            Err(config_err(parts.join("; ")))
        }
    }
}

/// Typed value at `section.key`, or `None` when absent.
fn get<T: DeserializeOwned>(table: &Table, path: &str, key: &str) -> Result<Option<T>> {
    table
        .get(key)
        .map(|v| {
            v.clone()
                .try_into()
                .map_err(|e: toml::de::Error| config_err(format!("{path}.{key}: {}", e.message().trim())))
        })
        .transpose()
}

fn require<T: DeserializeOwned>(table: &Table, path: &str, key: &str) -> Result<T> {
    get(table, path, key)?.ok_or_else(|| config_err(format!("missing keys: {path}.{key}")))
}

impl RunConfig {
    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The bundled 27-qubit reference configuration.
    pub fn reference() -> Self {
        Self::from_toml_str(REFERENCE_TOML).expect("bundled reference config is valid")
    }

    /// The reference circuit carried to `n` qubits per direction, with the
    /// dissipation length retuned to keep the cutoff inside the smaller band.
    pub fn scaled_reference(n: u32) -> Result<Self> {
        let mut cfg = Self::reference();
        cfg.grid = GridSpec::cube(3, n)?;
        cfg.pair_sets = scaled_pair_sets(n)?;
        cfg.shaping.eta = 0.01 * f64::from(1u32 << (9 - n.min(9)));
        let scale = 2f64.powi(n as i32 - 8);
        cfg.diagnostics.spectrum_fit = [5.0 * scale, 50.0 * scale];
        cfg.output.dir = PathBuf::from(format!("out/scaled_{}", 3 * n));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        let mut problems = Problems::default();
        for key in root.keys().filter(|k| !SECTIONS.contains(&k.as_str())) {
            problems.unknown.push(key.clone());
        }
        let grid_t = problems.section(&root, "grid", GRID_KEYS, &["n_alpha"]);
        let shaping_t = problems.section(&root, "shaping", SHAPING_KEYS, SHAPING_KEYS);
        let circuit_t = problems.section(&root, "circuit", CIRCUIT_KEYS, &["r", "R", "seed_up", "seed_down"]);
        let diag_t = problems.section(&root, "diagnostics", DIAGNOSTICS_KEYS, &[]);
        let out_t = problems.section(&root, "output", OUTPUT_KEYS, &[]);

        let modules: Option<usize> = circuit_t.and_then(|t| t.get("R")).and_then(Value::as_integer).map(|r| r.max(0) as usize);
        let mut pair_tables: BTreeMap<usize, &Table> = BTreeMap::new();
        match root.get("pairs") {
            None => {}
            Some(Value::Table(pairs)) => {
                for (name, v) in pairs {
                    let index = name.parse::<usize>().ok().filter(|&i| i >= 1 && modules.is_none_or(|r| i <= r));
                    match (index, v) {
                        (Some(i), Value::Table(t)) => {
                            problems.unknown.extend(
                                t.keys().filter(|k| *k != "pairs").map(|k| format!("pairs.{name}.{k}")),
                            );
                            pair_tables.insert(i, t);
                        }
                        _ => problems.unknown.push(format!("pairs.{name}")),
                    }
                }
            }
            Some(_) => problems.unknown.push("pairs (expected a table)".into()),
        }
        if let Some(r) = modules {
            for i in 1..=r {
                if !pair_tables.get(&i).is_some_and(|t| t.contains_key("pairs")) {
                    problems.missing.push(format!("pairs.{i}.pairs"));
                }
            }
        }
        problems.into_result()?;
        let (grid_t, shaping_t, circuit_t) = (grid_t.unwrap(), shaping_t.unwrap(), circuit_t.unwrap());

        let n_alpha: Vec<u32> = require(grid_t, "grid", "n_alpha")?;
        let length: f64 = get(grid_t, "grid", "domain_length")?.unwrap_or(std::f64::consts::TAU);
        let grid = GridSpec::with_domain_length(&n_alpha, length).map_err(|e| config_err(format!("grid: {e}")))?;

        let shaping = ShapingParams {
            lambda: require(shaping_t, "shaping", "lambda")?,
            integral_scale: require(shaping_t, "shaping", "L")?,
            c_l: require(shaping_t, "shaping", "c_L")?,
            p0: require(shaping_t, "shaping", "p0")?,
            eta: require(shaping_t, "shaping", "eta")?,
            c_eta: require(shaping_t, "shaping", "c_eta")?,
            beta: require(shaping_t, "shaping", "beta")?,
        };

        let reps: u32 = require(circuit_t, "circuit", "r")?;
        let _: usize = require(circuit_t, "circuit", "R")?;
        let seed_up: u64 = require(circuit_t, "circuit", "seed_up")?;
        let seed_down: u64 = require(circuit_t, "circuit", "seed_down")?;
        let allow_equal_seeds = get(circuit_t, "circuit", "allow_equal_seeds")?.unwrap_or(false);

        let mut pair_sets = Vec::with_capacity(pair_tables.len());
        for (i, t) in &pair_tables {
            let pairs: Vec<[u32; 2]> = require(t, &format!("pairs.{i}"), "pairs")?;
            pair_sets.push(pairs.into_iter().map(|[c, t]| (c, t)).collect());
        }

        let diagnostics = match diag_t {
            Some(t) => parse_diagnostics(t)?,
            None => DiagnosticsConfig::default(),
        };
        let output = match out_t {
            Some(t) => parse_output(t)?,
            None => OutputConfig::default(),
        };

        let cfg = RunConfig {
            grid,
            shaping,
            reps,
            pair_sets,
            seed_up,
            seed_down,
            allow_equal_seeds,
            diagnostics,
            output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(config_err("circuit.r: must be at least 1"));
        }
        if self.pair_sets.is_empty() {
            return Err(config_err("circuit.R: must be at least 1"));
        }
        if self.seed_up == self.seed_down && !self.allow_equal_seeds {
            return Err(config_err(
                "circuit.seed_down: equals seed_up; the spin components need distinct seeds \
                 (set circuit.allow_equal_seeds = true to override)",
            ));
        }
        self.circuit_spec(Spin::Up).validate()?;
        let d = &self.diagnostics;
        let [lo, hi] = d.spectrum_fit;
        if !(lo > 0.0 && hi > lo) {
            return Err(config_err(format!("diagnostics.spectrum_fit: need 0 < lo < hi, got [{lo}, {hi}]")));
        }
        if let Some([a, b]) = d.sf_fit_range {
            if !(a > 0.0 && b > a) {
                return Err(config_err(format!("diagnostics.sf_fit_range: need 0 < lo < hi, got [{a}, {b}]")));
            }
        }
        let checks = [
            (d.k_l > 0.0, "diagnostics.k_l: must be > 0"),
            (d.k_eta_factor > 0.0, "diagnostics.k_eta_factor: must be > 0"),
            (d.pdf_bins >= 2, "diagnostics.pdf_bins: must be at least 2"),
            (d.qr_bins >= 2, "diagnostics.qr_bins: must be at least 2"),
            (d.qr_half_width > 0.0, "diagnostics.qr_half_width: must be > 0"),
            (d.sf_separations >= 2, "diagnostics.sf_separations: must be at least 2"),
        ];
        if let Some((_, msg)) = checks.iter().find(|(ok, _)| !ok) {
            return Err(config_err(*msg));
        }
        if d.sf_samples < MIN_SAMPLES {
            return Err(config_err(format!("diagnostics.sf_samples: must be at least {MIN_SAMPLES}")));
        }
        Ok(())
    }

    /// Circuit of one spin component.
    pub fn circuit_spec(&self, spin: Spin) -> CircuitSpec {
        CircuitSpec {
            grid: self.grid.clone(),
            reps: self.reps,
            pair_sets: self.pair_sets.clone(),
            shaping: self.shaping.clone(),
            seed: match spin {
                Spin::Up => self.seed_up,
                Spin::Down => self.seed_down,
            },
        }
    }

    /// Total gates of one spin component's circuit.
    pub fn gate_count(&self) -> usize {
        self.circuit_spec(Spin::Up).gate_count()
    }

    /// Whether the pair sets are the reference lists verbatim.
    pub fn uses_reference_pairs(&self) -> bool {
        self.pair_sets == reference_pair_sets()
    }

    /// The configuration in file form (round-trips through
    /// [`RunConfig::from_toml_str`]).
    pub fn to_toml(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Grid<'a> {
            n_alpha: &'a [u32],
            domain_length: f64,
        }
        #[derive(Serialize)]
        struct Circuit {
            r: u32,
            #[serde(rename = "R")]
            modules: usize,
            seed_up: u64,
            seed_down: u64,
            allow_equal_seeds: bool,
        }
        #[derive(Serialize)]
        struct Pairs {
            pairs: Vec<[u32; 2]>,
        }
        #[derive(Serialize)]
        struct File<'a> {
            grid: Grid<'a>,
            shaping: &'a ShapingParams,
            circuit: Circuit,
            pairs: BTreeMap<String, Pairs>,
            diagnostics: &'a DiagnosticsConfig,
            output: &'a OutputConfig,
        }
        let file = File {
            grid: Grid {
                n_alpha: self.grid.n_alpha(),
                domain_length: self.grid.domain_length(),
            },
            shaping: &self.shaping,
            circuit: Circuit {
                r: self.reps,
                modules: self.pair_sets.len(),
                seed_up: self.seed_up,
                seed_down: self.seed_down,
                allow_equal_seeds: self.allow_equal_seeds,
            },
            pairs: self
                .pair_sets
                .iter()
                .enumerate()
                .map(|(i, set)| {
                    let pairs = set.iter().map(|&(c, t)| [c, t]).collect();
                    ((i + 1).to_string(), Pairs { pairs })
                })
                .collect(),
            diagnostics: &self.diagnostics,
            output: &self.output,
        };
        crate::io::to_toml(&file)
    }
}

fn parse_diagnostics(t: &Table) -> Result<DiagnosticsConfig> {
    let p = "diagnostics";
    let mut d = DiagnosticsConfig::default();
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = get(t, p, stringify!($field))? {
                d.$field = v;
            }
        };
    }
    set!(spin_convention);
    set!(spectrum_fit);
    set!(k_l);
    set!(k_eta_factor);
    set!(pdf_bins);
    set!(qr_bins);
    set!(qr_half_width);
    set!(sf_samples);
    set!(sf_separations);
    set!(sf_seed);
    set!(padded);
    set!(vorticity_pdf);
    set!(qr);
    set!(structure_functions);
    set!(spin_vorticity);
    d.sf_fit_range = get(t, p, "sf_fit_range")?;
    Ok(d)
}

fn parse_output(t: &Table) -> Result<OutputConfig> {
    let mut o = OutputConfig::default();
    if let Some(dir) = get::<String>(t, "output", "dir")? {
        o.dir = PathBuf::from(dir);
    }
    if let Some(p) = get(t, "output", "precision")? {
        o.precision = p;
    }
    if let Some(s) = get(t, "output", "spectral_dumps")? {
        o.spectral_dumps = s;
    }
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[grid]
n_alpha = [2, 2]

[shaping]
lambda = 1.6666666666666667
L = 6.283185307179586
c_L = 1.0
p0 = 2.0
eta = 0.01
c_eta = 0.01
beta = 15.0

[circuit]
r = 2
R = 2
seed_up = 1
seed_down = 2

[pairs.1]
pairs = [[1, 2], [3, 4]]

[pairs.2]
pairs = []
"#;

    #[test]
    fn reference_matches_the_published_table() {
        let cfg = RunConfig::reference();
        assert_eq!(cfg.shaping, ShapingParams::reference());
        assert_eq!(cfg.grid, GridSpec::cube(3, 9).unwrap());
        assert_eq!((cfg.reps, cfg.pair_sets.len()), (10, 4));
        assert!(cfg.uses_reference_pairs());
        assert_eq!(cfg.gate_count(), 1122);
        assert_ne!(cfg.seed_up, cfg.seed_down);
    }

    #[test]
    fn small_config_parses_with_defaults() {
        let cfg = RunConfig::from_toml_str(SMALL).unwrap();
        assert_eq!(cfg.grid.n_q(), 4);
        assert_eq!(cfg.pair_sets, vec![vec![(1, 2), (3, 4)], vec![]]);
        assert_eq!(cfg.diagnostics, DiagnosticsConfig::default());
        assert_eq!(cfg.output, OutputConfig::default());
        assert_eq!(cfg.circuit_spec(Spin::Down).seed, 2);
    }

    #[test]
    fn round_trips_through_toml() {
        for cfg in [RunConfig::reference(), RunConfig::from_toml_str(SMALL).unwrap()] {
            let text = cfg.to_toml().unwrap();
            assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn zero_based_pair_is_rejected() {
        let text = SMALL.replace("[[1, 2], [3, 4]]", "[[0, 5]]");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("pairs.1") && err.contains("(0, 5)"), "{err}");
    }

    #[test]
    fn missing_section_lists_every_key() {
        let start = SMALL.find("[shaping]").unwrap();
        let end = SMALL.find("[circuit]").unwrap();
        let text = format!("{}{}", &SMALL[..start], &SMALL[end..]);
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        for key in SHAPING_KEYS {
            assert!(err.contains(&format!("shaping.{key}")), "{err}");
        }
    }

    #[test]
    fn unknown_and_mistyped_keys_name_their_path() {
        let err = RunConfig::from_toml_str(&SMALL.replace("p0 = 2.0", "p0 = 2.0\np1 = 3.0"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("unknown keys: shaping.p1"), "{err}");
        let err = RunConfig::from_toml_str(&format!("{SMALL}\n[extra]\nx = 1\n")).unwrap_err().to_string();
        assert!(err.contains("unknown keys: extra"), "{err}");
        let err = RunConfig::from_toml_str(&SMALL.replace("r = 2", "r = \"two\"")).unwrap_err().to_string();
        assert!(err.contains("circuit.r"), "{err}");
        let err = RunConfig::from_toml_str(&SMALL.replace("[pairs.2]\npairs = []", "")).unwrap_err().to_string();
        assert!(err.contains("missing keys: pairs.2.pairs"), "{err}");
        let err = RunConfig::from_toml_str(&format!("{SMALL}\n[diagnostics]\npdf_bins = 1\n"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("diagnostics.pdf_bins"), "{err}");
    }

    #[test]
    fn equal_seeds_need_an_override() {
        let text = SMALL.replace("seed_down = 2", "seed_down = 1");
        assert!(RunConfig::from_toml_str(&text).is_err());
        let text = text.replace("seed_down = 1", "seed_down = 1\nallow_equal_seeds = true");
        assert!(RunConfig::from_toml_str(&text).is_ok());
    }

    #[test]
    fn scaled_references_are_valid() {
        for n in [6, 7, 8] {
            let cfg = RunConfig::scaled_reference(n).unwrap();
            assert_eq!(cfg.grid.n_q(), 3 * n);
            assert_eq!(cfg.gate_count(), 120 * n as usize + 42);
            let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("configs/scaled_{}.toml", 3 * n));
            assert_eq!(RunConfig::load(&path).unwrap(), cfg, "{}", path.display());
        }
    }
}
