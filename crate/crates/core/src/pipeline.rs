//! The composable stages `generate → measure → diagnose`, plus circuit
//! export. Stages communicate only through dumps and CSV files in the output
//! directory, so each can be rerun on its own.
//!
//! Everything a stage writes is a deterministic function of the
//! configuration, except the `*_report.toml` files, which also record wall
//! time.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::{Complex, Complex64};
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::build_circuit;
use crate::config::{DiagnosticsConfig, RunConfig};
use crate::diagnostics::{
    fit_power_law, helicity_density, k41_exponent, k_peak, qr_invariants, reynolds_estimate, shell_spectrum,
    sl94_exponent, structure_functions, support_radius, vieillefosse_curve, vorticity_from_spin,
    vorticity_from_velocity, vorticity_pdf, Directions, QrOptions, ScalingFit, ShellSpectrum,
    StructureFunctionOptions,
};
use crate::error::{Error, Result};
use crate::io::{
    read_complex_dump, read_complex_dump_single, read_real_dump, write_complex, write_dump, write_real, write_text, DumpElement, DumpInfo,
    Precision, Table,
};
use crate::lattice::GridSpec;
use crate::madelung::{
    observable_spectrum, MAX_REGULARIZED_FRACTION, VACUUM_RELATIVE, observable_spectrum_padded, FieldSet, KernelKind, VectorField};
use crate::simulator::{run_audited, Amplitude, Spin, SpinorField, StateVector};
use crate::spectral::{Fourier, Nyquist, Transform};

/// Environment variable holding the memory cap, e.g. `3G`, `512M` or a
/// byte count; `none` disables the guard. When unset, the cap is the
/// memory currently available to the system.
pub const MEMORY_CAP_ENV: &str = "TURBOGEN_MEMORY_CAP";

/// Energy fraction (above `k = 0`) enclosed by a spectral support radius.
pub const SUPPORT_FRACTION: f64 = 0.99;

const BOX_UNITS: &str = "periodic box of side domain_length; mean density 1";

/// Pipeline stages, for memory estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Generate,
    Measure,
    Diagnose,
    /// Single-precision streaming spectra ([`streaming_spectra`]).
    Spectra,
}

/// Parses sizes such as `3G`, `512M`, `64k` or `1048576`.
pub fn parse_size(text: &str) -> Result<u64> {
    let t = text.trim();
    let (digits, mult) = match t.char_indices().last() {
        Some((i, c)) if c.is_ascii_alphabetic() => {
            let mult: u64 = match c.to_ascii_uppercase() {
                'K' => 1 << 10,
                'M' => 1 << 20,
                'G' => 1 << 30,
                'T' => 1 << 40,
                _ => return Err(Error::Config(format!("{MEMORY_CAP_ENV}: unknown size suffix in `{t}`"))),
            };
            (&t[..i], mult)
        }
        _ => (t, 1),
    };
    let value: f64 = digits
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{MEMORY_CAP_ENV}: cannot parse `{t}` as a size")))?;
    if !(value.is_finite() && value >= 0.0) {
        return Err(Error::Config(format!("{MEMORY_CAP_ENV}: size `{t}` must be non-negative")));
    }
    Ok((value * mult as f64) as u64)
}

/// The effective memory cap: the environment variable if set, otherwise
/// `MemAvailable` from `/proc/meminfo`, otherwise none.
pub fn memory_cap() -> Result<Option<u64>> {
    match std::env::var(MEMORY_CAP_ENV) {
        Ok(v) if v.trim().eq_ignore_ascii_case("none") => Ok(None),
        Ok(v) => parse_size(&v).map(Some),
        Err(_) => Ok(available_memory()),
    }
}

fn available_memory() -> Option<u64> {
    let text = std::fs::read_to_string("/proc/meminfo").ok()?;
    let line = text.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kib: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib * 1024)
}

/// Peak resident bytes a stage needs on `grid`.
pub fn estimate_bytes(stage: Stage, grid: &GridSpec, precision: Precision) -> u64 {
    const OVERHEAD: u64 = 64 << 20;
    let n = grid.len() as u64;
    let amplitude = match precision {
        Precision::Double => 16,
        Precision::Single => 8,
    };
    match stage {
        // One spin component is simulated and written at a time.
        Stage::Generate => n * amplitude + n * amplitude / 16 + OVERHEAD,
        // Spectral and physical spinor, ρ, J, u, s and transform scratch.
        Stage::Measure => 184 * n + OVERHEAD,
        // Velocity, spin, one gradient tensor, vorticity and scratch.
        Stage::Diagnose => 184 * n + OVERHEAD,
        // Two single-precision complex fields plus two real ones.
        Stage::Spectra => 24 * n + OVERHEAD,
    }
}

/// Refuses to start a stage that would exceed `cap`.
pub fn check_memory(stage: Stage, grid: &GridSpec, precision: Precision, cap: Option<u64>) -> Result<()> {
    let Some(cap) = cap else { return Ok(()) };
    let need = estimate_bytes(stage, grid, precision);
    if need <= cap {
        return Ok(());
    }
    let gib = |b: u64| b as f64 / (1u64 << 30) as f64;
    let hint = match (stage, precision) {
        (Stage::Generate, Precision::Double) => "use --precision single, reduce grid.n_alpha,",
        _ => "reduce grid.n_alpha",
    };
    Err(Error::ResourceLimit(format!(
        "{stage:?} on {grid} ({} qubits, {precision:?} precision) needs about {:.2} GiB but the cap is {:.2} GiB; \
         {hint} or raise {MEMORY_CAP_ENV}",
        grid.n_q(),
        gib(need),
        gib(cap)
    )))
}

/// File names inside an output directory.
pub mod files {
    use std::path::{Path, PathBuf};

    use crate::simulator::Spin;

    pub fn dump(dir: &Path, kind: &str) -> PathBuf {
        dir.join(format!("{kind}.bin"))
    }

    pub fn spinor(dir: &Path, spin: Spin) -> PathBuf {
        dump(dir, spin.label())
    }

    pub fn circuit(dir: &Path, spin: Spin) -> PathBuf {
        dir.join(format!("circuit_{}.txt", spin.label()))
    }

    pub fn axis_name(axis: usize) -> String {
        ["x", "y", "z"].get(axis).map_or_else(|| axis.to_string(), |s| s.to_string())
    }

    pub const SPECTRA_STAGES: &str = "spectra_stages.csv";
    pub const SPECTRUM_VELOCITY: &str = "spectrum_velocity.csv";
    pub const SPECTRUM_ENSTROPHY: &str = "spectrum_enstrophy.csv";
    pub const SPECTRUM_VSF: &str = "spectrum_vsf.csv";
    pub const VORTICITY_PDF: &str = "vorticity_pdf.csv";
    pub const QR_HISTOGRAM: &str = "qr_histogram.csv";
    pub const VIEILLEFOSSE: &str = "vieillefosse.csv";
    pub const STRUCTURE_FUNCTIONS: &str = "structure_functions.csv";
    pub const STRUCTURE_STDERR: &str = "structure_functions_stderr.csv";
    pub const SUMMARY: &str = "summary.toml";
    pub const SPECTRA_SUMMARY: &str = "spectra_summary.toml";
    pub const GENERATE_REPORT: &str = "generate_report.toml";
    pub const MEASURE_REPORT: &str = "measure_report.toml";
    pub const DIAGNOSE_REPORT: &str = "diagnose_report.toml";
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn seed_value(seed: u64) -> toml::Value {
    i64::try_from(seed).map_or_else(|_| toml::Value::String(seed.to_string()), toml::Value::Integer)
}

/// Audit of one simulated spin component.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentReport {
    pub spin: String,
    pub seed: u64,
    pub gates: usize,
    pub norm_sqr: f64,
    pub max_gate_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerateReport {
    pub grid: String,
    pub n_q: u32,
    pub precision: Precision,
    pub components: Vec<ComponentReport>,
    pub wall_seconds: f64,
}

/// Writes the gate lists of both spin components.
pub fn export_circuits(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    Spin::BOTH
        .iter()
        .map(|&spin| {
            let gates = build_circuit(&cfg.circuit_spec(spin))?;
            let path = files::circuit(dir, spin);
            write_text(&path, &gates.to_text())?;
            Ok(path)
        })
        .collect()
}

/// Runs both circuits and dumps their unit-norm output amplitudes, which
/// are the spectral coefficients `ψ̂±` before box normalization.
pub fn generate(cfg: &RunConfig, dir: &Path, cap: Option<u64>) -> Result<GenerateReport> {
    let precision = cfg.output.precision;
    check_memory(Stage::Generate, &cfg.grid, precision, cap)?;
    ensure_dir(dir)?;
    let start = Instant::now();
    let mut components = Vec::new();
    for spin in Spin::BOTH {
        let spec = cfg.circuit_spec(spin);
        let gates = build_circuit(&spec)?;
        write_text(&files::circuit(dir, spin), &gates.to_text())?;
        let (norm_sqr, max_gate_drift) = match precision {
            Precision::Double => simulate_and_dump::<f64>(cfg, dir, spin, &gates)?,
            Precision::Single => simulate_and_dump::<f32>(cfg, dir, spin, &gates)?,
        };
        components.push(ComponentReport {
            spin: spin.label().into(),
            seed: spec.seed,
            gates: gates.len(),
            norm_sqr,
            max_gate_drift,
        });
    }
    let report = GenerateReport {
        grid: cfg.grid.to_string(),
        n_q: cfg.grid.n_q(),
        precision,
        components,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_text(&dir.join(files::GENERATE_REPORT), &crate::io::to_toml(&report)?)?;
    Ok(report)
}

fn simulate_and_dump<T: Amplitude>(
    cfg: &RunConfig,
    dir: &Path,
    spin: Spin,
    gates: &crate::circuit::GateList,
) -> Result<(f64, f64)>
where
    Complex<T>: DumpElement,
{
    let (state, audit): (StateVector<T>, _) = run_audited(gates)?;
    let seed = cfg.circuit_spec(spin).seed;
    let info = DumpInfo::new(
        spin.label(),
        "spectral",
        "dimensionless amplitudes, flat lattice order",
        "unit l2 norm; multiply by 1/sqrt(2) for mean density 1",
    )
    .with("seed", seed_value(seed))
    .with("gates", audit.gates_applied as i64)
    .with("norm_sqr", audit.final_norm_sqr)
    .with("reps", i64::from(cfg.reps))
    .with("modules", cfg.pair_sets.len() as i64);
    write_dump(&files::spinor(dir, spin), &cfg.grid, state.amplitudes(), &info)?;
    Ok((audit.final_norm_sqr, audit.max_gate_drift))
}

/// Loads both spinor dumps, box-normalized.
pub fn load_spinor(cfg: &RunConfig, dir: &Path) -> Result<SpinorField> {
    let c = SpinorField::BOX_NORMALIZATION;
    let mut comps = Vec::new();
    for spin in Spin::BOTH {
        let (mut v, _) = read_complex_dump(&files::spinor(dir, spin), &cfg.grid)?;
        v.iter_mut().for_each(|a| *a *= c);
        comps.push(v);
    }
    let minus = comps.pop().expect("two components");
    let plus = comps.pop().expect("two components");
    SpinorField::with_normalization(cfg.grid.clone(), plus, minus, c)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureReport {
    pub grid: String,
    /// Radius holding `SUPPORT_FRACTION` of the fluctuation energy of `|ψ̂₊|²`.
    pub support_psi_plus: f64,
    /// The same for the density spectrum `|ρ̂|²`.
    pub support_density: f64,
    pub support_ratio: f64,
    /// Largest imaginary part of the density after synthesis from `ρ̂`.
    pub density_max_imag: f64,
    pub mean_density: f64,
    pub regularized: usize,
    pub eps_rho: f64,
    pub spin_norm_defect: f64,
    pub wall_seconds: f64,
}

/// Measures ρ, J, u and s from the spinor dumps and writes them with the
/// three-stage spectra.
pub fn measure(cfg: &RunConfig, dir: &Path, cap: Option<u64>) -> Result<MeasureReport> {
    check_memory(Stage::Measure, &cfg.grid, cfg.output.precision, cap)?;
    let start = Instant::now();
    let grid = cfg.grid.clone();
    let conv = cfg.diagnostics.spin_convention;
    let spinor = load_spinor(cfg, dir)?;

    let stage1 = shell_spectrum(&[spinor.psi_plus()], &grid, "psi_plus")?;
    let rho_hat = if cfg.diagnostics.padded {
        observable_spectrum_padded(&spinor, KernelKind::Density, conv)?
    } else {
        observable_spectrum(&spinor, KernelKind::Density, conv)?
    };
    let stage2 = shell_spectrum(&[&rho_hat], &grid, "density")?;
    let t = Transform::for_grid(&grid);
    let density_max_imag = {
        let mut z = rho_hat;
        t.synthesize(&mut z);
        z.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    };

    let fields = FieldSet::compute(&spinor, conv)?;
    drop(spinor);
    let u_hat = t.analyze_real(&fields.velocity[0]);
    let stage3 = shell_spectrum(&[&u_hat], &grid, "velocity_x")?;
    drop(u_hat);

    let mut table = Table::new(&["k", "E_psi_plus", "E_density", "E_velocity_x"]);
    for i in 0..stage1.k.len() {
        table.row(vec![stage1.k[i], stage1.energy[i], stage2.energy[i], stage3.energy[i]]);
    }
    table.write(&dir.join(files::SPECTRA_STAGES))?;

    write_fields(cfg, dir, &fields, &t)?;

    let support_psi_plus = support_radius(&stage1, SUPPORT_FRACTION);
    let support_density = support_radius(&stage2, SUPPORT_FRACTION);
    let mean_density = crate::diagnostics::det_mean(grid.len(), |x| fields.rho[x]);
    let report = MeasureReport {
        grid: grid.to_string(),
        support_psi_plus,
        support_density,
        support_ratio: support_density / support_psi_plus,
        density_max_imag,
        mean_density,
        regularized: fields.regularized,
        eps_rho: fields.eps_rho,
        spin_norm_defect: fields.spin_norm_defect(),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_text(&dir.join(files::MEASURE_REPORT), &crate::io::to_toml(&report)?)?;
    Ok(report)
}

fn write_fields(cfg: &RunConfig, dir: &Path, f: &FieldSet, t: &Transform) -> Result<()> {
    let grid = &cfg.grid;
    let precision = cfg.output.precision;
    let write = |kind: String, data: &[f64], norm: &str, regularized: bool| -> Result<()> {
        let mut info = DumpInfo::new(&kind, "physical", BOX_UNITS, norm);
        if regularized {
            info.regularized = Some(f.regularized);
            info = info.with("eps_rho", f.eps_rho);
        }
        write_real(&files::dump(dir, &kind), grid, data, precision, &info)?;
        if cfg.output.spectral_dumps {
            let hat: Vec<Complex64> = t.analyze_real(data);
            let kind = format!("{kind}_hat");
            let mut info = DumpInfo::new(&kind, "spectral", BOX_UNITS, "f_hat(k) = mean over x of f(x) exp(-ikx)");
            info.regularized = regularized.then_some(f.regularized);
            write_complex(&files::dump(dir, &kind), grid, &hat, precision, &info)?;
        }
        Ok(())
    };
    write("rho".into(), &f.rho, "rho = |psi_plus|^2 + |psi_minus|^2", false)?;
    let convention = format!("{:?}", f.convention);
    for (a, c) in f.momentum.iter().enumerate() {
        write(format!("momentum_{}", files::axis_name(a)), c, "J = sum_s Im(conj(psi_s) grad psi_s)", false)?;
    }
    for (a, c) in f.velocity.iter().enumerate() {
        write(format!("velocity_{}", files::axis_name(a)), c, "u = J / rho, zero where rho < eps_rho", true)?;
    }
    for (a, c) in f.spin.iter().enumerate() {
        write(
            format!("spin_{}", files::axis_name(a)),
            c,
            &format!("s = <psi|sigma|psi> / rho ({convention} convention), (0,0,1) where rho < eps_rho"),
            true,
        )?;
    }
    Ok(())
}

fn load_vector(cfg: &RunConfig, dir: &Path, name: &str) -> Result<VectorField> {
    (0..cfg.grid.dims())
        .map(|a| read_real_dump(&files::dump(dir, &format!("{name}_{}", files::axis_name(a))), &cfg.grid).map(|r| r.0))
        .collect()
}

/// A power-law fit as written to the summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    pub exponent: f64,
    pub stderr: f64,
    pub range: [f64; 2],
    pub points: usize,
}

impl From<&ScalingFit> for FitSummary {
    fn from(f: &ScalingFit) -> Self {
        Self {
            exponent: f.exponent,
            stderr: f.stderr,
            range: [f.range.0, f.range.1],
            points: f.points,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub total_energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_peak_enstrophy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_eta: Option<f64>,
    pub k_l: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reynolds: Option<f64>,
    /// Slope of the spin (vortex-surface) spectrum minus the velocity slope.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vsf_minus_velocity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity_fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vsf_fit: Option<FitSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VorticitySummary {
    pub omega_prime: f64,
    pub excess_kurtosis: Vec<f64>,
    pub mean_excess_kurtosis: f64,
    pub beta_fit: f64,
    pub c_fit: f64,
    pub tail_samples: u64,
    pub fit_reliable: bool,
    pub mean_helicity: f64,
    pub relative_helicity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QrSummary {
    pub q_w: f64,
    pub skewness_r: f64,
    pub in_range: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureSummary {
    pub samples: usize,
    pub orders: Vec<u32>,
    /// Fitted exponents, `NaN` where the fit window held too few points.
    pub zeta: Vec<f64>,
    pub zeta_stderr: Vec<f64>,
    pub k41: Vec<f64>,
    pub sl94: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concave: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpinSummary {
    /// `‖ω_spin − ∇×u‖₂ / ‖∇×u‖₂`; nonzero wherever the density varies.
    pub vorticity_relative_l2: f64,
}

/// Deterministic outcome of the diagnose stage (`summary.toml`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub grid: String,
    pub n_q: u32,
    /// Diagnostics that were skipped, with the reason.
    pub notes: Vec<String>,
    pub spectrum: SpectrumSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vorticity: Option<VorticitySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qr: Option<QrSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure_functions: Option<StructureSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin: Option<SpinSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct DiagnoseReport {
    wall_seconds: f64,
}

/// `E(k) = ½ Σ_shell |v̂|²` of a real vector field.
fn energy_spectrum(v: &VectorField, grid: &GridSpec, t: &Transform, label: &str) -> Result<ShellSpectrum> {
    let hats: Vec<Vec<Complex64>> = v.iter().map(|c| t.analyze_real(c)).collect();
    let refs: Vec<&[Complex64]> = hats.iter().map(|h| h.as_slice()).collect();
    let mut spec = shell_spectrum(&refs, grid, label)?;
    spec.energy.iter_mut().for_each(|e| *e *= 0.5);
    Ok(spec)
}

/// Fits, enstrophy peak and Reynolds estimate of the velocity and spin
/// spectra; writes the three spectrum CSVs. Fit failures become notes.
fn summarize_spectra(
    energy: &ShellSpectrum,
    vsf: &ShellSpectrum,
    d: &DiagnosticsConfig,
    dir: &Path,
    notes: &mut Vec<String>,
) -> Result<SpectrumSummary> {
    let fit_range = (d.spectrum_fit[0], d.spectrum_fit[1]);
    let velocity_fit = fit_power_law(energy, fit_range)
        .map_err(|e| notes.push(format!("velocity spectrum fit: {e}")))
        .ok();
    let enstrophy = ShellSpectrum {
        label: "enstrophy".into(),
        k: energy.k.clone(),
        energy: energy.k.iter().zip(&energy.energy).map(|(k, e)| k * k * e).collect(),
    };
    let k_peak = k_peak(&enstrophy).map_err(|e| notes.push(format!("enstrophy peak: {e}"))).ok();
    let k_eta = k_peak.map(|k| k * d.k_eta_factor);
    let reynolds = k_eta.and_then(|k| {
        reynolds_estimate(d.k_l, k)
            .map_err(|e| notes.push(format!("Reynolds estimate: {e}")))
            .ok()
    });
    let vsf_fit = fit_power_law(vsf, fit_range)
        .map_err(|e| notes.push(format!("spin spectrum fit: {e}")))
        .ok();
    spectrum_table(energy, velocity_fit.as_ref()).write(&dir.join(files::SPECTRUM_VELOCITY))?;
    spectrum_table(&enstrophy, None).write(&dir.join(files::SPECTRUM_ENSTROPHY))?;
    spectrum_table(vsf, vsf_fit.as_ref()).write(&dir.join(files::SPECTRUM_VSF))?;
    Ok(SpectrumSummary {
        total_energy: energy.total(),
        k_peak_enstrophy: k_peak,
        k_eta,
        k_l: d.k_l,
        reynolds,
        vsf_minus_velocity: match (&vsf_fit, &velocity_fit) {
            (Some(a), Some(b)) => Some(a.exponent - b.exponent),
            _ => None,
        },
        velocity_fit: velocity_fit.as_ref().map(FitSummary::from),
        vsf_fit: vsf_fit.as_ref().map(FitSummary::from),
    })
}

fn spectrum_table(spec: &ShellSpectrum, fit: Option<&ScalingFit>) -> Table {
    let mut t = Table::new(&["k", "E"]);
    t.comment(format!("spectrum {}", spec.label));
    if let Some(f) = fit {
        t.comment(format!(
            "fit exponent={:e} stderr={:e} range={:e}..{:e} points={}",
            f.exponent, f.stderr, f.range.0, f.range.1, f.points
        ));
    }
    for (k, e) in spec.k.iter().zip(&spec.energy) {
        t.row(vec![*k, *e]);
    }
    t
}

fn l2(v: &VectorField) -> f64 {
    crate::diagnostics::det_sum(v[0].len(), |x| v.iter().map(|c| c[x] * c[x]).sum::<f64>()).sqrt()
}

/// Computes every enabled diagnostic from the measured dumps.
pub fn diagnose(cfg: &RunConfig, dir: &Path, cap: Option<u64>) -> Result<Summary> {
    check_memory(Stage::Diagnose, &cfg.grid, cfg.output.precision, cap)?;
    let start = Instant::now();
    let grid = cfg.grid.clone();
    let d = &cfg.diagnostics;
    let t = Transform::for_grid(&grid);
    let mut notes = Vec::new();
    let u = load_vector(cfg, dir, "velocity")?;
    let s = load_vector(cfg, dir, "spin")?;

    // Spectra.
    let energy = energy_spectrum(&u, &grid, &t, "velocity")?;
    let vsf = energy_spectrum(&s, &grid, &t, "vsf")?;
    let spectrum = summarize_spectra(&energy, &vsf, d, dir, &mut notes)?;

    // Vorticity statistics.
    let mut vorticity = None;
    let mut spin = None;
    if grid.dims() == 3 {
        let omega = vorticity_from_velocity(&u, &grid)?;
        if d.vorticity_pdf {
            match vorticity_pdf(&omega, d.pdf_bins) {
                Ok(pdf) => {
                    let mut table = Table::new(&["bin_center", "density"]);
                    table.comment(format!("omega_prime={:e}", pdf.omega_prime));
                    table.comment(format!(
                        "stretched-exponential tail fit c={:e} beta={:e} tail_samples={} reliable={}",
                        pdf.fit.c, pdf.fit.beta, pdf.fit.tail_samples, pdf.fit.reliable
                    ));
                    for (x, p) in pdf.bin_centers.iter().zip(&pdf.density) {
                        table.row(vec![*x, *p]);
                    }
                    table.write(&dir.join(files::VORTICITY_PDF))?;
                    let h = helicity_density(&u, &omega)?;
                    let mean_h = crate::diagnostics::det_mean(h.len(), |x| h[x]);
                    let norm = l2(&u) * l2(&omega) / grid.len() as f64;
                    vorticity = Some(VorticitySummary {
                        omega_prime: pdf.omega_prime,
                        mean_excess_kurtosis: pdf.excess_kurtosis.iter().sum::<f64>() / 3.0,
                        excess_kurtosis: pdf.excess_kurtosis,
                        beta_fit: pdf.fit.beta,
                        c_fit: pdf.fit.c,
                        tail_samples: pdf.fit.tail_samples,
                        fit_reliable: pdf.fit.reliable,
                        mean_helicity: mean_h,
                        relative_helicity: if norm > 0.0 { mean_h / norm } else { 0.0 },
                    });
                }
                Err(e) => notes.push(format!("vorticity PDF: {e}")),
            }
        }
        if d.spin_vorticity {
            let mut diff = vorticity_from_spin(&s, &grid, d.spin_convention)?;
            for (a, b) in diff.iter_mut().zip(&omega) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x -= y);
            }
            let base = l2(&omega);
            if base > 0.0 {
                spin = Some(SpinSummary {
                    vorticity_relative_l2: l2(&diff) / base,
                });
            } else {
                notes.push("spin vorticity: velocity field has no vorticity to compare against".into());
            }
        }
    } else {
        notes.push(format!("vorticity, Q-R: need a 3-dimensional grid, got {}", grid.dims()));
    }
    drop(s);

    let mut qr = None;
    if d.qr && grid.dims() == 3 {
        let opts = QrOptions {
            bins: d.qr_bins,
            half_width: d.qr_half_width,
        };
        match qr_invariants(&u, &grid, &opts) {
            Ok((inv, hist)) => {
                let mut table = Table::new(&["R", "Q", "density"]);
                table.comment(format!("R / Q_w^(3/2) and Q / Q_w with Q_w={:e}", inv.q_w));
                for (iq, row) in hist.density.iter().enumerate() {
                    for (ir, p) in row.iter().enumerate() {
                        table.row(vec![hist.r_centers[ir], hist.q_centers[iq], *p]);
                    }
                }
                table.write(&dir.join(files::QR_HISTOGRAM))?;
                let mut line = Table::new(&["R", "Q"]);
                for (r, q) in vieillefosse_curve(&hist.r_centers) {
                    line.row(vec![r, q]);
                }
                line.write(&dir.join(files::VIEILLEFOSSE))?;
                qr = Some(QrSummary {
                    q_w: inv.q_w,
                    skewness_r: inv.skewness_r,
                    in_range: hist.in_range,
                });
            }
            Err(e) => notes.push(format!("Q-R invariants: {e}")),
        }
    }

    let mut sf_summary = None;
    if d.structure_functions {
        let equal = grid.n_alpha().iter().all(|&n| n == grid.n_alpha()[0]);
        let opts = StructureFunctionOptions {
            orders: vec![2, 3, 4, 5],
            samples: d.sf_samples,
            seed: d.sf_seed,
            separations: d.sf_separations,
            // Without an explicit window, fit over the separations that
            // correspond to the spectral fit band, r = L / k.
            fit_range: Some(d.sf_fit_range.map_or(
                (grid.domain_length() / d.spectrum_fit[1], grid.domain_length() / d.spectrum_fit[0]),
                |[a, b]| (a, b),
            )),
            directions: if equal { Directions::Lattice } else { Directions::Axis(0) },
        };
        let sf = structure_functions(&u, &grid, &opts)?;
        let mut table = Table::new(&["r", "S_2", "S_3", "S_4", "S_5"]);
        let mut errs = Table::new(&["r", "se_2", "se_3", "se_4", "se_5"]);
        for (i, fit) in sf.fits.iter().enumerate() {
            if let Some(f) = fit {
                table.comment(format!(
                    "fit order={} exponent={:e} stderr={:e} range={:e}..{:e}",
                    sf.orders[i], f.exponent, f.stderr, f.range.0, f.range.1
                ));
            }
        }
        for (j, r) in sf.r.iter().enumerate() {
            table.row(std::iter::once(*r).chain(sf.values.iter().map(|v| v[j])).collect());
            errs.row(std::iter::once(*r).chain(sf.stderr.iter().map(|v| v[j])).collect());
        }
        table.write(&dir.join(files::STRUCTURE_FUNCTIONS))?;
        errs.write(&dir.join(files::STRUCTURE_STDERR))?;
        sf_summary = Some(StructureSummary {
            samples: sf.samples,
            zeta: sf.fits.iter().map(|f| f.as_ref().map_or(f64::NAN, |f| f.exponent)).collect(),
            zeta_stderr: sf.fits.iter().map(|f| f.as_ref().map_or(f64::NAN, |f| f.stderr)).collect(),
            k41: sf.orders.iter().map(|&p| k41_exponent(p as f64)).collect(),
            sl94: sf.orders.iter().map(|&p| sl94_exponent(p as f64)).collect(),
            concave: sf.is_concave(),
            orders: sf.orders,
        });
    }

    let summary = Summary {
        grid: grid.to_string(),
        n_q: grid.n_q(),
        notes,
        spectrum,
        vorticity,
        qr,
        structure_functions: sf_summary,
        spin,
    };
    write_text(&dir.join(files::SUMMARY), &crate::io::to_toml(&summary)?)?;
    let report = DiagnoseReport {
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_text(&dir.join(files::DIAGNOSE_REPORT), &crate::io::to_toml(&report)?)?;
    Ok(summary)
}


/// Deterministic outcome of [`streaming_spectra`] (`spectra_summary.toml`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectraSummary {
    pub grid: String,
    pub n_q: u32,
    pub notes: Vec<String>,
    pub regularized: usize,
    pub eps_rho: f64,
    pub spectrum: SpectrumSummary,
}

/// Velocity and spin spectra straight from the spinor dumps, in single
/// precision and holding at most two complex fields at a time.
///
/// This is the route to grids where `measure` and `diagnose` do not fit in
/// memory (about 3 GiB at 27 qubits instead of tens). It rereads the spinor
/// dumps once per pass, writes the same spectrum CSVs as `diagnose` plus
/// `spectra_summary.toml`, and computes nothing else.
pub fn streaming_spectra(cfg: &RunConfig, dir: &Path, cap: Option<u64>) -> Result<SpectraSummary> {
    check_memory(Stage::Spectra, &cfg.grid, Precision::Single, cap)?;
    let grid = &cfg.grid;
    let t = Fourier::<f32>::for_grid(grid);
    let box_norm = SpinorField::BOX_NORMALIZATION as f32;
    let load = |spin: Spin| -> Result<Vec<Complex<f32>>> {
        let (mut v, _) = read_complex_dump_single(&files::spinor(dir, spin), grid)?;
        v.par_iter_mut().for_each(|a| *a = a.scale(box_norm));
        Ok(v)
    };
    let physical = |spin: Spin| -> Result<Vec<Complex<f32>>> {
        let mut v = load(spin)?;
        t.synthesize(&mut v);
        Ok(v)
    };

    // Spin field, one component at a time, from both physical components.
    let (p, m) = (physical(Spin::Up)?, physical(Spin::Down)?);
    let density = |a: &Complex<f32>, b: &Complex<f32>| a.norm_sqr() + b.norm_sqr();
    let rho_max = p.par_iter().zip(&m).map(|(a, b)| density(a, b)).reduce(|| 0.0, f32::max);
    let eps = VACUUM_RELATIVE as f32 * rho_max;
    let vacuum = |r: f32| r < eps || r == 0.0;
    let sign2 = cfg.diagnostics.spin_convention.spin2_sign() as f32;
    let mut vsf = None;
    for i in 0..3 {
        let mut buf: Vec<Complex<f32>> = p
            .par_iter()
            .zip(&m)
            .map(|(a, b)| {
                let r = density(a, b);
                let v = if vacuum(r) {
                    if i == 2 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let ab = a * b.conj();
                    let bilinear = match i {
                        0 => 2.0 * ab.re,
                        1 => sign2 * 2.0 * ab.im,
                        _ => a.norm_sqr() - b.norm_sqr(),
                    };
                    bilinear / r
                };
                Complex::new(v, 0.0)
            })
            .collect();
        t.analyze(&mut buf);
        accumulate(&mut vsf, shell_spectrum(&[&buf], grid, "vsf")?);
    }
    let rho: Vec<f32> = p.par_iter().zip(&m).map(|(a, b)| density(a, b)).collect();
    drop((p, m));
    let regularized = rho.par_iter().filter(|&&r| vacuum(r)).count();
    if regularized as f64 > MAX_REGULARIZED_FRACTION * rho.len() as f64 {
        return Err(Error::Unphysical {
            regularized,
            total: rho.len(),
        });
    }

    // Velocity, one direction at a time: J_a = Σ_s Im(ψ_s* ∂_a ψ_s).
    let mut energy = None;
    for axis in 0..grid.dims() {
        let mut j = vec![0.0f32; grid.len()];
        for spin in Spin::BOTH {
            let mut d = load(spin)?;
            let mut psi = d.clone();
            t.synthesize(&mut psi);
            t.differentiate(&mut d, axis, grid.k_unit(), Nyquist::Keep);
            t.synthesize(&mut d);
            j.par_iter_mut()
                .zip(psi.par_iter().zip(&d))
                .for_each(|(out, (a, da))| *out += (a.conj() * da).im);
        }
        let mut u: Vec<Complex<f32>> = j
            .par_iter()
            .zip(&rho)
            .map(|(&j, &r)| Complex::new(if vacuum(r) { 0.0 } else { j / r }, 0.0))
            .collect();
        drop(j);
        t.analyze(&mut u);
        accumulate(&mut energy, shell_spectrum(&[&u], grid, "velocity")?);
    }
    let halve = |spec: Option<ShellSpectrum>| {
        let mut spec = spec.expect("at least one component");
        spec.energy.iter_mut().for_each(|e| *e *= 0.5);
        spec
    };
    let (energy, vsf) = (halve(energy), halve(vsf));

    let mut notes = Vec::new();
    let spectrum = summarize_spectra(&energy, &vsf, &cfg.diagnostics, dir, &mut notes)?;
    let summary = SpectraSummary {
        grid: grid.to_string(),
        n_q: grid.n_q(),
        notes,
        regularized,
        eps_rho: f64::from(eps),
        spectrum,
    };
    write_text(&dir.join(files::SPECTRA_SUMMARY), &crate::io::to_toml(&summary)?)?;
    Ok(summary)
}

fn accumulate(total: &mut Option<ShellSpectrum>, part: ShellSpectrum) {
    match total {
        None => *total = Some(part),
        Some(t) => t.energy.iter_mut().zip(&part.energy).for_each(|(t, p)| *t += p),
    }
}
