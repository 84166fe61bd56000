mod common;

use std::path::Path;
use std::process::{Command, Output};

use turbogen::pipeline::files;
use turbogen::GateList;

fn turbogen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turbogen"))
        .args(args)
        .env("TURBOGEN_MEMORY_CAP", "none")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn reference() -> String {
    common::configs().join("reference.toml").display().to_string()
}

#[test]
fn export_circuit_writes_the_reference_gate_lists() {
    let dir = tempfile::tempdir().unwrap();
    let out = turbogen(&["export-circuit", "--config", &reference(), "--out", &dir.path().display().to_string()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    for name in ["circuit_psi_plus.txt", "circuit_psi_minus.txt"] {
        let body = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let gates = GateList::parse_text(&body, 27).unwrap();
        assert_eq!(gates.len(), 1122);
    }
    let plus = std::fs::read(dir.path().join("circuit_psi_plus.txt")).unwrap();
    let minus = std::fs::read(dir.path().join("circuit_psi_minus.txt")).unwrap();
    assert_ne!(plus, minus, "independent seeds give different angles");
}

#[test]
fn seed_override_changes_the_circuit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    let run = |seed: &str, sub: &str| {
        let out_dir = format!("{d}/{sub}");
        let out = turbogen(&["export-circuit", "--config", &reference(), "--out", &out_dir, "--seed-up", seed]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        std::fs::read(Path::new(&out_dir).join("circuit_psi_plus.txt")).unwrap()
    };
    assert_ne!(run("7", "a"), run("8", "b"));
}

#[test]
fn equal_seeds_are_rejected() {
    let out = turbogen(&["export-circuit", "--config", &reference(), "--seed-up", "5", "--seed-down", "5", "--out", "unused"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("seed"), "{}", text(&out.stderr));
}

#[test]
fn verify_passes_and_catches_a_sign_mutation() {
    let ok = turbogen(&["verify", "--config", &reference(), "--qubits", "6"]);
    assert!(ok.status.success(), "{}{}", text(&ok.stdout), text(&ok.stderr));
    assert!(text(&ok.stdout).contains("madelung.triangle"));

    let bad = turbogen(&["verify", "--config", &reference(), "--qubits", "6", "--mutate", "momentum-sign"]);
    assert_eq!(bad.status.code(), Some(2));
    let report = text(&bad.stdout);
    assert!(report.lines().any(|l| l.contains("FAIL") && l.contains("momentum")), "{report}");
    assert!(!report.lines().any(|l| l.contains("FAIL") && l.contains("density")), "{report}");
}

#[test]
fn verify_refuses_oversized_grids() {
    let out = turbogen(&["verify", "--config", &reference(), "--qubits", "20"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("desk-scale"));
}

#[test]
fn memory_guard_refuses_double_precision_27_qubits_under_2g() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_turbogen"))
        .args(["generate", "--config", &reference(), "--out", &dir.path().display().to_string()])
        .env("TURBOGEN_MEMORY_CAP", "2G")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("--precision single") && err.contains("TURBOGEN_MEMORY_CAP"), "{err}");
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none(), "nothing written before the guard");
}

#[test]
fn missing_config_field_names_the_file_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let body = common::tiny_toml(dir.path()).replace("eta = 0.64\n", "");
    let cfg = common::write_config(dir.path(), &body);
    let out = turbogen(&["generate", "--config", &cfg.display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("run.toml") && err.contains("shaping.eta"), "{err}");
}

#[test]
fn stages_run_end_to_end_and_repeat_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let cfg = common::write_config(dir.path(), &common::tiny_toml(&out_a));
    let cfg = cfg.display().to_string();
    for stage in ["generate", "measure", "diagnose"] {
        let out = turbogen(&[stage, "--config", &cfg]);
        assert!(out.status.success(), "{stage}: {}", text(&out.stderr));
    }
    for name in [
        "psi_plus.bin",
        "psi_plus.bin.meta",
        "rho.bin",
        "velocity_x.bin",
        files::SPECTRA_STAGES,
        files::SPECTRUM_VELOCITY,
        files::SUMMARY,
        files::DIAGNOSE_REPORT,
    ] {
        assert!(out_a.join(name).exists(), "{name} missing");
    }

    let out_b = dir.path().join("b");
    let b = out_b.display().to_string();
    for stage in ["generate", "measure", "diagnose"] {
        let out = turbogen(&[stage, "--config", &cfg, "--out", &b]);
        assert!(out.status.success(), "{stage}: {}", text(&out.stderr));
    }
    for entry in std::fs::read_dir(&out_a).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with("_report.toml") {
            continue;
        }
        assert_eq!(
            std::fs::read(out_a.join(&name)).unwrap(),
            std::fs::read(out_b.join(&name)).unwrap(),
            "{name:?} differs between runs"
        );
    }
}

#[test]
fn single_precision_dumps_are_half_the_size() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_config(dir.path(), &common::tiny_toml(&dir.path().join("x")));
    let cfg = cfg.display().to_string();
    let d = dir.path().join("s").display().to_string();
    let out = turbogen(&["generate", "--config", &cfg, "--out", &d, "--precision", "single"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let meta = std::fs::read_to_string(Path::new(&d).join("psi_plus.bin.meta")).unwrap();
    assert!(meta.contains("complex64"), "{meta}");
    let len = std::fs::metadata(Path::new(&d).join("psi_plus.bin")).unwrap().len();
    assert!(len < 512 * 8 + 200, "{len}");
}
