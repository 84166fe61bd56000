#![allow(dead_code)]

use std::path::{Path, PathBuf};

/// A 9-qubit (8^3) configuration small enough for every stage to run in
/// well under a second.
pub fn tiny_toml(out: &Path) -> String {
    format!(
        r#"[grid]
n_alpha = [3, 3, 3]

[shaping]
lambda = 1.6666666666666667
L = 6.283185307179586
c_L = 1.0
p0 = 2.0
eta = 0.64
c_eta = 0.01
beta = 15.0

[circuit]
r = 2
R = 2
seed_up = 11
seed_down = 12

[pairs.1]
pairs = [[1, 4], [4, 7], [7, 1], [2, 5], [5, 8], [8, 2]]

[pairs.2]
pairs = [[3, 6], [6, 9], [9, 3], [1, 5], [5, 9]]

[diagnostics]
spectrum_fit = [1.0, 3.0]
sf_samples = 100000
sf_separations = 4
sf_fit_range = [0.7, 3.2]

[output]
dir = "{}"
"#,
        out.display()
    )
}

pub fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).expect("write config");
    path
}

pub fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}
