//! Binary field dumps, their metadata sidecars, and CSV tables.
//!
//! A dump is one ASCII header line followed by little-endian values in flat
//! lattice order (dimension 0 fastest; qubit `m` drives bit `m − 1` of the
//! flat index):
//!
//! ```text
//! TURBOGEN-DUMP v1 kind=rho dtype=float64 shape=64x64x64 order=dim0-fastest endian=little
//! ```
//!
//! Complex values are stored as interleaved `(re, im)` pairs. Every dump
//! `X` has a TOML sidecar `X.meta` carrying the grid, units, normalization
//! and the SHA-256 of the dump file, which readers verify.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::GridSpec;

const MAGIC: &str = "TURBOGEN-DUMP";
const VERSION: &str = "v1";
const ORDER: &str = "dim0-fastest";
/// Values encoded per buffered write or read.
const BLOCK: usize = 1 << 16;

/// Element type of a dump.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Complex128,
    Complex64,
    Float64,
    Float32,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::Complex128 => 16,
            Dtype::Complex64 | Dtype::Float64 => 8,
            Dtype::Float32 => 4,
        }
    }

    pub fn is_complex(self) -> bool {
        matches!(self, Dtype::Complex128 | Dtype::Complex64)
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dtype::Complex128 => "complex128",
            Dtype::Complex64 => "complex64",
            Dtype::Float64 => "float64",
            Dtype::Float32 => "float32",
        })
    }
}

impl FromStr for Dtype {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "complex128" => Ok(Dtype::Complex128),
            "complex64" => Ok(Dtype::Complex64),
            "float64" => Ok(Dtype::Float64),
            "float32" => Ok(Dtype::Float32),
            other => Err(format!("unknown dtype `{other}`")),
        }
    }
}

/// Storage precision of dumps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "single" => Ok(Precision::Single),
            "double" => Ok(Precision::Double),
            other => Err(format!("precision must be `single` or `double`, got `{other}`")),
        }
    }
}

/// A value that can be written to a dump.
pub trait DumpElement: Copy {
    const DTYPE: Dtype;
    fn put(self, out: &mut Vec<u8>);
}

impl DumpElement for f64 {
    const DTYPE: Dtype = Dtype::Float64;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl DumpElement for f32 {
    const DTYPE: Dtype = Dtype::Float32;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl DumpElement for Complex<f64> {
    const DTYPE: Dtype = Dtype::Complex128;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.re.to_le_bytes());
        out.extend_from_slice(&self.im.to_le_bytes());
    }
}

impl DumpElement for Complex<f32> {
    const DTYPE: Dtype = Dtype::Complex64;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.re.to_le_bytes());
        out.extend_from_slice(&self.im.to_le_bytes());
    }
}

/// Descriptive metadata supplied by the writer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DumpInfo {
    pub kind: String,
    /// `"spectral"` or `"physical"`.
    pub space: String,
    pub units: String,
    pub normalization: String,
    pub regularized: Option<usize>,
    /// Free-form extra keys (seeds, norms, gate counts, ...).
    pub extra: BTreeMap<String, toml::Value>,
}

impl DumpInfo {
    pub fn new(kind: &str, space: &str, units: &str, normalization: &str) -> Self {
        Self {
            kind: kind.into(),
            space: space.into(),
            units: units.into(),
            normalization: normalization.into(),
            ..Default::default()
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.extra.insert(key.into(), value.into());
        self
    }
}

/// Contents of a `.meta` sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpMeta {
    pub kind: String,
    pub dtype: Dtype,
    pub n_alpha: Vec<u32>,
    pub domain_length: f64,
    pub space: String,
    pub units: String,
    pub normalization: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularized: Option<usize>,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, toml::Value>,
}

impl DumpMeta {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::with_domain_length(&self.n_alpha, self.domain_length)
    }
}

/// Path of the sidecar belonging to `dump`.
pub fn sidecar_path(dump: &Path) -> PathBuf {
    let mut s = dump.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn header_line(kind: &str, dtype: Dtype, grid: &GridSpec) -> String {
    let shape: Vec<String> = grid.extents().iter().map(usize::to_string).collect();
    format!(
        "{MAGIC} {VERSION} kind={kind} dtype={dtype} shape={} order={ORDER} endian=little\n",
        shape.join("x")
    )
}

/// Writes `data` and its sidecar; returns the sidecar contents.
pub fn write_dump<T: DumpElement>(path: &Path, grid: &GridSpec, data: &[T], info: &DumpInfo) -> Result<DumpMeta> {
    if data.len() != grid.len() {
        return Err(Error::GridMismatch {
            expected: format!("{} values ({grid})", grid.len()),
            found: format!("{} values for {}", data.len(), info.kind),
        });
    }
    if info.kind.is_empty() || info.kind.contains(char::is_whitespace) {
        return Err(Error::domain(format!("dump kind `{}` must be a single word", info.kind)));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut hasher = Sha256::new();
    let header = header_line(&info.kind, T::DTYPE, grid);
    hasher.update(header.as_bytes());
    out.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::with_capacity(BLOCK * T::DTYPE.size());
    for block in data.chunks(BLOCK) {
        buf.clear();
        for &v in block {
            v.put(&mut buf);
        }
        hasher.update(&buf);
        out.write_all(&buf).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;

    let meta = DumpMeta {
        kind: info.kind.clone(),
        dtype: T::DTYPE,
        n_alpha: grid.n_alpha().to_vec(),
        domain_length: grid.domain_length(),
        space: info.space.clone(),
        units: info.units.clone(),
        normalization: info.normalization.clone(),
        regularized: info.regularized,
        sha256: hex::encode(hasher.finalize()),
        extra: info.extra.clone(),
    };
    write_text(&sidecar_path(path), &to_toml(&meta)?)?;
    Ok(meta)
}

/// Reads and validates a sidecar.
pub fn read_meta(dump: &Path) -> Result<DumpMeta> {
    let side = sidecar_path(dump);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    toml::from_str(&text).map_err(|e| Error::Format {
        path: side.display().to_string(),
        reason: e.message().to_string(),
    })
}

/// Header fields of a dump file.
#[derive(Clone, Debug, PartialEq)]
struct Header {
    kind: String,
    dtype: Dtype,
    shape: Vec<usize>,
}

fn parse_header(line: &str) -> std::result::Result<Header, String> {
    let mut words = line.trim_end_matches('\n').split(' ');
    if words.next() != Some(MAGIC) {
        return Err("missing magic".into());
    }
    if words.next() != Some(VERSION) {
        return Err(format!("unsupported version (expected {VERSION})"));
    }
    let fields: BTreeMap<&str, &str> = words.filter_map(|w| w.split_once('=')).collect();
    let get = |key: &str| fields.get(key).copied().ok_or_else(|| format!("header lacks `{key}`"));
    if get("endian")? != "little" || get("order")? != ORDER {
        return Err("unsupported byte or index order".into());
    }
    let shape = get("shape")?
        .split('x')
        .map(|s| s.parse::<usize>().map_err(|e| format!("bad shape: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    Ok(Header {
        kind: get("kind")?.to_string(),
        dtype: get("dtype")?.parse()?,
        shape,
    })
}

/// Opens a dump, checks header and sidecar against `grid`, and decodes
/// values with `decode`, verifying the checksum as it streams.
fn read_with<T>(
    path: &Path,
    grid: &GridSpec,
    complex: bool,
    decode: impl Fn(Dtype, &[u8]) -> T,
) -> Result<(Vec<T>, DumpMeta)> {
    if !path.exists() {
        return Err(Error::io(path, std::io::ErrorKind::NotFound.into()));
    }
    let meta = read_meta(path)?;
    let format_err = |reason: String| Error::Format {
        path: path.display().to_string(),
        reason,
    };
    if meta.n_alpha != grid.n_alpha() {
        return Err(Error::GridMismatch {
            expected: grid.to_string(),
            found: format!("n_alpha {:?} in {}", meta.n_alpha, sidecar_path(path).display()),
        });
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    let mut line = String::new();
    input.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&line).map_err(format_err)?;
    if header.shape != grid.extents() {
        return Err(Error::GridMismatch {
            expected: grid.to_string(),
            found: format!("shape {:?} in {}", header.shape, path.display()),
        });
    }
    if header.dtype != meta.dtype || header.kind != meta.kind {
        return Err(format_err("header and sidecar disagree on kind or dtype".into()));
    }
    if header.dtype.is_complex() != complex {
        return Err(format_err(format!(
            "expected a {} dump, found {}",
            if complex { "complex" } else { "real" },
            header.dtype
        )));
    }

    let mut hasher = Sha256::new();
    hasher.update(line.as_bytes());
    let size = header.dtype.size();
    let mut values = Vec::with_capacity(grid.len());
    let mut buf = vec![0u8; BLOCK * size];
    let mut remaining = grid.len();
    while remaining > 0 {
        let n = remaining.min(BLOCK);
        let bytes = &mut buf[..n * size];
        input.read_exact(bytes).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => format_err("file is truncated".into()),
            _ => Error::io(path, e),
        })?;
        hasher.update(&*bytes);
        values.extend(bytes.chunks_exact(size).map(|b| decode(header.dtype, b)));
        remaining -= n;
    }
    let mut probe = [0u8; 1];
    if input.read(&mut probe).map_err(|e| Error::io(path, e))? != 0 {
        return Err(format_err("trailing bytes after the last value".into()));
    }
    let digest = hex::encode(hasher.finalize());
    if digest != meta.sha256 {
        return Err(format_err(format!(
            "checksum mismatch: sidecar says {}, file hashes to {digest}",
            meta.sha256
        )));
    }
    Ok((values, meta))
}

fn f64_at(b: &[u8]) -> f64 {
    f64::from_le_bytes(b[..8].try_into().expect("8 bytes"))
}

fn f32_at(b: &[u8]) -> f64 {
    f32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64
}

/// Reads a complex dump (either precision) as `Complex64`.
pub fn read_complex_dump(path: &Path, grid: &GridSpec) -> Result<(Vec<Complex64>, DumpMeta)> {
    read_with(path, grid, true, |dtype, b| match dtype {
        Dtype::Complex128 => Complex64::new(f64_at(b), f64_at(&b[8..])),
        _ => Complex64::new(f32_at(b), f32_at(&b[4..])),
    })
}

/// Reads a complex dump (either precision) as `Complex<f32>`, for
/// memory-lean processing of large grids.
pub fn read_complex_dump_single(path: &Path, grid: &GridSpec) -> Result<(Vec<Complex<f32>>, DumpMeta)> {
    read_with(path, grid, true, |dtype, b| match dtype {
        Dtype::Complex128 => Complex::new(f64_at(b) as f32, f64_at(&b[8..]) as f32),
        _ => Complex::new(f32_at(b) as f32, f32_at(&b[4..]) as f32),
    })
}

/// Reads a real dump (either precision) as `f64`.
pub fn read_real_dump(path: &Path, grid: &GridSpec) -> Result<(Vec<f64>, DumpMeta)> {
    read_with(path, grid, false, |dtype, b| match dtype {
        Dtype::Float64 => f64_at(b),
        _ => f32_at(b),
    })
}

/// Writes a real field at the requested precision.
pub fn write_real(path: &Path, grid: &GridSpec, data: &[f64], precision: Precision, info: &DumpInfo) -> Result<DumpMeta> {
    match precision {
        Precision::Double => write_dump(path, grid, data, info),
        Precision::Single => {
            let narrow: Vec<f32> = data.iter().map(|&v| v as f32).collect();
            write_dump(path, grid, &narrow, info)
        }
    }
}

/// Writes a complex field at the requested precision.
pub fn write_complex(
    path: &Path,
    grid: &GridSpec,
    data: &[Complex64],
    precision: Precision,
    info: &DumpInfo,
) -> Result<DumpMeta> {
    match precision {
        Precision::Double => write_dump(path, grid, data, info),
        Precision::Single => {
            let narrow: Vec<Complex<f32>> = data.iter().map(|z| Complex::new(z.re as f32, z.im as f32)).collect();
            write_dump(path, grid, &narrow, info)
        }
    }
}

/// A plot-ready table: `#` comment lines, a header row, numeric rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn row(&mut self, values: Vec<f64>) -> &mut Self {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
        self
    }

    /// CSV text; numbers use the shortest round-trip scientific form.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            s.push_str("# ");
            s.push_str(c);
            s.push('\n');
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv())
    }

    /// Parses text produced by [`Table::to_csv`].
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut table = Table::default();
        let mut lines = text.lines();
        for line in lines.by_ref() {
            if let Some(c) = line.strip_prefix("# ") {
                table.comments.push(c.to_string());
            } else {
                table.columns = line.split(',').map(str::to_string).collect();
                break;
            }
        }
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|v| v.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1)))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if row.len() != table.columns.len() {
                return Err(format!("row {} has {} cells, header has {}", i + 1, row.len(), table.columns.len()));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Table::parse(&text).map_err(|reason| Error::Format {
            path: path.display().to_string(),
            reason,
        })
    }

    /// Values of the named column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Serializes to TOML, mapping serializer failures to [`Error::Format`].
pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Format {
        path: "<toml>".into(),
        reason: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
