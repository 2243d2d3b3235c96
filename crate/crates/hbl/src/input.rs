//! System files and run manifests.

use std::fmt;
use std::path::{Path, PathBuf};

use hbl_core::decay::ScalarModelSymbol;
use hbl_core::linalg::RMat;
use hbl_core::model::{build_jinxin, BalanceLawSpec, JinXinSpec};
use hbl_core::poly::PolyMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A parse or validation failure, located when the position is known.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl InputError {
    fn new(path: &Path, message: impl Into<String>) -> Self {
        Self { path: path.to_path_buf(), line: None, column: None, message: message.into() }
    }

    fn json(path: &Path, e: serde_json::Error) -> Self {
        let (line, column) = if e.line() > 0 { (Some(e.line()), Some(e.column())) } else { (None, None) };
        Self { path: path.to_path_buf(), line, column, message: e.to_string() }
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, ":{l}:{c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for InputError {}

/// Matrices are accepted as flat row-major lists or as lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixInput {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixInput {
    pub fn to_matrix(&self, rows: usize, cols: usize, what: &str) -> Result<RMat, String> {
        match self {
            MatrixInput::Flat(v) => {
                if v.len() != rows * cols {
                    return Err(format!("{what}: expected {} entries ({rows}x{cols}), found {}", rows * cols, v.len()));
                }
                Ok(RMat::from_row_slice(rows, cols, v))
            }
            MatrixInput::Rows(r) => {
                if r.len() != rows {
                    return Err(format!("{what}: expected {rows} rows, found {}", r.len()));
                }
                if let Some((i, row)) = r.iter().enumerate().find(|(_, row)| row.len() != cols) {
                    return Err(format!("{what}: row {i} has length {}, expected {cols}", row.len()));
                }
                Ok(RMat::from_fn(rows, cols, |i, j| r[i][j]))
            }
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            MatrixInput::Flat(v) => Box::new(v.iter().copied()),
            MatrixInput::Rows(r) => Box::new(r.iter().flatten().copied()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceLawInput {
    pub dim: usize,
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub equilibrium: Option<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Vec<MatrixInput>,
    #[serde(rename = "DQ")]
    pub dq: MatrixInput,
    #[serde(default)]
    pub flux_poly: Option<Vec<PolyMap>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JinXinInput {
    pub dim: usize,
    pub m: usize,
    #[serde(default = "one")]
    pub eps: f64,
    pub b: Vec<MatrixInput>,
    /// `D_u F^j(0)`; derived from `flux_poly` when absent.
    #[serde(rename = "K", default)]
    pub k: Option<Vec<MatrixInput>>,
    #[serde(default)]
    pub flux_poly: Option<Vec<PolyMap>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JinXinFile {
    jinxin: JinXinInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarInput {
    pub dim: usize,
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalarFile {
    scalar_model: ScalarInput,
}

/// The parsed content of a system file.
#[derive(Debug, Clone)]
pub enum System {
    Balance(BalanceLawSpec),
    JinXin(JinXinSpec),
    /// The scalar multiplier `−i a·ξ − ρ(|ξ|)`.
    Scalar(ScalarModelSymbol),
}

impl System {
    pub fn kind(&self) -> &'static str {
        match self {
            System::Balance(_) => "balance_law",
            System::JinXin(_) => "jinxin",
            System::Scalar(_) => "scalar_model",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            System::Balance(s) => s.d,
            System::JinXin(j) => j.d,
            System::Scalar(s) => s.d,
        }
    }

    /// The balance law behind the system; `None` for the scalar model.
    pub fn balance_law(&self) -> Option<BalanceLawSpec> {
        match self {
            System::Balance(s) => Some(s.clone()),
            System::JinXin(j) => build_jinxin(j).ok(),
            System::Scalar(_) => None,
        }
    }
}

/// A system together with the bytes it was read from.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub path: PathBuf,
    pub system: System,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn reject_non_finite<'a>(path: &Path, what: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<(), InputError> {
    match values.into_iter().find(|v| !v.is_finite()) {
        Some(v) => Err(InputError::new(path, format!("{what}: non-finite value {v}"))),
        None => Ok(()),
    }
}

fn strict<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, InputError> {
    serde_json::from_str(text).map_err(|e| InputError::json(path, e))
}

fn matrices(path: &Path, list: &[MatrixInput], rows: usize, cols: usize, what: &str) -> Result<Vec<RMat>, InputError> {
    list.iter()
        .enumerate()
        .map(|(j, m)| {
            let vals: Vec<f64> = m.values().collect();
            reject_non_finite(path, what, &vals)?;
            m.to_matrix(rows, cols, &format!("{what}[{j}]")).map_err(|e| InputError::new(path, e))
        })
        .collect()
}

pub fn parse_system(path: &Path, text: &str) -> Result<System, InputError> {
    let value: serde_json::Value = strict(path, text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| InputError::new(path, "top level must be an object"))?;
    let core_err = |e: hbl_core::Error| InputError::new(path, e.to_string());
    if obj.contains_key("jinxin") {
        let f: JinXinFile = strict(path, text)?;
        let j = f.jinxin;
        let b = matrices(path, &j.b, j.m, j.m, "b")?;
        if b.len() != j.dim {
            return Err(InputError::new(path, format!("b: expected {} matrices, found {}", j.dim, b.len())));
        }
        if !j.eps.is_finite() {
            return Err(InputError::new(path, "eps: non-finite value"));
        }
        let k = match (&j.k, &j.flux_poly) {
            (Some(k), _) => matrices(path, k, j.m, j.m, "K")?,
            (None, Some(polys)) => {
                let zero = vec![0.0; j.m];
                polys.iter().map(|p| p.jacobian(&zero)).collect()
            }
            (None, None) => return Err(InputError::new(path, "jinxin: one of K or flux_poly is required")),
        };
        if k.len() != j.dim {
            return Err(InputError::new(path, format!("K: expected {} matrices, found {}", j.dim, k.len())));
        }
        let spec = JinXinSpec::new(b, j.eps, k, j.flux_poly).map_err(core_err)?;
        if spec.m != j.m {
            return Err(InputError::new(path, "m does not match the size of b"));
        }
        Ok(System::JinXin(spec))
    } else if obj.contains_key("scalar_model") {
        let f: ScalarFile = strict(path, text)?;
        let drift = f.scalar_model.drift.unwrap_or_else(|| vec![0.0; f.scalar_model.dim]);
        reject_non_finite(path, "drift", &drift)?;
        if drift.len() != f.scalar_model.dim || drift.is_empty() {
            return Err(InputError::new(path, "drift must have one entry per dimension"));
        }
        Ok(System::Scalar(ScalarModelSymbol::with_drift(drift)))
    } else {
        let b: BalanceLawInput = strict(path, text)?;
        let a = matrices(path, &b.a, b.n, b.n, "A")?;
        if a.len() != b.dim {
            return Err(InputError::new(path, format!("A: expected {} matrices, found {}", b.dim, a.len())));
        }
        let dq = matrices(path, std::slice::from_ref(&b.dq), b.n, b.n, "DQ")?.remove(0);
        let eq = b.equilibrium.unwrap_or_else(|| vec![0.0; b.n]);
        reject_non_finite(path, "equilibrium", &eq)?;
        if eq.len() != b.n {
            return Err(InputError::new(path, format!("equilibrium: expected {} entries, found {}", b.n, eq.len())));
        }
        let spec = BalanceLawSpec::new(b.m, eq, a, dq, b.flux_poly).map_err(core_err)?;
        Ok(System::Balance(spec))
    }
}

pub fn load_system(path: &Path) -> Result<LoadedSystem, InputError> {
    let bytes = std::fs::read(path).map_err(|e| InputError::new(path, e.to_string()))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| InputError::new(path, e.to_string()))?;
    let system = parse_system(path, text)?;
    Ok(LoadedSystem { path: path.to_path_buf(), system, sha256: sha256_hex(&bytes) })
}

/// Kind of initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Gaussian,
    Noise,
    Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub kind: InitKind,
    #[serde(default)]
    pub seed: u64,
    pub amplitude: f64,
    /// Component that receives the data; all components when absent.
    #[serde(default)]
    pub component: Option<usize>,
    /// Gaussian width.
    #[serde(default = "one")]
    pub width: f64,
    /// Noise band limit in wavenumber index.
    #[serde(default = "default_band")]
    pub band: usize,
    /// Wavenumber indices of a single mode.
    #[serde(default)]
    pub mode: Option<Vec<i64>>,
}

fn default_band() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Number of geometrically spaced output times after `t = 0`.
    #[serde(default = "default_outputs")]
    pub count: usize,
    /// Sobolev indices `s` of the recorded `‖Λ^s U‖`.
    #[serde(default)]
    pub sobolev: Vec<f64>,
    #[serde(default)]
    pub snapshots: bool,
    /// Fit window for the decay exponents; defaults to the second half of the run.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    /// Writes the per-mode envelope check against a decay certificate.
    #[serde(default)]
    pub envelope_check: bool,
}

fn default_outputs() -> usize {
    40
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { count: default_outputs(), sobolev: Vec::new(), snapshots: false, fit_window: None, envelope_check: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Exact per-mode propagation of the linearization.
    Linear,
    /// Splitting integrator for a Jin-Xin system with polynomial flux.
    Jinxin,
}

/// A simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// System file, relative to the manifest.
    pub system: PathBuf,
    pub mode: SimMode,
    pub grid: GridSpec,
    /// Time step; the default is `0.25 Δx / λ_max`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub init: InitSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default = "yes")]
    pub dealias: bool,
}

fn yes() -> bool {
    true
}

pub fn load_manifest(path: &Path) -> Result<(Manifest, String), InputError> {
    let bytes = std::fs::read(path).map_err(|e| InputError::new(path, e.to_string()))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| InputError::new(path, e.to_string()))?;
    let mut man: Manifest = strict(path, text)?;
    let mut nums = vec![man.t_final, man.grid.length, man.init.amplitude, man.init.width];
    nums.extend(man.dt);
    nums.extend(&man.outputs.sobolev);
    reject_non_finite(path, "manifest", &nums)?;
    if man.system.is_relative() {
        if let Some(dir) = path.parent() {
            man.system = dir.join(&man.system);
        }
    }
    Ok((man, sha256_hex(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<System, InputError> {
        parse_system(Path::new("test.json"), text)
    }

    #[test]
    fn telegraph_both_matrix_layouts() {
        let flat = r#"{"dim":1,"n":2,"m":1,"A":[[0,1,1,0]],"DQ":[0,0,0,-1]}"#;
        let rows = r#"{"dim":1,"n":2,"m":1,"A":[[[0,1],[1,0]]],"DQ":[[0,0],[0,-1]]}"#;
        for t in [flat, rows] {
            match parse(t).unwrap() {
                System::Balance(s) => assert_eq!(s.source_jacobian[(1, 1)], -1.0),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let e = parse(r#"{"dim":1,"n":2,"m":1,"A":[[[0,1],[1]]],"DQ":[0,0,0,-1]}"#).unwrap_err();
        assert!(e.message.contains("row 1"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = parse("{\n  \"dim\": 1,\n  \"n\": NaN\n}").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.column.is_some());
        let e = parse(r#"{"dim":1,"n":2,"m":1,"A":[[0,1,1,1e999]],"DQ":[0,0,0,-1]}"#).unwrap_err();
        assert!(e.line.is_some());
    }

    #[test]
    fn unknown_keys_are_fatal() {
        let e = parse(r#"{"dim":1,"n":2,"m":1,"A":[[0,1,1,0]],"DQ":[0,0,0,-1],"tol":1}"#).unwrap_err();
        assert!(e.message.contains("unknown field"), "{e}");
    }

    #[test]
    fn jinxin_flux_jacobian_from_polynomial() {
        let t = r#"{"jinxin":{"dim":1,"m":1,"b":[[2]],"flux_poly":[{"nvars":1,"components":[[
            {"coeff":0.5,"powers":[1]},{"coeff":0.5,"powers":[2]}]]}]}}"#;
        match parse(t).unwrap() {
            System::JinXin(j) => assert_eq!(j.flux_jac[0][(0, 0)], 0.5),
            other => panic!("{other:?}"),
        }
    }
}
