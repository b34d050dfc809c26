//! File formats: headerless CSV matrices, TOML manifests, problem
//! specifications and result directories.
//!
//! Relative paths inside a TOML file are resolved against that file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{DisturbanceSet, ExperimentData};
use crate::error::{Error, Result};
use crate::farkas::CertificateReport;
use crate::polyhedra::HPolyhedron;
use crate::synthesis::{Diagnostics, Formulation, Status, SynthesisOptions, SynthesisResult};
use crate::verify::Trajectory;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a headerless comma-separated matrix, one row per line.
/// Blank lines are skipped; every row must have the same number of fields.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row = raw
            .split(',')
            .enumerate()
            .map(|(col, field)| {
                let field = field.trim();
                field.parse::<f64>().map_err(|_| {
                    parse_err(
                        path,
                        line,
                        format!("field {} is not a number: {field:?}", col + 1),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected {} fields, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "matrix file has no rows"));
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

/// Writes in shortest round-trip decimal form, so a read returns identical bits.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

/// A vector stored either as one column or as one row.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    match m.shape() {
        (_, 1) => Ok(m.column(0).into_owned()),
        (1, _) => Ok(m.row(0).transpose()),
        (r, c) => Err(parse_err(
            path,
            1,
            format!("expected a vector, found a {r}x{c} matrix"),
        )),
    }
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| {
        let line = e.span().map_or(0, |s| {
            text[..s.start.min(text.len())].matches('\n').count() + 1
        });
        parse_err(path, line, e.message().to_string())
    })
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("cannot serialize {}: {e}", path.display())))?;
    write_text(path, &text)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn base_dir(file: &Path) -> PathBuf {
    file.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyhedronFormat {
    /// `A` in one file, `b` in another (all ones when omitted).
    #[default]
    Pair,
    /// One file `[A b]`.
    Augmented,
}

/// Where a polyhedron `{x : A x <= b}` is stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyhedronFile {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<PolyhedronFormat>,
}

impl PolyhedronFile {
    /// `fallback` applies when the entry does not name a format.
    pub fn load(&self, base: &Path, fallback: PolyhedronFormat) -> Result<HPolyhedron> {
        let path = resolve(base, &self.path);
        match self.format.unwrap_or(fallback) {
            PolyhedronFormat::Augmented => read_polyhedron_augmented(&path),
            PolyhedronFormat::Pair => {
                let a = read_matrix(&path)?;
                let b = match &self.rhs {
                    Some(r) => {
                        let rp = resolve(base, r);
                        let b = read_vector(&rp)?;
                        if b.len() != a.nrows() {
                            return Err(parse_err(
                                &rp,
                                1,
                                format!(
                                    "{} entries for {} rows of {}",
                                    b.len(),
                                    a.nrows(),
                                    path.display()
                                ),
                            ));
                        }
                        b
                    }
                    None => DVector::from_element(a.nrows(), 1.0),
                };
                HPolyhedron::new(a, b)
            }
        }
    }
}

pub fn read_polyhedron_pair(a: &Path, b: &Path) -> Result<HPolyhedron> {
    PolyhedronFile {
        path: a.to_path_buf(),
        rhs: Some(b.to_path_buf()),
        format: Some(PolyhedronFormat::Pair),
    }
    .load(Path::new(""), PolyhedronFormat::Pair)
}

pub fn read_polyhedron_augmented(path: &Path) -> Result<HPolyhedron> {
    let m = read_matrix(path)?;
    if m.ncols() < 2 {
        return Err(parse_err(
            path,
            1,
            "augmented polyhedron needs at least two columns",
        ));
    }
    let n = m.ncols() - 1;
    HPolyhedron::new(m.columns(0, n).into_owned(), m.column(n).into_owned())
}

pub fn write_polyhedron_augmented(path: &Path, p: &HPolyhedron) -> Result<()> {
    let n = p.dim();
    let mut m = DMatrix::zeros(p.num_rows(), n + 1);
    m.columns_mut(0, n).copy_from(p.a());
    m.column_mut(n).copy_from(p.b());
    write_matrix(path, &m)
}

pub fn write_polyhedron_pair(a: &Path, b: &Path, p: &HPolyhedron) -> Result<()> {
    write_matrix(a, p.a())?;
    write_vector(b, p.b())
}

/// Describes one experiment on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// How the data came about, e.g. `platoon`, `simulated` or `external`.
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    pub u0: PathBuf,
    pub x0: PathBuf,
    pub x1: PathBuf,
    /// True disturbances; simulation metadata only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<PathBuf>,
}

/// Description of the random generator recorded in generated manifests.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha) seeded from the 64-bit seed; stream 0 inputs, stream 1 disturbances; column-major draws";

/// Loads the experiment described by a manifest. The true disturbances are
/// attached when listed.
pub fn load_dataset(manifest_path: &Path) -> Result<(ExperimentData, DatasetManifest)> {
    let manifest: DatasetManifest = read_toml(manifest_path)?;
    let base = base_dir(manifest_path);
    let u0 = read_matrix(&resolve(&base, &manifest.u0))?;
    let x0 = read_matrix(&resolve(&base, &manifest.x0))?;
    let x1 = read_matrix(&resolve(&base, &manifest.x1))?;
    let mut data = ExperimentData::new(u0, x0, x1)?;
    if (data.n(), data.m(), data.t()) != (manifest.n, manifest.m, manifest.t) {
        return Err(parse_err(
            manifest_path,
            0,
            format!(
                "manifest says n={}, m={}, T={} but the files give n={}, m={}, T={}",
                manifest.n,
                manifest.m,
                manifest.t,
                data.n(),
                data.m(),
                data.t()
            ),
        ));
    }
    if let Some(d0) = &manifest.d0 {
        data = data.with_disturbances(read_matrix(&resolve(&base, d0))?)?;
    }
    Ok((data, manifest))
}

/// Writes `U0.csv`, `X0.csv`, `X1.csv` (and `D0.csv` when known) plus
/// `manifest.toml` into `dir`; returns the manifest path.
pub fn write_dataset(
    dir: &Path,
    data: &ExperimentData,
    mode: &str,
    seed: Option<u64>,
    delta: Option<f64>,
) -> Result<PathBuf> {
    write_matrix(&dir.join("U0.csv"), data.u0())?;
    write_matrix(&dir.join("X0.csv"), data.x0())?;
    write_matrix(&dir.join("X1.csv"), data.x1())?;
    let d0 = match data.d0() {
        Some(d) => {
            write_matrix(&dir.join("D0.csv"), d)?;
            Some(PathBuf::from("D0.csv"))
        }
        None => None,
    };
    let manifest = DatasetManifest {
        n: data.n(),
        m: data.m(),
        t: data.t(),
        seed,
        delta,
        mode: mode.to_string(),
        generator: seed.map(|_| GENERATOR.to_string()),
        u0: "U0.csv".into(),
        x0: "X0.csv".into(),
        x1: "X1.csv".into(),
        d0,
    };
    let path = dir.join("manifest.toml");
    write_toml(&path, &manifest)?;
    Ok(path)
}

/// A synthesis or verification problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub formulation: Formulation,
    pub delta: f64,
    pub state_set: PolyhedronFile,
    /// Rows of `D`; the disturbance set is `{d : D d <= delta 1}`.
    pub disturbance: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_set: Option<PolyhedronFile>,
    /// Dataset manifest, for the data-based formulations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// `A` and `B`, for the model-based formulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelFiles>,
    #[serde(default)]
    pub options: SynthesisOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFiles {
    pub a: PathBuf,
    pub b: PathBuf,
}

/// Everything a problem file points to, loaded.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub spec: ProblemSpec,
    pub state_set: HPolyhedron,
    pub disturbance: DisturbanceSet,
    pub input_set: Option<HPolyhedron>,
    pub data: Option<ExperimentData>,
    pub model: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl ProblemSpec {
    pub fn load(path: &Path) -> Result<ProblemSpec> {
        read_toml(path)
    }

    /// Reads the referenced files; paths are relative to `base`.
    pub fn resolve(self, base: &Path, format: PolyhedronFormat) -> Result<LoadedProblem> {
        let state_set = self.state_set.load(base, format)?;
        let disturbance =
            DisturbanceSet::new(read_matrix(&resolve(base, &self.disturbance))?, self.delta)?;
        let input_set = self
            .input_set
            .as_ref()
            .map(|u| u.load(base, format))
            .transpose()?;
        let data = match &self.dataset {
            Some(p) => Some(load_dataset(&resolve(base, p))?.0),
            None => None,
        };
        let model = match &self.model {
            Some(mf) => Some((
                read_matrix(&resolve(base, &mf.a))?,
                read_matrix(&resolve(base, &mf.b))?,
            )),
            None => None,
        };
        match self.formulation {
            Formulation::Model if model.is_none() => {
                return Err(Error::InvalidArgument(
                    "the model formulation needs [model] a and b".into(),
                ))
            }
            Formulation::Thm1 | Formulation::Thm2 if data.is_none() => {
                return Err(Error::InvalidArgument(
                    "data-based formulations need a dataset manifest".into(),
                ))
            }
            _ => {}
        }
        Ok(LoadedProblem {
            spec: self,
            state_set,
            disturbance,
            input_set,
            data,
            model,
        })
    }
}

/// Metadata for one stored multiplier matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub index: usize,
    pub file: PathBuf,
    pub rows: usize,
    pub cols: usize,
    /// The vertex the multipliers belong to; empty for the model-based block.
    pub vertex: Vec<f64>,
    pub report: CertificateReport,
}

/// `result.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub formulation: Formulation,
    pub status: Status,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_map: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<CertificateReport>,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<CertificateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_certificate: Option<CertificateRecord>,
}

/// Writes `result.toml`, `K.csv`, `certificates/E_<j>.csv` and `row_map.csv`.
pub fn write_result(dir: &Path, result: &SynthesisResult, seeds: &[u64]) -> Result<ResultRecord> {
    let gain = match &result.gain {
        Some(k) => {
            write_matrix(&dir.join("K.csv"), k)?;
            Some(PathBuf::from("K.csv"))
        }
        None => None,
    };
    let mut certificates = Vec::with_capacity(result.certificates.len());
    for c in &result.certificates {
        let file = PathBuf::from(format!("certificates/E_{:03}.csv", c.index));
        write_matrix(&dir.join(&file), &c.multipliers)?;
        certificates.push(CertificateRecord {
            index: c.index,
            file,
            rows: c.multipliers.nrows(),
            cols: c.multipliers.ncols(),
            vertex: c.vertex.iter().cloned().collect(),
            report: c.report,
        });
    }
    let input_certificate = match &result.input_certificate {
        Some(c) => {
            let file = PathBuf::from("certificates/E_input.csv");
            write_matrix(&dir.join(&file), &c.multipliers)?;
            Some(CertificateRecord {
                index: 0,
                file,
                rows: c.multipliers.nrows(),
                cols: c.multipliers.ncols(),
                vertex: Vec::new(),
                report: c.report,
            })
        }
        None => None,
    };
    let row_map = match &result.row_map {
        Some(map) => {
            let col = DMatrix::from_iterator(map.len(), 1, map.iter().map(|&r| r as f64));
            write_matrix(&dir.join("row_map.csv"), &col)?;
            Some(PathBuf::from("row_map.csv"))
        }
        None => None,
    };
    let record = ResultRecord {
        formulation: result.formulation,
        status: result.status,
        delta: result.delta,
        message: result.message.clone(),
        gain,
        margin: result.margin,
        seeds: seeds.to_vec(),
        row_map,
        verification: result.verification,
        diagnostics: result.diagnostics.clone(),
        certificates,
        input_certificate,
    };
    write_toml(&dir.join("result.toml"), &record)?;
    Ok(record)
}

/// A result directory read back.
#[derive(Debug, Clone)]
pub struct StoredResult {
    pub record: ResultRecord,
    pub gain: Option<DMatrix<f64>>,
    pub multipliers: Vec<DMatrix<f64>>,
    pub input_multipliers: Option<DMatrix<f64>>,
    pub row_map: Option<Vec<usize>>,
}

pub fn read_result(dir: &Path) -> Result<StoredResult> {
    let path = dir.join("result.toml");
    let record: ResultRecord = read_toml(&path)?;
    let gain = record
        .gain
        .as_ref()
        .map(|g| read_matrix(&dir.join(g)))
        .transpose()?;
    let multipliers = record
        .certificates
        .iter()
        .map(|c| {
            let e = read_matrix(&dir.join(&c.file))?;
            if e.shape() != (c.rows, c.cols) {
                return Err(parse_err(
                    &dir.join(&c.file),
                    1,
                    "certificate shape differs from result.toml",
                ));
            }
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    let input_multipliers = record
        .input_certificate
        .as_ref()
        .map(|c| read_matrix(&dir.join(&c.file)))
        .transpose()?;
    let row_map = match &record.row_map {
        Some(p) => {
            let p = dir.join(p);
            let v = read_vector(&p)?;
            let rows = v
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    if r < 0.0 || r.fract() != 0.0 {
                        Err(parse_err(
                            &p,
                            i + 1,
                            format!("row index {r} is not a nonnegative integer"),
                        ))
                    } else {
                        Ok(r as usize)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Some(rows)
        }
        None => None,
    };
    Ok(StoredResult {
        record,
        gain,
        multipliers,
        input_multipliers,
        row_map,
    })
}

/// Trajectory as CSV with header `step,x1..xn,d1..dn,contained`. The final
/// state has no disturbance, so its disturbance fields are empty.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let n = tr.states.first().map_or(0, |x| x.len());
    let mut header = vec!["step".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("d{i}")));
    header.push("contained".into());
    let mut out = header.join(",");
    out.push('\n');
    for (k, x) in tr.states.iter().enumerate() {
        let mut fields = vec![k.to_string()];
        fields.extend(x.iter().map(|v| v.to_string()));
        match tr.disturbances.get(k) {
            Some(d) => fields.extend(d.iter().map(|v| v.to_string())),
            None => fields.extend(std::iter::repeat_n(String::new(), n)),
        }
        fields.push(tr.contained[k].to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_trajectory(path: &Path, tr: &Trajectory) -> Result<()> {
    write_text(path, &trajectory_csv(tr))
}
