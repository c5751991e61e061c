//! File formats: pattern CSV, network JSON, experiment reports and recall
//! traces. Every write goes to a temporary file in the target directory that
//! is then renamed over the destination.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::RecallTrace;
use crate::error::{Error, Result};
use crate::experiments::ExperimentReport;
use crate::features::AddressSpace;
use crate::patterns::{Geometry, PatternSet};
use crate::training::{CoefficientKind, NetworkMode, Similarity, SolverMetadata, TrainedNetwork};

pub const PATTERN_FORMAT: &str = "kernmem-patterns";
pub const NETWORK_FORMAT: &str = "kernmem-network";
pub const FORMAT_VERSION: &str = "v1";

/// Write `contents` to `path` atomically.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Parsed `# <format> <version> key=value ...` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileHeader {
    pub format: String,
    pub version: String,
    pub meta: BTreeMap<String, String>,
}

impl FileHeader {
    pub fn parse(line: &str) -> Result<Self> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::Header("first line must start with '#'".into()))?;
        let mut parts = body.split_whitespace();
        let format = parts.next().ok_or_else(|| Error::Header("missing format tag".into()))?;
        let version = parts.next().ok_or_else(|| Error::Header("missing version".into()))?;
        let mut meta = BTreeMap::new();
        for kv in parts {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Header(format!("expected key=value, got '{kv}'")))?;
            if meta.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Header(format!("duplicate key '{k}'")));
            }
        }
        Ok(FileHeader {
            format: format.to_string(),
            version: version.to_string(),
            meta,
        })
    }

    fn expect(&self, format: &str, keys: &[&str]) -> Result<()> {
        if self.format != format {
            return Err(Error::Header(format!("expected format '{format}', found '{}'", self.format)));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::Header(format!("unsupported version '{}'", self.version)));
        }
        for k in keys {
            if !self.meta.contains_key(*k) {
                return Err(Error::Header(format!("missing key '{k}'")));
            }
        }
        if let Some(k) = self.meta.keys().find(|k| !keys.contains(&k.as_str())) {
            return Err(Error::Header(format!("unknown key '{k}'")));
        }
        Ok(())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = &self.meta[key];
        raw.parse()
            .map_err(|_| Error::Header(format!("invalid value '{raw}' for key '{key}'")))
    }

    fn render(&self) -> String {
        let mut s = format!("# {} {}", self.format, self.version);
        for (k, v) in &self.meta {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

fn matrix_csv(header: &FileHeader, x: &DMatrix<f64>) -> Result<Vec<u8>> {
    let mut out = header.render().into_bytes();
    out.push(b'\n');
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for i in 0..x.nrows() {
        w.write_record(x.row(i).iter().map(|v| v.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Header plus `N × M` matrix; data line numbers are 1-based file lines.
fn read_matrix_csv(path: &Path) -> Result<(FileHeader, DMatrix<f64>)> {
    let text = fs::read_to_string(path)?;
    let (first, rest) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let header = FileHeader::parse(first.trim_end_matches('\r'))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(rest.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize) + 1;
        let row = record
            .iter()
            .map(|field| {
                field.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("'{field}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    Ok((header, DMatrix::from_fn(n, m, |i, j| rows[i][j])))
}

fn check_shape(header: &FileHeader, x: &DMatrix<f64>) -> Result<()> {
    let n: usize = header.get("n")?;
    let m: usize = header.get("m")?;
    if x.nrows() != n || x.ncols() != m {
        return Err(Error::Header(format!(
            "header declares {n}×{m} but the body holds {}×{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Pattern CSV: one pattern per column under a
/// `# kernmem-patterns v1 geometry=<tag> n=<N> m=<M> f=<f|na>` header.
pub fn write_patterns(path: &Path, set: &PatternSet) -> Result<()> {
    let f = match set.geometry() {
        Geometry::Bipolar { f } => f.to_string(),
        _ => "na".to_string(),
    };
    let header = FileHeader {
        format: PATTERN_FORMAT.into(),
        version: FORMAT_VERSION.into(),
        meta: BTreeMap::from([
            ("geometry".to_string(), set.geometry().tag().to_string()),
            ("n".to_string(), set.n().to_string()),
            ("m".to_string(), set.m().to_string()),
            ("f".to_string(), f),
        ]),
    };
    write_atomic(path, &matrix_csv(&header, set.data())?)
}

pub fn read_patterns(path: &Path) -> Result<PatternSet> {
    let (header, x) = read_matrix_csv(path)?;
    header.expect(PATTERN_FORMAT, &["geometry", "n", "m", "f"])?;
    check_shape(&header, &x)?;
    let geometry = match header.meta["geometry"].as_str() {
        "bipolar" => Geometry::Bipolar { f: header.get("f")? },
        "gaussian" => Geometry::Gaussian,
        "sphere" => Geometry::Hypersphere,
        other => return Err(Error::Header(format!("unknown geometry '{other}'"))),
    };
    if !geometry.is_bipolar() && header.meta["f"] != "na" {
        return Err(Error::Header("f must be 'na' for continuous geometries".into()));
    }
    if geometry.is_bipolar() {
        for i in 0..x.nrows() {
            if let Some(j) = (0..x.ncols()).find(|&j| x[(i, j)].abs() != 1.0) {
                return Err(Error::Parse {
                    line: i + 2,
                    message: format!("entry {} in column {j} is not ±1", x[(i, j)]),
                });
            }
        }
    }
    PatternSet::new(x, geometry)
}

/// SDM addresses (`n_phi × n_in`, one address per row) written one address
/// per column under `geometry=addresses`.
pub fn write_addresses(path: &Path, addresses: &DMatrix<f64>, space: AddressSpace) -> Result<()> {
    let header = FileHeader {
        format: PATTERN_FORMAT.into(),
        version: FORMAT_VERSION.into(),
        meta: BTreeMap::from([
            ("geometry".to_string(), "addresses".to_string()),
            ("n".to_string(), addresses.ncols().to_string()),
            ("m".to_string(), addresses.nrows().to_string()),
            ("f".to_string(), "na".to_string()),
            ("space".to_string(), space_tag(space).to_string()),
        ]),
    };
    write_atomic(path, &matrix_csv(&header, &addresses.transpose())?)
}

fn space_tag(space: AddressSpace) -> &'static str {
    match space {
        AddressSpace::Cube => "cube",
        AddressSpace::Sphere => "sphere",
    }
}

pub fn read_addresses(path: &Path) -> Result<(DMatrix<f64>, AddressSpace)> {
    let (header, x) = read_matrix_csv(path)?;
    header.expect(PATTERN_FORMAT, &["geometry", "n", "m", "f", "space"])?;
    if header.meta["geometry"] != "addresses" {
        return Err(Error::Header("expected geometry=addresses".into()));
    }
    check_shape(&header, &x)?;
    let space = match header.meta["space"].as_str() {
        "cube" => AddressSpace::Cube,
        "sphere" => AddressSpace::Sphere,
        other => return Err(Error::Header(format!("unknown address space '{other}'"))),
    };
    for j in 0..x.ncols() {
        let col = x.column(j);
        let ok = match space {
            AddressSpace::Cube => col.iter().all(|v| v.abs() == 1.0),
            AddressSpace::Sphere => (col.norm() - 1.0).abs() <= 1e-12,
        };
        if !ok {
            return Err(Error::Domain(format!("address {j} does not lie in the {} space", space_tag(space))));
        }
    }
    Ok((x.transpose(), space))
}

/// Non-finite reals are written as the strings `"inf"`, `"-inf"` and `"nan"`.
mod lenient_reals {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(serde::Serialize, Deserialize)]
    #[serde(untagged)]
    enum Real {
        Num(f64),
        Text(String),
    }

    fn to_real(v: f64) -> Real {
        if v.is_finite() {
            Real::Num(v)
        } else if v.is_nan() {
            Real::Text("nan".into())
        } else if v > 0.0 {
            Real::Text("inf".into())
        } else {
            Real::Text("-inf".into())
        }
    }

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(values.iter().map(|v| to_real(*v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Real>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Real::Num(v) => Ok(v),
                Real::Text(t) => match t.as_str() {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    _ => Err(serde::de::Error::custom(format!("invalid real '{t}'"))),
                },
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverMetadataFile {
    rule: crate::training::LearningRule,
    bias_mode: crate::training::BiasMode,
    tol: f64,
    seed: u64,
    converged_per_row: Vec<bool>,
    sweeps: Vec<usize>,
    infeasible_per_row: Vec<bool>,
    #[serde(with = "lenient_reals")]
    margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format: String,
    version: String,
    mode: NetworkMode,
    kernel: Similarity,
    coefficient_kind: CoefficientKind,
    /// One list of `M` coefficients per output neuron.
    alphas: Vec<Vec<f64>>,
    thetas: Vec<f64>,
    pattern_file_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_file_ref: Option<String>,
    solver_metadata: SolverMetadataFile,
}

/// Where the stored patterns of a network live on disk. Relative paths are
/// resolved against the network file's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternRefs {
    pub inputs: PathBuf,
    /// Targets of a hetero-associative network.
    pub targets: Option<PathBuf>,
}

/// Writes the network JSON; the referenced pattern files are not touched.
pub fn write_network(path: &Path, net: &TrainedNetwork, refs: &PatternRefs) -> Result<()> {
    if (net.mode == NetworkMode::Hetero) != refs.targets.is_some() {
        return Err(Error::domain("a target file reference is required for hetero networks only"));
    }
    let file = NetworkFile {
        format: NETWORK_FORMAT.into(),
        version: FORMAT_VERSION.into(),
        mode: net.mode,
        kernel: net.similarity.clone(),
        coefficient_kind: net.coefficient_kind,
        alphas: (0..net.alphas.ncols())
            .map(|i| net.alphas.column(i).iter().copied().collect())
            .collect(),
        thetas: net.thetas.iter().copied().collect(),
        pattern_file_ref: refs.inputs.to_string_lossy().into_owned(),
        target_file_ref: refs.targets.as_ref().map(|p| p.to_string_lossy().into_owned()),
        solver_metadata: SolverMetadataFile {
            rule: net.solver.rule,
            bias_mode: net.solver.bias_mode,
            tol: net.solver.tol,
            seed: net.solver.seed,
            converged_per_row: net.solver.converged_per_row.clone(),
            sweeps: net.solver.sweeps.clone(),
            infeasible_per_row: net.solver.infeasible_per_row.clone(),
            margins: net.solver.margins.clone(),
        },
    };
    let mut bytes = serde_json::to_vec_pretty(&file)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn resolve(base: &Path, reference: &str) -> PathBuf {
    let p = Path::new(reference);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new("")).join(p)
    }
}

/// Reads a network JSON and the pattern files it references.
pub fn read_network(path: &Path) -> Result<TrainedNetwork> {
    let file: NetworkFile = serde_json::from_slice(&fs::read(path)?)?;
    if file.format != NETWORK_FORMAT {
        return Err(Error::Header(format!("expected format '{NETWORK_FORMAT}', found '{}'", file.format)));
    }
    if file.version != FORMAT_VERSION {
        return Err(Error::Header(format!("unsupported version '{}'", file.version)));
    }
    let x_in = read_patterns(&resolve(path, &file.pattern_file_ref))?.into_data();
    let x_out = match (&file.target_file_ref, file.mode) {
        (Some(r), NetworkMode::Hetero) => read_patterns(&resolve(path, r))?.into_data(),
        (None, NetworkMode::Hetero) => return Err(Error::Header("hetero network without target_file_ref".into())),
        (None, _) => x_in.clone(),
        (Some(_), _) => return Err(Error::Header("target_file_ref is only valid for hetero networks".into())),
    };
    let m = x_in.ncols();
    let n_out = x_out.nrows();
    if x_out.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, got: x_out.ncols() });
    }
    if file.alphas.len() != n_out || file.thetas.len() != n_out {
        return Err(Error::Header(format!(
            "expected {n_out} coefficient rows and thresholds, found {} and {}",
            file.alphas.len(),
            file.thetas.len()
        )));
    }
    if let Some(row) = file.alphas.iter().find(|r| r.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: row.len() });
    }
    let meta = file.solver_metadata;
    for len in [meta.converged_per_row.len(), meta.sweeps.len(), meta.infeasible_per_row.len(), meta.margins.len()] {
        if len != n_out {
            return Err(Error::Header(format!("solver metadata has {len} rows, expected {n_out}")));
        }
    }
    Ok(TrainedNetwork {
        mode: file.mode,
        similarity: file.kernel,
        coefficient_kind: file.coefficient_kind,
        alphas: DMatrix::from_fn(m, n_out, |mu, i| file.alphas[i][mu]),
        thetas: DVector::from_vec(file.thetas),
        x_in,
        x_out,
        solver: SolverMetadata {
            rule: meta.rule,
            bias_mode: meta.bias_mode,
            tol: meta.tol,
            seed: meta.seed,
            converged_per_row: meta.converged_per_row,
            sweeps: meta.sweeps,
            infeasible_per_row: meta.infeasible_per_row,
            margins: meta.margins,
        },
    })
}

/// `<experiment>-<seed>.csv` and `.json` inside `dir`; returns both paths.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<(PathBuf, PathBuf)> {
    let stem = format!("{}-{}", report.name, report.seed);
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_atomic(&csv_path, &report_csv(report)?)?;
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    write_atomic(&json_path, &json)?;
    Ok((csv_path, json_path))
}

/// RFC-4180 table with columns `series,x,mean,sem,n_trials` followed by the
/// union of the rows' extra columns in lexicographic order.
pub fn report_csv(report: &ExperimentReport) -> Result<Vec<u8>> {
    let extras: Vec<&String> = report
        .rows
        .iter()
        .flat_map(|r| r.extras.keys())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["series", "x", "mean", "sem", "n_trials"];
    header.extend(extras.iter().map(|s| s.as_str()));
    w.write_record(&header)?;
    for row in &report.rows {
        let mut rec = vec![
            row.series.clone(),
            row.x.to_string(),
            row.mean.to_string(),
            row.sem.to_string(),
            row.n_trials.to_string(),
        ];
        rec.extend(extras.iter().map(|k| row.extras.get(*k).map_or(String::new(), |v| v.to_string())));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Recall trace: `step,neuron_0,…` rows, then a `#converged=…` footer.
pub fn write_trace(path: &Path, trace: &RecallTrace) -> Result<()> {
    let n = trace.terminal.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["step".to_string()];
    header.extend((0..n).map(|i| format!("neuron_{i}")));
    w.write_record(&header)?;
    for (step, state) in trace.states.iter().enumerate() {
        let mut rec = vec![step.to_string()];
        rec.extend(state.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    let mut out = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    writeln!(
        out,
        "#converged={} steps={} cycle={} ties={}",
        trace.converged, trace.steps, trace.cycle, trace.ties
    )?;
    write_atomic(path, &out)
}

pub fn read_trace(path: &Path) -> Result<RecallTrace> {
    let text = fs::read_to_string(path)?;
    let (body, footer) = text
        .trim_end()
        .rsplit_once('\n')
        .ok_or_else(|| Error::Header("trace is missing its footer".into()))?;
    let footer = FileHeader::parse(&format!("# trace v1 {}", footer.strip_prefix('#').unwrap_or("")))?;
    footer.expect("trace", &["converged", "steps", "cycle", "ties"])?;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut states = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let values = record
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("'{f}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        states.push(values);
    }
    let terminal = states.last().cloned().unwrap_or_default();
    Ok(RecallTrace {
        states,
        converged: footer.get("converged")?,
        cycle: footer.get("cycle")?,
        steps: footer.get("steps")?,
        terminal,
        ties: footer.get("ties")?,
    })
}
