//! Dataset manifests, ingestion and serialization.
//!
//! A dataset is a delimited feature table with a header row (one row per
//! node, in index order) plus a whitespace-separated edge list of 0-based
//! node pairs. The manifest names the sensitive and label columns.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fatra_core::graph::{canonical_edges, group_mean_gap, Edge};
use fatra_core::ndmath::Matrix;
use fatra_core::AttributedGraph;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

/// A column given by header name or 0-based position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::Index(i) => write!(f, "#{i}"),
            Column::Name(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub features: PathBuf,
    pub edges: PathBuf,
    pub sensitive: Column,
    pub label: Column,
    /// Remove the sensitive column from the features after reading it.
    #[serde(default)]
    pub drop_sensitive: bool,
}

impl DatasetManifest {
    /// Reads a manifest file; relative paths are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let m: Self = toml::from_str(&text).map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.message().to_string() })?;
        Ok(m.resolved(path.parent().unwrap_or(Path::new("."))))
    }

    pub fn resolved(mut self, base: &Path) -> Self {
        self.features = base.join(&self.features);
        self.edges = base.join(&self.edges);
        self
    }
}

/// Shape and structural fairness statistics of an ingested graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub nodes: usize,
    pub edges: usize,
    pub features: usize,
    /// Mean sensitive balance `u`.
    pub balance: f64,
    /// Mean signed balance `u'`.
    pub signed_balance: f64,
    /// Sensitive homophily `α`.
    pub homophily: f64,
    /// Channel-averaged `μ_{V₁} − μ_{V₀}`.
    pub mean_gap: f64,
}

impl Summary {
    pub fn of(g: &AttributedGraph) -> Self {
        let b = g.sensitive_balance();
        Self {
            nodes: g.n(),
            edges: g.num_edges(),
            features: g.feature_dim(),
            balance: b.mean_balance,
            signed_balance: b.mean_signed,
            homophily: g.sensitive_homophily(),
            mean_gap: group_mean_gap(g.features(), g.sensitive()),
        }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} |E|={} features={} u={:.4} u'={:.4} alpha={:.4} mu1-mu0={:.4}",
            self.nodes, self.edges, self.features, self.balance, self.signed_balance, self.homophily, self.mean_gap
        )
    }
}

#[derive(Clone, Debug)]
pub struct Ingested {
    pub graph: AttributedGraph,
    pub summary: Summary,
    pub warnings: Vec<String>,
}

fn ingest_err(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Ingest { path: path.to_path_buf(), message: message.into() }
}

fn resolve_column(col: &Column, header: &csv::StringRecord, path: &Path) -> Result<usize> {
    match col {
        Column::Index(i) if *i < header.len() => Ok(*i),
        Column::Name(name) => header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| ingest_err(path, format!("column `{name}` not found in header"))),
        _ => Err(ingest_err(path, format!("column {col} out of range ({} columns)", header.len()))),
    }
}

fn binary(values: &[f64], what: &str, path: &Path) -> Result<Vec<u8>> {
    let bad: Vec<usize> = values.iter().enumerate().filter(|(_, &v)| v != 0.0 && v != 1.0).map(|(i, _)| i).collect();
    if bad.is_empty() {
        return Ok(values.iter().map(|&v| v as u8).collect());
    }
    let shown: Vec<String> = bad.iter().take(10).map(|i| i.to_string()).collect();
    let more = if bad.len() > 10 { format!(" (and {} more)", bad.len() - 10) } else { String::new() };
    Err(ingest_err(path, format!("{what} column must be 0/1; offending rows {}{more}", shown.join(", "))))
}

fn read_edges(path: &Path, n: usize, warnings: &mut Vec<String>) -> Result<Vec<Edge>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| s.parse::<usize>().ok();
        let (a, b) = match parts.as_slice() {
            [a, b] => match (parse(a), parse(b)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(ingest_err(path, format!("line {lineno}: expected two node indices"))),
            },
            _ => return Err(ingest_err(path, format!("line {lineno}: expected two node indices"))),
        };
        if a >= n || b >= n {
            return Err(ingest_err(path, format!("line {lineno}: node index out of range for {n} nodes")));
        }
        if a == b {
            warnings.push(format!("{}: line {lineno}: self-loop ({a}, {a}) dropped", path.display()));
        }
        raw.push((a, b));
    }
    Ok(canonical_edges(n, raw)?.0)
}

/// Reads and validates a dataset.
pub fn ingest(m: &DatasetManifest) -> Result<Ingested> {
    let path = &m.features;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => ingest_err(path, "cannot open features file"),
        _ => CliError::Csv(e),
    })?;
    let header = reader.headers()?.clone();
    let s_col = resolve_column(&m.sensitive, &header, path)?;
    let y_col = resolve_column(&m.label, &header, path)?;
    if s_col == y_col {
        return Err(ingest_err(path, "sensitive and label columns coincide"));
    }
    let mut data = Vec::new();
    let (mut sens, mut labels) = (Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(ingest_err(path, format!("row {row}: expected {} fields, found {}", header.len(), record.len())));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| ingest_err(path, format!("row {row}, column {c}: `{field}` is not a finite number")))?;
            if c == y_col {
                labels.push(v);
            } else {
                if c == s_col {
                    sens.push(v);
                }
                data.push(v);
            }
        }
    }
    let n = labels.len();
    let dim = header.len() - 1;
    let sensitive = binary(&sens, "sensitive", path)?;
    let labels = binary(&labels, "label", path)?;
    let mut warnings = Vec::new();
    let edges = read_edges(&m.edges, n, &mut warnings)?;
    let channel = if s_col < y_col { s_col } else { s_col - 1 };
    let features = Matrix::from_vec(n, dim, data)?;
    let mut graph = AttributedGraph::new(features, edges, sensitive, labels)?.with_sensitive_channel(channel)?;
    if m.drop_sensitive {
        graph = graph.drop_sensitive_channel();
    }
    Ok(Ingested { summary: Summary::of(&graph), graph, warnings })
}

/// Loads a manifest file and ingests it, printing warnings to stderr.
pub fn load(manifest: &Path) -> Result<Ingested> {
    let ingested = ingest(&DatasetManifest::load(manifest)?)?;
    for w in &ingested.warnings {
        eprintln!("warning: {w}");
    }
    Ok(ingested)
}

pub const FEATURES_FILE: &str = "features.csv";
pub const EDGES_FILE: &str = "edges.txt";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Writes `features.csv`, `edges.txt` and `manifest.toml` into `dir`.
/// Ingesting the manifest yields a graph equal to `g` (without split
/// masks). Numbers are written in shortest round-trip form.
pub fn write_dataset(g: &AttributedGraph, dir: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let dim = g.feature_dim();
    let channel = g.sensitive_channel();
    let mut header: Vec<String> = (0..dim).map(|c| if Some(c) == channel { "sensitive".to_string() } else { format!("x{c}") }).collect();
    if channel.is_none() {
        header.push("sensitive".into());
    }
    header.push("label".into());

    let fpath = dir.join(FEATURES_FILE);
    let mut w = csv::Writer::from_path(&fpath)?;
    w.write_record(&header)?;
    let mut fields = Vec::with_capacity(header.len());
    for i in 0..g.n() {
        fields.clear();
        fields.extend(g.features().row(i).iter().map(|v| v.to_string()));
        if channel.is_none() {
            fields.push(g.sensitive()[i].to_string());
        }
        fields.push(g.labels()[i].to_string());
        w.write_record(&fields)?;
    }
    w.flush().map_err(io_err(&fpath))?;

    let epath = dir.join(EDGES_FILE);
    let mut out = std::io::BufWriter::new(fs::File::create(&epath).map_err(io_err(&epath))?);
    for &(a, b) in g.edges() {
        writeln!(out, "{a} {b}").map_err(io_err(&epath))?;
    }
    out.flush().map_err(io_err(&epath))?;

    let manifest = DatasetManifest {
        features: FEATURES_FILE.into(),
        edges: EDGES_FILE.into(),
        sensitive: Column::Name("sensitive".into()),
        label: Column::Name("label".into()),
        drop_sensitive: channel.is_none(),
    };
    let mpath = dir.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::write(&mpath, text).map_err(io_err(&mpath))?;
    Ok(manifest.resolved(dir))
}
