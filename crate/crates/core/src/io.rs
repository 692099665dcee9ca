//! Text formats: whitespace edge lists with string node ids, covariate and
//! label CSVs keyed by node id, and JSON with fixed-precision floats.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{CovariateMatrix, LabelVector, Network};

/// A network whose dense indices map back to the identifiers in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub net: Network,
    pub x: CovariateMatrix,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.ids.len()
    }
}

/// `{:.16e}` formatting: 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn ingest(line: usize, msg: impl Into<String>) -> Error {
    Error::Ingest {
        line,
        msg: msg.into(),
    }
}

/// Parses an edge list: one edge per line, two whitespace-separated node
/// identifiers. Blank lines and lines starting with `#` are skipped. Node ids
/// get dense indices in order of first appearance.
pub fn parse_edge_list(text: &str) -> Result<(Vec<String>, Network)> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(ingest(
                lineno,
                format!("expected two node ids, found {}", tokens.len()),
            ));
        }
        if tokens[0] == tokens[1] {
            return Err(ingest(lineno, format!("self-loop on node {}", tokens[0])));
        }
        let mut ends = [0; 2];
        for (slot, tok) in ends.iter_mut().zip(&tokens) {
            *slot = *index.entry(tok.to_string()).or_insert_with(|| {
                ids.push(tok.to_string());
                ids.len() - 1
            });
        }
        let key = (ends[0].min(ends[1]), ends[0].max(ends[1]));
        if let Some(first) = seen.insert(key, lineno) {
            return Err(ingest(
                lineno,
                format!(
                    "duplicate edge {} {} (first on line {first})",
                    tokens[0], tokens[1]
                ),
            ));
        }
        edges.push((ends[0], ends[1]));
    }
    let net = Network::from_edges(ids.len(), &edges)?;
    Ok((ids, net))
}

pub fn load_network(path: &Path) -> Result<(Vec<String>, Network)> {
    parse_edge_list(&read_text(path)?)
}

/// Covariate table as parsed: node ids, column names and row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

/// Parses a covariate CSV with header `node,<name1>,...`. Line numbers in
/// errors count the header as line 1.
pub fn parse_covariates(text: &str) -> Result<CovariateTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| ingest(1, e.to_string()))?;
    if header.get(0) != Some("node") {
        return Err(ingest(1, "header must start with `node`"));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut rows: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            ingest(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record[0].to_string();
        if let Some(first) = rows.insert(id.clone(), line) {
            return Err(ingest(
                line,
                format!("node {id} repeated (first on line {first})"),
            ));
        }
        for (j, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                ingest(
                    line,
                    format!("column {}: `{field}` is not a number", names[j]),
                )
            })?;
            if !v.is_finite() {
                return Err(ingest(
                    line,
                    format!("column {}: non-finite value", names[j]),
                ));
            }
            values.push(v);
        }
        ids.push(id);
    }
    Ok(CovariateTable { ids, names, values })
}

/// Aligns covariates with an edge list. Every network node needs a row;
/// nodes that only appear in the covariate table are appended as isolated
/// nodes, in table order.
pub fn join(ids: Vec<String>, net: &Network, table: &CovariateTable) -> Result<Dataset> {
    let p = table.names.len();
    let row_of: HashMap<&str, usize> = table
        .ids
        .iter()
        .enumerate()
        .map(|(r, id)| (id.as_str(), r))
        .collect();
    let missing: Vec<String> = ids
        .iter()
        .filter(|id| !row_of.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Join { missing });
    }
    let mut ids = ids;
    let known: std::collections::HashSet<String> = ids.iter().cloned().collect();
    ids.extend(table.ids.iter().filter(|id| !known.contains(*id)).cloned());

    let mut values = Vec::with_capacity(ids.len() * p);
    for id in &ids {
        let r = row_of[id.as_str()];
        values.extend_from_slice(&table.values[r * p..(r + 1) * p]);
    }
    let edges: Vec<(usize, usize)> = net.edges().collect();
    let net = Network::from_edges(ids.len(), &edges)?;
    let x = CovariateMatrix::new(ids.len(), table.names.clone(), values)?;
    Ok(Dataset { ids, net, x })
}

/// Loads an edge list and, when given, a covariate CSV. Without covariates
/// the design is intercept-only.
pub fn load_dataset(edges: &Path, covariates: Option<&Path>) -> Result<Dataset> {
    let (ids, net) = load_network(edges)?;
    match covariates {
        Some(path) => join(ids, &net, &parse_covariates(&read_text(path)?)?),
        None => {
            let x = CovariateMatrix::intercept_only(ids.len());
            Ok(Dataset { ids, net, x })
        }
    }
}

pub fn edge_list_string(ids: &[String], net: &Network) -> String {
    let mut out = String::new();
    for (a, b) in net.edges() {
        out.push_str(&ids[a]);
        out.push(' ');
        out.push_str(&ids[b]);
        out.push('\n');
    }
    out
}

pub fn covariates_string(ids: &[String], x: &CovariateMatrix) -> String {
    let mut out = String::from("node");
    for name in x.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for v in x.row(i) {
            out.push(',');
            out.push_str(&format_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// `node,label` CSV with 1-based labels; the background is `K+1`.
pub fn labels_string(ids: &[String], labels: &LabelVector) -> String {
    let mut out = String::from("node,label\n");
    for (id, l) in ids.iter().zip(labels.to_one_based()) {
        out.push_str(&format!("{id},{l}\n"));
    }
    out
}

/// Parses a `node,label` CSV. Labels are kept as given; only positivity is
/// checked.
pub fn parse_labels(text: &str) -> Result<Vec<(String, usize)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| ingest(1, e.to_string()))?;
    if header.len() != 2 || &header[0] != "node" {
        return Err(ingest(1, "header must be `node,label`"));
    }
    let mut out = Vec::new();
    let mut rows: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            ingest(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let label: usize = record[1].parse().ok().filter(|&l| l >= 1).ok_or_else(|| {
            ingest(
                line,
                format!("label `{}` is not a positive integer", &record[1]),
            )
        })?;
        if let Some(first) = rows.insert(record[0].to_string(), line) {
            return Err(ingest(
                line,
                format!("node {} repeated (first on line {first})", &record[0]),
            ));
        }
        out.push((record[0].to_string(), label));
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<Vec<(String, usize)>> {
    parse_labels(&read_text(path)?)
}

/// Pairs two labelings on their common node ids, in the order of `a`. Nodes
/// present in only one file are a join error.
pub fn align_labels(
    a: &[(String, usize)],
    b: &[(String, usize)],
) -> Result<(Vec<usize>, Vec<usize>)> {
    let in_b: HashMap<&str, usize> = b.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let in_a: std::collections::HashSet<&str> = a.iter().map(|(id, _)| id.as_str()).collect();
    let mut missing: Vec<String> = a
        .iter()
        .filter(|(id, _)| !in_b.contains_key(id.as_str()))
        .map(|(id, _)| id.clone())
        .collect();
    missing.extend(
        b.iter()
            .filter(|(id, _)| !in_a.contains(id.as_str()))
            .map(|(id, _)| id.clone()),
    );
    if !missing.is_empty() {
        return Err(Error::Join { missing });
    }
    let la = a.iter().map(|(_, l)| l - 1).collect();
    let lb = a.iter().map(|(id, _)| in_b[id.as_str()] - 1).collect();
    Ok((la, lb))
}

struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        w.write_all(format_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        self.write_f64(w, f64::from(v))
    }
}

/// Compact JSON with every float at 17 significant digits. Non-finite
/// floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(format!("json: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
