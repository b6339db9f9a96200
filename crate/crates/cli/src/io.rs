//! On-disk formats: the dataset JSON document, coordinate CSV files and the
//! JSON writers shared by every subcommand.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use latent_recovery::{DirectedGraph, Matrix};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub noise: Option<f64>,
}

/// `{schema_version, n, d, arcs, z?, labels?, provenance}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub schema_version: u32,
    pub n: usize,
    /// Latent dimension; unknown for imported graphs.
    pub d: Option<usize>,
    pub arcs: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
    pub provenance: Provenance,
}

impl DatasetFile {
    pub fn from_graph(g: &DirectedGraph, d: Option<usize>, provenance: Provenance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: g.node_count(),
            d,
            arcs: g.arcs().map(|(t, h)| [t, h]).collect(),
            z: None,
            labels: None,
            provenance,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let file: DatasetFile =
            serde_json::from_str(&text).with_context(|| format!("malformed dataset file {}", path.display()))?;
        file.validate().with_context(|| format!("invalid dataset file {}", path.display()))?;
        Ok(file)
    }

    fn validate(&self) -> Result<()> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "unsupported schema_version {}",
            self.schema_version
        );
        if let Some(z) = &self.z {
            ensure!(z.len() == self.n, "z has {} rows for {} nodes", z.len(), self.n);
            if let Some(d) = self.d {
                ensure!(z.iter().all(|r| r.len() == d), "z rows must have {d} columns");
            }
        }
        if let Some(labels) = &self.labels {
            ensure!(labels.len() == self.n, "{} labels for {} nodes", labels.len(), self.n);
        }
        Ok(())
    }

    pub fn graph(&self) -> Result<DirectedGraph> {
        let arcs: Vec<(usize, usize)> = self.arcs.iter().map(|a| (a[0], a[1])).collect();
        Ok(DirectedGraph::new(self.n, &arcs)?)
    }

    pub fn z_matrix(&self) -> Result<Option<Matrix>> {
        self.z.as_ref().map(|z| Ok(Matrix::from_rows(z)?)).transpose()
    }
}

/// Coordinates as `node_id,c0,…` with 17 significant digits.
pub fn write_coords_csv(path: &Path, coords: &Matrix) -> Result<()> {
    let mut out = String::new();
    out.push_str("node_id");
    for j in 0..coords.cols() {
        out.push_str(&format!(",c{j}"));
    }
    out.push('\n');
    for (v, row) in coords.row_iter().enumerate() {
        out.push_str(&v.to_string());
        for x in row {
            out.push_str(&format!(",{x:.16e}"));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn read_coords_csv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty coordinate file")?;
    let cols: Vec<&str> = header.split(',').collect();
    ensure!(cols.first() == Some(&"node_id"), "coordinate header must start with node_id");
    for (j, c) in cols[1..].iter().enumerate() {
        ensure!(*c == format!("c{j}"), "unexpected column '{c}' in header");
    }
    let dim = cols.len() - 1;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        ensure!(fields.len() == dim + 1, "line {}: expected {} fields", i + 2, dim + 1);
        let id: usize = fields[0].trim().parse().with_context(|| format!("line {}: bad node id", i + 2))?;
        ensure!(id == rows.len(), "line {}: node ids must be 0, 1, 2, … in order", i + 2);
        let row = fields[1..]
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .with_context(|| format!("line {}: bad coordinate", i + 2))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, dim));
    }
    Ok(Matrix::from_rows(&rows)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    f.write_all(bytes)?;
    Ok(())
}

/// `<csv>.meta.json` next to a coordinate file.
pub fn meta_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Tab- or whitespace-separated integer pairs; `#` starts a comment.
pub fn read_pairs(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            bail!("{}:{}: expected two columns", path.display(), i + 1);
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .with_context(|| format!("{}:{}: '{s}' is not a node id", path.display(), i + 1))
        };
        out.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(out)
}

/// FNV-1a over the sorted arc list; equal graphs give equal fingerprints.
pub fn graph_fingerprint(g: &DirectedGraph) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(g.node_count() as u64);
    for (t, hd) in g.arcs() {
        feed(t as u64);
        feed(hd as u64);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let m = Matrix::from_rows(&[[0.1, -2.5e-300], [1.0 / 3.0, 12345.678901234567]]).unwrap();
        write_coords_csv(&path, &m).unwrap();
        assert_eq!(read_coords_csv(&path).unwrap(), m);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("node_id,c0,c1\n0,"));
    }

    #[test]
    fn meta_path_appends_suffix() {
        assert_eq!(meta_path(Path::new("out/r.csv")), PathBuf::from("out/r.csv.meta.json"));
    }

    #[test]
    fn fingerprint_ignores_arc_order() {
        let a = DirectedGraph::new(3, &[(0, 1), (2, 1)]).unwrap();
        let b = DirectedGraph::new(3, &[(2, 1), (0, 1), (0, 1)]).unwrap();
        let c = DirectedGraph::new(3, &[(1, 0), (2, 1)]).unwrap();
        assert_eq!(graph_fingerprint(&a), graph_fingerprint(&b));
        assert_ne!(graph_fingerprint(&a), graph_fingerprint(&c));
    }
}
