//! Text formats for graphs.
//!
//! A single large graph lives in a directory:
//!
//! * `edges.tsv`: `u v [label]` per line, label `0`/`1`.
//! * `features.tsv`: node id followed by the feature values. Ids must cover
//!   `0..n` exactly once; the node count is taken from this file.
//! * `node_labels.tsv` (optional): `id 0|1`. Missing ids are unlabeled.
//!
//! Graph collections are JSON lines, one graph per line, with fields
//! `nodes` (feature vectors), `edges` (`[u, v]` pairs), and optional
//! `node_labels` (0, 1 or null per node) and `graph_label` (0 or 1).
//!
//! Ids are 0-based. Blank lines and lines starting with `#` are skipped in
//! the tab-separated files; columns may be separated by any whitespace.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder};

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.tsv";
pub const NODE_LABELS_FILE: &str = "node_labels.tsv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn loc(path: &Path, line: usize) -> String {
    format!("{}:{}", path.display(), line)
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push((i + 1, t.to_string()));
        }
    }
    Ok(out)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::parse(loc(path, line), format!("invalid {what} {field:?}")))
}

fn parse_label(path: &Path, line: usize, field: &str) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::parse(loc(path, line), format!("label must be 0 or 1, got {field:?}"))),
    }
}

/// Reads a single-graph directory.
pub fn read_graph_dir(dir: &Path) -> Result<Graph> {
    let fpath = dir.join(FEATURES_FILE);
    let rows = data_lines(&fpath)?;
    if rows.is_empty() {
        return Err(Error::parse(fpath.display().to_string(), "no nodes"));
    }
    let n = rows.len();
    let mut dim = None;
    let mut feats: Vec<Option<Vec<f64>>> = vec![None; n];
    for (line, text) in &rows {
        let mut cols = text.split_whitespace();
        let id: usize = parse_field(&fpath, *line, cols.next().unwrap(), "node id")?;
        let values = cols
            .map(|c| parse_field::<f64>(&fpath, *line, c, "feature"))
            .collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(loc(&fpath, *line), "non-finite feature"));
        }
        if *dim.get_or_insert(values.len()) != values.len() || values.is_empty() {
            return Err(Error::parse(loc(&fpath, *line), "inconsistent feature count"));
        }
        if id >= n || feats[id].is_some() {
            return Err(Error::parse(
                loc(&fpath, *line),
                format!("node ids must be 0..{n} without repeats, got {id}"),
            ));
        }
        feats[id] = Some(values);
    }
    let dim = dim.unwrap_or(1);
    let flat: Vec<f64> = feats.into_iter().flat_map(|r| r.unwrap()).collect();
    let features = Array2::from_shape_vec((n, dim), flat).expect("row lengths checked");

    let mut b = GraphBuilder::new(n);
    b.features(features);
    let epath = dir.join(EDGES_FILE);
    for (line, text) in data_lines(&epath)? {
        let cols: Vec<&str> = text.split_whitespace().collect();
        if cols.len() != 2 && cols.len() != 3 {
            return Err(Error::parse(loc(&epath, line), "expected `u v [label]`"));
        }
        let u: usize = parse_field(&epath, line, cols[0], "node id")?;
        let v: usize = parse_field(&epath, line, cols[1], "node id")?;
        let res = match cols.get(2) {
            Some(l) => {
                let y = parse_label(&epath, line, l)?;
                b.add_labeled_edge(u, v, y).map(|_| ())
            }
            None => b.add_edge(u, v).map(|_| ()),
        };
        res.map_err(|e| Error::parse(loc(&epath, line), e.to_string()))?;
    }

    let lpath = dir.join(NODE_LABELS_FILE);
    if lpath.exists() {
        let mut labels = vec![None; n];
        for (line, text) in data_lines(&lpath)? {
            let cols: Vec<&str> = text.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::parse(loc(&lpath, line), "expected `id label`"));
            }
            let id: usize = parse_field(&lpath, line, cols[0], "node id")?;
            if id >= n {
                return Err(Error::parse(loc(&lpath, line), format!("node id {id} out of range")));
            }
            labels[id] = Some(parse_label(&lpath, line, cols[1])?);
        }
        b.node_labels(labels);
    }
    b.build()
}

fn label_str(y: bool) -> &'static str {
    if y {
        "1"
    } else {
        "0"
    }
}

/// Writes `graph` in the directory layout read by [`read_graph_dir`].
pub fn write_graph_dir(graph: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut edges = String::new();
    for (i, &(u, v)) in graph.edges().iter().enumerate() {
        match graph.edge_labels().and_then(|l| l[i]) {
            Some(y) => edges.push_str(&format!("{u}\t{v}\t{}\n", label_str(y))),
            None => edges.push_str(&format!("{u}\t{v}\n")),
        }
    }
    write_atomic(&dir.join(EDGES_FILE), edges.as_bytes())?;

    let mut feats = String::new();
    for (i, row) in graph.features().rows().into_iter().enumerate() {
        feats.push_str(&i.to_string());
        for v in row {
            // `{:?}` keeps full precision so values round-trip exactly.
            feats.push_str(&format!("\t{v:?}"));
        }
        feats.push('\n');
    }
    write_atomic(&dir.join(FEATURES_FILE), feats.as_bytes())?;

    let lpath = dir.join(NODE_LABELS_FILE);
    match graph.node_labels() {
        Some(labels) => {
            let mut out = String::new();
            for (i, y) in labels.iter().enumerate() {
                if let Some(y) = y {
                    out.push_str(&format!("{i}\t{}\n", label_str(*y)));
                }
            }
            write_atomic(&lpath, out.as_bytes())?;
        }
        None if lpath.exists() => fs::remove_file(&lpath).map_err(io_err(&lpath))?,
        None => {}
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    nodes: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_labels: Option<Vec<Option<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    graph_label: Option<u8>,
}

fn label_from_int(v: u8, location: &str) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(Error::parse(location, format!("label must be 0 or 1, got {v}"))),
    }
}

fn record_to_graph(rec: GraphRecord, location: &str) -> Result<Graph> {
    let n = rec.nodes.len();
    if n == 0 {
        return Err(Error::parse(location, "graph has no nodes"));
    }
    let dim = rec.nodes[0].len();
    if dim == 0 || rec.nodes.iter().any(|r| r.len() != dim) {
        return Err(Error::parse(location, "inconsistent feature count"));
    }
    let flat: Vec<f64> = rec.nodes.into_iter().flatten().collect();
    let mut b = GraphBuilder::new(n);
    b.features(Array2::from_shape_vec((n, dim), flat).expect("row lengths checked"));
    for [u, v] in rec.edges {
        b.add_edge(u, v)
            .map_err(|e| Error::parse(location, e.to_string()))?;
    }
    if let Some(labels) = rec.node_labels {
        if labels.len() != n {
            return Err(Error::parse(location, "node_labels length differs from nodes"));
        }
        let labels = labels
            .into_iter()
            .map(|y| y.map(|y| label_from_int(y, location)).transpose())
            .collect::<Result<Vec<_>>>()?;
        b.node_labels(labels);
    }
    if let Some(y) = rec.graph_label {
        b.graph_label(Some(label_from_int(y, location)?));
    }
    b.build().map_err(|e| Error::parse(location, e.to_string()))
}

/// Reads a JSON-lines graph collection.
pub fn read_graph_collection(path: &Path) -> Result<Vec<Graph>> {
    let mut out = Vec::new();
    for (line, text) in data_lines(path)? {
        let location = loc(path, line);
        let rec: GraphRecord = serde_json::from_str(&text)
            .map_err(|e| Error::parse(location.clone(), e.to_string()))?;
        out.push(record_to_graph(rec, &location)?);
    }
    Ok(out)
}

/// Writes a JSON-lines graph collection. Edge labels are not part of the
/// format and are dropped.
pub fn write_graph_collection(graphs: &[Graph], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for g in graphs {
        let rec = GraphRecord {
            nodes: g.features().rows().into_iter().map(|r| r.to_vec()).collect(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            node_labels: g
                .node_labels()
                .map(|l| l.iter().map(|y| y.map(u8::from)).collect()),
            graph_label: g.graph_label().map(u8::from),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

/// Writes through a sibling temporary file and renames it into place, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err(path))
}
