//! Benchmark tables as JSON Lines: a header line, then one row per cell.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use npenas_core::archgraph::{canonical_key, validate};
use npenas_core::space::FitnessEntry;
use npenas_core::{ArchGraph, FitnessOracle, SearchSpace, Vocabulary};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::archjson::ArchJson;
use crate::error::{CliError, CliResult};

pub const FORMAT: &str = "npenas-bench/1";

/// Spaces up to this size get a precomputed mutation index on import.
const NEIGHBOR_INDEX_LIMIT: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub space: String,
    pub vocab: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    /// Hex SHA-256 of the row lines, each terminated by `\n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checksum: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub arch: ArchJson,
    pub val_err_mean: f64,
    pub val_noise: f64,
    pub test_err: f64,
}

/// A loaded table: the space of its cells and a tabular oracle.
#[derive(Debug, Clone)]
pub struct Bench {
    pub space: SearchSpace,
    pub oracle: FitnessOracle,
    pub checksum: String,
}

pub fn checksum(rows: &[String]) -> String {
    let mut h = Sha256::new();
    for r in rows {
        h.update(r.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Renders a table with rows sorted by canonical key.
pub fn render(space: &SearchSpace, oracle: &FitnessOracle) -> CliResult<String> {
    let mut rows = Vec::with_capacity(space.len());
    let mut order: Vec<usize> = (0..space.len()).collect();
    order.sort_by_key(|&i| space.keys()[i]);
    for i in order {
        let key = &space.keys()[i];
        let e = oracle
            .entry(key)
            .ok_or(npenas_core::Error::UnknownArchitecture(*key))?;
        let row = Row {
            arch: ArchJson::from(&space.graphs()[i]),
            val_err_mean: e.val_err_mean,
            val_noise: e.val_noise,
            test_err: e.test_err,
        };
        rows.push(serde_json::to_string(&row).expect("rows serialize"));
    }
    let header = Header {
        format: FORMAT.into(),
        space: space.name().into(),
        vocab: space.vocab().names().to_vec(),
        cell_size: Some(space.cell_size()),
        rows: Some(rows.len()),
        checksum: Some(checksum(&rows)),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}

pub fn export(space: &SearchSpace, oracle: &FitnessOracle, path: &Path) -> CliResult<()> {
    let text = render(space, oracle)?;
    crate::record::write_atomic(path, text.as_bytes())
}

pub fn load(path: &Path) -> CliResult<Bench> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    parse(&text, path)
}

/// Parses and validates a table; errors name the first offending line.
pub fn parse(text: &str, path: &Path) -> CliResult<Bench> {
    let fail = |line: usize, message: String| CliError::Bench { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| fail(1, "missing header".into()))?;
    let header: Header = serde_json::from_str(first).map_err(|e| fail(1, format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(fail(1, format!("unsupported format {:?}", header.format)));
    }
    let vocab = Vocabulary::from_names(header.vocab.clone()).map_err(|e| fail(1, e.to_string()))?;

    let mut graphs = Vec::new();
    let mut table = BTreeMap::new();
    let mut raw = Vec::new();
    let mut first_line = BTreeMap::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(line).map_err(|e| fail(no, format!("bad row: {e}")))?;
        let g = ArchGraph::try_from(row.arch).map_err(|e| fail(no, e.to_string()))?;
        let expected_nodes = header.cell_size.or(graphs.first().map(ArchGraph::num_nodes));
        if let Some(n) = expected_nodes.filter(|&n| n != g.num_nodes()) {
            return Err(fail(no, format!("cell has {} nodes, expected {n}", g.num_nodes())));
        }
        if let Some(op) = g.ops().iter().find(|o| o.id() as usize >= vocab.len()) {
            return Err(fail(no, format!("operation id {} outside the vocabulary", op.id())));
        }
        if let Some(v) = validate(&g).violations.first() {
            return Err(fail(no, format!("invalid cell: {v}")));
        }
        let entry = FitnessEntry { val_err_mean: row.val_err_mean, val_noise: row.val_noise, test_err: row.test_err };
        entry.check().map_err(|e| fail(no, e.to_string()))?;
        let key = canonical_key(&g);
        if let Some(prev) = first_line.insert(key, no) {
            return Err(fail(no, format!("duplicate architecture {key} (first on line {prev})")));
        }
        table.insert(key, entry);
        graphs.push(g);
        raw.push(line.to_string());
    }
    let last = text.lines().count().max(1);
    if let Some(n) = header.rows {
        if n != graphs.len() {
            return Err(fail(last, format!("header declares {n} rows, found {}", graphs.len())));
        }
    }
    let sum = checksum(&raw);
    if let Some(expected) = &header.checksum {
        if *expected != sum {
            return Err(fail(1, format!("checksum mismatch: header {expected}, rows {sum}")));
        }
    }
    let mut space = SearchSpace::from_graphs(header.space, vocab, graphs).map_err(|e| fail(2, e.to_string()))?;
    if space.len() <= NEIGHBOR_INDEX_LIMIT {
        space.build_neighbor_index();
    }
    let oracle = FitnessOracle::tabular(table)?;
    Ok(Bench { space, oracle, checksum: sum })
}
