//! Cell architectures as DAGs of typed operation nodes.
//!
//! Every vocabulary reserves the first three operation ids for the roles
//! `input`, `output` and `isolated`; the remaining ids are the searchable
//! operations. A graph is *normalized* when every interior node either lies
//! on an input-to-output path or is typed `isolated` and wired only from the
//! input node.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Index into a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpKind(pub u8);

impl OpKind {
    pub const INPUT: OpKind = OpKind(0);
    pub const OUTPUT: OpKind = OpKind(1);
    pub const ISOLATED: OpKind = OpKind(2);
    /// Id of the first searchable operation.
    pub const FIRST_ACTIVE: u8 = 3;

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn is_active(self) -> bool {
        self.0 >= Self::FIRST_ACTIVE
    }
}

/// Operation names, indexed by [`OpKind`] id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    pub const ROLE_NAMES: [&'static str; 3] = ["input", "output", "isolated"];

    /// Builds a vocabulary from the searchable operation names; the three
    /// role kinds are prepended.
    pub fn with_ops<I, S>(ops: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = Self::ROLE_NAMES.iter().map(|s| s.to_string()).collect();
        names.extend(ops.into_iter().map(Into::into));
        Self::from_names(names)
    }

    /// Accepts a full name list, which must start with the three role kinds.
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        if names.len() < Self::ROLE_NAMES.len()
            || names.iter().zip(Self::ROLE_NAMES).any(|(a, b)| a != b)
        {
            return Err(Error::InvalidConfig(
                "vocabulary must start with \"input\", \"output\", \"isolated\"".into(),
            ));
        }
        if names.len() > u8::MAX as usize {
            return Err(Error::InvalidConfig("vocabulary too large".into()));
        }
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::InvalidConfig("duplicate operation name in vocabulary".into()));
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, op: OpKind) -> Option<&str> {
        self.names.get(op.0 as usize).map(String::as_str)
    }

    pub fn lookup(&self, name: &str) -> Option<OpKind> {
        self.names.iter().position(|n| n == name).map(|i| OpKind(i as u8))
    }

    /// The searchable operations, in id order.
    pub fn active_ops(&self) -> impl Iterator<Item = OpKind> + '_ {
        (OpKind::FIRST_ACTIVE..self.names.len() as u8).map(OpKind)
    }

    pub fn num_active(&self) -> usize {
        self.names.len() - OpKind::FIRST_ACTIVE as usize
    }
}

/// A cell DAG: `n` nodes, row-major `n × n` 0/1 adjacency and one op per node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArchGraph {
    n: usize,
    adj: Vec<u8>,
    ops: Vec<OpKind>,
}

impl ArchGraph {
    /// Checks only the buffer shapes; use [`validate`] for the cell rules.
    pub fn new(ops: Vec<OpKind>, adj: Vec<u8>) -> Result<Self> {
        let n = ops.len();
        if adj.len() != n * n {
            return Err(Error::MalformedGraph(format!(
                "adjacency has {} entries, expected {}",
                adj.len(),
                n * n
            )));
        }
        if adj.iter().any(|&b| b > 1) {
            return Err(Error::MalformedGraph("adjacency entries must be 0 or 1".into()));
        }
        Ok(Self { n, adj, ops })
    }

    pub fn from_edges(ops: Vec<OpKind>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = ops.len();
        let mut adj = vec![0u8; n * n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::MalformedGraph(format!("edge ({i}, {j}) out of range")));
            }
            adj[i * n + j] = 1;
        }
        Ok(Self { n, adj, ops })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn ops(&self) -> &[OpKind] {
        &self.ops
    }

    pub fn op(&self, v: usize) -> OpKind {
        self.ops[v]
    }

    pub fn set_op(&mut self, v: usize, op: OpKind) {
        self.ops[v] = op;
    }

    /// Row-major adjacency bits.
    pub fn adjacency(&self) -> &[u8] {
        &self.adj
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j] != 0
    }

    pub fn set_edge(&mut self, i: usize, j: usize, on: bool) {
        self.adj[i * self.n + j] = on as u8;
    }

    pub fn toggle_edge(&mut self, i: usize, j: usize) {
        self.adj[i * self.n + j] ^= 1;
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.adj
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(move |(k, _)| (k / n, k % n))
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().filter(|&&b| b != 0).count()
    }

    pub fn successors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.adj[v * self.n..(v + 1) * self.n];
        row.iter().enumerate().filter(|(_, &b)| b != 0).map(|(j, _)| j)
    }

    pub fn predecessors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&u| self.adj[u * self.n + v] != 0)
    }

    pub fn is_upper_triangular(&self) -> bool {
        self.edges().all(|(i, j)| i < j)
    }

    /// Row-major `n × vocab_size` one-hot node features.
    pub fn one_hot(&self, vocab_size: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n * vocab_size];
        for (v, op) in self.ops.iter().enumerate() {
            if op.0 as usize >= vocab_size {
                return Err(Error::VocabularyMismatch { op: op.0, size: vocab_size });
            }
            out[v * vocab_size + op.0 as usize] = 1.0;
        }
        Ok(out)
    }

    /// Nodes reachable from node 0 (including it).
    pub fn reachable_from_input(&self) -> Vec<bool> {
        self.reach(0, true)
    }

    /// Nodes from which the last node is reachable (including it).
    pub fn reaches_output(&self) -> Vec<bool> {
        self.reach(self.n - 1, false)
    }

    fn reach(&self, start: usize, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        if self.n == 0 {
            return seen;
        }
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for u in 0..self.n {
                let linked = if forward { self.has_edge(v, u) } else { self.has_edge(u, v) };
                if linked && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }

    /// Nodes lying on at least one input-to-output path.
    pub fn on_path(&self) -> Vec<bool> {
        let fwd = self.reachable_from_input();
        let bwd = self.reaches_output();
        fwd.iter().zip(&bwd).map(|(a, b)| *a && *b).collect()
    }
}

/// Fixed-width isomorphism-invariant digest of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphKey(pub [u8; 16]);

impl GraphKey {
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(32);
        for b in self.0 {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 32 || !s.is_ascii() {
            return None;
        }
        let mut out = [0u8; 16];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()?;
        }
        Some(Self(out))
    }
}

impl fmt::Display for GraphKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    TooFewNodes(usize),
    /// Entry at or below the diagonal.
    LowerTriangularEdge { from: usize, to: usize },
    MissingInput,
    MissingOutput,
    DuplicateInput(usize),
    DuplicateOutput(usize),
    NoInputOutputPath,
    /// Node that cannot reach the output but is not typed `isolated`.
    UnmarkedIsolated(usize),
    /// Node that reaches the output but is not reachable from the input.
    UnreachableFromInput(usize),
    /// `isolated` node with edges other than the single edge from the input.
    IsolatedNodeWired(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewNodes(n) => write!(f, "cell has {n} nodes, at least 2 required"),
            Violation::LowerTriangularEdge { from, to } => {
                write!(f, "lower-triangular edge ({from}, {to})")
            }
            Violation::MissingInput => f.write_str("node 0 is not the input"),
            Violation::MissingOutput => f.write_str("last node is not the output"),
            Violation::DuplicateInput(v) => write!(f, "duplicate input at node {v}"),
            Violation::DuplicateOutput(v) => write!(f, "duplicate output at node {v}"),
            Violation::NoInputOutputPath => f.write_str("no input-to-output path"),
            Violation::UnmarkedIsolated(v) => write!(f, "isolated node unmarked: {v}"),
            Violation::UnreachableFromInput(v) => write!(f, "node {v} unreachable from input"),
            Violation::IsolatedNodeWired(v) => write!(f, "isolated node {v} has stray edges"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every rule a cell breaks. Never fails.
pub fn validate(g: &ArchGraph) -> ValidationReport {
    let n = g.n;
    let mut violations = Vec::new();
    if n < 2 {
        violations.push(Violation::TooFewNodes(n));
        return ValidationReport { violations };
    }
    for (i, j) in g.edges() {
        if i >= j {
            violations.push(Violation::LowerTriangularEdge { from: i, to: j });
        }
    }
    if g.ops[0] != OpKind::INPUT {
        violations.push(Violation::MissingInput);
    }
    if g.ops[n - 1] != OpKind::OUTPUT {
        violations.push(Violation::MissingOutput);
    }
    for v in 1..n {
        if g.ops[v] == OpKind::INPUT {
            violations.push(Violation::DuplicateInput(v));
        }
    }
    for v in 0..n - 1 {
        if g.ops[v] == OpKind::OUTPUT {
            violations.push(Violation::DuplicateOutput(v));
        }
    }
    let fwd = g.reachable_from_input();
    let bwd = g.reaches_output();
    if !fwd[n - 1] {
        violations.push(Violation::NoInputOutputPath);
    }
    for v in 1..n - 1 {
        if g.ops[v] == OpKind::ISOLATED {
            let only_input_edge = g.has_edge(0, v)
                && g.predecessors(v).count() == 1
                && g.successors(v).next().is_none();
            if !only_input_edge {
                violations.push(Violation::IsolatedNodeWired(v));
            }
        } else if !bwd[v] {
            violations.push(Violation::UnmarkedIsolated(v));
        } else if !fwd[v] {
            violations.push(Violation::UnreachableFromInput(v));
        }
    }
    ValidationReport { violations }
}

/// Pads `g` to `target_size` nodes and re-types every interior node that is
/// off all input-to-output paths as `isolated`, wired only from the input.
///
/// Padding nodes are inserted just before the output node. Nodes already on
/// a path keep their edges and kinds.
pub fn insert_isolated_nodes(g: &ArchGraph, target_size: usize) -> Result<ArchGraph> {
    if g.n > target_size {
        return Err(Error::SizeOverflow { actual: g.n, target: target_size });
    }
    if g.n < 2 {
        return Err(Error::MalformedGraph("cell needs an input and an output node".into()));
    }
    let n = target_size;
    let pad = n - g.n;
    let remap = |v: usize| if v == g.n - 1 { n - 1 } else { v };
    let mut ops = vec![OpKind::ISOLATED; n];
    for v in 0..g.n {
        ops[remap(v)] = g.ops[v];
    }
    let mut out = ArchGraph { n, adj: vec![0; n * n], ops };
    for (i, j) in g.edges() {
        out.set_edge(remap(i), remap(j), true);
    }
    let on_path = out.on_path();
    if !on_path[n - 1] {
        return Err(Error::NoPath);
    }
    debug_assert!(pad == 0 || !on_path[g.n - 1]);
    for v in 1..n - 1 {
        if !on_path[v] {
            for u in 0..n {
                out.set_edge(u, v, false);
                out.set_edge(v, u, false);
            }
            out.ops[v] = OpKind::ISOLATED;
            out.set_edge(0, v, true);
        }
    }
    Ok(out)
}

/// Normalizes a cell in place of its current size.
pub fn normalize(g: &ArchGraph) -> Result<ArchGraph> {
    insert_isolated_nodes(g, g.n)
}

/// Keeps only the nodes on some input-to-output path, in original order.
pub fn prune_extraneous(g: &ArchGraph) -> Result<ArchGraph> {
    if g.n < 2 {
        return Err(Error::MalformedGraph("cell needs an input and an output node".into()));
    }
    if !g.is_upper_triangular() {
        return Err(Error::MalformedGraph("adjacency is not strictly upper triangular".into()));
    }
    let on_path = g.on_path();
    if !on_path[g.n - 1] {
        return Err(Error::NoPath);
    }
    let keep: Vec<usize> = (0..g.n).filter(|&v| on_path[v]).collect();
    let m = keep.len();
    let mut out = ArchGraph {
        n: m,
        adj: vec![0; m * m],
        ops: keep.iter().map(|&v| g.ops[v]).collect(),
    };
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            if g.has_edge(i, j) {
                out.set_edge(a, b, true);
            }
        }
    }
    Ok(out)
}

fn hash64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}

fn label_bytes(labels: &mut Vec<u64>) -> Vec<u8> {
    labels.sort_unstable();
    labels.iter().flat_map(|l| l.to_le_bytes()).collect()
}

/// Weisfeiler-Lehman style digest: node labels seeded by (op, is-input,
/// is-output), refined `n` rounds over in- and out-neighbor multisets.
pub fn canonical_key(g: &ArchGraph) -> GraphKey {
    let n = g.n;
    let mut labels: Vec<u64> = (0..n)
        .map(|v| {
            let seed = [g.ops[v].0, (v == 0) as u8, (n > 0 && v == n - 1) as u8];
            hash64(&[b"seed", &seed])
        })
        .collect();
    for _ in 0..n {
        let next: Vec<u64> = (0..n)
            .map(|v| {
                let mut ins: Vec<u64> = g.predecessors(v).map(|u| labels[u]).collect();
                let mut outs: Vec<u64> = g.successors(v).map(|u| labels[u]).collect();
                hash64(&[
                    &labels[v].to_le_bytes(),
                    &label_bytes(&mut ins),
                    &label_bytes(&mut outs),
                ])
            })
            .collect();
        labels = next;
    }
    let mut h = Sha256::new();
    h.update(b"npenas-cell");
    h.update((n as u64).to_le_bytes());
    h.update(label_bytes(&mut labels));
    let d = h.finalize();
    let mut key = [0u8; 16];
    key.copy_from_slice(&d[..16]);
    GraphKey(key)
}

/// Interior op-id sequence of one input-to-output path.
pub type OpPath = Vec<u8>;

/// All distinct input-to-output paths as interior op sequences, sorted.
pub fn enumerate_paths(g: &ArchGraph) -> Vec<OpPath> {
    let mut found = BTreeSet::new();
    if g.n < 2 {
        return Vec::new();
    }
    let reaches = g.reaches_output();
    let mut on_stack = vec![false; g.n];
    let mut seq = Vec::new();
    walk_paths(g, 0, &reaches, &mut on_stack, &mut seq, &mut found);
    found.into_iter().collect()
}

fn walk_paths(
    g: &ArchGraph,
    v: usize,
    reaches: &[bool],
    on_stack: &mut [bool],
    seq: &mut Vec<u8>,
    found: &mut BTreeSet<OpPath>,
) {
    if v == g.n - 1 {
        found.insert(seq.clone());
        return;
    }
    on_stack[v] = true;
    let next: Vec<usize> = g.successors(v).filter(|&u| reaches[u] && !on_stack[u]).collect();
    for u in next {
        let interior = u != g.n - 1;
        if interior {
            seq.push(g.ops[u].0);
        }
        walk_paths(g, u, reaches, on_stack, seq, found);
        if interior {
            seq.pop();
        }
    }
    on_stack[v] = false;
}

/// Number of input-to-output paths, counted with multiplicity.
pub fn count_paths(g: &ArchGraph) -> u64 {
    if g.n < 2 || !g.is_upper_triangular() {
        return 0;
    }
    let mut ways = vec![0u64; g.n];
    ways[g.n - 1] = 1;
    for v in (0..g.n - 1).rev() {
        ways[v] = g.successors(v).map(|u| ways[u]).sum();
    }
    ways[0]
}

/// Ordered set of op sequences indexing a path encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathUniverse {
    id: u64,
    paths: Vec<OpPath>,
    index: BTreeMap<OpPath, usize>,
}

impl PathUniverse {
    /// Every sequence over `ops` of length `0..=max_interior`, in
    /// lexicographic order of op ids.
    pub fn all_sequences(ops: &[OpKind], max_interior: usize) -> Self {
        let mut ids: Vec<u8> = ops.iter().map(|o| o.0).collect();
        ids.sort_unstable();
        ids.dedup();
        let mut paths = vec![Vec::new()];
        let mut frontier: Vec<OpPath> = vec![Vec::new()];
        for _ in 0..max_interior {
            let mut next = Vec::with_capacity(frontier.len() * ids.len());
            for p in &frontier {
                for &id in &ids {
                    let mut q = p.clone();
                    q.push(id);
                    next.push(q);
                }
            }
            paths.extend(next.iter().cloned());
            frontier = next;
        }
        Self::from_paths(paths)
    }

    /// Universe of the searchable ops of `vocab` for cells of `cell_size` nodes.
    pub fn for_cells(vocab: &Vocabulary, cell_size: usize) -> Self {
        let ops: Vec<OpKind> = vocab.active_ops().collect();
        Self::all_sequences(&ops, cell_size.saturating_sub(2))
    }

    pub fn from_paths(mut paths: Vec<OpPath>) -> Self {
        paths.sort();
        paths.dedup();
        let mut h = Sha256::new();
        for p in &paths {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        let d = h.finalize();
        let mut b = [0u8; 8];
        b.copy_from_slice(&d[..8]);
        let index = paths.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        Self { id: u64::from_le_bytes(b), paths, index }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[OpPath] {
        &self.paths
    }

    pub fn position(&self, path: &[u8]) -> Option<usize> {
        self.index.get(path).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathEncoding {
    pub bits: Vec<u8>,
    pub universe_id: u64,
}

impl PathEncoding {
    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }
}

pub fn path_encode(g: &ArchGraph, universe: &PathUniverse) -> Result<PathEncoding> {
    let mut bits = vec![0u8; universe.len()];
    for p in enumerate_paths(g) {
        let j = universe.position(&p).ok_or(Error::UnknownPath(p))?;
        bits[j] = 1;
    }
    Ok(PathEncoding { bits, universe_id: universe.id })
}

/// Flattened strict upper triangle followed by the one-hot op matrix.
pub fn adjacency_encoding(g: &ArchGraph, vocab_size: usize) -> Result<Vec<f64>> {
    let n = g.n;
    let mut out = Vec::with_capacity(n * (n - 1) / 2 + n * vocab_size);
    for i in 0..n {
        for j in i + 1..n {
            out.push(g.has_edge(i, j) as u8 as f64);
        }
    }
    out.extend(g.one_hot(vocab_size)?);
    Ok(out)
}

/// Cell whose operations sit on edges between summation nodes; sum node 0 is
/// the cell input and the last sum node is the cell output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeOpCell {
    pub num_sum_nodes: usize,
    pub edge_ops: BTreeMap<(usize, usize), OpKind>,
}

/// Rewrites an edge-operation cell into node-operation form: one node per
/// edge operation, linked when the operations are consecutive.
pub fn convert_edge_op_cell(c: &EdgeOpCell) -> Result<ArchGraph> {
    let s = c.num_sum_nodes;
    if s < 2 {
        return Err(Error::MalformedGraph("edge cell needs at least two sum nodes".into()));
    }
    let mut indegree = vec![0usize; s];
    for &(i, j) in c.edge_ops.keys() {
        if i >= s || j >= s {
            return Err(Error::MalformedGraph(format!("edge ({i}, {j}) out of range")));
        }
        if i == j {
            return Err(Error::CycleDetected);
        }
        indegree[j] += 1;
    }
    // Kahn's algorithm, smallest index first.
    let mut rank = vec![usize::MAX; s];
    let mut ready: BTreeSet<usize> = (0..s).filter(|&v| indegree[v] == 0).collect();
    let mut next_rank = 0;
    while let Some(v) = ready.pop_first() {
        rank[v] = next_rank;
        next_rank += 1;
        for &(i, j) in c.edge_ops.keys() {
            if i == v {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.insert(j);
                }
            }
        }
    }
    if next_rank != s {
        return Err(Error::CycleDetected);
    }
    let mut edges: Vec<((usize, usize), OpKind)> = c.edge_ops.iter().map(|(&e, &op)| (e, op)).collect();
    edges.sort_by_key(|&((i, j), _)| (rank[i], rank[j], i, j));
    let m = edges.len() + 2;
    let out_node = m - 1;
    let mut ops = vec![OpKind::INPUT];
    ops.extend(edges.iter().map(|&(_, op)| op));
    ops.push(OpKind::OUTPUT);
    let mut g = ArchGraph { n: m, adj: vec![0; m * m], ops };
    for (a, &((i, j), _)) in edges.iter().enumerate() {
        if i == 0 {
            g.set_edge(0, a + 1, true);
        }
        if j == s - 1 {
            g.set_edge(a + 1, out_node, true);
        }
        for (b, &((k, _), _)) in edges.iter().enumerate() {
            if k == j {
                g.set_edge(a + 1, b + 1, true);
            }
        }
    }
    Ok(g)
}

/// Block-diagonal stacking of two cells with one edge from the first cell's
/// output to the second cell's input.
pub fn stack_cells(first: &ArchGraph, second: &ArchGraph) -> Result<ArchGraph> {
    if first.n == 0 || second.n == 0 {
        return Err(Error::SizeMismatch("cannot stack an empty cell".into()));
    }
    let n = first.n + second.n;
    let mut ops = first.ops.clone();
    ops.extend_from_slice(&second.ops);
    let mut g = ArchGraph { n, adj: vec![0; n * n], ops };
    for (i, j) in first.edges() {
        g.set_edge(i, j, true);
    }
    for (i, j) in second.edges() {
        g.set_edge(first.n + i, first.n + j, true);
    }
    g.set_edge(first.n - 1, first.n, true);
    Ok(g)
}

/// Node count of one normal or reduction cell in the two-cell layout.
pub const CELL_PAIR_NODES: usize = 15;
/// Vocabulary size of the two-cell layout.
pub const CELL_PAIR_VOCAB: usize = 11;

/// Composes a normal and a reduction cell into one 30-node graph.
pub fn compose_cell_pair(
    normal: &ArchGraph,
    reduction: &ArchGraph,
    vocab: &Vocabulary,
) -> Result<ArchGraph> {
    if vocab.len() != CELL_PAIR_VOCAB {
        return Err(Error::SizeMismatch(format!(
            "vocabulary has {} kinds, expected {CELL_PAIR_VOCAB}",
            vocab.len()
        )));
    }
    for (name, cell) in [("normal", normal), ("reduction", reduction)] {
        if cell.n != CELL_PAIR_NODES {
            return Err(Error::SizeMismatch(format!(
                "{name} cell has {} nodes, expected {CELL_PAIR_NODES}",
                cell.n
            )));
        }
        if let Some(op) = cell.ops.iter().find(|o| o.0 as usize >= CELL_PAIR_VOCAB) {
            return Err(Error::VocabularyMismatch { op: op.0, size: CELL_PAIR_VOCAB });
        }
    }
    stack_cells(normal, reduction)
}
