//! Enumerable cell search spaces, samplers, mutation and fitness oracles.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// no_std float math; the lint misses uses that shadow unstable inherent methods.
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::archgraph::{
    canonical_key, normalize, path_encode, prune_extraneous, validate, ArchGraph, GraphKey,
    OpKind, PathEncoding, PathUniverse, Vocabulary,
};
use crate::error::{Error, Result};
use crate::seed;

/// Rejected draws tolerated per requested sample in [`SearchSpace::sample_prune`].
pub const PRUNE_RETRY_CAP: usize = 10_000;

/// An enumerated universe of valid, normalized cells keyed by [`GraphKey`].
#[derive(Debug, Clone)]
pub struct SearchSpace {
    name: String,
    cell_size: usize,
    vocab: Vocabulary,
    max_edges: Option<usize>,
    graphs: Vec<ArchGraph>,
    keys: Vec<GraphKey>,
    index: BTreeMap<GraphKey, usize>,
    universe: PathUniverse,
    /// Optional precomputed one-edit neighborhoods by cell position.
    neighbors: Option<Vec<Vec<u32>>>,
}

/// Edges between non-isolated nodes.
fn live_edges(g: &ArchGraph) -> usize {
    g.edges()
        .filter(|&(i, j)| g.op(i) != OpKind::ISOLATED && g.op(j) != OpKind::ISOLATED)
        .count()
}

impl SearchSpace {
    /// Enumerates every valid cell with `cell_size` nodes over the searchable
    /// ops of `vocab`, keeping the first representative of each isomorphism
    /// class. Cost grows as `2^(n(n-1)/2)`, so this is for small cells.
    pub fn enumerate_cells(
        name: impl Into<String>,
        cell_size: usize,
        vocab: Vocabulary,
        max_edges: Option<usize>,
    ) -> Result<Self> {
        if !(2..=8).contains(&cell_size) {
            return Err(Error::InvalidConfig("exhaustive enumeration supports 2..=8 nodes".into()));
        }
        let n = cell_size;
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let active: Vec<OpKind> = vocab.active_ops().collect();
        if active.is_empty() {
            return Err(Error::InvalidConfig("vocabulary has no searchable operations".into()));
        }
        let mut graphs = Vec::new();
        let mut seen = BTreeSet::new();
        let mut ops = vec![OpKind::ISOLATED; n];
        ops[0] = OpKind::INPUT;
        ops[n - 1] = OpKind::OUTPUT;
        for mask in 0u64..(1u64 << pairs.len()) {
            let mut g = ArchGraph::new(ops.clone(), vec![0; n * n])?;
            for (bit, &(i, j)) in pairs.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    g.set_edge(i, j, true);
                }
            }
            let on_path = g.on_path();
            if !on_path[n - 1] {
                continue;
            }
            let live: Vec<usize> = (1..n - 1).filter(|&v| on_path[v]).collect();
            // Edges touching off-path nodes get rewritten, so only the live
            // wiring identifies this mask; skip masks that differ elsewhere.
            let canonical_mask = g
                .edges()
                .all(|(i, j)| on_path[i] && on_path[j]);
            if !canonical_mask {
                continue;
            }
            for v in &live {
                g.set_op(*v, active[0]);
            }
            let g = normalize(&g)?;
            if max_edges.is_some_and(|m| live_edges(&g) > m) {
                continue;
            }
            let mut choice = vec![0usize; live.len()];
            loop {
                let mut cell = g.clone();
                for (slot, &v) in live.iter().enumerate() {
                    cell.set_op(v, active[choice[slot]]);
                }
                let key = canonical_key(&cell);
                if seen.insert(key) {
                    graphs.push(cell);
                }
                // Odometer over op assignments of the live nodes.
                let mut pos = 0;
                while pos < choice.len() {
                    choice[pos] += 1;
                    if choice[pos] < active.len() {
                        break;
                    }
                    choice[pos] = 0;
                    pos += 1;
                }
                if pos == choice.len() {
                    break;
                }
            }
        }
        Self::assemble(name.into(), cell_size, vocab, max_edges, graphs)
    }

    /// Builds a space from an explicit list of cells (e.g. an imported table).
    pub fn from_graphs(
        name: impl Into<String>,
        vocab: Vocabulary,
        graphs: Vec<ArchGraph>,
    ) -> Result<Self> {
        let first = graphs.first().ok_or(Error::Empty("search space has no cells"))?;
        let cell_size = first.num_nodes();
        for g in &graphs {
            if g.num_nodes() != cell_size {
                return Err(Error::SizeMismatch(alloc::format!(
                    "cell with {} nodes in a space of {cell_size}-node cells",
                    g.num_nodes()
                )));
            }
            if let Some(op) = g.ops().iter().find(|o| o.0 as usize >= vocab.len()) {
                return Err(Error::VocabularyMismatch { op: op.0, size: vocab.len() });
            }
            let report = validate(g);
            if let Some(v) = report.violations.first() {
                return Err(Error::MalformedGraph(alloc::format!("{v}")));
            }
        }
        let mut seen = BTreeSet::new();
        for g in &graphs {
            let key = canonical_key(g);
            if !seen.insert(key) {
                return Err(Error::DuplicateKey(key));
            }
        }
        Self::assemble(name.into(), cell_size, vocab, None, graphs)
    }

    fn assemble(
        name: String,
        cell_size: usize,
        vocab: Vocabulary,
        max_edges: Option<usize>,
        graphs: Vec<ArchGraph>,
    ) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Empty("search space has no cells"));
        }
        let keys: Vec<GraphKey> = graphs.iter().map(canonical_key).collect();
        let index = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let universe = PathUniverse::for_cells(&vocab, cell_size);
        Ok(Self { name, cell_size, vocab, max_edges, graphs, keys, index, universe, neighbors: None })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn cell_size(&self) -> usize {
        self.cell_size
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn max_edges(&self) -> Option<usize> {
        self.max_edges
    }

    pub fn universe(&self) -> &PathUniverse {
        &self.universe
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Cells in deterministic enumeration order.
    pub fn enumerate(&self) -> impl ExactSizeIterator<Item = &ArchGraph> + '_ {
        self.graphs.iter()
    }

    pub fn graphs(&self) -> &[ArchGraph] {
        &self.graphs
    }

    pub fn keys(&self) -> &[GraphKey] {
        &self.keys
    }

    pub fn get(&self, key: &GraphKey) -> Option<&ArchGraph> {
        self.index.get(key).map(|&i| &self.graphs[i])
    }

    pub fn position(&self, key: &GraphKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn contains(&self, key: &GraphKey) -> bool {
        self.index.contains_key(key)
    }

    pub fn path_encoding(&self, g: &ArchGraph) -> Result<PathEncoding> {
        path_encode(g, &self.universe)
    }

    /// `n` distinct cells drawn uniformly without replacement from the key list.
    pub fn sample_direct<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<ArchGraph>> {
        if n > self.len() {
            return Err(Error::TooManySamples { requested: n, available: self.len() });
        }
        Ok(index::sample(rng, self.len(), n)
            .into_iter()
            .map(|i| self.graphs[i].clone())
            .collect())
    }

    /// Default-style sampler: random adjacency and ops, accepted when the
    /// pruned graph is a legal cell; the unpruned graph is returned after
    /// normalization. Distinct draws may collapse to the same cell.
    pub fn sample_prune<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<ArchGraph>> {
        let size = self.cell_size;
        let active: Vec<OpKind> = self.vocab.active_ops().collect();
        let mut out = Vec::with_capacity(n);
        let mut rejected = 0usize;
        let cap = PRUNE_RETRY_CAP.saturating_mul(n.max(1));
        while out.len() < n {
            let mut ops = vec![OpKind::INPUT; size];
            ops[size - 1] = OpKind::OUTPUT;
            for op in ops.iter_mut().take(size - 1).skip(1) {
                *op = active[rng.random_range(0..active.len())];
            }
            let mut g = ArchGraph::new(ops, vec![0; size * size])?;
            for i in 0..size {
                for j in i + 1..size {
                    if rng.random::<bool>() {
                        g.set_edge(i, j, true);
                    }
                }
            }
            let accepted = match prune_extraneous(&g) {
                Ok(pruned) => self.max_edges.is_none_or(|m| pruned.num_edges() <= m),
                Err(_) => false,
            };
            if accepted {
                let cell = normalize(&g)?;
                if self.contains(&canonical_key(&cell)) {
                    out.push(cell);
                    continue;
                }
            }
            rejected += 1;
            if rejected >= cap {
                return Err(Error::RetryCapExhausted(rejected));
            }
        }
        Ok(out)
    }

    /// Precomputes every cell's one-edit neighborhood so mutation becomes a
    /// lookup. Worth it for small spaces queried many times.
    pub fn build_neighbor_index(&mut self) {
        let lists = self
            .graphs
            .iter()
            .map(|g| self.compute_one_edit(g).into_iter().map(|i| i as u32).collect())
            .collect();
        self.neighbors = Some(lists);
    }

    pub fn has_neighbor_index(&self) -> bool {
        self.neighbors.is_some()
    }

    /// Distinct valid cells one atomic edit away from `parent`: one flipped
    /// upper-triangular adjacency bit or one changed interior op. A flip that
    /// puts an `isolated` node on a path yields one neighbor per op choice.
    /// Cells are returned as the space's stored representatives.
    pub fn one_edit_neighbors(&self, parent: &ArchGraph) -> Vec<ArchGraph> {
        self.one_edit_positions(parent).into_iter().map(|i| self.graphs[i].clone()).collect()
    }

    /// Positions of [`SearchSpace::one_edit_neighbors`].
    pub fn one_edit_positions(&self, parent: &ArchGraph) -> Vec<usize> {
        if let Some(i) = self.neighbors.as_ref().and(self.position(&canonical_key(parent))) {
            return self.neighbors_of(i);
        }
        self.compute_one_edit(parent)
    }

    fn neighbors_of(&self, i: usize) -> Vec<usize> {
        match &self.neighbors {
            Some(lists) => lists[i].iter().map(|&j| j as usize).collect(),
            None => self.compute_one_edit(&self.graphs[i]),
        }
    }

    fn compute_one_edit(&self, parent: &ArchGraph) -> Vec<usize> {
        let n = parent.num_nodes();
        let parent_key = canonical_key(parent);
        let active: Vec<OpKind> = self.vocab.active_ops().collect();
        let mut seen = BTreeSet::new();
        seen.insert(parent_key);
        let mut out = Vec::new();
        let mut push = |g: ArchGraph, out: &mut Vec<usize>| {
            if let Ok(cell) = normalize(&g) {
                let key = canonical_key(&cell);
                if let Some(&i) = self.index.get(&key) {
                    if seen.insert(key) {
                        out.push(i);
                    }
                }
            }
        };
        for i in 0..n {
            for j in i + 1..n {
                let mut g = parent.clone();
                g.toggle_edge(i, j);
                let on_path = g.on_path();
                let woken: Vec<usize> = (1..n - 1)
                    .filter(|&v| on_path[v] && g.op(v) == OpKind::ISOLATED)
                    .collect();
                let combos = active.len().pow(woken.len() as u32);
                for mut c in 0..combos {
                    let mut h = g.clone();
                    for &v in &woken {
                        h.set_op(v, active[c % active.len()]);
                        c /= active.len();
                    }
                    push(h, &mut out);
                }
            }
        }
        for v in 1..n - 1 {
            if !parent.op(v).is_active() {
                continue;
            }
            for &op in &active {
                if op != parent.op(v) {
                    let mut g = parent.clone();
                    g.set_op(v, op);
                    push(g, &mut out);
                }
            }
        }
        out
    }

    /// One-to-many mutation: `k` pairwise non-isomorphic valid cells, none
    /// isomorphic to `parent` or keyed in `forbidden`. One-edit neighbors are
    /// preferred; two-edit neighbors fill any shortfall.
    pub fn mutate<R: Rng + ?Sized>(
        &self,
        parent: &ArchGraph,
        k: usize,
        rng: &mut R,
        forbidden: &BTreeSet<GraphKey>,
    ) -> Result<Vec<ArchGraph>> {
        if k == 0 {
            return Err(Error::InvalidConfig("mutation needs k >= 1".into()));
        }
        let out = self.mutate_up_to(parent, k, rng, forbidden)?;
        if out.len() < k {
            return Err(Error::NeighborhoodExhausted { requested: k, found: out.len() });
        }
        Ok(out)
    }

    /// Like [`SearchSpace::mutate`] but returns fewer than `k` cells instead of
    /// failing when the two-edit closure runs dry.
    pub fn mutate_up_to<R: Rng + ?Sized>(
        &self,
        parent: &ArchGraph,
        k: usize,
        rng: &mut R,
        forbidden: &BTreeSet<GraphKey>,
    ) -> Result<Vec<ArchGraph>> {
        let parent = normalize(parent)?;
        let parent_pos = self.position(&canonical_key(&parent));
        let first = self.one_edit_positions(&parent);
        let mut pool: Vec<usize> =
            first.iter().copied().filter(|&i| !forbidden.contains(&self.keys[i])).collect();
        if pool.len() >= k {
            return Ok(index::sample(rng, pool.len(), k)
                .into_iter()
                .map(|i| self.graphs[pool[i]].clone())
                .collect());
        }
        pool.shuffle(rng);
        let mut taken: BTreeSet<usize> = pool.iter().copied().collect();
        taken.extend(parent_pos);
        let mut out: Vec<ArchGraph> = pool.iter().map(|&i| self.graphs[i].clone()).collect();
        let mut second = Vec::new();
        for &g in &first {
            for h in self.neighbors_of(g) {
                if !forbidden.contains(&self.keys[h]) && taken.insert(h) {
                    second.push(h);
                }
            }
        }
        let need = (k - out.len()).min(second.len());
        out.extend(index::sample(rng, second.len(), need).into_iter().map(|i| self.graphs[second[i]].clone()));
        Ok(out)
    }
}

/// Stored metrics of one architecture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessEntry {
    pub val_err_mean: f64,
    pub val_noise: f64,
    pub test_err: f64,
}

impl FitnessEntry {
    pub fn check(&self) -> Result<()> {
        for v in [self.val_err_mean, self.test_err] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::ErrorOutOfRange(v));
            }
        }
        if !(self.val_noise >= 0.0 && self.val_noise.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!("noise scale {}", self.val_noise)));
        }
        Ok(())
    }
}

/// Parameters of the synthetic MicroBench fitness landscape.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLandscape {
    pub seed: u64,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub val_noise: f64,
    pub test_offset_sigma: f64,
    pub universe: PathUniverse,
}

impl SyntheticLandscape {
    pub fn mean_val_err(&self, enc: &PathEncoding) -> f64 {
        let z: f64 = self.bias
            + enc.bits.iter().zip(&self.weights).map(|(&b, w)| b as f64 * w).sum::<f64>();
        0.05 + 0.9 * logistic(z)
    }

    pub fn entry(&self, g: &ArchGraph) -> Result<FitnessEntry> {
        let key = canonical_key(g);
        let enc = path_encode(g, &self.universe)?;
        let mean = self.mean_val_err(&enc);
        let mut rng = seed::derived_rng(self.seed, key_seed(&key), TEST_OFFSET_TAG);
        let offset: f64 = StandardNormal.sample(&mut rng);
        let test_err = (mean + self.test_offset_sigma * offset).clamp(1e-6, 1.0 - 1e-6);
        Ok(FitnessEntry { val_err_mean: mean, val_noise: self.val_noise, test_err })
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

const TEST_OFFSET_TAG: u64 = 0x7e57;
const QUERY_TAG: u64 = 0x9e7;

fn key_seed(key: &GraphKey) -> u64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&key.0[..8]);
    u64::from_le_bytes(b)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleKind {
    Synthetic(SyntheticLandscape),
    Tabular,
}

/// Maps architectures to (noisy) validation error and test error.
#[derive(Debug, Clone)]
pub struct FitnessOracle {
    kind: OracleKind,
    table: BTreeMap<GraphKey, FitnessEntry>,
}

/// One evaluated architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub arch: ArchGraph,
    pub key: GraphKey,
    pub val_err: f64,
    pub test_err: f64,
    pub query_index: usize,
}

impl FitnessOracle {
    pub fn tabular(table: BTreeMap<GraphKey, FitnessEntry>) -> Result<Self> {
        for e in table.values() {
            e.check()?;
        }
        Ok(Self { kind: OracleKind::Tabular, table })
    }

    pub fn kind(&self) -> &OracleKind {
        &self.kind
    }

    pub fn table(&self) -> &BTreeMap<GraphKey, FitnessEntry> {
        &self.table
    }

    pub fn entry(&self, key: &GraphKey) -> Option<&FitnessEntry> {
        self.table.get(key)
    }

    fn entry_for(&self, arch: &ArchGraph, key: &GraphKey) -> Result<FitnessEntry> {
        match (self.table.get(key), &self.kind) {
            (Some(e), _) => Ok(*e),
            (None, OracleKind::Synthetic(land)) => land.entry(arch),
            (None, OracleKind::Tabular) => Err(Error::UnknownArchitecture(*key)),
        }
    }

    /// Mean validation error without query noise.
    pub fn mean_val_err(&self, arch: &ArchGraph) -> Result<f64> {
        let key = canonical_key(arch);
        Ok(self.entry_for(arch, &key)?.val_err_mean)
    }

    /// Queries one architecture; a pure function of (key, `query_seed`).
    pub fn evaluate(
        &self,
        arch: &ArchGraph,
        query_seed: u64,
        query_index: usize,
    ) -> Result<EvalRecord> {
        let key = canonical_key(arch);
        let e = self.entry_for(arch, &key)?;
        let mut val_err = e.val_err_mean;
        if e.val_noise > 0.0 {
            let mut rng = seed::derived_rng(key_seed(&key), QUERY_TAG, query_seed);
            // Truncated Gaussian: redraw until the value lands in (0, 1).
            for _ in 0..64 {
                let z: f64 = StandardNormal.sample(&mut rng);
                val_err = e.val_err_mean + e.val_noise * z;
                if val_err > 0.0 && val_err < 1.0 {
                    break;
                }
            }
            val_err = val_err.clamp(1e-6, 1.0 - 1e-6);
        }
        Ok(EvalRecord { arch: arch.clone(), key, val_err, test_err: e.test_err, query_index })
    }

    /// Key and entry of the architecture with the lowest mean validation
    /// error (the ORACLE baseline is its test error). Ties keep the smaller key.
    pub fn val_argmin(&self) -> Option<(GraphKey, FitnessEntry)> {
        self.table
            .iter()
            .min_by(|a, b| a.1.val_err_mean.total_cmp(&b.1.val_err_mean))
            .map(|(k, e)| (*k, *e))
    }
}

/// Settings of the synthetic desk-scale benchmark.
pub mod microbench {
    /// Nodes per cell: input, three interior slots, output.
    pub const CELL_SIZE: usize = 5;
    pub const OPS: [&str; 3] = ["A", "B", "C"];
    pub const VAL_NOISE: f64 = 0.003;
    pub const TEST_OFFSET_SIGMA: f64 = 0.002;
    /// Standard deviation of the per-path weights.
    pub const WEIGHT_SCALE: f64 = 0.3;
    pub const BIAS: f64 = -2.0;
}

/// Exhaustively enumerated 5-node space with a seeded synthetic landscape.
pub fn build_microbench(seed_value: u64) -> Result<(SearchSpace, FitnessOracle)> {
    build_microbench_with(seed_value, microbench::WEIGHT_SCALE, microbench::BIAS)
}

/// MicroBench with explicit landscape weight scale and bias.
pub fn build_microbench_with(seed_value: u64, weight_scale: f64, bias: f64) -> Result<(SearchSpace, FitnessOracle)> {
    let vocab = Vocabulary::with_ops(microbench::OPS)?;
    let mut space = SearchSpace::enumerate_cells("microbench", microbench::CELL_SIZE, vocab, None)?;
    space.build_neighbor_index();
    let universe = space.universe().clone();
    let mut rng = seed::derived_rng(seed_value, 0x1a4d, 0);
    let weights = (0..universe.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            weight_scale * z
        })
        .collect();
    let landscape = SyntheticLandscape {
        seed: seed_value,
        weights,
        bias,
        val_noise: microbench::VAL_NOISE,
        test_offset_sigma: microbench::TEST_OFFSET_SIGMA,
        universe,
    };
    let mut table = BTreeMap::new();
    for (g, key) in space.graphs().iter().zip(space.keys()) {
        table.insert(*key, landscape.entry(g)?);
    }
    Ok((space, FitnessOracle { kind: OracleKind::Synthetic(landscape), table }))
}

/// Smoothing added to every path count before normalizing.
pub const PATH_SMOOTHING: f64 = 0.5;

/// Frequency of path occurrence over a set of architectures.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDistribution {
    pub universe_id: u64,
    pub counts: Vec<u64>,
    /// Total number of set path bits.
    pub total: u64,
    pub smoothing: f64,
    pub probs: Vec<f64>,
}

impl PathDistribution {
    pub fn from_counts(universe_id: u64, counts: Vec<u64>, smoothing: f64) -> Self {
        let total: u64 = counts.iter().sum();
        let denom = total as f64 + smoothing * counts.len() as f64;
        let probs = counts.iter().map(|&c| (c as f64 + smoothing) / denom).collect();
        Self { universe_id, counts, total, smoothing, probs }
    }

    /// `ln(c_j / T)` per path, unsmoothed; `-inf` where a path never occurs.
    pub fn log_frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| if c == 0 { f64::NEG_INFINITY } else { (c as f64 / self.total as f64).ln() })
            .collect()
    }
}

pub fn path_distribution(archs: &[ArchGraph], universe: &PathUniverse) -> Result<PathDistribution> {
    if archs.is_empty() {
        return Err(Error::Empty("path distribution of no architectures"));
    }
    let mut counts = vec![0u64; universe.len()];
    for g in archs {
        let enc = path_encode(g, universe)?;
        for (c, &b) in counts.iter_mut().zip(&enc.bits) {
            *c += b as u64;
        }
    }
    Ok(PathDistribution::from_counts(universe.id(), counts, PATH_SMOOTHING))
}

/// `KL(p ‖ q) = Σ p_i ln(p_i / q_i)`.
pub fn kl_divergence(p: &PathDistribution, q: &PathDistribution) -> Result<f64> {
    if p.universe_id != q.universe_id || p.probs.len() != q.probs.len() {
        return Err(Error::UniverseMismatch);
    }
    let kl: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum();
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archgraph::enumerate_paths;
    use std::sync::OnceLock;

    extern crate std;

    fn micro() -> &'static (SearchSpace, FitnessOracle) {
        static CELL: OnceLock<(SearchSpace, FitnessOracle)> = OnceLock::new();
        CELL.get_or_init(|| build_microbench(0).unwrap())
    }

    #[test]
    fn enumeration_is_clean_and_unique() {
        let (space, _) = micro();
        assert_eq!(space.enumerate().count(), space.len());
        let mut keys = BTreeSet::new();
        for g in space.enumerate() {
            assert!(validate(g).is_clean(), "{g:?}");
            assert!(keys.insert(canonical_key(g)));
        }
    }

    #[test]
    fn direct_sampling_full_permutation() {
        let (space, _) = micro();
        let mut rng = seed::rng(3);
        let all = space.sample_direct(space.len(), &mut rng).unwrap();
        let keys: BTreeSet<_> = all.iter().map(canonical_key).collect();
        assert_eq!(keys.len(), space.len());
        assert!(matches!(
            space.sample_direct(space.len() + 1, &mut rng),
            Err(Error::TooManySamples { .. })
        ));
    }

    #[test]
    fn prune_sampler_returns_valid_cells() {
        let (space, _) = micro();
        let mut rng = seed::rng(5);
        for g in space.sample_prune(200, &mut rng).unwrap() {
            assert!(validate(&g).is_clean());
            assert!(space.contains(&canonical_key(&g)));
        }
    }

    #[test]
    fn mutate_single_neighbor() {
        let (space, _) = micro();
        let mut rng = seed::rng(9);
        let parent = &space.graphs()[17];
        let kids = space.mutate(parent, 1, &mut rng, &BTreeSet::new()).unwrap();
        assert_eq!(kids.len(), 1);
        let neighbors: BTreeSet<_> =
            space.one_edit_neighbors(parent).iter().map(canonical_key).collect();
        assert!(neighbors.contains(&canonical_key(&kids[0])));
        assert!(!neighbors.contains(&canonical_key(parent)));
    }

    #[test]
    fn mutate_fills_from_two_edit_closure() {
        let (space, _) = micro();
        let mut rng = seed::rng(2);
        let parent = &space.graphs()[0];
        let one = space.one_edit_neighbors(parent).len();
        let kids = space.mutate(parent, one + 5, &mut rng, &BTreeSet::new()).unwrap();
        let keys: BTreeSet<_> = kids.iter().map(canonical_key).collect();
        assert_eq!(keys.len(), one + 5);
        assert!(!keys.contains(&canonical_key(parent)));
        let err = space.mutate(parent, space.len(), &mut rng, &BTreeSet::new());
        assert!(matches!(err, Err(Error::NeighborhoodExhausted { .. })));
    }

    #[test]
    fn neighbor_index_matches_direct_computation() {
        let (cached, _) = micro();
        assert!(cached.has_neighbor_index());
        let vocab = Vocabulary::with_ops(microbench::OPS).unwrap();
        let plain = SearchSpace::enumerate_cells("plain", 5, vocab, None).unwrap();
        assert!(!plain.has_neighbor_index());
        for i in (0..plain.len()).step_by(97) {
            let g = &plain.graphs()[i];
            assert_eq!(cached.one_edit_positions(g), plain.one_edit_positions(g));
            let forbidden: BTreeSet<GraphKey> = plain.keys()[..200].iter().copied().collect();
            let a = cached.mutate_up_to(g, 40, &mut seed::rng(i as u64), &forbidden).unwrap();
            let b = plain.mutate_up_to(g, 40, &mut seed::rng(i as u64), &forbidden).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn evaluate_noise_model() {
        let (space, oracle) = micro();
        let g = &space.graphs()[42];
        let a = oracle.evaluate(g, 7, 0).unwrap();
        assert_eq!(a, oracle.evaluate(g, 7, 0).unwrap());
        let b = oracle.evaluate(g, 8, 0).unwrap();
        assert_ne!(a.val_err, b.val_err);
        assert_eq!(a.test_err, b.test_err);
    }

    #[test]
    fn tabular_miss_is_an_error() {
        let (space, _) = micro();
        let oracle = FitnessOracle::tabular(BTreeMap::new()).unwrap();
        assert!(matches!(
            oracle.evaluate(&space.graphs()[0], 0, 0),
            Err(Error::UnknownArchitecture(_))
        ));
    }

    #[test]
    fn path_distribution_of_direct_edge() {
        let (space, _) = micro();
        let g = ArchGraph::from_edges(
            vec![OpKind::INPUT, OpKind::ISOLATED, OpKind::ISOLATED, OpKind::ISOLATED, OpKind::OUTPUT],
            &[(0, 4), (0, 1), (0, 2), (0, 3)],
        )
        .unwrap();
        let d = path_distribution(&[g], space.universe()).unwrap();
        assert_eq!(d.total, 1);
        let argmax = (0..d.probs.len()).max_by(|&a, &b| d.probs[a].total_cmp(&d.probs[b])).unwrap();
        assert_eq!(argmax, 0);
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path_total_counts_set_bits() {
        let (space, _) = micro();
        let sample = &space.graphs()[..50];
        let d = path_distribution(sample, space.universe()).unwrap();
        let expected: usize = sample.iter().map(|g| enumerate_paths(g).len()).sum();
        assert_eq!(d.total as usize, expected);
    }

    #[test]
    fn kl_basics() {
        let (space, _) = micro();
        let p = path_distribution(&space.graphs()[..30], space.universe()).unwrap();
        let q = path_distribution(&space.graphs()[30..90], space.universe()).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert!(kl_divergence(&p, &q).unwrap() > 0.0);
        let other = PathDistribution::from_counts(1, vec![1, 2], 0.5);
        assert_eq!(kl_divergence(&p, &other), Err(Error::UniverseMismatch));
    }
}
