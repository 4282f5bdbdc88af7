//! GIN-based performance predictors and their vector-encoding baselines.
//!
//! Both graph predictors share one embedder: three GIN layers (neighborhood
//! sum, two dense layers with activation, batch norm) and a global mean pool
//! to a 32-wide architecture embedding. The uncertainty predictor (CELU) ends
//! in a mean head and a softplus standard-deviation head; the point predictor
//! (ReLU) ends in a single sigmoid output.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

// no_std float math; the lint misses uses that shadow unstable inherent methods.
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::archgraph::{adjacency_encoding, path_encode, ArchGraph, PathUniverse};
use crate::error::{Error, Result};
use crate::numgrad::{
    Activation, AdamConfig, AdamState, BatchStats, Mode, Neighborhood, Tape, Tensor, Var,
    BN_MOMENTUM,
};
use crate::seed;
use crate::space::EvalRecord;

pub const EMBED_WIDTH: usize = 32;
pub const HEAD_WIDTH: usize = 16;
pub const GIN_LAYERS: usize = 3;
pub const DROPOUT_RATE: f64 = 0.1;
pub const SIGMA_FLOOR: f64 = 1e-4;
pub const MLP_HIDDEN: usize = 64;
/// Rows per forward pass when predicting.
const PREDICT_CHUNK: usize = 256;

/// Which neighbors a GIN layer sums into each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// In- and out-neighbors.
    Symmetric,
    /// Predecessors only: messages follow edge direction.
    #[default]
    InOnly,
}

/// Node features and neighbor lists of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    num_nodes: usize,
    features: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl GraphInput {
    pub fn new(g: &ArchGraph, vocab_size: usize, direction: Direction) -> Result<Self> {
        let n = g.num_nodes();
        if n == 0 {
            return Err(Error::Empty("graph with no nodes"));
        }
        let features = g.one_hot(vocab_size)?;
        let mut neighbors = vec![Vec::new(); n];
        for (i, j) in g.edges() {
            neighbors[j].push(i);
            if direction == Direction::Symmetric {
                neighbors[i].push(j);
            }
        }
        Ok(Self { num_nodes: n, features, neighbors })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }
}

/// Disjoint union of several graphs plus a node-to-graph membership vector.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    features: Tensor,
    neighbors: Arc<Neighborhood>,
    membership: Arc<[usize]>,
    num_graphs: usize,
}

impl GraphBatch {
    pub fn new(graphs: &[&GraphInput]) -> Result<Self> {
        let first = graphs.first().ok_or(Error::Empty("batch of no graphs"))?;
        let width = first.features.len() / first.num_nodes;
        let total: usize = graphs.iter().map(|g| g.num_nodes).sum();
        let mut features = Vec::with_capacity(total * width);
        let mut lists = Vec::with_capacity(total);
        let mut membership = Vec::with_capacity(total);
        let mut offset = 0;
        for (gi, g) in graphs.iter().enumerate() {
            if g.features.len() != g.num_nodes * width {
                return Err(Error::ShapeMismatch {
                    op: "graph_batch",
                    detail: format!("feature width differs from {width}"),
                });
            }
            features.extend_from_slice(&g.features);
            for l in &g.neighbors {
                lists.push(l.iter().map(|&u| u + offset).collect::<Vec<_>>());
            }
            membership.extend(core::iter::repeat_n(gi, g.num_nodes));
            offset += g.num_nodes;
        }
        Ok(Self {
            features: Tensor::matrix(total, width, features)?,
            neighbors: Arc::new(Neighborhood::from_lists(&lists)),
            membership: membership.into(),
            num_graphs: graphs.len(),
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.num_graphs
    }
}

/// Running mean and variance of one batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Named parameter tensors and batch-norm running statistics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    running: Vec<RunningStats>,
}

/// One entry of a flat checkpoint: `len` little-endian `f64`s at `offset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamStore {
    fn add(&mut self, name: String, value: Tensor) -> usize {
        self.names.push(name);
        self.values.push(value);
        self.values.len() - 1
    }

    fn add_running(&mut self, width: usize) -> usize {
        self.running.push(RunningStats { mean: vec![0.0; width], var: vec![1.0; width] });
        self.running.len() - 1
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn running(&self) -> &[RunningStats] {
        &self.running
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    fn apply_stats(&mut self, stats: Vec<(usize, BatchStats)>) {
        for (i, s) in stats {
            let r = &mut self.running[i];
            for (m, b) in r.mean.iter_mut().zip(&s.mean) {
                *m = (1.0 - BN_MOMENTUM) * *m + BN_MOMENTUM * b;
            }
            for (v, b) in r.var.iter_mut().zip(&s.var) {
                *v = (1.0 - BN_MOMENTUM) * *v + BN_MOMENTUM * b;
            }
        }
    }

    /// Flat little-endian `f64` buffer of every parameter followed by every
    /// running statistic, with its manifest.
    pub fn checkpoint(&self) -> (Vec<u8>, Vec<CheckpointEntry>) {
        let mut bytes = Vec::new();
        let mut manifest = Vec::new();
        let mut offset = 0;
        let mut put = |name: String, shape: Vec<usize>, data: &[f64], bytes: &mut Vec<u8>| {
            for v in data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            manifest.push(CheckpointEntry { name, shape, offset });
            offset += data.len();
        };
        for (name, t) in self.names.iter().zip(&self.values) {
            put(name.clone(), t.shape().to_vec(), t.data(), &mut bytes);
        }
        for (i, r) in self.running.iter().enumerate() {
            put(format!("bn{i}.running_mean"), vec![r.mean.len()], &r.mean, &mut bytes);
            put(format!("bn{i}.running_var"), vec![r.var.len()], &r.var, &mut bytes);
        }
        (bytes, manifest)
    }

    /// Inverse of [`ParamStore::checkpoint`] for a store of the same layout.
    pub fn load_checkpoint(&mut self, bytes: &[u8], manifest: &[CheckpointEntry]) -> Result<()> {
        let expected = self.values.len() + 2 * self.running.len();
        if manifest.len() != expected {
            return Err(Error::SizeMismatch(format!(
                "checkpoint lists {} tensors, model has {expected}",
                manifest.len()
            )));
        }
        let read = |e: &CheckpointEntry, len: usize| -> Result<Vec<f64>> {
            let numel: usize = e.shape.iter().product();
            if numel != len || bytes.len() < (e.offset + len) * 8 {
                return Err(Error::SizeMismatch(format!("checkpoint entry {}", e.name)));
            }
            Ok(bytes[e.offset * 8..(e.offset + len) * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap_or([0; 8])))
                .collect())
        };
        let p = self.values.len();
        for (i, t) in self.values.iter_mut().enumerate() {
            if manifest[i].name != self.names[i] || manifest[i].shape != t.shape() {
                return Err(Error::SizeMismatch(format!("checkpoint entry {}", manifest[i].name)));
            }
            let data = read(&manifest[i], t.numel())?;
            t.data_mut().copy_from_slice(&data);
        }
        for (i, r) in self.running.iter_mut().enumerate() {
            r.mean = read(&manifest[p + 2 * i], r.mean.len())?;
            r.var = read(&manifest[p + 2 * i + 1], r.var.len())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: usize,
    b: usize,
}

impl Dense {
    /// Uniform fan-in initialization, bound `1/sqrt(fan_in)`.
    fn init<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-bound..bound)).collect::<Vec<_>>();
        let w = Tensor::new(vec![fan_in, fan_out], draw(fan_in * fan_out)).expect("dense shape");
        let b = Tensor::vector(draw(fan_out));
        Self {
            w: store.add(format!("{name}.weight"), w),
            b: store.add(format!("{name}.bias"), b),
        }
    }

    fn forward(&self, f: &mut Forward<'_>, x: Var) -> Result<Var> {
        f.tape.linear(x, f.params[self.w], f.params[self.b])
    }
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gamma: usize,
    beta: usize,
    running: usize,
}

impl Norm {
    fn init(store: &mut ParamStore, name: &str, width: usize) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), Tensor::vector(vec![1.0; width])),
            beta: store.add(format!("{name}.beta"), Tensor::vector(vec![0.0; width])),
            running: store.add_running(width),
        }
    }

    fn forward(&self, f: &mut Forward<'_>, x: Var) -> Result<Var> {
        let (g, b) = (f.params[self.gamma], f.params[self.beta]);
        match f.mode {
            Mode::Train => {
                let (y, stats) = f.tape.batch_norm_train(x, g, b)?;
                f.stats.push((self.running, stats));
                Ok(y)
            }
            Mode::Eval => {
                let r = &f.store.running[self.running];
                f.tape.batch_norm_eval(x, g, b, &r.mean, &r.var)
            }
        }
    }
}

/// Per-pass state threaded through a forward computation.
struct Forward<'a> {
    tape: Tape,
    params: Vec<Var>,
    store: &'a ParamStore,
    mode: Mode,
    stats: Vec<(usize, BatchStats)>,
    rng: &'a mut seed::Rng,
}

impl<'a> Forward<'a> {
    fn new(store: &'a ParamStore, mode: Mode, rng: &'a mut seed::Rng) -> Result<Self> {
        let mut tape = Tape::new();
        let params = store.values.iter().map(|t| tape.leaf(t.clone())).collect::<Result<_>>()?;
        Ok(Self { tape, params, store, mode, stats: Vec::new(), rng })
    }

    fn dropout(&mut self, x: Var) -> Result<Var> {
        self.tape.dropout(x, DROPOUT_RATE, self.mode, self.rng)
    }
}

#[derive(Debug, Clone)]
struct GinLayer {
    fc1: Dense,
    fc2: Dense,
    norm: Norm,
}

/// Three GIN layers and a global mean pool.
#[derive(Debug, Clone)]
pub struct GinEmbedder {
    layers: Vec<GinLayer>,
    activation: Activation,
    eps: f64,
}

impl GinEmbedder {
    fn init<R: Rng + ?Sized>(store: &mut ParamStore, in_width: usize, activation: Activation, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(GIN_LAYERS);
        let mut width = in_width;
        for l in 0..GIN_LAYERS {
            layers.push(GinLayer {
                fc1: Dense::init(store, &format!("gin{l}.fc1"), width, EMBED_WIDTH, rng),
                fc2: Dense::init(store, &format!("gin{l}.fc2"), EMBED_WIDTH, EMBED_WIDTH, rng),
                norm: Norm::init(store, &format!("gin{l}.bn"), EMBED_WIDTH),
            });
            width = EMBED_WIDTH;
        }
        Self { layers, activation, eps: 0.0 }
    }

    fn forward(&self, f: &mut Forward<'_>, batch: &GraphBatch) -> Result<Var> {
        let mut h = f.tape.leaf(batch.features.clone())?;
        for layer in &self.layers {
            h = f.tape.aggregate_neighbors(h, batch.neighbors.clone(), self.eps)?;
            h = layer.fc1.forward(f, h)?;
            h = f.tape.activation(h, self.activation)?;
            h = layer.fc2.forward(f, h)?;
            h = f.tape.activation(h, self.activation)?;
            h = layer.norm.forward(f, h)?;
        }
        f.tape.global_mean_pool(h, batch.membership.clone(), batch.num_graphs)
    }
}

/// Common plumbing of the trainable networks in this module.
trait Network {
    type Sample;
    type Output;

    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
    /// Returns the head variables for a batch.
    fn forward(&self, f: &mut Forward<'_>, batch: &[&Self::Sample]) -> Result<Vec<Var>>;
    fn loss(tape: &mut Tape, heads: &[Var], targets: &[f64]) -> Result<Var>;
    fn read(tape: &Tape, heads: &[Var]) -> Vec<Self::Output>;
}

/// Optimization settings for one predictor fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn uncertainty_default() -> Self {
        Self { epochs: 1000, batch_size: 16, lr: 5e-3, weight_decay: 1e-4, seed: 0 }
    }

    pub fn point_default() -> Self {
        Self { epochs: 300, ..Self::uncertainty_default() }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_epochs(self, epochs: usize) -> Self {
        Self { epochs, ..self }
    }
}

/// Minibatch index lists for one epoch; a trailing singleton joins the
/// previous batch so batch norm always sees two rows.
pub fn epoch_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let last = batches.pop().unwrap_or_default();
        if let Some(prev) = batches.last_mut() {
            prev.extend(last);
        }
    }
    batches
}

/// Cosine-annealed rate for `epoch`, from `base` at epoch 0 toward zero.
pub fn cosine_lr(base: f64, epoch: usize, epochs: usize) -> f64 {
    0.5 * base * (1.0 + (core::f64::consts::PI * epoch as f64 / epochs as f64).cos())
}

/// Mean minibatch loss per epoch.
fn fit<N: Network>(net: &mut N, samples: &[N::Sample], targets: &[f64], cfg: &TrainConfig) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::TooFewRecords(samples.len()));
    }
    if targets.len() != samples.len() {
        return Err(Error::SizeMismatch(format!("{} samples, {} targets", samples.len(), targets.len())));
    }
    if cfg.batch_size < 2 || cfg.epochs == 0 {
        return Err(Error::InvalidConfig(format!("epochs {} batch size {}", cfg.epochs, cfg.batch_size)));
    }
    let adam_cfg = AdamConfig { lr: cfg.lr, weight_decay: cfg.weight_decay, ..AdamConfig::default() };
    let mut adam = AdamState::new(adam_cfg, net.store().values());
    let mut order_rng = seed::derived_rng(cfg.seed, 0xba7c, 0);
    let mut drop_rng = seed::derived_rng(cfg.seed, 0xd209, 0);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        adam.config.lr = cosine_lr(cfg.lr, epoch, cfg.epochs);
        let mut total = 0.0;
        let batches = epoch_batches(samples.len(), cfg.batch_size, &mut order_rng);
        for idx in &batches {
            let batch: Vec<&N::Sample> = idx.iter().map(|&i| &samples[i]).collect();
            let y: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
            let (grads, stats, loss) = {
                let mut f = Forward::new(net.store(), Mode::Train, &mut drop_rng)?;
                let heads = net.forward(&mut f, &batch)?;
                let loss = N::loss(&mut f.tape, &heads, &y)?;
                let g = f.tape.backward(loss)?;
                let grads: Vec<Tensor> = f.params.iter().map(|&p| g.get(p)).collect();
                (grads, core::mem::take(&mut f.stats), f.tape.value(loss).item())
            };
            adam.step(net.store_mut().values_mut(), &grads)?;
            net.store_mut().apply_stats(stats);
            total += loss;
        }
        curve.push(total / batches.len() as f64);
    }
    Ok(curve)
}

fn predict<N: Network>(net: &N, samples: &[&N::Sample]) -> Result<Vec<N::Output>> {
    let mut rng = seed::rng(0);
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(PREDICT_CHUNK) {
        let mut f = Forward::new(net.store(), Mode::Eval, &mut rng)?;
        let heads = net.forward(&mut f, chunk)?;
        out.extend(N::read(&f.tape, &heads));
    }
    Ok(out)
}

/// Gaussian prediction of an architecture's validation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mu: f64,
    pub sigma: f64,
}

/// Graph-based uncertainty estimation network (CELU, mean and sigma heads).
#[derive(Debug, Clone)]
pub struct UncertaintyPredictor {
    store: ParamStore,
    embedder: GinEmbedder,
    fc: Dense,
    mu: Dense,
    sigma: Dense,
    vocab_size: usize,
    direction: Direction,
    losses: Vec<f64>,
}

impl UncertaintyPredictor {
    pub fn init(vocab_size: usize, direction: Direction, seed_value: u64) -> Self {
        let mut rng = seed::derived_rng(seed_value, 0x1417, 0);
        let mut store = ParamStore::default();
        let embedder = GinEmbedder::init(&mut store, vocab_size, Activation::Celu, &mut rng);
        let fc = Dense::init(&mut store, "fc", EMBED_WIDTH, HEAD_WIDTH, &mut rng);
        let mu = Dense::init(&mut store, "mu", HEAD_WIDTH, 1, &mut rng);
        let sigma = Dense::init(&mut store, "sigma", HEAD_WIDTH, 1, &mut rng);
        Self { store, embedder, fc, mu, sigma, vocab_size, direction, losses: Vec::new() }
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Per-epoch mean training loss of the last fit.
    pub fn loss_curve(&self) -> &[f64] {
        &self.losses
    }

    pub fn encode(&self, g: &ArchGraph) -> Result<GraphInput> {
        GraphInput::new(g, self.vocab_size, self.direction)
    }

    pub fn predict(&self, archs: &[ArchGraph]) -> Result<Vec<Gaussian>> {
        let inputs = archs.iter().map(|g| self.encode(g)).collect::<Result<Vec<_>>>()?;
        predict(self, &inputs.iter().collect::<Vec<_>>())
    }

    /// Eval-mode architecture embeddings.
    pub fn embed(&self, archs: &[ArchGraph]) -> Result<Vec<Vec<f64>>> {
        let inputs = archs.iter().map(|g| self.encode(g)).collect::<Result<Vec<_>>>()?;
        embed_with(&self.store, &self.embedder, &inputs)
    }

    /// Sums the training loss over one batch on a fresh tape and returns it
    /// with its gradient per parameter tensor.
    pub fn loss_and_gradients(&self, archs: &[ArchGraph], targets: &[f64], mode: Mode, seed_value: u64) -> Result<(f64, Vec<Tensor>)> {
        let inputs = archs.iter().map(|g| self.encode(g)).collect::<Result<Vec<_>>>()?;
        let batch: Vec<&GraphInput> = inputs.iter().collect();
        let mut rng = seed::rng(seed_value);
        let mut f = Forward::new(&self.store, mode, &mut rng)?;
        let heads = self.forward(&mut f, &batch)?;
        let loss = Self::loss(&mut f.tape, &heads, targets)?;
        let g = f.tape.backward(loss)?;
        Ok((f.tape.value(loss).item(), f.params.iter().map(|&p| g.get(p)).collect()))
    }
}

fn embed_with(store: &ParamStore, embedder: &GinEmbedder, inputs: &[GraphInput]) -> Result<Vec<Vec<f64>>> {
    let mut rng = seed::rng(0);
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(PREDICT_CHUNK) {
        let refs: Vec<&GraphInput> = chunk.iter().collect();
        let batch = GraphBatch::new(&refs)?;
        let mut f = Forward::new(store, Mode::Eval, &mut rng)?;
        let pooled = embedder.forward(&mut f, &batch)?;
        out.extend(f.tape.value(pooled).data().chunks_exact(EMBED_WIDTH).map(<[f64]>::to_vec));
    }
    Ok(out)
}

impl Network for UncertaintyPredictor {
    type Sample = GraphInput;
    type Output = Gaussian;

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward(&self, f: &mut Forward<'_>, batch: &[&GraphInput]) -> Result<Vec<Var>> {
        let batch = GraphBatch::new(batch)?;
        let h = self.embedder.forward(f, &batch)?;
        let h = self.fc.forward(f, h)?;
        let h = f.tape.activation(h, Activation::Celu)?;
        let h = f.dropout(h)?;
        let mu = self.mu.forward(f, h)?;
        let s = self.sigma.forward(f, h)?;
        let s = f.tape.activation(s, Activation::Softplus)?;
        let sigma = f.tape.add_scalar(s, SIGMA_FLOOR)?;
        Ok(vec![mu, sigma])
    }

    fn loss(tape: &mut Tape, heads: &[Var], targets: &[f64]) -> Result<Var> {
        tape.gaussian_nll(heads[0], heads[1], targets)
    }

    fn read(tape: &Tape, heads: &[Var]) -> Vec<Gaussian> {
        let (mu, sigma) = (tape.value(heads[0]).data(), tape.value(heads[1]).data());
        mu.iter().zip(sigma).map(|(&mu, &sigma)| Gaussian { mu, sigma }).collect()
    }
}

/// Graph-based neural predictor (ReLU, sigmoid output).
#[derive(Debug, Clone)]
pub struct PointPredictor {
    store: ParamStore,
    embedder: GinEmbedder,
    fc: Dense,
    out: Dense,
    vocab_size: usize,
    direction: Direction,
    losses: Vec<f64>,
}

impl PointPredictor {
    pub fn init(vocab_size: usize, direction: Direction, seed_value: u64) -> Self {
        let mut rng = seed::derived_rng(seed_value, 0x9017, 0);
        let mut store = ParamStore::default();
        let embedder = GinEmbedder::init(&mut store, vocab_size, Activation::Relu, &mut rng);
        let fc = Dense::init(&mut store, "fc", EMBED_WIDTH, HEAD_WIDTH, &mut rng);
        let out = Dense::init(&mut store, "out", HEAD_WIDTH, 1, &mut rng);
        Self { store, embedder, fc, out, vocab_size, direction, losses: Vec::new() }
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn loss_curve(&self) -> &[f64] {
        &self.losses
    }

    pub fn encode(&self, g: &ArchGraph) -> Result<GraphInput> {
        GraphInput::new(g, self.vocab_size, self.direction)
    }

    pub fn predict(&self, archs: &[ArchGraph]) -> Result<Vec<f64>> {
        let inputs = archs.iter().map(|g| self.encode(g)).collect::<Result<Vec<_>>>()?;
        predict(self, &inputs.iter().collect::<Vec<_>>())
    }

    pub fn embed(&self, archs: &[ArchGraph]) -> Result<Vec<Vec<f64>>> {
        let inputs = archs.iter().map(|g| self.encode(g)).collect::<Result<Vec<_>>>()?;
        embed_with(&self.store, &self.embedder, &inputs)
    }
}

impl Network for PointPredictor {
    type Sample = GraphInput;
    type Output = f64;

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward(&self, f: &mut Forward<'_>, batch: &[&GraphInput]) -> Result<Vec<Var>> {
        let batch = GraphBatch::new(batch)?;
        let h = self.embedder.forward(f, &batch)?;
        let h = self.fc.forward(f, h)?;
        let h = f.tape.activation(h, Activation::Relu)?;
        let h = f.dropout(h)?;
        let y = self.out.forward(f, h)?;
        Ok(vec![f.tape.activation(y, Activation::Sigmoid)?])
    }

    fn loss(tape: &mut Tape, heads: &[Var], targets: &[f64]) -> Result<Var> {
        tape.mse(heads[0], targets)
    }

    fn read(tape: &Tape, heads: &[Var]) -> Vec<f64> {
        tape.value(heads[0]).data().to_vec()
    }
}

fn records_to_inputs(records: &[EvalRecord], vocab_size: usize, direction: Direction) -> Result<(Vec<GraphInput>, Vec<f64>)> {
    let inputs = records
        .iter()
        .map(|r| GraphInput::new(&r.arch, vocab_size, direction))
        .collect::<Result<Vec<_>>>()?;
    let targets = records.iter().map(|r| r.val_err).collect();
    Ok((inputs, targets))
}

/// Fits a freshly initialized uncertainty predictor by Gaussian NLL.
pub fn train_uncertainty(records: &[EvalRecord], vocab_size: usize, direction: Direction, cfg: &TrainConfig) -> Result<UncertaintyPredictor> {
    if records.len() < 2 {
        return Err(Error::TooFewRecords(records.len()));
    }
    let mut net = UncertaintyPredictor::init(vocab_size, direction, cfg.seed);
    let (inputs, targets) = records_to_inputs(records, vocab_size, direction)?;
    net.losses = fit(&mut net, &inputs, &targets, cfg)?;
    Ok(net)
}

/// Fits a freshly initialized point predictor by mean squared error.
pub fn train_point(records: &[EvalRecord], vocab_size: usize, direction: Direction, cfg: &TrainConfig) -> Result<PointPredictor> {
    if records.len() < 2 {
        return Err(Error::TooFewRecords(records.len()));
    }
    let mut net = PointPredictor::init(vocab_size, direction, cfg.seed);
    let (inputs, targets) = records_to_inputs(records, vocab_size, direction)?;
    net.losses = fit(&mut net, &inputs, &targets, cfg)?;
    Ok(net)
}

/// One Thompson draw from `N(mu, sigma^2)`.
pub fn thompson_sample<R: Rng + ?Sized>(mu: f64, sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mu + sigma * z
}

/// Fixed-length vector view of a cell for the MLP baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorEncoding {
    /// Binary input-to-output path indicators.
    Path,
    /// Upper-triangular adjacency bits followed by one-hot ops.
    Adjacency,
}

impl VectorEncoding {
    pub fn encode(self, g: &ArchGraph, universe: &PathUniverse, vocab_size: usize) -> Result<Vec<f64>> {
        match self {
            VectorEncoding::Path => Ok(path_encode(g, universe)?.to_f64()),
            VectorEncoding::Adjacency => adjacency_encoding(g, vocab_size),
        }
    }
}

/// Fully connected regressor (two hidden ReLU layers of width 64).
#[derive(Debug, Clone)]
pub struct MlpPredictor {
    store: ParamStore,
    layers: [Dense; 3],
    encoding: VectorEncoding,
    universe: PathUniverse,
    vocab_size: usize,
    losses: Vec<f64>,
}

impl MlpPredictor {
    pub fn init(encoding: VectorEncoding, universe: PathUniverse, vocab_size: usize, cell_size: usize, seed_value: u64) -> Self {
        let width = match encoding {
            VectorEncoding::Path => universe.len(),
            VectorEncoding::Adjacency => cell_size * (cell_size - 1) / 2 + cell_size * vocab_size,
        };
        let mut rng = seed::derived_rng(seed_value, 0x3170, 0);
        let mut store = ParamStore::default();
        let layers = [
            Dense::init(&mut store, "mlp0", width, MLP_HIDDEN, &mut rng),
            Dense::init(&mut store, "mlp1", MLP_HIDDEN, MLP_HIDDEN, &mut rng),
            Dense::init(&mut store, "mlp2", MLP_HIDDEN, 1, &mut rng),
        ];
        Self { store, layers, encoding, universe, vocab_size, losses: Vec::new() }
    }

    pub fn encoding(&self) -> VectorEncoding {
        self.encoding
    }

    pub fn loss_curve(&self) -> &[f64] {
        &self.losses
    }

    pub fn encode(&self, g: &ArchGraph) -> Result<Vec<f64>> {
        self.encoding.encode(g, &self.universe, self.vocab_size)
    }

    pub fn predict(&self, archs: &[ArchGraph]) -> Result<Vec<f64>> {
        let rows = archs.iter().map(|g| self.encode(g)).collect::<Result<Vec<_>>>()?;
        predict(self, &rows.iter().collect::<Vec<_>>())
    }
}

impl Network for MlpPredictor {
    type Sample = Vec<f64>;
    type Output = f64;

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward(&self, f: &mut Forward<'_>, batch: &[&Vec<f64>]) -> Result<Vec<Var>> {
        let width = batch.first().map_or(0, |r| r.len());
        let data: Vec<f64> = batch.iter().flat_map(|r| r.iter().copied()).collect();
        let mut h = f.tape.leaf(Tensor::matrix(batch.len(), width, data)?)?;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(f, h)?;
            if i + 1 < self.layers.len() {
                h = f.tape.activation(h, Activation::Relu)?;
            }
        }
        Ok(vec![h])
    }

    fn loss(tape: &mut Tape, heads: &[Var], targets: &[f64]) -> Result<Var> {
        tape.mse(heads[0], targets)
    }

    fn read(tape: &Tape, heads: &[Var]) -> Vec<f64> {
        tape.value(heads[0]).data().to_vec()
    }
}

/// Fits an MLP baseline on the chosen vector encoding by mean squared error.
pub fn baseline_mlp(
    encoding: VectorEncoding,
    records: &[EvalRecord],
    universe: &PathUniverse,
    vocab_size: usize,
    cfg: &TrainConfig,
) -> Result<MlpPredictor> {
    let first = records.first().ok_or(Error::TooFewRecords(0))?;
    let mut net = MlpPredictor::init(encoding, universe.clone(), vocab_size, first.arch.num_nodes(), cfg.seed);
    let rows = records.iter().map(|r| net.encode(&r.arch)).collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = records.iter().map(|r| r.val_err).collect();
    net.losses = fit(&mut net, &rows, &targets, cfg)?;
    Ok(net)
}
