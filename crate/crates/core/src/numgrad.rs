//! Dense `f64` tensors with a reverse-mode tape.
//!
//! Values live on a [`Tape`]; every primitive appends one node holding its
//! output and whatever it needs for the backward pass. [`Tape::backward`]
//! walks the nodes in reverse recording order once.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

// Float supplies libm-backed math when std is absent.
// no_std float math; the lint misses uses that shadow unstable inherent methods.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::ShapeMismatch {
                op: "tensor",
                detail: format!("shape {shape:?} needs {numel} values, got {}", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: Vec::new(), data: vec![v] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }

    fn rows_cols(&self) -> Option<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Some((*r, *c)),
            _ => None,
        }
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Celu,
    Sigmoid,
    Softplus,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Celu => x.max(0.0) + (x.exp() - 1.0).min(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
        }
    }

    /// Derivative at `x`, given the forward output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => (x > 0.0) as u8 as f64,
            Activation::Celu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Softplus => sigmoid(x),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Celu => "celu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softplus => "softplus",
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-feature batch statistics from a train-mode batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance, used for running statistics.
    pub var: Vec<f64>,
}

/// Neighbor lists in compressed-row form: row `v` lists the nodes whose
/// features are summed into node `v`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Neighborhood {
    pub offsets: Vec<usize>,
    pub indices: Vec<usize>,
}

impl Neighborhood {
    pub fn from_lists(lists: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for l in lists {
            indices.extend_from_slice(l);
            offsets.push(indices.len());
        }
        Self { offsets, indices }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn of(&self, v: usize) -> &[usize] {
        &self.indices[self.offsets[v]..self.offsets[v + 1]]
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Linear { x: Var, w: Var, b: Var },
    Act { x: Var, kind: Activation },
    BatchNormTrain { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    BatchNormEval { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Dropout { x: Var, mask: Vec<f64> },
    Aggregate { h: Var, nbrs: Arc<Neighborhood>, eps: f64 },
    MeanPool { h: Var, membership: Arc<[usize]>, counts: Vec<usize> },
    Add { a: Var, b: Var },
    AddScalar { x: Var },
    Scale { x: Var, c: f64 },
    Sum { x: Var },
    Reshape { x: Var },
    GaussianNll { mu: Var, sigma: Var, y: Vec<f64> },
    Mse { pred: Var, y: Vec<f64> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients returned by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros when `v` did not
    /// influence the loss.
    pub fn get(&self, v: Var) -> Tensor {
        match self.grads.get(v.0).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn check_finite(op: &'static str, t: &Tensor) -> Result<()> {
    if t.data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(op))
    }
}

fn mismatch(op: &'static str, detail: alloc::string::String) -> Error {
    Error::ShapeMismatch { op, detail }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op) -> Result<Var> {
        check_finite(name, &value)?;
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, t: Tensor) -> Result<Var> {
        self.push("leaf", t, Op::Leaf)
    }

    /// `y = x W + b` for `x: B×F_in`, `W: F_in×F_out`, `b: F_out`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (rows, fin) = xv.rows_cols().ok_or_else(|| mismatch("linear", format!("x {:?}", xv.shape)))?;
        let (win, fout) = wv.rows_cols().ok_or_else(|| mismatch("linear", format!("W {:?}", wv.shape)))?;
        if win != fin || bv.numel() != fout {
            return Err(mismatch(
                "linear",
                format!("x {:?}, W {:?}, b {:?}", xv.shape, wv.shape, bv.shape),
            ));
        }
        let mut y = Vec::with_capacity(rows * fout);
        for i in 0..rows {
            y.extend_from_slice(&bv.data);
            let yi = &mut y[i * fout..(i + 1) * fout];
            for (k, &a) in xv.data[i * fin..(i + 1) * fin].iter().enumerate() {
                if a != 0.0 {
                    for (yj, &wj) in yi.iter_mut().zip(&wv.data[k * fout..(k + 1) * fout]) {
                        *yj += a * wj;
                    }
                }
            }
        }
        let out = Tensor { shape: vec![rows, fout], data: y };
        self.push("linear", out, Op::Linear { x, w, b })
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        let xv = self.value(x);
        let data = xv.data.iter().map(|&v| kind.apply(v)).collect();
        let out = Tensor { shape: xv.shape.clone(), data };
        self.push(kind.name(), out, Op::Act { x, kind })
    }

    /// Batch norm over the rows of a `B×F` input with batch statistics.
    pub fn batch_norm_train(&mut self, x: Var, gamma: Var, beta: Var) -> Result<(Var, BatchStats)> {
        let xv = self.value(x);
        let (rows, cols) = xv.rows_cols().ok_or_else(|| mismatch("batch_norm", format!("x {:?}", xv.shape)))?;
        self.check_affine(gamma, beta, cols)?;
        if rows < 2 {
            return Err(Error::BatchTooSmall(rows));
        }
        let mut mean = vec![0.0; cols];
        for r in xv.data.chunks_exact(cols) {
            for (m, &v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let mut var = vec![0.0; cols];
        for r in xv.data.chunks_exact(cols) {
            for ((s, &v), &m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let inv_std: Vec<f64> = var.iter().map(|&s| 1.0 / (s / rows as f64 + BN_EPS).sqrt()).collect();
        let unbiased = var.iter().map(|&s| s / (rows - 1) as f64).collect();
        let (out, xhat) = self.affine_normalize(x, gamma, beta, &mean, &inv_std);
        let stats = BatchStats { mean, var: unbiased };
        let v = self.push("batch_norm", out, Op::BatchNormTrain { x, gamma, beta, xhat, inv_std })?;
        Ok((v, stats))
    }

    /// Batch norm with fixed running statistics.
    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[f64],
        running_var: &[f64],
    ) -> Result<Var> {
        let xv = self.value(x);
        let (_, cols) = xv.rows_cols().ok_or_else(|| mismatch("batch_norm", format!("x {:?}", xv.shape)))?;
        self.check_affine(gamma, beta, cols)?;
        if running_mean.len() != cols || running_var.len() != cols {
            return Err(mismatch("batch_norm", format!("running stats for {cols} features")));
        }
        let inv_std: Vec<f64> = running_var.iter().map(|&v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let (out, xhat) = self.affine_normalize(x, gamma, beta, running_mean, &inv_std);
        self.push("batch_norm", out, Op::BatchNormEval { x, gamma, beta, xhat, inv_std })
    }

    fn check_affine(&self, gamma: Var, beta: Var, cols: usize) -> Result<()> {
        if self.value(gamma).numel() != cols || self.value(beta).numel() != cols {
            return Err(mismatch("batch_norm", format!("affine parameters for {cols} features")));
        }
        Ok(())
    }

    fn affine_normalize(
        &self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[f64],
        inv_std: &[f64],
    ) -> (Tensor, Vec<f64>) {
        let xv = self.value(x);
        let (g, b) = (&self.value(gamma).data, &self.value(beta).data);
        let cols = mean.len();
        let mut xhat = Vec::with_capacity(xv.numel());
        let mut y = Vec::with_capacity(xv.numel());
        for r in xv.data.chunks_exact(cols) {
            for j in 0..cols {
                let h = (r[j] - mean[j]) * inv_std[j];
                xhat.push(h);
                y.push(g[j] * h + b[j]);
            }
        }
        (Tensor { shape: xv.shape.clone(), data: y }, xhat)
    }

    /// Inverted dropout; identity in eval mode or at rate 0.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, mode: Mode, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!("dropout rate {rate}")));
        }
        let xv = self.value(x);
        let mask: Vec<f64> = if mode == Mode::Eval || rate == 0.0 {
            vec![1.0; xv.numel()]
        } else {
            let keep = 1.0 / (1.0 - rate);
            (0..xv.numel()).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
        };
        let data = xv.data.iter().zip(&mask).map(|(a, m)| a * m).collect();
        let out = Tensor { shape: xv.shape.clone(), data };
        self.push("dropout", out, Op::Dropout { x, mask })
    }

    /// GIN neighborhood sum: `out_v = (1 + eps) h_v + Σ_{u ∈ N(v)} h_u`.
    pub fn aggregate_neighbors(&mut self, h: Var, nbrs: Arc<Neighborhood>, eps: f64) -> Result<Var> {
        let hv = self.value(h);
        let (rows, cols) = hv.rows_cols().ok_or_else(|| mismatch("aggregate", format!("H {:?}", hv.shape)))?;
        if nbrs.num_nodes() != rows || nbrs.indices.iter().any(|&u| u >= rows) {
            return Err(mismatch("aggregate", format!("{} nodes, neighborhood of {}", rows, nbrs.num_nodes())));
        }
        let mut out: Vec<f64> = hv.data.iter().map(|&a| (1.0 + eps) * a).collect();
        for v in 0..rows {
            for &u in nbrs.of(v) {
                let (src, dst) = (u * cols, v * cols);
                for j in 0..cols {
                    out[dst + j] += hv.data[src + j];
                }
            }
        }
        let out = Tensor { shape: vec![rows, cols], data: out };
        self.push("aggregate", out, Op::Aggregate { h, nbrs, eps })
    }

    /// Per-graph mean of node rows; `membership[v]` is the graph of row `v`.
    pub fn global_mean_pool(&mut self, h: Var, membership: Arc<[usize]>, num_graphs: usize) -> Result<Var> {
        let hv = self.value(h);
        let (rows, cols) = hv.rows_cols().ok_or_else(|| mismatch("mean_pool", format!("H {:?}", hv.shape)))?;
        if membership.len() != rows || membership.iter().any(|&g| g >= num_graphs) {
            return Err(mismatch("mean_pool", format!("membership for {rows} rows")));
        }
        let mut counts = vec![0usize; num_graphs];
        let mut out = vec![0.0; num_graphs * cols];
        for (v, &g) in membership.iter().enumerate() {
            counts[g] += 1;
            for j in 0..cols {
                out[g * cols + j] += hv.data[v * cols + j];
            }
        }
        if counts.contains(&0) {
            return Err(Error::Empty("graph with no nodes in mean pooling"));
        }
        for (g, &c) in counts.iter().enumerate() {
            out[g * cols..(g + 1) * cols].iter_mut().for_each(|v| *v /= c as f64);
        }
        let out = Tensor { shape: vec![num_graphs, cols], data: out };
        self.push("mean_pool", out, Op::MeanPool { h, membership, counts })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape != bv.shape {
            return Err(mismatch("add", format!("{:?} vs {:?}", av.shape, bv.shape)));
        }
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x + y).collect();
        let out = Tensor { shape: av.shape.clone(), data };
        self.push("add", out, Op::Add { a, b })
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        let xv = self.value(x);
        let out = Tensor { shape: xv.shape.clone(), data: xv.data.iter().map(|v| v + c).collect() };
        self.push("add_scalar", out, Op::AddScalar { x })
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let xv = self.value(x);
        let out = Tensor { shape: xv.shape.clone(), data: xv.data.iter().map(|v| v * c).collect() };
        self.push("scale", out, Op::Scale { x, c })
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data.iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum { x })
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        let out = Tensor::new(shape.to_vec(), xv.data.clone())?;
        self.push("reshape", out, Op::Reshape { x })
    }

    /// Mean Gaussian negative log-likelihood of targets `y`.
    pub fn gaussian_nll(&mut self, mu: Var, sigma: Var, y: &[f64]) -> Result<Var> {
        let (mv, sv) = (self.value(mu), self.value(sigma));
        if mv.numel() != y.len() || sv.numel() != y.len() || y.is_empty() {
            return Err(mismatch("gaussian_nll", format!("{} means, {} sigmas, {} targets", mv.numel(), sv.numel(), y.len())));
        }
        if sv.data.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::NonPositiveSigma);
        }
        let half_ln_2pi = 0.5 * (2.0 * core::f64::consts::PI).ln();
        let total: f64 = mv
            .data
            .iter()
            .zip(&sv.data)
            .zip(y)
            .map(|((&m, &s), &t)| s.ln() + (t - m) * (t - m) / (2.0 * s * s) + half_ln_2pi)
            .sum();
        let out = Tensor::scalar(total / y.len() as f64);
        self.push("gaussian_nll", out, Op::GaussianNll { mu, sigma, y: y.to_vec() })
    }

    pub fn mse(&mut self, pred: Var, y: &[f64]) -> Result<Var> {
        let pv = self.value(pred);
        if pv.numel() != y.len() || y.is_empty() {
            return Err(mismatch("mse", format!("{} predictions, {} targets", pv.numel(), y.len())));
        }
        let total: f64 = pv.data.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
        let out = Tensor::scalar(total / y.len() as f64);
        self.push("mse", out, Op::Mse { pred, y: y.to_vec() })
    }

    /// Reverse-mode pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() || self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::InvalidLoss);
        }
        let shapes: Vec<Vec<usize>> = self.nodes.iter().map(|n| n.value.shape.clone()).collect();
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor { shape: shapes[loss.0].clone(), data: vec![1.0] });
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.backprop(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, f: impl FnOnce(&mut [f64])) {
        let slot = &mut grads[v.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(&self.nodes[v.0].value.shape));
        }
        if let Some(t) = slot.as_mut() {
            f(&mut t.data);
        }
    }

    fn backprop(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        let gy = &g.data;
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (rows, fin) = (xv.shape[0], xv.shape[1]);
                let fout = wv.shape[1];
                self.accumulate(grads, *x, |dx| {
                    // dx = gy W^T, accumulated row-wise over a transposed copy of W.
                    let mut wt = vec![0.0; fin * fout];
                    for k in 0..fin {
                        for j in 0..fout {
                            wt[j * fin + k] = wv.data[k * fout + j];
                        }
                    }
                    for i in 0..rows {
                        let dxi = &mut dx[i * fin..(i + 1) * fin];
                        for (j, &g) in gy[i * fout..(i + 1) * fout].iter().enumerate() {
                            if g != 0.0 {
                                for (d, &w) in dxi.iter_mut().zip(&wt[j * fin..(j + 1) * fin]) {
                                    *d += g * w;
                                }
                            }
                        }
                    }
                });
                self.accumulate(grads, *w, |dw| {
                    for i in 0..rows {
                        let gi = &gy[i * fout..(i + 1) * fout];
                        for k in 0..fin {
                            let a = xv.data[i * fin + k];
                            if a != 0.0 {
                                for (d, &gj) in dw[k * fout..(k + 1) * fout].iter_mut().zip(gi) {
                                    *d += a * gj;
                                }
                            }
                        }
                    }
                });
                self.accumulate(grads, *b, |db| {
                    for gi in gy.chunks_exact(fout) {
                        for (d, &gj) in db.iter_mut().zip(gi) {
                            *d += gj;
                        }
                    }
                });
            }
            Op::Act { x, kind } => {
                let xv = self.value(*x);
                let yv = &node.value.data;
                self.accumulate(grads, *x, |dx| {
                    for (((d, &gi), &xi), &yi) in dx.iter_mut().zip(gy).zip(&xv.data).zip(yv) {
                        *d += gi * kind.derivative(xi, yi);
                    }
                });
            }
            Op::BatchNormTrain { x, gamma, beta, xhat, inv_std } => {
                let cols = inv_std.len();
                let rows = xhat.len() / cols;
                let gam = &self.value(*gamma).data;
                let mut sum_g = vec![0.0; cols];
                let mut sum_gx = vec![0.0; cols];
                for (gr, hr) in gy.chunks_exact(cols).zip(xhat.chunks_exact(cols)) {
                    for j in 0..cols {
                        sum_g[j] += gr[j];
                        sum_gx[j] += gr[j] * hr[j];
                    }
                }
                let nb = rows as f64;
                self.accumulate(grads, *x, |dx| {
                    for ((dr, gr), hr) in dx.chunks_exact_mut(cols).zip(gy.chunks_exact(cols)).zip(xhat.chunks_exact(cols)) {
                        for j in 0..cols {
                            dr[j] += gam[j] * inv_std[j] / nb
                                * (nb * gr[j] - sum_g[j] - hr[j] * sum_gx[j]);
                        }
                    }
                });
                self.accumulate(grads, *gamma, |d| d.iter_mut().zip(&sum_gx).for_each(|(a, b)| *a += b));
                self.accumulate(grads, *beta, |d| d.iter_mut().zip(&sum_g).for_each(|(a, b)| *a += b));
            }
            Op::BatchNormEval { x, gamma, beta, xhat, inv_std } => {
                let cols = inv_std.len();
                let gam = &self.value(*gamma).data;
                let mut sum_g = vec![0.0; cols];
                let mut sum_gx = vec![0.0; cols];
                for (gr, hr) in gy.chunks_exact(cols).zip(xhat.chunks_exact(cols)) {
                    for j in 0..cols {
                        sum_g[j] += gr[j];
                        sum_gx[j] += gr[j] * hr[j];
                    }
                }
                self.accumulate(grads, *x, |dx| {
                    for (dr, gr) in dx.chunks_exact_mut(cols).zip(gy.chunks_exact(cols)) {
                        for j in 0..cols {
                            dr[j] += gr[j] * gam[j] * inv_std[j];
                        }
                    }
                });
                self.accumulate(grads, *gamma, |d| d.iter_mut().zip(&sum_gx).for_each(|(a, b)| *a += b));
                self.accumulate(grads, *beta, |d| d.iter_mut().zip(&sum_g).for_each(|(a, b)| *a += b));
            }
            Op::Dropout { x, mask } => {
                self.accumulate(grads, *x, |dx| {
                    for ((d, &gi), &m) in dx.iter_mut().zip(gy).zip(mask) {
                        *d += gi * m;
                    }
                });
            }
            Op::Aggregate { h, nbrs, eps } => {
                let cols = node.value.shape[1];
                self.accumulate(grads, *h, |dh| {
                    for (d, &gi) in dh.iter_mut().zip(gy) {
                        *d += (1.0 + eps) * gi;
                    }
                    for v in 0..nbrs.num_nodes() {
                        for &u in nbrs.of(v) {
                            for j in 0..cols {
                                dh[u * cols + j] += gy[v * cols + j];
                            }
                        }
                    }
                });
            }
            Op::MeanPool { h, membership, counts } => {
                let cols = node.value.shape[1];
                self.accumulate(grads, *h, |dh| {
                    for (v, &gidx) in membership.iter().enumerate() {
                        let c = counts[gidx] as f64;
                        for j in 0..cols {
                            dh[v * cols + j] += gy[gidx * cols + j] / c;
                        }
                    }
                });
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    self.accumulate(grads, v, |d| d.iter_mut().zip(gy).for_each(|(x, y)| *x += y));
                }
            }
            Op::AddScalar { x } | Op::Reshape { x } => {
                self.accumulate(grads, *x, |d| d.iter_mut().zip(gy).for_each(|(a, b)| *a += b));
            }
            Op::Scale { x, c } => {
                self.accumulate(grads, *x, |d| d.iter_mut().zip(gy).for_each(|(a, b)| *a += c * b));
            }
            Op::Sum { x } => {
                let s = gy[0];
                self.accumulate(grads, *x, |d| d.iter_mut().for_each(|a| *a += s));
            }
            Op::GaussianNll { mu, sigma, y } => {
                let (mv, sv) = (&self.value(*mu).data, &self.value(*sigma).data);
                let scale = gy[0] / y.len() as f64;
                self.accumulate(grads, *mu, |d| {
                    for i in 0..y.len() {
                        d[i] += scale * (mv[i] - y[i]) / (sv[i] * sv[i]);
                    }
                });
                self.accumulate(grads, *sigma, |d| {
                    for i in 0..y.len() {
                        let r = y[i] - mv[i];
                        d[i] += scale * (1.0 / sv[i] - r * r / (sv[i] * sv[i] * sv[i]));
                    }
                });
            }
            Op::Mse { pred, y } => {
                let pv = &self.value(*pred).data;
                let scale = 2.0 * gy[0] / y.len() as f64;
                self.accumulate(grads, *pred, |d| {
                    for i in 0..y.len() {
                        d[i] += scale * (pv[i] - y[i]);
                    }
                });
            }
        }
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 5e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-4 }
    }
}

/// Adam with L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        Self {
            config,
            step: 0,
            first: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(mismatch("adam", format!("{} params, {} grads", params.len(), grads.len())));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.numel() != self.first[i].len() || g.numel() != p.numel() {
                return Err(mismatch("adam", format!("parameter {i} shape {:?}", p.shape)));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for (k, w) in p.data.iter_mut().enumerate() {
                let grad = g.data[k] + c.weight_decay * *w;
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * grad;
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * grad * grad;
                let mhat = m[k] / bias1;
                let vhat = v[k] / bias2;
                *w -= c.lr * mhat / (vhat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}
