//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr with the
//! measured values and runtime, then asserts. Tolerances are fixed here.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use npenas::config::{AlgoEntry, AlgoSpec, DirectionName, ExperimentConfig, NpenasParams, SpaceSource};
use npenas::record::TrialFile;
use npenas::runner;
use npenas::studies::{self, FanoutConfig, Method, PredictorStudyConfig, Sampler};
use npenas_core::archgraph::{canonical_key, convert_edge_op_cell, enumerate_paths, normalize, EdgeOpCell};
use npenas_core::numgrad::{Activation, Mode, Neighborhood, Tape, Tensor, Var};
use npenas_core::predictor::{thompson_sample, Direction, UncertaintyPredictor};
use npenas_core::space::build_microbench;
use npenas_core::{seed, stats, ArchGraph, FitnessOracle, GraphKey, OpKind, SearchSpace};
use rand::Rng;

const MICRO_SEED: u64 = 0;
const NOISE_SIGMA: f64 = npenas_core::space::microbench::VAL_NOISE;

/// Training epochs per NPENAS iteration in the 600-trial comparison. The
/// library defaults (300 and 1000) do not fit the runtime limit on one core.
const NP_EPOCHS: usize = 30;
const BO_EPOCHS: usize = 20;

fn micro() -> &'static (SearchSpace, FitnessOracle) {
    static M: OnceLock<(SearchSpace, FitnessOracle)> = OnceLock::new();
    M.get_or_init(|| build_microbench(MICRO_SEED).unwrap())
}

fn report(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration, limit: Duration) {
    let within = elapsed <= limit;
    let verdict = if pass && within { "PASS" } else { "FAIL" };
    // Written past the test harness's output capture so passing runs show it too.
    let _ = writeln!(
        std::io::stderr(),
        "criterion {id} {verdict} {name}: {detail}; runtime {:.1} s (limit {} s{})",
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if within { "" } else { ", exceeded" }
    );
    assert!(pass && within, "criterion {id} failed: {detail}");
}

// ---- 1. gradient integrity ------------------------------------------------

fn rand_tensor(shape: &[usize], rng: &mut seed::Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Largest elementwise |analytic - numeric| / max(|analytic| + |numeric|, 1e-2).
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-2)
}

fn grad_check(inputs: &[Tensor], f: &dyn Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone()).unwrap()).collect();
    let loss = f(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();
    let eval = |ins: &[Tensor]| {
        let mut t = Tape::new();
        let vs: Vec<Var> = ins.iter().map(|x| t.leaf(x.clone()).unwrap()).collect();
        let l = f(&mut t, &vs);
        t.value(l).item()
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]);
        for k in 0..input.numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[k] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[k] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            worst = worst.max(rel_err(analytic.data()[k], numeric));
        }
    }
    worst
}

#[test]
fn criterion_1_gradient_integrity() {
    let start = Instant::now();
    let mut rng = seed::rng(0x9a1);
    let mut results: Vec<(&str, f64, f64)> = Vec::new();
    let targets = |n: usize, rng: &mut seed::Rng| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };

    let ins = [rand_tensor(&[5, 4], &mut rng), rand_tensor(&[4, 3], &mut rng), rand_tensor(&[3], &mut rng)];
    let y = targets(15, &mut rng);
    results.push(("linear", grad_check(&ins, &|t, v| {
        let o = t.linear(v[0], v[1], v[2]).unwrap();
        t.mse(o, &y).unwrap()
    }), 1e-6));

    for (kind, name, tol) in [
        (Activation::Sigmoid, "sigmoid", 1e-6),
        (Activation::Softplus, "softplus", 1e-6),
        (Activation::Celu, "celu", 1e-4),
        (Activation::Relu, "relu", 1e-4),
    ] {
        let mut x = rand_tensor(&[6, 4], &mut rng);
        // Keep the kinked activations off their kink at zero.
        x.data_mut().iter_mut().for_each(|v| if v.abs() < 1e-3 { *v += 1e-2 });
        let y = targets(24, &mut rng);
        results.push((name, grad_check(&[x], &|t, v| {
            let o = t.activation(v[0], kind).unwrap();
            t.mse(o, &y).unwrap()
        }), tol));
    }

    let ins = [rand_tensor(&[6, 3], &mut rng), rand_tensor(&[3], &mut rng), rand_tensor(&[3], &mut rng)];
    let y = targets(18, &mut rng);
    results.push(("batch_norm_train", grad_check(&ins, &|t, v| {
        let (o, _) = t.batch_norm_train(v[0], v[1], v[2]).unwrap();
        t.mse(o, &y).unwrap()
    }), 1e-6));
    results.push(("batch_norm_eval", grad_check(&ins, &|t, v| {
        let o = t.batch_norm_eval(v[0], v[1], v[2], &[0.1, -0.2, 0.3], &[1.5, 0.5, 2.0]).unwrap();
        t.mse(o, &y).unwrap()
    }), 1e-6));

    let x = rand_tensor(&[8, 4], &mut rng);
    let y = targets(32, &mut rng);
    results.push(("dropout", grad_check(&[x], &|t, v| {
        let o = t.dropout(v[0], 0.3, Mode::Train, &mut seed::rng(17)).unwrap();
        t.mse(o, &y).unwrap()
    }), 1e-6));

    let mut lists = vec![Vec::new(); 7];
    for i in 0..7 {
        for j in i + 1..7 {
            if rng.random::<bool>() {
                lists[j].push(i);
            }
        }
    }
    let nbrs = Arc::new(Neighborhood::from_lists(&lists));
    let x = rand_tensor(&[7, 3], &mut rng);
    let y = targets(21, &mut rng);
    results.push(("aggregate_neighbors", grad_check(&[x], &|t, v| {
        let o = t.aggregate_neighbors(v[0], nbrs.clone(), 0.25).unwrap();
        t.mse(o, &y).unwrap()
    }), 1e-6));

    let x = rand_tensor(&[7, 3], &mut rng);
    let y = targets(6, &mut rng);
    let members: Arc<[usize]> = Arc::from(vec![0, 0, 1, 1, 1, 0, 1]);
    results.push(("global_mean_pool", grad_check(&[x], &|t, v| {
        let o = t.global_mean_pool(v[0], members.clone(), 2).unwrap();
        t.mse(o, &y).unwrap()
    }), 1e-6));

    let ins = [rand_tensor(&[4, 3], &mut rng), rand_tensor(&[4, 3], &mut rng)];
    let y = targets(12, &mut rng);
    results.push(("add/scale/add_scalar/reshape", grad_check(&ins, &|t, v| {
        let o = t.add(v[0], v[1]).unwrap();
        let o = t.scale(o, -1.7).unwrap();
        let o = t.add_scalar(o, 0.4).unwrap();
        let o = t.reshape(o, &[12]).unwrap();
        t.mse(o, &y).unwrap()
    }), 1e-6));
    results.push(("sum", grad_check(&ins[..1], &|t, v| {
        let o = t.activation(v[0], Activation::Sigmoid).unwrap();
        t.sum(o).unwrap()
    }), 1e-6));

    let mu = rand_tensor(&[9], &mut rng);
    let mut sigma = rand_tensor(&[9], &mut rng);
    sigma.data_mut().iter_mut().for_each(|s| *s = 0.2 + s.abs());
    let y = targets(9, &mut rng);
    results.push(("gaussian_nll", grad_check(&[mu, sigma], &|t, v| t.gaussian_nll(v[0], v[1], &y).unwrap()), 1e-6));
    let p = rand_tensor(&[9], &mut rng);
    results.push(("mse", grad_check(&[p], &|t, v| t.mse(v[0], &y).unwrap()), 1e-6));

    // End-to-end uncertainty network, every parameter.
    let (space, _) = micro();
    let archs: Vec<ArchGraph> = [5usize, 600, 1500, 2200].iter().map(|&i| space.graphs()[i].clone()).collect();
    let y = [0.12, 0.31, 0.2, 0.25];
    let mut net = UncertaintyPredictor::init(space.vocab().len(), Direction::default(), 3);
    let (_, analytic) = net.loss_and_gradients(&archs, &y, Mode::Train, 9).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for t in 0..analytic.len() {
        for k in 0..analytic[t].numel() {
            let orig = net.params().values()[t].data()[k];
            net.params_mut().values_mut()[t].data_mut()[k] = orig + h;
            let up = net.loss_and_gradients(&archs, &y, Mode::Train, 9).unwrap().0;
            net.params_mut().values_mut()[t].data_mut()[k] = orig - h;
            let down = net.loss_and_gradients(&archs, &y, Mode::Train, 9).unwrap().0;
            net.params_mut().values_mut()[t].data_mut()[k] = orig;
            worst = worst.max(rel_err(analytic[t].data()[k], (up - down) / (2.0 * h)));
        }
    }
    results.push(("uncertainty network", worst, 1e-4));

    let failing: Vec<String> =
        results.iter().filter(|(_, e, tol)| e >= tol).map(|(n, e, tol)| format!("{n} {e:.2e} >= {tol:.0e}")).collect();
    let worst_smooth = results.iter().filter(|r| r.2 == 1e-6).map(|r| r.1).fold(0.0, f64::max);
    let detail = format!(
        "{} checks, worst smooth primitive {worst_smooth:.2e}, network {worst:.2e}{}",
        results.len(),
        if failing.is_empty() { String::new() } else { format!(", failing: {}", failing.join("; ")) }
    );
    report(1, "gradient integrity", failing.is_empty(), &detail, start.elapsed(), Duration::from_secs(60));
}

// ---- 2. analytic losses ---------------------------------------------------

#[test]
fn criterion_2_analytic_losses() {
    let start = Instant::now();
    let mut tape = Tape::new();
    let mu = tape.leaf(Tensor::vector(vec![0.37])).unwrap();
    let sigma = tape.leaf(Tensor::vector(vec![1.0])).unwrap();
    let nll = tape.gaussian_nll(mu, sigma, &[0.37]).unwrap();
    let expected = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let nll_err = (tape.value(nll).item() - expected).abs();

    let (m, s, n) = (0.21, 0.04, 100_000usize);
    let mut rng = seed::rng(0x75);
    let draws: Vec<f64> = (0..n).map(|_| thompson_sample(m, s, &mut rng)).collect();
    let mean = stats::mean(&draws).unwrap();
    let var = stats::std_dev(&draws).unwrap().powi(2);
    let mean_bound = 3.0 * s / (n as f64).sqrt();
    // Sample variance of a Gaussian has standard deviation sigma^2 sqrt(2 / (n - 1)).
    let var_bound = 3.0 * s * s * (2.0 / (n - 1) as f64).sqrt();
    let pass = nll_err <= 1e-12 && (mean - m).abs() < mean_bound && (var - s * s).abs() < var_bound;
    let detail = format!(
        "nll error {nll_err:.1e}; TS mean off by {:.2e} (bound {mean_bound:.2e}), variance off by {:.2e} (bound {var_bound:.2e})",
        (mean - m).abs(),
        (var - s * s).abs()
    );
    report(2, "analytic losses", pass, &detail, start.elapsed(), Duration::from_secs(10));
}

// ---- 3. sampler bias --------------------------------------------------------

#[test]
fn criterion_3_sampler_bias() {
    let start = Instant::now();
    let (space, _) = micro();
    let first = studies::sampler_study(space, 5000, 0).unwrap().kl;
    let seeds = 600u64;
    let held = (0..seeds)
        .filter(|&s| {
            let kl = studies::sampler_study(space, 5000, s).unwrap().kl;
            kl.direct_vs_truth < kl.prune_vs_truth
        })
        .count();
    let frac = held as f64 / seeds as f64;
    let pass = first.direct_vs_truth < first.prune_vs_truth && first.direct_vs_truth < 0.02 && frac >= 0.99;
    let detail = format!(
        "KL direct {:.5} (< 0.02), prune {:.5}; ordering held in {held}/{seeds} seeds ({:.1}%, need 99%)",
        first.direct_vs_truth,
        first.prune_vs_truth,
        100.0 * frac
    );
    report(3, "sampler bias", pass, &detail, start.elapsed(), Duration::from_secs(120));
}

// ---- 4. mutation fan-out ----------------------------------------------------

#[test]
fn criterion_4_mutation_fanout() {
    let start = Instant::now();
    let (space, oracle) = micro();
    let cfg = FanoutConfig { ks: vec![1, 10], trials: 200, budget: 150, ..Default::default() };
    let traces = studies::fanout_traces(space, oracle, &cfg, None).unwrap();
    let (k1, k10) = (&traces[0].1, &traces[1].1);
    let at = |curves: &Vec<Vec<f64>>, q: usize| curves.iter().map(|c| c[q - 1]).collect::<Vec<f64>>();
    let mut violations = Vec::new();
    for q in cfg.checkpoints().into_iter().filter(|&q| q > 30) {
        let (a, b) = (stats::mean(&at(k10, q)).unwrap(), stats::mean(&at(k1, q)).unwrap());
        if a > b {
            violations.push(format!("q={q}: {a:.5} > {b:.5}"));
        }
    }
    let diffs: Vec<f64> = at(k1, cfg.budget).iter().zip(at(k10, cfg.budget)).map(|(a, b)| a - b).collect();
    let (lo, hi) = stats::bootstrap_mean_ci(&diffs, 10_000, 0.05, &mut seed::rng(0xb007)).unwrap();
    let pass = violations.is_empty() && lo > 0.0;
    let detail = format!(
        "final mean k1 {:.5} vs k10 {:.5}; paired difference 95% CI [{lo:.5}, {hi:.5}]; checkpoints past 30 where k10 > k1: {}",
        stats::mean(&at(k1, cfg.budget)).unwrap(),
        stats::mean(&at(k10, cfg.budget)).unwrap(),
        if violations.is_empty() { "none".to_string() } else { violations.join(", ") }
    );
    report(4, "mutation fan-out", pass, &detail, start.elapsed(), Duration::from_secs(300));
}

// ---- 5 and 8. search quality ------------------------------------------------

struct SearchRuns {
    /// Final regret per trial, by algorithm label.
    regret: BTreeMap<String, Vec<f64>>,
    final_test: BTreeMap<String, Vec<f64>>,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

fn npenas_entry(kind: fn(NpenasParams) -> AlgoSpec, epochs: usize) -> AlgoEntry {
    AlgoEntry {
        name: None,
        spec: kind(NpenasParams { n0: 10, total_num: 150, mu_num: 100, t: 10, epochs: Some(epochs), direction: DirectionName::default() }),
    }
}

fn run_search(algorithms: Vec<AlgoEntry>, trials: usize) -> SearchRuns {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        space: SpaceSource::Micro { seed: MICRO_SEED },
        algorithms,
        trials,
        base_seed: 0,
        out: dir.path().to_path_buf(),
        checkpoint_every: 10,
        record_wall_time: false,
    };
    runner::run_experiment(&cfg, None).unwrap();
    let (_, oracle) = micro();
    let optimum = oracle.val_argmin().unwrap().1.val_err_mean;
    let mut regret = BTreeMap::new();
    let mut final_test = BTreeMap::new();
    for a in &cfg.algorithms {
        let label = a.label();
        let (mut r, mut t) = (Vec::new(), Vec::new());
        for i in 0..trials {
            let s = TrialFile::load(&runner::trial_path(&cfg.out, &label, i)).unwrap().summary;
            let key = GraphKey::from_hex(s.best_key.as_deref().unwrap()).unwrap();
            r.push(oracle.entry(&key).unwrap().val_err_mean - optimum);
            t.push(s.best_test_err.unwrap());
        }
        regret.insert(label.clone(), r);
        final_test.insert(label, t);
    }
    SearchRuns { regret, final_test, elapsed: start.elapsed(), _dir: dir }
}

fn main_comparison() -> &'static SearchRuns {
    static RUNS: OnceLock<SearchRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        run_search(
            vec![
                AlgoEntry { name: None, spec: AlgoSpec::Random { budget: 150 } },
                npenas_entry(AlgoSpec::NpenasNp, NP_EPOCHS),
                npenas_entry(AlgoSpec::NpenasBo, BO_EPOCHS),
            ],
            600,
        )
    })
}

fn mean(v: &[f64]) -> f64 {
    stats::mean(v).unwrap()
}

#[test]
fn criterion_5_search_quality() {
    let runs = main_comparison();
    let (_, oracle) = micro();
    let rs = mean(&runs.regret["random"]);
    let np = mean(&runs.regret["npenas-np"]);
    let bo = mean(&runs.regret["npenas-bo"]);
    let oracle_test = oracle.val_argmin().unwrap().1.test_err;
    let np_test = mean(&runs.final_test["npenas-np"]);
    let gap = np_test - oracle_test;
    let pass = np < 0.7 * rs && bo < 0.7 * rs && gap.abs() <= 2.0 * NOISE_SIGMA;
    let detail = format!(
        "600 trials, mean final regret RS {rs:.5}, NP {np:.5} ({:.3} x RS), BO {bo:.5} ({:.3} x RS), need < 0.7; \
         NP final test error {np_test:.5} vs ORACLE {oracle_test:.5} (gap {gap:.5}, limit {:.3}); epochs NP {NP_EPOCHS}, BO {BO_EPOCHS}",
        np / rs,
        bo / rs,
        2.0 * NOISE_SIGMA
    );
    report(5, "search-quality ordering", pass, &detail, runs.elapsed, Duration::from_secs(30 * 60));
}

#[test]
fn criterion_8_oracle_sandwich() {
    let runs = main_comparison();
    let oracle_runs = run_search(vec![npenas_entry(AlgoSpec::NpenasOracle, 1)], 200);
    let first = |v: &[f64]| mean(&v[..200]);
    let o = mean(&oracle_runs.regret["npenas-oracle"]);
    let np = first(&runs.regret["npenas-np"]);
    let rs = first(&runs.regret["random"]);
    let pass = o <= np && np <= rs;
    let detail = format!("mean final regret over trials 0..200: oracle {o:.5} <= NP {np:.5} <= RS {rs:.5} (NP and RS reuse criterion 5 trials)");
    report(8, "oracle sandwich", pass, &detail, oracle_runs.elapsed, Duration::from_secs(5 * 60));
}

// ---- 6. predictor study -----------------------------------------------------

#[test]
fn criterion_6_predictor_study() {
    let start = Instant::now();
    let (space, oracle) = micro();
    let cfg = PredictorStudyConfig { point_epochs: 150, uncertainty_epochs: 150, mlp_epochs: 150, ..Default::default() };
    let rows = studies::predictor_study(space, oracle, &cfg, None).unwrap();
    let err = |m: Method, s: Sampler, n: usize| {
        rows.iter().find(|r| r.method == m && r.sampler == s && r.train_size == n).unwrap().mean_abs_err
    };
    let mut problems = Vec::new();
    for m in [Method::Npge, Method::Npuge] {
        for s in [Sampler::Direct, Sampler::Prune] {
            let e: Vec<f64> = cfg.sizes.iter().map(|&n| err(m, s, n)).collect();
            if !e.windows(2).all(|w| w[1] <= w[0]) {
                problems.push(format!("{} {s:?} not decreasing {e:.4?}", m.name()));
            }
        }
    }
    let npge = err(Method::Npge, Sampler::Direct, 150);
    for b in [Method::Mnpe, Method::Mnae] {
        let e = err(b, Sampler::Direct, 150);
        if npge >= e {
            problems.push(format!("NPGE {npge:.4} does not beat {} {e:.4}", b.name()));
        }
    }
    let table: Vec<String> = Method::ALL
        .iter()
        .map(|&m| format!("{} {:.4}/{:.4}/{:.4}", m.name(), err(m, Sampler::Direct, 20), err(m, Sampler::Direct, 100), err(m, Sampler::Direct, 150)))
        .collect();
    let detail = format!(
        "direct-sampling MAE at n=20/100/150: {}; {}",
        table.join(", "),
        if problems.is_empty() { "all orderings hold".to_string() } else { problems.join("; ") }
    );
    report(6, "predictor study", problems.is_empty(), &detail, start.elapsed(), Duration::from_secs(20 * 60));
}

// ---- 7. structural invariants ----------------------------------------------

/// Lexicographically smallest (ops, adjacency) over all relabelings of the
/// interior nodes: an exact isomorphism-class label.
fn brute_force_form(g: &ArchGraph) -> Vec<u8> {
    let n = g.num_nodes();
    let interior: Vec<usize> = (1..n - 1).collect();
    let mut best: Option<Vec<u8>> = None;
    let mut perm = interior.clone();
    permute(&mut perm, 0, &mut |p| {
        let mut map = vec![0usize; n];
        map[n - 1] = n - 1;
        for (slot, &v) in p.iter().enumerate() {
            map[v] = slot + 1;
        }
        let mut ops = vec![0u8; n];
        let mut adj = vec![0u8; n * n];
        for v in 0..n {
            ops[map[v]] = g.op(v).id();
        }
        for (i, j) in g.edges() {
            adj[map[i] * n + map[j]] = 1;
        }
        let form: Vec<u8> = ops.into_iter().chain(adj).collect();
        if best.as_ref().is_none_or(|b| form < *b) {
            best = Some(form);
        }
    });
    best.unwrap()
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

fn edge_cell_paths(c: &EdgeOpCell) -> BTreeSet<Vec<u8>> {
    fn walk(c: &EdgeOpCell, v: usize, seq: &mut Vec<u8>, out: &mut BTreeSet<Vec<u8>>) {
        if v == c.num_sum_nodes - 1 {
            out.insert(seq.clone());
            return;
        }
        for (&(i, j), op) in &c.edge_ops {
            if i == v {
                seq.push(op.id());
                walk(c, j, seq, out);
                seq.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(c, 0, &mut Vec::new(), &mut out);
    out
}

fn determinism_check(dir: &Path) -> bool {
    let config = |out: &Path| ExperimentConfig {
        space: SpaceSource::Micro { seed: 3 },
        algorithms: vec![
            npenas_entry(AlgoSpec::NpenasNp, 3),
            npenas_entry(AlgoSpec::NpenasBo, 2),
            AlgoEntry { name: None, spec: AlgoSpec::Random { budget: 40 } },
            AlgoEntry { name: None, spec: AlgoSpec::Ea { budget: 40, k: 10, n0: 10 } },
        ]
        .into_iter()
        .map(|mut a| {
            if let AlgoSpec::NpenasNp(p) | AlgoSpec::NpenasBo(p) = &mut a.spec {
                p.total_num = 30;
            }
            a
        })
        .collect(),
        trials: 2,
        base_seed: 11,
        out: out.to_path_buf(),
        checkpoint_every: 10,
        record_wall_time: false,
    };
    let snapshot = |root: &Path| {
        let mut files = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
                }
            }
        }
        files
    };
    let (a, b) = (dir.join("a"), dir.join("b"));
    runner::run_experiment(&config(&a), Some(1)).unwrap();
    runner::run_experiment(&config(&b), None).unwrap();
    let (space, _) = micro();
    for out in [&a, &b] {
        studies::write_sampler_study(&studies::sampler_study(space, 500, 4).unwrap(), &out.join("sampler")).unwrap();
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    sa.len() > 10 && sa == sb
}

#[test]
fn criterion_7_structural_invariants() {
    let start = Instant::now();
    let (space, _) = micro();

    // Canonical keys against brute-force isomorphism classes over every
    // normalized 5-node cell (all wirings, all interior op assignments).
    let n = 5;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut key_to_form: BTreeMap<GraphKey, Vec<u8>> = BTreeMap::new();
    let mut form_to_key: BTreeMap<Vec<u8>, GraphKey> = BTreeMap::new();
    let (mut false_merges, mut false_splits, mut cells) = (0usize, 0usize, 0usize);
    for mask in 0u32..(1 << pairs.len()) {
        for ops_code in 0..27u32 {
            let mut ops = vec![OpKind::INPUT];
            ops.extend((0..3).map(|d| OpKind(3 + (ops_code / 3u32.pow(d) % 3) as u8)));
            ops.push(OpKind::OUTPUT);
            let edges: Vec<(usize, usize)> = pairs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &e)| e).collect();
            let Ok(g) = ArchGraph::from_edges(ops, &edges).and_then(|g| normalize(&g)) else { continue };
            cells += 1;
            let key = canonical_key(&g);
            let form = brute_force_form(&g);
            if key_to_form.entry(key).or_insert_with(|| form.clone()) != &form {
                false_merges += 1;
            }
            if form_to_key.entry(form).or_insert(key) != &key {
                false_splits += 1;
            }
        }
    }
    let classes_match = key_to_form.len() == space.len() && key_to_form.keys().all(|k| space.contains(k));

    // One-to-many mutation over random parents, fan-outs and forbidden sets.
    let mut rng = seed::rng(0x7e57);
    let mut mutate_bad = 0usize;
    for _ in 0..10_000 {
        let parent = &space.graphs()[rng.random_range(0..space.len())];
        let forbidden: BTreeSet<GraphKey> =
            (0..rng.random_range(0..60)).map(|_| space.keys()[rng.random_range(0..space.len())]).collect();
        let k = rng.random_range(1..=30);
        let kids = space.mutate_up_to(parent, k, &mut rng, &forbidden).unwrap();
        let keys: BTreeSet<GraphKey> = kids.iter().map(canonical_key).collect();
        let ok = kids.len() <= k
            && keys.len() == kids.len()
            && !keys.contains(&canonical_key(parent))
            && keys.is_disjoint(&forbidden)
            && keys.iter().all(|k| space.contains(k));
        mutate_bad += usize::from(!ok);
    }

    // Edge-op cell conversion keeps the path set, over every cell with up to
    // four sum nodes, ops {A, B, C} or absent on each forward edge.
    let mut conversions = 0usize;
    let mut conversion_bad = 0usize;
    for s in 2..=4usize {
        let fwd: Vec<(usize, usize)> = (0..s).flat_map(|i| (i + 1..s).map(move |j| (i, j))).collect();
        for code in 0..4u32.pow(fwd.len() as u32) {
            let edge_ops: BTreeMap<(usize, usize), OpKind> = fwd
                .iter()
                .enumerate()
                .filter_map(|(d, &e)| match code / 4u32.pow(d as u32) % 4 {
                    0 => None,
                    op => Some((e, OpKind(2 + op as u8))),
                })
                .collect();
            let cell = EdgeOpCell { num_sum_nodes: s, edge_ops };
            let g = convert_edge_op_cell(&cell).unwrap();
            let got: BTreeSet<Vec<u8>> = enumerate_paths(&g).into_iter().collect();
            conversions += 1;
            conversion_bad += usize::from(got != edge_cell_paths(&cell));
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let deterministic = determinism_check(dir.path());

    let pass = false_merges == 0 && false_splits == 0 && classes_match && mutate_bad == 0 && conversion_bad == 0 && deterministic;
    let detail = format!(
        "{cells} normalized cells in {} classes, false merges {false_merges}, false splits {false_splits}, space matches {classes_match}; \
         10000 mutate calls, {mutate_bad} bad; {conversions} edge cells, {conversion_bad} path-set mismatches; pipeline byte-identical {deterministic}",
        key_to_form.len()
    );
    report(7, "structural invariants", pass, &detail, start.elapsed(), Duration::from_secs(10 * 60));
}
