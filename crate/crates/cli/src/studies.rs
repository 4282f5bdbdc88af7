//! Sampler, predictor and fan-out studies.

use std::path::Path;

use npenas_core::evolve::{self, RunRecord};
use npenas_core::predictor::{baseline_mlp, train_point, train_uncertainty, Direction, TrainConfig, VectorEncoding};
use npenas_core::space::{kl_divergence, path_distribution, PathDistribution};
use npenas_core::{seed, stats, ArchGraph, EvalRecord, FitnessOracle, SearchSpace};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::record::write_atomic;
use crate::runner::{aggregate, render_summary};

const SAMPLER_TAG: u64 = 0x5a3b;
const STUDY_TAG: u64 = 0x57d1;

fn pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

/// `n` direct samples; beyond the space size, whole passes without
/// replacement are concatenated.
pub fn direct_samples(space: &SearchSpace, n: usize, rng: &mut seed::Rng) -> CliResult<Vec<ArchGraph>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let take = (n - out.len()).min(space.len());
        out.extend(space.sample_direct(take, rng)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlReport {
    pub direct_vs_truth: f64,
    pub prune_vs_truth: f64,
}

pub struct SamplerStudy {
    pub direct: PathDistribution,
    pub prune: PathDistribution,
    pub truth: PathDistribution,
    pub kl: KlReport,
}

pub fn sampler_study(space: &SearchSpace, n: usize, seed_value: u64) -> CliResult<SamplerStudy> {
    let all: Vec<ArchGraph> = space.graphs().to_vec();
    let truth = path_distribution(&all, space.universe())?;
    let direct_archs = direct_samples(space, n, &mut seed::derived_rng(seed_value, SAMPLER_TAG, 0))?;
    let prune_archs = space.sample_prune(n, &mut seed::derived_rng(seed_value, SAMPLER_TAG, 1))?;
    let direct = path_distribution(&direct_archs, space.universe())?;
    let prune = path_distribution(&prune_archs, space.universe())?;
    let kl = KlReport { direct_vs_truth: kl_divergence(&direct, &truth)?, prune_vs_truth: kl_divergence(&prune, &truth)? };
    Ok(SamplerStudy { direct, prune, truth, kl })
}

#[derive(Serialize)]
struct PathRow {
    path_index: usize,
    count: u64,
    prob: f64,
    /// Empty when the path never occurs.
    log_prob: Option<f64>,
}

fn distribution_csv(d: &PathDistribution) -> CliResult<Vec<u8>> {
    let rows: Vec<PathRow> = d
        .counts
        .iter()
        .zip(&d.probs)
        .zip(d.log_frequencies())
        .enumerate()
        .map(|(i, ((&count, &prob), lf))| PathRow { path_index: i, count, prob, log_prob: lf.is_finite().then_some(lf) })
        .collect();
    csv_bytes(&rows)
}

pub fn write_sampler_study(study: &SamplerStudy, out: &Path) -> CliResult<()> {
    write_atomic(&out.join("direct.csv"), &distribution_csv(&study.direct)?)?;
    write_atomic(&out.join("prune.csv"), &distribution_csv(&study.prune)?)?;
    write_atomic(&out.join("truth.csv"), &distribution_csv(&study.truth)?)?;
    let mut json = serde_json::to_string_pretty(&study.kl).expect("report serializes");
    json.push('\n');
    write_atomic(&out.join("kl.json"), json.as_bytes())
}

/// Predictors compared in the predictor study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Method {
    /// GIN point predictor.
    #[serde(rename = "NPGE")]
    Npge,
    /// GIN uncertainty predictor, scored by its mean.
    #[serde(rename = "NPUGE")]
    Npuge,
    /// MLP on the path encoding.
    #[serde(rename = "MNPE")]
    Mnpe,
    /// MLP on the adjacency encoding.
    #[serde(rename = "MNAE")]
    Mnae,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Npge, Method::Npuge, Method::Mnpe, Method::Mnae];

    pub fn name(self) -> &'static str {
        match self {
            Method::Npge => "NPGE",
            Method::Npuge => "NPUGE",
            Method::Mnpe => "MNPE",
            Method::Mnae => "MNAE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Direct,
    Prune,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorStudyConfig {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub test_size: usize,
    pub point_epochs: usize,
    pub uncertainty_epochs: usize,
    pub mlp_epochs: usize,
    pub direction: Direction,
    pub seed: u64,
}

impl Default for PredictorStudyConfig {
    fn default() -> Self {
        Self {
            sizes: vec![20, 100, 150],
            repeats: 50,
            test_size: 500,
            point_epochs: TrainConfig::point_default().epochs,
            uncertainty_epochs: TrainConfig::uncertainty_default().epochs,
            mlp_epochs: TrainConfig::point_default().epochs,
            direction: Direction::default(),
            seed: 0,
        }
    }
}

/// One (method, sampler, size) cell of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorRow {
    pub method: Method,
    pub sampler: Sampler,
    pub train_size: usize,
    pub mean_abs_err: f64,
    pub std_abs_err: f64,
    pub repeats: usize,
}

/// Mean absolute error of every method on a held-out direct sample of
/// `test_size` cells, against their mean validation error.
fn predictor_repeat(
    space: &SearchSpace,
    oracle: &FitnessOracle,
    cfg: &PredictorStudyConfig,
    sampler: Sampler,
    size: usize,
    repeat: usize,
) -> CliResult<Vec<(Method, f64)>> {
    let s = seed::derive(cfg.seed, STUDY_TAG, ((repeat as u64) << 16) | ((size as u64) << 1) | sampler as u64);
    let mut rng = seed::rng(s);
    let train_archs = match sampler {
        Sampler::Direct => space.sample_direct(size, &mut rng)?,
        Sampler::Prune => space.sample_prune(size, &mut rng)?,
    };
    let train_keys: std::collections::BTreeSet<_> =
        train_archs.iter().map(npenas_core::archgraph::canonical_key).collect();
    let test: Vec<ArchGraph> = space
        .sample_direct((cfg.test_size + train_keys.len()).min(space.len()), &mut rng)?
        .into_iter()
        .filter(|g| !train_keys.contains(&npenas_core::archgraph::canonical_key(g)))
        .take(cfg.test_size)
        .collect();
    if test.len() < cfg.test_size {
        return Err(CliError::Runtime(format!(
            "space of {} cells cannot hold {size} training and {} test cells",
            space.len(),
            cfg.test_size
        )));
    }
    let records: Vec<EvalRecord> = train_archs
        .iter()
        .enumerate()
        .map(|(i, g)| oracle.evaluate(g, seed::derive(s, 1, i as u64), i))
        .collect::<Result<_, _>>()?;
    let truth: Vec<f64> = test.iter().map(|g| oracle.mean_val_err(g)).collect::<Result<_, _>>()?;
    let vocab = space.vocab().len();
    let base = TrainConfig::point_default().with_seed(s);
    let mut out = Vec::new();
    for m in Method::ALL {
        let pred = match m {
            Method::Npge => train_point(&records, vocab, cfg.direction, &base.with_epochs(cfg.point_epochs))?.predict(&test)?,
            Method::Npuge => train_uncertainty(&records, vocab, cfg.direction, &base.with_epochs(cfg.uncertainty_epochs))?
                .predict(&test)?
                .iter()
                .map(|g| g.mu)
                .collect(),
            Method::Mnpe | Method::Mnae => {
                let enc = if m == Method::Mnpe { VectorEncoding::Path } else { VectorEncoding::Adjacency };
                baseline_mlp(enc, &records, space.universe(), vocab, &base.with_epochs(cfg.mlp_epochs))?.predict(&test)?
            }
        };
        out.push((m, stats::mean_abs_error(&pred, &truth)?));
    }
    Ok(out)
}

pub fn predictor_study(
    space: &SearchSpace,
    oracle: &FitnessOracle,
    cfg: &PredictorStudyConfig,
    jobs: Option<usize>,
) -> CliResult<Vec<PredictorRow>> {
    let largest = cfg.sizes.iter().copied().max().unwrap_or(0);
    if cfg.sizes.is_empty() || cfg.repeats == 0 {
        return Err(CliError::Usage("predictor study needs sizes and repeats".into()));
    }
    if largest + cfg.test_size > space.len() {
        return Err(CliError::Runtime(format!(
            "space of {} cells is smaller than {largest} training + {} test cells",
            space.len(),
            cfg.test_size
        )));
    }
    let cells: Vec<(Sampler, usize, usize)> = [Sampler::Direct, Sampler::Prune]
        .into_iter()
        .flat_map(|s| cfg.sizes.iter().flat_map(move |&n| (0..cfg.repeats).map(move |r| (s, n, r))))
        .collect();
    let results: Vec<CliResult<Vec<(Method, f64)>>> = pool(jobs)?.install(|| {
        cells.par_iter().map(|&(s, n, r)| predictor_repeat(space, oracle, cfg, s, n, r)).collect()
    });
    let mut errs: std::collections::BTreeMap<(Method, Sampler, usize), Vec<f64>> = Default::default();
    for (&(s, n, _), res) in cells.iter().zip(results) {
        for (m, e) in res? {
            errs.entry((m, s, n)).or_default().push(e);
        }
    }
    errs.into_iter()
        .map(|((method, sampler, train_size), v)| {
            Ok(PredictorRow {
                method,
                sampler,
                train_size,
                mean_abs_err: stats::mean(&v)?,
                std_abs_err: stats::std_dev(&v)?,
                repeats: v.len(),
            })
        })
        .collect()
}

pub fn predictor_csv(rows: &[PredictorRow]) -> CliResult<Vec<u8>> {
    csv_bytes(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanoutConfig {
    pub ks: Vec<usize>,
    pub trials: usize,
    pub budget: usize,
    pub n0: usize,
    pub base_seed: u64,
    pub checkpoint_every: usize,
}

impl Default for FanoutConfig {
    fn default() -> Self {
        Self { ks: vec![1, 10, 20, 30], trials: 600, budget: 150, n0: 10, base_seed: 0, checkpoint_every: 10 }
    }
}

impl FanoutConfig {
    pub fn checkpoints(&self) -> Vec<usize> {
        let mut c: Vec<usize> = (1..=self.budget / self.checkpoint_every).map(|i| i * self.checkpoint_every).collect();
        if c.last() != Some(&self.budget) {
            c.push(self.budget);
        }
        c
    }
}

/// Per-k best-so-far test-error traces, one per trial; trial `i` uses seed
/// `base_seed + i` for every k so runs pair up across k.
pub fn fanout_traces(
    space: &SearchSpace,
    oracle: &FitnessOracle,
    cfg: &FanoutConfig,
    jobs: Option<usize>,
) -> CliResult<Vec<(usize, Vec<Vec<f64>>)>> {
    if cfg.ks.is_empty() || cfg.trials == 0 || cfg.checkpoint_every == 0 {
        return Err(CliError::Usage("fan-out study needs k values, trials and a checkpoint interval".into()));
    }
    let cells: Vec<(usize, usize)> =
        cfg.ks.iter().flat_map(|&k| (0..cfg.trials).map(move |t| (k, t))).collect();
    let runs: Vec<Result<RunRecord, CliError>> = pool(jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&(k, t)| {
                evolve::ea_fanout(space, oracle, cfg.budget, k, cfg.n0, cfg.base_seed.wrapping_add(t as u64))
                    .map_err(|f| CliError::Runtime(format!("k={k} trial {t}: {f}")))
            })
            .collect()
    });
    let mut out: Vec<(usize, Vec<Vec<f64>>)> = cfg.ks.iter().map(|&k| (k, Vec::new())).collect();
    for (&(k, _), run) in cells.iter().zip(runs) {
        let trace = run?.trace.iter().map(|p| p.test_err).collect();
        out.iter_mut().find(|(kk, _)| *kk == k).expect("k listed").1.push(trace);
    }
    Ok(out)
}

pub fn fanout_csv(traces: &[(usize, Vec<Vec<f64>>)], cfg: &FanoutConfig) -> CliResult<Vec<u8>> {
    let mut rows = Vec::new();
    for (k, curves) in traces {
        rows.extend(aggregate(&format!("ea-k{k}"), curves, &cfg.checkpoints())?);
    }
    render_summary(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use npenas_core::space::build_microbench;

    #[test]
    fn full_direct_pass_matches_truth() {
        let (space, _) = build_microbench(0).unwrap();
        let s = sampler_study(&space, space.len(), 1).unwrap();
        assert_eq!(s.direct.counts, s.truth.counts);
        assert!(s.kl.direct_vs_truth < 1e-12);
    }

    #[test]
    fn oversampling_concatenates_passes() {
        let (space, _) = build_microbench(0).unwrap();
        let v = direct_samples(&space, space.len() + 3, &mut seed::rng(0)).unwrap();
        assert_eq!(v.len(), space.len() + 3);
    }

    #[test]
    fn predictor_table_shape() {
        let (space, oracle) = build_microbench(0).unwrap();
        let cfg = PredictorStudyConfig {
            sizes: vec![20],
            repeats: 1,
            point_epochs: 2,
            uncertainty_epochs: 2,
            mlp_epochs: 2,
            ..Default::default()
        };
        let rows = predictor_study(&space, &oracle, &cfg, Some(1)).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.mean_abs_err.is_finite() && r.std_abs_err == 0.0));
        let text = String::from_utf8(predictor_csv(&rows).unwrap()).unwrap();
        assert!(text.starts_with("method,sampler,train_size,mean_abs_err,std_abs_err,repeats\nNPGE,direct,20,"));
    }

    #[test]
    fn single_fanout_curve() {
        let (space, oracle) = build_microbench(0).unwrap();
        let cfg = FanoutConfig { ks: vec![10], trials: 1, budget: 40, ..Default::default() };
        let t = fanout_traces(&space, &oracle, &cfg, Some(1)).unwrap();
        let text = String::from_utf8(fanout_csv(&t, &cfg).unwrap()).unwrap();
        assert_eq!(text.lines().count(), 1 + 4);
    }
}
