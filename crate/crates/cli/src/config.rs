//! Experiment configuration: one JSON document.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use npenas_core::evolve::{Algorithm, NpenasConfig, Variant};
use npenas_core::predictor::{Direction, TrainConfig};
use npenas_core::space::build_microbench;
use npenas_core::{FitnessOracle, SearchSpace};
use serde::{Deserialize, Serialize};

use crate::bench;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpaceSource {
    /// Synthetic MicroBench generated from a landscape seed.
    Micro { seed: u64 },
    /// Imported benchmark table; relative paths resolve against the config file.
    Tabular { path: PathBuf },
}

impl SpaceSource {
    pub fn load(&self) -> CliResult<(SearchSpace, FitnessOracle)> {
        match self {
            SpaceSource::Micro { seed } => Ok(build_microbench(*seed)?),
            SpaceSource::Tabular { path } => {
                let b = bench::load(path)?;
                Ok((b.space, b.oracle))
            }
        }
    }

    fn resolve(&mut self, base: &Path) -> CliResult<()> {
        if let SpaceSource::Tabular { path } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
            if !path.is_file() {
                return Err(CliError::Config(format!("benchmark file {} not found", path.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionName {
    Symmetric,
    #[default]
    InOnly,
}

impl From<DirectionName> for Direction {
    fn from(d: DirectionName) -> Self {
        match d {
            DirectionName::Symmetric => Direction::Symmetric,
            DirectionName::InOnly => Direction::InOnly,
        }
    }
}

fn default_n0() -> usize {
    10
}
fn default_total() -> usize {
    150
}
fn default_mu() -> usize {
    100
}

/// Settings shared by the predictor-guided variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpenasParams {
    #[serde(default = "default_n0")]
    pub n0: usize,
    #[serde(default = "default_total")]
    pub total_num: usize,
    #[serde(default = "default_mu")]
    pub mu_num: usize,
    #[serde(default = "default_n0")]
    pub t: usize,
    /// Training epochs per iteration; the variant's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub direction: DirectionName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "kebab-case")]
pub enum AlgoSpec {
    NpenasBo(NpenasParams),
    NpenasNp(NpenasParams),
    NpenasOracle(NpenasParams),
    #[serde(rename = "random")]
    Random { budget: usize },
    #[serde(rename = "ea")]
    Ea {
        budget: usize,
        k: usize,
        #[serde(default = "default_n0")]
        n0: usize,
    },
}

impl AlgoSpec {
    pub fn budget(&self) -> usize {
        match self {
            AlgoSpec::NpenasBo(p) | AlgoSpec::NpenasNp(p) | AlgoSpec::NpenasOracle(p) => p.total_num,
            AlgoSpec::Random { budget } | AlgoSpec::Ea { budget, .. } => *budget,
        }
    }

    /// Core algorithm description for trial `seed`.
    pub fn algorithm(&self, seed: u64) -> Algorithm {
        let npenas = |variant: Variant, p: &NpenasParams| {
            let base = NpenasConfig::new(variant);
            let train = match p.epochs {
                Some(e) => base.train.with_epochs(e),
                None => base.train,
            };
            Algorithm::Npenas(NpenasConfig {
                n0: p.n0,
                total_num: p.total_num,
                mu_num: p.mu_num,
                t: p.t,
                seed,
                direction: p.direction.into(),
                train: TrainConfig { seed, ..train },
                ..base
            })
        };
        match self {
            AlgoSpec::NpenasBo(p) => npenas(Variant::Bo, p),
            AlgoSpec::NpenasNp(p) => npenas(Variant::Np, p),
            AlgoSpec::NpenasOracle(p) => npenas(Variant::Oracle, p),
            AlgoSpec::Random { .. } => Algorithm::RandomSearch,
            AlgoSpec::Ea { k, .. } => Algorithm::EaFanout { k: *k },
        }
    }

    pub fn default_name(&self) -> String {
        self.algorithm(0).name()
    }
}

/// An algorithm entry with an optional display name (defaults to the algorithm name).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: AlgoSpec,
}

impl AlgoEntry {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.spec.default_name())
    }
}

fn default_checkpoint() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceSource,
    pub algorithms: Vec<AlgoEntry>,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Output directory; relative paths resolve against the config file.
    pub out: PathBuf,
    /// Query interval between curve checkpoints.
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: usize,
    /// Record per-trial wall-clock time (makes outputs non-reproducible).
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> CliResult<Self> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.space.resolve(base)?;
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms listed".into());
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be positive".into());
        }
        let mut names = BTreeSet::new();
        for a in &self.algorithms {
            let label = a.label();
            if label.is_empty() || label.contains(['/', '\\', '.']) {
                return bad(format!("algorithm name {label:?} is not a plain directory name"));
            }
            if !names.insert(label.clone()) {
                return bad(format!("algorithm name {label:?} used twice; set \"name\""));
            }
            if a.spec.budget() == 0 {
                return bad(format!("{label}: budget must be positive"));
            }
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    /// Query counts at which curves are sampled: every `checkpoint_every`
    /// queries, plus the budget itself.
    pub fn checkpoints(&self, budget: usize) -> Vec<usize> {
        let mut c: Vec<usize> = (1..=budget / self.checkpoint_every).map(|i| i * self.checkpoint_every).collect();
        if c.last() != Some(&budget) {
            c.push(budget);
        }
        c
    }
}
