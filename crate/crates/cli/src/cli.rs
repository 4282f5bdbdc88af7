//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use npenas_core::{FitnessOracle, SearchSpace};

use crate::bench;
use crate::config::{DirectionName, ExperimentConfig, SpaceSource};
use crate::error::{CliError, CliResult};
use crate::record::write_atomic;
use crate::runner;
use crate::studies::{self, FanoutConfig, PredictorStudyConfig};

#[derive(Debug, Parser)]
#[command(name = "npenas", version, about = "Neural-predictor-guided evolutionary architecture search")]
pub struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

/// Where a study takes its space from. `--config` supplies the space of an
/// experiment configuration; otherwise these flags apply.
#[derive(Debug, Args)]
pub struct SpaceArgs {
    /// Benchmark table to load instead of MicroBench.
    #[arg(long)]
    pub bench: Option<PathBuf>,
    /// MicroBench landscape seed.
    #[arg(long, default_value_t = 0)]
    pub micro_seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured algorithm for every trial and write summary.csv.
    Search,
    /// Path distributions of the direct and prune samplers against the space.
    SamplerStudy {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long, default_value_t = 5000)]
        samples: usize,
    },
    /// Prediction error of the GIN predictors and MLP baselines.
    PredictorStudy {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [20, 100, 150])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        repeats: usize,
        #[arg(long, default_value_t = 500)]
        test_size: usize,
        /// Epochs for the point predictor and MLPs.
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        /// Epochs for the uncertainty predictor.
        #[arg(long, default_value_t = 1000)]
        uncertainty_epochs: usize,
        #[arg(long, value_enum, default_value = "in-only")]
        direction: DirectionArg,
    },
    /// Best-so-far curves of plain evolution for several offspring counts.
    FanoutStudy {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 10, 20, 30])]
        k: Vec<usize>,
        #[arg(long, default_value_t = 600)]
        trials: usize,
        #[arg(long, default_value_t = 150)]
        budget: usize,
    },
    /// Write MicroBench as a benchmark table.
    ExportBench {
        #[arg(long, default_value_t = 0)]
        micro_seed: u64,
        /// Output file (default: <out>/microbench.jsonl).
        file: Option<PathBuf>,
    },
    /// Check a benchmark table and report the first bad line.
    ValidateBench { file: PathBuf },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum DirectionArg {
    Symmetric,
    InOnly,
}

impl From<DirectionArg> for DirectionName {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Symmetric => DirectionName::Symmetric,
            DirectionArg::InOnly => DirectionName::InOnly,
        }
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("npenas: {e}");
            e.exit_code()
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn study_space(cli: &Cli, args: &SpaceArgs) -> CliResult<(SearchSpace, FitnessOracle)> {
    let source = match (&cli.config, &args.bench) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --config or --bench".into())),
        (Some(cfg), None) => space_from_config(cfg)?,
        (None, Some(path)) => SpaceSource::Tabular { path: path.clone() },
        (None, None) => SpaceSource::Micro { seed: args.micro_seed },
    };
    source.load()
}

/// The `space` entry of a configuration file, resolved against its directory.
fn space_from_config(path: &Path) -> CliResult<SpaceSource> {
    #[derive(serde::Deserialize)]
    struct OnlySpace {
        space: SpaceSource,
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let s: OnlySpace = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(match s.space {
        SpaceSource::Tabular { path: p } if p.is_relative() => {
            SpaceSource::Tabular { path: path.parent().unwrap_or(Path::new(".")).join(p) }
        }
        other => other,
    })
}

fn run(cli: &Cli) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Search => {
            let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("search needs --config".into()))?;
            let mut cfg = ExperimentConfig::from_file(path)?;
            if let Some(out) = &cli.out {
                cfg.out = out.clone();
            }
            if let Some(s) = cli.seed {
                cfg.base_seed = s;
            }
            let rows = runner::run_experiment(&cfg, cli.jobs)?;
            eprintln!("npenas: wrote {} summary rows to {}", rows.len(), cfg.out.join(runner::SUMMARY_FILE).display());
            Ok(())
        }
        Command::SamplerStudy { space, samples } => {
            let (space, _) = study_space(cli, space)?;
            let study = studies::sampler_study(&space, *samples, seed)?;
            let out = out_dir(cli);
            studies::write_sampler_study(&study, &out)?;
            eprintln!(
                "npenas: KL direct {:.6}, prune {:.6}",
                study.kl.direct_vs_truth, study.kl.prune_vs_truth
            );
            Ok(())
        }
        Command::PredictorStudy { space, sizes, repeats, test_size, epochs, uncertainty_epochs, direction } => {
            let (space, oracle) = study_space(cli, space)?;
            let cfg = PredictorStudyConfig {
                sizes: sizes.clone(),
                repeats: *repeats,
                test_size: *test_size,
                point_epochs: *epochs,
                uncertainty_epochs: *uncertainty_epochs,
                mlp_epochs: *epochs,
                direction: DirectionName::from(*direction).into(),
                seed,
            };
            let rows = studies::predictor_study(&space, &oracle, &cfg, cli.jobs)?;
            write_atomic(&out_dir(cli).join("predictor_study.csv"), &studies::predictor_csv(&rows)?)
        }
        Command::FanoutStudy { space, k, trials, budget } => {
            let (space, oracle) = study_space(cli, space)?;
            let cfg = FanoutConfig { ks: k.clone(), trials: *trials, budget: *budget, base_seed: seed, ..Default::default() };
            let traces = studies::fanout_traces(&space, &oracle, &cfg, cli.jobs)?;
            write_atomic(&out_dir(cli).join("fanout.csv"), &studies::fanout_csv(&traces, &cfg)?)
        }
        Command::ExportBench { micro_seed, file } => {
            let (space, oracle) = npenas_core::space::build_microbench(*micro_seed)?;
            let path = file.clone().unwrap_or_else(|| out_dir(cli).join("microbench.jsonl"));
            bench::export(&space, &oracle, &path)
        }
        Command::ValidateBench { file } => {
            let b = bench::load(file)?;
            println!("{}: {} cells, checksum {}", file.display(), b.space.len(), b.checksum);
            Ok(())
        }
    }
}
