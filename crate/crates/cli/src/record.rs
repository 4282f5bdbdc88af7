//! Trial files: JSON Lines with a config line, one line per iteration and a
//! closing summary line.

use std::fs;
use std::io::Write;
use std::path::Path;

use npenas_core::evolve::RunRecord;
use npenas_core::GraphKey;
use serde::{Deserialize, Serialize};

use crate::config::AlgoSpec;
use crate::error::{CliError, CliResult};

/// Writes through a sibling temp file and a rename, so readers never see a
/// partial file and an interrupted write leaves any previous version intact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(format!("temp file in {}", dir.display()), e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    tmp.persist(path).map_err(|e| CliError::io(format!("renaming onto {}", path.display()), e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Line {
    Config(ConfigLine),
    Iteration(IterationLine),
    Summary(SummaryLine),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigLine {
    pub name: String,
    pub trial: usize,
    pub seed: u64,
    pub budget: usize,
    pub spec: AlgoSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLine {
    pub index: usize,
    pub pool_size: usize,
    pub selected: Vec<String>,
    pub scores: Vec<f64>,
    pub val_errs: Vec<f64>,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub best_key: Option<String>,
    pub best_val_err: Option<f64>,
    pub best_test_err: Option<f64>,
    pub queries: usize,
    /// Best-so-far validation and test error after each query.
    pub trace_val_err: Vec<f64>,
    pub trace_test_err: Vec<f64>,
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

/// A trial as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFile {
    pub config: ConfigLine,
    pub iterations: Vec<IterationLine>,
    pub summary: SummaryLine,
}

impl TrialFile {
    pub fn from_run(config: ConfigLine, run: &RunRecord, error: Option<String>) -> Self {
        let iterations = run
            .iterations
            .iter()
            .enumerate()
            .map(|(index, it)| IterationLine {
                index,
                pool_size: it.pool_size,
                selected: it.selected.iter().map(GraphKey::to_hex).collect(),
                scores: it.scores.clone(),
                val_errs: it.val_errs.clone(),
                final_loss: it.final_loss,
            })
            .collect();
        let best = run.best();
        let summary = SummaryLine {
            best_key: best.map(|b| b.key.to_hex()),
            best_val_err: best.map(|b| b.val_err),
            best_test_err: best.map(|b| b.test_err),
            queries: run.queries(),
            trace_val_err: run.trace.iter().map(|p| p.val_err).collect(),
            trace_test_err: run.trace.iter().map(|p| p.test_err).collect(),
            error,
            wall_seconds: run.wall_seconds,
        };
        Self { config, iterations, summary }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut push = |l: Line| {
            out.push_str(&serde_json::to_string(&l).expect("trial lines serialize"));
            out.push('\n');
        };
        push(Line::Config(self.config.clone()));
        for it in &self.iterations {
            push(Line::Iteration(it.clone()));
        }
        push(Line::Summary(self.summary.clone()));
        out
    }

    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let bad = |line: usize, message: String| CliError::Runtime(format!("{}:{line}: {message}", path.display()));
        let mut config = None;
        let mut iterations = Vec::new();
        let mut summary = None;
        for (i, l) in text.lines().enumerate() {
            let line: Line = serde_json::from_str(l).map_err(|e| bad(i + 1, e.to_string()))?;
            match (line, i) {
                (Line::Config(c), 0) => config = Some(c),
                (Line::Iteration(it), _) if config.is_some() && summary.is_none() => iterations.push(it),
                (Line::Summary(s), _) if config.is_some() && summary.is_none() => summary = Some(s),
                _ => return Err(bad(i + 1, "line out of order".into())),
            }
        }
        match (config, summary) {
            (Some(config), Some(summary)) => Ok(Self { config, iterations, summary }),
            _ => Err(bad(text.lines().count(), "missing config or summary line".into())),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use npenas_core::evolve::random_search;
    use npenas_core::space::build_microbench;

    #[test]
    fn render_parse_round_trip() {
        let (space, oracle) = build_microbench(0).unwrap();
        let run = random_search(&space, &oracle, 12, 4).unwrap();
        let cfg = ConfigLine { name: "random".into(), trial: 0, seed: 4, budget: 12, spec: AlgoSpec::Random { budget: 12 } };
        let t = TrialFile::from_run(cfg, &run, None);
        let text = t.render();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(TrialFile::parse(&text, Path::new("x")).unwrap(), t);
        assert_eq!(t.summary.trace_test_err.len(), 12);
        assert_eq!(t.summary.best_test_err, t.summary.trace_test_err.last().copied());
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"first version").unwrap();
        write_atomic(&p, b"2").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"2");
        assert_eq!(fs::read_dir(dir.path().join("a")).unwrap().count(), 1);
    }
}
