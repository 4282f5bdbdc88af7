//! Predictor parameters as `<stem>.bin` (little-endian f64) plus a
//! `<stem>.json` manifest of `{name, shape, offset}` with offsets in floats.

use std::fs;
use std::path::{Path, PathBuf};

use npenas_core::predictor::{CheckpointEntry, ParamStore};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::record::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

pub fn save(store: &ParamStore, stem: &Path) -> CliResult<()> {
    let (bin, json) = paths(stem);
    let (bytes, manifest) = store.checkpoint();
    let entries: Vec<Entry> = manifest
        .into_iter()
        .map(|e| Entry { name: e.name, shape: e.shape, offset: e.offset })
        .collect();
    write_atomic(&bin, &bytes)?;
    let mut text = serde_json::to_string_pretty(&entries).expect("manifest serializes");
    text.push('\n');
    write_atomic(&json, text.as_bytes())
}

pub fn load(store: &mut ParamStore, stem: &Path) -> CliResult<()> {
    let (bin, json) = paths(stem);
    let bytes = fs::read(&bin).map_err(|e| CliError::io(format!("reading {}", bin.display()), e))?;
    let text = fs::read_to_string(&json).map_err(|e| CliError::io(format!("reading {}", json.display()), e))?;
    let entries: Vec<Entry> =
        serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", json.display())))?;
    let manifest: Vec<CheckpointEntry> = entries
        .into_iter()
        .map(|e| CheckpointEntry { name: e.name, shape: e.shape, offset: e.offset })
        .collect();
    store.load_checkpoint(&bytes, &manifest)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use npenas_core::predictor::{Direction, UncertaintyPredictor};

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("model");
        let a = UncertaintyPredictor::init(6, Direction::default(), 1);
        save(a.params(), &stem).unwrap();
        let mut b = UncertaintyPredictor::init(6, Direction::default(), 2);
        assert_ne!(a.params().checkpoint().0, b.params().checkpoint().0);
        load(b.params_mut(), &stem).unwrap();
        assert_eq!(a.params().checkpoint(), b.params().checkpoint());
        let first_len = fs::metadata(stem.with_extension("bin")).unwrap().len() as usize;
        assert_eq!(first_len, a.params().checkpoint().0.len());
    }
}
