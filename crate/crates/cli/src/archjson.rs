//! JSON form of a cell: `{"ops": [kind ids], "adj": row-major 0/1, "n": N}`.

use npenas_core::{ArchGraph, OpKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchJson {
    pub ops: Vec<u8>,
    pub adj: Vec<u8>,
    pub n: usize,
}

impl From<&ArchGraph> for ArchJson {
    fn from(g: &ArchGraph) -> Self {
        Self { ops: g.ops().iter().map(|o| o.id()).collect(), adj: g.adjacency().to_vec(), n: g.num_nodes() }
    }
}

impl TryFrom<ArchJson> for ArchGraph {
    type Error = npenas_core::Error;

    fn try_from(a: ArchJson) -> Result<Self, Self::Error> {
        if a.ops.len() != a.n || a.adj.len() != a.n * a.n {
            return Err(npenas_core::Error::SizeMismatch(format!(
                "n = {} with {} ops and {} adjacency entries",
                a.n,
                a.ops.len(),
                a.adj.len()
            )));
        }
        if a.adj.iter().any(|&b| b > 1) {
            return Err(npenas_core::Error::MalformedGraph("adjacency entries must be 0 or 1".into()));
        }
        ArchGraph::new(a.ops.into_iter().map(OpKind).collect(), a.adj)
    }
}
