mod exact;
mod figure;
mod simulate;
mod verify;

pub use exact::exact;
pub use figure::{figure, load_overrides, FigureId, FigureOverrides};
pub use simulate::simulate;
pub use verify::{verify, Check, Status, VerifyReport};

use serde_json::json;

use crate::spec::{ExperimentSpec, LoadedSpec};
use crate::table::Metadata;

/// Command-line options shared by every command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: None, threads: 1 }
    }
}

/// Spec with the command-line seed applied.
fn effective_spec(loaded: &LoadedSpec, opts: RunOptions) -> ExperimentSpec {
    let mut spec = loaded.spec.clone();
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    spec
}

fn spec_metadata(command: &str, spec: &ExperimentSpec, sha256: &str) -> Metadata {
    let mut m = Metadata::new(command, spec.seed, sha256);
    m.insert("system", spec.system_label().into());
    m.insert("m_count", spec.m_count());
    m.insert("model", spec.model_label().into());
    m.insert("beta", json!(spec.beta));
    m.insert("params", spec.describe());
    m
}
