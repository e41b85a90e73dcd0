//! Batch commands tying the modules together, with manifests and exit codes.

mod commands;
mod experiment;
mod scores;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleWeights;
use crate::eval::{InfApParams, DEFAULT_DEPTH, DEFAULT_EPSILON};
use crate::fsutil::{read_to_string, sha256_hex, write_atomic};
use crate::gateway::ProviderConfig;
use crate::index::{EmbeddingStore, StoreKind};
use crate::paraphrase::{ParaphraseDefaults, ParaphraseKind};
use crate::{Error, Result};

pub use commands::{
    list_bundles, run_fuse, run_paraphrase, run_search, run_verify, score_topic, signif_report, SignifReport,
    TopicScores,
};
pub use experiment::{run_subsample_experiment, SubsampleRow, SubsampleTable};
pub use scores::{parse_tag, DenseScores, SCORES_HEADER_LEN, SCORES_MAGIC, SCORES_VERSION};

pub const RUN_TAG_PREFIX: &str = "paravid";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorePaths {
    pub vectors: PathBuf,
    /// Defaults to the vector path with `.ids` appended.
    #[serde(default)]
    pub ids: Option<PathBuf>,
}

impl StorePaths {
    pub fn new(vectors: impl Into<PathBuf>) -> Self {
        StorePaths {
            vectors: vectors.into(),
            ids: None,
        }
    }

    pub fn ids_path(&self) -> PathBuf {
        self.ids.clone().unwrap_or_else(|| {
            let mut s = self.vectors.clone().into_os_string();
            s.push(".ids");
            PathBuf::from(s)
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    pub embedding: Option<StorePaths>,
    pub concept: Option<StorePaths>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub bundles: PathBuf,
    pub runs: PathBuf,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            bundles: PathBuf::from("bundles"),
            runs: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsampleConfig {
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// Transformations that take part in the ensemble.
    pub transforms: Vec<ParaphraseKind>,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        SubsampleConfig {
            sizes: vec![1, 2, 5, 10, 15],
            trials: 5,
            transforms: ParaphraseKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub provider: ProviderConfig,
    pub paraphrase: ParaphraseDefaults,
    pub theta: f64,
    pub weights: EnsembleWeights,
    pub depth: usize,
    pub epsilon: f64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub seed: u64,
    pub iterations: usize,
    /// Search with every paraphrase instead of the verified ones.
    pub ignore_verification: bool,
    pub stores: StoreConfig,
    pub paths: PathConfig,
    pub subsample: SubsampleConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            provider: ProviderConfig::default(),
            paraphrase: ParaphraseDefaults::default(),
            theta: 0.5,
            weights: EnsembleWeights::default(),
            depth: DEFAULT_DEPTH,
            epsilon: DEFAULT_EPSILON,
            jobs: 0,
            seed: 0,
            iterations: crate::eval::DEFAULT_ITERATIONS,
            ignore_verification: false,
            stores: StoreConfig::default(),
            paths: PathConfig::default(),
            subsample: SubsampleConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("config {source_name}: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config always serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.provider.validate()?;
        self.paraphrase.validate()?;
        self.weights.validate()?;
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidArgument(format!("theta {} is outside [0, 1]", self.theta)));
        }
        if self.depth == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1".into()));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::InvalidArgument(format!("epsilon {} must be finite and >= 0", self.epsilon)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be positive".into()));
        }
        if self.subsample.sizes.is_empty() || self.subsample.sizes.contains(&0) {
            return Err(Error::InvalidArgument("subsample sizes must be positive".into()));
        }
        if self.subsample.trials == 0 {
            return Err(Error::InvalidArgument("subsample trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn infap_params(&self) -> InfApParams {
        InfApParams {
            depth: self.depth,
            epsilon: self.epsilon,
        }
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {} workers: {e}", self.jobs)))
    }

    pub fn load_stores(&self) -> Result<Stores> {
        let emb = self
            .stores
            .embedding
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("no embedding store configured".into()))?;
        let embedding = EmbeddingStore::ingest(&emb.vectors, &emb.ids_path(), StoreKind::Embedding)?;
        let concept = match &self.stores.concept {
            Some(c) => Some(EmbeddingStore::ingest(&c.vectors, &c.ids_path(), StoreKind::Concept)?),
            None => None,
        };
        Stores::new(embedding, concept)
    }
}

/// An embedding store and an optional row-aligned concept store.
#[derive(Debug, Clone)]
pub struct Stores {
    pub embedding: EmbeddingStore,
    pub concept: Option<EmbeddingStore>,
}

impl Stores {
    pub fn new(embedding: EmbeddingStore, concept: Option<EmbeddingStore>) -> Result<Self> {
        if embedding.kind() != StoreKind::Embedding {
            return Err(Error::InvalidArgument("embedding store has kind concept".into()));
        }
        if let Some(c) = &concept {
            if c.kind() != StoreKind::Concept {
                return Err(Error::InvalidArgument("concept store has kind embedding".into()));
            }
            if c.ids() != embedding.ids() {
                return Err(Error::InvalidArgument(
                    "concept store rows are not aligned with the embedding store".into(),
                ));
            }
        }
        Ok(Stores { embedding, concept })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ManifestRow {
    pub file: String,
    /// None for a file that was intentionally not written.
    pub sha256: Option<String>,
    pub note: String,
}

/// Every file a command emitted, with content hashes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn to_tsv(&self) -> String {
        let mut rows = self.rows.clone();
        rows.sort();
        let mut out = String::from("file\tsha256\tnote\n");
        for r in rows {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                r.file,
                r.sha256.as_deref().unwrap_or("-"),
                r.note
            ));
        }
        out
    }

    pub fn find(&self, file: &str) -> Option<&ManifestRow> {
        self.rows.iter().find(|r| r.file == file)
    }
}

/// Writes files under `root` atomically and records them for the manifest.
#[derive(Debug)]
pub(crate) struct Emitter {
    root: PathBuf,
    rows: Vec<ManifestRow>,
}

impl Emitter {
    pub(crate) fn new(root: &Path) -> Self {
        Emitter {
            root: root.to_path_buf(),
            rows: Vec::new(),
        }
    }

    pub(crate) fn emit(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        write_atomic(&path, bytes)?;
        self.record(rel, sha256_hex(bytes), "written");
        Ok(path)
    }

    pub(crate) fn record(&mut self, file: &str, sha256: String, note: &str) {
        self.rows.push(ManifestRow {
            file: file.to_string(),
            sha256: Some(sha256),
            note: note.to_string(),
        });
    }

    pub(crate) fn absent(&mut self, file: &str, note: String) {
        self.rows.push(ManifestRow {
            file: file.to_string(),
            sha256: None,
            note,
        });
    }

    pub(crate) fn extend(&mut self, rows: Vec<ManifestRow>) {
        self.rows.extend(rows);
    }

    pub(crate) fn finish(self, name: &str) -> Result<Manifest> {
        let mut rows = self.rows;
        rows.sort();
        rows.dedup();
        let manifest = Manifest { rows };
        write_atomic(&self.root.join(name), manifest.to_tsv().as_bytes())?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicFailure {
    pub qid: String,
    pub error: String,
}

pub(crate) fn failures_tsv(failures: &[TopicFailure]) -> String {
    let mut out = String::from("qid\terror\n");
    for f in failures {
        let error = f.error.replace(['\t', '\n'], " ");
        out.push_str(&format!("{}\t{error}\n", f.qid));
    }
    out
}

/// Outcome of a per-topic batch command.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandReport {
    pub topics: usize,
    pub failures: Vec<TopicFailure>,
    pub manifest: Manifest,
}

impl CommandReport {
    /// 0 when every topic succeeded, 2 when some failed, 1 when all failed.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else if self.failures.len() < self.topics {
            2
        } else {
            1
        }
    }
}
