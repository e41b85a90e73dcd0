use std::path::PathBuf;

use clap::{Args, ValueEnum};
use paravid::gateway::ProviderMode;
use paravid::paraphrase::ParaphraseKind;
use paravid::pipeline::{PipelineConfig, StorePaths};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Remote,
    Stub,
}

/// Flags mirroring every configuration field; a flag wins over `--config`.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, global = true)]
    pub base_url: Option<String>,
    #[arg(long, global = true)]
    pub timeout_ms: Option<u64>,
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
    #[arg(long, global = true)]
    pub stub_seed: Option<u64>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub stub_dim: Option<usize>,
    #[arg(long, global = true)]
    pub stub_concept_dim: Option<usize>,
    #[arg(long, global = true, env = "PARAVID_BEARER_TOKEN", hide_env_values = true)]
    pub bearer_token: Option<String>,

    #[arg(long, global = true)]
    pub n_t2t: Option<usize>,
    /// Comma-separated generation seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, global = true)]
    pub images_per_seed: Option<usize>,
    #[arg(long, global = true)]
    pub captions_per_image: Option<usize>,

    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub weights_user: Option<f64>,
    #[arg(long, global = true)]
    pub weights_t2t: Option<f64>,
    #[arg(long, global = true)]
    pub weights_t2i: Option<f64>,
    #[arg(long, global = true)]
    pub weights_i2t: Option<f64>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub ignore_verification: bool,

    #[arg(long, global = true)]
    pub embedding_vectors: Option<PathBuf>,
    #[arg(long, global = true)]
    pub embedding_ids: Option<PathBuf>,
    #[arg(long, global = true)]
    pub concept_vectors: Option<PathBuf>,
    #[arg(long, global = true)]
    pub concept_ids: Option<PathBuf>,

    #[arg(long, global = true)]
    pub bundles: Option<PathBuf>,
    #[arg(long, global = true)]
    pub runs: Option<PathBuf>,

    /// Comma-separated subsample sizes.
    #[arg(long, global = true, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Comma-separated transformations kept in the subsample ensemble.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_kind)]
    pub transforms: Option<Vec<ParaphraseKind>>,
}

fn parse_kind(s: &str) -> Result<ParaphraseKind, String> {
    ParaphraseKind::parse(s).ok_or_else(|| format!("unknown transformation {s:?} (t2t, t2i, i2t)"))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn store(slot: &mut Option<StorePaths>, vectors: Option<PathBuf>, ids: Option<PathBuf>) {
    if let Some(v) = vectors {
        *slot = Some(StorePaths::new(v));
    }
    if let (Some(s), Some(ids)) = (slot.as_mut(), ids) {
        s.ids = Some(ids);
    }
}

impl Overrides {
    /// Defaults, then the config file, then the cache-dir environment variable, then flags.
    pub fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::read(path)?,
            None => PipelineConfig::default(),
        };
        c.provider = c.provider.with_env_overrides();
        let p = &mut c.provider;
        set(
            &mut p.mode,
            self.mode.map(|m| match m {
                Mode::Remote => ProviderMode::Remote,
                Mode::Stub => ProviderMode::Stub,
            }),
        );
        set(&mut p.base_url, self.base_url.clone());
        set(&mut p.timeout_ms, self.timeout_ms);
        set(&mut p.max_retries, self.max_retries);
        set(&mut p.stub_seed, self.stub_seed);
        set(&mut p.cache_dir, self.cache_dir.clone());
        set(&mut p.stub_dim, self.stub_dim);
        set(&mut p.stub_concept_dim, self.stub_concept_dim);
        if self.bearer_token.is_some() {
            p.bearer_token = self.bearer_token.clone();
        }
        let d = &mut c.paraphrase;
        set(&mut d.n_t2t, self.n_t2t);
        set(&mut d.seeds, self.seeds.clone());
        set(&mut d.images_per_seed, self.images_per_seed);
        set(&mut d.captions_per_image, self.captions_per_image);
        set(&mut c.theta, self.theta);
        set(&mut c.weights.user, self.weights_user);
        set(&mut c.weights.t2t, self.weights_t2t);
        set(&mut c.weights.t2i, self.weights_t2i);
        set(&mut c.weights.i2t, self.weights_i2t);
        set(&mut c.depth, self.depth);
        set(&mut c.epsilon, self.epsilon);
        set(&mut c.jobs, self.jobs);
        set(&mut c.seed, self.seed);
        set(&mut c.iterations, self.iterations);
        c.ignore_verification |= self.ignore_verification;
        store(&mut c.stores.embedding, self.embedding_vectors.clone(), self.embedding_ids.clone());
        store(&mut c.stores.concept, self.concept_vectors.clone(), self.concept_ids.clone());
        set(&mut c.paths.bundles, self.bundles.clone());
        set(&mut c.paths.runs, self.runs.clone());
        set(&mut c.subsample.sizes, self.sizes.clone());
        set(&mut c.subsample.trials, self.trials);
        set(&mut c.subsample.transforms, self.transforms.clone());
        c.validate()?;
        Ok(c)
    }
}
