use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::commands::{list_bundles, score_topic, TopicScores};
use super::{PipelineConfig, Stores};
use crate::ensemble::{argsort_rank, average_valid, weighted_ensemble, TransformationScore};
use crate::eval::{xinfap, Qrels, RunFile};
use crate::gateway::Provider;
use crate::paraphrase::{ParaphraseBundle, ParaphraseKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleRow {
    pub size: usize,
    pub metric: String,
    pub mean: f64,
    /// Population standard deviation over trials.
    pub std: f64,
    pub trials: usize,
}

/// Mean metric against the number of valid queries kept per transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleTable {
    pub rows: Vec<SubsampleRow>,
}

impl SubsampleTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("size\tmetric\tmean\tstd\ttrials\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{:.6}\t{}\n",
                r.size, r.metric, r.mean, r.std, r.trials
            ));
        }
        out
    }
}

/// Sorted uniform sample of `min(size, n)` positions out of `n`.
fn sample_positions(rng: &mut ChaCha8Rng, n: usize, size: usize) -> Vec<usize> {
    if size >= n {
        return (0..n).collect();
    }
    let mut v = rand::seq::index::sample(rng, n, size).into_vec();
    v.sort_unstable();
    v
}

fn topic_metric(
    cfg: &PipelineConfig,
    stores: &Stores,
    qrels: &Qrels,
    ts: &TopicScores,
    size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut parts: BTreeMap<ParaphraseKind, TransformationScore> = BTreeMap::new();
    for &kind in &cfg.subsample.transforms {
        let members = ts.members(kind);
        let chosen: Vec<_> = sample_positions(rng, members.len(), size)
            .into_iter()
            .map(|i| members[i].clone())
            .collect();
        if let Some(t) = average_valid(kind, &chosen)? {
            parts.insert(kind, t);
        }
    }
    let fused = weighted_ensemble(
        Some(&ts.user),
        parts.get(&ParaphraseKind::T2t),
        parts.get(&ParaphraseKind::T2i),
        parts.get(&ParaphraseKind::I2t),
        &cfg.weights,
    )?;
    let list = argsort_rank(&fused, &stores.embedding, cfg.depth)?;
    let mut run = RunFile::new();
    run.insert_ranked(&list, "subsample")?;
    let judgments = qrels
        .topic(&ts.qid)
        .ok_or_else(|| Error::Eval(format!("topic {} is absent from the judgments", ts.qid)))?;
    Ok(xinfap(run.topic(&ts.qid).unwrap_or_default(), judgments, cfg.infap_params()))
}

/// For each size and trial, keeps a seeded random subset of at most `size`
/// valid queries per transformation, fuses, ranks and averages xinfAP over
/// topics. Sampling is without replacement and independent per transformation.
pub fn run_subsample_experiment(
    cfg: &PipelineConfig,
    provider: &dyn Provider,
    bundle_dir: &Path,
    stores: &Stores,
    qrels: &Qrels,
) -> Result<SubsampleTable> {
    cfg.validate()?;
    let artifact_dir = cfg.provider.artifact_dir();
    let paths = list_bundles(bundle_dir)?;
    let pool = cfg.thread_pool()?;
    let scored: Vec<TopicScores> = pool.install(|| {
        paths
            .par_iter()
            .map(|p| {
                let bundle = ParaphraseBundle::load(p, &artifact_dir)?;
                score_topic(provider, &bundle, stores, cfg.theta, cfg.ignore_verification)
            })
            .collect::<Result<_>>()
    })?;
    let available: usize = scored
        .iter()
        .flat_map(|t| cfg.subsample.transforms.iter().map(move |&k| t.members(k).len()))
        .sum();
    if available == 0 {
        return Err(Error::InvalidArgument(
            "no valid queries in the selected transformations".into(),
        ));
    }
    let mut rows = Vec::with_capacity(cfg.subsample.sizes.len());
    for &size in &cfg.subsample.sizes {
        let trials: Vec<f64> = pool.install(|| {
            (0..cfg.subsample.trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(((size as u64) << 20) ^ trial as u64);
                    let mut sum = 0.0;
                    for ts in &scored {
                        sum += topic_metric(cfg, stores, qrels, ts, size, &mut rng)?;
                    }
                    Ok(sum / scored.len() as f64)
                })
                .collect::<Result<_>>()
        })?;
        let n = trials.len() as f64;
        let mean = trials.iter().sum::<f64>() / n;
        let var = trials.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        rows.push(SubsampleRow {
            size,
            metric: "xinfAP".to_string(),
            mean,
            std: var.sqrt(),
            trials: trials.len(),
        });
    }
    Ok(SubsampleTable { rows })
}
