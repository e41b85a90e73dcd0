use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::scores::{parse_tag, DenseScores};
use super::{failures_tsv, CommandReport, Emitter, ManifestRow, PipelineConfig, Stores, TopicFailure, RUN_TAG_PREFIX};
use crate::ensemble::{argsort_rank, average_valid, weighted_ensemble, TransformationScore};
use crate::eval::{evaluate_run, randomization_test, InfApParams, Qrels, RunFile};
use crate::fsutil::{read_bytes, sha256_hex, write_atomic};
use crate::gateway::{ImageArtifact, Provider};
use crate::index::{fusion_text_search, image_search, top_k, EmbeddingStore, RankedList, ScoreTag, ScoreVector};
use crate::paraphrase::{build_bundle, ParaphraseBundle, ParaphraseKind, UserQuery};
use crate::verification::{audit_tsv, verify_bundle};
use crate::{Error, Result};

fn write_row(root: &Path, rel: &str, bytes: &[u8]) -> Result<ManifestRow> {
    write_atomic(&root.join(rel), bytes)?;
    Ok(ManifestRow {
        file: rel.to_string(),
        sha256: Some(sha256_hex(bytes)),
        note: "written".to_string(),
    })
}

/// `*.bundle` files in `dir`, sorted by name.
pub fn list_bundles(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "bundle") && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

/// Splits per-topic results into successes and recorded failures.
fn partition<T>(results: Vec<(String, Result<T>)>) -> (Vec<T>, Vec<TopicFailure>) {
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (qid, r) in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::error!("topic {qid}: {e}");
                failures.push(TopicFailure {
                    qid,
                    error: e.to_string(),
                })
            }
        }
    }
    (ok, failures)
}

/// Expands every topic into a bundle under `out_dir`; image bytes go to the
/// provider's artifact directory.
pub fn run_paraphrase(
    cfg: &PipelineConfig,
    provider: &dyn Provider,
    topics: &[UserQuery],
    out_dir: &Path,
) -> Result<CommandReport> {
    cfg.validate()?;
    let artifact_dir = cfg.provider.artifact_dir();
    let results: Vec<(String, Result<Vec<ManifestRow>>)> = cfg.thread_pool()?.install(|| {
        topics
            .par_iter()
            .map(|q| {
                let r = build_bundle(provider, q, &cfg.paraphrase).and_then(|b| {
                    let path = b.save(out_dir, &artifact_dir)?;
                    let mut rows = vec![ManifestRow {
                        file: ParaphraseBundle::file_name(&q.qid),
                        sha256: Some(sha256_hex(b.to_json().as_bytes())),
                        note: "written".into(),
                    }];
                    log::info!("wrote {}", path.display());
                    for p in &b.t2i {
                        let img = p.image.as_ref().expect("t2i entries carry images");
                        rows.push(ManifestRow {
                            file: artifact_dir.join(&img.id).display().to_string(),
                            sha256: Some(img.id.clone()),
                            note: "artifact".into(),
                        });
                    }
                    Ok(rows)
                });
                (q.qid.clone(), r)
            })
            .collect()
    });
    finish(out_dir, "paraphrase", "failures.tsv", topics.len(), results)
}

fn finish(
    out_dir: &Path,
    command: &str,
    failures_name: &str,
    topics: usize,
    results: Vec<(String, Result<Vec<ManifestRow>>)>,
) -> Result<CommandReport> {
    let (rows, failures) = partition(results);
    let mut emitter = Emitter::new(out_dir);
    emitter.extend(rows.into_iter().flatten().collect());
    emitter.emit(failures_name, failures_tsv(&failures).as_bytes())?;
    let manifest = emitter.finish(&format!("{command}.manifest.tsv"))?;
    Ok(CommandReport {
        topics,
        failures,
        manifest,
    })
}

/// Verifies every bundle in `bundle_dir` in place and writes `{qid}.verify.tsv` audits.
pub fn run_verify(cfg: &PipelineConfig, provider: &dyn Provider, bundle_dir: &Path) -> Result<CommandReport> {
    cfg.validate()?;
    let artifact_dir = cfg.provider.artifact_dir();
    let paths = list_bundles(bundle_dir)?;
    let results: Vec<(String, Result<Vec<ManifestRow>>)> = cfg.thread_pool()?.install(|| {
        paths
            .par_iter()
            .map(|path| {
                let r = (|| {
                    let mut bundle = ParaphraseBundle::load(path, &artifact_dir)?;
                    let outcome = verify_bundle(provider, &mut bundle)?;
                    for f in &outcome.failures {
                        log::warn!("{}: {} {} not verified: {}", bundle.query.qid, f.kind, f.ordinal, f.error);
                    }
                    let qid = bundle.query.qid.clone();
                    Ok(vec![
                        write_row(bundle_dir, &ParaphraseBundle::file_name(&qid), bundle.to_json().as_bytes())?,
                        write_row(bundle_dir, &format!("{qid}.verify.tsv"), audit_tsv(&bundle).as_bytes())?,
                    ])
                })();
                (stem(path), r)
            })
            .collect()
    });
    finish(bundle_dir, "verify", "verify.failures.tsv", paths.len(), results)
}

/// Score lists of one topic: the user query and each selected paraphrase.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicScores {
    pub qid: String,
    pub user: ScoreVector,
    pub members: BTreeMap<ParaphraseKind, Vec<ScoreVector>>,
}

impl TopicScores {
    pub fn members(&self, kind: ParaphraseKind) -> &[ScoreVector] {
        self.members.get(&kind).map_or(&[], Vec::as_slice)
    }
}

fn dim_mismatch(what: &str, encoder: usize, store: usize) -> Error {
    Error::InvalidArgument(format!("{what} encoder dim {encoder} does not match store dim {store}"))
}

fn text_scores(
    provider: &dyn Provider,
    texts: &[String],
    stores: &Stores,
    theta: f64,
    qid: &str,
    tag: ScoreTag,
) -> Result<Vec<ScoreVector>> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let enc = provider.encode_text(texts)?;
    if enc.dim != stores.embedding.dim() {
        return Err(dim_mismatch("text", enc.dim, stores.embedding.dim()));
    }
    let concepts = match (&stores.concept, &enc.concepts) {
        (Some(store), Some(c)) => {
            if c.dim != store.dim() {
                return Err(dim_mismatch("concept", c.dim, store.dim()));
            }
            Some(c)
        }
        (Some(_), None) => {
            return Err(Error::InvalidArgument(
                "a concept store is configured but the encoder returned no concept vectors".into(),
            ))
        }
        (None, _) => None,
    };
    enc.embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let q_con = concepts.map(|c| c.vectors[i].as_slice());
            Ok(fusion_text_search(&stores.embedding, stores.concept.as_ref(), e, q_con, theta)?.labeled(qid, tag))
        })
        .collect()
}

fn image_scores(provider: &dyn Provider, images: &[ImageArtifact], stores: &Stores, qid: &str) -> Result<Vec<ScoreVector>> {
    if images.is_empty() {
        return Ok(Vec::new());
    }
    let enc = provider.encode_image(images)?;
    if enc.dim != stores.embedding.dim() {
        return Err(dim_mismatch("image", enc.dim, stores.embedding.dim()));
    }
    enc.embeddings
        .iter()
        .map(|e| Ok(image_search(&stores.embedding, e)?.labeled(qid, ScoreTag::T2i)))
        .collect()
}

/// Encodes and scores the user query and the selected paraphrases of `bundle`.
/// Text queries use fusion search; generated images use embedding search only.
pub fn score_topic(
    provider: &dyn Provider,
    bundle: &ParaphraseBundle,
    stores: &Stores,
    theta: f64,
    ignore_verification: bool,
) -> Result<TopicScores> {
    let qid = bundle.query.qid.as_str();
    if !ignore_verification && !bundle.is_verified() {
        return Err(Error::InvalidArgument(format!(
            "bundle {qid} is not verified; verify it first or ignore verification"
        )));
    }
    let user = text_scores(provider, std::slice::from_ref(&bundle.query.text), stores, theta, qid, ScoreTag::User)?
        .pop()
        .expect("one query in, one score list out");
    let mut members = BTreeMap::new();
    for kind in ParaphraseKind::ALL {
        let selected = bundle.selected(kind, ignore_verification);
        let scores = match kind {
            ParaphraseKind::T2i => {
                let images: Vec<ImageArtifact> = selected.iter().filter_map(|p| p.image.clone()).collect();
                image_scores(provider, &images, stores, qid)?
            }
            _ => {
                let texts: Vec<String> = selected.iter().filter_map(|p| p.text.clone()).collect();
                text_scores(provider, &texts, stores, theta, qid, kind.into())?
            }
        };
        members.insert(kind, scores);
    }
    Ok(TopicScores {
        qid: qid.to_string(),
        user,
        members,
    })
}

fn scores_file(qid: &str, tag: ScoreTag) -> String {
    format!("scores/{qid}.{tag}.scores")
}

fn run_file(tag: ScoreTag) -> String {
    format!("{tag}.run")
}

fn run_tag(tag: ScoreTag) -> String {
    format!("{RUN_TAG_PREFIX}-{tag}")
}

struct SearchedTopic {
    rows: Vec<ManifestRow>,
    lists: Vec<(ScoreTag, RankedList)>,
}

fn combine_runs(
    emitter: &mut Emitter,
    tags: &[ScoreTag],
    lists: Vec<(ScoreTag, RankedList)>,
) -> Result<BTreeMap<ScoreTag, RunFile>> {
    let mut runs: BTreeMap<ScoreTag, RunFile> = BTreeMap::new();
    for (tag, list) in lists {
        runs.entry(tag).or_default().insert_ranked(&list, &run_tag(tag))?;
    }
    for &tag in tags {
        match runs.get(&tag) {
            Some(run) => {
                emitter.emit(&run_file(tag), run.to_trec_string().as_bytes())?;
            }
            None => emitter.absent(&run_file(tag), format!("no topic produced a {tag} ranking")),
        }
    }
    Ok(runs)
}

/// Ranks every bundle in `bundle_dir` against the stores. Writes one combined
/// run file per source plus dense per-topic score files for fusion.
pub fn run_search(
    cfg: &PipelineConfig,
    provider: &dyn Provider,
    bundle_dir: &Path,
    stores: &Stores,
    out_dir: &Path,
) -> Result<CommandReport> {
    cfg.validate()?;
    let artifact_dir = cfg.provider.artifact_dir();
    let paths = list_bundles(bundle_dir)?;
    let fingerprint = stores.embedding.fingerprint();
    if stores.concept.is_none() {
        log::warn!("no concept store; text queries are ranked by embedding scores only");
    }
    let results: Vec<(String, Result<SearchedTopic>)> = cfg.thread_pool()?.install(|| {
        paths
            .par_iter()
            .map(|path| {
                let r = (|| {
                    let bundle = ParaphraseBundle::load(path, &artifact_dir)?;
                    let ts = score_topic(provider, &bundle, stores, cfg.theta, cfg.ignore_verification)?;
                    let qid = ts.qid.as_str();
                    let mut out = SearchedTopic {
                        rows: Vec::new(),
                        lists: Vec::new(),
                    };
                    let dense = |tag, n_members: usize, sv: &ScoreVector| DenseScores {
                        tag,
                        n_members: n_members as u32,
                        fingerprint: fingerprint.clone(),
                        values: sv.values.clone(),
                    };
                    out.rows.push(write_row(
                        out_dir,
                        &scores_file(qid, ScoreTag::User),
                        &dense(ScoreTag::User, 1, &ts.user).encode(),
                    )?);
                    out.lists.push((ScoreTag::User, top_k(&ts.user, &stores.embedding, cfg.depth)?));
                    for kind in ParaphraseKind::ALL {
                        let tag = ScoreTag::from(kind);
                        match average_valid(kind, ts.members(kind))? {
                            Some(t) => {
                                let bytes = dense(tag, t.n_members, &t.score).encode();
                                out.rows.push(write_row(out_dir, &scores_file(qid, tag), &bytes)?);
                                out.lists.push((tag, top_k(&t.score, &stores.embedding, cfg.depth)?));
                            }
                            None => out.rows.push(ManifestRow {
                                file: scores_file(qid, tag),
                                sha256: None,
                                note: format!("absent: no valid {kind} paraphrases"),
                            }),
                        }
                    }
                    Ok(out)
                })();
                (stem(path), r)
            })
            .collect()
    });
    let (topics, failures) = partition(results);
    let mut emitter = Emitter::new(out_dir);
    let mut lists = Vec::new();
    for t in topics {
        emitter.extend(t.rows);
        lists.extend(t.lists);
    }
    combine_runs(
        &mut emitter,
        &[ScoreTag::User, ScoreTag::T2t, ScoreTag::T2i, ScoreTag::I2t],
        lists,
    )?;
    emitter.emit("search.failures.tsv", failures_tsv(&failures).as_bytes())?;
    let manifest = emitter.finish("search.manifest.tsv")?;
    Ok(CommandReport {
        topics: paths.len(),
        failures,
        manifest,
    })
}

/// `{qid}.{source}.scores` files under `score_dir/scores`, grouped by topic.
fn discover_scores(score_dir: &Path) -> Result<BTreeMap<String, Vec<(ScoreTag, PathBuf)>>> {
    let dir = score_dir.join("scores");
    let mut out: BTreeMap<String, Vec<(ScoreTag, PathBuf)>> = BTreeMap::new();
    for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
        let path = entry.map_err(|e| Error::io(&dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some((qid, source)) = name.strip_suffix(".scores").and_then(|s| s.rsplit_once('.')) else {
            continue;
        };
        let Some(tag) = parse_tag(source).filter(|t| *t != ScoreTag::Fused) else {
            log::warn!("ignoring score file {name} with unknown source {source:?}");
            continue;
        };
        out.entry(qid.to_string()).or_default().push((tag, path));
    }
    for v in out.values_mut() {
        v.sort();
    }
    Ok(out)
}

fn fuse_topic(
    cfg: &PipelineConfig,
    store: &EmbeddingStore,
    fingerprint: &str,
    qid: &str,
    files: &[(ScoreTag, PathBuf)],
) -> Result<RankedList> {
    let mut user = None;
    let mut parts: BTreeMap<ParaphraseKind, TransformationScore> = BTreeMap::new();
    for (tag, path) in files {
        let d = DenseScores::decode(&read_bytes(path)?, &path.display().to_string())?;
        if d.tag != *tag {
            return Err(Error::InvalidArgument(format!(
                "{} holds {} scores, its name says {tag}",
                path.display(),
                d.tag
            )));
        }
        if d.fingerprint != fingerprint || d.values.len() != store.len() {
            return Err(Error::InvalidArgument(format!(
                "{} was scored against store {}, not the configured store {fingerprint}",
                path.display(),
                d.fingerprint
            )));
        }
        let sv = d.to_score_vector(qid);
        match tag {
            ScoreTag::User => user = Some(sv),
            ScoreTag::T2t | ScoreTag::T2i | ScoreTag::I2t => {
                let kind = match tag {
                    ScoreTag::T2t => ParaphraseKind::T2t,
                    ScoreTag::T2i => ParaphraseKind::T2i,
                    _ => ParaphraseKind::I2t,
                };
                parts.insert(
                    kind,
                    TransformationScore {
                        kind,
                        score: sv,
                        n_members: d.n_members as usize,
                    },
                );
            }
            ScoreTag::Fused => unreachable!("filtered during discovery"),
        }
    }
    let fused = weighted_ensemble(
        user.as_ref(),
        parts.get(&ParaphraseKind::T2t),
        parts.get(&ParaphraseKind::T2i),
        parts.get(&ParaphraseKind::I2t),
        &cfg.weights,
    )?
    .labeled(qid, ScoreTag::Fused);
    argsort_rank(&fused, store, cfg.depth)
}

/// Combines the dense scores written by search into `fused.run`. Score files
/// computed against a different store are rejected.
pub fn run_fuse(cfg: &PipelineConfig, store: &EmbeddingStore, score_dir: &Path, out_dir: &Path) -> Result<CommandReport> {
    cfg.validate()?;
    let topics = discover_scores(score_dir)?;
    let fingerprint = store.fingerprint();
    let results: Vec<(String, Result<(ScoreTag, RankedList)>)> = cfg.thread_pool()?.install(|| {
        topics
            .par_iter()
            .map(|(qid, files)| {
                let r = fuse_topic(cfg, store, &fingerprint, qid, files).map(|l| (ScoreTag::Fused, l));
                (qid.clone(), r)
            })
            .collect()
    });
    let (lists, failures) = partition(results);
    let mut emitter = Emitter::new(out_dir);
    combine_runs(&mut emitter, &[ScoreTag::Fused], lists)?;
    emitter.emit("fuse.failures.tsv", failures_tsv(&failures).as_bytes())?;
    let manifest = emitter.finish("fuse.manifest.tsv")?;
    Ok(CommandReport {
        topics: topics.len(),
        failures,
        manifest,
    })
}

/// Paired comparison of two runs on per-topic xinfAP.
#[derive(Debug, Clone, PartialEq)]
pub struct SignifReport {
    pub topics: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub p_value: f64,
}

impl SignifReport {
    pub fn to_tsv(&self) -> String {
        format!(
            "metric\ttopics\tmean_a\tmean_b\tp_value\nxinfAP\t{}\t{:.6}\t{:.6}\t{:.6}\n",
            self.topics, self.mean_a, self.mean_b, self.p_value
        )
    }
}

pub fn signif_report(
    run_a: &RunFile,
    run_b: &RunFile,
    qrels: &Qrels,
    params: InfApParams,
    iterations: usize,
    seed: u64,
) -> Result<SignifReport> {
    let a = evaluate_run(run_a, qrels, params)?;
    let b = evaluate_run(run_b, qrels, params)?;
    if a.per_topic.keys().ne(b.per_topic.keys()) {
        return Err(Error::Eval("the two runs do not cover the same topics".into()));
    }
    let va: Vec<f64> = a.per_topic.values().copied().collect();
    let vb: Vec<f64> = b.per_topic.values().copied().collect();
    Ok(SignifReport {
        topics: va.len(),
        mean_a: a.mean,
        mean_b: b.mean,
        p_value: randomization_test(&va, &vb, iterations, seed)?,
    })
}
