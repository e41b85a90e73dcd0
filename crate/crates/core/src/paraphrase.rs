//! Query expansion by text rewriting, image generation and image captioning.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fsutil::{read_bytes, read_to_string, write_atomic};
use crate::gateway::{Candidate, ImageArtifact, Provider};
use crate::verification::QaPair;
use crate::{Error, Result};

/// The three query transformations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParaphraseKind {
    T2t,
    T2i,
    I2t,
}

impl ParaphraseKind {
    pub const ALL: [ParaphraseKind; 3] = [ParaphraseKind::T2t, ParaphraseKind::T2i, ParaphraseKind::I2t];

    pub fn as_str(self) -> &'static str {
        match self {
            ParaphraseKind::T2t => "t2t",
            ParaphraseKind::T2i => "t2i",
            ParaphraseKind::I2t => "i2t",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for ParaphraseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserQuery {
    pub qid: String,
    pub text: String,
}

impl UserQuery {
    pub fn new(qid: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let q = UserQuery {
            qid: qid.into(),
            text: text.into(),
        };
        q.check().map_err(Error::InvalidArgument)?;
        Ok(q)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !valid_qid(&self.qid) {
            return Err(format!("invalid topic id {:?}", self.qid));
        }
        if self.text.trim().is_empty() {
            return Err(format!("topic {} has empty text", self.qid));
        }
        Ok(())
    }
}

/// Topic ids become file names, so they must be plain tokens.
fn valid_qid(qid: &str) -> bool {
    !qid.is_empty()
        && qid != "."
        && qid != ".."
        && !qid.chars().any(|c| c.is_whitespace() || c == '/' || c == '\\' || c.is_control())
}

/// Parses a topic file: one `qid<TAB>text` per line. Blank lines are skipped.
pub fn parse_topics(text: &str, source_name: &str) -> Result<Vec<UserQuery>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (qid, body) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source_name, lineno, "expected qid<TAB>text"))?;
        let query = UserQuery {
            qid: qid.to_string(),
            text: body.trim().to_string(),
        };
        query.check().map_err(|r| Error::parse(source_name, lineno, r))?;
        if !seen.insert(query.qid.clone()) {
            return Err(Error::parse(source_name, lineno, format!("duplicate topic id {}", query.qid)));
        }
        out.push(query);
    }
    Ok(out)
}

pub fn read_topics(path: &Path) -> Result<Vec<UserQuery>> {
    parse_topics(&read_to_string(path)?, &path.display().to_string())
}

/// One rewritten, generated or captioned query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphrasedQuery {
    pub kind: ParaphraseKind,
    pub ordinal: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageArtifact>,
    /// Content id of the T2I image a caption was produced from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<bool>,
    /// Why verification failed, when it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ParaphrasedQuery {
    pub fn rewrite(ordinal: usize, text: String) -> Self {
        Self::blank(ParaphraseKind::T2t, ordinal, Some(text), None, None)
    }

    pub fn generated(ordinal: usize, image: ImageArtifact) -> Self {
        Self::blank(ParaphraseKind::T2i, ordinal, None, Some(image), None)
    }

    pub fn caption(ordinal: usize, text: String, parent_image: String) -> Self {
        Self::blank(ParaphraseKind::I2t, ordinal, Some(text), None, Some(parent_image))
    }

    fn blank(
        kind: ParaphraseKind,
        ordinal: usize,
        text: Option<String>,
        image: Option<ImageArtifact>,
        parent_image: Option<String>,
    ) -> Self {
        ParaphrasedQuery {
            kind,
            ordinal,
            text,
            image,
            parent_image,
            verified_count: None,
            valid: None,
            error: None,
        }
    }

    pub fn candidate(&self) -> Option<Candidate<'_>> {
        match (&self.text, &self.image) {
            (Some(t), None) => Some(Candidate::Text(t)),
            (None, Some(img)) => Some(Candidate::Image(img)),
            _ => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.valid == Some(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n_t2t: usize,
    pub n_t2i: usize,
    pub n_i2t: usize,
}

/// Expansion sizes. The defaults give 10 rewrites, 15 images and 150 captions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParaphraseDefaults {
    pub n_t2t: usize,
    pub seeds: Vec<u64>,
    pub images_per_seed: usize,
    pub captions_per_image: usize,
}

impl Default for ParaphraseDefaults {
    fn default() -> Self {
        ParaphraseDefaults {
            n_t2t: 10,
            seeds: vec![10, 100, 1000, 10000, 100000],
            images_per_seed: 3,
            captions_per_image: 10,
        }
    }
}

impl ParaphraseDefaults {
    pub fn n_t2i(&self) -> usize {
        self.seeds.len() * self.images_per_seed
    }

    pub fn n_i2t(&self) -> usize {
        self.n_t2i() * self.captions_per_image
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t2t == 0 || self.seeds.is_empty() || self.images_per_seed == 0 || self.captions_per_image == 0 {
            return Err(Error::InvalidArgument(
                "paraphrase counts and seed list must all be positive".into(),
            ));
        }
        let unique: HashSet<_> = self.seeds.iter().collect();
        if unique.len() != self.seeds.len() {
            return Err(Error::InvalidArgument("seeds must be distinct".into()));
        }
        Ok(())
    }
}

/// A user query with all of its paraphrases and the QA pairs used to verify them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseBundle {
    pub query: UserQuery,
    pub t2t: Vec<ParaphrasedQuery>,
    pub t2i: Vec<ParaphrasedQuery>,
    pub i2t: Vec<ParaphrasedQuery>,
    pub qa: Vec<QaPair>,
    pub counts: Counts,
}

fn count_mismatch(what: &str, got: usize, want: usize) -> Error {
    Error::Protocol {
        endpoint: what.to_string(),
        reason: format!("provider returned {got} results, expected {want}"),
    }
}

pub fn expand_t2t(provider: &dyn Provider, query: &UserQuery, n_t2t: usize) -> Result<Vec<ParaphrasedQuery>> {
    if n_t2t == 0 {
        return Err(Error::InvalidArgument("n_t2t must be at least 1".into()));
    }
    let texts = provider.t2t(&query.text, n_t2t)?;
    if texts.len() != n_t2t {
        return Err(count_mismatch("t2t", texts.len(), n_t2t));
    }
    Ok(texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| ParaphrasedQuery::rewrite(i, t))
        .collect())
}

/// Images are ordered by seed position, then by index within the seed.
pub fn expand_t2i(
    provider: &dyn Provider,
    query: &UserQuery,
    seeds: &[u64],
    images_per_seed: usize,
) -> Result<Vec<ParaphrasedQuery>> {
    if seeds.is_empty() || images_per_seed == 0 {
        return Err(Error::InvalidArgument(
            "t2i needs at least one seed and one image per seed".into(),
        ));
    }
    let mut out = Vec::with_capacity(seeds.len() * images_per_seed);
    for &seed in seeds {
        let images = provider.t2i(&query.text, seed, images_per_seed)?;
        if images.len() != images_per_seed {
            return Err(count_mismatch("t2i", images.len(), images_per_seed));
        }
        for image in images {
            out.push(ParaphrasedQuery::generated(out.len(), image));
        }
    }
    Ok(out)
}

pub fn expand_i2t(
    provider: &dyn Provider,
    t2i: &[ParaphrasedQuery],
    captions_per_image: usize,
) -> Result<Vec<ParaphrasedQuery>> {
    if t2i.is_empty() {
        return Err(Error::InvalidArgument("i2t needs at least one image".into()));
    }
    if captions_per_image == 0 {
        return Err(Error::InvalidArgument("captions_per_image must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(t2i.len() * captions_per_image);
    for entry in t2i {
        let image = match (entry.kind, &entry.image) {
            (ParaphraseKind::T2i, Some(image)) => image,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "i2t input {} is not a generated image",
                    entry.ordinal
                )))
            }
        };
        let captions = provider.i2t(image, captions_per_image)?;
        if captions.len() != captions_per_image {
            return Err(count_mismatch("i2t", captions.len(), captions_per_image));
        }
        for caption in captions {
            out.push(ParaphrasedQuery::caption(out.len(), caption, image.id.clone()));
        }
    }
    Ok(out)
}

/// Runs all three expansions and QA generation for one query.
pub fn build_bundle(
    provider: &dyn Provider,
    query: &UserQuery,
    defaults: &ParaphraseDefaults,
) -> Result<ParaphraseBundle> {
    defaults.validate()?;
    let t2t = expand_t2t(provider, query, defaults.n_t2t)?;
    let t2i = expand_t2i(provider, query, &defaults.seeds, defaults.images_per_seed)?;
    let i2t = expand_i2t(provider, &t2i, defaults.captions_per_image)?;
    let qa = crate::verification::generate_qa(provider, query)?;
    let bundle = ParaphraseBundle {
        query: query.clone(),
        counts: Counts {
            n_t2t: t2t.len(),
            n_t2i: t2i.len(),
            n_i2t: i2t.len(),
        },
        t2t,
        t2i,
        i2t,
        qa,
    };
    bundle.check().map_err(|reason| Error::Bundle {
        source_name: query.qid.clone(),
        reason,
    })?;
    Ok(bundle)
}

impl ParaphraseBundle {
    pub fn entries(&self, kind: ParaphraseKind) -> &[ParaphrasedQuery] {
        match kind {
            ParaphraseKind::T2t => &self.t2t,
            ParaphraseKind::T2i => &self.t2i,
            ParaphraseKind::I2t => &self.i2t,
        }
    }

    pub fn entries_mut(&mut self, kind: ParaphraseKind) -> &mut Vec<ParaphrasedQuery> {
        match kind {
            ParaphraseKind::T2t => &mut self.t2t,
            ParaphraseKind::T2i => &mut self.t2i,
            ParaphraseKind::I2t => &mut self.i2t,
        }
    }

    /// Entries that passed verification, or every entry when `ignore_flags`.
    pub fn selected(&self, kind: ParaphraseKind, ignore_flags: bool) -> Vec<&ParaphrasedQuery> {
        self.entries(kind)
            .iter()
            .filter(|p| ignore_flags || p.is_valid())
            .collect()
    }

    pub fn is_verified(&self) -> bool {
        ParaphraseKind::ALL
            .iter()
            .all(|&k| self.entries(k).iter().all(|p| p.valid.is_some()))
    }

    pub fn file_name(qid: &str) -> String {
        format!("{qid}.bundle")
    }

    /// Structural invariants: kinds, payload shape, ordinals, lineage.
    pub fn check(&self) -> std::result::Result<(), String> {
        self.query.check()?;
        let sizes = [
            (ParaphraseKind::T2t, self.counts.n_t2t),
            (ParaphraseKind::T2i, self.counts.n_t2i),
            (ParaphraseKind::I2t, self.counts.n_i2t),
        ];
        for (kind, declared) in sizes {
            let entries = self.entries(kind);
            if entries.len() != declared {
                return Err(format!("{kind}: {} entries, counts say {declared}", entries.len()));
            }
            for (i, p) in entries.iter().enumerate() {
                if p.kind != kind || p.ordinal != i {
                    return Err(format!("{kind} entry {i} has kind {} ordinal {}", p.kind, p.ordinal));
                }
                let shape_ok = match kind {
                    ParaphraseKind::T2i => p.text.is_none() && p.image.is_some() && p.parent_image.is_none(),
                    ParaphraseKind::T2t => p.text.is_some() && p.image.is_none() && p.parent_image.is_none(),
                    ParaphraseKind::I2t => p.text.is_some() && p.image.is_none() && p.parent_image.is_some(),
                };
                if !shape_ok {
                    return Err(format!("{kind} entry {i} has the wrong payload fields"));
                }
            }
        }
        let mut image_ids: HashMap<&str, usize> = HashMap::new();
        for p in &self.t2i {
            let img = p.image.as_ref().expect("checked above");
            *image_ids.entry(img.id.as_str()).or_default() += 1;
        }
        for p in &self.i2t {
            let parent = p.parent_image.as_deref().expect("checked above");
            if image_ids.get(parent) != Some(&1) {
                return Err(format!(
                    "i2t entry {} parent {parent} does not resolve to exactly one image",
                    p.ordinal
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle always serializes");
        s.push('\n');
        s
    }

    /// Parses and checks bundle text. Image bytes are not loaded.
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        let bundle: ParaphraseBundle = serde_json::from_str(text).map_err(|e| Error::Bundle {
            source_name: source_name.to_string(),
            reason: e.to_string(),
        })?;
        bundle.check().map_err(|reason| Error::Bundle {
            source_name: source_name.to_string(),
            reason,
        })?;
        Ok(bundle)
    }

    /// Loads image bytes for every T2I entry from `artifact_dir/{id}`.
    pub fn attach_artifacts(&mut self, artifact_dir: &Path) -> Result<()> {
        for p in &mut self.t2i {
            let img = p.image.as_mut().expect("checked bundle");
            let path = artifact_dir.join(&img.id);
            img.bytes = read_bytes(&path)?;
            if !img.content_matches() {
                return Err(Error::Bundle {
                    source_name: self.query.qid.clone(),
                    reason: format!("artifact {} does not match its content hash", path.display()),
                });
            }
        }
        Ok(())
    }

    /// Writes `{dir}/{qid}.bundle` and any missing image artifacts.
    pub fn save(&self, dir: &Path, artifact_dir: &Path) -> Result<PathBuf> {
        for p in &self.t2i {
            let img = p.image.as_ref().expect("checked bundle");
            let path = artifact_dir.join(&img.id);
            if !path.exists() {
                write_atomic(&path, &img.bytes)?;
            }
        }
        let path = dir.join(Self::file_name(&self.query.qid));
        write_atomic(&path, self.to_json().as_bytes())?;
        Ok(path)
    }

    pub fn load(path: &Path, artifact_dir: &Path) -> Result<Self> {
        let mut bundle = Self::from_json(&read_to_string(path)?, &path.display().to_string())?;
        bundle.attach_artifacts(artifact_dir)?;
        Ok(bundle)
    }
}
