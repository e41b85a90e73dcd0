//! Exact cosine search over precomputed per-video vectors.
//!
//! Store file layout (little-endian): a 32-byte header
//! `"EMBS" | version u32 = 1 | dim u32 | count u64 | dtype u8 = 0 | 11 zero bytes`
//! followed by `count * dim` f32 values, row-major. A sidecar text file holds
//! one video id per line, in row order.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::minmax_normalize;
use crate::fsutil::{read_bytes, read_to_string, sha256_hex, write_atomic};
use crate::paraphrase::ParaphraseKind;
use crate::{Error, Result};

pub const STORE_MAGIC: [u8; 4] = *b"EMBS";
pub const STORE_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;
const DTYPE_F32: u8 = 0;

/// Row count above which scoring fans out over the rayon pool.
const PARALLEL_ROWS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreKind {
    Embedding,
    Concept,
}

#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    kind: StoreKind,
    dim: usize,
    data: Vec<f32>,
    norms: Vec<f64>,
    ids: Vec<String>,
    positions: HashMap<String, usize>,
}

fn row_norm(row: &[f32]) -> f64 {
    row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
}

fn check_ids(ids: &[String], source_name: &str) -> Result<HashMap<String, usize>> {
    let mut positions = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        let line = i + 1;
        if id.is_empty() {
            return Err(Error::ingest(source_name, format!("line {line}: empty id")));
        }
        if id.chars().any(char::is_whitespace) {
            return Err(Error::ingest(source_name, format!("line {line}: id {id:?} contains whitespace")));
        }
        if let Some(first) = positions.insert(id.clone(), i) {
            return Err(Error::ingest(
                source_name,
                format!("line {line}: duplicate id {id} (first at line {})", first + 1),
            ));
        }
    }
    Ok(positions)
}

impl EmbeddingStore {
    /// Builds a store from row-major `data`, validating every invariant.
    pub fn from_rows(kind: StoreKind, dim: usize, data: Vec<f32>, ids: Vec<String>) -> Result<Self> {
        const SRC: &str = "<memory>";
        if dim == 0 {
            return Err(Error::ingest(SRC, "dim is 0"));
        }
        if data.len() != dim * ids.len() {
            return Err(Error::ingest(
                SRC,
                format!("{} values for {} ids of dim {dim}", data.len(), ids.len()),
            ));
        }
        Self::validated(kind, dim, data, ids, SRC)
    }

    fn validated(kind: StoreKind, dim: usize, data: Vec<f32>, ids: Vec<String>, source_name: &str) -> Result<Self> {
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::ingest(
                source_name,
                format!(
                    "offset {}: non-finite value at row {} col {}",
                    HEADER_LEN + 4 * pos,
                    pos / dim,
                    pos % dim
                ),
            ));
        }
        let norms: Vec<f64> = data.chunks_exact(dim).map(row_norm).collect();
        if kind == StoreKind::Embedding {
            if let Some(r) = norms.iter().position(|&n| n == 0.0) {
                return Err(Error::ingest(
                    source_name,
                    format!("offset {}: row {r} is all zeros", HEADER_LEN + 4 * r * dim),
                ));
            }
        }
        let positions = check_ids(&ids, source_name)?;
        Ok(EmbeddingStore {
            kind,
            dim,
            data,
            norms,
            ids,
            positions,
        })
    }

    /// Decodes a store from the binary vector payload and the ids text.
    pub fn decode(vector_bytes: &[u8], ids_text: &str, kind: StoreKind, source_name: &str) -> Result<Self> {
        let err = |reason: String| Error::ingest(source_name, reason);
        if vector_bytes.len() < HEADER_LEN {
            return Err(err(format!(
                "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
                vector_bytes.len()
            )));
        }
        let (header, payload) = vector_bytes.split_at(HEADER_LEN);
        if header[..4] != STORE_MAGIC {
            return Err(err("offset 0: bad magic".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != STORE_VERSION {
            return Err(err(format!("offset 4: unsupported version {version}")));
        }
        let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        if dim == 0 {
            return Err(err("offset 8: dim is 0".into()));
        }
        let count = u64::from_le_bytes(header[12..20].try_into().unwrap());
        if header[20] != DTYPE_F32 {
            return Err(err(format!("offset 20: unsupported dtype {}", header[20])));
        }
        if let Some(i) = header[21..].iter().position(|&b| b != 0) {
            return Err(err(format!("offset {}: reserved byte is not zero", 21 + i)));
        }
        let expected = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(dim))
            .and_then(|v| v.checked_mul(4));
        if expected != Some(payload.len()) {
            return Err(err(format!(
                "offset {HEADER_LEN}: payload is {} bytes, header implies {count} rows of dim {dim}",
                payload.len()
            )));
        }
        let count = count as usize;

        if ids_text.starts_with('\u{feff}') {
            return Err(err("ids line 1: byte-order mark".into()));
        }
        let ids: Vec<String> = ids_text.lines().map(str::to_string).collect();
        if ids.len() != count {
            return Err(err(format!("ids file has {} lines, header count is {count}", ids.len())));
        }

        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::validated(kind, dim, data, ids, source_name)
    }

    pub fn ingest(vector_file: &Path, ids_file: &Path, kind: StoreKind) -> Result<Self> {
        let bytes = read_bytes(vector_file)?;
        let ids = read_to_string(ids_file)?;
        Self::decode(&bytes, &ids, kind, &vector_file.display().to_string())
    }

    pub fn encode_vectors(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&STORE_MAGIC);
        out.extend_from_slice(&STORE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.push(DTYPE_F32);
        out.extend_from_slice(&[0u8; 11]);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn ids_text(&self) -> String {
        let mut s = String::new();
        for id in &self.ids {
            s.push_str(id);
            s.push('\n');
        }
        s
    }

    pub fn write(&self, vector_file: &Path, ids_file: &Path) -> Result<()> {
        write_atomic(vector_file, &self.encode_vectors())?;
        write_atomic(ids_file, self.ids_text().as_bytes())
    }

    /// Random store for benchmarks and tests: embedding rows uniform in
    /// [-1, 1), concept rows uniform in [0, 1). Ids are `v000000`, `v000001`, ...
    pub fn synthetic(kind: StoreKind, count: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..count * dim)
            .map(|_| match kind {
                StoreKind::Embedding => rng.random_range(-1.0f32..1.0),
                StoreKind::Concept => rng.random::<f32>(),
            })
            .collect();
        let ids = (0..count).map(|i| format!("v{i:06}")).collect();
        Self::from_rows(kind, dim, data, ids)
    }

    pub fn kind(&self) -> StoreKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    /// Hex SHA-256 of the id list; stores with equal fingerprints are row-aligned.
    pub fn fingerprint(&self) -> String {
        sha256_hex(self.ids_text().as_bytes())
    }
}

/// Which query produced a score list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreTag {
    User,
    T2t,
    T2i,
    I2t,
    Fused,
}

impl ScoreTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreTag::User => "user",
            ScoreTag::T2t => "t2t",
            ScoreTag::T2i => "t2i",
            ScoreTag::I2t => "i2t",
            ScoreTag::Fused => "fused",
        }
    }
}

impl From<ParaphraseKind> for ScoreTag {
    fn from(kind: ParaphraseKind) -> Self {
        match kind {
            ParaphraseKind::T2t => ScoreTag::T2t,
            ParaphraseKind::T2i => ScoreTag::T2i,
            ParaphraseKind::I2t => ScoreTag::I2t,
        }
    }
}

impl fmt::Display for ScoreTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dense scores for one query, aligned to store row order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub qid: String,
    pub tag: ScoreTag,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub fn new(qid: impl Into<String>, tag: ScoreTag, values: Vec<f64>) -> Self {
        ScoreVector {
            qid: qid.into(),
            tag,
            values,
        }
    }

    pub fn labeled(mut self, qid: impl Into<String>, tag: ScoreTag) -> Self {
        self.qid = qid.into();
        self.tag = tag;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub video_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Top of a ranking: scores non-increasing, ties by ascending id, ranks from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub qid: String,
    pub depth: usize,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.video_id.as_str()).collect()
    }
}

fn check_query(store: &EmbeddingStore, q: &[f32]) -> Result<f64> {
    if q.len() != store.dim {
        return Err(Error::InvalidArgument(format!(
            "query dim {} does not match store dim {}",
            q.len(),
            store.dim
        )));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("query vector is not finite".into()));
    }
    let norm = row_norm(q);
    if norm == 0.0 {
        return Err(Error::InvalidArgument("query vector is all zeros".into()));
    }
    Ok(norm)
}

fn cosine_kernel(store: &EmbeddingStore, q: &[f32], q_norm: f64) -> Vec<f64> {
    let score = |i: usize| {
        let rn = store.norms[i];
        if rn == 0.0 {
            return 0.0;
        }
        let dot: f64 = store
            .row(i)
            .iter()
            .zip(q)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum();
        dot / (q_norm * rn)
    };
    if store.len() >= PARALLEL_ROWS {
        (0..store.len()).into_par_iter().map(score).collect()
    } else {
        (0..store.len()).map(score).collect()
    }
}

/// Cosine similarity of `q` against every row, with f64 accumulation.
pub fn cosine_scores(store: &EmbeddingStore, q: &[f32]) -> Result<ScoreVector> {
    let q_norm = check_query(store, q)?;
    Ok(ScoreVector::new("", ScoreTag::User, cosine_kernel(store, q, q_norm)))
}

/// Cosine over concept vectors. Rows with no active concept score 0.
pub fn concept_scores(store: &EmbeddingStore, q_concepts: &[f32]) -> Result<ScoreVector> {
    if store.kind != StoreKind::Concept {
        return Err(Error::InvalidArgument("concept search needs a concept store".into()));
    }
    cosine_scores(store, q_concepts)
}

/// Blend of min-max normalized concept and embedding scores:
/// `theta * concept + (1 - theta) * embedding`. Without a concept store the
/// normalized embedding scores are returned and a warning is logged.
pub fn fusion_text_search(
    emb_store: &EmbeddingStore,
    con_store: Option<&EmbeddingStore>,
    q_emb: &[f32],
    q_con: Option<&[f32]>,
    theta: f64,
) -> Result<ScoreVector> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta {theta} is outside [0, 1]")));
    }
    let emb = minmax_normalize(&cosine_scores(emb_store, q_emb)?);
    let Some(con_store) = con_store else {
        log::debug!("no concept store; fusion search falls back to embedding scores");
        return Ok(emb);
    };
    let q_con = q_con.ok_or_else(|| {
        Error::InvalidArgument("concept store given but the query has no concept vector".into())
    })?;
    if con_store.ids != emb_store.ids {
        return Err(Error::InvalidArgument(
            "concept store rows are not aligned with the embedding store".into(),
        ));
    }
    let con = minmax_normalize(&concept_scores(con_store, q_con)?);
    let values = con
        .values
        .iter()
        .zip(&emb.values)
        .map(|(c, e)| theta * c + (1.0 - theta) * e)
        .collect();
    Ok(ScoreVector::new("", ScoreTag::User, values))
}

/// Image queries are scored by embedding cosine only.
pub fn image_search(emb_store: &EmbeddingStore, q_img_emb: &[f32]) -> Result<ScoreVector> {
    cosine_scores(emb_store, q_img_emb)
}

/// The `k` best rows of `sv`, equivalent to a full sort then truncation.
pub fn top_k(sv: &ScoreVector, store: &EmbeddingStore, k: usize) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if sv.len() != store.len() {
        return Err(Error::InvalidArgument(format!(
            "score vector has {} values for a store of {} rows",
            sv.len(),
            store.len()
        )));
    }
    if sv.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("score vector is not finite".into()));
    }
    let values = &sv.values;
    let ids = &store.ids;
    let order = |&a: &usize, &b: &usize| -> Ordering {
        values[b]
            .partial_cmp(&values[a])
            .expect("finite scores")
            .then_with(|| ids[a].cmp(&ids[b]))
    };
    let mut idx: Vec<usize> = (0..store.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, order);
        idx.truncate(k);
    }
    idx.sort_unstable_by(order);
    Ok(RankedList {
        qid: sv.qid.clone(),
        depth: k,
        entries: idx
            .into_iter()
            .enumerate()
            .map(|(r, i)| RankedEntry {
                video_id: ids[i].clone(),
                score: values[i],
                rank: r + 1,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store(rows: &[&[f32]]) -> EmbeddingStore {
        let dim = rows[0].len();
        let ids = (0..rows.len()).map(|i| format!("d{i}")).collect();
        EmbeddingStore::from_rows(StoreKind::Embedding, dim, rows.concat(), ids).unwrap()
    }

    fn header(dim: u32, count: u64) -> Vec<u8> {
        let mut h = Vec::new();
        h.extend_from_slice(b"EMBS");
        h.extend_from_slice(&1u32.to_le_bytes());
        h.extend_from_slice(&dim.to_le_bytes());
        h.extend_from_slice(&count.to_le_bytes());
        h.push(0);
        h.extend_from_slice(&[0; 11]);
        h
    }

    #[test]
    fn ingest_format_arithmetic() {
        let mut bytes = header(4, 2);
        for v in [1.0f32, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let s = EmbeddingStore::decode(&bytes, "a\nb\n", StoreKind::Embedding, "t").unwrap();
        assert_eq!((s.dim(), s.len()), (4, 2));
        assert_eq!(s.encode_vectors(), bytes);

        let short = &bytes[..bytes.len() - 1];
        let e = EmbeddingStore::decode(short, "a\nb\n", StoreKind::Embedding, "t").unwrap_err();
        assert!(e.to_string().contains("payload is 31 bytes"), "{e}");

        let e = EmbeddingStore::decode(&bytes, "a\na\n", StoreKind::Embedding, "t").unwrap_err();
        assert!(e.to_string().contains("line 2: duplicate id"), "{e}");
    }

    #[test]
    fn ingest_rejections() {
        let ok = |b: &[u8], ids: &str| EmbeddingStore::decode(b, ids, StoreKind::Embedding, "t");
        let mut bad_magic = header(1, 0);
        bad_magic[0] = b'X';
        assert!(ok(&bad_magic, "").unwrap_err().to_string().contains("bad magic"));
        let mut bad_version = header(1, 0);
        bad_version[4] = 2;
        assert!(ok(&bad_version, "").is_err());
        assert!(ok(&header(0, 0), "").unwrap_err().to_string().contains("dim is 0"));
        let mut reserved = header(1, 0);
        reserved[31] = 1;
        assert!(ok(&reserved, "").unwrap_err().to_string().contains("offset 31"));
        assert!(ok(&header(1, 0), "").unwrap().is_empty());
        assert!(ok(&header(1, 0), "x\n").is_err());

        let mut zero_row = header(2, 1);
        zero_row.extend_from_slice(&[0u8; 8]);
        assert!(ok(&zero_row, "x\n").unwrap_err().to_string().contains("all zeros"));
        assert!(EmbeddingStore::decode(&zero_row, "x\n", StoreKind::Concept, "t").is_ok());

        let mut nan = header(1, 1);
        nan.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(ok(&nan, "x\n").unwrap_err().to_string().contains("offset 32"));

        let mut one = header(1, 1);
        one.extend_from_slice(&1f32.to_le_bytes());
        assert!(ok(&one, "\u{feff}x\n").is_err());
        assert!(ok(&one, "a b\n").is_err());
        assert!(ok(&one, "\n").is_err());
    }

    #[test]
    fn cosine_closed_forms() {
        let s = store(&[&[1.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let sv = cosine_scores(&s, &[1.0, 1.0, 0.0]).unwrap();
        assert!((sv.values[0] - 1.0).abs() < 1e-9);
        assert!((sv.values[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        let sv = cosine_scores(&s, &[1.0, 0.0, 0.0]).unwrap();
        assert!(sv.values[2].abs() < 1e-12);
        assert!(cosine_scores(&s, &[0.0, 0.0, 0.0]).is_err());
        assert!(cosine_scores(&s, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn concept_scores_need_concept_store() {
        let s = store(&[&[1.0, 0.0]]);
        assert!(concept_scores(&s, &[1.0, 0.0]).is_err());
        let c = EmbeddingStore::from_rows(StoreKind::Concept, 2, vec![1.0, 1.0], vec!["d0".into()]).unwrap();
        assert!((concept_scores(&c, &[1.0, 1.0]).unwrap().values[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn image_search_matches_cosine() {
        let s = store(&[&[0.3, 0.1], &[0.2, 0.9], &[-1.0, 0.5]]);
        let q = [0.2f32, 0.9];
        assert_eq!(image_search(&s, &q).unwrap(), cosine_scores(&s, &q).unwrap());
        let ranked = top_k(&image_search(&s, &q).unwrap(), &s, 3).unwrap();
        assert_eq!(ranked.entries[0].video_id, "d1");
        assert!(image_search(&s, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn fusion_boundaries_and_hand_blend() {
        // Embedding rows / query chosen so cosines are easy: q_emb = e1.
        let emb = store(&[&[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let con = EmbeddingStore::from_rows(
            StoreKind::Concept,
            2,
            vec![0.0, 1.0, 1.0, 1.0, 1.0, 0.0],
            emb.ids().to_vec(),
        )
        .unwrap();
        // Embedding cosines for e1: [1, 1/sqrt2, 0]. Concept cosines for e1
        // against rows (0,1), (1,1), (1,0): [0, 1/sqrt2, 1]. Both are already
        // min-max normalized, so the 0.5 blend is [0.5, 1/sqrt2, 0.5].
        let qe = [1.0f32, 0.0];
        let qc = [0.0f32, 1.0];
        let qc2 = [1.0f32, 0.0];
        let e_norm = minmax_normalize(&cosine_scores(&emb, &qe).unwrap());
        let c_norm = minmax_normalize(&concept_scores(&con, &qc2).unwrap());
        let f0 = fusion_text_search(&emb, Some(&con), &qe, Some(&qc2), 0.0).unwrap();
        let f1 = fusion_text_search(&emb, Some(&con), &qe, Some(&qc2), 1.0).unwrap();
        assert_eq!(f0.values, e_norm.values);
        assert_eq!(f1.values, c_norm.values);
        let half = fusion_text_search(&emb, Some(&con), &qe, Some(&qc2), 0.5).unwrap();
        let expected = [0.5, std::f64::consts::FRAC_1_SQRT_2, 0.5];
        for (a, b) in half.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let same = fusion_text_search(&emb, Some(&con), &qe, Some(&qc), 0.5).unwrap();
        assert!((same.values[0] - 1.0).abs() < 1e-12);
        assert!(fusion_text_search(&emb, Some(&con), &qe, None, 0.5).is_err());
        assert!(fusion_text_search(&emb, None, &qe, None, 1.5).is_err());
        assert_eq!(fusion_text_search(&emb, None, &qe, None, 0.5).unwrap(), e_norm);
    }

    #[test]
    fn top_k_tie_break() {
        let s = EmbeddingStore::from_rows(
            StoreKind::Embedding,
            1,
            vec![1.0; 3],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let sv = ScoreVector::new("q", ScoreTag::User, vec![0.2, 0.9, 0.9]);
        let r = top_k(&sv, &s, 2).unwrap();
        let got: Vec<_> = r.entries.iter().map(|e| (e.video_id.as_str(), e.score, e.rank)).collect();
        assert_eq!(got, [("b", 0.9, 1), ("c", 0.9, 2)]);
        assert_eq!(top_k(&sv, &s, 10).unwrap().entries.len(), 3);
        assert!(top_k(&sv, &s, 0).is_err());
    }

    #[test]
    fn synthetic_store_is_seeded() {
        let a = EmbeddingStore::synthetic(StoreKind::Embedding, 10, 4, 1).unwrap();
        let b = EmbeddingStore::synthetic(StoreKind::Embedding, 10, 4, 1).unwrap();
        assert_eq!(a.encode_vectors(), b.encode_vectors());
        assert_eq!(a.ids()[9], "v000009");
    }

    proptest! {
        #[test]
        fn scale_invariance(q in prop::collection::vec(-1.0f32..1.0, 8), exp in -12i32..12) {
            prop_assume!(q.iter().any(|v| v.abs() > 1e-3));
            // Powers of two scale f32 exactly, so the scaled query is truly c*q.
            let c = 2f32.powi(exp);
            let s = EmbeddingStore::synthetic(StoreKind::Embedding, 200, 8, 3).unwrap();
            let scaled: Vec<f32> = q.iter().map(|v| v * c).collect();
            let a = cosine_scores(&s, &q).unwrap();
            let b = cosine_scores(&s, &scaled).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-9);
                prop_assert!(x.abs() <= 1.0 + 1e-9);
            }
            let (ra, rb) = (top_k(&a, &s, 200).unwrap(), top_k(&b, &s, 200).unwrap());
            prop_assert_eq!(ra.ids(), rb.ids());
        }

        #[test]
        fn store_round_trip(rows in 1usize..20, dim in 1usize..6, seed in any::<u64>()) {
            let s = EmbeddingStore::synthetic(StoreKind::Embedding, rows, dim, seed).unwrap();
            let bytes = s.encode_vectors();
            let back = EmbeddingStore::decode(&bytes, &s.ids_text(), StoreKind::Embedding, "p").unwrap();
            prop_assert_eq!(back.encode_vectors(), bytes);
            prop_assert_eq!(back.ids_text(), s.ids_text());
        }
    }
}
