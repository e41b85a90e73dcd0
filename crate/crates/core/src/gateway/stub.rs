//! Deterministic, model-free provider behaviour.
//!
//! Typed functions implement each endpoint; [`handle`] exposes the same
//! behaviour over the wire protocol and is what the conformance vectors are
//! generated from.

use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::wire::{self, ErrorBody, ErrorDetail};
use super::ImageArtifact;
use crate::verification::{AlignmentCount, Aspect, QaKind, QaPair};
use crate::{Error, Result};

/// Parameters of the stub service.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StubSettings {
    pub seed: u64,
    pub dim: usize,
    /// 0 disables concept vectors.
    pub concept_dim: usize,
}

const IMAGE_PREFIX: &str = "IMG|";
const CONCEPT_DOMAIN: &[u8] = b"concept\0";

pub fn paraphrases(query: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{query} ~v{i}")).collect()
}

pub fn image_bytes(query: &str, seed: u64, index: usize) -> Vec<u8> {
    format!("{IMAGE_PREFIX}{seed}|{index}|{query}").into_bytes()
}

pub fn images(query: &str, seed: u64, n_images: usize) -> Vec<ImageArtifact> {
    (1..=n_images)
        .map(|i| ImageArtifact::new(image_bytes(query, seed, i), query, seed))
        .collect()
}

/// Recovers the prompt from bytes produced by [`image_bytes`].
pub fn prompt_from_image_bytes(bytes: &[u8]) -> Option<String> {
    let text = std::str::from_utf8(bytes).ok()?;
    let rest = text.strip_prefix(IMAGE_PREFIX)?;
    let mut parts = rest.splitn(3, '|');
    parts.next()?.parse::<u64>().ok()?;
    parts.next()?.parse::<usize>().ok()?;
    parts.next().map(str::to_string)
}

pub fn captions(source_prompt: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("caption {i} of {source_prompt}")).collect()
}

pub fn qa_pairs(query: &str) -> Vec<QaPair> {
    query
        .split_whitespace()
        .map(|w| QaPair {
            question: format!("Is there {w}?"),
            answer: "yes".to_string(),
            kind: QaKind::YesNo,
            aspect: Aspect::Object,
        })
        .collect()
}

/// A pair is aligned when its answer occurs in the candidate text, ignoring case.
pub fn align(candidate_text: &str, pairs: &[QaPair]) -> AlignmentCount {
    let haystack = candidate_text.to_lowercase();
    AlignmentCount::from_flags(
        pairs
            .iter()
            .map(|p| haystack.contains(&p.answer.to_lowercase()))
            .collect(),
    )
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn stream(key: u64, seed: u64) -> impl FnMut() -> f64 {
    let mut seed_state = seed;
    let mut state = key ^ splitmix64(&mut seed_state);
    move || (splitmix64(&mut state) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unit-norm pseudo-embedding derived from `key_bytes` and the stub seed.
pub fn embed(key_bytes: &[u8], seed: u64, dim: usize) -> Vec<f32> {
    let mut next = stream(hash64(&[key_bytes]), seed);
    let raw: Vec<f64> = (0..dim).map(|_| 2.0 * next() - 1.0).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.iter().map(|v| (v / norm) as f32).collect()
}

/// Non-negative pseudo-concept scores in [0, 1).
pub fn concepts(key_bytes: &[u8], seed: u64, dim: usize) -> Vec<f32> {
    let mut next = stream(hash64(&[CONCEPT_DOMAIN, key_bytes]), seed);
    (0..dim).map(|_| next() as f32).collect()
}

pub fn encode_text(texts: &[String], settings: &StubSettings) -> wire::EncodeTextResponse {
    let embeddings = texts
        .iter()
        .map(|t| embed(t.as_bytes(), settings.seed, settings.dim))
        .collect();
    let (concepts, concept_dim) = if settings.concept_dim > 0 {
        let vectors = texts
            .iter()
            .map(|t| concepts(t.as_bytes(), settings.seed, settings.concept_dim))
            .collect();
        (Some(vectors), Some(settings.concept_dim))
    } else {
        (None, None)
    };
    wire::EncodeTextResponse {
        dim: settings.dim,
        embeddings,
        concepts,
        concept_dim,
    }
}

pub fn encode_images<'a>(
    images: impl IntoIterator<Item = &'a [u8]>,
    settings: &StubSettings,
) -> wire::EncodeImageResponse {
    wire::EncodeImageResponse {
        dim: settings.dim,
        embeddings: images
            .into_iter()
            .map(|b| embed(b, settings.seed, settings.dim))
            .collect(),
    }
}

#[derive(Deserialize)]
struct QueryN {
    query: String,
    n: usize,
}

#[derive(Deserialize)]
struct QueryOnly {
    query: String,
}

#[derive(Deserialize)]
struct T2iRequest {
    query: String,
    seed: u64,
    n_images: usize,
}

#[derive(Deserialize)]
struct I2tRequest {
    image_b64: String,
    n: usize,
}

#[derive(Deserialize)]
struct WireCandidate {
    kind: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    image_b64: Option<String>,
}

#[derive(Deserialize)]
struct VerifyRequest {
    candidate: WireCandidate,
    pairs: Vec<QaPair>,
}

#[derive(Deserialize)]
struct TextsRequest {
    texts: Vec<String>,
}

#[derive(Deserialize)]
struct ImagesRequest {
    images_b64: Vec<String>,
}

fn bad(endpoint: &str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument(format!("{endpoint}: {}", reason.into()))
}

fn req<T: for<'de> Deserialize<'de>>(endpoint: &str, body: &Value) -> Result<T> {
    T::deserialize(body).map_err(|e| bad(endpoint, format!("bad request: {e}")))
}

fn need_text(endpoint: &str, text: &str) -> Result<()> {
    if text.trim().is_empty() {
        return Err(bad(endpoint, "query must be non-empty"));
    }
    Ok(())
}

fn need_positive(endpoint: &str, what: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(bad(endpoint, format!("{what} must be at least 1")));
    }
    Ok(())
}

fn stub_prompt(endpoint: &str, b64: &str) -> Result<String> {
    let bytes = wire::decode_b64(endpoint, b64).map_err(|e| bad(endpoint, e.to_string()))?;
    if bytes.is_empty() {
        return Err(bad(endpoint, "empty image"));
    }
    prompt_from_image_bytes(&bytes).ok_or_else(|| bad(endpoint, "not a stub-generated image"))
}

/// Serves one request body the way a stub-mode provider service would.
pub fn handle(endpoint: &str, body: &Value, settings: &StubSettings) -> Result<Value> {
    let out = match endpoint {
        wire::T2T => {
            let r: QueryN = req(endpoint, body)?;
            need_text(endpoint, &r.query)?;
            need_positive(endpoint, "n", r.n)?;
            serde_json::to_value(wire::T2tResponse {
                paraphrases: paraphrases(&r.query, r.n),
            })
        }
        wire::T2I => {
            let r: T2iRequest = req(endpoint, body)?;
            need_text(endpoint, &r.query)?;
            need_positive(endpoint, "n_images", r.n_images)?;
            let images = images(&r.query, r.seed, r.n_images)
                .into_iter()
                .map(|a| wire::WireImage {
                    b64: wire::encode_b64(&a.bytes),
                    id: a.id,
                })
                .collect();
            serde_json::to_value(wire::T2iResponse { images })
        }
        wire::I2T => {
            let r: I2tRequest = req(endpoint, body)?;
            need_positive(endpoint, "n", r.n)?;
            let prompt = stub_prompt(endpoint, &r.image_b64)?;
            serde_json::to_value(wire::I2tResponse {
                captions: captions(&prompt, r.n),
            })
        }
        wire::QA_GENERATE => {
            let r: QueryOnly = req(endpoint, body)?;
            need_text(endpoint, &r.query)?;
            serde_json::to_value(wire::QaGenerateResponse {
                pairs: qa_pairs(&r.query),
            })
        }
        wire::QA_VERIFY => {
            let r: VerifyRequest = req(endpoint, body)?;
            if r.pairs.is_empty() {
                return Err(bad(endpoint, "pairs must be non-empty"));
            }
            let text = match (r.candidate.kind.as_str(), r.candidate.text, r.candidate.image_b64) {
                ("text", Some(text), None) => text,
                ("image", None, Some(b64)) => stub_prompt(endpoint, &b64)?,
                (kind, _, _) => return Err(bad(endpoint, format!("malformed {kind} candidate"))),
            };
            let count = align(&text, &r.pairs);
            serde_json::to_value(wire::QaVerifyResponse {
                count: count.count,
                aligned: count.per_pair,
            })
        }
        wire::ENCODE_TEXT => {
            let r: TextsRequest = req(endpoint, body)?;
            need_positive(endpoint, "texts", r.texts.len())?;
            serde_json::to_value(encode_text(&r.texts, settings))
        }
        wire::ENCODE_IMAGE => {
            let r: ImagesRequest = req(endpoint, body)?;
            need_positive(endpoint, "images_b64", r.images_b64.len())?;
            let decoded = r
                .images_b64
                .iter()
                .map(|b| wire::decode_b64(endpoint, b).map_err(|e| bad(endpoint, e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            if decoded.iter().any(Vec::is_empty) {
                return Err(bad(endpoint, "empty image"));
            }
            serde_json::to_value(encode_images(decoded.iter().map(Vec::as_slice), settings))
        }
        other => return Err(bad(other, "unknown endpoint")),
    };
    Ok(out.expect("wire types always serialize"))
}

/// HTTP-shaped wrapper around [`handle`]: returns a status code and a
/// canonical body, with the error envelope for rejected requests.
pub fn handle_http(endpoint: &str, body: &str, settings: &StubSettings) -> (u16, String) {
    let result = serde_json::from_str::<Value>(body)
        .map_err(|e| bad(endpoint, format!("body is not JSON: {e}")))
        .and_then(|v| handle(endpoint, &v, settings));
    match result {
        Ok(v) => (200, v.to_string()),
        Err(e) => {
            let (status, code) = if wire::ENDPOINTS.contains(&endpoint) {
                (400, "bad_request")
            } else {
                (404, "not_found")
            };
            let body = ErrorBody {
                error: ErrorDetail {
                    code: code.to_string(),
                    message: e.to_string(),
                },
            };
            (status, wire::canonical(&body))
        }
    }
}
