//! JSON request/response bodies for the provider endpoints.
//!
//! Requests are canonicalized (sorted keys, no whitespace) before they are
//! sent or hashed. Every `decode_*` function validates the body against the
//! endpoint contract and reports violations as [`Error::Protocol`].

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Candidate, ConceptEncoding, ImageArtifact, ImageEncoding, TextEncoding};
use crate::verification::{AlignmentCount, QaPair};
use crate::{Error, Result};

pub const T2T: &str = "/v1/t2t";
pub const T2I: &str = "/v1/t2i";
pub const I2T: &str = "/v1/i2t";
pub const QA_GENERATE: &str = "/v1/qa/generate";
pub const QA_VERIFY: &str = "/v1/qa/verify";
pub const ENCODE_TEXT: &str = "/v1/encode/text";
pub const ENCODE_IMAGE: &str = "/v1/encode/image";

pub const ENDPOINTS: [&str; 7] = [
    T2T,
    T2I,
    I2T,
    QA_GENERATE,
    QA_VERIFY,
    ENCODE_TEXT,
    ENCODE_IMAGE,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2tResponse {
    pub paraphrases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireImage {
    pub id: String,
    pub b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2iResponse {
    pub images: Vec<WireImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct I2tResponse {
    pub captions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaGenerateResponse {
    pub pairs: Vec<QaPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaVerifyResponse {
    pub aligned: Vec<bool>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeTextResponse {
    pub dim: usize,
    pub embeddings: Vec<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concepts: Option<Vec<Vec<f32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeImageResponse {
    pub dim: usize,
    pub embeddings: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

/// Canonical text form: sorted object keys, no insignificant whitespace.
pub fn canonical<T: Serialize>(value: &T) -> String {
    // Value maps are BTreeMaps, so going through Value sorts every level.
    serde_json::to_value(value)
        .expect("wire types always serialize")
        .to_string()
}

pub fn encode_b64(bytes: &[u8]) -> String {
    B64.encode(bytes)
}

pub fn decode_b64(endpoint: &str, text: &str) -> Result<Vec<u8>> {
    B64.decode(text)
        .map_err(|e| Error::protocol(endpoint, format!("invalid base64: {e}")))
}

pub fn t2t_request(query: &str, n: usize) -> Value {
    json!({ "query": query, "n": n })
}

pub fn t2i_request(query: &str, seed: u64, n_images: usize) -> Value {
    json!({ "query": query, "seed": seed, "n_images": n_images })
}

pub fn i2t_request(image: &ImageArtifact, n: usize) -> Value {
    json!({ "image_b64": encode_b64(&image.bytes), "n": n })
}

pub fn qa_generate_request(query: &str) -> Value {
    json!({ "query": query })
}

pub fn qa_verify_request(candidate: Candidate<'_>, pairs: &[QaPair]) -> Value {
    let candidate = match candidate {
        Candidate::Text(text) => json!({ "kind": "text", "text": text }),
        Candidate::Image(image) => {
            json!({ "kind": "image", "image_b64": encode_b64(&image.bytes) })
        }
    };
    json!({ "candidate": candidate, "pairs": pairs })
}

pub fn encode_text_request(texts: &[String]) -> Value {
    json!({ "texts": texts })
}

pub fn encode_image_request(images: &[ImageArtifact]) -> Value {
    let encoded: Vec<String> = images.iter().map(|i| encode_b64(&i.bytes)).collect();
    json!({ "images_b64": encoded })
}

fn parse<T: for<'de> Deserialize<'de>>(endpoint: &str, body: &str) -> Result<T> {
    serde_json::from_str(body).map_err(|e| Error::protocol(endpoint, format!("malformed body: {e}")))
}

fn expect_len(endpoint: &str, what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::protocol(
            endpoint,
            format!("expected {want} {what}, got {got}"),
        ));
    }
    Ok(())
}

pub fn decode_t2t(body: &str, n: usize) -> Result<Vec<String>> {
    let resp: T2tResponse = parse(T2T, body)?;
    expect_len(T2T, "paraphrases", resp.paraphrases.len(), n)?;
    Ok(resp.paraphrases)
}

pub fn decode_t2i(body: &str, query: &str, seed: u64, n_images: usize) -> Result<Vec<ImageArtifact>> {
    let resp: T2iResponse = parse(T2I, body)?;
    expect_len(T2I, "images", resp.images.len(), n_images)?;
    resp.images
        .into_iter()
        .map(|img| {
            let bytes = decode_b64(T2I, &img.b64)?;
            if bytes.is_empty() {
                return Err(Error::protocol(T2I, "empty image payload"));
            }
            let artifact = ImageArtifact::new(bytes, query, seed);
            if !artifact.id.eq_ignore_ascii_case(&img.id) {
                return Err(Error::protocol(
                    T2I,
                    format!("image id {} does not match content hash {}", img.id, artifact.id),
                ));
            }
            Ok(artifact)
        })
        .collect()
}

pub fn decode_i2t(body: &str, n: usize) -> Result<Vec<String>> {
    let resp: I2tResponse = parse(I2T, body)?;
    expect_len(I2T, "captions", resp.captions.len(), n)?;
    Ok(resp.captions)
}

pub fn decode_qa_generate(body: &str) -> Result<Vec<QaPair>> {
    let resp: QaGenerateResponse = parse(QA_GENERATE, body)?;
    if resp.pairs.is_empty() {
        return Err(Error::protocol(QA_GENERATE, "empty pair list"));
    }
    for (i, pair) in resp.pairs.iter().enumerate() {
        if pair.question.trim().is_empty() || pair.answer.trim().is_empty() {
            return Err(Error::protocol(
                QA_GENERATE,
                format!("pair {i} has an empty question or answer"),
            ));
        }
    }
    Ok(resp.pairs)
}

pub fn decode_qa_verify(body: &str, n_pairs: usize) -> Result<AlignmentCount> {
    let resp: QaVerifyResponse = parse(QA_VERIFY, body)?;
    expect_len(QA_VERIFY, "alignment flags", resp.aligned.len(), n_pairs)?;
    AlignmentCount::checked(resp.aligned, resp.count)
        .map_err(|reason| Error::protocol(QA_VERIFY, reason))
}

fn check_matrix(endpoint: &str, what: &str, rows: &[Vec<f32>], n: usize, dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::protocol(endpoint, format!("{what} dimension is 0")));
    }
    expect_len(endpoint, what, rows.len(), n)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::protocol(
                endpoint,
                format!("{what} row {i} has length {}, declared dim {dim}", row.len()),
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::protocol(endpoint, format!("{what} row {i} is not finite")));
        }
    }
    Ok(())
}

pub fn decode_encode_text(body: &str, n_texts: usize) -> Result<TextEncoding> {
    let resp: EncodeTextResponse = parse(ENCODE_TEXT, body)?;
    check_matrix(ENCODE_TEXT, "embeddings", &resp.embeddings, n_texts, resp.dim)?;
    let concepts = match (resp.concepts, resp.concept_dim) {
        (None, None) => None,
        (Some(vectors), Some(dim)) => {
            check_matrix(ENCODE_TEXT, "concepts", &vectors, n_texts, dim)?;
            Some(ConceptEncoding { dim, vectors })
        }
        _ => {
            return Err(Error::protocol(
                ENCODE_TEXT,
                "concepts and concept_dim must be given together",
            ))
        }
    };
    Ok(TextEncoding {
        dim: resp.dim,
        embeddings: resp.embeddings,
        concepts,
    })
}

pub fn decode_encode_image(body: &str, n_images: usize) -> Result<ImageEncoding> {
    let resp: EncodeImageResponse = parse(ENCODE_IMAGE, body)?;
    check_matrix(ENCODE_IMAGE, "embeddings", &resp.embeddings, n_images, resp.dim)?;
    Ok(ImageEncoding {
        dim: resp.dim,
        embeddings: resp.embeddings,
    })
}

pub fn decode_error_body(body: &str) -> Option<ErrorDetail> {
    serde_json::from_str::<ErrorBody>(body).ok().map(|b| b.error)
}
