//! Clients for the external generation and encoding services.
//!
//! [`Gateway`] talks to a provider service over the JSON protocol in [`wire`]
//! (remote mode) or answers every call locally with the deterministic rules in
//! [`stub`] (stub mode, no network). Remote responses are validated and then
//! cached by request digest, so a pipeline can be replayed offline.

pub mod cache;
pub mod conformance;
pub mod stub;
pub mod wire;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::fsutil::sha256_hex;
use crate::verification::{AlignmentCount, QaPair};
use crate::{Error, Result};

pub use cache::{CacheKey, ResponseCache};
pub use stub::StubSettings;

/// Environment variable that overrides [`ProviderConfig::cache_dir`].
pub const CACHE_DIR_ENV: &str = "PARAVID_CACHE_DIR";

const BACKOFF_START: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Remote,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub mode: ProviderMode,
    pub stub_seed: u64,
    pub cache_dir: PathBuf,
    /// Embedding width produced in stub mode.
    pub stub_dim: usize,
    /// Concept width produced in stub mode; 0 means no concept vectors.
    pub stub_concept_dim: usize,
    /// Sent as `Authorization: Bearer ...` when set. Never serialized.
    #[serde(skip_serializing)]
    pub bearer_token: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            base_url: "http://127.0.0.1:8707".to_string(),
            timeout_ms: 60_000,
            max_retries: 3,
            mode: ProviderMode::Stub,
            stub_seed: 0,
            cache_dir: PathBuf::from(".paravid-cache"),
            stub_dim: 64,
            stub_concept_dim: 0,
            bearer_token: None,
        }
    }
}

impl ProviderConfig {
    pub fn stub(seed: u64) -> Self {
        ProviderConfig {
            stub_seed: seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_ms == 0 {
            return Err(Error::InvalidArgument("timeout_ms must be positive".into()));
        }
        if self.max_retries > 10 {
            return Err(Error::InvalidArgument(format!(
                "max_retries must be at most 10, got {}",
                self.max_retries
            )));
        }
        if self.stub_dim == 0 {
            return Err(Error::InvalidArgument("stub_dim must be positive".into()));
        }
        Ok(())
    }

    /// Applies [`CACHE_DIR_ENV`] if it is set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|d| !d.is_empty()) {
            self.cache_dir = PathBuf::from(dir);
        }
        self
    }

    /// Directory holding raw image bytes, one file per content id.
    pub fn artifact_dir(&self) -> PathBuf {
        self.cache_dir.join("artifacts")
    }

    pub fn stub_settings(&self) -> StubSettings {
        StubSettings {
            seed: self.stub_seed,
            dim: self.stub_dim,
            concept_dim: self.stub_concept_dim,
        }
    }
}

/// A generated image. The engine never looks inside `bytes`; they are only
/// forwarded to captioning, verification and encoding calls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageArtifact {
    /// Hex SHA-256 of `bytes`.
    pub id: String,
    #[serde(skip)]
    pub bytes: Vec<u8>,
    pub source_prompt: String,
    pub seed: u64,
}

impl ImageArtifact {
    pub fn new(bytes: Vec<u8>, source_prompt: &str, seed: u64) -> Self {
        ImageArtifact {
            id: sha256_hex(&bytes),
            bytes,
            source_prompt: source_prompt.to_string(),
            seed,
        }
    }

    pub fn content_matches(&self) -> bool {
        sha256_hex(&self.bytes) == self.id
    }
}

/// What a QA verification call checks: a text paraphrase or an image.
#[derive(Debug, Clone, Copy)]
pub enum Candidate<'a> {
    Text(&'a str),
    Image(&'a ImageArtifact),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptEncoding {
    pub dim: usize,
    pub vectors: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoding {
    pub dim: usize,
    pub embeddings: Vec<Vec<f32>>,
    pub concepts: Option<ConceptEncoding>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEncoding {
    pub dim: usize,
    pub embeddings: Vec<Vec<f32>>,
}

/// The seven provider capabilities the pipeline depends on.
pub trait Provider: Send + Sync {
    fn t2t(&self, query: &str, n: usize) -> Result<Vec<String>>;
    fn t2i(&self, query: &str, seed: u64, n_images: usize) -> Result<Vec<ImageArtifact>>;
    fn i2t(&self, image: &ImageArtifact, n: usize) -> Result<Vec<String>>;
    fn qa_generate(&self, query: &str) -> Result<Vec<QaPair>>;
    fn qa_verify(&self, candidate: Candidate<'_>, pairs: &[QaPair]) -> Result<AlignmentCount>;
    fn encode_text(&self, texts: &[String]) -> Result<TextEncoding>;
    fn encode_image(&self, images: &[ImageArtifact]) -> Result<ImageEncoding>;
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg.to_string()))
    }
}

#[derive(Debug)]
struct RemoteClient {
    agent: ureq::Agent,
    base_url: String,
    max_retries: u32,
    bearer_token: Option<String>,
    cache: ResponseCache,
}

impl RemoteClient {
    fn post_once(&self, endpoint: &str, body: &str) -> std::result::Result<(u16, String), String> {
        let url = format!("{}{}", self.base_url.trim_end_matches('/'), endpoint);
        let mut request = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json");
        if let Some(token) = &self.bearer_token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = request.send(body).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok((status, text))
    }

    fn post(&self, endpoint: &str, body: &str) -> Result<String> {
        let attempts = self.max_retries + 1;
        let mut delay = BACKOFF_START;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.post_once(endpoint, body) {
                Ok((status, text)) if (200..300).contains(&status) => return Ok(text),
                Ok((status, text)) => {
                    let detail = wire::decode_error_body(&text).unwrap_or(wire::ErrorDetail {
                        code: "unknown".to_string(),
                        message: text.chars().take(200).collect(),
                    });
                    if status == 429 || status >= 500 {
                        last = format!("status {status} ({}): {}", detail.code, detail.message);
                        continue;
                    }
                    return Err(Error::ProviderRejected {
                        endpoint: endpoint.to_string(),
                        status,
                        code: detail.code,
                        message: detail.message,
                    });
                }
                Err(reason) => last = reason,
            }
            log::debug!("{endpoint}: attempt {} failed: {last}", attempt + 1);
        }
        Err(Error::ProviderUnavailable {
            endpoint: endpoint.to_string(),
            attempts,
            reason: last,
        })
    }

    /// Cache lookup, then POST; a body is cached only after `decode` accepts it.
    fn call<T>(
        &self,
        endpoint: &str,
        request: &serde_json::Value,
        decode: impl Fn(&str) -> Result<T>,
    ) -> Result<T> {
        let body = wire::canonical(request);
        let key = CacheKey::new(endpoint, &body);
        if let Some(cached) = self.cache.get(&key) {
            match decode(&cached) {
                Ok(value) => return Ok(value),
                Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", key.hex()),
            }
        }
        let text = self.post(endpoint, &body)?;
        let value = decode(&text)?;
        self.cache.put(&key, &text)?;
        Ok(value)
    }
}

#[derive(Debug)]
enum Backend {
    Stub(StubSettings),
    Remote(RemoteClient),
}

/// Provider client; immutable after construction and shareable across threads.
#[derive(Debug)]
pub struct Gateway {
    config: ProviderConfig,
    backend: Backend,
}

impl Gateway {
    pub fn new(config: ProviderConfig) -> Result<Self> {
        config.validate()?;
        let backend = match config.mode {
            ProviderMode::Stub => Backend::Stub(config.stub_settings()),
            ProviderMode::Remote => {
                let agent: ureq::Agent = ureq::Agent::config_builder()
                    .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
                    .http_status_as_error(false)
                    .build()
                    .into();
                Backend::Remote(RemoteClient {
                    agent,
                    base_url: config.base_url.clone(),
                    max_retries: config.max_retries,
                    bearer_token: config.bearer_token.clone(),
                    cache: ResponseCache::new(&config.cache_dir),
                })
            }
        };
        Ok(Gateway { config, backend })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }
}

impl Provider for Gateway {
    fn t2t(&self, query: &str, n: usize) -> Result<Vec<String>> {
        require(!query.trim().is_empty(), "t2t query must be non-empty")?;
        require(n >= 1, "t2t count must be at least 1")?;
        match &self.backend {
            Backend::Stub(_) => Ok(stub::paraphrases(query, n)),
            Backend::Remote(c) => c.call(wire::T2T, &wire::t2t_request(query, n), |b| {
                wire::decode_t2t(b, n)
            }),
        }
    }

    fn t2i(&self, query: &str, seed: u64, n_images: usize) -> Result<Vec<ImageArtifact>> {
        require(!query.trim().is_empty(), "t2i query must be non-empty")?;
        require(n_images >= 1, "t2i image count must be at least 1")?;
        match &self.backend {
            Backend::Stub(_) => Ok(stub::images(query, seed, n_images)),
            Backend::Remote(c) => c.call(
                wire::T2I,
                &wire::t2i_request(query, seed, n_images),
                |b| wire::decode_t2i(b, query, seed, n_images),
            ),
        }
    }

    fn i2t(&self, image: &ImageArtifact, n: usize) -> Result<Vec<String>> {
        require(!image.bytes.is_empty(), "i2t image bytes must be non-empty")?;
        require(n >= 1, "i2t caption count must be at least 1")?;
        match &self.backend {
            Backend::Stub(_) => Ok(stub::captions(&image.source_prompt, n)),
            Backend::Remote(c) => c.call(wire::I2T, &wire::i2t_request(image, n), |b| {
                wire::decode_i2t(b, n)
            }),
        }
    }

    fn qa_generate(&self, query: &str) -> Result<Vec<QaPair>> {
        require(!query.trim().is_empty(), "qa query must be non-empty")?;
        match &self.backend {
            Backend::Stub(_) => Ok(stub::qa_pairs(query)),
            Backend::Remote(c) => c.call(
                wire::QA_GENERATE,
                &wire::qa_generate_request(query),
                wire::decode_qa_generate,
            ),
        }
    }

    fn qa_verify(&self, candidate: Candidate<'_>, pairs: &[QaPair]) -> Result<AlignmentCount> {
        require(!pairs.is_empty(), "qa verification needs at least one pair")?;
        if let Candidate::Image(img) = candidate {
            require(!img.bytes.is_empty(), "image candidate has no bytes")?;
        }
        match &self.backend {
            Backend::Stub(_) => {
                let text = match candidate {
                    Candidate::Text(t) => t,
                    Candidate::Image(img) => img.source_prompt.as_str(),
                };
                Ok(stub::align(text, pairs))
            }
            Backend::Remote(c) => c.call(
                wire::QA_VERIFY,
                &wire::qa_verify_request(candidate, pairs),
                |b| wire::decode_qa_verify(b, pairs.len()),
            ),
        }
    }

    fn encode_text(&self, texts: &[String]) -> Result<TextEncoding> {
        require(!texts.is_empty(), "encode_text needs at least one text")?;
        match &self.backend {
            Backend::Stub(s) => {
                let r = stub::encode_text(texts, s);
                Ok(TextEncoding {
                    dim: r.dim,
                    embeddings: r.embeddings,
                    concepts: r.concepts.zip(r.concept_dim).map(|(vectors, dim)| {
                        ConceptEncoding { dim, vectors }
                    }),
                })
            }
            Backend::Remote(c) => c.call(
                wire::ENCODE_TEXT,
                &wire::encode_text_request(texts),
                |b| wire::decode_encode_text(b, texts.len()),
            ),
        }
    }

    fn encode_image(&self, images: &[ImageArtifact]) -> Result<ImageEncoding> {
        require(!images.is_empty(), "encode_image needs at least one image")?;
        require(
            images.iter().all(|i| !i.bytes.is_empty()),
            "encode_image got an image without bytes",
        )?;
        match &self.backend {
            Backend::Stub(s) => {
                let r = stub::encode_images(images.iter().map(|i| i.bytes.as_slice()), s);
                Ok(ImageEncoding {
                    dim: r.dim,
                    embeddings: r.embeddings,
                })
            }
            Backend::Remote(c) => c.call(
                wire::ENCODE_IMAGE,
                &wire::encode_image_request(images),
                |b| wire::decode_encode_image(b, images.len()),
            ),
        }
    }
}
