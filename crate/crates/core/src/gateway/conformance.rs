//! Request/response vectors that pin the wire behaviour of a stub-mode
//! provider, for checking other implementations of the protocol.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::stub::{self, StubSettings};
use super::wire;
use super::{Candidate, ImageArtifact};
use crate::verification::QaPair;

/// Settings used for the committed vector file.
pub const VECTOR_SETTINGS: StubSettings = StubSettings {
    seed: 7,
    dim: 8,
    concept_dim: 4,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vector {
    pub endpoint: String,
    pub settings: VectorSettings,
    /// Raw request body, which is not always valid JSON.
    pub request: String,
    pub status: u16,
    pub response: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorSettings {
    pub seed: u64,
    pub dim: usize,
    pub concept_dim: usize,
}

impl From<StubSettings> for VectorSettings {
    fn from(s: StubSettings) -> Self {
        VectorSettings {
            seed: s.seed,
            dim: s.dim,
            concept_dim: s.concept_dim,
        }
    }
}

impl From<VectorSettings> for StubSettings {
    fn from(s: VectorSettings) -> Self {
        StubSettings {
            seed: s.seed,
            dim: s.dim,
            concept_dim: s.concept_dim,
        }
    }
}

fn cases() -> Vec<(&'static str, String)> {
    let image = stub::images("a dog runs", 10, 1).remove(0);
    let blank = ImageArtifact::new(b"not a stub image".to_vec(), "", 0);
    let pairs = stub::qa_pairs("a dog runs");
    let open = [QaPair::yes_no("What animal?", "dog")];
    let c = wire::canonical;
    vec![
        (wire::T2T, c(&wire::t2t_request("a dog runs", 3))),
        (wire::T2T, c(&wire::t2t_request("", 3))),
        (wire::T2T, c(&wire::t2t_request("q", 0))),
        (wire::T2I, c(&wire::t2i_request("a dog runs", 10, 2))),
        (wire::T2I, c(&wire::t2i_request("a dog runs", 100000, 1))),
        (wire::I2T, c(&wire::i2t_request(&image, 2))),
        (wire::I2T, c(&wire::i2t_request(&blank, 2))),
        (wire::QA_GENERATE, c(&wire::qa_generate_request("a dog runs"))),
        (wire::QA_GENERATE, c(&wire::qa_generate_request("say yes"))),
        (wire::QA_VERIFY, c(&wire::qa_verify_request(Candidate::Text("yes the dog"), &pairs))),
        (wire::QA_VERIFY, c(&wire::qa_verify_request(Candidate::Image(&image), &pairs))),
        (wire::QA_VERIFY, c(&wire::qa_verify_request(Candidate::Text("a cat"), &open))),
        (wire::QA_VERIFY, c(&wire::qa_verify_request(Candidate::Text("a cat"), &[]))),
        (wire::ENCODE_TEXT, c(&wire::encode_text_request(&["a dog runs".into(), "q ~v0".into()]))),
        (wire::ENCODE_TEXT, c(&json!({ "texts": [] }))),
        (wire::ENCODE_IMAGE, c(&wire::encode_image_request(std::slice::from_ref(&image)))),
        (wire::ENCODE_IMAGE, c(&json!({ "images_b64": ["%%%"] }))),
        (wire::T2T, "{not json".to_string()),
        ("/v1/unknown", c(&json!({}))),
    ]
}

/// Every vector, computed by the stub's HTTP handler.
pub fn vectors(settings: &StubSettings) -> Vec<Vector> {
    cases()
        .into_iter()
        .map(|(endpoint, request)| {
            let (status, body) = stub::handle_http(endpoint, &request, settings);
            Vector {
                endpoint: endpoint.to_string(),
                settings: (*settings).into(),
                request,
                status,
                response: serde_json::from_str(&body).expect("stub bodies are JSON"),
            }
        })
        .collect()
}

/// One canonical JSON object per line.
pub fn vectors_jsonl(settings: &StubSettings) -> String {
    let mut out = String::new();
    for v in vectors(settings) {
        out.push_str(&wire::canonical(&v));
        out.push('\n');
    }
    out
}
