#![no_main]

use libfuzzer_sys::fuzz_target;
use paravid::gateway::stub::{handle_http, StubSettings};
use paravid::gateway::wire;

const ENDPOINTS: [&str; 8] = [
    wire::T2T,
    wire::T2I,
    wire::I2T,
    wire::QA_GENERATE,
    wire::QA_VERIFY,
    wire::ENCODE_TEXT,
    wire::ENCODE_IMAGE,
    "/v1/unknown",
];

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else { return };
    let Ok(body) = std::str::from_utf8(rest) else { return };
    let settings = StubSettings { seed: 1, dim: 4, concept_dim: 2 };
    let (status, text) = handle_http(ENDPOINTS[selector as usize % ENDPOINTS.len()], body, &settings);
    assert!(text.starts_with('{') && text.ends_with('}'), "status {status}: {text}");
});
