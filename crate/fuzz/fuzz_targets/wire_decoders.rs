#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        use paravid::gateway::wire;
        let _ = wire::decode_t2t(text, 3);
        let _ = wire::decode_t2i(text, "q", 1, 2);
        let _ = wire::decode_i2t(text, 2);
        let _ = wire::decode_qa_generate(text);
        let _ = wire::decode_qa_verify(text, 3);
        let _ = wire::decode_encode_text(text, 2);
        let _ = wire::decode_encode_image(text, 1);
        let _ = wire::decode_error_body(text);
        let _ = wire::decode_b64("fuzz", text);
    }
});
