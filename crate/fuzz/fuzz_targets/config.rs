#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = paravid::pipeline::PipelineConfig::from_json(text, "fuzz") {
            let _ = cfg.validate();
        }
    }
});
