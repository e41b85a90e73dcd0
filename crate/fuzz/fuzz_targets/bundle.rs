#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(b) = paravid::paraphrase::ParaphraseBundle::from_json(text, "fuzz") {
            paravid::paraphrase::ParaphraseBundle::from_json(&b.to_json(), "fuzz").expect("written bundle parses");
        }
    }
});
