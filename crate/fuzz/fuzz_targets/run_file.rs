#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(run) = paravid::eval::RunFile::parse_str(text, "fuzz") {
            let again = paravid::eval::RunFile::parse_str(&run.to_trec_string(), "fuzz").expect("written run parses");
            assert_eq!(again.to_trec_string(), run.to_trec_string());
        }
    }
});
