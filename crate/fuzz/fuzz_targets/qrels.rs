#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(q) = paravid::eval::Qrels::parse_str(text, "fuzz") {
            for (_, topic) in q.topics() {
                for (_, stats) in topic.strata() {
                    assert!(stats.judged > 0);
                }
            }
        }
    }
});
