#![no_main]

use libfuzzer_sys::fuzz_target;
use paravid::pipeline::DenseScores;

fuzz_target!(|data: &[u8]| {
    if let Ok(scores) = DenseScores::decode(data, "fuzz") {
        assert_eq!(scores.encode(), data);
    }
});
