#![no_main]

use libfuzzer_sys::fuzz_target;
use wzlab::polar::{parse_reliability, MAX_BLOCK_LENGTH};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(seq) = parse_reliability(text) {
        let mut sorted = seq;
        sorted.sort_unstable();
        assert!(sorted.into_iter().eq(0..MAX_BLOCK_LENGTH));
    }
});
