#![no_main]

use libfuzzer_sys::fuzz_target;
use wzlab::codecs::CodecConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = CodecConfig::from_json(text) {
        let _ = cfg.bit_allocation(None);
        let _ = CodecConfig::from_json(&cfg.to_json());
    }
});
