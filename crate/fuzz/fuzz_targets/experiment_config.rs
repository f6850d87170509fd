#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use wzlab::sim::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // path references resolve against a directory that does not exist
    if let Ok(cfg) = ExperimentConfig::from_json(text, Path::new("/nonexistent-wzlab-fuzz")) {
        serde_json::to_string(&cfg).expect("accepted configs serialize");
    }
});
