#![no_main]

use libfuzzer_sys::fuzz_target;
use wzlab::codecs::design::DesignSpec;

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<DesignSpec>(data);
});
