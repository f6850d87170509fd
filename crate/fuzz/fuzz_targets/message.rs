#![no_main]

use libfuzzer_sys::fuzz_target;
use wzlab::codecs::EncodedMessage;

fuzz_target!(|data: &[u8]| {
    if let Ok(msg) = EncodedMessage::from_bytes(data) {
        // the wire format is canonical
        assert_eq!(msg.to_bytes(), data);
    }
});
