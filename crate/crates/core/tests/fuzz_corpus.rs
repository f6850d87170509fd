//! Replays the checked-in fuzz seeds through the same entry points on stable.

use std::path::{Path, PathBuf};

use wzlab::codecs::design::DesignSpec;
use wzlab::codecs::{CodecConfig, EncodedMessage};
use wzlab::polar::parse_reliability;
use wzlab::sim::ExperimentConfig;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn codec_config_seeds_parse() {
    for (name, bytes) in seeds("codec_config") {
        let cfg = CodecConfig::from_json(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.bit_allocation(None).unwrap();
    }
}

#[test]
fn design_spec_seeds_parse() {
    for (name, bytes) in seeds("design_spec") {
        serde_json::from_slice::<DesignSpec>(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn experiment_seeds_parse_without_the_filesystem() {
    for (name, bytes) in seeds("experiment_config") {
        ExperimentConfig::from_json(std::str::from_utf8(&bytes).unwrap(), Path::new("/nonexistent-wzlab-fuzz"))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn reliability_seeds_split_into_valid_and_invalid() {
    for (name, bytes) in seeds("reliability") {
        let res = parse_reliability(std::str::from_utf8(&bytes).unwrap());
        assert_eq!(res.is_ok(), name == "full", "{name}");
    }
}

#[test]
fn message_seeds_round_trip() {
    for (name, bytes) in seeds("message") {
        match EncodedMessage::from_bytes(&bytes) {
            Ok(m) => assert_eq!(m.to_bytes(), bytes, "{name}"),
            Err(_) => assert_eq!(name, "bad_magic"),
        }
    }
}
