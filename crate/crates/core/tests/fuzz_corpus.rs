//! The checked-in fuzz seeds must stay valid inputs for their decoders.

use std::fs;
use std::path::PathBuf;

use netcausal::experiment::{decode_results, ExperimentConfig, Predictor};
use netcausal::io::{decode_dataset, encode_dataset};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(PathBuf, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let text = fs::read_to_string(&path).unwrap();
            (path, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn dataset_seeds_decode_and_round_trip() {
    for (path, text) in seeds("decode_dataset") {
        let ds = decode_dataset(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(decode_dataset(&encode_dataset(&ds).unwrap()).unwrap(), ds);
    }
}

#[test]
fn checkpoint_seeds_decode() {
    for (path, text) in seeds("decode_checkpoint") {
        Predictor::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn config_seeds_parse() {
    for (path, text) in seeds("parse_config") {
        ExperimentConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn results_seeds_parse() {
    for (path, text) in seeds("parse_results") {
        decode_results(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn truncated_inputs_are_errors_not_panics() {
    for (_, text) in seeds("decode_dataset") {
        for cut in [0, 1, text.len() / 3, text.len() - 2] {
            assert!(decode_dataset(&text[..cut]).is_err());
        }
    }
    for (_, text) in seeds("decode_checkpoint") {
        assert!(Predictor::from_json(&text[..text.len() / 2]).is_err());
    }
}
