//! Runs the fuzz target properties over the checked-in corpus seeds.

use std::fs;
use std::path::PathBuf;

use sal::beamform::{decode_map, decode_pgm, encode_map};
use sal::config::RunConfig;
use sal::radar::{decode_dataset, encode_dataset};
use sal::subsample::{export_design, parse_design};
use sal::taskmodel::{decode_checkpoint, encode_checkpoint};

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<Vec<u8>> = fs::read_dir(dir).unwrap().map(|e| fs::read(e.unwrap().path()).unwrap()).collect();
    assert!(!out.is_empty(), "{target} has no seeds");
    out.sort();
    out
}

/// Every prefix and a few byte flips of each seed, which must never panic.
fn mutations(seed: &[u8]) -> impl Iterator<Item = Vec<u8>> + '_ {
    let prefixes = (0..seed.len()).map(|n| seed[..n].to_vec());
    let flips = (0..seed.len()).step_by(7).map(|i| {
        let mut v = seed.to_vec();
        v[i] ^= 0xa5;
        v
    });
    prefixes.chain(flips)
}

#[test]
fn dataset_seeds_round_trip() {
    for s in seeds("dataset_decode") {
        assert_eq!(encode_dataset(&decode_dataset(&s).unwrap()), s);
        mutations(&s).for_each(|m| drop(decode_dataset(&m)));
    }
}

#[test]
fn checkpoint_seeds_round_trip() {
    for s in seeds("checkpoint_decode") {
        assert_eq!(encode_checkpoint(&decode_checkpoint(&s).unwrap()), s);
        mutations(&s).for_each(|m| drop(decode_checkpoint(&m)));
    }
}

#[test]
fn map_seeds_round_trip() {
    for s in seeds("map_decode") {
        assert_eq!(encode_map(&decode_map(&s).unwrap()), s);
        mutations(&s).for_each(|m| drop(decode_map(&m)));
    }
}

#[test]
fn pgm_seeds_decode() {
    for s in seeds("pgm_decode") {
        let (w, h, px) = decode_pgm(&s).unwrap();
        assert_eq!(px.len(), w * h);
        mutations(&s).for_each(|m| drop(decode_pgm(&m)));
    }
}

#[test]
fn design_seeds_round_trip() {
    for s in seeds("design_parse") {
        let text = String::from_utf8(s).unwrap();
        let (meta, acq) = parse_design(&text).unwrap();
        assert_eq!(export_design(&acq, meta.n_rx).unwrap(), text);
        for m in mutations(text.as_bytes()) {
            if let Ok(t) = std::str::from_utf8(&m) {
                drop(parse_design(t));
            }
        }
    }
}

#[test]
fn config_seeds_round_trip() {
    for s in seeds("config_parse") {
        let cfg = RunConfig::parse(std::str::from_utf8(&s).unwrap()).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
