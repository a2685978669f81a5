//! Every checked-in fuzz seed must be accepted by its parser.

use std::fs;
use std::path::PathBuf;

use hwnas::arch::{self, Layout};
use hwnas::controller::PolicyCheckpoint;
use hwnas::cost::{DeviceSimulator, LatencyModel};
use hwnas::search::{SearchLog, SyntheticOracle};
use hwnas::space::SpaceDefinition;
use hwnas::tucker::ConvKernel;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    assert!(!out.is_empty(), "no seeds for {target}");
    out.sort();
    out
}

fn text_seeds(target: &str, parse: impl Fn(&str) -> bool) {
    for (path, bytes) in seeds(target) {
        let text = String::from_utf8(bytes).unwrap();
        assert!(parse(&text), "{} rejected", path.display());
    }
}

#[test]
fn corpus_seeds_parse() {
    text_seeds("arch_document", |s| arch::deserialize(s).is_ok());
    text_seeds("layout", |s| Layout::from_json(s).is_ok());
    text_seeds("space_definition", |s| {
        SpaceDefinition::from_json(s).and_then(|d| d.build(&Layout::toy2())).is_ok()
    });
    text_seeds("latency_model", |s| LatencyModel::from_json(s).is_ok());
    text_seeds("device_profile", |s| DeviceSimulator::from_json(s).is_ok());
    text_seeds("policy_checkpoint", |s| PolicyCheckpoint::from_json(s).is_ok());
    text_seeds("search_log", |s| SearchLog::from_ndjson(s).is_ok());
    text_seeds("synthetic_oracle", |s| SyntheticOracle::from_json(s).is_ok());
    for (path, bytes) in seeds("kernel_file") {
        assert!(ConvKernel::parse(&bytes).is_ok(), "{} rejected", path.display());
    }
}
