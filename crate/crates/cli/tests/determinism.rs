//! Kept in its own test binary so the process-wide network and subprocess
//! counters see only this pipeline.

use std::path::Path;

use patchtree::{report, run, EXIT_OK};
use patchtree_core::harness::spawned_processes;
use patchtree_core::policy::network_calls;

const ARTIFACTS: [&str; 9] = [
    "config.toml",
    "invocation.json",
    "localization.jsonl",
    "locations.jsonl",
    "search_trace.jsonl",
    "predictions.jsonl",
    "refine_trace.jsonl",
    "predictions.refined.jsonl",
    "evaluation.jsonl",
];

#[test]
fn mock_pipeline_is_byte_identical_and_offline() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mock/config.toml");
    let tmp = tempfile::tempdir().unwrap();
    let runs = [tmp.path().join("a/run"), tmp.path().join("b/run")];
    for out in &runs {
        let code = run([
            "patchtree",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "11",
            "run",
        ]);
        assert_eq!(code, EXIT_OK);
    }
    for name in ARTIFACTS {
        let a = std::fs::read(runs[0].join(name)).unwrap();
        let b = std::fs::read(runs[1].join(name)).unwrap();
        assert!(!a.is_empty(), "{name} is empty");
        assert_eq!(a, b, "{name} differs between runs");
    }
    let ra = report::report(&[runs[0].clone()]).unwrap();
    let rb = report::report(&[runs[1].clone()]).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(network_calls(), 0);
    assert_eq!(spawned_processes(), 0);
}
