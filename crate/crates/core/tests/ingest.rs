use std::path::{Path, PathBuf};

use patchtree_core::ingest::{
    chunk_file, pack_context, parse_outline, reassemble, scan_repository, ContextItem, FileOutline,
    IngestConfig, ItemSource,
};
use patchtree_core::text::{lines_inclusive, unit_len};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
fn scan_skips_excluded_and_non_python_files() {
    let (snap, warnings) =
        scan_repository(&fixtures().join("scan"), &IngestConfig::default()).unwrap();
    assert!(warnings.is_empty());
    let paths: Vec<&str> = snap.files().iter().map(|f| f.path.as_str()).collect();
    assert_eq!(
        paths,
        [
            "docs/conf.py",
            "main.py",
            "pkg/__init__.py",
            "pkg/shapes.py",
            "pkg/sub/__init__.py",
            "pkg/sub/scale.py",
            "pkg/util.py",
            "setup.py",
            "test_util.py",
        ]
    );

    let everything = IngestConfig {
        exclude: Vec::new(),
        ..IngestConfig::default()
    };
    let (all, _) = scan_repository(&fixtures().join("scan"), &everything).unwrap();
    assert_eq!(all.len(), 12);
}

#[test]
fn missing_root_is_an_error() {
    assert!(scan_repository(&fixtures().join("no-such-dir"), &IngestConfig::default()).is_err());
}

#[test]
fn outline_matches_golden() {
    let (snap, _) = scan_repository(&fixtures().join("scan"), &IngestConfig::default()).unwrap();
    let outline = parse_outline(snap.get("pkg/shapes.py").unwrap());
    let text = std::fs::read_to_string(fixtures().join("shapes.outline.json")).unwrap();
    let golden: FileOutline = serde_json::from_str(&text).unwrap();
    assert_eq!(outline, golden);

    let broken = parse_outline(snap.get("docs/conf.py").unwrap());
    assert!(broken.degraded);
    assert_eq!(broken.definitions.len(), 1);
    assert_eq!(
        (
            broken.definitions[0].span.start,
            broken.definitions[0].span.end
        ),
        (1, 2)
    );
}

#[test]
fn chunks_reassemble_every_fixture_file() {
    let include_all = IngestConfig {
        exclude: Vec::new(),
        ..IngestConfig::default()
    };
    let roots = [
        fixtures(),
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures/mock/repos"),
    ];
    let mut checked = 0;
    for root in roots {
        let (snap, _) = scan_repository(&root, &include_all).unwrap();
        for file in snap.files() {
            let outline = parse_outline(file);
            let widest = lines_inclusive(&file.content)
                .iter()
                .map(|l| unit_len(l))
                .max()
                .unwrap_or(0);
            for budget in [widest.max(3) + 1, widest + 8, 2000] {
                let chunks = chunk_file(file, &outline, budget, 2).unwrap();
                assert_eq!(
                    reassemble(&chunks),
                    file.content,
                    "{} at budget {budget}",
                    file.path
                );
                assert!(chunks.iter().all(|c| c.units() <= budget));
            }
            checked += 1;
        }
    }
    assert!(checked >= 20);
}

fn brute_force_optimum(items: &[ContextItem], budget: usize) -> f64 {
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << items.len()) {
        let chosen = items.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1);
        let (units, score) =
            chosen.fold((0, 0.0), |(u, s), (_, it)| (u + it.units(), s + it.score()));
        if units <= budget {
            best = best.max(score);
        }
    }
    best
}

#[test]
fn packing_is_within_half_of_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sources = [
        ItemSource::IssueSection,
        ItemSource::ErrorMessage,
        ItemSource::Chunk,
        ItemSource::StackFrame,
    ];
    for _ in 0..200 {
        let n = rng.gen_range(1..=10);
        let items: Vec<ContextItem> = (0..n)
            .map(|_| {
                let len = rng.gen_range(0..=30);
                let text = vec!["tok"; len].join(" ");
                ContextItem::new(
                    sources[rng.gen_range(0..4)],
                    text,
                    rng.gen_range(0.1..1.0),
                    rng.gen_range(0.0..=1.0),
                )
            })
            .collect();
        let budget = rng.gen_range(0..=60);
        let packed = pack_context(&items, budget);
        assert!(packed.used <= budget);
        let opt = brute_force_optimum(&items, budget);
        assert!(
            packed.total_score() >= 0.5 * opt - 1e-12,
            "{} < half of {opt}",
            packed.total_score()
        );
        for w in packed.items.windows(2) {
            assert!(w[0].score() >= w[1].score());
        }
    }
}
