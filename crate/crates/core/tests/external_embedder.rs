//! Drives `ExternalEmbedder` against small python3 child processes. Skipped
//! when python3 is not on PATH.

use std::path::Path;
use std::process::Command;

use wndr::corpus::LabelSpec;
use wndr::retrieval::retrieve_all;
use wndr::store::{mean_word_vector, ExternalEmbedder, QueryEncoder, StoreError, VectorTable};

fn have_python() -> bool {
    Command::new("python3").arg("--version").output().map(|o| o.status.success()).unwrap_or(false)
}

fn script(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    format!("python3 {}", path.display())
}

const HEADER: &str = "import json, sys\nfor line in sys.stdin:\n    req = json.loads(line)\n";

/// Serves mean word vectors from a fixed table, like the built-in encoder.
const TABLE_SERVER: &str = r#"import json, sys
table = {"alpha": [1.0, 0.0, 0.5], "beta": [0.0, 2.0, -1.0], "gamma": [3.0, 3.0, 3.0]}
for line in sys.stdin:
    words = [w for w in json.loads(line)["text"].lower().split() if w in table]
    if not words:
        print(json.dumps({"error": "no known words"}), flush=True)
        continue
    vec = [sum(table[w][i] for w in words) / len(words) for i in range(3)]
    print(json.dumps({"vector": vec}), flush=True)
"#;

#[test]
fn matches_builtin_mean_encoder() {
    if !have_python() {
        eprintln!("skipping: python3 not found");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let embedder = ExternalEmbedder::spawn(&script(dir.path(), "table.py", TABLE_SERVER), 3).unwrap();
    let mut table = VectorTable::new(3);
    table.push("alpha", &[1.0, 0.0, 0.5]).unwrap();
    table.push("beta", &[0.0, 2.0, -1.0]).unwrap();
    table.push("gamma", &[3.0, 3.0, 3.0]).unwrap();
    for text in ["alpha", "alpha beta", "beta gamma alpha"] {
        let external = embedder.encode(text).unwrap();
        let builtin = mean_word_vector(&table, text).unwrap();
        for (a, b) in external.iter().zip(&builtin) {
            assert!((a - b).abs() < 1e-12, "{text}: {external:?} vs {builtin:?}");
        }
    }
    match embedder.encode("delta") {
        Err(StoreError::EmbedderFailure(msg)) => assert!(msg.contains("no known words")),
        other => panic!("expected failure, got {other:?}"),
    }
    // Still usable after an error response.
    assert_eq!(embedder.encode("gamma").unwrap(), vec![3.0, 3.0, 3.0]);
}

#[test]
fn drives_parallel_retrieval() {
    if !have_python() {
        eprintln!("skipping: python3 not found");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let embedder = ExternalEmbedder::spawn(&script(dir.path(), "table.py", TABLE_SERVER), 3).unwrap();
    let mut docs = VectorTable::new(3);
    docs.push("d1", &[1.0, 0.0, 0.0]).unwrap();
    docs.push("d2", &[0.0, 1.0, 0.0]).unwrap();
    docs.push("d3", &[0.0, 0.0, 1.0]).unwrap();
    let specs: Vec<LabelSpec> = ["alpha", "beta", "gamma", "alpha beta"]
        .iter()
        .enumerate()
        .map(|(c, n)| LabelSpec::new(c, *n))
        .collect();
    let results = retrieve_all(&docs, &embedder, &specs, 1).unwrap();
    let top: Vec<&str> = results.iter().map(|r| r.hits[0].id.as_str()).collect();
    assert_eq!(top, ["d1", "d2", "d1", "d2"]);
}

#[test]
fn wrong_dimension_is_rejected() {
    if !have_python() {
        eprintln!("skipping: python3 not found");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{HEADER}    print(json.dumps({{\"vector\": [1.0, 2.0]}}), flush=True)\n");
    let embedder = ExternalEmbedder::spawn(&script(dir.path(), "short.py", &body), 3).unwrap();
    assert!(matches!(embedder.encode("x"), Err(StoreError::DimensionMismatch { expected: 3, got: 2 })));
}

#[test]
fn early_exit_and_garbage_fail() {
    if !have_python() {
        eprintln!("skipping: python3 not found");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let quitter = ExternalEmbedder::spawn(&script(dir.path(), "quit.py", "import sys\nsys.exit(3)\n"), 2).unwrap();
    match quitter.encode("hello") {
        Err(StoreError::EmbedderFailure(msg)) => assert!(msg.contains("exit"), "{msg}"),
        other => panic!("expected failure, got {other:?}"),
    }
    let body = format!("{HEADER}    print('not json', flush=True)\n");
    let garbage = ExternalEmbedder::spawn(&script(dir.path(), "garbage.py", &body), 2).unwrap();
    assert!(matches!(garbage.encode("x"), Err(StoreError::EmbedderFailure(_))));
    let body = format!("{HEADER}    print(json.dumps({{\"vector\": [float('nan'), 1.0]}}), flush=True)\n");
    let nan = ExternalEmbedder::spawn(&script(dir.path(), "nan.py", &body), 2).unwrap();
    assert!(nan.encode("x").is_err());
}

#[test]
fn missing_program_fails_to_spawn() {
    assert!(matches!(ExternalEmbedder::spawn("/no/such/program --flag", 4), Err(StoreError::EmbedderFailure(_))));
    assert!(matches!(ExternalEmbedder::spawn("   ", 4), Err(StoreError::EmbedderFailure(_))));
}
