//! Generates the default synthetic corpus, runs the full pipeline on it and
//! prints per-stage scores.
//!
//! cargo run --release -p wndr-core --example synthetic [-- <out-dir>]

use wndr::pipeline::{run_pipeline, PipelineConfig};
use wndr::synthetic::SyntheticConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("wndr-synthetic"));
    let data = SyntheticConfig::default().generate();
    let paths = data.write_to(out.join("data"))?;
    let cfg = PipelineConfig {
        corpus: paths.corpus,
        labels: paths.labels,
        doc_vectors: paths.doc_vectors,
        word_vectors: paths.word_vectors,
        sem_vectors: paths.sem_vectors,
        output_dir: out.join("runs"),
        overwrite: true,
        ..Default::default()
    };
    let started = std::time::Instant::now();
    let outcome = run_pipeline(&cfg)?;
    for r in &outcome.expansion.log {
        println!("iter {} class {} += {} (local {:.2}, global {:.3})", r.iter, r.class_id, r.token, r.local, r.global);
    }
    let m = &outcome.metrics;
    for (name, report) in [("stage1", &m.stage1), ("stage2", &m.stage2), ("full", &m.full)] {
        if let Some(r) = report {
            println!("{name:>7}: macro-F1 {:.4}  micro-F1 {:.4}", r.macro_f1, r.micro_f1);
        }
    }
    println!("self-training: {} rounds, stop {:?}", outcome.self_training.rounds, outcome.self_training.stop);
    println!("run dir {} ({:.2}s)", outcome.run_dir.display(), started.elapsed().as_secs_f64());
    Ok(())
}
