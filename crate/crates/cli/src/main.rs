use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wndr::classifier::{load_model, predict, save_model, self_train, train};
use wndr::corpus::save_label_specs;
use wndr::eval::{f1_report, hard_match_pilot};
use wndr::expansion::{retrieve_labels, run_expansion};
use wndr::pipeline::{load_text, run_pipeline, run_stage_one, sweep, ErrorKind, Inputs, PipelineConfig, PipelineError, Stage, SweepParam};
use wndr::retrieval::PseudoLabelSet;
use wndr::synthetic::SyntheticConfig;
use wndr::Classifier;

#[derive(Parser)]
#[command(name = "wndr", version, about = "Label-name-only document classification")]
struct Cli {
    /// Print results as JSON instead of text tables.
    #[arg(long, global = true)]
    json: bool,
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and summarize the corpus, label names and vectors.
    Ingest(Common),
    /// Retrieve pseudo labels with the bare label names.
    Retrieve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand the label names and retrieve with the expanded queries.
    Expand {
        #[command(flatten)]
        common: Common,
        /// Directory receiving the expansion log, expanded labels and pseudo labels.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a classifier on a pseudo-label file.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pseudo_labels: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Refine a model on its own confident predictions.
    SelfTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        /// Per-round report as JSON lines.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a model against the corpus gold labels.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        predictions_out: Option<PathBuf>,
    },
    /// Literal label-name matching precision and coverage.
    Pilot(Common),
    /// Run every stage and write all artifacts to a run directory.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Retrieval and one training pass only.
        #[arg(long)]
        stage_one: bool,
    },
    /// Run the pipeline once per value of k or gamma.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        parallel: bool,
    },
    /// Write a synthetic corpus with gold labels and vector files.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        docs_per_class: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
    },
}

/// Config file plus per-field overrides.
#[derive(Args, Clone, Default)]
struct Common {
    /// JSON pipeline config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    doc_vectors: Option<PathBuf>,
    #[arg(long)]
    word_vectors: Option<PathBuf>,
    #[arg(long)]
    sem_vectors: Option<PathBuf>,
    /// External query embedder command (JSON lines over stdin/stdout).
    #[arg(long)]
    embedder: Option<String>,
    #[arg(short)]
    k: Option<usize>,
    #[arg(short)]
    m: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_st_rounds: Option<usize>,
    #[arg(long)]
    stop_frac: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Replace an existing run directory.
    #[arg(long)]
    overwrite: bool,
    /// Record wall-clock metadata in the run directory.
    #[arg(long)]
    timestamps: bool,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set! {
            corpus => cfg.corpus,
            labels => cfg.labels,
            doc_vectors => cfg.doc_vectors,
            word_vectors => cfg.word_vectors,
            sem_vectors => cfg.sem_vectors,
            k => cfg.k,
            m => cfg.m,
            gamma => cfg.gamma,
            alpha => cfg.alpha,
            iterations => cfg.iterations,
            seed => cfg.seed,
            epochs => cfg.train.epochs,
            learning_rate => cfg.train.learning_rate,
            l2 => cfg.train.l2,
            batch_size => cfg.train.batch_size,
            max_st_rounds => cfg.train.max_st_rounds,
            stop_frac => cfg.train.stop_frac,
            output_dir => cfg.output_dir,
        }
        if let Some(cmd) = &self.embedder {
            cfg.external_embedder = Some(cmd.clone());
        }
        cfg.overwrite |= self.overwrite;
        cfg.deterministic &= !self.timestamps;
        Ok(cfg)
    }

    /// Loads the config and checks what the command needs: corpus and labels
    /// only, or the full set of paths and parameters.
    fn checked(&self, text_only: bool) -> Result<PipelineConfig, PipelineError> {
        let cfg = self.config()?;
        if text_only {
            for (name, p) in [("--corpus", &cfg.corpus), ("--labels", &cfg.labels)] {
                if p.as_os_str().is_empty() {
                    return Err(PipelineError::config(format!("missing {name}")));
                }
            }
        } else {
            cfg.validate()?;
        }
        Ok(cfg)
    }
}

struct Output {
    json: bool,
}

impl Output {
    fn emit(&self, value: serde_json::Value, text: impl FnOnce() -> String) {
        if self.json {
            println!("{value}");
        } else {
            print!("{}", text());
        }
    }
}

fn data_err(stage: Stage, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(stage, ErrorKind::Data, e.to_string())
}

fn stage_err(stage: Stage, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(stage, ErrorKind::Stage, e.to_string())
}

fn ensure_parent(path: &Path) -> Result<(), PipelineError> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(parent) => fs::create_dir_all(parent).map_err(|e| PipelineError::output(parent, e)),
        None => Ok(()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    ensure_parent(path)?;
    fs::write(path, contents).map_err(|e| PipelineError::output(path, e))
}

fn require_gold(inputs_gold: Option<HashMap<String, usize>>) -> Result<HashMap<String, usize>, PipelineError> {
    inputs_gold.ok_or_else(|| data_err(Stage::Eval, "corpus has no gold labels (every document needs \"label\")"))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let out = Output { json: cli.json };
    match cli.command {
        Command::Ingest(common) => {
            let cfg = common.checked(true)?;
            let (corpus, specs) = load_text(&cfg)?;
            let vocab: std::collections::HashSet<&str> =
                corpus.tokenized().iter().flat_map(|d| d.tokens.iter().map(String::as_str)).collect();
            let mut summary = json!({
                "documents": corpus.len(),
                "classes": specs.len(),
                "label_names": specs.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(),
                "vocabulary": vocab.len(),
                "gold": corpus.has_gold(),
            });
            let vectors = [&cfg.doc_vectors, &cfg.word_vectors, &cfg.sem_vectors];
            if vectors.iter().all(|p| !p.as_os_str().is_empty()) {
                let inputs = Inputs::load(&cfg)?;
                summary["dim"] = json!(inputs.store.dim());
                summary["word_vectors"] = json!(inputs.store.doc_words().len());
                summary["semantic_vectors"] = json!(inputs.store.sem_words().len());
            }
            out.emit(summary.clone(), || {
                let obj = summary.as_object().expect("object");
                obj.iter().map(|(k, v)| format!("{k:<17} {v}\n")).collect()
            });
        }
        Command::Retrieve { common, out: path } => {
            let cfg = common.checked(false)?;
            let inputs = Inputs::load(&cfg)?;
            let labels = retrieve_labels(&inputs.store, inputs.encoder().as_ref(), &inputs.specs, cfg.k)
                .map_err(PipelineError::retrieval)?;
            ensure_parent(&path)?;
            labels.save(&path).map_err(PipelineError::retrieval)?;
            let counts = labels.class_counts(inputs.specs.len());
            out.emit(json!({"labeled": labels.len(), "per_class": counts, "out": path}), || {
                format!("{} documents labeled, per class {:?} -> {}\n", labels.len(), counts, path.display())
            });
        }
        Command::Expand { common, out_dir } => {
            let cfg = common.checked(false)?;
            let inputs = Inputs::load(&cfg)?;
            let outcome = run_expansion(
                &inputs.store,
                inputs.encoder().as_ref(),
                &inputs.corpus,
                &inputs.specs,
                &cfg.expansion(),
            )
            .map_err(PipelineError::expansion)?;
            write_file(&out_dir.join("expansion_log.jsonl"), outcome.log_jsonl())?;
            write_file(&out_dir.join("stage1_labels.jsonl"), outcome.initial_labels.to_jsonl())?;
            write_file(&out_dir.join("stage2_labels.jsonl"), outcome.labels.to_jsonl())?;
            save_label_specs(out_dir.join("expanded_labels.jsonl"), &outcome.specs)
                .map_err(|e| stage_err(Stage::Output, e))?;
            let queries: Vec<String> = outcome.specs.iter().map(|s| s.query_text()).collect();
            out.emit(json!({"queries": queries, "skipped": outcome.skipped, "out_dir": out_dir}), || {
                queries.iter().enumerate().map(|(c, q)| format!("{c:>3}  {q}\n")).collect()
            });
        }
        Command::Train { common, pseudo_labels, model_out } => {
            let cfg = common.checked(false)?;
            let inputs = Inputs::load(&cfg)?;
            let labels = PseudoLabelSet::load(&pseudo_labels).map_err(|e| data_err(Stage::Classifier, e))?;
            let model: Classifier = train(&inputs.store, &labels, inputs.specs.len(), &cfg.train_config())
                .map_err(|e| PipelineError::classifier(Stage::Classifier, e))?;
            ensure_parent(&model_out)?;
            save_model(&model_out, &model).map_err(|e| stage_err(Stage::Output, e))?;
            out.emit(json!({"trained_on": labels.len(), "model": model_out}), || {
                format!("trained on {} documents -> {}\n", labels.len(), model_out.display())
            });
        }
        Command::SelfTrain { common, model, model_out, report } => {
            let cfg = common.checked(false)?;
            let inputs = Inputs::load(&cfg)?;
            let start: Classifier = load_model(&model).map_err(|e| PipelineError::classifier(Stage::SelfTraining, e))?;
            let outcome = self_train(start, &inputs.store, &inputs.ids(), &cfg.train_config())
                .map_err(|e| PipelineError::classifier(Stage::SelfTraining, e))?;
            ensure_parent(&model_out)?;
            save_model(&model_out, &outcome.model).map_err(|e| stage_err(Stage::Output, e))?;
            if let Some(path) = &report {
                write_file(path, outcome.report_jsonl())?;
            }
            out.emit(json!({"rounds": outcome.rounds, "stop": outcome.stop, "history": outcome.history}), || {
                format!("{} rounds, stopped: {:?}\n{}", outcome.rounds, outcome.stop, outcome.report_jsonl())
            });
        }
        Command::Evaluate { common, model, predictions_out } => {
            let cfg = common.checked(false)?;
            let inputs = Inputs::load(&cfg)?;
            let gold = require_gold(inputs.gold())?;
            let model: Classifier = load_model(&model).map_err(|e| PipelineError::classifier(Stage::Eval, e))?;
            let ids = inputs.ids();
            let preds = predict(&model, &inputs.store, &ids).map_err(|e| PipelineError::classifier(Stage::Eval, e))?;
            let labeled: Vec<_> = ids.iter().cloned().zip(preds).collect();
            if let Some(path) = &predictions_out {
                write_file(path, wndr::pipeline::predictions_jsonl(&labeled))?;
            }
            let pred: HashMap<String, usize> = labeled.iter().map(|(id, p)| (id.clone(), p.class_id)).collect();
            let report = f1_report(&pred, &gold, inputs.specs.len()).map_err(|e| stage_err(Stage::Eval, e))?;
            out.emit(json!(report), || report.to_table());
        }
        Command::Pilot(common) => {
            let cfg = common.checked(true)?;
            let (corpus, specs) = load_text(&cfg)?;
            let gold = require_gold(corpus.has_gold().then(|| corpus.gold()))?;
            let report = hard_match_pilot(&corpus, &specs, &gold);
            out.emit(json!(report), || report.to_table());
        }
        Command::Pipeline { common, stage_one } => {
            let cfg = common.config()?;
            if stage_one {
                let outcome = run_stage_one(&cfg)?;
                out.emit(json!({"run_dir": outcome.run_dir, "metrics": outcome.metrics}), || {
                    let table = outcome.metrics.as_ref().map(|m| m.to_table()).unwrap_or_default();
                    format!("run dir {}\n{table}", outcome.run_dir.display())
                });
            } else {
                let outcome = run_pipeline(&cfg)?;
                let text = fs::read_to_string(outcome.run_dir.join("metrics.txt")).unwrap_or_default();
                out.emit(
                    json!({
                        "run_dir": outcome.run_dir,
                        "metrics": outcome.metrics,
                        "expansions": outcome.expansion.log,
                        "self_training": {"rounds": outcome.self_training.rounds, "stop": outcome.self_training.stop},
                    }),
                    || format!("run dir {}\n{text}", outcome.run_dir.display()),
                );
            }
        }
        Command::Sweep { common, param, values, parallel } => {
            let cfg = common.config()?;
            let param: SweepParam = param.parse()?;
            let report = sweep(&cfg, param, &values, parallel)?;
            out.emit(json!(report), || report.to_table());
            if report.n_failed() == report.rows.len() {
                return Err(stage_err(Stage::Config, "every sweep value failed"));
            }
        }
        Command::Synth { out: dir, seed, docs_per_class, classes } => {
            let mut synth = SyntheticConfig { seed, ..Default::default() };
            if let Some(n) = docs_per_class {
                synth.docs_per_class = n;
            }
            if let Some(c) = classes {
                if c < 2 || 2 * c > synth.dim {
                    return Err(PipelineError::config(format!("classes must lie in 2..={}", synth.dim / 2)));
                }
                synth.n_classes = c;
            }
            let paths = synth.generate().write_to(&dir).map_err(|e| stage_err(Stage::Output, e))?;
            // Paths relative to the config file keep the directory relocatable.
            let name = |p: &Path| PathBuf::from(p.file_name().expect("generated file name"));
            let config = PipelineConfig {
                corpus: name(&paths.corpus),
                labels: name(&paths.labels),
                doc_vectors: name(&paths.doc_vectors),
                word_vectors: name(&paths.word_vectors),
                sem_vectors: name(&paths.sem_vectors),
                ..Default::default()
            };
            let config_path = dir.join("config.json");
            write_file(&config_path, serde_json::to_string_pretty(&config).expect("config serializes") + "\n")?;
            out.emit(json!({"paths": paths, "config": config_path}), || {
                format!("wrote synthetic dataset to {}\nconfig {}\n", dir.display(), config_path.display())
            });
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
