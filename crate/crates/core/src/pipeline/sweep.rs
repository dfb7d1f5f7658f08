use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_loaded, Inputs, PipelineConfig, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    K,
    Gamma,
}

impl FromStr for SweepParam {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "k" => Ok(SweepParam::K),
            "gamma" => Ok(SweepParam::Gamma),
            other => Err(PipelineError::config(format!("unknown sweep parameter {other:?}; expected k or gamma"))),
        }
    }
}

impl SweepParam {
    fn apply(self, base: &PipelineConfig, value: f64) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = base.clone();
        match self {
            SweepParam::K => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(PipelineError::config(format!("k must be a positive integer, got {value}")));
                }
                cfg.k = value as usize;
            }
            SweepParam::Gamma => cfg.gamma = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepScores {
    pub run_dir: PathBuf,
    pub stage1_macro_f1: Option<f64>,
    pub stage2_macro_f1: Option<f64>,
    pub macro_f1: Option<f64>,
    pub micro_f1: Option<f64>,
    pub st_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    #[serde(flatten)]
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RowOutcome {
    Ok(SweepScores),
    Failed { error: PipelineError },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r.outcome, RowOutcome::Failed { .. })).count()
    }

    pub fn to_table(&self) -> String {
        let name = match self.param {
            SweepParam::K => "k",
            SweepParam::Gamma => "gamma",
        };
        let cell = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let mut s = String::new();
        let _ = writeln!(s, "{name:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>6}", "stage1", "stage2", "macro", "micro", "rounds");
        for row in &self.rows {
            match &row.outcome {
                RowOutcome::Ok(r) => {
                    let _ = writeln!(
                        s,
                        "{:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>6}",
                        row.value,
                        cell(r.stage1_macro_f1),
                        cell(r.stage2_macro_f1),
                        cell(r.macro_f1),
                        cell(r.micro_f1),
                        r.st_rounds
                    );
                }
                RowOutcome::Failed { error } => {
                    let _ = writeln!(s, "{:>8}  failed: {error}", row.value);
                }
            }
        }
        s
    }
}

/// Runs the pipeline once per value of `param`, loading inputs once. A
/// failing value is recorded in its row and does not stop the others.
pub fn sweep(
    base: &PipelineConfig,
    param: SweepParam,
    values: &[f64],
    parallel: bool,
) -> Result<SweepReport, PipelineError> {
    base.validate()?;
    let inputs = Inputs::load(base)?;
    let run_one = |&value: &f64| {
        let outcome = param.apply(base, value).and_then(|cfg| run_loaded(&inputs, &cfg));
        let outcome = match outcome {
            Ok(out) => RowOutcome::Ok(SweepScores {
                run_dir: out.run_dir,
                stage1_macro_f1: out.metrics.stage1.map(|m| m.macro_f1),
                stage2_macro_f1: out.metrics.stage2.map(|m| m.macro_f1),
                macro_f1: out.metrics.full.as_ref().map(|m| m.macro_f1),
                micro_f1: out.metrics.full.as_ref().map(|m| m.micro_f1),
                st_rounds: out.self_training.rounds,
            }),
            Err(error) => {
                warn!("sweep value {value} failed: {error}");
                RowOutcome::Failed { error }
            }
        };
        SweepRow { value, outcome }
    };
    let rows = if parallel { values.par_iter().map(run_one).collect() } else { values.iter().map(run_one).collect() };
    Ok(SweepReport { param, rows })
}
