use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::classifier::ClassifierError;
use crate::corpus::CorpusError;
use crate::expansion::ExpansionError;
use crate::retrieval::RetrievalError;
use crate::store::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Corpus,
    EmbedStore,
    Retrieval,
    Expansion,
    Classifier,
    SelfTraining,
    Eval,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().expect("unit variant"))
    }
}

/// Coarse failure class; selects the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Bad configuration or arguments.
    Config,
    /// Unreadable or inconsistent input data.
    Data,
    /// A stage failed on valid inputs.
    Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ErrorKind,
    #[serde(rename = "error")]
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: ErrorKind, message: impl Into<String>) -> Self {
        PipelineError { stage, kind, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Stage::Config, ErrorKind::Config, message)
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Stage => 4,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }

    pub fn corpus(e: CorpusError) -> Self {
        Self::new(Stage::Corpus, ErrorKind::Data, e.to_string())
    }

    pub fn store(e: StoreError) -> Self {
        let kind = match e {
            StoreError::EmbedderFailure(_) => ErrorKind::Stage,
            _ => ErrorKind::Data,
        };
        Self::new(Stage::EmbedStore, kind, e.to_string())
    }

    pub fn retrieval(e: RetrievalError) -> Self {
        let kind = match &e {
            RetrievalError::ZeroK => ErrorKind::Config,
            RetrievalError::Io { .. } | RetrievalError::Malformed { .. } => ErrorKind::Data,
            RetrievalError::Query { source: StoreError::NoKnownTokens(_), .. } => ErrorKind::Data,
            _ => ErrorKind::Stage,
        };
        Self::new(Stage::Retrieval, kind, e.to_string())
    }

    pub fn expansion(e: ExpansionError) -> Self {
        match e {
            ExpansionError::Retrieval(r) => Self::retrieval(r),
            ExpansionError::InvalidParameter(_) => Self::new(Stage::Expansion, ErrorKind::Config, e.to_string()),
            other => Self::new(Stage::Expansion, ErrorKind::Stage, other.to_string()),
        }
    }

    pub fn classifier(stage: Stage, e: ClassifierError) -> Self {
        let kind = match &e {
            ClassifierError::InvalidConfig(_) => ErrorKind::Config,
            ClassifierError::ModelFormat(_) | ClassifierError::Store(_) => ErrorKind::Data,
            _ => ErrorKind::Stage,
        };
        Self::new(stage, kind, e.to_string())
    }

    pub fn output(path: &Path, e: std::io::Error) -> Self {
        Self::new(Stage::Output, ErrorKind::Stage, format!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape_and_exit_codes() {
        let e = PipelineError::new(Stage::SelfTraining, ErrorKind::Stage, "boom");
        assert_eq!(e.to_json(), r#"{"stage":"self-training","kind":"stage","error":"boom"}"#);
        assert_eq!(e.to_string(), "self-training: boom");
        assert_eq!(e.exit_code(), 4);
        assert_eq!(PipelineError::config("x").exit_code(), 2);
        assert_eq!(PipelineError::store(StoreError::CorruptHeader("x".into())).exit_code(), 3);
        assert_eq!(PipelineError::store(StoreError::EmbedderFailure("x".into())).exit_code(), 4);
    }
}
