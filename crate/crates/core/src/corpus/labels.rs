use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tokenize, CorpusError};

/// A class's label name plus the words appended to it by expansion. The
/// query sent to the retriever is `name` followed by `expansions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub class_id: usize,
    pub name: String,
    #[serde(default)]
    pub expansions: Vec<String>,
}

impl LabelSpec {
    pub fn new(class_id: usize, name: impl Into<String>) -> Self {
        LabelSpec { class_id, name: name.into(), expansions: Vec::new() }
    }

    pub fn query_text(&self) -> String {
        let mut q = self.name.clone();
        for w in &self.expansions {
            q.push(' ');
            q.push_str(w);
        }
        q
    }

    pub fn name_tokens(&self) -> Vec<String> {
        tokenize(&self.name)
    }

    /// Token set of the current query (name plus expansions).
    pub fn query_tokens(&self) -> HashSet<String> {
        tokenize(&self.query_text()).into_iter().collect()
    }

    /// Appends an expansion word. Rejects duplicates and words already in
    /// the label name.
    pub fn push_expansion(&mut self, token: &str) -> Result<(), CorpusError> {
        if self.expansions.iter().any(|w| w == token) {
            return Err(CorpusError::Labels(format!(
                "class {}: {token:?} is already an expansion",
                self.class_id
            )));
        }
        if self.name_tokens().iter().any(|w| w == token) {
            return Err(CorpusError::Labels(format!(
                "class {}: {token:?} already occurs in the label name",
                self.class_id
            )));
        }
        self.expansions.push(token.to_owned());
        Ok(())
    }
}

#[derive(Deserialize)]
struct LabelRecord {
    class_id: usize,
    name: String,
    #[serde(default)]
    expansions: Vec<String>,
}

/// Reads `{"class_id", "name"}` records. The ids must be exactly `0..C`;
/// the returned list is ordered by class id.
pub fn load_label_specs(path: impl AsRef<Path>) -> Result<Vec<LabelSpec>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut specs: Vec<LabelSpec> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord = serde_json::from_str(&line)
            .map_err(|e| CorpusError::MalformedRecord { line: i + 1, reason: e.to_string() })?;
        if rec.name.trim().is_empty() {
            return Err(CorpusError::Labels(format!("class {} has an empty name", rec.class_id)));
        }
        let mut spec = LabelSpec::new(rec.class_id, rec.name);
        for w in &rec.expansions {
            spec.push_expansion(w)?;
        }
        specs.push(spec);
    }
    validate_class_ids(&mut specs)?;
    Ok(specs)
}

fn validate_class_ids(specs: &mut [LabelSpec]) -> Result<(), CorpusError> {
    if specs.is_empty() {
        return Err(CorpusError::Labels("no classes defined".into()));
    }
    specs.sort_by_key(|s| s.class_id);
    for (expected, spec) in specs.iter().enumerate() {
        if spec.class_id != expected {
            return Err(CorpusError::Labels(format!(
                "class ids must be exactly 0..{}; found {} where {expected} was expected",
                specs.len(),
                spec.class_id
            )));
        }
    }
    Ok(())
}

pub fn save_label_specs(path: impl AsRef<Path>, specs: &[LabelSpec]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for spec in specs {
        let line = serde_json::to_string(spec).expect("label specs always serialize");
        writeln!(out, "{line}").map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}
