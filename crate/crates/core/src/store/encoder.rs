use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{StoreError, VectorTable};
use crate::corpus::tokenize;

/// Turns query text into a retrieval-space vector.
pub trait QueryEncoder: Send + Sync {
    fn encode(&self, text: &str) -> Result<Vec<f64>, StoreError>;
}

impl<E: QueryEncoder + ?Sized> QueryEncoder for &E {
    fn encode(&self, text: &str) -> Result<Vec<f64>, StoreError> {
        (**self).encode(text)
    }
}

/// Unweighted mean of the word vectors of the in-vocabulary tokens of `text`.
pub fn mean_word_vector(table: &VectorTable, text: &str) -> Result<Vec<f64>, StoreError> {
    let mut acc = vec![0f64; table.dim()];
    let mut n = 0usize;
    for token in tokenize(text) {
        if let Some(v) = table.get(&token) {
            for (a, &x) in acc.iter_mut().zip(v) {
                *a += x as f64;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(StoreError::NoKnownTokens(text.to_owned()));
    }
    let scale = 1.0 / n as f64;
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(acc)
}

pub struct MeanWordEncoder<'a> {
    table: &'a VectorTable,
}

impl<'a> MeanWordEncoder<'a> {
    pub fn new(table: &'a VectorTable) -> Self {
        MeanWordEncoder { table }
    }
}

impl QueryEncoder for MeanWordEncoder<'_> {
    fn encode(&self, text: &str) -> Result<Vec<f64>, StoreError> {
        mean_word_vector(self.table, text)
    }
}

#[derive(Serialize)]
struct Request<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct Response {
    vector: Option<Vec<f64>>,
    error: Option<String>,
}

struct Pipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Child process speaking the JSON line protocol: one `{"text": ...}` per
/// request line, one `{"vector": [...]}` per response line.
pub struct ExternalEmbedder {
    pipe: Mutex<Pipe>,
    dim: usize,
}

impl ExternalEmbedder {
    /// Spawns `command` (whitespace-separated program and arguments, no shell).
    pub fn spawn(command: &str, dim: usize) -> Result<Self, StoreError> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| StoreError::EmbedderFailure("empty embedder command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| StoreError::EmbedderFailure(format!("cannot start {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(ExternalEmbedder { pipe: Mutex::new(Pipe { child, stdin, stdout }), dim })
    }
}

impl QueryEncoder for ExternalEmbedder {
    fn encode(&self, text: &str) -> Result<Vec<f64>, StoreError> {
        let mut pipe = self.pipe.lock().map_err(|_| StoreError::EmbedderFailure("poisoned lock".into()))?;
        let fail = |msg: String| StoreError::EmbedderFailure(msg);
        let request = serde_json::to_string(&Request { text }).expect("request serializes");
        writeln!(pipe.stdin, "{request}")
            .and_then(|_| pipe.stdin.flush())
            .map_err(|e| fail(format!("write: {e}")))?;
        let mut line = String::new();
        let n = pipe.stdout.read_line(&mut line).map_err(|e| fail(format!("read: {e}")))?;
        if n == 0 {
            let status = pipe.child.wait().map_err(|e| fail(e.to_string()))?;
            return Err(fail(format!("embedder exited ({status}) without a response")));
        }
        let resp: Response = serde_json::from_str(line.trim()).map_err(|e| fail(format!("bad response: {e}")))?;
        if let Some(err) = resp.error {
            return Err(fail(err));
        }
        let vector = resp.vector.ok_or_else(|| fail("response has no vector".into()))?;
        if vector.len() != self.dim {
            return Err(StoreError::DimensionMismatch { expected: self.dim, got: vector.len() });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(StoreError::NonFinite(text.to_owned()));
        }
        Ok(vector)
    }
}

impl Drop for ExternalEmbedder {
    fn drop(&mut self) {
        if let Ok(pipe) = self.pipe.get_mut() {
            let _ = pipe.child.kill();
            let _ = pipe.child.wait();
        }
    }
}
