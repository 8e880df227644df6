//! Ranked assertion candidates from a retrieval baseline or an external model
//! process.

mod adapter;
mod retrieval;

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::deabstract;
use crate::corpus::{DatasetSample, TokenForm};
use crate::java::{check_syntax, join_tokens, texts, tokenize, PLACEHOLDER};

pub use adapter::{AdapterConfig, AdapterRequest, AdapterResponse, ExternalAdapter};
pub use retrieval::{retrieval_similarity, RetrievalIndex, TokenMultiset};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("retrieval index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("sample {sample_id} has {count} placeholders")]
    MissingPlaceholder { sample_id: String, count: usize },
    #[error("adapter protocol error on response line {line}: {reason}")]
    AdapterProtocolError { line: usize, reason: String },
    #[error("adapter did not answer within {0:?}")]
    AdapterTimeout(Duration),
    #[error("malformed prediction record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub score: f64,
}

impl Candidate {
    pub fn new(text: impl Into<String>, score: f64) -> Self {
        Self {
            text: text.into(),
            score,
        }
    }
}

/// Descending score, then ascending text.
pub fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.text.cmp(&b.text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub candidates: Vec<Candidate>,
    pub backend: String,
    /// Candidates rejected as malformed, in the order received.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<String>,
}

pub trait Backend: Sync {
    fn name(&self) -> &str;

    /// One prediction per sample, in input order.
    fn predict_batch(
        &self,
        samples: &[DatasetSample],
        k: usize,
    ) -> Result<Vec<Prediction>, PredictError>;
}

pub(crate) fn check_query(sample: &DatasetSample, k: usize) -> Result<(), PredictError> {
    if k == 0 {
        return Err(PredictError::InvalidK);
    }
    let count = sample
        .masked_input
        .iter()
        .filter(|t| *t == PLACEHOLDER)
        .count();
    if count != 1 {
        return Err(PredictError::MissingPlaceholder {
            sample_id: sample.sample_id.clone(),
            count,
        });
    }
    Ok(())
}

pub fn predict_top_k(
    sample: &DatasetSample,
    k: usize,
    backend: &dyn Backend,
) -> Result<Prediction, PredictError> {
    let mut out = backend.predict_batch(std::slice::from_ref(sample), k)?;
    out.pop().ok_or_else(|| {
        PredictError::BackendUnavailable(format!("{} returned no prediction", backend.name()))
    })
}

/// Concrete code of a candidate: deabstracted with the sample's dictionary
/// for abstract samples. `None` when the text does not lex or references an
/// abstract token the dictionary lacks.
pub fn concretize(text: &str, sample: &DatasetSample) -> Option<String> {
    match (sample.token_form, &sample.dictionary) {
        (TokenForm::Abstract, Some(dict)) => {
            let toks = texts(&tokenize(text).ok()?);
            deabstract(&toks, dict).ok().map(|t| join_tokens(&t))
        }
        _ => Some(text.to_string()),
    }
}

/// Keeps the first `k` candidates, drops those that are not well-formed
/// after deabstraction, and orders the rest by [`rank_order`].
pub fn finalize_candidates(
    sample: &DatasetSample,
    candidates: Vec<Candidate>,
    k: usize,
    backend: &str,
) -> Prediction {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for c in candidates.into_iter().take(k) {
        if concretize(&c.text, sample).is_some_and(|code| check_syntax(&code)) {
            kept.push(c);
        } else {
            dropped.push(c.text);
        }
    }
    kept.sort_by(rank_order);
    Prediction {
        sample_id: sample.sample_id.clone(),
        candidates: kept,
        backend: backend.to_string(),
        dropped,
    }
}

pub fn write_predictions<W: Write>(predictions: &[Prediction], mut out: W) -> std::io::Result<()> {
    for p in predictions {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_predictions<R: BufRead>(input: R) -> Result<Vec<Prediction>, PredictError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let malformed = |reason: String| PredictError::MalformedRecord {
            line: i + 1,
            reason,
        };
        let line = line.map_err(|e| malformed(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?);
    }
    Ok(out)
}

pub fn export_predictions(predictions: &[Prediction], path: &Path) -> Result<(), PredictError> {
    let io = |source| PredictError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    write_predictions(predictions, BufWriter::new(file)).map_err(io)
}

pub fn import_predictions(path: &Path) -> Result<Vec<Prediction>, PredictError> {
    let file = File::open(path).map_err(|source| PredictError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_predictions(BufReader::new(file))
}
