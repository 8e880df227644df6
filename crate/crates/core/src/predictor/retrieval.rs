use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::{check_query, rank_order, Backend, Candidate, PredictError, Prediction};
use crate::corpus::DatasetSample;

/// Token counts, sorted by token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMultiset(Vec<(String, usize)>);

impl TokenMultiset {
    pub fn new<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.as_ref()).or_default() += 1;
        }
        Self(
            counts
                .into_iter()
                .map(|(t, n)| (t.to_string(), n))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|(_, n)| n).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiset Jaccard: Σ min / Σ max over all tokens. Two empty multisets
    /// are identical and score 1.
    pub fn jaccard(&self, other: &TokenMultiset) -> f64 {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        let (mut inter, mut union) = (0usize, 0usize);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    union += a[i].1;
                    i += 1;
                }
                Ordering::Greater => {
                    union += b[j].1;
                    j += 1;
                }
                Ordering::Equal => {
                    inter += a[i].1.min(b[j].1);
                    union += a[i].1.max(b[j].1);
                    i += 1;
                    j += 1;
                }
            }
        }
        union += a[i..].iter().map(|(_, n)| n).sum::<usize>();
        union += b[j..].iter().map(|(_, n)| n).sum::<usize>();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

pub fn retrieval_similarity<S: AsRef<str>>(query: &[S], entry: &[S]) -> f64 {
    TokenMultiset::new(query).jaccard(&TokenMultiset::new(entry))
}

/// Nearest-neighbour baseline: returns the truths of the training inputs
/// most similar to the query.
#[derive(Debug, Clone, Default)]
pub struct RetrievalIndex {
    entries: Vec<(TokenMultiset, String)>,
}

impl RetrievalIndex {
    /// Indexes `(masked_input, truth_assertion)` of the given samples, which
    /// must all come from the training split.
    pub fn build(train: &[DatasetSample]) -> Self {
        Self {
            entries: train
                .iter()
                .map(|s| {
                    (
                        TokenMultiset::new(&s.masked_input),
                        s.truth_assertion.join(" "),
                    )
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Top `k` distinct truth texts; a text's score is its best similarity.
    pub fn query(&self, tokens: &[String], k: usize) -> Result<Vec<Candidate>, PredictError> {
        if self.entries.is_empty() {
            return Err(PredictError::EmptyIndex);
        }
        let q = TokenMultiset::new(tokens);
        let mut best: HashMap<&str, f64> = HashMap::new();
        for (ms, truth) in &self.entries {
            let s = q.jaccard(ms);
            best.entry(truth.as_str())
                .and_modify(|b| *b = b.max(s))
                .or_insert(s);
        }
        let mut out: Vec<Candidate> = best
            .into_iter()
            .map(|(t, s)| Candidate::new(t, s))
            .collect();
        out.sort_by(rank_order);
        out.truncate(k);
        Ok(out)
    }
}

impl Backend for RetrievalIndex {
    fn name(&self) -> &str {
        "retrieval"
    }

    fn predict_batch(
        &self,
        samples: &[DatasetSample],
        k: usize,
    ) -> Result<Vec<Prediction>, PredictError> {
        samples
            .par_iter()
            .map(|s| {
                check_query(s, k)?;
                Ok(Prediction {
                    sample_id: s.sample_id.clone(),
                    candidates: self.query(&s.masked_input, k)?,
                    backend: self.name().to_string(),
                    dropped: Vec::new(),
                })
            })
            .collect()
    }
}
