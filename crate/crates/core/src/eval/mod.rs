//! Scoring predictions against ground truth.

mod bleu;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DatasetSample;
use crate::java::{
    check_syntax, find_in_tokens, texts, tokenize, AssertionKind, SourceToken, TokenKind,
};
use crate::predictor::{concretize, Prediction};

pub use bleu::bleu;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to score")]
    EmptyCorpus,
    #[error("candidate and reference lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("prediction and truth ids differ: {missing} without prediction (e.g. {missing_example:?}), {extra} without truth (e.g. {extra_example:?})")]
    MismatchedIds {
        missing: usize,
        missing_example: Option<String>,
        extra: usize,
        extra_example: Option<String>,
    },
    #[error("sample {0}: ground truth does not deabstract")]
    BadTruth(String),
}

fn strip_semicolon<S: AsRef<str>>(tokens: &[S]) -> &[S] {
    match tokens.last() {
        Some(t) if t.as_ref() == ";" => &tokens[..tokens.len() - 1],
        _ => tokens,
    }
}

/// Token-level equality, ignoring whitespace and one trailing `;` on either
/// side. Text that does not lex never matches.
pub fn exact_match<S: AsRef<str>>(candidate: &str, truth: &[S]) -> bool {
    let Ok(toks) = tokenize(candidate) else {
        return false;
    };
    let cand = texts(&toks);
    let (a, b) = (strip_semicolon(&cand), strip_semicolon(truth));
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y.as_ref())
}

/// Kind of a single assertion statement, or `None` when the text is not one
/// of the recognised forms. A missing trailing `;` is tolerated.
pub fn assertion_type_of(text: &str) -> Option<AssertionKind> {
    let mut toks = tokenize(text).ok()?;
    if toks.last().is_some_and(|t| !t.is(";") && !t.is("}")) {
        let end = toks.last().map_or(0, SourceToken::end);
        toks.push(SourceToken::new(";", TokenKind::Separator, end));
    }
    match find_in_tokens(&toks).as_slice() {
        [site] if site.token_span == (0..toks.len()) => Some(site.kind),
        _ => None,
    }
}

/// One prediction aligned with its sample, in concrete code.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub sample_id: String,
    pub truth: Vec<String>,
    pub truth_kind: AssertionKind,
    /// Concrete candidate texts in rank order; `None` where deabstraction
    /// failed.
    pub candidates: Vec<Option<String>>,
    /// Number of candidates the predictor dropped as malformed.
    pub dropped: usize,
}

impl Scored {
    pub fn rank1(&self) -> Option<&str> {
        self.candidates.first().and_then(|c| c.as_deref())
    }

    pub fn rank1_kind(&self) -> Option<AssertionKind> {
        self.rank1().and_then(assertion_type_of)
    }

    /// Rank of the first exact match, 1-based.
    pub fn hit_rank(&self) -> Option<usize> {
        self.candidates
            .iter()
            .position(|c| c.as_deref().is_some_and(|c| exact_match(c, &self.truth)))
            .map(|i| i + 1)
    }
}

/// Pairs predictions with samples by id; both sides must carry the same id
/// set. Output follows sample order.
pub fn align(
    predictions: &[Prediction],
    samples: &[DatasetSample],
) -> Result<Vec<Scored>, EvalError> {
    let by_id: HashMap<&str, &Prediction> = predictions
        .iter()
        .map(|p| (p.sample_id.as_str(), p))
        .collect();
    let sample_ids: BTreeSet<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();
    let missing: Vec<&str> = sample_ids
        .iter()
        .copied()
        .filter(|id| !by_id.contains_key(id))
        .collect();
    let extra: BTreeSet<&str> = by_id
        .keys()
        .copied()
        .filter(|id| !sample_ids.contains(id))
        .collect();
    if !missing.is_empty() || !extra.is_empty() || predictions.len() != samples.len() {
        return Err(EvalError::MismatchedIds {
            missing: missing.len(),
            missing_example: missing.first().map(|s| s.to_string()),
            extra: extra.len(),
            extra_example: extra.first().map(|s| s.to_string()),
        });
    }
    samples
        .par_iter()
        .map(|s| {
            let p = by_id[s.sample_id.as_str()];
            Ok(Scored {
                sample_id: s.sample_id.clone(),
                truth: s
                    .concrete_truth()
                    .map_err(|_| EvalError::BadTruth(s.sample_id.clone()))?,
                truth_kind: s.assertion_kind,
                candidates: p
                    .candidates
                    .iter()
                    .map(|c| concretize(&c.text, s))
                    .collect(),
                dropped: p.dropped.len(),
            })
        })
        .collect()
}

/// For each k, the fraction of samples with an exact match among the first
/// k candidates.
pub fn top_k_accuracy(scored: &[Scored], ks: &[usize]) -> Result<BTreeMap<usize, f64>, EvalError> {
    if scored.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let ranks: Vec<Option<usize>> = scored.par_iter().map(Scored::hit_rank).collect();
    let n = scored.len() as f64;
    Ok(ks
        .iter()
        .map(|&k| {
            let hits = ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count();
            (k, hits as f64 / n)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeScores {
    pub per_kind: BTreeMap<AssertionKind, KindScore>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Precision, recall and F1 of the rank-1 candidate's kind. Samples whose
/// rank-1 kind is unrecognised count as a wrong label. Macro averages cover
/// kinds with non-zero support.
pub fn type_prf(scored: &[Scored]) -> TypeScores {
    let mut truths: BTreeMap<AssertionKind, usize> = BTreeMap::new();
    let mut predicted: BTreeMap<AssertionKind, usize> = BTreeMap::new();
    let mut correct: BTreeMap<AssertionKind, usize> = BTreeMap::new();
    for s in scored {
        *truths.entry(s.truth_kind).or_default() += 1;
        if let Some(k) = s.rank1_kind() {
            *predicted.entry(k).or_default() += 1;
            if k == s.truth_kind {
                *correct.entry(k).or_default() += 1;
            }
        }
    }
    let mut per_kind = BTreeMap::new();
    for kind in AssertionKind::ALL {
        let support = truths.get(&kind).copied().unwrap_or(0);
        let pred = predicted.get(&kind).copied().unwrap_or(0);
        if support == 0 && pred == 0 {
            continue;
        }
        let hit = correct.get(&kind).copied().unwrap_or(0) as f64;
        let precision = if pred == 0 { 0.0 } else { hit / pred as f64 };
        let recall = if support == 0 {
            0.0
        } else {
            hit / support as f64
        };
        per_kind.insert(
            kind,
            KindScore {
                precision,
                recall,
                f1: harmonic(precision, recall),
                support,
            },
        );
    }
    let supported: Vec<&KindScore> = per_kind.values().filter(|k| k.support > 0).collect();
    let mean = |f: fn(&KindScore) -> f64| {
        if supported.is_empty() {
            0.0
        } else {
            supported.iter().map(|k| f(k)).sum::<f64>() / supported.len() as f64
        }
    };
    TypeScores {
        macro_precision: mean(|k| k.precision),
        macro_recall: mean(|k| k.recall),
        macro_f1: mean(|k| k.f1),
        per_kind,
    }
}

/// Fraction of samples whose rank-1 kind equals the truth kind.
pub fn type_correctness_rate(scored: &[Scored]) -> f64 {
    if scored.is_empty() {
        return 0.0;
    }
    let ok = scored
        .iter()
        .filter(|s| s.rank1_kind() == Some(s.truth_kind))
        .count();
    ok as f64 / scored.len() as f64
}

/// Among samples of `kind` whose rank-1 kind is right, the fraction whose
/// rank-1 candidate matches exactly. `None` when no such sample exists.
pub fn conditional_accuracy(scored: &[Scored], kind: AssertionKind) -> Option<f64> {
    let cond: Vec<&Scored> = scored
        .iter()
        .filter(|s| s.truth_kind == kind && s.rank1_kind() == Some(kind))
        .collect();
    if cond.is_empty() {
        return None;
    }
    let hits = cond
        .iter()
        .filter(|s| s.rank1().is_some_and(|c| exact_match(c, &s.truth)))
        .count();
    Some(hits as f64 / cond.len() as f64)
}

/// Fraction of rank-1 candidates that are well-formed statements. A sample
/// whose candidates were all dropped as malformed counts as one bad
/// candidate; samples with no output at all are not counted.
pub fn syntactic_correctness_rate(scored: &[Scored]) -> f64 {
    let mut total = 0usize;
    let mut good = 0usize;
    for s in scored {
        match s.candidates.first() {
            Some(c) => {
                total += 1;
                if c.as_deref().is_some_and(check_syntax) {
                    good += 1;
                }
            }
            None if s.dropped > 0 => total += 1,
            None => {}
        }
    }
    if total == 0 {
        0.0
    } else {
        good as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub top_k_accuracy: BTreeMap<usize, f64>,
    pub bleu: f64,
    pub per_kind: BTreeMap<AssertionKind, KindScore>,
    pub type_macro_precision: f64,
    pub type_macro_recall: f64,
    pub type_macro_f1: f64,
    pub type_correctness: f64,
    pub syntactic_correctness: f64,
    pub conditional_accuracy: BTreeMap<AssertionKind, f64>,
    pub dropped_candidates: usize,
}

pub fn evaluate(
    predictions: &[Prediction],
    samples: &[DatasetSample],
    ks: &[usize],
) -> Result<EvalReport, EvalError> {
    let scored = align(predictions, samples)?;
    evaluate_scored(&scored, ks)
}

pub fn evaluate_scored(scored: &[Scored], ks: &[usize]) -> Result<EvalReport, EvalError> {
    let top_k_accuracy = top_k_accuracy(scored, ks)?;
    let rank1: Vec<Vec<String>> = scored
        .iter()
        .map(|s| {
            s.rank1()
                .and_then(|c| tokenize(c).ok())
                .map(|t| texts(&t))
                .unwrap_or_default()
        })
        .collect();
    let refs: Vec<&Vec<String>> = scored.iter().map(|s| &s.truth).collect();
    let refs: Vec<Vec<&str>> = refs
        .iter()
        .map(|r| r.iter().map(String::as_str).collect())
        .collect();
    let types = type_prf(scored);
    Ok(EvalReport {
        n_samples: scored.len(),
        top_k_accuracy,
        bleu: bleu(&rank1, &refs)?,
        per_kind: types.per_kind,
        type_macro_precision: types.macro_precision,
        type_macro_recall: types.macro_recall,
        type_macro_f1: types.macro_f1,
        type_correctness: type_correctness_rate(scored),
        syntactic_correctness: syntactic_correctness_rate(scored),
        conditional_accuracy: AssertionKind::ALL
            .iter()
            .filter_map(|&k| conditional_accuracy(scored, k).map(|v| (k, v)))
            .collect(),
        dropped_candidates: scored.iter().map(|s| s.dropped).sum(),
    })
}

impl EvalReport {
    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let pct = |v: f64| format!("{:.2}%", 100.0 * v);
        let mut rows: Vec<(String, String)> = vec![("samples".into(), self.n_samples.to_string())];
        for (k, v) in &self.top_k_accuracy {
            rows.push((format!("top-{k} accuracy"), pct(*v)));
        }
        rows.push(("BLEU".into(), format!("{:.4}", self.bleu)));
        rows.push(("type correctness".into(), pct(self.type_correctness)));
        rows.push((
            "type macro precision".into(),
            format!("{:.4}", self.type_macro_precision),
        ));
        rows.push((
            "type macro recall".into(),
            format!("{:.4}", self.type_macro_recall),
        ));
        rows.push(("type macro F1".into(), format!("{:.4}", self.type_macro_f1)));
        rows.push((
            "syntactic correctness".into(),
            pct(self.syntactic_correctness),
        ));
        rows.push((
            "dropped candidates".into(),
            self.dropped_candidates.to_string(),
        ));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &rows {
            let _ = writeln!(out, "{k:<width$}  {v:>10}");
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<18} {:>9} {:>9} {:>9} {:>8} {:>11}",
            "kind", "precision", "recall", "f1", "support", "cond. acc."
        );
        for (kind, s) in &self.per_kind {
            let cond = self
                .conditional_accuracy
                .get(kind)
                .map_or_else(|| "-".to_string(), |v| pct(*v));
            let _ = writeln!(
                out,
                "{:<18} {:>9.4} {:>9.4} {:>9.4} {:>8} {:>11}",
                kind.label(),
                s.precision,
                s.recall,
                s.f1,
                s.support,
                cond
            );
        }
        out
    }
}
