//! Test/focal pairing, filtering, sample construction, splitting and export.

mod build;
mod filter;
mod io;
mod pairing;
mod prompts;
mod split;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{AbstractionDictionary, AbstractionError};
use crate::java::{AssertionKind, JavaError, MethodUnit, SourceToken};

pub use build::{
    build_corpus, dataset_file_name, scan_corpus, BuildOptions, BuiltCorpus, CorpusScan,
};
pub use filter::{acceptable_sites, explode_assertions, filter_pairs, to_abstract};
pub use io::{export_samples, import_samples, read_samples, write_samples};
pub use pairing::{invoked_method_names, match_focal_class, match_focal_method, strip_test_affix};
pub use prompts::{export_prompts, render_prompt, PromptRecord, PROMPT_TEMPLATE, SYSTEM_MESSAGE};
pub use split::{split_corpus, split_of, Split, SplitSets};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus contains fewer than 3 groups ({0})")]
    DegenerateCorpus(usize),
    #[error("invalid split ratios: {0}")]
    InvalidSplit(String),
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("sample {0} has no focal method context")]
    MissingFocal(String),
    #[error("sample {0} is not in raw token form")]
    NotRaw(String),
    #[error("no Java sources found under {0}")]
    EmptyCorpus(PathBuf),
    #[error(transparent)]
    Java(#[from] JavaError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FocalDetection {
    ClassAndNameMatch,
    CallIntersection,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFocalPair {
    pub test: MethodUnit,
    pub focal: Option<MethodUnit>,
    pub focal_detection: FocalDetection,
    pub repo_id: String,
    /// False when the focal class was located but its source could not be
    /// parsed; such pairs are dropped by [`filter_pairs`].
    pub classes_parsed: bool,
    /// Header, field and signature tokens of the test and focal classes.
    pub class_context: Vec<SourceToken>,
}

impl TestFocalPair {
    pub fn new(
        test: MethodUnit,
        focal: Option<MethodUnit>,
        detection: FocalDetection,
        repo_id: &str,
    ) -> Self {
        Self {
            test,
            focal_detection: if focal.is_some() {
                detection
            } else {
                FocalDetection::None
            },
            focal,
            repo_id: repo_id.to_string(),
            classes_parsed: true,
            class_context: Vec::new(),
        }
    }

    /// Split grouping key: the focal method identity, or the test class when
    /// no focal method is known.
    pub fn group_key(&self) -> String {
        match &self.focal {
            Some(f) => format!("{}:{}", self.repo_id, f.identity()),
            None => format!("{}:{}", self.repo_id, self.test.qualified_class()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputVariant {
    TestOnly,
    TestPlusFocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenForm {
    Raw,
    Abstract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subset {
    One,
    UpToFive,
    UpToTen,
}

impl Subset {
    pub fn cap(self) -> usize {
        match self {
            Subset::One => 1,
            Subset::UpToFive => 5,
            Subset::UpToTen => 10,
        }
    }
}

/// One masked test (optionally with its focal method) and the assertion to
/// predict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub sample_id: String,
    pub input_variant: InputVariant,
    pub token_form: TokenForm,
    pub masked_input: Vec<String>,
    pub truth_assertion: Vec<String>,
    pub dictionary: Option<AbstractionDictionary>,
    pub assertion_kind: AssertionKind,
    pub group_key: String,
    pub subset: Subset,
}

impl DatasetSample {
    /// Ground truth in concrete form (deabstracted for abstract samples).
    pub fn concrete_truth(&self) -> Result<Vec<String>, AbstractionError> {
        match (&self.token_form, &self.dictionary) {
            (TokenForm::Abstract, Some(dict)) => {
                crate::abstraction::deabstract(&self.truth_assertion, dict)
            }
            _ => Ok(self.truth_assertion.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: (0.8, 0.1, 0.1),
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let (a, b, c) = self.ratios;
        if [a, b, c].iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(CorpusError::InvalidSplit(format!(
                "{:?} has a negative ratio",
                self.ratios
            )));
        }
        if ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidSplit(format!(
                "{:?} does not sum to 1",
                self.ratios
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub input_pairs: usize,
    pub constructor_dropped: usize,
    pub parse_dropped: usize,
    pub length_dropped: usize,
    /// Pairs without any acceptable assertion.
    pub no_assertion_dropped: usize,
    /// Pairs with more acceptable assertions than the subset allows.
    pub over_cap_dropped: usize,
    pub kept_pairs: usize,
    /// One per acceptable assertion of the kept pairs.
    pub exploded_samples: usize,
    /// Files that failed to parse; reported separately from pair counts.
    pub unparseable_files: usize,
    pub assertion_frequency: BTreeMap<AssertionKind, usize>,
}

impl CorpusStats {
    pub fn assertion_filtered(&self) -> usize {
        self.no_assertion_dropped + self.over_cap_dropped
    }

    pub fn total_dropped(&self) -> usize {
        self.constructor_dropped
            + self.parse_dropped
            + self.length_dropped
            + self.assertion_filtered()
    }

    /// `inputs = survivors + drops`, and every stage shrinks the pool.
    pub fn is_conserved(&self) -> bool {
        let after_ctor = self.input_pairs.checked_sub(self.constructor_dropped);
        let after_parse = after_ctor.and_then(|n| n.checked_sub(self.parse_dropped));
        let after_len = after_parse.and_then(|n| n.checked_sub(self.length_dropped));
        let after_assert = after_len.and_then(|n| n.checked_sub(self.assertion_filtered()));
        after_assert == Some(self.kept_pairs)
            && self.assertion_frequency.values().sum::<usize>() == self.exploded_samples
    }

    /// Percentage share of each assertion kind among exploded samples.
    pub fn frequency_percentages(&self) -> BTreeMap<AssertionKind, f64> {
        let total = self.exploded_samples.max(1) as f64;
        self.assertion_frequency
            .iter()
            .map(|(k, n)| (*k, 100.0 * *n as f64 / total))
            .collect()
    }
}
