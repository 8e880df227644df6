//! Replaying generated assertions against buggy and fixed revisions.

mod focal;
mod hooks;
mod trial;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::java::JavaError;
use crate::predictor::PredictError;

pub use focal::{detect_focal_extended, subtokens, FocalStrategy};
pub use hooks::{ExecutionHooks, HookRun};
pub use trial::{
    evaluate_bug, evaluate_bugs, locate_failing_site, prepare_target, replace_failing_assertion,
    run_trial, BugEvalOptions, TrialTarget,
};

#[derive(Debug, Error)]
pub enum BugError {
    #[error("invalid bug case {0}")]
    InvalidCase(String),
    #[error("invalid hooks: {0}")]
    InvalidHooks(String),
    #[error("no focal method found for {0}")]
    NoFocalFound(String),
    #[error("failing assertion is not inside test {0}")]
    SiteNotInTest(String),
    #[error("test {0} not found")]
    TestNotFound(String),
    #[error("{step} hook timed out after {timeout:?}")]
    HookTimeout { step: String, timeout: Duration },
    #[error("{step} hook crashed: {detail}")]
    HookCrash { step: String, detail: String },
    #[error("malformed manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error(transparent)]
    Java(#[from] JavaError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BugError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BugError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerTest {
    /// Qualified test class name.
    pub test_class: String,
    pub test_method: String,
    /// Test source relative to the checkout roots; searched for by class
    /// name when absent.
    #[serde(default)]
    pub test_file: Option<PathBuf>,
    /// 1-based line of the failing assertion; the first assertion of the
    /// test is used when absent.
    #[serde(default)]
    pub failing_line: Option<usize>,
    #[serde(default)]
    pub manual_focal: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugCase {
    pub bug_id: String,
    pub buggy_root: PathBuf,
    pub fixed_root: PathBuf,
    pub trigger_tests: Vec<TriggerTest>,
    #[serde(default)]
    pub diff_changed_methods: Vec<String>,
}

impl BugCase {
    pub fn validate(&self) -> Result<(), BugError> {
        if self.trigger_tests.is_empty() {
            return Err(BugError::InvalidCase(format!(
                "{}: no trigger tests",
                self.bug_id
            )));
        }
        for root in [&self.buggy_root, &self.fixed_root] {
            if !root.is_dir() {
                return Err(BugError::InvalidCase(format!(
                    "{}: {} is not a directory",
                    self.bug_id,
                    root.display()
                )));
            }
        }
        Ok(())
    }
}

/// Reads a JSON array of bug cases; relative roots are resolved against the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<BugCase>, BugError> {
    let text = fs::read_to_string(path).map_err(|e| BugError::io(path, e))?;
    let mut cases: Vec<BugCase> = serde_json::from_str(&text).map_err(|e| BugError::Manifest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    for c in &mut cases {
        for root in [&mut c.buggy_root, &mut c.fixed_root] {
            if root.is_relative() {
                *root = base.join(&*root);
            }
        }
        c.validate()?;
    }
    Ok(cases)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrialCategory {
    NotCompilable,
    FailsOnFixed,
    FailsOnlyOnBuggy,
    PassesOnBoth,
}

impl TrialCategory {
    pub const ALL: [TrialCategory; 4] = [
        TrialCategory::NotCompilable,
        TrialCategory::FailsOnFixed,
        TrialCategory::FailsOnlyOnBuggy,
        TrialCategory::PassesOnBoth,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TrialCategory::NotCompilable => "not compilable",
            TrialCategory::FailsOnFixed => "fails on fixed",
            TrialCategory::FailsOnlyOnBuggy => "fails only on buggy",
            TrialCategory::PassesOnBoth => "passes on both",
        }
    }

    /// Decision chain over the observed hook results. Later results are
    /// irrelevant once an earlier step fails.
    pub fn classify(compiles: bool, passes_fixed: bool, passes_buggy: bool) -> Self {
        if !compiles {
            TrialCategory::NotCompilable
        } else if !passes_fixed {
            TrialCategory::FailsOnFixed
        } else if !passes_buggy {
            TrialCategory::FailsOnlyOnBuggy
        } else {
            TrialCategory::PassesOnBoth
        }
    }
}

impl fmt::Display for TrialCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub bug_id: String,
    pub test_class: String,
    pub test_method: String,
    pub focal_method: Option<String>,
    pub focal_strategy: Option<FocalStrategy>,
    pub category: TrialCategory,
    pub generated_assertion: String,
    pub compile_log: String,
    pub run_logs: Vec<String>,
}

/// A trigger test or trial that produced no category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Excluded {
    pub bug_id: String,
    pub test: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugSummary {
    pub bugs: usize,
    pub bugs_found: usize,
    pub trials: usize,
    pub per_category: BTreeMap<TrialCategory, usize>,
    pub found: Vec<String>,
}

/// A bug is found when at least one of its trials fails only on the buggy
/// revision.
pub fn aggregate_bugs(trials: &[TrialOutcome]) -> BugSummary {
    let bugs: BTreeSet<&str> = trials.iter().map(|t| t.bug_id.as_str()).collect();
    let found: BTreeSet<&str> = trials
        .iter()
        .filter(|t| t.category == TrialCategory::FailsOnlyOnBuggy)
        .map(|t| t.bug_id.as_str())
        .collect();
    let mut per_category: BTreeMap<TrialCategory, usize> =
        TrialCategory::ALL.iter().map(|c| (*c, 0)).collect();
    for t in trials {
        *per_category.entry(t.category).or_default() += 1;
    }
    BugSummary {
        bugs: bugs.len(),
        bugs_found: found.len(),
        trials: trials.len(),
        per_category,
        found: found.into_iter().map(String::from).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugReport {
    pub summary: BugSummary,
    pub trials: Vec<TrialOutcome>,
    pub excluded: Vec<Excluded>,
}

impl BugSummary {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = TrialCategory::ALL
            .iter()
            .map(|c| c.label().len())
            .max()
            .unwrap_or(0);
        for c in TrialCategory::ALL {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}",
                c.label(),
                self.per_category.get(&c).copied().unwrap_or(0)
            );
        }
        let _ = writeln!(out, "{:<width$}  {:>6}", "trials", self.trials);
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}",
            "bugs found",
            format!("{}/{}", self.bugs_found, self.bugs)
        );
        out
    }
}
