use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{
    aggregate_bugs, detect_focal_extended, BugCase, BugError, BugReport, Excluded, ExecutionHooks,
    TrialCategory, TrialOutcome, TriggerTest,
};
use crate::abstraction::AbstractionConfig;
use crate::corpus::{
    strip_test_affix, to_abstract, DatasetSample, InputVariant, Subset, TokenForm,
};
use crate::java::{
    find_assertions, mask_assertion, parse_classes, texts, AssertionSite, ClassUnit, MethodUnit,
    SEPARATOR,
};
use crate::predictor::{concretize, predict_top_k, Backend};

/// Byte range of the site within the file the test was parsed from.
fn site_bytes(test: &MethodUnit, site: &AssertionSite) -> Option<(usize, usize)> {
    let body = &test.body_tokens;
    let span = &site.token_span;
    if span.start >= span.end || span.end > body.len() {
        return None;
    }
    let (start, end) = (body[span.start].offset, body[span.end - 1].end());
    (test.source_span.0 <= start && end <= test.source_span.1).then_some((start, end))
}

/// Replaces the failing assertion's text by `generated`; every other byte of
/// `source` is kept.
pub fn replace_failing_assertion(
    source: &str,
    test: &MethodUnit,
    site: &AssertionSite,
    generated: &str,
) -> Result<String, BugError> {
    let (start, end) = site_bytes(test, site)
        .filter(|(_, end)| *end <= source.len())
        .ok_or_else(|| BugError::SiteNotInTest(test.qualified_name()))?;
    Ok(format!(
        "{}{}{}",
        &source[..start],
        generated,
        &source[end..]
    ))
}

/// The assertion of `test` on 1-based `line`, or its first assertion when no
/// line is given. Lines outside the test (a helper method, say) are rejected.
pub fn locate_failing_site(
    source: &str,
    test: &MethodUnit,
    line: Option<usize>,
) -> Result<AssertionSite, BugError> {
    let not_in_test = || BugError::SiteNotInTest(test.qualified_name());
    let sites = find_assertions(test);
    let Some(line) = line else {
        return sites.into_iter().next().ok_or_else(not_in_test);
    };
    let line_start = source
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>();
    let line_end = source[line_start..]
        .find('\n')
        .map_or(source.len(), |i| line_start + i);
    if line == 0
        || line_start >= source.len()
        || line_end <= test.source_span.0
        || line_start >= test.source_span.1
    {
        return Err(not_in_test());
    }
    sites
        .into_iter()
        .find(|s| site_bytes(test, s).is_some_and(|(a, b)| a <= line_end && b > line_start))
        .ok_or_else(not_in_test)
}

/// A trigger test with its original source and the assertion to replace.
#[derive(Debug, Clone)]
pub struct TrialTarget {
    pub bug_id: String,
    pub trigger: TriggerTest,
    /// Relative to both checkout roots.
    pub test_file: PathBuf,
    pub original: String,
    pub test: MethodUnit,
    pub site: AssertionSite,
}

fn simple_name(qualified: &str) -> &str {
    qualified.rsplit('.').next().unwrap_or(qualified)
}

fn find_test_file(root: &Path, trigger: &TriggerTest) -> Option<PathBuf> {
    if let Some(f) = &trigger.test_file {
        return Some(f.clone());
    }
    let outer = simple_name(&trigger.test_class)
        .split('$')
        .next()
        .unwrap_or_default()
        .to_string();
    let file_name = format!("{outer}.java");
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .find(|e| e.file_type().is_file() && e.file_name().to_string_lossy() == file_name)
        .and_then(|e| e.path().strip_prefix(root).ok().map(Path::to_path_buf))
}

pub fn prepare_target(case: &BugCase, trigger: &TriggerTest) -> Result<TrialTarget, BugError> {
    let label = format!("{}.{}", trigger.test_class, trigger.test_method);
    let test_file = find_test_file(&case.fixed_root, trigger)
        .ok_or_else(|| BugError::TestNotFound(label.clone()))?;
    let path = case.fixed_root.join(&test_file);
    let original = fs::read_to_string(&path).map_err(|e| BugError::io(&path, e))?;
    let class = simple_name(&trigger.test_class).replace('$', ".");
    let class = class.rsplit('.').next().unwrap_or_default();
    let test = parse_classes(&original)?
        .into_iter()
        .filter(|c| c.name == class)
        .flat_map(|c| c.methods)
        .find(|m| m.name == trigger.test_method && !m.is_constructor)
        .ok_or(BugError::TestNotFound(label))?;
    let site = locate_failing_site(&original, &test, trigger.failing_line)?;
    Ok(TrialTarget {
        bug_id: case.bug_id.clone(),
        trigger: trigger.clone(),
        test_file,
        original,
        test,
        site,
    })
}

/// Puts the patched test into both checkouts and restores the previous state
/// when dropped.
struct Patch {
    files: Vec<(PathBuf, Option<Vec<u8>>)>,
}

impl Patch {
    fn apply(roots: [&Path; 2], rel: &Path, text: &str) -> Result<Self, BugError> {
        let mut patch = Patch { files: Vec::new() };
        for root in roots {
            let path = root.join(rel);
            let previous = fs::read(&path).ok();
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| BugError::io(dir, e))?;
            }
            fs::write(&path, text).map_err(|e| BugError::io(&path, e))?;
            patch.files.push((path, previous));
        }
        Ok(patch)
    }
}

impl Drop for Patch {
    fn drop(&mut self) {
        for (path, previous) in self.files.drain(..) {
            let _ = match previous {
                Some(bytes) => fs::write(&path, bytes),
                None => fs::remove_file(&path),
            };
        }
    }
}

/// Patches the generated assertion into both revisions, compiles and runs
/// the test, and restores the checkouts.
pub fn run_trial(
    case: &BugCase,
    target: &TrialTarget,
    generated: &str,
    hooks: &ExecutionHooks,
) -> Result<TrialOutcome, BugError> {
    let patched =
        replace_failing_assertion(&target.original, &target.test, &target.site, generated)?;
    let _patch = Patch::apply(
        [&case.fixed_root, &case.buggy_root],
        &target.test_file,
        &patched,
    )?;
    let (class, method) = (&target.trigger.test_class, &target.trigger.test_method);
    let compile = hooks.compile(&case.fixed_root)?;
    let mut run_logs = Vec::new();
    let (mut fixed_ok, mut buggy_ok) = (false, false);
    if compile.passed {
        let fixed = hooks.run_test(&case.fixed_root, class, method)?;
        fixed_ok = fixed.passed;
        run_logs.push(fixed.log);
        if fixed_ok {
            let buggy = hooks.run_test(&case.buggy_root, class, method)?;
            buggy_ok = buggy.passed;
            run_logs.push(buggy.log);
        }
    }
    Ok(TrialOutcome {
        bug_id: case.bug_id.clone(),
        test_class: class.clone(),
        test_method: method.clone(),
        focal_method: None,
        focal_strategy: None,
        category: TrialCategory::classify(compile.passed, fixed_ok, buggy_ok),
        generated_assertion: generated.to_string(),
        compile_log: compile.log,
        run_logs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BugEvalOptions {
    /// Ranked candidates tried per trigger test.
    pub candidates_per_test: usize,
    pub token_form: TokenForm,
    pub abstraction: AbstractionConfig,
}

impl Default for BugEvalOptions {
    fn default() -> Self {
        Self {
            candidates_per_test: 1,
            token_form: TokenForm::Raw,
            abstraction: AbstractionConfig::default(),
        }
    }
}

fn production_classes(root: &Path, exclude: &Path) -> Vec<ClassUnit> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "java"))
        .filter(|e| e.path() != exclude)
        .filter_map(|e| fs::read_to_string(e.path()).ok())
        .filter_map(|src| parse_classes(&src).ok())
        .flatten()
        .filter(|c| strip_test_affix(&c.name).is_none())
        .collect()
}

fn sample_for(target: &TrialTarget, focal: Option<&MethodUnit>) -> Result<DatasetSample, BugError> {
    let (masked_body, truth) = mask_assertion(&target.test, &target.site)?;
    let mut input = Vec::new();
    if let Some(f) = focal {
        input.extend(texts(&f.tokens()));
        input.push(SEPARATOR.to_string());
    }
    input.extend(texts(&target.test.signature_tokens));
    input.extend(texts(&masked_body));
    Ok(DatasetSample {
        sample_id: format!(
            "{}:{}.{}",
            target.bug_id, target.trigger.test_class, target.trigger.test_method
        ),
        input_variant: if focal.is_some() {
            InputVariant::TestPlusFocal
        } else {
            InputVariant::TestOnly
        },
        token_form: TokenForm::Raw,
        masked_input: input,
        truth_assertion: texts(&truth),
        dictionary: None,
        assertion_kind: target.site.kind,
        group_key: target.bug_id.clone(),
        subset: Subset::UpToTen,
    })
}

/// Runs every trigger test of one bug. Tests that cannot be prepared or
/// predicted, and trials whose hooks crash or time out, are reported as
/// excluded rather than categorised.
pub fn evaluate_bug(
    case: &BugCase,
    hooks: &ExecutionHooks,
    backend: &dyn Backend,
    options: &BugEvalOptions,
) -> Result<(Vec<TrialOutcome>, Vec<Excluded>), BugError> {
    case.validate()?;
    let mut trials = Vec::new();
    let mut excluded = Vec::new();
    for trigger in &case.trigger_tests {
        let label = format!("{}.{}", trigger.test_class, trigger.test_method);
        let exclude = |reason: String| Excluded {
            bug_id: case.bug_id.clone(),
            test: label.clone(),
            reason,
        };
        let target = match prepare_target(case, trigger) {
            Ok(t) => t,
            Err(e) => {
                excluded.push(exclude(e.to_string()));
                continue;
            }
        };
        let classes =
            production_classes(&case.fixed_root, &case.fixed_root.join(&target.test_file));
        let focal = detect_focal_extended(
            &target.test,
            &classes,
            &case.diff_changed_methods,
            trigger.manual_focal.as_deref(),
        )
        .ok();
        let raw = sample_for(&target, focal.as_ref().map(|(m, _)| m))?;
        let sample = match options.token_form {
            TokenForm::Raw => raw,
            TokenForm::Abstract => to_abstract(&raw, None, &options.abstraction)
                .map_err(|e| BugError::InvalidCase(format!("{label}: {e}")))?,
        };
        let prediction = match predict_top_k(&sample, options.candidates_per_test.max(1), backend) {
            Ok(p) => p,
            Err(e) => {
                excluded.push(exclude(e.to_string()));
                continue;
            }
        };
        if prediction.candidates.is_empty() {
            excluded.push(exclude("no well-formed candidate".into()));
        }
        for c in &prediction.candidates {
            let Some(code) = concretize(&c.text, &sample) else {
                excluded.push(exclude(format!(
                    "candidate {:?} does not deabstract",
                    c.text
                )));
                continue;
            };
            match run_trial(case, &target, &code, hooks) {
                Ok(mut outcome) => {
                    outcome.focal_method = focal.as_ref().map(|(m, _)| m.qualified_name());
                    outcome.focal_strategy = focal.as_ref().map(|(_, s)| *s);
                    trials.push(outcome);
                }
                Err(e @ (BugError::HookCrash { .. } | BugError::HookTimeout { .. })) => {
                    excluded.push(exclude(e.to_string()));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok((trials, excluded))
}

/// Evaluates bugs in parallel; trials of one bug run one after another.
pub fn evaluate_bugs(
    cases: &[BugCase],
    hooks: &ExecutionHooks,
    backend: &dyn Backend,
    options: &BugEvalOptions,
) -> Result<BugReport, BugError> {
    hooks.validate()?;
    let per_bug: Vec<(Vec<TrialOutcome>, Vec<Excluded>)> = cases
        .par_iter()
        .map(|c| evaluate_bug(c, hooks, backend, options))
        .collect::<Result<_, _>>()?;
    let (mut trials, mut excluded) = (Vec::new(), Vec::new());
    for (t, e) in per_bug {
        trials.extend(t);
        excluded.extend(e);
    }
    let mut summary = aggregate_bugs(&trials);
    summary.bugs = cases.len();
    Ok(BugReport {
        summary,
        trials,
        excluded,
    })
}
