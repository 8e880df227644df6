//! Scanning a directory of repositories into test/focal pairs and building the
//! sample sets.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::split::{split_of, Split};
use super::{
    explode_assertions, filter_pairs, match_focal_class, match_focal_method, strip_test_affix,
    to_abstract, CorpusError, CorpusStats, DatasetSample, FocalDetection, InputVariant, SplitSpec,
    Subset, TestFocalPair, TokenForm,
};
use crate::abstraction::AbstractionConfig;
use crate::java::{parse_classes, tokenize, ClassUnit, MethodUnit, TokenKind};

#[derive(Debug, Default)]
pub struct CorpusScan {
    pub pairs: Vec<TestFocalPair>,
    pub java_files: usize,
    pub unparseable_files: Vec<PathBuf>,
}

enum ClassRef {
    Parsed(usize, usize),
    Unparsed,
}

struct SourceFile {
    path: PathBuf,
    classes: Option<Vec<ClassUnit>>,
    /// `(name, package)` of every declared class, recovered leniently when
    /// the file does not parse.
    inventory: Vec<(String, String)>,
}

fn lenient_inventory(path: &Path, source: &str) -> Vec<(String, String)> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let Ok(toks) = tokenize(source) else {
        let package = source
            .lines()
            .map(str::trim)
            .find_map(|l| l.strip_prefix("package "))
            .map(|p| p.trim_end_matches(';').trim().to_string())
            .unwrap_or_default();
        return vec![(stem, package)];
    };
    let mut package = String::new();
    if let Some(start) = toks.iter().position(|t| t.is("package")) {
        package = toks[start + 1..]
            .iter()
            .take_while(|t| !t.is(";"))
            .map(|t| t.text.as_str())
            .collect();
    }
    let names: Vec<(String, String)> = toks
        .windows(2)
        .filter(|w| {
            matches!(w[0].text.as_str(), "class" | "interface" | "enum")
                && w[0].kind == TokenKind::Keyword
                && w[1].kind == TokenKind::Identifier
        })
        .map(|w| (w[1].text.clone(), package.clone()))
        .collect();
    if names.is_empty() {
        vec![(stem, package)]
    } else {
        names
    }
}

fn load(path: PathBuf) -> Result<SourceFile, CorpusError> {
    let bytes = fs::read(&path).map_err(|e| CorpusError::io(&path, e))?;
    let source = String::from_utf8_lossy(&bytes);
    Ok(match parse_classes(&source) {
        Ok(classes) => SourceFile {
            inventory: classes
                .iter()
                .map(|c| (c.name.clone(), c.package.clone()))
                .collect(),
            classes: Some(classes),
            path,
        },
        Err(_) => SourceFile {
            inventory: lenient_inventory(&path, &source),
            classes: None,
            path,
        },
    })
}

fn is_test_method(m: &MethodUnit) -> bool {
    !m.is_constructor
        && (m.has_annotation("Test") || (m.name.starts_with("test") && m.params.is_empty()))
}

fn pair_repo(repo_id: &str, files: &[SourceFile]) -> Vec<TestFocalPair> {
    let mut names: Vec<(&str, &str)> = Vec::new();
    let mut refs = Vec::new();
    for (fi, f) in files.iter().enumerate() {
        match &f.classes {
            Some(classes) => {
                for (ci, c) in classes.iter().enumerate() {
                    names.push((&c.name, &c.package));
                    refs.push(ClassRef::Parsed(fi, ci));
                }
            }
            None => {
                for (n, p) in &f.inventory {
                    names.push((n, p));
                    refs.push(ClassRef::Unparsed);
                }
            }
        }
    }
    let mut pairs = Vec::new();
    for f in files {
        for test_class in f.classes.iter().flatten() {
            if strip_test_affix(&test_class.name).is_none() {
                continue;
            }
            let matched = match_focal_class(&test_class.name, &test_class.package, &names);
            let focal_class = matched.and_then(|i| match refs[i] {
                ClassRef::Parsed(fi, ci) => files[fi].classes.as_ref().map(|c| &c[ci]),
                ClassRef::Unparsed => None,
            });
            let focal_unparsed = matched.is_some() && focal_class.is_none();
            for test in test_class.methods.iter().filter(|m| is_test_method(m)) {
                let (focal, how) = match focal_class {
                    Some(fc) => match_focal_method(test, &fc.methods),
                    None => (None, FocalDetection::None),
                };
                let mut pair = TestFocalPair::new(test.clone(), focal, how, repo_id);
                pair.classes_parsed = !focal_unparsed;
                pair.class_context = test_class.member_tokens.clone();
                if let Some(fc) = focal_class {
                    pair.class_context.extend(fc.member_tokens.iter().cloned());
                }
                pairs.push(pair);
            }
        }
    }
    pairs
}

/// Pairs every test method under `root`. Each immediate subdirectory is one
/// repository; files directly under `root` form a repository named `.`.
pub fn scan_corpus(root: &Path) -> Result<CorpusScan, CorpusError> {
    let mut repos: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            CorpusError::io(path, e.into())
        })?;
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().is_none_or(|x| x != "java") {
            continue;
        }
        let rel = path.strip_prefix(root).unwrap_or(path);
        let mut comps = rel.components();
        let repo = match (comps.next(), comps.next()) {
            (Some(first), Some(_)) => first.as_os_str().to_string_lossy().into_owned(),
            _ => ".".to_string(),
        };
        repos.entry(repo).or_default().push(path.to_path_buf());
    }
    if repos.is_empty() {
        return Err(CorpusError::EmptyCorpus(root.to_path_buf()));
    }
    let per_repo: Vec<(Vec<TestFocalPair>, usize, Vec<PathBuf>)> = repos
        .into_par_iter()
        .map(|(repo, paths)| {
            let files = paths.into_iter().map(load).collect::<Result<Vec<_>, _>>()?;
            let bad: Vec<PathBuf> = files
                .iter()
                .filter(|f| f.classes.is_none())
                .map(|f| f.path.clone())
                .collect();
            Ok((pair_repo(&repo, &files), files.len(), bad))
        })
        .collect::<Result<_, CorpusError>>()?;
    let mut scan = CorpusScan::default();
    for (pairs, n, bad) in per_repo {
        scan.pairs.extend(pairs);
        scan.java_files += n;
        scan.unparseable_files.extend(bad);
    }
    Ok(scan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    pub subset: Subset,
    pub max_chars: usize,
    pub split: SplitSpec,
    pub abstraction: AbstractionConfig,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            subset: Subset::UpToFive,
            max_chars: 10_000,
            split: SplitSpec::default(),
            abstraction: AbstractionConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltCorpus {
    pub stats: CorpusStats,
    /// Raw samples in pair order.
    pub raw: Vec<DatasetSample>,
    /// Abstract counterparts of `raw`, index-aligned.
    pub abstracted: Vec<DatasetSample>,
}

/// Filters the scanned pairs and produces raw and abstract samples. Sample
/// ids that collide (same class in two files) get a `~n` suffix.
pub fn build_corpus(scan: CorpusScan, options: &BuildOptions) -> Result<BuiltCorpus, CorpusError> {
    let (pairs, mut stats) = filter_pairs(scan.pairs, options.subset, options.max_chars);
    stats.unparseable_files = scan.unparseable_files.len();
    let per_pair: Vec<Vec<(DatasetSample, DatasetSample)>> = pairs
        .par_iter()
        .map(|pair| {
            let context = Some(pair.class_context.as_slice());
            explode_assertions(pair, options.subset)?
                .into_iter()
                .map(|raw| {
                    let abs = to_abstract(&raw, context, &options.abstraction)?;
                    Ok((raw, abs))
                })
                .collect()
        })
        .collect::<Result<_, CorpusError>>()?;
    let mut seen: HashMap<String, usize> = HashMap::new();
    let (mut raw, mut abstracted) = (Vec::new(), Vec::new());
    for (mut r, mut a) in per_pair.into_iter().flatten() {
        let n = seen.entry(r.sample_id.clone()).or_default();
        if *n > 0 {
            r.sample_id = format!("{}~{}", r.sample_id, n);
            a.sample_id.clone_from(&r.sample_id);
        }
        *n += 1;
        raw.push(r);
        abstracted.push(a);
    }
    Ok(BuiltCorpus {
        stats,
        raw,
        abstracted,
    })
}

fn variant_name(v: InputVariant) -> &'static str {
    match v {
        InputVariant::TestOnly => "test_only",
        InputVariant::TestPlusFocal => "test_plus_focal",
    }
}

fn form_name(f: TokenForm) -> &'static str {
    match f {
        TokenForm::Raw => "raw",
        TokenForm::Abstract => "abstract",
    }
}

/// File name used for one split of one variant/form stream.
pub fn dataset_file_name(split: Split, variant: InputVariant, form: TokenForm) -> String {
    format!(
        "{}.{}.{}.jsonl",
        split.name(),
        variant_name(variant),
        form_name(form)
    )
}

impl BuiltCorpus {
    /// Splits by group and writes every split/variant/form combination plus
    /// `stats.json` into `dir`. Returns the written paths in order.
    pub fn write(&self, dir: &Path, spec: &SplitSpec) -> Result<Vec<PathBuf>, CorpusError> {
        spec.validate()?;
        let groups: std::collections::BTreeSet<&str> =
            self.raw.iter().map(|s| s.group_key.as_str()).collect();
        if groups.len() < 3 {
            return Err(CorpusError::DegenerateCorpus(groups.len()));
        }
        fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
        let mut written = Vec::new();
        for (form, samples) in [
            (TokenForm::Raw, &self.raw),
            (TokenForm::Abstract, &self.abstracted),
        ] {
            for variant in [InputVariant::TestOnly, InputVariant::TestPlusFocal] {
                for split in Split::ALL {
                    let part: Vec<DatasetSample> = samples
                        .iter()
                        .filter(|s| {
                            s.input_variant == variant && split_of(&s.group_key, spec) == split
                        })
                        .cloned()
                        .collect();
                    let path = dir.join(dataset_file_name(split, variant, form));
                    super::export_samples(&part, &path)?;
                    written.push(path);
                }
            }
        }
        let stats_path = dir.join("stats.json");
        let json = serde_json::to_string_pretty(&self.stats).expect("stats serialize");
        fs::write(&stats_path, json + "\n").map_err(|e| CorpusError::io(&stats_path, e))?;
        written.push(stats_path);
        Ok(written)
    }
}
