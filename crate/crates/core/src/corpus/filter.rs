use super::{
    CorpusError, CorpusStats, DatasetSample, InputVariant, Subset, TestFocalPair, TokenForm,
};
use crate::abstraction::{abstract_sequence, abstract_truth, truncate_input, AbstractionConfig};
use crate::java::{
    check_syntax_tokens, find_assertions, is_acceptable_assertion, mask_assertion, texts, tokenize,
    AssertionSite, MethodUnit, SourceToken, SEPARATOR,
};

/// Assertion sites of `test` that can serve as prediction targets: the right
/// arity for their kind and syntactically well-formed on their own.
pub fn acceptable_sites(test: &MethodUnit) -> Vec<AssertionSite> {
    find_assertions(test)
        .into_iter()
        .filter(|s| {
            is_acceptable_assertion(s)
                && check_syntax_tokens(&test.body_tokens[s.token_span.clone()])
        })
        .collect()
}

/// Applies the corpus filters in order: constructor focal, unparseable
/// classes, test length, then the assertion-count cap of `subset`.
pub fn filter_pairs(
    pairs: Vec<TestFocalPair>,
    subset: Subset,
    max_chars: usize,
) -> (Vec<TestFocalPair>, CorpusStats) {
    let mut stats = CorpusStats {
        input_pairs: pairs.len(),
        ..CorpusStats::default()
    };
    let mut kept = Vec::new();
    for pair in pairs {
        if pair.focal.as_ref().is_some_and(|f| f.is_constructor) {
            stats.constructor_dropped += 1;
            continue;
        }
        if !pair.classes_parsed {
            stats.parse_dropped += 1;
            continue;
        }
        if pair.test.source.chars().count() > max_chars {
            stats.length_dropped += 1;
            continue;
        }
        let sites = acceptable_sites(&pair.test);
        if sites.is_empty() {
            stats.no_assertion_dropped += 1;
            continue;
        }
        if sites.len() > subset.cap() {
            stats.over_cap_dropped += 1;
            continue;
        }
        for s in &sites {
            *stats.assertion_frequency.entry(s.kind).or_default() += 1;
        }
        stats.exploded_samples += sites.len();
        kept.push(pair);
    }
    stats.kept_pairs = kept.len();
    (kept, stats)
}

fn base_id(pair: &TestFocalPair) -> String {
    format!(
        "{}:{}@{}",
        pair.repo_id,
        pair.test.identity(),
        pair.test.source_span.0
    )
}

/// Raw samples for every acceptable assertion of the pair: always a
/// `TestOnly` sample, plus a `TestPlusFocal` sample (focal, `<SEP>`, test)
/// when the focal method is known.
pub fn explode_assertions(
    pair: &TestFocalPair,
    subset: Subset,
) -> Result<Vec<DatasetSample>, CorpusError> {
    let base = base_id(pair);
    let group_key = pair.group_key();
    let focal = pair.focal.as_ref().map(|f| texts(&f.tokens()));
    let mut out = Vec::new();
    for (k, site) in acceptable_sites(&pair.test).iter().enumerate() {
        let (masked_body, truth) = mask_assertion(&pair.test, site)?;
        let mut test = texts(&pair.test.signature_tokens);
        test.extend(texts(&masked_body));
        let truth = texts(&truth);
        let mut sample = DatasetSample {
            sample_id: format!("{base}#{k}/t"),
            input_variant: InputVariant::TestOnly,
            token_form: TokenForm::Raw,
            masked_input: test.clone(),
            truth_assertion: truth.clone(),
            dictionary: None,
            assertion_kind: site.kind,
            group_key: group_key.clone(),
            subset,
        };
        if let Some(f) = &focal {
            let mut input = f.clone();
            input.push(SEPARATOR.to_string());
            input.extend(test);
            out.push(sample.clone());
            sample.sample_id = format!("{base}#{k}/tf");
            sample.input_variant = InputVariant::TestPlusFocal;
            sample.masked_input = input;
        }
        out.push(sample);
    }
    Ok(out)
}

fn relex(tokens: &[String]) -> Result<Vec<SourceToken>, CorpusError> {
    Ok(tokenize(&tokens.join(" "))?)
}

/// Converts a raw sample to abstract form, truncated to the input budget.
pub fn to_abstract(
    sample: &DatasetSample,
    class_context: Option<&[SourceToken]>,
    config: &AbstractionConfig,
) -> Result<DatasetSample, CorpusError> {
    if sample.token_form != TokenForm::Raw {
        return Err(CorpusError::NotRaw(sample.sample_id.clone()));
    }
    let input = relex(&sample.masked_input)?;
    let (focal, test) = match input.iter().position(|t| t.is(SEPARATOR)) {
        Some(sep) => (Some(&input[..sep]), &input[sep + 1..]),
        None => (None, &input[..]),
    };
    let (stream, mut dict) = abstract_sequence(test, focal, class_context, config)?;
    let truth = abstract_truth(&relex(&sample.truth_assertion)?, &mut dict);
    Ok(DatasetSample {
        token_form: TokenForm::Abstract,
        masked_input: truncate_input(&stream, config)?,
        truth_assertion: truth,
        dictionary: Some(dict),
        ..sample.clone()
    })
}
