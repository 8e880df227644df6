//! Line-delimited JSON dataset files. Token lists are stored space-joined and
//! re-lexed on import.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, DatasetSample, InputVariant, Subset, TokenForm};
use crate::abstraction::AbstractionDictionary;
use crate::java::{texts, tokenize, AssertionKind, PLACEHOLDER};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    sample_id: String,
    input_variant: InputVariant,
    token_form: TokenForm,
    masked_input: String,
    truth_assertion: String,
    dictionary: Option<AbstractionDictionary>,
    assertion_kind: AssertionKind,
    group_key: String,
    subset: Subset,
}

impl From<&DatasetSample> for SampleRecord {
    fn from(s: &DatasetSample) -> Self {
        Self {
            sample_id: s.sample_id.clone(),
            input_variant: s.input_variant,
            token_form: s.token_form,
            masked_input: s.masked_input.join(" "),
            truth_assertion: s.truth_assertion.join(" "),
            dictionary: s.dictionary.clone(),
            assertion_kind: s.assertion_kind,
            group_key: s.group_key.clone(),
            subset: s.subset,
        }
    }
}

fn split_tokens(text: &str) -> Result<Vec<String>, String> {
    tokenize(text).map(|t| texts(&t)).map_err(|e| e.to_string())
}

impl SampleRecord {
    fn into_sample(self) -> Result<DatasetSample, String> {
        let masked_input = split_tokens(&self.masked_input)?;
        let placeholders = masked_input.iter().filter(|t| *t == PLACEHOLDER).count();
        if placeholders != 1 {
            return Err(format!("masked_input has {placeholders} placeholders"));
        }
        if self.token_form == TokenForm::Abstract && self.dictionary.is_none() {
            return Err("abstract sample without dictionary".into());
        }
        Ok(DatasetSample {
            sample_id: self.sample_id,
            input_variant: self.input_variant,
            token_form: self.token_form,
            masked_input,
            truth_assertion: split_tokens(&self.truth_assertion)?,
            dictionary: self.dictionary,
            assertion_kind: self.assertion_kind,
            group_key: self.group_key,
            subset: self.subset,
        })
    }
}

pub fn write_samples<W: Write>(samples: &[DatasetSample], mut out: W) -> std::io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, &SampleRecord::from(s))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses one sample per non-blank line; line numbers in errors are 1-based.
pub fn read_samples<R: BufRead>(input: R) -> Result<Vec<DatasetSample>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = serde_json::from_str::<SampleRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(SampleRecord::into_sample)
            .map_err(|reason| CorpusError::MalformedRecord {
                line: line_no,
                reason,
            })?;
        out.push(sample);
    }
    Ok(out)
}

pub fn export_samples(samples: &[DatasetSample], path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_samples(samples, BufWriter::new(file)).map_err(|e| CorpusError::io(path, e))
}

pub fn import_samples(path: &Path) -> Result<Vec<DatasetSample>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_samples(BufReader::new(file))
}
