use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, DatasetSample, InputVariant, TokenForm};
use crate::java::{join_tokens, SEPARATOR};

pub const SYSTEM_MESSAGE: &str = "You will receive two code snippets that are written in the Java programming language. \
The first code snippet contains a test method, and the second code snippet is the focal method that is exercised by the test method. \
The test method snippet contains a masked \"<ASSERTION>\" part. \
Please suggest 10 different and suitable assertions for this masked statement, ranked by their suitability. \
Only return Java code! \
Only use the JUnit assertion methods \"assertTrue\", \"assertFalse\", \"assertEquals\", \"assertNotEquals\", \"assertNull\", \"assertNotNull\", \"assertThrows\". \
Alternatively, assert expected exceptions using a try-catch and the \"fail\" method. \
Add an empty line between assertions.";

pub const PROMPT_TEMPLATE: &str =
    "Focal method: '''{{ focal_method_code }}''' Test method: '''{{ test_method_code }}'''";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub sample_id: String,
    pub system: String,
    pub prompt: String,
}

/// Instantiates the system message and template for a raw test-plus-focal
/// sample.
pub fn render_prompt(sample: &DatasetSample) -> Result<PromptRecord, CorpusError> {
    if sample.token_form != TokenForm::Raw {
        return Err(CorpusError::NotRaw(sample.sample_id.clone()));
    }
    let sep = sample.masked_input.iter().position(|t| t == SEPARATOR);
    let (focal, test) = match (sample.input_variant, sep) {
        (InputVariant::TestPlusFocal, Some(i)) => {
            (&sample.masked_input[..i], &sample.masked_input[i + 1..])
        }
        _ => return Err(CorpusError::MissingFocal(sample.sample_id.clone())),
    };
    let prompt = PROMPT_TEMPLATE
        .replace("{{ focal_method_code }}", &join_tokens(focal))
        .replace("{{ test_method_code }}", &join_tokens(test));
    Ok(PromptRecord {
        sample_id: sample.sample_id.clone(),
        system: SYSTEM_MESSAGE.to_string(),
        prompt,
    })
}

/// Writes one prompt record per line. Fails before writing anything if a
/// sample cannot be rendered.
pub fn export_prompts(samples: &[DatasetSample], path: &Path) -> Result<(), CorpusError> {
    let records = samples
        .iter()
        .map(render_prompt)
        .collect::<Result<Vec<_>, _>>()?;
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        for r in &records {
            serde_json::to_writer(&mut *out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| CorpusError::io(path, e))
}
