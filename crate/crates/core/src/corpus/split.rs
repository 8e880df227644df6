use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CorpusError, DatasetSample, SplitSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

/// Uniform value in `[0, 1)` derived from the seed and group key.
fn unit_hash(seed: u64, group_key: &str) -> f64 {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(group_key.as_bytes())
        .finalize();
    let head: [u8; 8] = digest[..8].try_into().expect("sha256 yields 32 bytes");
    // 53 high bits give an exactly representable fraction.
    (u64::from_be_bytes(head) >> 11) as f64 / (1u64 << 53) as f64
}

/// Split a group is assigned to; depends only on `(seed, group_key)`.
pub fn split_of(group_key: &str, spec: &SplitSpec) -> Split {
    let u = unit_hash(spec.seed, group_key);
    let (train, validation, _) = spec.ratios;
    if u < train {
        Split::Train
    } else if u < train + validation {
        Split::Validation
    } else {
        Split::Test
    }
}

/// Train, validation and test samples.
pub type SplitSets = (Vec<DatasetSample>, Vec<DatasetSample>, Vec<DatasetSample>);

/// Partitions samples by group into `(train, validation, test)`, preserving
/// input order inside each split.
pub fn split_corpus(
    samples: Vec<DatasetSample>,
    spec: &SplitSpec,
) -> Result<SplitSets, CorpusError> {
    spec.validate()?;
    let groups: BTreeSet<&str> = samples.iter().map(|s| s.group_key.as_str()).collect();
    if groups.len() < 3 {
        return Err(CorpusError::DegenerateCorpus(groups.len()));
    }
    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for s in samples {
        match split_of(&s.group_key, spec) {
            Split::Train => train.push(s),
            Split::Validation => validation.push(s),
            Split::Test => test.push(s),
        }
    }
    Ok((train, validation, test))
}
