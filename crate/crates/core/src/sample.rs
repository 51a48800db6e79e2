use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::{IrImage, Scalar, TargetMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Where a textual description came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSource {
    /// Generated by a vision-language model.
    Vlm,
    /// Synthesized from a template (e.g. the offline scene generator).
    Template,
    Human,
}

/// Prompting style used when a description was requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    /// Expert system role + task instruction.
    System,
    /// Task instruction preceded by worked image/description exemplars.
    FewShot,
    /// Bare task instruction.
    ZeroShot,
}

/// Number of whitespace-delimited tokens in `text`.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Textual description localizing the target in an image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguagePrior {
    pub text: String,
    /// Cached whitespace token count of `text`.
    pub word_count: usize,
    pub source: PriorSource,
    pub style: PromptStyle,
}

impl LanguagePrior {
    pub fn new(text: impl Into<String>, source: PriorSource, style: PromptStyle) -> Self {
        let text = text.into();
        let word_count = word_count(&text);
        Self {
            text,
            word_count,
            source,
            style,
        }
    }
}

/// One dataset element: image, optional ground truth, optional description.
#[derive(Debug, Clone)]
pub struct Sample<S: Scalar = f32> {
    pub image: IrImage<S>,
    /// Required for training; optional at inference.
    pub mask: Option<TargetMask>,
    /// Absent in image-only mode.
    pub prior: Option<LanguagePrior>,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    LangirIrstd,
    LangirSirst,
    Synthetic,
}

/// Which ids belong to which split of an on-disk dataset.
///
/// The id lists mirror the dataset's `trainval.txt` / `test.txt`. Resolution
/// of ids to files (and the disjointness check) happens in the dataset
/// reader, which knows the subset's naming convention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root_path: PathBuf,
    pub subset: Subset,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl DatasetManifest {
    /// Ids present in both splits (invariant: should be empty).
    pub fn overlapping_ids(&self) -> Vec<String> {
        self.train_ids
            .iter()
            .filter(|id| self.test_ids.contains(id))
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_count_splits_on_any_whitespace() {
        assert_eq!(word_count("upper left corner"), 3);
        assert_eq!(word_count("  a\t b \n c  "), 3);
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("   "), 0);
    }

    #[test]
    fn prior_caches_its_word_count() {
        let p = LanguagePrior::new(
            "small target near the upper edge",
            PriorSource::Vlm,
            PromptStyle::System,
        );
        assert_eq!(p.word_count, 6);
    }

    #[test]
    fn manifest_overlap_detection() {
        let m = DatasetManifest {
            root_path: PathBuf::from("/tmp/x"),
            subset: Subset::Synthetic,
            train_ids: vec!["1".into(), "2".into()],
            test_ids: vec!["2".into(), "3".into()],
        };
        assert_eq!(m.overlapping_ids(), vec!["2".to_string()]);
    }
}
