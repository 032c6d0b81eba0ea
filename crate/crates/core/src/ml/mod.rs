//! Feature fusion and classification: standardization, PCA, reference
//! projection, RBF-kernel SVM, hyperparameter tuning and exhaustive
//! feature-subset selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod features;
pub mod fusion;
pub mod linalg;
pub mod model;
pub mod select;
pub mod svm;
pub mod tune;

pub use features::{extract_features, ExtractionParams, Feature, FeatureError, FeatureVector};
pub use fusion::{projection_score, PcaModel, Reference, Standardizer};
pub use model::{MalignancyScore, Scorer, TrainedModel};
pub use select::{select_features, SelectionResult};
pub use svm::{svm_distance, svm_train, SvmModel, SvmParams};
pub use tune::{tune_hyperparams, TuneResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malignant,
}

impl Label {
    /// −1 for benign, +1 for malignant.
    pub fn sign(self) -> f64 {
        match self {
            Label::Benign => -1.0,
            Label::Malignant => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Benign => Label::Malignant,
            Label::Malignant => Label::Benign,
        }
    }

    pub fn is_malignant(self) -> bool {
        self == Label::Malignant
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Benign => "benign",
            Label::Malignant => "malignant",
        })
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "benign" => Ok(Label::Benign),
            "malignant" => Ok(Label::Malignant),
            _ => Err(format!("unknown label `{s}`")),
        }
    }
}

#[derive(Debug, Error)]
pub enum MlError {
    #[error("empty input")]
    EmptyInput,
    #[error("feature column {0} has zero variance")]
    ZeroVariance(usize),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("need both classes")]
    SingleClass,
    #[error("degenerate reference: class means coincide")]
    DegenerateReference,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("SMO did not converge after {iterations} iterations (KKT gap {gap:.3e}, tolerance {tolerance:.1e})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        tolerance: f64,
    },
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
}

pub(crate) fn count_classes(labels: &[Label]) -> (usize, usize) {
    let pos = labels.iter().filter(|l| l.is_malignant()).count();
    (labels.len() - pos, pos)
}

pub(crate) fn require_both_classes(labels: &[Label]) -> Result<(), MlError> {
    match count_classes(labels) {
        (0, _) | (_, 0) => Err(MlError::SingleClass),
        _ => Ok(()),
    }
}
