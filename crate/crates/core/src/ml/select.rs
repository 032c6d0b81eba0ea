//! Exhaustive feature-subset search driven by training-set AUC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{Feature, FeatureVector};
use super::fusion::Standardizer;
use super::model::{Fusion, Scorer};
use super::svm::SvmParams;
use super::{count_classes, Label, MlError};
use crate::eval;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub subset: Vec<Feature>,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub scorer: Scorer,
    pub best: SubsetScore,
    /// Number of non-empty subsets enumerated.
    pub enumerated: usize,
    /// Subsets that could not be scored (e.g. a zero-variance column).
    pub skipped: usize,
    /// Every scored subset, in enumeration order.
    pub scores: Vec<SubsetScore>,
}

/// `true` when `a` should be preferred over `b`: higher AUC, then fewer
/// features, then the lexicographically smaller feature-index list.
fn better(a: &SubsetScore, b: &SubsetScore) -> bool {
    if a.auc != b.auc {
        return a.auc > b.auc;
    }
    if a.subset.len() != b.subset.len() {
        return a.subset.len() < b.subset.len();
    }
    a.subset < b.subset
}

fn score_subset(
    table: &[FeatureVector],
    labels: &[Label],
    subset: &[Feature],
    scorer: Scorer,
    svm: &SvmParams,
) -> Result<f64, MlError> {
    let raw: Vec<Vec<f64>> = table.iter().map(|f| f.select(subset)).collect();
    let z = Standardizer::fit(&raw)?.transform_all(&raw);
    let fusion = Fusion::fit(&z, labels, (scorer == Scorer::SvmDistance).then_some(svm))?;
    let scores: Vec<f64> = z.iter().map(|r| fusion.score(r, scorer)).collect();
    eval::auc(&scores, labels).map_err(|e| MlError::InvalidParameter(e.to_string()))
}

/// Scores all `2^k − 1` non-empty subsets of `candidates` on the training
/// table and returns the best. Subsets whose scorer fails are skipped with
/// a warning.
pub fn select_features(
    table: &[FeatureVector],
    labels: &[Label],
    candidates: &[Feature],
    scorer: Scorer,
    svm: &SvmParams,
) -> Result<SelectionResult, MlError> {
    if candidates.len() < 2 {
        return Err(MlError::InvalidParameter(
            "feature selection needs >= 2 candidate features".into(),
        ));
    }
    if candidates.len() > 20 {
        return Err(MlError::InvalidParameter(
            "too many candidate features for exhaustive search".into(),
        ));
    }
    if table.len() != labels.len() {
        return Err(MlError::Shape(format!(
            "{} rows but {} labels",
            table.len(),
            labels.len()
        )));
    }
    let (neg, pos) = count_classes(labels);
    if neg.min(pos) < 10 {
        return Err(MlError::TooFewSamples(format!(
            "feature selection needs >= 10 samples per class, got {neg} benign / {pos} malignant"
        )));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort();
    sorted.dedup();
    let total = (1usize << sorted.len()) - 1;
    let results: Vec<Option<SubsetScore>> = (1..=total)
        .into_par_iter()
        .map(|mask| {
            let subset: Vec<Feature> = (0..sorted.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| sorted[b])
                .collect();
            match score_subset(table, labels, &subset, scorer, svm) {
                Ok(auc) => Some(SubsetScore { subset, auc }),
                Err(e) => {
                    let names: Vec<&str> = subset.iter().map(|f| f.name()).collect();
                    log::warn!("subset [{}] skipped: {e}", names.join(", "));
                    None
                }
            }
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let scores: Vec<SubsetScore> = results.into_iter().flatten().collect();
    let best = scores
        .iter()
        .fold(None::<&SubsetScore>, |acc, s| match acc {
            Some(b) if !better(s, b) => Some(b),
            _ => Some(s),
        })
        .cloned()
        .ok_or_else(|| MlError::InvalidParameter("no feature subset could be scored".into()))?;
    Ok(SelectionResult {
        scorer,
        best,
        enumerated: total,
        skipped,
        scores,
    })
}
