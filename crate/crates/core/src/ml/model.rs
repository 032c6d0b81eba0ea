//! The trained fusion bundle: standardizer, PCA, reference direction, SVM,
//! selected feature subset and per-scorer color limits, serialized as one
//! JSON document.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::features::{Feature, FeatureVector};
use super::fusion::{projection_score, PcaModel, Reference, Standardizer};
use super::linalg::column_means;
use super::svm::{svm_distance, svm_train, SvmModel, SvmParams};
use super::tune::{tune_hyperparams, DEFAULT_C_GRID, DEFAULT_FOLDS, DEFAULT_GAMMA_GRID};
use super::{require_both_classes, Label, MlError};
use crate::dsi::{calibrate_scale, ColorLimits};

pub const MODEL_SCHEMA: &str = "model-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    Pc1,
    Projection,
    SvmDistance,
}

impl Scorer {
    pub const ALL: [Scorer; 3] = [Scorer::Pc1, Scorer::Projection, Scorer::SvmDistance];

    pub fn name(self) -> &'static str {
        match self {
            Scorer::Pc1 => "pc1",
            Scorer::Projection => "projection",
            Scorer::SvmDistance => "svm_distance",
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scorer {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scorer::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                format!("unknown scorer `{s}` (expected pc1, projection or svm_distance)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MalignancyScore {
    pub pc1: f64,
    pub projection: f64,
    pub svm_distance: f64,
    pub svm_sign: f64,
}

impl MalignancyScore {
    pub fn get(&self, scorer: Scorer) -> f64 {
        match scorer {
            Scorer::Pc1 => self.pc1,
            Scorer::Projection => self.projection,
            Scorer::SvmDistance => self.svm_distance,
        }
    }
}

/// Color limits fitted to the training scores of each scorer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorerLimits {
    pub pc1: ColorLimits,
    pub projection: ColorLimits,
    pub svm_distance: ColorLimits,
}

impl ScorerLimits {
    pub fn get(&self, scorer: Scorer) -> ColorLimits {
        match scorer {
            Scorer::Pc1 => self.pc1,
            Scorer::Projection => self.projection,
            Scorer::SvmDistance => self.svm_distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        let svm = SvmParams::default();
        Self {
            c_grid: DEFAULT_C_GRID.to_vec(),
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            seed: 0,
            tolerance: svm.tolerance,
            max_iterations: svm.max_iterations,
        }
    }
}

impl TrainParams {
    pub fn svm_base(&self) -> SvmParams {
        SvmParams {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..SvmParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub schema: String,
    pub subset: Vec<Feature>,
    pub standardizer: Standardizer,
    pub pca: PcaModel,
    pub reference: Reference,
    pub svm: SvmModel,
    pub limits: ScorerLimits,
}

/// Fitted linear and kernel scorers on already-standardized rows.
pub(crate) struct Fusion {
    pub pca: PcaModel,
    pub reference: Reference,
    pub svm: Option<SvmModel>,
}

impl Fusion {
    pub fn fit(z: &[Vec<f64>], labels: &[Label], svm: Option<&SvmParams>) -> Result<Self, MlError> {
        require_both_classes(labels)?;
        let malignant: Vec<Vec<f64>> = z
            .iter()
            .zip(labels)
            .filter(|(_, l)| l.is_malignant())
            .map(|(r, _)| r.clone())
            .collect();
        let pca = PcaModel::fit(z, Some(&column_means(&malignant)))?;
        let reference = Reference::fit(z, labels)?;
        let svm = svm.map(|p| svm_train(z, labels, p)).transpose()?;
        Ok(Self {
            pca,
            reference,
            svm,
        })
    }

    pub fn score(&self, z: &[f64], scorer: Scorer) -> f64 {
        match scorer {
            Scorer::Pc1 => self.pca.pc1_score(z),
            Scorer::Projection => projection_score(z, &self.reference),
            Scorer::SvmDistance => svm_distance(self.svm.as_ref().expect("SVM fitted"), z).0,
        }
    }
}

impl TrainedModel {
    /// Standardizes the subset columns, fits PCA and the reference direction,
    /// tunes and trains the SVM, and calibrates per-scorer color limits on
    /// the training scores.
    pub fn fit(
        table: &[FeatureVector],
        labels: &[Label],
        subset: &[Feature],
        params: &TrainParams,
    ) -> Result<Self, MlError> {
        if subset.is_empty() {
            return Err(MlError::InvalidParameter("feature subset is empty".into()));
        }
        if table.len() != labels.len() {
            return Err(MlError::Shape(format!(
                "{} rows but {} labels",
                table.len(),
                labels.len()
            )));
        }
        require_both_classes(labels)?;
        let raw: Vec<Vec<f64>> = table.iter().map(|f| f.select(subset)).collect();
        let standardizer = Standardizer::fit(&raw)?;
        let z = standardizer.transform_all(&raw);
        let tuned = tune_hyperparams(
            &z,
            labels,
            &params.c_grid,
            &params.gamma_grid,
            params.folds,
            params.seed,
            &params.svm_base(),
        )?;
        let svm_params = SvmParams {
            c: tuned.c,
            gamma: tuned.gamma,
            ..params.svm_base()
        };
        log::info!(
            "SVM hyperparameters: C = {}, gamma = {}",
            tuned.c,
            tuned.gamma
        );
        let fusion = Fusion::fit(&z, labels, Some(&svm_params))?;
        let scores: Vec<[f64; 3]> = z
            .iter()
            .map(|r| Scorer::ALL.map(|s| fusion.score(r, s)))
            .collect();
        let limit = |k: usize| -> Result<ColorLimits, MlError> {
            let col: Vec<f64> = scores.iter().map(|s| s[k]).collect();
            calibrate_scale(&col).map_err(|e| MlError::TooFewSamples(e.to_string()))
        };
        let limits = ScorerLimits {
            pc1: limit(0)?,
            projection: limit(1)?,
            svm_distance: limit(2)?,
        };
        Ok(Self {
            schema: MODEL_SCHEMA.to_string(),
            subset: subset.to_vec(),
            standardizer,
            pca: fusion.pca,
            reference: fusion.reference,
            svm: fusion.svm.expect("SVM fitted"),
            limits,
        })
    }

    pub fn standardize(&self, features: &FeatureVector) -> Vec<f64> {
        self.standardizer.transform(&features.select(&self.subset))
    }

    pub fn score_standardized(&self, z: &[f64]) -> MalignancyScore {
        let (svm_distance, svm_sign) = svm_distance(&self.svm, z);
        MalignancyScore {
            pc1: self.pca.pc1_score(z),
            projection: projection_score(z, &self.reference),
            svm_distance,
            svm_sign,
        }
    }

    pub fn score(&self, features: &FeatureVector) -> MalignancyScore {
        self.score_standardized(&self.standardize(features))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelIoError> {
        let model: TrainedModel =
            serde_json::from_str(text).map_err(|e| ModelIoError::Format(e.to_string()))?;
        if model.schema != MODEL_SCHEMA {
            return Err(ModelIoError::Format(format!(
                "unsupported model schema `{}` (expected {MODEL_SCHEMA})",
                model.schema
            )));
        }
        let d = model.subset.len();
        if model.standardizer.mean.len() != d
            || model.reference.direction.len() != d
            || model.pca.mean.len() != d
        {
            return Err(ModelIoError::Format(
                "model dimensions disagree with its subset".into(),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelIoError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| ModelIoError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, ModelIoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelIoError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("cannot access model file {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("invalid model file: {0}")]
    Format(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn toy_table(n: usize, seed: u64) -> (Vec<FeatureVector>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|i| {
                let l = if i % 2 == 0 {
                    Label::Benign
                } else {
                    Label::Malignant
                };
                let s = l.sign();
                let mut v = [0.0; 10];
                for (j, slot) in v.iter_mut().enumerate().take(9) {
                    let shift = if j < 5 { 1.2 * s } else { 0.0 };
                    *slot = 10.0 * (j + 1) as f64 + shift + nd.sample(&mut rng);
                }
                (FeatureVector(v), l)
            })
            .unzip()
    }

    #[test]
    fn scorers_parse_and_display() {
        for s in Scorer::ALL {
            assert_eq!(s.to_string().parse::<Scorer>().unwrap(), s);
        }
        assert!("svm".parse::<Scorer>().is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let (t, l) = toy_table(60, 3);
        let p = TrainParams {
            c_grid: vec![1.0],
            gamma_grid: vec![0.1],
            ..TrainParams::default()
        };
        let m = TrainedModel::fit(&t, &l, &Feature::DEFAULT_SUBSET, &p).unwrap();
        let back = TrainedModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        for f in &t {
            let (a, b) = (m.score(f), back.score(f));
            assert_eq!(a.svm_distance.to_bits(), b.svm_distance.to_bits());
            assert_eq!(a.pc1.to_bits(), b.pc1.to_bits());
        }
        assert!(TrainedModel::from_json("{}").is_err());
    }

    #[test]
    fn malignant_scores_are_higher_on_average() {
        let (t, l) = toy_table(80, 5);
        let m =
            TrainedModel::fit(&t, &l, &Feature::DEFAULT_SUBSET, &TrainParams::default()).unwrap();
        for scorer in Scorer::ALL {
            let mean = |want: Label| {
                let v: Vec<f64> = t
                    .iter()
                    .zip(&l)
                    .filter(|(_, x)| **x == want)
                    .map(|(f, _)| m.score(f).get(scorer))
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            assert!(mean(Label::Malignant) > mean(Label::Benign), "{scorer}");
        }
    }

    #[test]
    fn reserve_slot_cannot_be_standardized() {
        let (t, l) = toy_table(40, 1);
        let err = TrainedModel::fit(
            &t,
            &l,
            &[Feature::BurrB, Feature::Reserve],
            &TrainParams::default(),
        )
        .unwrap_err();
        assert!(matches!(err, MlError::ZeroVariance(1)));
    }

    #[test]
    fn scale_invariance_of_pc1_and_svm_sign() {
        let (t, l) = toy_table(60, 9);
        let scaled: Vec<FeatureVector> = t
            .iter()
            .map(|f| {
                let mut g = *f;
                g.set(Feature::BscanStd, 10.0 * f.get(Feature::BscanStd));
                g
            })
            .collect();
        let p = TrainParams::default();
        let a = TrainedModel::fit(&t, &l, &Feature::DEFAULT_SUBSET, &p).unwrap();
        let b = TrainedModel::fit(&scaled, &l, &Feature::DEFAULT_SUBSET, &p).unwrap();
        for (fa, fb) in t.iter().zip(&scaled) {
            let (sa, sb) = (a.score(fa), b.score(fb));
            assert!((sa.pc1 - sb.pc1).abs() < 1e-9);
            assert_eq!(sa.svm_sign, sb.svm_sign);
        }
    }
}
