//! Grid search over the SVM box constraint and kernel width with stratified
//! k-fold cross-validation and a one-standard-error preference for smooth
//! decision surfaces.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svm::{svm_train, SvmParams};
use super::{count_classes, require_both_classes, Label, MlError};

pub const DEFAULT_C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_GAMMA_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: f64,
    pub mean_accuracy: f64,
    /// Standard error of the fold accuracies.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub c: f64,
    pub gamma: f64,
    pub folds_used: usize,
    pub grid: Vec<GridPoint>,
}

/// Assigns each sample a fold so that both classes are spread evenly.
/// Folds are reduced (with a warning) when the smaller class cannot fill
/// every fold.
pub fn stratified_folds(
    labels: &[Label],
    folds: usize,
    seed: u64,
) -> Result<(Vec<usize>, usize), MlError> {
    require_both_classes(labels)?;
    let (neg, pos) = count_classes(labels);
    let smallest = neg.min(pos);
    if smallest < 2 {
        return Err(MlError::TooFewSamples(format!(
            "cross-validation needs >= 2 samples per class, smallest class has {smallest}"
        )));
    }
    let k = folds.max(2);
    let k = if smallest < k {
        log::warn!(
            "reducing cross-validation from {k} to {smallest} folds: a fold would miss a class"
        );
        smallest
    } else {
        k
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    for class in [Label::Benign, Label::Malignant] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (p, i) in idx.into_iter().enumerate() {
            fold[i] = p % k;
        }
    }
    Ok((fold, k))
}

fn cv_accuracy(
    x: &[Vec<f64>],
    labels: &[Label],
    fold: &[usize],
    k: usize,
    params: &SvmParams,
) -> Result<Vec<f64>, MlError> {
    (0..k)
        .map(|f| {
            let (mut xtr, mut ytr, mut xte, mut yte) =
                (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..x.len() {
                if fold[i] == f {
                    xte.push(x[i].clone());
                    yte.push(labels[i]);
                } else {
                    xtr.push(x[i].clone());
                    ytr.push(labels[i]);
                }
            }
            let model = svm_train(&xtr, &ytr, params)?;
            let correct = xte
                .iter()
                .zip(&yte)
                .filter(|(xi, yi)| model.predict(xi) == **yi)
                .count();
            Ok(correct as f64 / xte.len() as f64)
        })
        .collect()
}

/// Cross-validated grid search. Among grid points whose mean accuracy lies
/// within one standard error of the best, the smallest γ and then the
/// smallest C win.
pub fn tune_hyperparams(
    x: &[Vec<f64>],
    labels: &[Label],
    c_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
    seed: u64,
    base: &SvmParams,
) -> Result<TuneResult, MlError> {
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(MlError::InvalidParameter(
            "hyperparameter grids must be non-empty".into(),
        ));
    }
    if x.len() != labels.len() {
        return Err(MlError::Shape(format!(
            "{} rows but {} labels",
            x.len(),
            labels.len()
        )));
    }
    if c_grid.len() == 1 && gamma_grid.len() == 1 {
        require_both_classes(labels)?;
        return Ok(TuneResult {
            c: c_grid[0],
            gamma: gamma_grid[0],
            folds_used: 0,
            grid: Vec::new(),
        });
    }
    let (fold, k) = stratified_folds(labels, folds, seed)?;
    let points: Vec<(f64, f64)> = c_grid
        .iter()
        .flat_map(|&c| gamma_grid.iter().map(move |&g| (c, g)))
        .collect();
    let evaluated: Vec<Option<GridPoint>> = points
        .par_iter()
        .map(|&(c, gamma)| {
            let params = SvmParams { c, gamma, ..*base };
            match cv_accuracy(x, labels, &fold, k, &params) {
                Ok(acc) => {
                    let n = acc.len() as f64;
                    let mean = acc.iter().sum::<f64>() / n;
                    let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
                    Some(GridPoint {
                        c,
                        gamma,
                        mean_accuracy: mean,
                        std_error: (var / n).sqrt(),
                    })
                }
                Err(e) => {
                    log::warn!("grid point C={c}, gamma={gamma} skipped: {e}");
                    None
                }
            }
        })
        .collect();
    let grid: Vec<GridPoint> = evaluated.into_iter().flatten().collect();
    let best = grid
        .iter()
        .max_by(|a, b| a.mean_accuracy.total_cmp(&b.mean_accuracy))
        .ok_or_else(|| MlError::InvalidParameter("no grid point could be trained".into()))?;
    let floor = best.mean_accuracy - best.std_error;
    let chosen = grid
        .iter()
        .filter(|p| p.mean_accuracy >= floor)
        .min_by(|a, b| a.gamma.total_cmp(&b.gamma).then(a.c.total_cmp(&b.c)))
        .expect("best point passes its own floor");
    Ok(TuneResult {
        c: chosen.c,
        gamma: chosen.gamma,
        folds_used: k,
        grid,
    })
}
