//! Linear fusion of standardized features: z-scoring, PCA (PC1 score and
//! per-feature contributions) and projection onto the benign→malignant
//! reference direction.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::linalg::{column_means, dot};
use super::{Label, MlError};

/// Per-feature z-scoring with population statistics of the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self, MlError> {
        if x.is_empty() || x[0].is_empty() {
            return Err(MlError::EmptyInput);
        }
        let mean = column_means(x);
        let n = x.len() as f64;
        let std: Vec<f64> = (0..mean.len())
            .map(|j| (x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        if let Some(j) = (0..std.len()).find(|&j| !(std[j] > 1e-12 * mean[j].abs())) {
            return Err(MlError::ZeroVariance(j));
        }
        Ok(Self { mean, std })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform_all(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// One unit-norm loading vector per retained component, PC1 first.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
}

/// Sample covariance (`n - 1` denominator) of the rows of `x`.
pub fn covariance(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mean = column_means(x);
    let d = mean.len();
    let denom = (x.len() as f64 - 1.0).max(1.0);
    let mut cov = vec![vec![0.0; d]; d];
    for row in x {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[i][j] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

impl PcaModel {
    /// Eigendecomposition of the sample covariance. PC1 is oriented so that
    /// `positive_mean` (the malignant training mean) scores positive; without
    /// it, each component's largest-magnitude entry is made positive, the
    /// highest index winning ties.
    pub fn fit(x: &[Vec<f64>], positive_mean: Option<&[f64]>) -> Result<Self, MlError> {
        let d = x.first().map_or(0, |r| r.len());
        if d == 0 || x.len() < d {
            return Err(MlError::Shape(format!(
                "PCA needs rows >= columns >= 1, got {} x {d}",
                x.len()
            )));
        }
        let cov = covariance(x);
        let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(b.cmp(&a))
        });
        let top = eig.eigenvalues[order[0]].max(0.0);
        let keep: Vec<usize> = order
            .into_iter()
            .filter(|&k| eig.eigenvalues[k] > 1e-12 * top.max(f64::MIN_POSITIVE))
            .collect();
        if keep.is_empty() {
            return Err(MlError::Shape(
                "covariance has no positive eigenvalue".into(),
            ));
        }
        if keep.len() < d {
            log::warn!(
                "rank-deficient covariance: keeping {} of {d} components",
                keep.len()
            );
        }
        let mean = column_means(x);
        let mut components: Vec<Vec<f64>> = keep
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect();
        for comp in &mut components {
            orient_by_pivot(comp);
        }
        if let Some(target) = positive_mean {
            let centered: Vec<f64> = target.iter().zip(&mean).map(|(t, m)| t - m).collect();
            if dot(&centered, &components[0]) < 0.0 {
                components[0].iter_mut().for_each(|v| *v = -*v);
            }
        }
        let eigenvalues: Vec<f64> = keep.iter().map(|&k| eig.eigenvalues[k]).collect();
        let total: f64 = eigenvalues.iter().sum();
        Ok(Self {
            mean,
            components,
            explained_ratio: eigenvalues.iter().map(|v| v / total).collect(),
            eigenvalues,
        })
    }

    pub fn pc1_score(&self, x: &[f64]) -> f64 {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        dot(&centered, &self.components[0])
    }

    /// Per-feature weight `Σ_k |loading_jk| · ratio_k`, normalized to sum 1.
    pub fn contributions(&self) -> Vec<f64> {
        let d = self.mean.len();
        let raw: Vec<f64> = (0..d)
            .map(|j| {
                self.components
                    .iter()
                    .zip(&self.explained_ratio)
                    .map(|(c, r)| c[j].abs() * r)
                    .sum()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|v| v / total).collect()
    }
}

fn orient_by_pivot(v: &mut [f64]) {
    let mut pivot = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() >= v[pivot].abs() {
            pivot = i;
        }
    }
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Unit direction from the benign class mean to the malignant class mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub direction: Vec<f64>,
}

impl Reference {
    pub fn fit(x: &[Vec<f64>], labels: &[Label]) -> Result<Self, MlError> {
        let pick = |want: Label| -> Vec<Vec<f64>> {
            x.iter()
                .zip(labels)
                .filter(|(_, &l)| l == want)
                .map(|(r, _)| r.clone())
                .collect()
        };
        let (mal, ben) = (pick(Label::Malignant), pick(Label::Benign));
        if mal.is_empty() || ben.is_empty() {
            return Err(MlError::SingleClass);
        }
        let diff: Vec<f64> = column_means(&mal)
            .iter()
            .zip(column_means(&ben))
            .map(|(a, b)| a - b)
            .collect();
        let norm = dot(&diff, &diff).sqrt();
        if !(norm > 1e-12) {
            return Err(MlError::DegenerateReference);
        }
        Ok(Self {
            direction: diff.iter().map(|v| v / norm).collect(),
        })
    }

    pub fn from_direction(direction: Vec<f64>) -> Result<Self, MlError> {
        let norm = dot(&direction, &direction).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(MlError::Shape(format!(
                "reference must be unit length, |r| = {norm}"
            )));
        }
        Ok(Self { direction })
    }
}

pub fn projection_score(x: &[f64], reference: &Reference) -> f64 {
    dot(x, &reference.direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    }

    /// Rows whose sample covariance is exactly `[[2,1],[1,2]]`: whitened
    /// samples mapped through the Cholesky factor.
    fn correlated_pair(n: usize) -> Vec<Vec<f64>> {
        let raw = gaussian(n, 2, 42);
        let cov = covariance(&raw);
        let mean = column_means(&raw);
        // Whiten with the inverse Cholesky factor of the sample covariance.
        let l00 = cov[0][0].sqrt();
        let l10 = cov[1][0] / l00;
        let l11 = (cov[1][1] - l10 * l10).sqrt();
        let a = (2f64).sqrt();
        let (b0, b1) = (1.0 / a, (2.0 - 0.5f64).sqrt());
        raw.iter()
            .map(|r| {
                let z0 = (r[0] - mean[0]) / l00;
                let z1 = ((r[1] - mean[1]) - l10 * z0) / l11;
                vec![a * z0, b0 * z0 + b1 * z1]
            })
            .collect()
    }

    #[test]
    fn standardized_columns_have_unit_moments() {
        let x: Vec<Vec<f64>> = gaussian(200, 3, 1)
            .into_iter()
            .map(|r| vec![r[0] * 5.0 + 3.0, r[1] * 0.01, r[2] - 100.0])
            .collect();
        let s = Standardizer::fit(&x).unwrap();
        let z = s.transform_all(&x);
        for j in 0..3 {
            let m = z.iter().map(|r| r[j]).sum::<f64>() / 200.0;
            let v = z.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / 200.0;
            assert!(m.abs() < 1e-9 && (v.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_variance_rejected() {
        let x = vec![vec![1.0, 2.0], vec![1.0, 3.0], vec![1.0, 4.0]];
        assert!(matches!(
            Standardizer::fit(&x),
            Err(MlError::ZeroVariance(0))
        ));
    }

    #[test]
    fn two_by_two_covariance_pc1() {
        let x = correlated_pair(500);
        let cov = covariance(&x);
        assert!((cov[0][0] - 2.0).abs() < 1e-9 && (cov[0][1] - 1.0).abs() < 1e-9);
        let p = PcaModel::fit(&x, None).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((p.components[0][0].abs() - s).abs() < 1e-9);
        assert!((p.components[0][1].abs() - s).abs() < 1e-9);
        assert!(p.components[0][0] * p.components[0][1] > 0.0);
        assert!((p.eigenvalues[0] - 3.0).abs() < 1e-9 && (p.eigenvalues[1] - 1.0).abs() < 1e-9);
        assert!((p.explained_ratio[0] - 0.75).abs() < 1e-9);
        let c = p.contributions();
        assert!((c[0] - 0.5).abs() < 1e-9 && (c[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let x: Vec<Vec<f64>> = gaussian(300, 4, 7)
            .into_iter()
            .map(|r| vec![r[0], r[0] + 0.5 * r[1], r[2] * 3.0, r[3] - r[0]])
            .collect();
        let p = PcaModel::fit(&x, None).unwrap();
        let cov = covariance(&x);
        for i in 0..4 {
            for j in 0..4 {
                let rec: f64 = (0..4)
                    .map(|k| p.components[k][i] * p.eigenvalues[k] * p.components[k][j])
                    .sum();
                assert!((rec - cov[i][j]).abs() < 1e-6);
                let g = dot(&p.components[i], &p.components[j]);
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        assert!(p.explained_ratio.windows(2).all(|w| w[0] >= w[1]));
        assert!((p.explained_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_feature_and_dominant_feature_contributions() {
        let x = gaussian(50, 1, 3);
        assert_eq!(PcaModel::fit(&x, None).unwrap().contributions(), vec![1.0]);
        let x: Vec<Vec<f64>> = gaussian(2000, 2, 4)
            .into_iter()
            .map(|r| vec![10.0 * r[0], r[1]])
            .collect();
        let c = PcaModel::fit(&x, None).unwrap().contributions();
        assert!(c[0] > 0.9, "{c:?}");
    }

    #[test]
    fn orientation_follows_positive_mean() {
        let x = correlated_pair(200);
        let target = vec![-3.0, -3.0];
        let p = PcaModel::fit(&x, Some(&target)).unwrap();
        assert!(p.pc1_score(&target) > 0.0);
        let again = PcaModel::fit(&x, Some(&target)).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn projection_basics() {
        let r = Reference::from_direction(vec![0.6, 0.8]).unwrap();
        assert!((projection_score(&[3.0, 4.0], &r) - 5.0).abs() < 1e-12);
        assert!(projection_score(&[-4.0, 3.0], &r).abs() < 1e-15);
        let x = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(
            Reference::fit(&x, &[Label::Benign, Label::Malignant]),
            Err(MlError::DegenerateReference)
        ));
    }
}
