//! Evaluation: ROC/AUC, operating-point metrics, Spearman correlation,
//! stratified repeated splits and lesion-size threshold sweeps.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ml::Label;
use crate::phantom::Category;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("need both classes")]
    SingleClass,
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("non-finite score")]
    NonFinite,
    #[error("zero rank variance")]
    ZeroRankVariance,
    #[error("too few samples: {0}")]
    TooFew(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// `(fpr, tpr)` from the `+∞` threshold down to `−∞`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn check(scores: &[f64], labels: &[Label]) -> Result<(usize, usize), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let pos = labels.iter().filter(|l| l.is_malignant()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    Ok((pos, neg))
}

/// ROC curve over unique score thresholds. Tied scores advance both rates
/// at once, so the trapezoidal area equals the Mann–Whitney statistic.
/// Malignant is the positive class; higher scores mean more malignant.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<RocResult, EvalError> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of one positive × one negative.
    let mut twice_area: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]].is_malignant() {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        twice_area += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = twice_area as f64 / (2.0 * pos as f64 * neg as f64);
    Ok(RocResult { points, auc })
}

pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64, EvalError> {
    roc_auc(scores, labels).map(|r| r.auc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    /// Predict malignant when `score >= t`.
    Fixed(f64),
    /// Threshold maximizing sensitivity + specificity on the given scores.
    Youden,
}

/// Metrics at a threshold: `score >= threshold` predicts malignant.
pub fn metrics_at(
    scores: &[f64],
    labels: &[Label],
    threshold: f64,
) -> Result<OperatingPoint, EvalError> {
    let (pos, neg) = check(scores, labels)?;
    let (mut tp, mut tn) = (0usize, 0usize);
    for (s, l) in scores.iter().zip(labels) {
        let predicted = *s >= threshold;
        match (l.is_malignant(), predicted) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            _ => {}
        }
    }
    Ok(OperatingPoint {
        threshold,
        accuracy: (tp + tn) as f64 / scores.len() as f64,
        sensitivity: tp as f64 / pos as f64,
        specificity: tn as f64 / neg as f64,
    })
}

/// Youden-optimal threshold: candidates are midpoints between consecutive
/// distinct scores plus one threshold above and one below all scores. Ties
/// in `J` keep the lowest threshold.
pub fn youden_threshold(scores: &[f64], labels: &[Label]) -> Result<f64, EvalError> {
    check(scores, labels)?;
    let mut uniq: Vec<f64> = scores.to_vec();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let mut candidates = Vec::with_capacity(uniq.len() + 1);
    candidates.push(uniq[0] - 1.0);
    candidates.extend(uniq.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(uniq[uniq.len() - 1] + 1.0);
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for t in candidates {
        let m = metrics_at(scores, labels, t)?;
        let j = m.sensitivity + m.specificity - 1.0;
        if j > best.0 {
            best = (j, t);
        }
    }
    Ok(best.1)
}

pub fn operating_metrics(
    scores: &[f64],
    labels: &[Label],
    policy: ThresholdPolicy,
) -> Result<OperatingPoint, EvalError> {
    let t = match policy {
        ThresholdPolicy::Fixed(t) => t,
        ThresholdPolicy::Youden => youden_threshold(scores, labels)?,
    };
    metrics_at(scores, labels, t)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut k = 0;
    while k < order.len() {
        let mut e = k;
        while e + 1 < order.len() && x[order[e + 1]] == x[order[k]] {
            e += 1;
        }
        let r = (k + e) as f64 / 2.0 + 1.0;
        for &i in &order[k..=e] {
            ranks[i] = r;
        }
        k = e + 1;
    }
    ranks
}

/// Spearman's rank correlation: Pearson correlation of mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(EvalError::TooFew(format!(
            "spearman needs >= 3 pairs, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let (rx, ry) = (mid_ranks(x), mid_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ZeroRankVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub repeats: Vec<Split>,
}

pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

/// Stratified repeated train/test splits over indices `0..labels.len()`.
/// Each class contributes `round(fraction · n_class)` samples to training;
/// every repeat draws its own permutation from `(seed, repeat)`.
pub fn make_splits(
    labels: &[Label],
    repeats: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitPlan, EvalError> {
    if repeats == 0 {
        return Err(EvalError::InvalidParameter("repeats must be >= 1".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(EvalError::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let classes = [Label::Benign, Label::Malignant];
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect();
    for (c, m) in classes.iter().zip(&members) {
        if m.len() < 4 {
            return Err(EvalError::TooFew(format!(
                "class {c} has {} samples; stratified splitting needs >= 4",
                m.len()
            )));
        }
    }
    let repeats = (0..repeats)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64 + 1);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for m in &members {
                let mut idx = m.clone();
                idx.shuffle(&mut rng);
                let k = (train_fraction * idx.len() as f64).round() as usize;
                let k = k.clamp(1, idx.len() - 1);
                train.extend_from_slice(&idx[..k]);
                test.extend_from_slice(&idx[k..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            Split { train, test }
        })
        .collect();
    Ok(SplitPlan {
        seed,
        train_fraction,
        repeats,
    })
}

/// Test-set metrics of one repeat; the operating threshold comes from the
/// training scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatMetrics {
    pub auc: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub n_train: usize,
    pub n_test: usize,
}

pub fn evaluate_repeat(
    train_scores: &[f64],
    train_labels: &[Label],
    test_scores: &[f64],
    test_labels: &[Label],
) -> Result<RepeatMetrics, EvalError> {
    let threshold = youden_threshold(train_scores, train_labels)?;
    let op = metrics_at(test_scores, test_labels, threshold)?;
    Ok(RepeatMetrics {
        auc: auc(test_scores, test_labels)?,
        accuracy: op.accuracy,
        sensitivity: op.sensitivity,
        specificity: op.specificity,
        n_train: train_scores.len(),
        n_test: test_scores.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample STD (`n − 1`; zero for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryFilter {
    All,
    Major,
}

impl CategoryFilter {
    pub const BOTH: [CategoryFilter; 2] = [CategoryFilter::All, CategoryFilter::Major];

    pub fn accepts(self, category: Category) -> bool {
        match self {
            CategoryFilter::All => true,
            CategoryFilter::Major => category == Category::Major,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CategoryFilter::All => "all",
            CategoryFilter::Major => "major",
        }
    }
}

/// Thresholds 0.0, 0.1, …, 1.0 cm².
pub fn default_size_thresholds() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Lesions strictly larger than the threshold are included.
pub fn passes_size(area_cm2: f64, threshold_cm2: f64) -> bool {
    area_cm2 > threshold_cm2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold_cm2: f64,
    /// `None` when no repeat had both classes in its subsets.
    pub metrics: Option<SummaryMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetrics {
    pub auc: MeanStd,
    pub accuracy: MeanStd,
    pub sensitivity: MeanStd,
    pub specificity: MeanStd,
    pub n_train: f64,
    pub n_test: f64,
    pub repeats_used: usize,
}

impl SummaryMetrics {
    pub fn from_repeats(rows: &[RepeatMetrics]) -> Option<Self> {
        if rows.is_empty() {
            return None;
        }
        let col =
            |f: fn(&RepeatMetrics) -> f64| MeanStd::of(&rows.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            auc: col(|r| r.auc),
            accuracy: col(|r| r.accuracy),
            sensitivity: col(|r| r.sensitivity),
            specificity: col(|r| r.specificity),
            n_train: col(|r| r.n_train as f64).mean,
            n_test: col(|r| r.n_test as f64).mean,
            repeats_used: rows.len(),
        })
    }
}

/// Runs `run(threshold, repeat)` for every threshold and repeat and
/// summarizes per threshold. Repeats whose run fails (typically a subset
/// that lost a class) are left out; a threshold with no usable repeat is
/// marked unavailable. Thresholds are processed in parallel and merged in
/// input order.
pub fn size_threshold_sweep<F>(thresholds: &[f64], repeats: usize, run: F) -> Vec<SweepRow>
where
    F: Fn(f64, usize) -> Result<RepeatMetrics, EvalError> + Sync,
{
    thresholds
        .par_iter()
        .map(|&t| {
            let rows: Vec<RepeatMetrics> = (0..repeats)
                .filter_map(|r| match run(t, r) {
                    Ok(m) => Some(m),
                    Err(e) => {
                        log::debug!("threshold {t} cm², repeat {r}: {e}");
                        None
                    }
                })
                .collect();
            SweepRow {
                threshold_cm2: t,
                metrics: SummaryMetrics::from_repeats(&rows),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scorer: String,
    pub category_filter: CategoryFilter,
    pub threshold_cm2: f64,
    pub available: bool,
    pub auc: Option<MeanStd>,
    pub acc: Option<MeanStd>,
    pub sens: Option<MeanStd>,
    pub spec: Option<MeanStd>,
    pub n_train: Option<f64>,
    pub n_test: Option<f64>,
    pub repeats_used: usize,
}

impl MetricRow {
    pub fn new(scorer: &str, filter: CategoryFilter, row: &SweepRow) -> Self {
        let m = row.metrics.as_ref();
        Self {
            scorer: scorer.to_string(),
            category_filter: filter,
            threshold_cm2: row.threshold_cm2,
            available: m.is_some(),
            auc: m.map(|m| m.auc),
            acc: m.map(|m| m.accuracy),
            sens: m.map(|m| m.sensitivity),
            spec: m.map(|m| m.specificity),
            n_train: m.map(|m| m.n_train),
            n_test: m.map(|m| m.n_test),
            repeats_used: m.map_or(0, |m| m.repeats_used),
        }
    }
}

pub const REPORT_SCHEMA: &str = "report-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema: String,
    pub seed: u64,
    pub repeats: usize,
    pub train_fraction: f64,
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scorer,category_filter,threshold_cm2,available,auc,auc_std,acc,acc_std,sens,sens_std,spec,spec_std,n_train,n_test,repeats_used\n",
        );
        let f = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v}"));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.scorer,
                r.category_filter.name(),
                r.threshold_cm2,
                r.available,
                f(r.auc.map(|m| m.mean)),
                f(r.auc.map(|m| m.std)),
                f(r.acc.map(|m| m.mean)),
                f(r.acc.map(|m| m.std)),
                f(r.sens.map(|m| m.mean)),
                f(r.sens.map(|m| m.std)),
                f(r.spec.map(|m| m.mean)),
                f(r.spec.map(|m| m.std)),
                f(r.n_train),
                f(r.n_test),
                r.repeats_used
            );
        }
        out
    }

    pub fn row(
        &self,
        scorer: &str,
        filter: CategoryFilter,
        threshold_cm2: f64,
    ) -> Option<&MetricRow> {
        self.rows.iter().find(|r| {
            r.scorer == scorer
                && r.category_filter == filter
                && (r.threshold_cm2 - threshold_cm2).abs() < 1e-9
        })
    }
}
