//! End-to-end protocols: per-frame analysis, cohort feature extraction,
//! model training with optional subset selection, the repeated-split
//! evaluation grid and overlay rendering.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsi::{self, ColorScale, LutAnchors, RenderProvenance, RgbImage, SmoothParams};
use crate::eval::{self, CategoryFilter, EvalError, MetricReport, MetricRow, RepeatMetrics};
use crate::hscan::{self, AttenuationSpec, ColorLevelMap, FilterBank, HscanError};
use crate::ml::model::TrainParams;
use crate::ml::{
    self, extract_features, select_features, ExtractionParams, Feature, FeatureError,
    FeatureVector, Label, MlError, Scorer, SelectionResult, SvmParams, TrainedModel,
};
use crate::phantom::{Category, CohortConfig, CohortManifest};
use crate::signal::{self, BModeImage, EnvelopeFrame, FrameError, LesionMask, MaskError, RfFrame};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Hscan(#[from] HscanError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

impl AnalysisError {
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            AnalysisError::Frame(FrameError::Io { .. }) | AnalysisError::Mask(MaskError::Io { .. })
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HscanParams {
    pub n_filters: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub rel_bandwidth: f64,
}

impl Default for HscanParams {
    fn default() -> Self {
        Self {
            n_filters: hscan::DEFAULT_FILTERS,
            fmin_hz: hscan::DEFAULT_FMIN_HZ,
            fmax_hz: hscan::DEFAULT_FMAX_HZ,
            rel_bandwidth: hscan::DEFAULT_REL_BANDWIDTH,
        }
    }
}

impl HscanParams {
    pub fn bank(&self) -> Result<FilterBank, HscanError> {
        FilterBank::new(
            self.n_filters,
            self.fmin_hz,
            self.fmax_hz,
            self.rel_bandwidth,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisParams {
    pub hscan: HscanParams,
    pub attenuation: AttenuationSpec,
    pub dynamic_range_db: f64,
    pub extraction: ExtractionParams,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            hscan: HscanParams::default(),
            attenuation: AttenuationSpec::default(),
            dynamic_range_db: 60.0,
            extraction: ExtractionParams::default(),
        }
    }
}

/// Everything derived from one frame on the way to its feature vector.
#[derive(Debug, Clone)]
pub struct FrameAnalysis {
    pub corrected: RfFrame,
    pub envelope: EnvelopeFrame,
    pub bmode: BModeImage,
    pub color_map: ColorLevelMap,
    pub features: FeatureVector,
}

/// Attenuation correction, envelope, B-mode, H-scan map and the ten
/// features. Envelope and B-mode come from the corrected RF, the way a
/// scanner's depth gain compensation would present them.
pub fn analyze_frame(
    rf: &RfFrame,
    mask: &LesionMask,
    params: &AnalysisParams,
) -> Result<FrameAnalysis, AnalysisError> {
    mask.check_aligned(rf.shape())?;
    if !(params.dynamic_range_db > 0.0) {
        return Err(FrameError::Geometry(format!(
            "dynamic range must be positive, got {}",
            params.dynamic_range_db
        ))
        .into());
    }
    let bank = params.hscan.bank()?;
    let corrected = hscan::correct_attenuation(rf, &params.attenuation)?;
    let envelope = signal::demodulate_envelope(&corrected);
    let bmode = signal::log_compress(&envelope, params.dynamic_range_db);
    let color_map = hscan::color_level_map(&corrected, &bank);
    let features = extract_features(&envelope, &bmode, &color_map, mask, &params.extraction)?;
    Ok(FrameAnalysis {
        corrected,
        envelope,
        bmode,
        color_map,
        features,
    })
}

/// One lesion of a feature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub id: String,
    pub label: Label,
    pub category: Category,
    pub area_cm2: f64,
    pub features: FeatureVector,
}

/// Column order of the feature CSV.
pub fn feature_csv_header() -> String {
    let mut h = String::from("id,label,category,area_cm2");
    for f in Feature::ALL {
        h.push(',');
        h.push_str(f.name());
    }
    h
}

pub fn features_to_csv(rows: &[FeatureRow]) -> String {
    let mut out = feature_csv_header();
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{},{},{}", r.id, r.label, r.category, r.area_cm2);
        for v in r.features.0 {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Error)]
#[error("feature table line {line}: {message}")]
pub struct CsvError {
    pub line: usize,
    pub message: String,
}

pub fn features_from_csv(text: &str) -> Result<Vec<FeatureRow>, CsvError> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, message: String| CsvError {
        line: line + 1,
        message,
    };
    match lines.next() {
        Some((_, h)) if h.trim() == feature_csv_header() => {}
        Some((n, _)) => {
            return Err(err(
                n,
                format!("expected header `{}`", feature_csv_header()),
            ))
        }
        None => return Err(err(0, "empty file".into())),
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 14 {
            return Err(err(
                n,
                format!("expected 14 columns, found {}", cells.len()),
            ));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(n, format!("`{s}`: {e}")));
        let mut fv = [0.0; 10];
        for (slot, cell) in fv.iter_mut().zip(&cells[4..]) {
            *slot = num(cell)?;
        }
        rows.push(FeatureRow {
            id: cells[0].to_string(),
            label: cells[1].parse().map_err(|e| err(n, e))?,
            category: cells[2].parse().map_err(|e| err(n, e))?,
            area_cm2: num(cells[3])?,
            features: FeatureVector(fv),
        });
    }
    Ok(rows)
}

/// A lesion that could not be analyzed.
#[derive(Debug)]
pub struct ExtractFailure {
    pub id: String,
    pub error: AnalysisError,
}

/// Analyzes every manifest entry in parallel; results keep manifest order.
pub fn extract_cohort(
    manifest: &CohortManifest,
    params: &AnalysisParams,
) -> (Vec<FeatureRow>, Vec<ExtractFailure>) {
    let results: Vec<Result<FeatureRow, ExtractFailure>> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let run = || -> Result<FeatureVector, AnalysisError> {
                let rf = signal::read_frame(&manifest.rf_path(e))?;
                let mask = signal::read_mask(&manifest.mask_path(e), rf.geometry())?;
                Ok(analyze_frame(&rf, &mask, params)?.features)
            };
            run()
                .map(|features| FeatureRow {
                    id: e.id.clone(),
                    label: e.label,
                    category: e.category,
                    area_cm2: e.area_cm2,
                    features,
                })
                .map_err(|error| ExtractFailure {
                    id: e.id.clone(),
                    error,
                })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    (rows, failures)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub folds: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Run the exhaustive subset search; otherwise use the default five.
    pub select_features: bool,
    pub selection_scorer: Scorer,
    /// Fixed SVM settings used when the selection scorer is the SVM.
    pub selection_c: f64,
    pub selection_gamma: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let p = TrainParams::default();
        Self {
            c_grid: p.c_grid,
            gamma_grid: p.gamma_grid,
            folds: p.folds,
            tolerance: p.tolerance,
            max_iterations: p.max_iterations,
            select_features: true,
            selection_scorer: Scorer::Projection,
            selection_c: 1.0,
            selection_gamma: 0.1,
        }
    }
}

impl TrainSettings {
    pub fn params(&self, seed: u64) -> TrainParams {
        TrainParams {
            c_grid: self.c_grid.clone(),
            gamma_grid: self.gamma_grid.clone(),
            folds: self.folds,
            seed,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }

    fn selection_svm(&self) -> SvmParams {
        SvmParams {
            c: self.selection_c,
            gamma: self.selection_gamma,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }
}

fn split_table(rows: &[FeatureRow]) -> (Vec<FeatureVector>, Vec<Label>) {
    rows.iter().map(|r| (r.features, r.label)).unzip()
}

/// Trains the bundle, selecting the subset first when configured.
pub fn train(
    rows: &[FeatureRow],
    settings: &TrainSettings,
    seed: u64,
) -> Result<(TrainedModel, Option<SelectionResult>), MlError> {
    let (table, labels) = split_table(rows);
    ml::require_both_classes(&labels)?;
    let selection = if settings.select_features {
        Some(select_features(
            &table,
            &labels,
            &Feature::ALL,
            settings.selection_scorer,
            &settings.selection_svm(),
        )?)
    } else {
        None
    };
    let subset: Vec<Feature> = match &selection {
        Some(s) => s.best.subset.clone(),
        None => Feature::DEFAULT_SUBSET.to_vec(),
    };
    let model = TrainedModel::fit(&table, &labels, &subset, &settings.params(seed))?;
    Ok((model, selection))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub repeats: usize,
    pub train_fraction: f64,
    pub thresholds_cm2: Vec<f64>,
    pub category_filters: Vec<CategoryFilter>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            repeats: eval::DEFAULT_REPEATS,
            train_fraction: eval::DEFAULT_TRAIN_FRACTION,
            thresholds_cm2: eval::default_size_thresholds(),
            category_filters: CategoryFilter::BOTH.to_vec(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ml(#[from] MlError),
}

/// Repeated stratified 70/30 evaluation on a fixed feature subset. For each
/// category filter and size threshold, the training and test parts of each
/// split are restricted to matching lesions, a fresh model is fitted on the
/// training part, its Youden threshold is fixed on the training scores and
/// applied to the test part. Every scorer is reported from the same fit.
pub fn evaluate(
    rows: &[FeatureRow],
    subset: &[Feature],
    train_settings: &TrainSettings,
    settings: &EvalSettings,
    seed: u64,
) -> Result<MetricReport, ProtocolError> {
    let labels: Vec<Label> = rows.iter().map(|r| r.label).collect();
    let plan = eval::make_splits(&labels, settings.repeats, settings.train_fraction, seed)?;
    let params = train_settings.params(seed);
    let mut report_rows = Vec::new();
    for &filter in &settings.category_filters {
        let keep = |i: usize, t: f64| {
            filter.accepts(rows[i].category) && eval::passes_size(rows[i].area_cm2, t)
        };
        // One fit per (threshold, repeat), shared by all scorers.
        let fits: Vec<Vec<Option<[RepeatMetrics; 3]>>> = settings
            .thresholds_cm2
            .par_iter()
            .map(|&t| {
                plan.repeats
                    .iter()
                    .map(|split| {
                        let train: Vec<usize> = split
                            .train
                            .iter()
                            .copied()
                            .filter(|&i| keep(i, t))
                            .collect();
                        let test: Vec<usize> =
                            split.test.iter().copied().filter(|&i| keep(i, t)).collect();
                        fit_and_score(rows, &train, &test, subset, &params).ok()
                    })
                    .collect()
            })
            .collect();
        for (k, scorer) in Scorer::ALL.into_iter().enumerate() {
            for (t, per_repeat) in settings.thresholds_cm2.iter().zip(&fits) {
                let metrics: Vec<RepeatMetrics> =
                    per_repeat.iter().flatten().map(|m| m[k]).collect();
                let row = eval::SweepRow {
                    threshold_cm2: *t,
                    metrics: eval::SummaryMetrics::from_repeats(&metrics),
                };
                report_rows.push(MetricRow::new(scorer.name(), filter, &row));
            }
        }
    }
    report_rows.sort_by_key(|r| Scorer::ALL.iter().position(|s| s.name() == r.scorer));
    Ok(MetricReport {
        schema: eval::REPORT_SCHEMA.to_string(),
        seed,
        repeats: settings.repeats,
        train_fraction: settings.train_fraction,
        rows: report_rows,
    })
}

fn fit_and_score(
    rows: &[FeatureRow],
    train: &[usize],
    test: &[usize],
    subset: &[Feature],
    params: &TrainParams,
) -> Result<[RepeatMetrics; 3], ProtocolError> {
    let pick = |idx: &[usize]| -> (Vec<FeatureVector>, Vec<Label>) {
        idx.iter()
            .map(|&i| (rows[i].features, rows[i].label))
            .unzip()
    };
    let (xtr, ytr) = pick(train);
    let (xte, yte) = pick(test);
    ml::require_both_classes(&yte)?;
    let model = TrainedModel::fit(&xtr, &ytr, subset, params)?;
    let score = |x: &[FeatureVector]| -> Vec<ml::MalignancyScore> {
        x.iter().map(|f| model.score(f)).collect()
    };
    let (str_, ste) = (score(&xtr), score(&xte));
    let mut out = [RepeatMetrics {
        auc: 0.0,
        accuracy: 0.0,
        sensitivity: 0.0,
        specificity: 0.0,
        n_train: 0,
        n_test: 0,
    }; 3];
    for (k, scorer) in Scorer::ALL.into_iter().enumerate() {
        let a: Vec<f64> = str_.iter().map(|s| s.get(scorer)).collect();
        let b: Vec<f64> = ste.iter().map(|s| s.get(scorer)).collect();
        out[k] = eval::evaluate_repeat(&a, &ytr, &b, &yte)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsiSettings {
    pub scorer: Scorer,
    pub median_k: usize,
    pub gaussian_sigma: f64,
    pub opacity: f64,
    pub lut: LutAnchors,
}

impl Default for DsiSettings {
    fn default() -> Self {
        Self {
            scorer: Scorer::SvmDistance,
            median_k: 3,
            gaussian_sigma: 1.0,
            opacity: 0.6,
            lut: LutAnchors::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Dsi(#[from] dsi::DsiError),
}

pub struct Rendered {
    pub image: RgbImage,
    pub provenance: RenderProvenance,
    pub score_map: dsi::ScoreMap,
}

/// Analyzes a frame and renders its smoothed local score map over B-mode.
pub fn render_lesion(
    rf: &RfFrame,
    mask: &LesionMask,
    model: &TrainedModel,
    analysis: &AnalysisParams,
    settings: &DsiSettings,
) -> Result<Rendered, RenderError> {
    let a = analyze_frame(rf, mask, analysis)?;
    let raw = dsi::local_score_map(&a.color_map, &a.features, model, mask, settings.scorer)?;
    let smooth = SmoothParams {
        median_k: settings.median_k,
        gaussian_sigma: settings.gaussian_sigma,
    };
    let map = dsi::smooth(&raw, mask.bits(), &smooth)?;
    let limits = model.limits.get(settings.scorer);
    let scale = ColorScale::new(limits, &settings.lut)?;
    let image = dsi::render_overlay(&a.bmode, &map, mask.bits(), &scale, settings.opacity)?;
    let provenance = RenderProvenance {
        scorer: settings.scorer,
        lo: limits.lo,
        hi: limits.hi,
        median_k: settings.median_k,
        gaussian_sigma: settings.gaussian_sigma,
        opacity: settings.opacity,
        lut_anchors: settings.lut.clone(),
        global_score: model.score(&a.features).get(settings.scorer),
        mean_color_index: dsi::mean_color_index(&map, mask.bits(), &scale),
    };
    Ok(Rendered {
        image,
        provenance,
        score_map: map,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub cohort_dir: PathBuf,
    pub features_csv: PathBuf,
    pub model_path: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            cohort_dir: PathBuf::from("cohort"),
            features_csv: PathBuf::from("features.csv"),
            model_path: PathBuf::from("model.json"),
            report_dir: PathBuf::from("report"),
        }
    }
}

/// The complete, serializable configuration of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub cohort: CohortConfig,
    pub analysis: AnalysisParams,
    pub train: TrainSettings,
    pub eval: EvalSettings,
    pub dsi: DsiSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            paths: Paths::default(),
            cohort: CohortConfig::default(),
            analysis: AnalysisParams::default(),
            train: TrainSettings::default(),
            eval: EvalSettings::default(),
            dsi: DsiSettings::default(),
        }
    }
}
