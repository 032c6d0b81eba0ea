//! Disease-specific imaging: per-pixel malignancy score maps, mask-restricted
//! smoothing, the light-blue → green → yellow → red color scale and the
//! B-mode overlay.

use std::collections::HashMap;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, Region};
use crate::hscan::ColorLevelMap;
use crate::ml::{Feature, FeatureVector, Scorer, TrainedModel};
use crate::signal::{BModeImage, LesionMask};

#[derive(Debug, Error)]
pub enum DsiError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("too few scores to calibrate: {0} (need >= 10)")]
    TooFewScores(usize),
    #[error("scorer mismatch: {0}")]
    ScorerMismatch(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("PNG encoding failed: {0}")]
    Png(#[from] png::EncodingError),
}

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorLimits {
    pub lo: f64,
    pub hi: f64,
}

/// Linear-interpolation percentile (`p` in `[0, 100]`) of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Color limits at the 2.5th and 97.5th percentiles of training scores.
/// A degenerate range is widened by ±1e−6.
pub fn calibrate_scale(scores: &[f64]) -> Result<ColorLimits, DsiError> {
    let mut s: Vec<f64> = scores.iter().copied().filter(|v| v.is_finite()).collect();
    if s.len() < 10 {
        return Err(DsiError::TooFewScores(s.len()));
    }
    s.sort_by(f64::total_cmp);
    let (lo, hi) = (percentile(&s, 2.5), percentile(&s, 97.5));
    if hi > lo {
        Ok(ColorLimits { lo, hi })
    } else {
        Ok(ColorLimits {
            lo: lo - 1e-6,
            hi: hi + 1e-6,
        })
    }
}

/// LUT anchor points `(index, rgb)`, interpolated linearly in RGB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutAnchors(pub Vec<(u8, Rgb)>);

impl Default for LutAnchors {
    fn default() -> Self {
        LutAnchors(vec![
            (0, [173, 216, 230]),
            (64, [0, 255, 0]),
            (160, [255, 255, 0]),
            (255, [255, 0, 0]),
        ])
    }
}

impl LutAnchors {
    pub fn build(&self) -> Result<[Rgb; 256], DsiError> {
        let a = &self.0;
        if a.len() < 2
            || a[0].0 != 0
            || a[a.len() - 1].0 != 255
            || a.windows(2).any(|w| w[0].0 >= w[1].0)
        {
            return Err(DsiError::Parameter(
                "LUT anchors must start at 0, end at 255 and increase strictly".into(),
            ));
        }
        let mut lut = [[0u8; 3]; 256];
        for w in a.windows(2) {
            let ((i0, c0), (i1, c1)) = (w[0], w[1]);
            for i in i0..=i1 {
                let t = (i - i0) as f64 / (i1 - i0) as f64;
                for ch in 0..3 {
                    lut[i as usize][ch] =
                        (c0[ch] as f64 + t * (c1[ch] as f64 - c0[ch] as f64)).round() as u8;
                }
            }
        }
        Ok(lut)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorScale {
    pub limits: ColorLimits,
    pub lut: [Rgb; 256],
}

impl ColorScale {
    pub fn new(limits: ColorLimits, anchors: &LutAnchors) -> Result<Self, DsiError> {
        if !(limits.lo < limits.hi) || !limits.lo.is_finite() || !limits.hi.is_finite() {
            return Err(DsiError::Parameter(format!(
                "color limits need lo < hi, got [{}, {}]",
                limits.lo, limits.hi
            )));
        }
        Ok(Self {
            limits,
            lut: anchors.build()?,
        })
    }

    /// `round(clamp((v − lo)/(hi − lo), 0, 1) · 255)`, halves rounding up.
    pub fn index(&self, value: f64) -> u8 {
        let t = ((value - self.limits.lo) / (self.limits.hi - self.limits.lo)).clamp(0.0, 1.0);
        let t = if t.is_nan() { 0.0 } else { t };
        (t * 255.0 + 0.5).floor() as u8
    }
}

pub fn score_to_color(value: f64, scale: &ColorScale) -> Rgb {
    scale.lut[scale.index(value) as usize]
}

/// Scores on the lesion pixels; `NaN` outside the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub values: Grid<f64>,
    pub scorer: Scorer,
}

impl ScoreMap {
    pub fn mask_values<'a>(&'a self, mask: &'a Region) -> impl Iterator<Item = f64> + 'a {
        mask.pixels().map(move |(r, c)| *self.values.get(r, c))
    }
}

/// Per-pixel score: the lesion's global features with the H-scan color level
/// replaced by the local level at each mask pixel. Scores are cached per
/// distinct level.
pub fn local_score_map(
    color_map: &ColorLevelMap,
    global: &FeatureVector,
    model: &TrainedModel,
    mask: &LesionMask,
    scorer: Scorer,
) -> Result<ScoreMap, DsiError> {
    if !model.subset.contains(&Feature::HscanColorLevel) {
        return Err(DsiError::ScorerMismatch(
            "model subset lacks hscan_color_level, the only localized feature".into(),
        ));
    }
    if color_map.shape() != mask.shape() {
        return Err(DsiError::Shape(format!(
            "color map {:?} vs mask {:?}",
            color_map.shape(),
            mask.shape()
        )));
    }
    let mut cache: HashMap<u16, f64> = HashMap::new();
    let mut values = Grid::filled(mask.shape().0, mask.shape().1, f64::NAN);
    for (r, c) in mask.bits().pixels() {
        let level = *color_map.levels.get(r, c);
        let v = *cache.entry(level).or_insert_with(|| {
            let mut fv = *global;
            fv.set(Feature::HscanColorLevel, level as f64);
            model.score(&fv).get(scorer)
        });
        *values.get_mut(r, c) = v;
    }
    Ok(ScoreMap { values, scorer })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothParams {
    pub median_k: usize,
    pub gaussian_sigma: f64,
}

impl Default for SmoothParams {
    fn default() -> Self {
        Self {
            median_k: 3,
            gaussian_sigma: 1.0,
        }
    }
}

/// Median filter then Gaussian blur, both using only in-mask neighbours;
/// Gaussian weights are renormalized over the in-mask support.
pub fn smooth(map: &ScoreMap, mask: &Region, params: &SmoothParams) -> Result<ScoreMap, DsiError> {
    if params.median_k % 2 == 0 {
        return Err(DsiError::Parameter(format!(
            "median_k must be odd, got {}",
            params.median_k
        )));
    }
    if !(params.gaussian_sigma >= 0.0) {
        return Err(DsiError::Parameter("gaussian_sigma must be >= 0".into()));
    }
    if map.values.shape() != mask.shape() {
        return Err(DsiError::Shape("score map and mask differ in shape".into()));
    }
    let (rows, cols) = mask.shape();
    let inside = |r: isize, c: isize| {
        r >= 0
            && c >= 0
            && (r as usize) < rows
            && (c as usize) < cols
            && *mask.get(r as usize, c as usize)
    };

    let h = (params.median_k / 2) as isize;
    let mut med = Grid::filled(rows, cols, f64::NAN);
    let mut window = Vec::with_capacity(params.median_k * params.median_k);
    for (r, c) in mask.pixels() {
        window.clear();
        for dr in -h..=h {
            for dc in -h..=h {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if inside(rr, cc) {
                    window.push(*map.values.get(rr as usize, cc as usize));
                }
            }
        }
        window.sort_by(f64::total_cmp);
        let n = window.len();
        *med.get_mut(r, c) = if n % 2 == 1 {
            window[n / 2]
        } else {
            0.5 * (window[n / 2 - 1] + window[n / 2])
        };
    }

    if params.gaussian_sigma == 0.0 {
        return Ok(ScoreMap {
            values: med,
            scorer: map.scorer,
        });
    }
    let rad = (3.0 * params.gaussian_sigma).ceil() as isize;
    let two_s2 = 2.0 * params.gaussian_sigma * params.gaussian_sigma;
    let mut out = Grid::filled(rows, cols, f64::NAN);
    for (r, c) in mask.pixels() {
        let (mut num, mut den) = (0.0, 0.0);
        for dr in -rad..=rad {
            for dc in -rad..=rad {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if inside(rr, cc) {
                    let w = (-((dr * dr + dc * dc) as f64) / two_s2).exp();
                    num += w * med.get(rr as usize, cc as usize);
                    den += w;
                }
            }
        }
        *out.get_mut(r, c) = num / den;
    }
    Ok(ScoreMap {
        values: out,
        scorer: map.scorer,
    })
}

/// 8-bit RGB image, row-major, rows = depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, r: usize, c: usize) -> Rgb {
        let i = 3 * (r * self.width + c);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Grayscale B-mode everywhere; inside the mask the LUT color is blended in
/// with the given opacity.
pub fn render_overlay(
    bmode: &BModeImage,
    map: &ScoreMap,
    mask: &Region,
    scale: &ColorScale,
    opacity: f64,
) -> Result<RgbImage, DsiError> {
    if !(0.0..=1.0).contains(&opacity) {
        return Err(DsiError::Parameter(format!(
            "opacity must lie in [0, 1], got {opacity}"
        )));
    }
    let shape = bmode.pixels.shape();
    if map.values.shape() != shape || mask.shape() != shape {
        return Err(DsiError::Shape(format!(
            "B-mode {shape:?}, score map {:?}, mask {:?}",
            map.values.shape(),
            mask.shape()
        )));
    }
    let (rows, cols) = shape;
    let mut data = Vec::with_capacity(rows * cols * 3);
    for r in 0..rows {
        for c in 0..cols {
            let gray = (bmode.pixels.get(r, c).clamp(0.0, 1.0) * 255.0).round();
            if *mask.get(r, c) {
                let color = score_to_color(*map.values.get(r, c), scale);
                for ch in color {
                    data.push(((1.0 - opacity) * gray + opacity * ch as f64).round() as u8);
                }
            } else {
                data.extend_from_slice(&[gray as u8; 3]);
            }
        }
    }
    Ok(RgbImage {
        width: cols,
        height: rows,
        data,
    })
}

/// Mean LUT index of the score map over the mask.
pub fn mean_color_index(map: &ScoreMap, mask: &Region, scale: &ColorScale) -> f64 {
    let (sum, n) = map.mask_values(mask).fold((0.0, 0usize), |(s, n), v| {
        (s + scale.index(v) as f64, n + 1)
    });
    sum / n.max(1) as f64
}

pub fn write_png(path: &Path, image: &RgbImage) -> Result<(), DsiError> {
    let io = |source| DsiError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut enc = png::Encoder::new(
        BufWriter::new(file),
        image.width as u32,
        image.height as u32,
    );
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(&image.data)?;
    writer.finish()?;
    Ok(())
}

/// Settings recorded next to every rendered overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderProvenance {
    pub scorer: Scorer,
    pub lo: f64,
    pub hi: f64,
    pub median_k: usize,
    pub gaussian_sigma: f64,
    pub opacity: f64,
    pub lut_anchors: LutAnchors,
    pub global_score: f64,
    pub mean_color_index: f64,
}
