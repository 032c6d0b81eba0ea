//! Synthetic lesion phantoms and labeled cohorts.
//!
//! Each frame is built from a band-limited complex Gaussian speckle field.
//! Its magnitude is mapped onto a Burr distribution through the exact χ²₂
//! survival function, so every pixel has a Burr-distributed amplitude. The
//! field's phase is kept, and the result is modulated onto the background
//! carrier or the lesion's scatterer frequency. The lesion outline is a
//! perturbed ellipse. Depth attenuation is applied last with the forward
//! model of the analysis-side correction.

use std::fmt;
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::burr::{self, BurrError};
use crate::grid::{Grid, Region};
use crate::hscan::{self, AttenuationSpec, HscanError};
use crate::ml::Label;
use crate::signal::{self, FrameError, Geometry, LesionMask, MaskError, RfFrame};

pub use crate::burr::sample_burr;

pub const COHORT_SCHEMA: &str = "cohort-v1";
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("invalid lesion spec: {0}")]
    Spec(String),
    #[error("invalid cohort config: {0}")]
    Config(String),
    #[error("lesion out of bounds: {0}")]
    OutOfBounds(String),
    #[error(transparent)]
    Burr(#[from] BurrError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Hscan(#[from] HscanError),
    #[error("cannot write cohort at {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read manifest {path}: {message}")]
    Manifest { path: String, message: String },
}

impl PhantomError {
    /// I/O failures as opposed to domain or configuration errors.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            PhantomError::Write { .. }
                | PhantomError::Manifest { .. }
                | PhantomError::Frame(FrameError::Io { .. })
                | PhantomError::Mask(MaskError::Io { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Major,
    Common,
    Uncommon,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Major => "major",
            Category::Common => "common",
            Category::Uncommon => "uncommon",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "major" => Ok(Category::Major),
            "common" => Ok(Category::Common),
            "uncommon" => Ok(Category::Uncommon),
            _ => Err(format!("unknown category `{s}`")),
        }
    }
}

/// Ground truth of one synthetic lesion. Pixel coordinates are
/// `(line, depth)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionSpec {
    pub label: Label,
    pub center: (f64, f64),
    /// Semi-axes `(lateral, axial)` in pixels.
    pub axes: (f64, f64),
    pub roughness_amp: f64,
    pub roughness_lobes: u32,
    /// Angular phase of the boundary perturbation, radians.
    #[serde(default)]
    pub roughness_phase: f64,
    pub scatterer_freq_hz: f64,
    pub burr_lambda: f64,
    pub burr_b: f64,
    /// Lesion/background ratio of median echo amplitude, dB.
    pub contrast_db: f64,
}

impl LesionSpec {
    pub fn validate(&self, frame: &FrameConfig) -> Result<(), PhantomError> {
        let bad = |m: String| Err(PhantomError::Spec(m));
        if !(self.axes.0 > 0.0 && self.axes.1 > 0.0) {
            return bad(format!("axes must be positive, got {:?}", self.axes));
        }
        if !(0.0..=0.5).contains(&self.roughness_amp) {
            return bad(format!(
                "roughness_amp must lie in [0, 0.5], got {}",
                self.roughness_amp
            ));
        }
        if self.roughness_lobes < 3 {
            return bad(format!(
                "roughness_lobes must be >= 3, got {}",
                self.roughness_lobes
            ));
        }
        if !(self.scatterer_freq_hz > 0.0 && self.scatterer_freq_hz < frame.fs_hz / 2.0) {
            return bad(format!(
                "scatterer frequency {} Hz outside (0, fs/2)",
                self.scatterer_freq_hz
            ));
        }
        if !self.contrast_db.is_finite() {
            return bad("contrast_db must be finite".into());
        }
        burr::sample_burr(
            self.burr_lambda,
            self.burr_b,
            0,
            &mut ChaCha8Rng::seed_from_u64(0),
        )?;
        Ok(())
    }

    /// Boundary radius along direction `theta` (measured from the depth
    /// axis toward the lateral axis).
    pub fn radius(&self, theta: f64) -> f64 {
        let (a, b) = self.axes;
        let (s, c) = theta.sin_cos();
        let r0 = a * b / ((b * s).powi(2) + (a * c).powi(2)).sqrt();
        r0 * (1.0
            + self.roughness_amp
                * (self.roughness_lobes as f64 * theta + self.roughness_phase).sin())
    }
}

/// Acquisition and background settings shared by every phantom frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameConfig {
    pub n_lines: usize,
    pub n_depth: usize,
    pub fs_hz: f64,
    /// Background carrier frequency.
    pub f0_hz: f64,
    /// Pixel pitch, identical laterally and axially.
    pub spacing_m: f64,
    pub background_lambda: f64,
    pub background_b: f64,
    /// Standard deviation, in samples, of the axial speckle correlation.
    pub speckle_sigma_samples: f64,
    pub attenuation: AttenuationSpec,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            n_lines: 192,
            n_depth: 512,
            fs_hz: 40e6,
            f0_hz: 9.4e6,
            spacing_m: 0.08e-3,
            background_lambda: 1.0,
            background_b: 3.0,
            speckle_sigma_samples: 2.0,
            attenuation: AttenuationSpec::default(),
        }
    }
}

impl FrameConfig {
    pub fn geometry(&self) -> Geometry {
        Geometry {
            fs_hz: self.fs_hz,
            f0_hz: self.f0_hz,
            axial_spacing_m: self.spacing_m,
            lateral_spacing_m: self.spacing_m,
        }
    }

    pub fn pixel_area_cm2(&self) -> f64 {
        self.geometry().pixel_area_cm2()
    }
}

/// Rasterizes the perturbed ellipse, keeping its largest 8-connected
/// component. Fails if the lesion touches or crosses the frame border.
pub fn lesion_region(
    spec: &LesionSpec,
    n_lines: usize,
    n_depth: usize,
) -> Result<Region, PhantomError> {
    let (cl, cd) = spec.center;
    let reach = spec.axes.0.max(spec.axes.1) * (1.0 + spec.roughness_amp);
    let region = Grid::from_fn(n_lines, n_depth, |l, d| {
        let (dl, dd) = (l as f64 - cl, d as f64 - cd);
        if dl.abs() > reach + 1.0 || dd.abs() > reach + 1.0 {
            return false;
        }
        let r = (dl * dl + dd * dd).sqrt();
        r == 0.0 || r <= spec.radius(dl.atan2(dd))
    });
    let region = region.largest_component();
    if region.count() == 0 {
        return Err(PhantomError::Spec("lesion rasterizes to no pixels".into()));
    }
    let touches = region
        .pixels()
        .any(|(l, d)| l == 0 || d == 0 || l + 1 == n_lines || d + 1 == n_depth);
    if touches {
        return Err(PhantomError::OutOfBounds(format!(
            "center {:?}, axes {:?}, roughness {} does not fit a {n_lines} x {n_depth} frame",
            spec.center, spec.axes, spec.roughness_amp
        )));
    }
    Ok(region)
}

/// Unit-L2 Gaussian kernel, so filtered unit white noise keeps unit variance.
fn unit_energy_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let h = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-h..=h)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
    k.iter_mut().for_each(|v| *v /= norm);
    k
}

fn circular_filter(x: &[f64], k: &[f64]) -> Vec<f64> {
    let n = x.len() as isize;
    let h = (k.len() / 2) as isize;
    (0..n)
        .map(|i| {
            k.iter()
                .enumerate()
                .map(|(j, w)| w * x[(i + j as isize - h).rem_euclid(n) as usize])
                .sum()
        })
        .collect()
}

/// Background λ that gives the requested lesion/background median ratio.
pub fn background_lambda_for(spec: &LesionSpec, background_b: f64) -> f64 {
    let ratio = 10f64.powf(spec.contrast_db / 20.0);
    burr::median(spec.burr_lambda, spec.burr_b) / (ratio * burr::median(1.0, background_b))
}

/// Renders one lesion frame: attenuated RF and the ground-truth mask.
pub fn synth_lesion_frame(
    spec: &LesionSpec,
    frame: &FrameConfig,
    seed: u64,
) -> Result<(RfFrame, LesionMask), PhantomError> {
    spec.validate(frame)?;
    let geometry = frame.geometry();
    geometry.validate()?;
    let bg_lambda = background_lambda_for(spec, frame.background_b);
    burr::sample_burr(
        bg_lambda,
        frame.background_b,
        0,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    let region = lesion_region(spec, frame.n_lines, frame.n_depth)?;
    let mask = LesionMask::new(region, &geometry)?;

    let kernel = unit_energy_kernel(frame.speckle_sigma_samples);
    let lines: Vec<Vec<f32>> = (0..frame.n_lines)
        .into_par_iter()
        .map(|line| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(line as u64 + 1);
            let white = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..frame.n_depth)
                    .map(|_| Normal::new(0.0, 1.0).unwrap().sample(rng))
                    .collect()
            };
            let re = circular_filter(&white(&mut rng), &kernel);
            let im = circular_filter(&white(&mut rng), &kernel);
            let phase0 = rng.random_range(0.0..std::f64::consts::TAU);
            (0..frame.n_depth)
                .map(|d| {
                    let inside = *mask.bits().get(line, d);
                    let (lambda, b, f) = if inside {
                        (spec.burr_lambda, spec.burr_b, spec.scatterer_freq_hz)
                    } else {
                        (bg_lambda, frame.background_b, frame.f0_hz)
                    };
                    // |z|² of a unit complex Gaussian is χ²₂: P(|z|² > x) = e^{−x/2}.
                    let m2 = re[d] * re[d] + im[d] * im[d];
                    let tail = (-0.5 * m2).exp().max(f64::MIN_POSITIVE);
                    let amp = burr::inverse_survival(tail, lambda, b);
                    let t = d as f64 / frame.fs_hz;
                    let phase = std::f64::consts::TAU * f * t + im[d].atan2(re[d]) + phase0;
                    (amp * phase.cos()) as f32
                })
                .collect()
        })
        .collect();
    let grid = Grid::from_vec(frame.n_lines, frame.n_depth, lines.concat()).expect("frame shape");
    let clean = RfFrame::new(grid, geometry)?;
    let rf = hscan::attenuate(&clean, &frame.attenuation)?;
    Ok((rf, mask))
}

/// Mean and standard deviation of a jittered archetype parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub mean: f64,
    pub std: f64,
}

impl Jitter {
    pub const fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }

    fn draw<R: Rng>(&self, scale: f64, rng: &mut R) -> f64 {
        self.mean + self.std * scale * Normal::new(0.0, 1.0).unwrap().sample(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub scatterer_freq_hz: Jitter,
    pub burr_b: Jitter,
    pub roughness_amp: Jitter,
    pub roughness_lobes: (u32, u32),
    pub contrast_db: Jitter,
}

impl Archetype {
    /// Smooth boundary, small scatterers (high frequency), low Burr b,
    /// mildly hypoechoic.
    pub fn benign() -> Self {
        Self {
            scatterer_freq_hz: Jitter::new(10.5e6, 0.35e6),
            burr_b: Jitter::new(2.5, 0.15),
            roughness_amp: Jitter::new(0.02, 0.015),
            roughness_lobes: (3, 5),
            contrast_db: Jitter::new(-3.0, 1.0),
        }
    }

    /// Rough boundary, large scatterers (low frequency), high Burr b,
    /// markedly hypoechoic.
    pub fn malignant() -> Self {
        Self {
            scatterer_freq_hz: Jitter::new(7.5e6, 0.35e6),
            burr_b: Jitter::new(4.0, 0.3),
            roughness_amp: Jitter::new(0.22, 0.04),
            roughness_lobes: (5, 8),
            contrast_db: Jitter::new(-8.0, 1.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub n_benign: usize,
    pub n_malignant: usize,
    /// Lesion area range in cm², sampled uniformly.
    pub area_range_cm2: (f64, f64),
    /// Axial/lateral semi-axis ratio range.
    pub aspect_range: (f64, f64),
    pub benign: Archetype,
    pub malignant: Archetype,
    /// Probabilities of the major, common and uncommon categories.
    pub category_weights: [f64; 3],
    /// Jitter multiplier per category; harder categories scatter more.
    pub category_spread: [f64; 3],
    /// Extra jitter for small lesions: spreads are multiplied by
    /// `1 + size_noise · reference_area / area`.
    pub size_noise: f64,
    pub size_noise_reference_cm2: f64,
    pub frame: FrameConfig,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_benign: 40,
            n_malignant: 40,
            area_range_cm2: (0.1, 1.1),
            aspect_range: (1.4, 2.0),
            benign: Archetype::benign(),
            malignant: Archetype::malignant(),
            category_weights: [0.6, 0.25, 0.15],
            category_spread: [1.0, 1.5, 2.5],
            size_noise: 0.0,
            size_noise_reference_cm2: 0.3,
            frame: FrameConfig::default(),
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |m: &str| Err(PhantomError::Config(m.to_string()));
        if self.n_benign + self.n_malignant < 1 {
            return bad("cohort needs at least one lesion");
        }
        let (lo, hi) = self.area_range_cm2;
        if !(lo > 0.0 && hi >= lo) {
            return bad("area range must satisfy 0 < lo <= hi");
        }
        let (alo, ahi) = self.aspect_range;
        if !(alo > 0.0 && ahi >= alo) {
            return bad("aspect range must satisfy 0 < lo <= hi");
        }
        if self.category_weights.iter().any(|w| !(*w >= 0.0))
            || self.category_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("category weights must be non-negative and not all zero");
        }
        if !(self.size_noise >= 0.0 && self.size_noise_reference_cm2 > 0.0) {
            return bad("size noise must be >= 0 with a positive reference area");
        }
        for a in [&self.benign, &self.malignant] {
            if a.roughness_lobes.0 < 3 || a.roughness_lobes.1 < a.roughness_lobes.0 {
                return bad("roughness lobes must satisfy 3 <= min <= max");
            }
        }
        Ok(())
    }
}

/// Independent stream for entry `index` of a cohort seeded with `seed`.
fn entry_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

pub fn entry_id(index: usize) -> String {
    format!("L{index:04}")
}

/// Draws the ground truth of cohort entry `index`; the first `n_benign`
/// entries are benign.
pub fn draw_lesion(config: &CohortConfig, seed: u64, index: usize) -> (LesionSpec, Category, u64) {
    let mut rng = entry_rng(seed, index);
    let label = if index < config.n_benign {
        Label::Benign
    } else {
        Label::Malignant
    };
    let arch = match label {
        Label::Benign => &config.benign,
        Label::Malignant => &config.malignant,
    };
    let total: f64 = config.category_weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut cat_idx = 2;
    for (k, w) in config.category_weights.iter().enumerate() {
        acc += w;
        if u < acc {
            cat_idx = k;
            break;
        }
    }
    let category = [Category::Major, Category::Common, Category::Uncommon][cat_idx];

    let (alo, ahi) = config.area_range_cm2;
    let area_cm2 = alo + (ahi - alo) * rng.random::<f64>();
    let aspect = rng.random_range(config.aspect_range.0..=config.aspect_range.1);
    let area_px = area_cm2 / config.frame.pixel_area_cm2();
    let lateral = (area_px / (std::f64::consts::PI * aspect)).sqrt();
    let axes = (lateral, aspect * lateral);

    let spread = config.category_spread[cat_idx]
        * (1.0 + config.size_noise * config.size_noise_reference_cm2 / area_cm2);
    let roughness_amp = arch.roughness_amp.draw(spread, &mut rng).clamp(0.0, 0.35);
    let roughness_lobes = rng.random_range(arch.roughness_lobes.0..=arch.roughness_lobes.1);
    let roughness_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let nyquist = config.frame.fs_hz / 2.0;
    let scatterer_freq_hz = arch
        .scatterer_freq_hz
        .draw(spread, &mut rng)
        .clamp(0.1 * nyquist, 0.9 * nyquist);
    let burr_b = arch.burr_b.draw(spread, &mut rng).max(1.2);
    let contrast_db = arch.contrast_db.draw(spread, &mut rng);
    // Lesion λ follows from the contrast against the fixed background.
    let f = &config.frame;
    let burr_lambda =
        f.background_lambda * 10f64.powf(contrast_db / 20.0) * burr::median(1.0, f.background_b)
            / burr::median(1.0, burr_b);

    // An ellipse's lateral extent is its lateral semi-axis; the boundary
    // perturbation scales it by at most 1 + amplitude.
    let lateral_reach = axes.0 * (1.0 + roughness_amp) + 3.0;
    let axial_reach = axes.1 * (1.0 + roughness_amp) + 3.0;
    let lateral_slack = (f.n_lines as f64 / 2.0 - lateral_reach).max(0.0);
    let depth_lo = axial_reach;
    let depth_hi = (f.n_depth as f64 - axial_reach).max(depth_lo);
    let center = (
        f.n_lines as f64 / 2.0 + rng.random_range(-0.5..=0.5) * lateral_slack,
        rng.random_range(depth_lo..=depth_hi),
    );
    let frame_seed = rng.random::<u64>();
    (
        LesionSpec {
            label,
            center,
            axes,
            roughness_amp,
            roughness_lobes,
            roughness_phase,
            scatterer_freq_hz,
            burr_lambda,
            burr_b,
            contrast_db,
        },
        category,
        frame_seed,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub schema: String,
    pub seed: u64,
    pub id: String,
    /// Paths relative to the manifest directory.
    pub rf_path: String,
    pub mask_path: String,
    pub label: Label,
    pub category: Category,
    pub area_cm2: f64,
    pub spec: LesionSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortManifest {
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
    /// Directory the entry paths are relative to.
    pub root: PathBuf,
}

/// One generated lesion kept in memory.
#[derive(Debug, Clone)]
pub struct SynthLesion {
    pub id: String,
    pub category: Category,
    pub spec: LesionSpec,
    pub rf: RfFrame,
    pub mask: LesionMask,
}

pub fn synth_entry(
    config: &CohortConfig,
    seed: u64,
    index: usize,
) -> Result<SynthLesion, PhantomError> {
    let (spec, category, frame_seed) = draw_lesion(config, seed, index);
    let (rf, mask) = synth_lesion_frame(&spec, &config.frame, frame_seed)?;
    Ok(SynthLesion {
        id: entry_id(index),
        category,
        spec,
        rf,
        mask,
    })
}

/// Generates a cohort in memory. Entries are independent of generation
/// order.
pub fn synth_cohort_in_memory(
    config: &CohortConfig,
    seed: u64,
) -> Result<Vec<SynthLesion>, PhantomError> {
    config.validate()?;
    (0..config.n_benign + config.n_malignant)
        .into_par_iter()
        .map(|i| synth_entry(config, seed, i))
        .collect()
}

/// Generates a cohort and writes frames, masks and `manifest.jsonl` under
/// `out_dir`, creating it if needed.
pub fn synth_cohort(
    config: &CohortConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<CohortManifest, PhantomError> {
    config.validate()?;
    let write_err = |path: &Path, source| PhantomError::Write {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| write_err(out_dir, e))?;
    let entries: Vec<ManifestEntry> = (0..config.n_benign + config.n_malignant)
        .into_par_iter()
        .map(|i| -> Result<ManifestEntry, PhantomError> {
            let lesion = synth_entry(config, seed, i)?;
            let rf_name = format!("{}.rf", lesion.id);
            let mask_name = format!("{}_mask.pgm", lesion.id);
            signal::write_frame(&lesion.rf, &out_dir.join(&rf_name)).map_err(|e| match e {
                FrameError::Io { source, .. } => write_err(&out_dir.join(&rf_name), source),
                other => other.into(),
            })?;
            signal::write_region_pgm(lesion.mask.bits(), &out_dir.join(&mask_name)).map_err(
                |e| match e {
                    MaskError::Io { source, .. } => write_err(&out_dir.join(&mask_name), source),
                    other => other.into(),
                },
            )?;
            Ok(ManifestEntry {
                schema: COHORT_SCHEMA.to_string(),
                seed,
                id: lesion.id,
                rf_path: rf_name,
                mask_path: mask_name,
                label: lesion.spec.label,
                category: lesion.category,
                area_cm2: lesion.mask.area_cm2(),
                spec: lesion.spec,
            })
        })
        .collect::<Result<_, _>>()?;
    let manifest = CohortManifest {
        seed,
        entries,
        root: out_dir.to_path_buf(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = String::new();
    for e in &manifest.entries {
        text.push_str(&serde_json::to_string(e).expect("entry serializes"));
        text.push('\n');
    }
    let mut file = std::fs::File::create(&path).map_err(|e| write_err(&path, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| write_err(&path, e))?;
    Ok(manifest)
}

impl CohortManifest {
    /// Reads a `manifest.jsonl` file (or the one inside a directory).
    pub fn load(path: &Path) -> Result<Self, PhantomError> {
        let file_path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let err = |message: String| PhantomError::Manifest {
            path: file_path.display().to_string(),
            message,
        };
        let file = std::fs::File::open(&file_path).map_err(|e| err(e.to_string()))?;
        let mut entries: Vec<ManifestEntry> = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: ManifestEntry =
                serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", n + 1)))?;
            if e.schema != COHORT_SCHEMA {
                return Err(err(format!(
                    "line {}: unsupported schema `{}`",
                    n + 1,
                    e.schema
                )));
            }
            entries.push(e);
        }
        if entries.is_empty() {
            return Err(err("manifest has no entries".into()));
        }
        let mut ids: Vec<&str> = entries.iter().map(|e| e.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(err("duplicate entry ids".into()));
        }
        Ok(Self {
            seed: entries[0].seed,
            entries,
            root: file_path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default(),
        })
    }

    pub fn rf_path(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.rf_path)
    }

    pub fn mask_path(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.mask_path)
    }
}
