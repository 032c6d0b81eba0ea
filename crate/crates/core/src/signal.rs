//! RF frames, envelope demodulation, log compression and the on-disk frame
//! and mask formats.
//!
//! A frame is stored as raw little-endian `f32` samples, scanline-major,
//! next to a JSON sidecar named `<payload>.json`:
//!
//! ```text
//! {"schema":"rf-v1","n_lines":192,"n_depth":512,"fs_hz":4.0e7,"f0_hz":9.4e6,
//!  "axial_spacing_m":8.0e-5,"lateral_spacing_m":8.0e-5}
//! ```
//!
//! Masks are 8-bit binary PGM (`P5`) files where any nonzero byte marks the
//! lesion.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{analytic_magnitude, FftPair};
use crate::grid::{Grid, Region};

pub const FRAME_SCHEMA: &str = "rf-v1";
pub const MIN_DEPTH_SAMPLES: usize = 64;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed frame header: {0}")]
    Header(String),
    #[error("missing header field `{0}`")]
    MissingField(&'static str),
    #[error("unsupported frame schema `{0}`")]
    Schema(String),
    #[error("payload length mismatch: header implies {expected} bytes, found {actual}")]
    PayloadLengthMismatch { expected: usize, actual: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("undersampled frame: fs = {fs_hz} Hz must exceed 2 * f0 = {} Hz", 2.0 * f0_hz)]
    Undersampled { fs_hz: f64, f0_hz: f64 },
    #[error("invalid frame geometry: {0}")]
    Geometry(String),
}

impl FrameError {
    /// Stable machine-readable code for each failure class.
    pub fn code(&self) -> &'static str {
        match self {
            FrameError::Io { .. } => "io",
            FrameError::Header(_) => "header",
            FrameError::MissingField(_) => "missing-field",
            FrameError::Schema(_) => "schema",
            FrameError::PayloadLengthMismatch { .. } => "payload-length",
            FrameError::NonFinite(_) => "non-finite",
            FrameError::Undersampled { .. } => "undersampled",
            FrameError::Geometry(_) => "geometry",
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        FrameError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed PGM: {0}")]
    Format(String),
    #[error("mask has no lesion pixels")]
    Empty,
    #[error("mask has {0} 8-connected components, expected 1")]
    Disconnected(usize),
    #[error("mask area must be positive (pixel spacing {axial} x {lateral} m)")]
    ZeroArea { axial: f64, lateral: f64 },
    #[error("mask shape {mask:?} does not match frame shape {frame:?}")]
    ShapeMismatch {
        mask: (usize, usize),
        frame: (usize, usize),
    },
}

/// Acquisition geometry shared by a frame and everything derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub fs_hz: f64,
    pub f0_hz: f64,
    pub axial_spacing_m: f64,
    pub lateral_spacing_m: f64,
}

impl Geometry {
    pub fn validate(&self) -> Result<(), FrameError> {
        let g = self;
        if !(g.fs_hz.is_finite() && g.f0_hz.is_finite() && g.f0_hz > 0.0) {
            return Err(FrameError::Geometry(format!(
                "fs = {}, f0 = {} must be finite and positive",
                g.fs_hz, g.f0_hz
            )));
        }
        if g.fs_hz <= 2.0 * g.f0_hz {
            return Err(FrameError::Undersampled {
                fs_hz: g.fs_hz,
                f0_hz: g.f0_hz,
            });
        }
        for (name, v) in [
            ("axial_spacing_m", g.axial_spacing_m),
            ("lateral_spacing_m", g.lateral_spacing_m),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FrameError::Geometry(format!("{name} = {v}")));
            }
        }
        Ok(())
    }

    /// Area of one pixel in cm².
    pub fn pixel_area_cm2(&self) -> f64 {
        self.axial_spacing_m * self.lateral_spacing_m * 1e4
    }
}

/// Raw RF samples, `n_lines × n_depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfFrame {
    samples: Grid<f32>,
    geometry: Geometry,
}

impl RfFrame {
    pub fn new(samples: Grid<f32>, geometry: Geometry) -> Result<Self, FrameError> {
        geometry.validate()?;
        if samples.rows() < 1 || samples.cols() < MIN_DEPTH_SAMPLES {
            return Err(FrameError::Geometry(format!(
                "need n_lines >= 1 and n_depth >= {MIN_DEPTH_SAMPLES}, got {} x {}",
                samples.rows(),
                samples.cols()
            )));
        }
        if let Some(i) = samples.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(FrameError::NonFinite(i));
        }
        Ok(Self { samples, geometry })
    }

    pub fn samples(&self) -> &Grid<f32> {
        &self.samples
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn n_lines(&self) -> usize {
        self.samples.rows()
    }

    pub fn n_depth(&self) -> usize {
        self.samples.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.samples.shape()
    }

    /// Scanline `i` widened to `f64`.
    pub fn line_f64(&self, i: usize) -> Vec<f64> {
        self.samples.row(i).iter().map(|&v| v as f64).collect()
    }

    pub fn scaled(&self, gain: f32) -> Result<Self, FrameError> {
        RfFrame::new(self.samples.map(|v| v * gain), self.geometry)
    }
}

/// Echo amplitude per sample, same grid as the source RF.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeFrame {
    pub samples: Grid<f64>,
    pub geometry: Geometry,
}

/// Log-compressed envelope in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BModeImage {
    pub pixels: Grid<f64>,
    pub dynamic_range_db: f64,
}

/// Lesion region on the frame grid: non-empty and a single 8-connected
/// component.
#[derive(Debug, Clone, PartialEq)]
pub struct LesionMask {
    bits: Region,
    area_cm2: f64,
}

impl LesionMask {
    pub fn new(bits: Region, geometry: &Geometry) -> Result<Self, MaskError> {
        let n = bits.count();
        if n == 0 {
            return Err(MaskError::Empty);
        }
        let components = bits.component_count();
        if components != 1 {
            return Err(MaskError::Disconnected(components));
        }
        let area_cm2 = n as f64 * geometry.pixel_area_cm2();
        if !(area_cm2 > 0.0) {
            return Err(MaskError::ZeroArea {
                axial: geometry.axial_spacing_m,
                lateral: geometry.lateral_spacing_m,
            });
        }
        Ok(Self { bits, area_cm2 })
    }

    pub fn bits(&self) -> &Region {
        &self.bits
    }

    pub fn area_cm2(&self) -> f64 {
        self.area_cm2
    }

    pub fn pixel_count(&self) -> usize {
        self.bits.count()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.bits.shape()
    }

    pub fn check_aligned(&self, shape: (usize, usize)) -> Result<(), MaskError> {
        if self.shape() != shape {
            return Err(MaskError::ShapeMismatch {
                mask: self.shape(),
                frame: shape,
            });
        }
        Ok(())
    }
}

/// Per-scanline analytic-signal magnitude over the full line length.
pub fn demodulate_envelope(rf: &RfFrame) -> EnvelopeFrame {
    let (rows, cols) = rf.shape();
    let fft = FftPair::new(cols);
    let mut out = Vec::with_capacity(rows * cols);
    for line in 0..rows {
        out.extend(analytic_magnitude(&fft, &rf.line_f64(line)));
    }
    EnvelopeFrame {
        samples: Grid::from_vec(rows, cols, out).expect("shape preserved"),
        geometry: *rf.geometry(),
    }
}

/// Maps `env / env_max` onto `[0, 1]` over `dynamic_range_db` decibels.
pub fn log_compress(env: &EnvelopeFrame, dynamic_range_db: f64) -> BModeImage {
    assert!(
        dynamic_range_db > 0.0,
        "dynamic range must be positive, got {dynamic_range_db}"
    );
    let max = env
        .samples
        .as_slice()
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    let pixels = env.samples.map(|&v| {
        if max <= 0.0 || v <= 0.0 {
            0.0
        } else {
            (1.0 + 20.0 * (v / max).log10() / dynamic_range_db).clamp(0.0, 1.0)
        }
    });
    BModeImage {
        pixels,
        dynamic_range_db,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameHeader {
    schema: String,
    n_lines: usize,
    n_depth: usize,
    fs_hz: f64,
    f0_hz: f64,
    axial_spacing_m: f64,
    lateral_spacing_m: f64,
}

/// Sidecar header path for a payload path (`frame.rf` -> `frame.rf.json`).
pub fn sidecar_path(payload: &Path) -> PathBuf {
    let mut s = payload.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_frame(frame: &RfFrame, path: &Path) -> Result<(), FrameError> {
    let g = frame.geometry();
    let header = FrameHeader {
        schema: FRAME_SCHEMA.to_string(),
        n_lines: frame.n_lines(),
        n_depth: frame.n_depth(),
        fs_hz: g.fs_hz,
        f0_hz: g.f0_hz,
        axial_spacing_m: g.axial_spacing_m,
        lateral_spacing_m: g.lateral_spacing_m,
    };
    let mut payload = Vec::with_capacity(frame.samples().len() * 4);
    for v in frame.samples().as_slice() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, payload).map_err(|e| FrameError::io(path, e))?;
    let side = sidecar_path(path);
    let mut text = serde_json::to_string(&header).map_err(|e| FrameError::Header(e.to_string()))?;
    text.push('\n');
    fs::write(&side, text).map_err(|e| FrameError::io(&side, e))
}

pub fn read_frame(path: &Path) -> Result<RfFrame, FrameError> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| FrameError::io(&side, e))?;
    let header = parse_header(&text)?;
    let geometry = Geometry {
        fs_hz: header.fs_hz,
        f0_hz: header.f0_hz,
        axial_spacing_m: header.axial_spacing_m,
        lateral_spacing_m: header.lateral_spacing_m,
    };
    geometry.validate()?;
    let bytes = fs::read(path).map_err(|e| FrameError::io(path, e))?;
    let expected = header
        .n_lines
        .checked_mul(header.n_depth)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FrameError::Header("frame dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(FrameError::PayloadLengthMismatch {
            expected,
            actual: bytes.len(),
        });
    }
    let samples: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let grid = Grid::from_vec(header.n_lines, header.n_depth, samples).expect("length checked");
    RfFrame::new(grid, geometry)
}

fn parse_header(text: &str) -> Result<FrameHeader, FrameError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| FrameError::Header(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| FrameError::Header("header is not a JSON object".into()))?;
    for field in [
        "schema",
        "n_lines",
        "n_depth",
        "fs_hz",
        "f0_hz",
        "axial_spacing_m",
        "lateral_spacing_m",
    ] {
        if !obj.contains_key(field) {
            return Err(FrameError::MissingField(field));
        }
    }
    let header: FrameHeader =
        serde_json::from_value(value).map_err(|e| FrameError::Header(e.to_string()))?;
    if header.schema != FRAME_SCHEMA {
        return Err(FrameError::Schema(header.schema));
    }
    Ok(header)
}

/// Reads an 8-bit `P5` PGM into a region (nonzero = set).
pub fn read_region_pgm(path: &Path) -> Result<Region, MaskError> {
    let bytes = fs::read(path).map_err(|e| MaskError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let (width, height, maxval, offset) = parse_pgm_header(&bytes)?;
    if maxval > 255 {
        return Err(MaskError::Format(format!(
            "expected 8-bit PGM, maxval = {maxval}"
        )));
    }
    let data = &bytes[offset..];
    if data.len() != width * height {
        return Err(MaskError::Format(format!(
            "expected {} pixel bytes, found {}",
            width * height,
            data.len()
        )));
    }
    // PGM rows are image rows; image rows are depth, columns are scanlines.
    Ok(Grid::from_fn(width, height, |line, depth| {
        data[depth * width + line] != 0
    }))
}

pub fn read_mask(path: &Path, geometry: &Geometry) -> Result<LesionMask, MaskError> {
    LesionMask::new(read_region_pgm(path)?, geometry)
}

/// Writes a region as 8-bit `P5` PGM (255 = set). The image is oriented
/// depth-down, scanlines left to right.
pub fn write_region_pgm(region: &Region, path: &Path) -> Result<(), MaskError> {
    let (lines, depth) = region.shape();
    let mut out = format!("P5\n{lines} {depth}\n255\n").into_bytes();
    for d in 0..depth {
        for l in 0..lines {
            out.push(if *region.get(l, d) { 255 } else { 0 });
        }
    }
    fs::write(path, out).map_err(|e| MaskError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Writes a `u16` grid as 16-bit big-endian `P5` PGM, depth-down.
pub fn write_u16_pgm(grid: &Grid<u16>, maxval: u16, path: &Path) -> std::io::Result<()> {
    let (lines, depth) = grid.shape();
    let mut out = format!("P5\n{lines} {depth}\n{maxval}\n").into_bytes();
    for d in 0..depth {
        for l in 0..lines {
            out.extend_from_slice(&grid.get(l, d).to_be_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)
}

fn parse_pgm_header(bytes: &[u8]) -> Result<(usize, usize, usize, usize), MaskError> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(MaskError::Format("truncated header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(MaskError::Format(format!(
            "magic `{}` is not P5",
            tokens[0]
        )));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| MaskError::Format(format!("bad header number `{s}`")))
    };
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    // Exactly one whitespace byte separates the header from the raster.
    Ok((w, h, maxval, pos + 1))
}
