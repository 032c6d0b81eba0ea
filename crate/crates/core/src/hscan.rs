//! H-scan matched-filter analysis.
//!
//! Each RF sample is assigned the 1-based index of the Gaussian band-pass
//! filter whose analytic output envelope is largest at that sample. Low
//! levels mean low-frequency echoes (large scatterers), high levels mean
//! high-frequency echoes.
//!
//! Depth-dependent attenuation red-shifts the echo spectrum, so frames are
//! corrected zone by zone before the filter bank is applied: every zone's
//! spectrum is multiplied by `10^(α·f·x_z/20)`, with `f` in MHz and `x_z`
//! the zone's mean depth in cm.

use std::ops::Range;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{analytic_weight, bin_frequency, FftPair};
use crate::grid::Grid;
use crate::signal::{FrameError, LesionMask, RfFrame};

pub const DEFAULT_FILTERS: usize = 256;
pub const DEFAULT_FMIN_HZ: f64 = 5.2e6;
pub const DEFAULT_FMAX_HZ: f64 = 12.4e6;
pub const DEFAULT_REL_BANDWIDTH: f64 = 0.10;
pub const DEFAULT_ALPHA_DB_MHZ_CM: f64 = 1.0;
pub const DEFAULT_ZONES: usize = 10;

/// Gains below this are treated as exact zeros when building filter taps.
const NEGLIGIBLE_GAIN: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum HscanError {
    #[error(
        "filter bank needs n >= 2 and 0 < fmin < fmax (n = {n}, fmin = {fmin}, fmax = {fmax})"
    )]
    BankRange { n: usize, fmin: f64, fmax: f64 },
    #[error("relative bandwidth must be positive, got {0}")]
    Bandwidth(f64),
    #[error("axial spacing must be positive to locate depth zones")]
    ZeroSpacing,
    #[error("cannot split {n_depth} depth samples into {n_zones} zones")]
    Zones { n_depth: usize, n_zones: usize },
    #[error("attenuation coefficient must be finite and >= 0, got {0}")]
    Alpha(f64),
    #[error("lesion mask is empty or misaligned with the color map")]
    Mask,
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    peak_freqs_hz: Vec<f64>,
    rel_bandwidth: f64,
}

impl FilterBank {
    /// `n` Gaussian filters with peaks spaced uniformly over `[fmin, fmax]`
    /// and standard deviation `rel_bandwidth · peak`.
    pub fn new(
        n: usize,
        fmin_hz: f64,
        fmax_hz: f64,
        rel_bandwidth: f64,
    ) -> Result<Self, HscanError> {
        if n < 2 || !(fmin_hz > 0.0 && fmin_hz < fmax_hz && fmax_hz.is_finite()) {
            return Err(HscanError::BankRange {
                n,
                fmin: fmin_hz,
                fmax: fmax_hz,
            });
        }
        if !(rel_bandwidth > 0.0 && rel_bandwidth.is_finite()) {
            return Err(HscanError::Bandwidth(rel_bandwidth));
        }
        let step = (fmax_hz - fmin_hz) / (n - 1) as f64;
        let mut peaks: Vec<f64> = (0..n).map(|k| fmin_hz + step * k as f64).collect();
        peaks[n - 1] = fmax_hz;
        Ok(Self {
            peak_freqs_hz: peaks,
            rel_bandwidth,
        })
    }

    pub fn len(&self) -> usize {
        self.peak_freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peak_freqs_hz.is_empty()
    }

    pub fn peak_freqs_hz(&self) -> &[f64] {
        &self.peak_freqs_hz
    }

    pub fn rel_bandwidth(&self) -> f64 {
        self.rel_bandwidth
    }

    pub fn spacing_hz(&self) -> f64 {
        self.peak_freqs_hz[1] - self.peak_freqs_hz[0]
    }

    /// Gain of filter `k` (0-based) at frequency `f_hz`.
    pub fn gain(&self, k: usize, f_hz: f64) -> f64 {
        let peak = self.peak_freqs_hz[k];
        let sigma = self.rel_bandwidth * peak;
        let d = f_hz - peak;
        (-(d * d) / (2.0 * sigma * sigma)).exp()
    }

    /// Non-negligible one-sided taps `(bin, weight)` per filter for a
    /// length-`n` transform at sampling rate `fs`.
    fn taps(&self, n: usize, fs: f64) -> Vec<Vec<(usize, f64)>> {
        (0..self.len())
            .map(|k| {
                (0..n)
                    .filter_map(|bin| {
                        let w = analytic_weight(bin, n);
                        if w == 0.0 {
                            return None;
                        }
                        let g = self.gain(k, bin_frequency(bin, n, fs)) * w;
                        (g > NEGLIGIBLE_GAIN).then_some((bin, g))
                    })
                    .collect()
            })
            .collect()
    }
}

impl Default for FilterBank {
    fn default() -> Self {
        FilterBank::new(
            DEFAULT_FILTERS,
            DEFAULT_FMIN_HZ,
            DEFAULT_FMAX_HZ,
            DEFAULT_REL_BANDWIDTH,
        )
        .expect("default bank is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttenuationSpec {
    /// dB / (MHz · cm)
    pub alpha_db_mhz_cm: f64,
    pub n_zones: usize,
}

impl Default for AttenuationSpec {
    fn default() -> Self {
        Self {
            alpha_db_mhz_cm: DEFAULT_ALPHA_DB_MHZ_CM,
            n_zones: DEFAULT_ZONES,
        }
    }
}

/// Contiguous depth zones; the last zone absorbs the remainder.
pub fn depth_zones(n_depth: usize, n_zones: usize) -> Result<Vec<Range<usize>>, HscanError> {
    if n_zones == 0 || n_depth / n_zones == 0 {
        return Err(HscanError::Zones { n_depth, n_zones });
    }
    let size = n_depth / n_zones;
    Ok((0..n_zones)
        .map(|z| {
            let start = z * size;
            let end = if z + 1 == n_zones {
                n_depth
            } else {
                start + size
            };
            start..end
        })
        .collect())
}

/// Mean depth of a zone in cm, sample `i` sitting at `i · axial_spacing`.
pub fn zone_mean_depth_cm(zone: &Range<usize>, axial_spacing_m: f64) -> f64 {
    (zone.start + zone.end - 1) as f64 / 2.0 * axial_spacing_m * 100.0
}

/// Undoes depth attenuation zone by zone.
pub fn correct_attenuation(rf: &RfFrame, spec: &AttenuationSpec) -> Result<RfFrame, HscanError> {
    apply_zone_gain(rf, spec, 1.0)
}

/// Forward model of [`correct_attenuation`]: applies `10^(-α·f·x_z/20)` per
/// zone. Used by the phantom generator and for round-trip checks.
pub fn attenuate(rf: &RfFrame, spec: &AttenuationSpec) -> Result<RfFrame, HscanError> {
    apply_zone_gain(rf, spec, -1.0)
}

fn apply_zone_gain(rf: &RfFrame, spec: &AttenuationSpec, sign: f64) -> Result<RfFrame, HscanError> {
    let alpha = spec.alpha_db_mhz_cm;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(HscanError::Alpha(alpha));
    }
    let g = *rf.geometry();
    if !(g.axial_spacing_m > 0.0) {
        return Err(HscanError::ZeroSpacing);
    }
    let zones = depth_zones(rf.n_depth(), spec.n_zones)?;
    // Per zone: FFT plan and the per-bin gain.
    let plans: Vec<(Range<usize>, FftPair, Vec<f64>)> = zones
        .into_iter()
        .map(|zone| {
            let n = zone.len();
            let depth_cm = zone_mean_depth_cm(&zone, g.axial_spacing_m);
            let gains = (0..n)
                .map(|bin| {
                    let f_mhz = bin_frequency(bin, n, g.fs_hz) / 1e6;
                    10f64.powf(sign * alpha * f_mhz * depth_cm / 20.0)
                })
                .collect();
            (zone, FftPair::new(n), gains)
        })
        .collect();

    let rows: Vec<Vec<f32>> = (0..rf.n_lines())
        .into_par_iter()
        .map(|line| {
            let x = rf.line_f64(line);
            let mut out = vec![0f32; x.len()];
            for (zone, fft, gains) in &plans {
                let mut spec = fft.forward_real(&x[zone.clone()]);
                for (v, &gain) in spec.iter_mut().zip(gains) {
                    *v *= gain;
                }
                fft.inverse_in_place(&mut spec);
                for (o, v) in out[zone.clone()].iter_mut().zip(&spec) {
                    *o = v.re as f32;
                }
            }
            out
        })
        .collect();
    let grid = Grid::from_vec(rf.n_lines(), rf.n_depth(), rows.concat()).expect("shape preserved");
    Ok(RfFrame::new(grid, g)?)
}

/// Per-sample H-scan levels in `1..=n_filters`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorLevelMap {
    pub levels: Grid<u16>,
}

impl ColorLevelMap {
    pub fn shape(&self) -> (usize, usize) {
        self.levels.shape()
    }
}

/// Assigns each sample the level of the filter with the largest output
/// envelope. Ties go to the lower index, so silent samples get level 1.
pub fn color_level_map(rf: &RfFrame, bank: &FilterBank) -> ColorLevelMap {
    let n = rf.n_depth();
    let fft = FftPair::new(n);
    let taps = bank.taps(n, rf.geometry().fs_hz);
    let rows: Vec<Vec<u16>> = (0..rf.n_lines())
        .into_par_iter()
        .map(|line| {
            let spectrum = fft.forward_real(&rf.line_f64(line));
            let mut best = vec![f64::NEG_INFINITY; n];
            let mut level = vec![1u16; n];
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.inverse_scratch_len()];
            for (k, filter) in taps.iter().enumerate() {
                buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for &(bin, w) in filter {
                    buf[bin] = spectrum[bin] * w;
                }
                // The common 1/n factor does not change the argmax.
                fft.inverse_unscaled(&mut buf, &mut scratch);
                for (t, v) in buf.iter().enumerate() {
                    let power = v.norm_sqr();
                    if power > best[t] {
                        best[t] = power;
                        level[t] = (k + 1) as u16;
                    }
                }
            }
            level
        })
        .collect();
    ColorLevelMap {
        levels: Grid::from_vec(rf.n_lines(), n, rows.concat()).expect("shape preserved"),
    }
}

/// Mean color level over the lesion.
pub fn lesion_color_level(map: &ColorLevelMap, mask: &LesionMask) -> Result<f64, HscanError> {
    if mask.shape() != map.shape() {
        return Err(HscanError::Mask);
    }
    let (sum, count) = mask
        .bits()
        .pixels()
        .fold((0.0, 0usize), |(s, c), (r, col)| {
            (s + *map.levels.get(r, col) as f64, c + 1)
        });
    if count == 0 {
        return Err(HscanError::Mask);
    }
    Ok(sum / count as f64)
}
