use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::burr::{self, BurrError};
use crate::hscan::{self, ColorLevelMap};
use crate::region::{self, RegionError};
use crate::signal::{BModeImage, EnvelopeFrame, LesionMask};

/// The ten extractable lesion features, in table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    HscanColorLevel,
    HscanStd,
    BoundaryRoughness,
    BscanMean,
    BscanStd,
    BscanBoundaryMean,
    BscanBoundaryStd,
    BurrLambda,
    BurrB,
    /// Unassigned tenth slot, always 0 and excluded from defaults.
    Reserve,
}

impl Feature {
    pub const ALL: [Feature; 10] = [
        Feature::HscanColorLevel,
        Feature::HscanStd,
        Feature::BoundaryRoughness,
        Feature::BscanMean,
        Feature::BscanStd,
        Feature::BscanBoundaryMean,
        Feature::BscanBoundaryStd,
        Feature::BurrLambda,
        Feature::BurrB,
        Feature::Reserve,
    ];

    /// H-scan color level, boundary roughness, B-scan STD, B-scan boundary
    /// STD and Burr b.
    pub const DEFAULT_SUBSET: [Feature; 5] = [
        Feature::HscanColorLevel,
        Feature::BoundaryRoughness,
        Feature::BscanStd,
        Feature::BscanBoundaryStd,
        Feature::BurrB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::HscanColorLevel => "hscan_color_level",
            Feature::HscanStd => "hscan_std",
            Feature::BoundaryRoughness => "boundary_roughness",
            Feature::BscanMean => "bscan_mean",
            Feature::BscanStd => "bscan_std",
            Feature::BscanBoundaryMean => "bscan_boundary_mean",
            Feature::BscanBoundaryStd => "bscan_boundary_std",
            Feature::BurrLambda => "burr_lambda",
            Feature::BurrB => "burr_b",
            Feature::Reserve => "reserve",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown feature `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; 10]);

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f.index()]
    }

    pub fn set(&mut self, f: Feature, v: f64) {
        self.0[f.index()] = v;
    }

    pub fn select(&self, subset: &[Feature]) -> Vec<f64> {
        subset.iter().map(|&f| self.get(f)).collect()
    }
}

#[derive(Debug, Error)]
#[error("feature `{feature}`: {message}")]
pub struct FeatureError {
    pub feature: Feature,
    pub message: String,
}

impl FeatureError {
    fn new(feature: Feature, err: impl fmt::Display) -> Self {
        Self {
            feature,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionParams {
    pub margin_fraction: f64,
    pub burr_rate: f64,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            margin_fraction: region::DEFAULT_MARGIN_FRACTION,
            burr_rate: burr::DEFAULT_RATE,
        }
    }
}

/// Measures all ten features of one lesion. Inputs must share one grid.
pub fn extract_features(
    envelope: &EnvelopeFrame,
    bmode: &BModeImage,
    color_map: &ColorLevelMap,
    mask: &LesionMask,
    params: &ExtractionParams,
) -> Result<FeatureVector, FeatureError> {
    let shape = mask.shape();
    for (f, s) in [
        (Feature::BurrB, envelope.samples.shape()),
        (Feature::BscanMean, bmode.pixels.shape()),
        (Feature::HscanColorLevel, color_map.shape()),
    ] {
        if s != shape {
            return Err(FeatureError::new(
                f,
                format!("input shape {s:?} does not match mask shape {shape:?}"),
            ));
        }
    }
    let mut fv = FeatureVector([0.0; 10]);

    let levels = color_map.levels.map(|&l| l as f64);
    let hstats = region::values_stats(&levels, mask.bits())
        .map_err(|e| FeatureError::new(Feature::HscanColorLevel, e))?;
    let mean_level = hscan::lesion_color_level(color_map, mask)
        .map_err(|e| FeatureError::new(Feature::HscanColorLevel, e))?;
    fv.set(Feature::HscanColorLevel, mean_level);
    fv.set(Feature::HscanStd, hstats.std);

    fv.set(Feature::BoundaryRoughness, region::boundary_roughness(mask));

    let lesion = region::region_stats(bmode, mask.bits())
        .map_err(|e| FeatureError::new(Feature::BscanMean, e))?;
    fv.set(Feature::BscanMean, lesion.mean);
    fv.set(Feature::BscanStd, lesion.std);

    let margins = region::margins(mask, params.margin_fraction)
        .map_err(|e: RegionError| FeatureError::new(Feature::BscanBoundaryStd, e))?;
    let boundary = region::region_stats(bmode, &margins.combined)
        .map_err(|e| FeatureError::new(Feature::BscanBoundaryStd, e))?;
    fv.set(Feature::BscanBoundaryMean, boundary.mean);
    fv.set(Feature::BscanBoundaryStd, boundary.std);

    let amplitudes: Vec<f64> = mask
        .bits()
        .pixels()
        .map(|(r, c)| *envelope.samples.get(r, c))
        .collect();
    let fit = burr::fit_samples(&amplitudes, params.burr_rate)
        .map_err(|e: BurrError| FeatureError::new(Feature::BurrB, e))?;
    if !fit.converged {
        log::warn!(
            "Burr fit did not converge (R² = {:.4}); using best estimate",
            fit.r_squared
        );
    }
    fv.set(Feature::BurrLambda, fit.lambda_hat);
    fv.set(Feature::BurrB, fit.b_hat);

    if let Some(f) = Feature::ALL.into_iter().find(|&f| !fv.get(f).is_finite()) {
        return Err(FeatureError::new(f, "non-finite value"));
    }
    Ok(fv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::signal::Geometry;

    #[test]
    fn names_round_trip() {
        for f in Feature::ALL {
            assert_eq!(f.name().parse::<Feature>().unwrap(), f);
        }
        assert!("nope".parse::<Feature>().is_err());
        assert_eq!(
            Feature::ALL
                .iter()
                .enumerate()
                .filter(|(i, f)| f.index() == *i)
                .count(),
            10
        );
    }

    #[test]
    fn constant_lesion_has_zero_bscan_std() {
        let g = Geometry {
            fs_hz: 40e6,
            f0_hz: 9.4e6,
            axial_spacing_m: 1e-4,
            lateral_spacing_m: 1e-4,
        };
        let shape = (40, 80);
        let bits = Grid::from_fn(shape.0, shape.1, |r, c| {
            (10..30).contains(&r) && (20..60).contains(&c)
        });
        let mask = LesionMask::new(bits.clone(), &g).unwrap();
        let bmode = BModeImage {
            pixels: Grid::from_fn(
                shape.0,
                shape.1,
                |r, c| if *bits.get(r, c) { 0.3 } else { 0.7 },
            ),
            dynamic_range_db: 60.0,
        };
        // Envelope with a spread of amplitudes inside the lesion.
        let envelope = EnvelopeFrame {
            samples: Grid::from_fn(shape.0, shape.1, |r, c| {
                0.1 + ((r * 31 + c * 17) % 97) as f64 / 50.0
            }),
            geometry: g,
        };
        let map = ColorLevelMap {
            levels: Grid::filled(shape.0, shape.1, 77),
        };
        let fv =
            extract_features(&envelope, &bmode, &map, &mask, &ExtractionParams::default()).unwrap();
        assert_eq!(fv.get(Feature::BscanStd), 0.0);
        assert_eq!(fv.get(Feature::BscanMean), 0.3);
        assert_eq!(fv.get(Feature::HscanColorLevel), 77.0);
        assert_eq!(fv.get(Feature::HscanStd), 0.0);
        assert_eq!(fv.get(Feature::BoundaryRoughness), 0.0);
        assert!(fv.get(Feature::BscanBoundaryStd) > 0.1);
        assert_eq!(fv.get(Feature::Reserve), 0.0);
    }

    #[test]
    fn misaligned_inputs_name_the_feature() {
        let g = Geometry {
            fs_hz: 40e6,
            f0_hz: 9.4e6,
            axial_spacing_m: 1e-4,
            lateral_spacing_m: 1e-4,
        };
        let mask = LesionMask::new(Grid::filled(4, 4, true), &g).unwrap();
        let envelope = EnvelopeFrame {
            samples: Grid::filled(4, 5, 1.0),
            geometry: g,
        };
        let bmode = BModeImage {
            pixels: Grid::filled(4, 4, 0.5),
            dynamic_range_db: 60.0,
        };
        let map = ColorLevelMap {
            levels: Grid::filled(4, 4, 1),
        };
        let err = extract_features(&envelope, &bmode, &map, &mask, &ExtractionParams::default())
            .unwrap_err();
        assert_eq!(err.feature, Feature::BurrB);
        assert!(err.to_string().contains("burr_b"));
    }
}
