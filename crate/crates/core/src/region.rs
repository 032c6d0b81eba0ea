//! Lesion geometry and texture: convex-hull boundary roughness, inner/outer
//! margins built by disk erosion and dilation, and B-mode region statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, Region};
use crate::signal::{BModeImage, LesionMask};

pub const DEFAULT_MARGIN_FRACTION: f64 = 0.10;

#[derive(Debug, Error, PartialEq)]
pub enum RegionError {
    #[error("region has no pixels")]
    Empty,
    #[error("margin fraction must lie in (0, 0.5), got {0}")]
    Fraction(f64),
    #[error("region shape {region:?} does not match image shape {image:?}")]
    ShapeMismatch {
        region: (usize, usize),
        image: (usize, usize),
    },
}

/// Convex hull of the lesion pixel centers.
///
/// Areas are in pixels: `hull_area` is the number of pixel centers inside or
/// on the hull (shoelace area plus the Pick boundary term), so a lesion that
/// fills its own hull has roughness exactly 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullResult {
    /// Counter-clockwise in `(row, col)` coordinates, no collinear vertices.
    pub hull_vertices: Vec<(i64, i64)>,
    pub polygon_area: f64,
    pub hull_area: f64,
    pub contour_area: f64,
    pub roughness: f64,
    /// Hull has zero polygon area (all pixel centers collinear).
    pub degenerate: bool,
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Andrew's monotone chain. Collinear points are dropped.
pub fn monotone_chain(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Twice the signed shoelace area.
fn shoelace2(poly: &[(i64, i64)]) -> i64 {
    (0..poly.len())
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum()
}

/// Lattice points on the closed boundary of `poly`.
fn boundary_lattice_points(poly: &[(i64, i64)]) -> i64 {
    match poly.len() {
        0 => 0,
        1 => 1,
        _ => (0..poly.len())
            .map(|i| {
                let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
                gcd(b.0 - a.0, b.1 - a.1)
            })
            .sum(),
    }
}

pub fn convex_hull(mask: &LesionMask) -> HullResult {
    hull_of_region(mask.bits()).expect("lesion masks are non-empty")
}

pub fn hull_of_region(region: &Region) -> Result<HullResult, RegionError> {
    let points: Vec<(i64, i64)> = region.pixels().map(|(r, c)| (r as i64, c as i64)).collect();
    if points.is_empty() {
        return Err(RegionError::Empty);
    }
    let hull = monotone_chain(&points);
    let twice_area = shoelace2(&hull);
    let boundary = boundary_lattice_points(&hull);
    // Pick: lattice points in closed polygon = A + B/2 + 1. For a segment or a
    // point the same expression counts the points on it.
    let lattice = if hull.len() == 1 {
        1
    } else {
        (twice_area + boundary) / 2 + 1
    };
    let contour = points.len() as f64;
    let hull_area = lattice as f64;
    Ok(HullResult {
        hull_vertices: hull,
        polygon_area: twice_area as f64 / 2.0,
        hull_area,
        contour_area: contour,
        roughness: (hull_area - contour) / contour,
        degenerate: twice_area == 0,
    })
}

/// Boundary roughness dA/A of a lesion.
pub fn boundary_roughness(mask: &LesionMask) -> f64 {
    convex_hull(mask).roughness
}

/// Disk erosion with structuring element `{d : |d|² <= r²}`. Pixels outside
/// the grid read as `outside`.
pub fn erode(region: &Region, radius: usize, outside: bool) -> Region {
    let (rows, cols) = region.shape();
    // prefix[r][c] = set pixels in row r before column c
    let prefix: Vec<Vec<u32>> = (0..rows)
        .map(|r| {
            let mut p = Vec::with_capacity(cols + 1);
            p.push(0u32);
            for &b in region.row(r) {
                p.push(p.last().unwrap() + b as u32);
            }
            p
        })
        .collect();
    let rad = radius as isize;
    let half_widths: Vec<isize> = (-rad..=rad)
        .map(|dr| {
            let rem = (rad * rad - dr * dr) as f64;
            let mut w = rem.sqrt().floor() as isize;
            while (w + 1) * (w + 1) <= rad * rad - dr * dr {
                w += 1;
            }
            while w * w > rad * rad - dr * dr {
                w -= 1;
            }
            w
        })
        .collect();
    Grid::from_fn(rows, cols, |r, c| {
        if !*region.get(r, c) {
            return false;
        }
        for (i, dr) in (-rad..=rad).enumerate() {
            let w = half_widths[i];
            let rr = r as isize + dr;
            let lo = c as isize - w;
            let hi = c as isize + w;
            if rr < 0 || rr >= rows as isize {
                if !outside {
                    return false;
                }
                continue;
            }
            if (lo < 0 || hi >= cols as isize) && !outside {
                return false;
            }
            let lo_c = lo.max(0) as usize;
            let hi_c = hi.min(cols as isize - 1) as usize;
            let row = &prefix[rr as usize];
            let set = row[hi_c + 1] - row[lo_c];
            if set as usize != hi_c + 1 - lo_c {
                return false;
            }
        }
        true
    })
}

/// Disk dilation; pixels outside the grid are treated as unset.
pub fn dilate(region: &Region, radius: usize) -> Region {
    let inverted = region.map(|&b| !b);
    erode(&inverted, radius, true).map(|&b| !b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginSet {
    pub inner: Region,
    pub outer: Region,
    pub combined: Region,
    pub disk_radius: usize,
    /// Radius requested before clamping.
    pub nominal_radius: usize,
    pub radius_clamped: bool,
}

/// Largest bounding-box extent of the region in pixels.
pub fn lesion_length(region: &Region) -> usize {
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for (r, c) in region.pixels() {
        r0 = r0.min(r);
        r1 = r1.max(r);
        c0 = c0.min(c);
        c1 = c1.max(c);
    }
    if r0 == usize::MAX {
        return 0;
    }
    (r1 - r0 + 1).max(c1 - c0 + 1)
}

/// Inner and outer margins whose combined thickness is about
/// `fraction · lesion_length`, split evenly across the boundary.
pub fn margins(mask: &LesionMask, fraction: f64) -> Result<MarginSet, RegionError> {
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(RegionError::Fraction(fraction));
    }
    let bits = mask.bits();
    let length = lesion_length(bits);
    let nominal = ((fraction * length as f64 / 2.0).round() as usize).max(1);
    let mut radius = nominal;
    let mut eroded = erode(bits, radius, false);
    while eroded.count() == 0 && radius > 1 {
        radius -= 1;
        eroded = erode(bits, radius, false);
    }
    let inner = bits.and_not(&eroded);
    let outer = dilate(bits, radius).and_not(bits);
    let combined = inner.or(&outer);
    Ok(MarginSet {
        inner,
        outer,
        combined,
        disk_radius: radius,
        nominal_radius: nominal,
        radius_clamped: radius < nominal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n_pixels: usize,
}

pub fn region_stats(bmode: &BModeImage, region: &Region) -> Result<RegionStats, RegionError> {
    values_stats(&bmode.pixels, region)
}

/// Welford mean and population STD of `values` over `region`.
pub fn values_stats(values: &Grid<f64>, region: &Region) -> Result<RegionStats, RegionError> {
    if values.shape() != region.shape() {
        return Err(RegionError::ShapeMismatch {
            region: region.shape(),
            image: values.shape(),
        });
    }
    let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
    for (r, c) in region.pixels() {
        let x = *values.get(r, c);
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    if n == 0 {
        return Err(RegionError::Empty);
    }
    Ok(RegionStats {
        mean,
        std: (m2 / n as f64).max(0.0).sqrt(),
        n_pixels: n,
    })
}
