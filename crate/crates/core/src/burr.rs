//! Burr speckle statistics.
//!
//! Envelope amplitudes `A` follow
//!
//! ```text
//! P(A) = 2 A (b - 1) / (λ² [(A/λ)² + 1]^b),   F(A) = 1 - [(A/λ)² + 1]^(1 - b)
//! ```
//!
//! with scale `λ > 0` and power-law exponent `b > 1`. Parameters are
//! estimated by least squares on a normalized amplitude histogram whose bin
//! count is a fixed percentage of the sample count.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RATE: f64 = 0.10;
pub const MIN_BINS: usize = 8;
pub const MIN_SAMPLES: usize = 64;

const LAMBDA_BOUNDS: (f64, f64) = (1e-6, 1e6);
const B_MAX: f64 = 100.0;
const B_MIN_EXCESS: f64 = 1e-6;
const MAX_ITER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum BurrError {
    #[error("non-normalizable Burr exponent b = {0} (need b > 1)")]
    Exponent(f64),
    #[error("Burr scale must be positive and finite, got {0}")]
    Scale(f64),
    #[error("histogram needs at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("histogram rate must lie in (0, 1], got {0}")]
    Rate(f64),
    #[error("degenerate histogram: all samples equal")]
    Degenerate,
    #[error("samples must be finite and non-negative")]
    InvalidSample,
}

fn check_params(lambda: f64, b: f64) -> Result<(), BurrError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(BurrError::Scale(lambda));
    }
    if !(b > 1.0 && b.is_finite()) {
        return Err(BurrError::Exponent(b));
    }
    Ok(())
}

pub fn pdf(a: f64, lambda: f64, b: f64) -> f64 {
    if a < 0.0 {
        return 0.0;
    }
    let s = (a / lambda) * (a / lambda);
    2.0 * a * (b - 1.0) / (lambda * lambda) * (1.0 + s).powf(-b)
}

pub fn cdf(a: f64, lambda: f64, b: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let s = (a / lambda) * (a / lambda);
    1.0 - (1.0 + s).powf(1.0 - b)
}

/// Amplitude at which `1 - F(A) = tail`, for `tail` in `(0, 1]`.
pub fn inverse_survival(tail: f64, lambda: f64, b: f64) -> f64 {
    lambda * (tail.powf(1.0 / (1.0 - b)) - 1.0).max(0.0).sqrt()
}

pub fn median(lambda: f64, b: f64) -> f64 {
    lambda * (2f64.powf(1.0 / (b - 1.0)) - 1.0).sqrt()
}

/// `n` i.i.d. Burr draws by inverse-CDF sampling.
pub fn sample_burr<R: rand::Rng + ?Sized>(
    lambda: f64,
    b: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>, BurrError> {
    check_params(lambda, b)?;
    Ok((0..n)
        .map(|_| {
            // (0, 1]: avoids u = 0, where u^(1/(1-b)) diverges.
            let u = 1.0 - rng.random::<f64>();
            inverse_survival(u, lambda, b)
        })
        .collect())
}

/// Normalized equal-width histogram over `[0, max sample]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeHistogram {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub n_samples: usize,
    pub rate: f64,
    /// Root-mean-square amplitude of the samples.
    pub sample_rms: f64,
    /// The bin rule fell below [`MIN_BINS`] and was clamped.
    pub min_bins_clamped: bool,
}

/// `max(MIN_BINS, round(rate · n))`.
pub fn bin_count(n_samples: usize, rate: f64) -> usize {
    ((rate * n_samples as f64).round() as usize).max(MIN_BINS)
}

impl AmplitudeHistogram {
    pub fn build(samples: &[f64], rate: f64) -> Result<Self, BurrError> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(BurrError::Rate(rate));
        }
        if samples.len() < MIN_SAMPLES {
            return Err(BurrError::TooFewSamples(samples.len()));
        }
        if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(BurrError::InvalidSample);
        }
        let max = samples.iter().copied().fold(0.0, f64::max);
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        if max == min || max <= 0.0 {
            return Err(BurrError::Degenerate);
        }
        let n = samples.len();
        let bins = bin_count(n, rate);
        let width = max / bins as f64;
        let mut counts = vec![0usize; bins];
        for &v in samples {
            let idx = ((v / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let norm = 1.0 / (n as f64 * width);
        let rms = (samples.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        Ok(Self {
            bin_edges: (0..=bins).map(|i| i as f64 * width).collect(),
            densities: counts.iter().map(|&c| c as f64 * norm).collect(),
            n_samples: n,
            rate,
            sample_rms: rms,
            min_bins_clamped: ((rate * n as f64).round() as usize) < MIN_BINS,
        })
    }

    /// Histogram with given edges and densities, for fitting tabulated curves.
    pub fn from_densities(bin_edges: Vec<f64>, densities: Vec<f64>, sample_rms: f64) -> Self {
        assert_eq!(bin_edges.len(), densities.len() + 1);
        Self {
            n_samples: 0,
            rate: f64::NAN,
            min_bins_clamped: false,
            bin_edges,
            densities,
            sample_rms,
        }
    }

    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurrFit {
    pub lambda_hat: f64,
    pub b_hat: f64,
    pub r_squared: f64,
    pub converged: bool,
    pub n_iterations: usize,
    pub ss_res: f64,
}

/// Residuals `P(center) - density` and their Jacobian with respect to
/// `(ln λ, ln(b - 1))`.
fn residuals(
    theta: [f64; 2],
    centers: &[f64],
    dens: &[f64],
    jac: Option<&mut Vec<[f64; 2]>>,
) -> Vec<f64> {
    let lambda = theta[0].exp();
    let bm1 = theta[1].exp();
    let b = 1.0 + bm1;
    let mut rows = Vec::new();
    let res = centers
        .iter()
        .zip(dens)
        .map(|(&a, &d)| {
            let s = (a / lambda) * (a / lambda);
            let p = 2.0 * a * bm1 / (lambda * lambda) * (1.0 + s).powf(-b);
            rows.push([
                p * (-2.0 + 2.0 * b * s / (1.0 + s)),
                p * (1.0 - bm1 * (1.0 + s).ln()),
            ]);
            p - d
        })
        .collect();
    if let Some(j) = jac {
        *j = rows;
    }
    res
}

fn clamp_theta(theta: [f64; 2]) -> [f64; 2] {
    [
        theta[0].clamp(LAMBDA_BOUNDS.0.ln(), LAMBDA_BOUNDS.1.ln()),
        theta[1].clamp(B_MIN_EXCESS.ln(), (B_MAX - 1.0).ln()),
    ]
}

struct Run {
    theta: [f64; 2],
    ss: f64,
    iterations: usize,
    converged: bool,
}

/// Levenberg-Marquardt in log-parameters from one start.
fn levenberg_marquardt(start: [f64; 2], centers: &[f64], dens: &[f64]) -> Run {
    let mut theta = clamp_theta(start);
    let mut jac = Vec::new();
    let mut r = residuals(theta, centers, dens, Some(&mut jac));
    let mut ss: f64 = r.iter().map(|v| v * v).sum();
    let mut mu = 1e-3;
    for it in 1..=MAX_ITER {
        let (mut a00, mut a01, mut a11, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (row, ri) in jac.iter().zip(&r) {
            a00 += row[0] * row[0];
            a01 += row[0] * row[1];
            a11 += row[1] * row[1];
            g0 += row[0] * ri;
            g1 += row[1] * ri;
        }
        let mut improved = false;
        for _ in 0..30 {
            let (d00, d11) = (a00 * (1.0 + mu), a11 * (1.0 + mu));
            let det = d00 * d11 - a01 * a01;
            if !(det.is_finite() && det > 0.0) {
                mu *= 10.0;
                continue;
            }
            let step = [(-g0 * d11 + g1 * a01) / det, (-g1 * d00 + g0 * a01) / det];
            let trial = clamp_theta([theta[0] + step[0], theta[1] + step[1]]);
            let mut trial_jac = Vec::new();
            let trial_r = residuals(trial, centers, dens, Some(&mut trial_jac));
            let trial_ss: f64 = trial_r.iter().map(|v| v * v).sum();
            if trial_ss.is_finite() && trial_ss <= ss {
                let moved = (trial[0] - theta[0]).abs().max((trial[1] - theta[1]).abs());
                let rel_drop = (ss - trial_ss) / ss.max(f64::MIN_POSITIVE);
                theta = trial;
                r = trial_r;
                jac = trial_jac;
                ss = trial_ss;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                if moved < 1e-10 || rel_drop < 1e-14 {
                    return Run {
                        theta,
                        ss,
                        iterations: it,
                        converged: true,
                    };
                }
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            // No downhill step at any damping: stationary to working precision.
            return Run {
                theta,
                ss,
                iterations: it,
                converged: true,
            };
        }
    }
    Run {
        theta,
        ss,
        iterations: MAX_ITER,
        converged: false,
    }
}

/// Least-squares Burr fit with six starts
/// (`λ₀ ∈ {0.5, 1, 2} · rms/√2`, `b₀ ∈ {2, 4}`); the lowest residual wins.
pub fn fit_burr(hist: &AmplitudeHistogram) -> BurrFit {
    let centers = hist.centers();
    let dens = &hist.densities;
    let base = (hist.sample_rms / std::f64::consts::SQRT_2).max(LAMBDA_BOUNDS.0);
    let mut best: Option<Run> = None;
    let mut total_iterations = 0;
    for scale in [0.5, 1.0, 2.0] {
        for b0 in [2.0f64, 4.0] {
            let run = levenberg_marquardt([(scale * base).ln(), (b0 - 1.0).ln()], &centers, dens);
            total_iterations += run.iterations;
            let better = match &best {
                None => true,
                Some(b) => run.ss < b.ss || (run.ss == b.ss && run.converged && !b.converged),
            };
            if better {
                best = Some(run);
            }
        }
    }
    let best = best.expect("at least one start");
    let mean = dens.iter().sum::<f64>() / dens.len() as f64;
    let ss_tot: f64 = dens.iter().map(|d| (d - mean) * (d - mean)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - best.ss / ss_tot
    } else {
        f64::NAN
    };
    BurrFit {
        lambda_hat: best.theta[0].exp(),
        b_hat: 1.0 + best.theta[1].exp(),
        r_squared,
        converged: best.converged && r_squared.is_finite(),
        n_iterations: total_iterations,
        ss_res: best.ss,
    }
}

/// Builds the histogram at `rate` and fits it.
pub fn fit_samples(samples: &[f64], rate: f64) -> Result<BurrFit, BurrError> {
    Ok(fit_burr(&AmplitudeHistogram::build(samples, rate)?))
}

/// `2%, 4%, …, 40%`.
pub fn default_sweep_rates() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.02).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate: f64,
    pub bins: usize,
    pub fit: Result<BurrFit, BurrError>,
}

pub fn sweep_rates(samples: &[f64], rates: &[f64]) -> Vec<SweepRow> {
    rates
        .iter()
        .map(|&rate| SweepRow {
            rate,
            bins: bin_count(samples.len(), rate),
            fit: fit_samples(samples, rate),
        })
        .collect()
}

/// CSV with header `rate,lambda,b,r2,bins`; failed fits leave the fit
/// columns empty.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("rate,lambda,b,r2,bins\n");
    for row in rows {
        match &row.fit {
            Ok(f) => writeln!(
                out,
                "{},{},{},{},{}",
                row.rate, f.lambda_hat, f.b_hat, f.r_squared, row.bins
            ),
            Err(_) => writeln!(out, "{},,,,{}", row.rate, row.bins),
        }
        .expect("writing to String");
    }
    out
}
