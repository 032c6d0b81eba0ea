//! Acceptance criteria 1–10. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line in order; exits non-zero if
//! any criterion fails or exceeds its runtime bound.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use dsi_core::dsi::{self, ColorLimits, ColorScale, LutAnchors, ScoreMap, SmoothParams};
use dsi_core::eval::{self, CategoryFilter};
use dsi_core::hscan::{self, AttenuationSpec, FilterBank};
use dsi_core::ml::svm::{model_from_dual, solve_dual};
use dsi_core::ml::{select_features, svm_distance, svm_train, SvmParams};
use dsi_core::phantom::{self, CohortConfig};
use dsi_core::pipeline::{
    self, AnalysisParams, DsiSettings, EvalSettings, FeatureRow, TrainSettings,
};
use dsi_core::{
    burr, region, Feature, FeatureVector, Geometry, Grid, Label, LesionMask, Region, RfFrame,
    Scorer, TrainedModel,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn geometry() -> Geometry {
    Geometry {
        fs_hz: 40e6,
        f0_hz: 9.4e6,
        axial_spacing_m: 8e-5,
        lateral_spacing_m: 8e-5,
    }
}

// ---------------------------------------------------------------- 1

fn burr_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let samples = burr::sample_burr(1.0, 3.0, 100_000, &mut rng).unwrap();
    let fit = burr::fit_samples(&samples, 0.10).unwrap();
    let pass = (fit.lambda_hat - 1.0).abs() <= 0.03
        && (fit.b_hat - 3.0).abs() <= 0.15
        && fit.r_squared >= 0.96;
    outcome(
        pass,
        format!(
            "λ̂ = {:.4} (±3%), b̂ = {:.4} (±0.15), R² = {:.4} (≥ 0.96)",
            fit.lambda_hat, fit.b_hat, fit.r_squared
        ),
    )
}

// ---------------------------------------------------------------- 2

fn histogram_bins() -> Outcome {
    let a = burr::bin_count(2290, 0.10);
    let b = burr::bin_count(2290, 0.02);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = burr::sample_burr(1.0, 3.0, 2290, &mut rng).unwrap();
    let built = burr::AmplitudeHistogram::build(&s, 0.10).unwrap().bins();
    outcome(
        a == 229 && b == 46 && built == 229,
        format!("n = 2290: {a} bins at 10%, {b} at 2%, histogram has {built}"),
    )
}

// ---------------------------------------------------------------- 3

fn tone(f_hz: f64, lines: usize, n: usize) -> RfFrame {
    let g = geometry();
    let data = (0..lines)
        .flat_map(|l| {
            (0..n).map(move |t| {
                (2.0 * std::f64::consts::PI * f_hz * t as f64 / g.fs_hz + 0.7 * l as f64).cos()
                    as f32
            })
        })
        .collect();
    RfFrame::new(Grid::from_vec(lines, n, data).unwrap(), g).unwrap()
}

/// Power-weighted mean frequency of one depth segment, by direct DFT over
/// the positive-frequency bins, averaged over lines.
fn centroid(frame: &RfFrame, range: std::ops::Range<usize>) -> f64 {
    let n = range.len();
    let fs = frame.geometry().fs_hz;
    let (mut num, mut den) = (0.0, 0.0);
    for l in 0..frame.n_lines() {
        let x: Vec<f64> = frame.samples().row(l)[range.clone()]
            .iter()
            .map(|&v| v as f64)
            .collect();
        for k in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let ph = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += v * ph.cos();
                im += v * ph.sin();
            }
            let p = re * re + im * im;
            num += p * k as f64 * fs / n as f64;
            den += p;
        }
    }
    num / den
}

fn hscan_checks() -> Outcome {
    let bank = FilterBank::default();
    let edge = 64;
    let interior = |m: &hscan::ColorLevelMap| -> Vec<u16> {
        (0..m.levels.rows())
            .flat_map(|l| m.levels.row(l)[edge..m.levels.cols() - edge].to_vec())
            .collect()
    };
    let low = interior(&hscan::color_level_map(&tone(5.2e6, 4, 512), &bank));
    let high = interior(&hscan::color_level_map(&tone(12.4e6, 4, 512), &bank));
    let endpoints = low.iter().all(|&l| l == 1) && high.iter().all(|&l| l == 256);

    let lesion = phantom::synth_entry(&CohortConfig::default(), 11, 3).unwrap();
    let base = hscan::color_level_map(&lesion.rf, &bank);
    let gained = hscan::color_level_map(&lesion.rf.scaled(10.0).unwrap(), &bank);
    let gain_invariant = base.levels == gained.levels;

    // Broadband RF: the phantom frame itself.
    let spec = AttenuationSpec::default();
    let original = &lesion.rf;
    let restored =
        hscan::correct_attenuation(&hscan::attenuate(original, &spec).unwrap(), &spec).unwrap();
    let zones = hscan::depth_zones(original.n_depth(), spec.n_zones).unwrap();
    let worst = zones
        .iter()
        .map(|z| {
            let a = centroid(original, z.clone());
            (centroid(&restored, z.clone()) - a).abs() / a
        })
        .fold(0.0f64, f64::max);
    outcome(
        endpoints && gain_invariant && worst < 0.02,
        format!(
            "5.2/12.4 MHz tones → levels 1/256 on all interior samples: {endpoints}; ×10 gain invariant: {gain_invariant}; \
             worst zone centroid error after attenuation round trip {:.2e} (< 2%)",
            worst
        ),
    )
}

// ---------------------------------------------------------------- 4

fn mask_from(region: Region) -> LesionMask {
    LesionMask::new(region, &geometry()).unwrap()
}

/// Lattice points inside or on a convex polygon (counter-clockwise).
fn lattice_count(poly: &[(f64, f64)], rows: usize, cols: usize) -> usize {
    let inside = |p: (f64, f64)| {
        (0..poly.len()).all(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= -1e-9
        })
    };
    (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r as f64, c as f64)))
        .filter(|&p| inside(p))
        .count()
}

fn geometry_checks() -> Outcome {
    let square = mask_from(Grid::from_fn(80, 80, |r, c| {
        (15..65).contains(&r) && (15..65).contains(&c)
    }));
    let sq = region::boundary_roughness(&square);

    // Plus sign: arms 12 px wide spanning 60 px, centred in a 100×100 grid.
    let (lo, hi, a0, a1) = (20usize, 79usize, 44usize, 55usize);
    let plus = Grid::from_fn(100, 100, |r, c| {
        ((lo..=hi).contains(&r) && (a0..=a1).contains(&c))
            || ((a0..=a1).contains(&r) && (lo..=hi).contains(&c))
    });
    let area = plus.count();
    let (lo, hi, a0, a1) = (lo as f64, hi as f64, a0 as f64, a1 as f64);
    // Hull of the plus-sign pixel centres: an octagon through the arm ends.
    let octagon = [
        (lo, a0),
        (a0, lo),
        (a1, lo),
        (hi, a0),
        (hi, a1),
        (a1, hi),
        (a0, hi),
        (lo, a1),
    ];
    let oracle = (lattice_count(&octagon, 100, 100) as f64 - area as f64) / area as f64;
    let plus_r = region::boundary_roughness(&mask_from(plus));
    let plus_err = (plus_r - oracle).abs() / oracle;

    // Disk of radius 80: margins at 10% of the 161-px length → r = 8.
    let radius = 80.0;
    let disk = Grid::from_fn(241, 241, |r, c| {
        let (dr, dc) = (r as f64 - 120.0, c as f64 - 120.0);
        dr * dr + dc * dc <= radius * radius
    });
    let m = region::margins(&mask_from(disk), 0.10).unwrap();
    let r = m.disk_radius as f64;
    let pi = std::f64::consts::PI;
    let inner_ref = pi * (radius * radius - (radius - r).powi(2));
    let outer_ref = pi * ((radius + r).powi(2) - radius * radius);
    let inner_err = (m.inner.count() as f64 - inner_ref).abs() / inner_ref;
    let outer_err = (m.outer.count() as f64 - outer_ref).abs() / outer_ref;
    outcome(
        sq < 0.02 && plus_err < 0.02 && inner_err < 0.05 && outer_err < 0.05,
        format!(
            "square roughness {sq:.4} (< 0.02); plus {plus_r:.4} vs oracle {oracle:.4} (rel err {plus_err:.2e}); \
             annulus r = {r}: inner err {:.2}%, outer err {:.2}% (< 5%)",
            inner_err * 100.0,
            outer_err * 100.0
        ),
    )
}

// ---------------------------------------------------------------- 5

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
}

fn svm_dataset(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nd = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|i| {
            let l = if i % 2 == 0 {
                Label::Benign
            } else {
                Label::Malignant
            };
            let x = (0..3)
                .map(|d| nd.sample(&mut rng) + if d == 0 { 0.8 * l.sign() } else { 0.0 })
                .collect();
            (x, l)
        })
        .unzip()
}

fn svm_checks() -> Outcome {
    let xor_x = vec![
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
    ];
    let xor_y = vec![
        Label::Benign,
        Label::Benign,
        Label::Malignant,
        Label::Malignant,
    ];
    let xor = svm_train(&xor_x, &xor_y, &SvmParams::new(100.0, 2.0)).unwrap();
    let xor_ok = xor_x.iter().zip(&xor_y).all(|(x, y)| xor.predict(x) == *y);

    let (mut worst_kkt, mut worst_dual, mut worst_oracle, mut worst_margin, mut worst_flip) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut free_svs = 0;
    for seed in 0..12u64 {
        let (x, y) = svm_dataset(seed, 60);
        let params = SvmParams::new(
            [0.5, 1.0, 10.0][seed as usize % 3],
            [0.1, 0.5, 1.0][seed as usize / 4 % 3],
        );
        let sol = solve_dual(&x, &y, &params).unwrap();
        let model = model_from_dual(&x, &sol, &params);
        let ys: Vec<f64> = y.iter().map(|l| l.sign()).collect();
        // Dual feasibility.
        let balance: f64 = sol.alpha.iter().zip(&ys).map(|(a, y)| a * y).sum();
        let bounds = sol
            .alpha
            .iter()
            .map(|&a| (-a).max(a - params.c).max(0.0))
            .fold(0.0, f64::max);
        worst_dual = worst_dual.max(balance.abs()).max(bounds);
        // Independent decision values from the full dual.
        let f = |p: &[f64]| -> f64 {
            (0..x.len())
                .map(|j| sol.alpha[j] * ys[j] * rbf(&x[j], p, params.gamma))
                .sum::<f64>()
                + model.bias
        };
        for i in 0..x.len() {
            let fi = f(&x[i]);
            worst_oracle = worst_oracle.max((model.decision(&x[i]) - fi).abs());
            let m = ys[i] * fi - 1.0;
            let a = sol.alpha[i];
            let v = if a <= 0.0 {
                (-m).max(0.0)
            } else if a >= params.c {
                m.max(0.0)
            } else {
                free_svs += 1;
                worst_margin = worst_margin.max((fi.abs() - 1.0).abs());
                m.abs()
            };
            worst_kkt = worst_kkt.max(v);
        }
        // Label flip.
        let flipped: Vec<Label> = y.iter().map(|l| l.flipped()).collect();
        let fm = svm_train(&x, &flipped, &params).unwrap();
        for p in x.iter().take(20) {
            worst_flip = worst_flip.max((svm_distance(&model, p).0 + svm_distance(&fm, p).0).abs());
        }
    }
    let pass = xor_ok
        && worst_dual <= 1e-3
        && worst_kkt <= 1e-3
        && worst_oracle <= 1e-9
        && worst_margin <= 1e-2
        && worst_flip <= 1e-6
        && free_svs > 0;
    outcome(
        pass,
        format!(
            "XOR solved: {xor_ok}; over 12 models: dual residual {worst_dual:.1e}, KKT {worst_kkt:.1e} (≤ 1e-3), \
             oracle |Δf| {worst_oracle:.1e} (≤ 1e-9), free-SV ||f|−1| {worst_margin:.1e} over {free_svs} SVs (≤ 1e-2), \
             flip {worst_flip:.1e} (≤ 1e-6)"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn auc_checks() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_neg = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(10..200);
        let labels: Vec<Label> = (0..n)
            .map(|i| {
                if i % 3 == 0 {
                    Label::Malignant
                } else {
                    Label::Benign
                }
            })
            .collect();
        // Coarse scores so that ties occur.
        let scores: Vec<f64> = labels
            .iter()
            .map(|l| ((rng.random::<f64>() + 0.3 * l.sign()) * 8.0).round() / 8.0)
            .collect();
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, si) in scores.iter().enumerate() {
            for (j, sj) in scores.iter().enumerate() {
                if labels[i] == Label::Malignant && labels[j] == Label::Benign {
                    pairs += 1.0;
                    wins += if si > sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        let auc = eval::auc(&scores, &labels).unwrap();
        worst = worst.max((auc - wins / pairs).abs());
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        worst_neg = worst_neg.max((eval::auc(&neg, &labels).unwrap() - (1.0 - auc)).abs());
    }
    outcome(
        worst <= 1e-12 && worst_neg <= 1e-12,
        format!("100 datasets: max |AUC − pairwise| = {worst:.1e}, max |AUC(−s) − (1 − AUC)| = {worst_neg:.1e} (≤ 1e-12)"),
    )
}

// ---------------------------------------------------------------- 7

fn extract_rows(config: &CohortConfig, seed: u64) -> Vec<FeatureRow> {
    let dir = tempfile::tempdir().unwrap();
    let manifest = phantom::synth_cohort(config, seed, dir.path()).unwrap();
    let (rows, failures) = pipeline::extract_cohort(&manifest, &AnalysisParams::default());
    assert!(failures.is_empty(), "extraction failures: {failures:?}");
    rows
}

fn end_to_end() -> Outcome {
    let seed = 7;
    let rows = extract_rows(&CohortConfig::default(), seed);
    let settings = TrainSettings::default();
    let (model, _) = pipeline::train(&rows, &settings, seed).unwrap();
    let report = pipeline::evaluate(
        &rows,
        &model.subset,
        &settings,
        &EvalSettings::default(),
        seed,
    )
    .unwrap();
    let get = |s: Scorer| report.row(s.name(), CategoryFilter::All, 0.0).unwrap();
    let svm = get(Scorer::SvmDistance);
    let (auc, acc) = (svm.auc.unwrap().mean, svm.acc.unwrap().mean);
    let pc1 = get(Scorer::Pc1).auc.unwrap().mean;
    let proj = get(Scorer::Projection).auc.unwrap().mean;
    let names: Vec<&str> = model.subset.iter().map(|f| f.name()).collect();
    outcome(
        auc >= 0.95 && acc >= 0.90 && pc1 >= 0.90 && proj >= 0.90 && svm.repeats_used == 5,
        format!(
            "80 lesions, features [{}], {} repeats: SVM AUC {auc:.3} (≥ 0.95), accuracy {acc:.3} (≥ 0.90); \
             PC1 AUC {pc1:.3}, projection AUC {proj:.3} (≥ 0.90)",
            names.join(", "),
            svm.repeats_used
        ),
    )
}

// ---------------------------------------------------------------- 8

fn size_dependence() -> Outcome {
    let seed = 7;
    let config = CohortConfig {
        n_benign: 80,
        n_malignant: 80,
        size_noise: 6.0,
        ..CohortConfig::default()
    };
    let rows = extract_rows(&config, seed);
    let settings = TrainSettings::default();
    let (model, _) = pipeline::train(&rows, &settings, seed).unwrap();
    let eval_settings = EvalSettings {
        category_filters: vec![CategoryFilter::All],
        ..EvalSettings::default()
    };
    let report = pipeline::evaluate(&rows, &model.subset, &settings, &eval_settings, seed).unwrap();
    let (t, a): (Vec<f64>, Vec<f64>) = report
        .rows
        .iter()
        .filter(|r| r.scorer == Scorer::SvmDistance.name())
        .filter_map(|r| r.auc.map(|m| (r.threshold_cm2, m.mean)))
        .unzip();
    let rho = eval::spearman(&t, &a).unwrap_or(f64::NAN);
    let curve: Vec<String> = t
        .iter()
        .zip(&a)
        .map(|(t, a)| format!("{t:.1}:{a:.3}"))
        .collect();
    outcome(
        rho > 0.0,
        format!(
            "Spearman(threshold, SVM AUC) = {rho:.3} (> 0) over [{}]",
            curve.join(" ")
        ),
    )
}

// ---------------------------------------------------------------- 9

fn dsi_checks() -> Outcome {
    let scale = ColorScale::new(ColorLimits { lo: -2.0, hi: 3.0 }, &LutAnchors::default()).unwrap();
    let lut = LutAnchors::default().build().unwrap();
    let mapping = dsi::score_to_color(-2.0, &scale) == lut[0]
        && dsi::score_to_color(0.5, &scale) == lut[128]
        && dsi::score_to_color(3.0, &scale) == lut[255];

    // Smoothing stays within the input range on random maps.
    let mut range_ok = true;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask: Region = Grid::from_fn(40, 40, |r, c| {
            (r as f64 - 20.0).hypot(c as f64 - 20.0) < 15.0
        });
        let values = Grid::from_fn(40, 40, |r, c| {
            if *mask.get(r, c) {
                rng.random_range(-5.0..5.0)
            } else {
                f64::NAN
            }
        });
        let map = ScoreMap {
            values,
            scorer: Scorer::Pc1,
        };
        let (lo, hi) = map
            .mask_values(&mask)
            .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
        let out = dsi::smooth(&map, &mask, &SmoothParams::default()).unwrap();
        range_ok &= out.mask_values(&mask).all(|v| v >= lo && v <= hi);
    }

    // Model from a small training cohort, five default features.
    let seed = 7;
    let train_rows = extract_rows(
        &CohortConfig {
            n_benign: 20,
            n_malignant: 20,
            ..CohortConfig::default()
        },
        seed,
    );
    let (table, labels): (Vec<FeatureVector>, Vec<Label>) =
        train_rows.iter().map(|r| (r.features, r.label)).unzip();
    let model = TrainedModel::fit(
        &table,
        &labels,
        &Feature::DEFAULT_SUBSET,
        &TrainSettings::default().params(seed),
    )
    .unwrap();

    // 50 fresh benign/malignant pairs from another seed.
    let test_cfg = CohortConfig {
        n_benign: 50,
        n_malignant: 50,
        ..CohortConfig::default()
    };
    let settings = DsiSettings::default();
    let analysis = AnalysisParams::default();
    let render = |i: usize| {
        let l = phantom::synth_entry(&test_cfg, 99, i).unwrap();
        pipeline::render_lesion(&l.rf, &l.mask, &model, &analysis, &settings).unwrap()
    };
    let first = render(0);
    let deterministic = first.image == render(0).image;
    let mut wins = 0;
    let mut benign_first = Some(first.provenance.mean_color_index);
    for i in 0..50 {
        let b = benign_first
            .take()
            .unwrap_or_else(|| render(i).provenance.mean_color_index);
        let m = render(50 + i).provenance.mean_color_index;
        wins += usize::from(m > b);
    }
    outcome(
        mapping && range_ok && deterministic && wins >= 45,
        format!(
            "lut[0]/lut[128]/lut[255] at lo/mid/hi: {mapping}; smoothing within range on 20 maps: {range_ok}; \
             overlay bit-identical: {deterministic}; malignant > benign mean color index in {wins}/50 pairs (≥ 45)"
        ),
    )
}

// ---------------------------------------------------------------- 10

/// Informative columns, interleaved with the noise columns so that the
/// lexicographic tie rule cannot favour them by position.
const INFORMATIVE: [usize; 5] = [1, 3, 5, 7, 8];

fn selection_checks() -> Outcome {
    // 40 + 40 samples; each informative column separates the classes by
    // d' = 3 (single-feature AUC ≈ 0.98), the others are pure noise.
    let d_prime = 3.0;
    let mut clean_runs = 0;
    let mut enumerated_ok = true;
    let mut picks = Vec::new();
    for seed in 1..=5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let mut table = Vec::new();
        let mut labels = Vec::new();
        for i in 0..80 {
            let l = if i % 2 == 0 {
                Label::Benign
            } else {
                Label::Malignant
            };
            let mut v = [0.0; 10];
            for (k, slot) in v.iter_mut().enumerate() {
                let shift = if INFORMATIVE.contains(&k) {
                    d_prime / 2.0 * l.sign()
                } else {
                    0.0
                };
                *slot = nd.sample(&mut rng) + shift;
            }
            table.push(FeatureVector(v));
            labels.push(l);
        }
        let r = select_features(
            &table,
            &labels,
            &Feature::ALL,
            Scorer::Projection,
            &SvmParams::default(),
        )
        .unwrap();
        enumerated_ok &= r.enumerated == 1023 && r.skipped == 0 && r.scores.len() == 1023;
        let noisy = r
            .best
            .subset
            .iter()
            .any(|f| !INFORMATIVE.contains(&f.index()));
        clean_runs += usize::from(!noisy);
        picks.push(
            r.best
                .subset
                .iter()
                .map(|f| f.index().to_string())
                .collect::<Vec<_>>()
                .join(""),
        );
    }
    outcome(
        clean_runs >= 4 && enumerated_ok,
        format!(
            "informative columns {INFORMATIVE:?} at d' = {d_prime}: noise-free subset in {clean_runs}/5 runs (≥ 4), picks [{}]; \
             1023 subsets enumerated each run: {enumerated_ok}",
            picks.join(" ")
        ),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(u32, &str, Check, u64); 10] = [
        (1, "Burr round trip", burr_round_trip, 5),
        (2, "histogram bin rule", histogram_bins, 1),
        (3, "H-scan endpoints and invariance", hscan_checks, 10),
        (4, "geometry", geometry_checks, 5),
        (5, "SVM correctness", svm_checks, 30),
        (6, "AUC oracle equivalence", auc_checks, 10),
        (7, "end-to-end synthetic cohort", end_to_end, 180),
        (8, "size dependence", size_dependence, 180),
        (9, "DSI rendering", dsi_checks, 60),
        (10, "feature selection", selection_checks, 120),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (n, name, check, bound) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(bound);
        let pass = o.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "criterion {n:>2} {}: {name} — {} [{:.2} s, bound {bound} s{}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", EXCEEDED" }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
