//! Soft-margin C-SVM with a Gaussian (RBF) kernel, trained by sequential
//! minimal optimization.
//!
//! The solver follows the classic maximal-violating-pair scheme: at each
//! step the pair `(i, j)` with the largest KKT violation is moved along the
//! feasible direction that keeps `Σ αᵢyᵢ` fixed. The working-set choice
//! breaks ties toward the lowest index and the pair update is symmetric in
//! `(i, j)`, so training is fully deterministic and flipping every label
//! reproduces the same dual variables and an exactly negated decision
//! function.

use serde::{Deserialize, Serialize};

use super::linalg::sq_dist;
use super::{require_both_classes, Label, MlError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 0.1,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
        }
    }
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `αᵢ·yᵢ` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    /// `sqrt(ΣᵢΣⱼ αᵢαⱼyᵢyⱼK(xᵢ,xⱼ))`, the norm of the hyperplane normal in
    /// the kernel-induced space.
    pub w_norm: f64,
}

/// Full dual state of a training run, kept for diagnostics and checks.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
    /// `∇ = Qα − e` at the solution.
    pub gradient: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub gap: f64,
}

pub fn rbf(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    (-gamma * sq_dist(u, v)).exp()
}

fn validate(x: &[Vec<f64>], labels: &[Label], params: &SvmParams) -> Result<(), MlError> {
    if x.is_empty() {
        return Err(MlError::EmptyInput);
    }
    if x.len() != labels.len() {
        return Err(MlError::Shape(format!(
            "{} rows but {} labels",
            x.len(),
            labels.len()
        )));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(MlError::Shape("ragged feature matrix".into()));
    }
    require_both_classes(labels)?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(MlError::InvalidParameter(format!(
            "C must be > 0, got {}",
            params.c
        )));
    }
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(MlError::InvalidParameter(format!(
            "gamma must be > 0, got {}",
            params.gamma
        )));
    }
    if !(params.tolerance > 0.0) {
        return Err(MlError::InvalidParameter("tolerance must be > 0".into()));
    }
    Ok(())
}

/// Solves the dual `min ½αᵀQα − eᵀα` s.t. `0 ≤ α ≤ C`, `yᵀα = 0`.
pub fn solve_dual(
    x: &[Vec<f64>],
    labels: &[Label],
    params: &SvmParams,
) -> Result<DualSolution, MlError> {
    validate(x, labels, params)?;
    let n = x.len();
    let c = params.c;
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(&x[i], &x[j], params.gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    loop {
        // i maximizes −yG over I_up, j minimizes −yG over I_low; strict
        // comparisons keep the lowest index on ties.
        let mut i = usize::MAX;
        let mut m = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut mm = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m {
                m = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < mm {
                mm = v;
                j = t;
            }
        }
        let gap = m - mm;
        if i == usize::MAX || j == usize::MAX || gap < params.tolerance {
            let rho = compute_rho(&alpha, &y, &grad, c);
            return Ok(DualSolution {
                alpha,
                y,
                gradient: grad,
                rho,
                iterations,
                gap: gap.max(0.0),
            });
        }
        if iterations >= params.max_iterations {
            return Err(MlError::NotConverged {
                iterations,
                gap,
                tolerance: params.tolerance,
            });
        }
        iterations += 1;

        // Move α_i += y_i·t, α_j −= y_j·t.
        let eta = (k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j]).max(1e-12);
        let cap_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let cap_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let t_opt = gap / eta;
        let t = t_opt.min(cap_i).min(cap_j);
        let new_i = if t == cap_i {
            if y[i] > 0.0 {
                c
            } else {
                0.0
            }
        } else {
            alpha[i] + y[i] * t
        };
        let new_j = if t == cap_j {
            if y[j] > 0.0 {
                0.0
            } else {
                c
            }
        } else {
            alpha[j] - y[j] * t
        };
        alpha[i] = new_i;
        alpha[j] = new_j;
        for (s, g) in grad.iter_mut().enumerate() {
            *g += y[s] * t * (k[s * n + i] - k[s * n + j]);
        }
    }
}

fn compute_rho(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut sum = 0.0;
    let mut n_free = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if !at_upper && !at_lower {
            sum += yg;
            n_free += 1;
        } else if (y[t] > 0.0 && at_upper) || (y[t] < 0.0 && at_lower) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    if n_free > 0 {
        sum / n_free as f64
    } else {
        match (ub.is_finite(), lb.is_finite()) {
            (true, true) => 0.5 * (ub + lb),
            (true, false) => ub,
            (false, true) => lb,
            (false, false) => 0.0,
        }
    }
}

/// Trains an RBF SVM; only samples with `α > 0` are kept.
pub fn svm_train(
    x: &[Vec<f64>],
    labels: &[Label],
    params: &SvmParams,
) -> Result<SvmModel, MlError> {
    let sol = solve_dual(x, labels, params)?;
    Ok(model_from_dual(x, &sol, params))
}

pub fn model_from_dual(x: &[Vec<f64>], sol: &DualSolution, params: &SvmParams) -> SvmModel {
    let idx: Vec<usize> = (0..x.len()).filter(|&t| sol.alpha[t] > 0.0).collect();
    let support_vectors: Vec<Vec<f64>> = idx.iter().map(|&t| x[t].clone()).collect();
    let dual_coef: Vec<f64> = idx.iter().map(|&t| sol.alpha[t] * sol.y[t]).collect();
    let mut w2 = 0.0;
    for (a, (sa, ca)) in support_vectors.iter().zip(&dual_coef).enumerate() {
        for (sb, cb) in support_vectors[..a].iter().zip(&dual_coef) {
            w2 += 2.0 * ca * cb * rbf(sa, sb, params.gamma);
        }
        w2 += ca * ca;
    }
    SvmModel {
        support_vectors,
        dual_coef,
        bias: -sol.rho,
        gamma: params.gamma,
        c: params.c,
        w_norm: w2.max(0.0).sqrt(),
    }
}

impl SvmModel {
    /// `f(x) = Σ αᵢyᵢK(xᵢ, x) + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * rbf(sv, x, self.gamma))
            .sum();
        s + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        if self.decision(x) >= 0.0 {
            Label::Malignant
        } else {
            Label::Benign
        }
    }
}

/// Signed geometric margin `sign(f)·|f(x)|/‖w‖`, with sign +1 at exactly
/// `f = 0`. Returns the distance and the sign.
pub fn svm_distance(model: &SvmModel, x: &[f64]) -> (f64, f64) {
    let f = model.decision(x);
    let sign = if f >= 0.0 { 1.0 } else { -1.0 };
    let w = if model.w_norm > 0.0 {
        model.w_norm
    } else {
        1.0
    };
    (sign * f.abs() / w, sign)
}

/// Largest violation of the KKT conditions of a dual solution, measured on
/// the decision values `yᵢf(xᵢ)` (`≥ 1` at α = 0, `= 1` when free, `≤ 1`
/// at α = C), together with the dual feasibility residuals.
pub fn kkt_violation(sol: &DualSolution, c: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut balance = 0.0;
    for t in 0..sol.alpha.len() {
        let a = sol.alpha[t];
        worst = worst.max((-a).max(a - c).max(0.0));
        balance += a * sol.y[t];
        // y·f(x) − 1 = ∇ − y·ρ.
        let margin = sol.gradient[t] - sol.y[t] * sol.rho;
        let v = if a <= 0.0 {
            (-margin).max(0.0)
        } else if a >= c {
            margin.max(0.0)
        } else {
            margin.abs()
        };
        worst = worst.max(v);
    }
    worst.max(balance.abs())
}
