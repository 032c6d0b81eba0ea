//! FFT plumbing shared by envelope detection, attenuation correction and
//! the H-scan filter bank.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse plan pair for one transform length. Inverse output is
/// normalized by `1/n`.
pub(crate) struct FftPair {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }

    pub(crate) fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.n);
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Scratch length needed by [`FftPair::inverse_unscaled`].
    pub(crate) fn inverse_scratch_len(&self) -> usize {
        self.inverse.get_inplace_scratch_len()
    }

    /// Unnormalized inverse transform with caller-provided scratch, for hot
    /// loops where only relative magnitudes matter.
    pub(crate) fn inverse_unscaled(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, scratch);
    }

    pub(crate) fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

/// Absolute frequency in Hz of FFT bin `k` for a length-`n` transform.
pub(crate) fn bin_frequency(k: usize, n: usize, fs: f64) -> f64 {
    let k = if k <= n / 2 { k } else { n - k };
    k as f64 * fs / n as f64
}

/// One-sided spectral weights turning a real spectrum into its analytic
/// counterpart: DC and Nyquist kept, positive bins doubled, negative zeroed.
pub(crate) fn analytic_weight(k: usize, n: usize) -> f64 {
    if k == 0 || (n % 2 == 0 && k == n / 2) {
        1.0
    } else if k < n.div_ceil(2) {
        2.0
    } else {
        0.0
    }
}

/// Magnitude of the analytic signal of `x`.
pub(crate) fn analytic_magnitude(fft: &FftPair, x: &[f64]) -> Vec<f64> {
    let n = fft.len();
    let mut spec = fft.forward_real(x);
    for (k, v) in spec.iter_mut().enumerate() {
        *v *= analytic_weight(k, n);
    }
    fft.inverse_in_place(&mut spec);
    spec.iter().map(|c| c.norm()).collect()
}
