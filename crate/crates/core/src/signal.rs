//! Sample-stream helpers: causal FIR filtering, correlation and delays.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::Complex64;

/// Filters longer than this use FFT block convolution.
const DIRECT_TAP_LIMIT: usize = 48;

/// Causal FIR filtering, `y[n] = sum_k taps[k] x[n - k]`, output as long as the input.
pub fn fir_filter(x: &[Complex64], taps: &[Complex64]) -> Vec<Complex64> {
    if taps.len() <= DIRECT_TAP_LIMIT || x.len() < 4 * taps.len() {
        fir_direct(x, taps)
    } else {
        fir_fft(x, taps)
    }
}

/// Real-tap convenience wrapper.
pub fn fir_filter_real(x: &[Complex64], taps: &[f64]) -> Vec<Complex64> {
    let c: Vec<Complex64> = taps.iter().map(|t| Complex64::new(*t, 0.0)).collect();
    fir_filter(x, &c)
}

fn fir_direct(x: &[Complex64], taps: &[Complex64]) -> Vec<Complex64> {
    let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
    for (n, out) in y.iter_mut().enumerate() {
        let kmax = taps.len().min(n + 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..kmax {
            acc += taps[k] * x[n - k];
        }
        *out = acc;
    }
    y
}

/// Overlap-add block convolution.
fn fir_fft(x: &[Complex64], taps: &[Complex64]) -> Vec<Complex64> {
    let m = taps.len();
    let size = (4 * m).next_power_of_two().max(1024);
    let block = size - m + 1;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut h = vec![Complex64::new(0.0, 0.0); size];
    h[..m].copy_from_slice(taps);
    fwd.process(&mut h);
    let scale = 1.0 / size as f64;
    let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    let mut start = 0;
    while start < x.len() {
        let len = block.min(x.len() - start);
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        buf[..len].copy_from_slice(&x[start..start + len]);
        fwd.process(&mut buf);
        buf.iter_mut().zip(&h).for_each(|(b, t)| *b *= t);
        inv.process(&mut buf);
        for (i, v) in buf
            .iter()
            .enumerate()
            .take((len + m - 1).min(x.len() - start))
        {
            y[start + i] += v * scale;
        }
        start += len;
    }
    y
}

/// Shift by an integer number of samples; positive delays prepend zeros.
pub fn shift(x: &[Complex64], delay: isize) -> Vec<Complex64> {
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            let j = i - delay;
            if j >= 0 && j < n {
                x[j as usize]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Cross-correlation `c[l] = sum_n a[n] conj(b[n - l])` for lags `0..max_lag`, by FFT.
pub struct Correlator {
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Correlator {
    pub fn new(signal_len: usize, max_lag: usize) -> Self {
        let size = (signal_len + max_lag).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        Self {
            size,
            fwd: planner.plan_fft_forward(size),
            inv: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Zero-padded forward transform.
    pub fn spectrum(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        buf[..x.len()].copy_from_slice(x);
        self.fwd.process(&mut buf);
        buf
    }

    /// Lags `0..max_lag` of the correlation of `a` against the spectrum of `b`.
    pub fn correlate_with(
        &self,
        a: &[Complex64],
        b_spectrum: &[Complex64],
        max_lag: usize,
    ) -> Vec<Complex64> {
        let mut buf = self.spectrum(a);
        buf.iter_mut()
            .zip(b_spectrum)
            .for_each(|(x, y)| *x *= y.conj());
        self.inv.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf.truncate(max_lag);
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }
}

pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}
