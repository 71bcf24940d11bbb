//! Short-time spectral statistics.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Expected spectral flatness of a single-frame periodogram of white noise:
/// periodogram bins are exponentially distributed, so the ratio of geometric
/// to arithmetic mean tends to `exp(-γ)`.
pub const WHITE_NOISE_FLATNESS: f64 = 0.561_459_483_566_885_2;

const POWER_FLOOR: f64 = 1e-20;

/// Hann-windowed power spectrum over bins `1..n/2` (DC and Nyquist dropped).
pub struct PowerSpectrum {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    scratch: Vec<Complex<f64>>,
}

impl PowerSpectrum {
    pub fn new(frame_len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(frame_len);
        let window = if frame_len < 2 {
            vec![1.0; frame_len]
        } else {
            (0..frame_len)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (frame_len - 1) as f64).cos())
                .collect()
        };
        Self {
            fft,
            window,
            scratch: vec![Complex::default(); frame_len],
        }
    }

    pub fn frame_len(&self) -> usize {
        self.window.len()
    }

    /// Returns `(bin index, power)` for the usable bins.
    pub fn compute(&mut self, frame: &[f64]) -> Vec<(usize, f64)> {
        assert_eq!(frame.len(), self.window.len());
        for ((c, &s), &w) in self.scratch.iter_mut().zip(frame).zip(&self.window) {
            *c = Complex::new(s * w, 0.0);
        }
        self.fft.process(&mut self.scratch);
        let half = frame.len() / 2;
        (1..half).map(|k| (k, self.scratch[k].norm_sqr())).collect()
    }
}

/// Geometric over arithmetic mean of the power bins, in `[0, 1]`.
pub fn flatness(bins: &[(usize, f64)]) -> f64 {
    if bins.is_empty() {
        return 0.0;
    }
    let n = bins.len() as f64;
    let arith = bins.iter().map(|b| b.1 + POWER_FLOOR).sum::<f64>() / n;
    let log_geo = bins.iter().map(|b| (b.1 + POWER_FLOOR).ln()).sum::<f64>() / n;
    (log_geo.exp() / arith).clamp(0.0, 1.0)
}

/// Sign changes per adjacent sample pair.
pub fn zero_crossing_rate(samples: &[f64]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let crossings = samples
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    crossings as f64 / (samples.len() - 1) as f64
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_spectrum_has_unit_flatness() {
        let bins: Vec<_> = (1..50).map(|k| (k, 3.0)).collect();
        assert!((flatness(&bins) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn white_noise_constant_matches_euler_gamma() {
        let gamma = 0.577_215_664_901_532_9f64;
        assert!((WHITE_NOISE_FLATNESS - (-gamma).exp()).abs() < 1e-15);
    }

    #[test]
    fn alternating_signal_crosses_every_sample() {
        let s: Vec<f64> = (0..11).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
        assert_eq!(zero_crossing_rate(&s), 1.0);
    }
}
