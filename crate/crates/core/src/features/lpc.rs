//! Linear-prediction formant estimation.

use std::f64::consts::PI;

use nalgebra::DMatrix;

/// Autocorrelation lags `0..=order`.
pub fn autocorrelation(frame: &[f64], order: usize) -> Vec<f64> {
    (0..=order)
        .map(|lag| {
            frame
                .iter()
                .zip(frame.iter().skip(lag))
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Levinson-Durbin recursion. Returns `[1, a1, .., ap]` for
/// `A(z) = 1 + a1 z^-1 + .. + ap z^-p`, or `None` on a degenerate frame.
pub fn levinson_durbin(r: &[f64]) -> Option<Vec<f64>> {
    let order = r.len().checked_sub(1)?;
    if !(r[0] > 0.0) {
        return None;
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (1..i).map(|j| a[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if !(err > 0.0) {
            // Perfectly predictable frame; the coefficients so far are still usable.
            a.truncate(i + 1);
            a.resize(order + 1, 0.0);
            break;
        }
    }
    Some(a)
}

/// Complex roots of `z^p + a1 z^(p-1) + .. + ap` as `(re, im)` pairs.
pub fn polynomial_roots(a: &[f64]) -> Vec<(f64, f64)> {
    let p = a.len() - 1;
    if p == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        companion[(0, j)] = -a[j + 1];
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect()
}

/// A resonance read off one prediction-polynomial root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub frequency: f64,
    pub bandwidth: f64,
}

/// Formant candidates in ascending frequency for a single analysis frame.
pub fn frame_formants(
    frame: &[f64],
    sample_rate: f64,
    order: usize,
    pre_emphasis: f64,
    max_bandwidth: f64,
) -> Vec<Resonance> {
    let n = frame.len();
    if n <= order {
        return Vec::new();
    }
    let mut x = Vec::with_capacity(n);
    let mut prev = 0.0;
    for &s in frame {
        x.push(s - pre_emphasis * prev);
        prev = s;
    }
    for (i, v) in x.iter_mut().enumerate() {
        *v *= 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
    }
    let r = autocorrelation(&x, order);
    let Some(a) = levinson_durbin(&r) else {
        return Vec::new();
    };
    let nyquist = sample_rate / 2.0;
    let mut out: Vec<Resonance> = polynomial_roots(&a)
        .into_iter()
        .filter(|&(_, im)| im > 0.0)
        .filter_map(|(re, im)| {
            let radius = (re * re + im * im).sqrt();
            if radius <= 0.0 {
                return None;
            }
            let frequency = im.atan2(re) * sample_rate / (2.0 * PI);
            let bandwidth = -radius.ln() * sample_rate / PI;
            (frequency > 90.0 && frequency < nyquist - 50.0 && bandwidth < max_bandwidth)
                .then_some(Resonance {
                    frequency,
                    bandwidth,
                })
        })
        .collect();
    out.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    out
}

pub fn lpc_order(sample_rate: u32) -> usize {
    2 + (sample_rate as f64 / 1000.0).round() as usize
}
