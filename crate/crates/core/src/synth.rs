//! Deterministic signal generators for fixtures, corpora and tests.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Formant frequencies and bandwidths (Hz) for a synthetic vowel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VowelSpec {
    pub formants: [f64; 4],
    pub bandwidths: [f64; 4],
    pub f0: f64,
}

impl VowelSpec {
    pub fn new(formants: [f64; 4]) -> Self {
        Self {
            formants,
            bandwidths: [80.0, 90.0, 120.0, 150.0],
            f0: 120.0,
        }
    }
}

/// Reference vowel set, roughly cardinal vowel formant positions.
pub const VOWELS: [[f64; 4]; 5] = [
    [700.0, 1200.0, 2600.0, 3300.0],
    [300.0, 2200.0, 2900.0, 3600.0],
    [500.0, 1800.0, 2500.0, 3500.0],
    [400.0, 900.0, 2400.0, 3400.0],
    [320.0, 800.0, 2300.0, 3200.0],
];

pub fn silence(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

pub fn sine(freq: f64, amplitude: f64, n: usize, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    (0..n)
        .map(|i| amplitude * (2.0 * PI * freq * i as f64 / sr).sin())
        .collect()
}

/// Uniform white noise in `[-amplitude, amplitude]`.
pub fn white_noise(amplitude: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| amplitude * rng.gen_range(-1.0..=1.0))
        .collect()
}

/// Two-pole resonator with unity gain at DC.
fn resonate(input: &[f64], freq: f64, bandwidth: f64, sample_rate: f64) -> Vec<f64> {
    let r = (-PI * bandwidth / sample_rate).exp();
    let theta = 2.0 * PI * freq / sample_rate;
    let a1 = 2.0 * r * theta.cos();
    let a2 = -r * r;
    let gain = 1.0 - a1 - a2;
    let (mut y1, mut y2) = (0.0, 0.0);
    input
        .iter()
        .map(|&x| {
            let y = gain * x + a1 * y1 + a2 * y2;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

const GLOTTAL_POLE: f64 = 0.97;

/// Glottal-pulse excited cascade of four resonators, peak-normalized to `amplitude`.
pub fn vowel(spec: &VowelSpec, amplitude: f64, n: usize, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let period = sr / spec.f0;
    let mut excitation = vec![0.0; n];
    let mut t = 0.0;
    while (t as usize) < n {
        excitation[t as usize] = 1.0;
        t += period;
    }
    // Glottal source roll-off, one-pole low-pass, the inverse of a 0.97 pre-emphasis.
    let mut prev = 0.0;
    let mut signal: Vec<f64> = excitation
        .into_iter()
        .map(|e| {
            prev = e + GLOTTAL_POLE * prev;
            prev
        })
        .collect();
    for (f, b) in spec.formants.iter().zip(&spec.bandwidths) {
        signal = resonate(&signal, *f, *b, sr);
    }
    normalize_peak(&mut signal, amplitude);
    signal
}

pub fn normalize_peak(signal: &mut [f64], amplitude: f64) {
    let peak = signal.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        for s in signal.iter_mut() {
            *s *= amplitude / peak;
        }
    }
}

/// Multiplies `signal` by `envelope(t)` with `t` running over `[0, 1]`.
pub fn shape(signal: &mut [f64], envelope: impl Fn(f64) -> f64) {
    let n = signal.len();
    if n < 2 {
        return;
    }
    for (i, s) in signal.iter_mut().enumerate() {
        *s *= envelope(i as f64 / (n - 1) as f64);
    }
}

pub fn concat(parts: &[Vec<f64>]) -> Vec<f64> {
    parts.iter().flatten().copied().collect()
}

/// Adds `b` into `a` sample-wise and clamps to `[-1, 1]`.
pub fn mix(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x + y).clamp(-1.0, 1.0))
        .collect()
}

/// Per-class voice character used to synthesize labeled toy corpora.
#[derive(Debug, Clone, Copy)]
pub struct VoiceProfile {
    pub vowel: usize,
    pub f0: f64,
    pub noise: f64,
    pub level: f64,
    /// Relative position of the loudness peak within a phrase.
    pub peak_at: f64,
}

/// Profiles for the default six-state list, indexed by state.
pub const DEFAULT_PROFILES: [VoiceProfile; 6] = [
    VoiceProfile { vowel: 2, f0: 120.0, noise: 0.02, level: 0.4, peak_at: 0.5 },
    VoiceProfile { vowel: 1, f0: 180.0, noise: 0.20, level: 0.25, peak_at: 0.15 },
    VoiceProfile { vowel: 4, f0: 100.0, noise: 0.05, level: 0.15, peak_at: 0.1 },
    VoiceProfile { vowel: 0, f0: 150.0, noise: 0.35, level: 0.9, peak_at: 0.3 },
    VoiceProfile { vowel: 3, f0: 130.0, noise: 0.01, level: 0.3, peak_at: 0.7 },
    VoiceProfile { vowel: 0, f0: 220.0, noise: 0.10, level: 0.8, peak_at: 0.9 },
];

/// One phrase in the style of `profile`, with small seeded variation.
pub fn profiled_phrase(profile: &VoiceProfile, secs: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (secs * sample_rate as f64) as usize;
    let jitter = |rng: &mut ChaCha8Rng, x: f64, rel: f64| x * (1.0 + rng.gen_range(-rel..=rel));
    let base = VOWELS[profile.vowel % VOWELS.len()];
    let spec = VowelSpec {
        formants: base.map(|f| jitter(&mut rng, f, 0.04)),
        bandwidths: [80.0, 90.0, 120.0, 150.0],
        f0: jitter(&mut rng, profile.f0, 0.05),
    };
    let level = jitter(&mut rng, profile.level, 0.1).min(0.95);
    let voiced = vowel(&spec, 1.0, n, sample_rate);
    let noise = white_noise(profile.noise, n, rng.gen());
    let mut signal = mix(&voiced, &noise);
    normalize_peak(&mut signal, 1.0);
    let peak = profile.peak_at.clamp(0.05, 0.95);
    shape(&mut signal, |t| {
        let up = if t <= peak { t / peak } else { (1.0 - t) / (1.0 - peak) };
        level * (0.1 + 0.9 * up)
    });
    signal
}

/// A labeled clip of `phrases` phrases separated by silence.
pub fn profiled_clip(profile: &VoiceProfile, phrases: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
    let gap = silence((0.3 * sample_rate as f64) as usize);
    let mut parts = vec![gap.clone()];
    for p in 0..phrases {
        parts.push(profiled_phrase(profile, 0.6, sample_rate, seed.wrapping_mul(31).wrapping_add(p as u64)));
        parts.push(gap.clone());
    }
    concat(&parts)
}

/// Labeled 12-D Gaussian clusters clamped into the unit cube. Class centers
/// are drawn uniformly from `[0.15, 0.85]^12`; rows cycle through classes.
pub fn gaussian_clusters(
    classes: usize,
    rows: usize,
    sigma: f64,
    seed: u64,
) -> (Vec<[f64; 12]>, Vec<(crate::features::FeatureVector12, usize)>) {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<[f64; 12]> = (0..classes)
        .map(|_| std::array::from_fn(|_| rng.gen_range(0.15..0.85)))
        .collect();
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let data = (0..rows)
        .map(|i| {
            let label = i % classes;
            let v = centers[label].map(|c| (c + noise.sample(&mut rng)).clamp(0.0, 1.0));
            (
                crate::features::FeatureVector12::new(v).expect("clamped into the unit cube"),
                label,
            )
        })
        .collect();
    (centers, data)
}

/// Clips per voice profile in the bundled corpus.
pub const CORPUS_CLIPS_PER_PROFILE: usize = 4;
pub const CORPUS_PHRASES_PER_CLIP: usize = 3;
pub const CORPUS_SAMPLE_RATE: u32 = 16_000;

pub struct CorpusClip {
    pub name: String,
    /// Index into [`DEFAULT_PROFILES`], which lines up with the default
    /// emotional state list.
    pub label: usize,
    pub samples: Vec<f64>,
}

/// The bundled labeled corpus: every default profile, several seeds each.
pub fn corpus() -> Vec<CorpusClip> {
    let mut clips = Vec::new();
    for (label, profile) in DEFAULT_PROFILES.iter().enumerate() {
        for k in 0..CORPUS_CLIPS_PER_PROFILE {
            let seed = (label * 100 + k) as u64;
            clips.push(CorpusClip {
                name: format!("clip_{:02}", clips.len()),
                label,
                samples: profiled_clip(profile, CORPUS_PHRASES_PER_CLIP, CORPUS_SAMPLE_RATE, seed),
            });
        }
    }
    clips
}

/// Ten seconds of alternating voices: eight 0.75 s phrases, 0.45 s apart.
pub fn demo_performance(sample_rate: u32) -> Vec<f64> {
    let secs = |s: f64| (s * sample_rate as f64).round() as usize;
    let order = [0, 1, 3, 2, 4, 5, 1, 3];
    let mut parts = vec![silence(secs(0.4))];
    for (i, p) in order.iter().enumerate() {
        parts.push(profiled_phrase(&DEFAULT_PROFILES[*p], 0.75, sample_rate, 7_000 + i as u64));
        parts.push(silence(secs(0.45)));
    }
    let mut out = concat(&parts);
    out.resize(secs(10.0), 0.0);
    out
}
