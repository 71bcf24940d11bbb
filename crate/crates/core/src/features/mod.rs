//! Phrase segmentation and the 12-component per-phrase voice descriptor.
//!
//! The descriptor is three blocks of four normalized scalars:
//!
//! * formants: median F1..F4 over voiced frames, each mapped from a fixed Hz
//!   range onto `[0, 1]`;
//! * noisiness: mean spectral flatness, its variance, zero-crossing rate and
//!   high-band energy ratio;
//! * prosody: relative peak position, mean level, attack slope and decay slope
//!   of the frame-RMS envelope.

mod lpc;
mod prosody;
mod spectral;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use lpc::{frame_formants, lpc_order, Resonance};
pub use spectral::{flatness, rms, zero_crossing_rate, PowerSpectrum, WHITE_NOISE_FLATNESS};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

pub const FEATURE_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    /// Frame RMS above which a frame counts as active.
    pub silence_threshold: f64,
    pub min_phrase_ms: f64,
    pub min_gap_ms: f64,
    pub frame_ms: f64,
    pub hop_ms: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            silence_threshold: 0.01,
            min_phrase_ms: 150.0,
            min_gap_ms: 100.0,
            frame_ms: 25.0,
            hop_ms: 10.0,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("silence_threshold", self.silence_threshold),
            ("min_phrase_ms", self.min_phrase_ms),
            ("min_gap_ms", self.min_gap_ms),
            ("frame_ms", self.frame_ms),
            ("hop_ms", self.hop_ms),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::BadSegmentationConfig(format!("{name} must be positive")));
            }
        }
        if self.hop_ms > self.frame_ms {
            return Err(Error::BadSegmentationConfig("hop_ms exceeds frame_ms".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub segmentation: SegmentationConfig,
    /// Hz ranges mapped onto `[0, 1]` for F1..F4.
    pub formant_ranges: [[f64; 2]; 4],
    /// Value reported for a formant slot with no voiced estimate.
    pub neutral_formant: f64,
    pub max_formant_bandwidth_hz: f64,
    /// Raw spectral flatness below which an active frame counts as voiced.
    pub voicing_flatness: f64,
    pub pre_emphasis: f64,
    pub high_band_hz: f64,
    /// Zero-crossing rate (per sample) mapped to 1.0.
    pub zcr_full_scale: f64,
    /// Envelope slope (peak-relative units per second) mapped to tanh(1).
    pub slope_scale: f64,
    /// Level in dBFS mapped to 0.0.
    pub level_floor_db: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            segmentation: SegmentationConfig::default(),
            formant_ranges: [
                [200.0, 1000.0],
                [500.0, 2500.0],
                [1500.0, 3500.0],
                [2500.0, 4500.0],
            ],
            neutral_formant: 0.5,
            max_formant_bandwidth_hz: 400.0,
            voicing_flatness: 0.3,
            pre_emphasis: 0.97,
            high_band_hz: 4000.0,
            zcr_full_scale: 0.5,
            slope_scale: 4.0,
            level_floor_db: -60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhraseSpan {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub rms: f64,
}

impl PhraseSpan {
    pub fn new(start: usize, end: usize, rms: f64) -> Self {
        Self { start, end, rms }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    fn check(&self, clip: &AudioClip) -> Result<()> {
        if self.start < self.end && self.end <= clip.len() {
            Ok(())
        } else {
            Err(Error::InvalidSpan {
                start: self.start,
                end: self.end,
                len: clip.len(),
            })
        }
    }
}

/// Twelve finite components in `[0, 1]`: formants, noisiness, prosody.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector12([f64; FEATURE_LEN]);

impl FeatureVector12 {
    pub fn new(values: [f64; FEATURE_LEN]) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput(i));
            }
            if !(0.0..=1.0).contains(v) {
                return Err(Error::InvalidEvent(format!(
                    "feature component {i} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self(values))
    }

    pub fn from_blocks(formants: [f64; 4], noisiness: [f64; 4], prosody: [f64; 4]) -> Result<Self> {
        let mut v = [0.0; FEATURE_LEN];
        v[..4].copy_from_slice(&formants);
        v[4..8].copy_from_slice(&noisiness);
        v[8..].copy_from_slice(&prosody);
        Self::new(v)
    }

    pub fn as_array(&self) -> &[f64; FEATURE_LEN] {
        &self.0
    }

    pub fn formants(&self) -> &[f64] {
        &self.0[..4]
    }

    pub fn noisiness(&self) -> &[f64] {
        &self.0[4..8]
    }

    pub fn prosody(&self) -> &[f64] {
        &self.0[8..]
    }
}

impl TryFrom<Vec<f64>> for FeatureVector12 {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let arr: [f64; FEATURE_LEN] = v.try_into().map_err(|v: Vec<f64>| {
            Error::InvalidEvent(format!("expected {FEATURE_LEN} components, got {}", v.len()))
        })?;
        Self::new(arr)
    }
}

impl From<FeatureVector12> for Vec<f64> {
    fn from(v: FeatureVector12) -> Self {
        v.0.to_vec()
    }
}

/// `(start, end)` of analysis frames inside `[start, end)`; a span shorter than
/// one frame is analyzed as a single frame.
fn frames(start: usize, end: usize, frame_len: usize, hop: usize) -> Vec<(usize, usize)> {
    if end - start <= frame_len {
        return vec![(start, end)];
    }
    let mut out = Vec::new();
    let mut s = start;
    while s + frame_len <= end {
        out.push((s, s + frame_len));
        s += hop;
    }
    out
}

pub fn segment_phrases(clip: &AudioClip, cfg: &SegmentationConfig) -> Result<Vec<PhraseSpan>> {
    if clip.is_empty() {
        return Err(Error::EmptyAudio);
    }
    cfg.validate()?;
    let samples = clip.samples();
    let frame_len = clip.ms_to_samples(cfg.frame_ms);
    let hop = clip.ms_to_samples(cfg.hop_ms);
    let min_gap = clip.ms_to_samples(cfg.min_gap_ms);
    let min_len = clip.ms_to_samples(cfg.min_phrase_ms);

    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (s, e) in frames(0, samples.len(), frame_len, hop) {
        if rms(&samples[s..e]) <= cfg.silence_threshold {
            continue;
        }
        match runs.last_mut() {
            Some(last) if s <= last.1 || s - last.1 < min_gap => last.1 = last.1.max(e),
            _ => runs.push((s, e)),
        }
    }
    Ok(runs
        .into_iter()
        .filter(|(s, e)| e - s >= min_len)
        .map(|(s, e)| PhraseSpan::new(s, e, rms(&samples[s..e])))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormantEstimate {
    /// Normalized F1..F4.
    pub values: [f64; 4],
    /// Median frequency per slot before normalization.
    pub hz: [Option<f64>; 4],
    pub voiced_frames: usize,
    pub low_confidence: bool,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn unit_range(v: f64, [lo, hi]: [f64; 2]) -> f64 {
    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
}

pub fn formant_block(clip: &AudioClip, span: &PhraseSpan, cfg: &FeatureConfig) -> Result<FormantEstimate> {
    span.check(clip)?;
    let samples = clip.samples();
    let sr = clip.sample_rate() as f64;
    let frame_len = clip.ms_to_samples(cfg.segmentation.frame_ms);
    let hop = clip.ms_to_samples(cfg.segmentation.hop_ms);
    let order = lpc_order(clip.sample_rate());

    let mut slots: [Vec<f64>; 4] = Default::default();
    let mut voiced = 0;
    let mut spectrum: Option<PowerSpectrum> = None;
    for (s, e) in frames(span.start, span.end, frame_len, hop) {
        let frame = &samples[s..e];
        if rms(frame) <= cfg.segmentation.silence_threshold {
            continue;
        }
        let spec = match &mut spectrum {
            Some(p) if p.frame_len() == frame.len() => p,
            _ => spectrum.insert(PowerSpectrum::new(frame.len())),
        };
        if flatness(&spec.compute(frame)) >= cfg.voicing_flatness {
            continue;
        }
        voiced += 1;
        let found = frame_formants(frame, sr, order, cfg.pre_emphasis, cfg.max_formant_bandwidth_hz);
        for (slot, r) in slots.iter_mut().zip(found) {
            slot.push(r.frequency);
        }
    }

    let hz = [0, 1, 2, 3].map(|i| median(&mut slots[i]));
    let values = [0, 1, 2, 3].map(|i| match hz[i] {
        Some(f) => unit_range(f, cfg.formant_ranges[i]),
        None => cfg.neutral_formant,
    });
    Ok(FormantEstimate {
        values,
        hz,
        voiced_frames: voiced,
        low_confidence: voiced == 0 || hz.iter().any(Option::is_none),
    })
}

/// Noisiness statistics before normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisinessStats {
    pub flatness_mean: f64,
    pub flatness_variance: f64,
    pub zero_crossing_rate: f64,
    pub high_band_ratio: f64,
}

impl NoisinessStats {
    /// Flatness statistics are rescaled so white noise sits near 1, the
    /// variance of a unit-bounded quantity by its maximum 1/4.
    pub fn normalized(&self, cfg: &FeatureConfig) -> [f64; 4] {
        [
            self.flatness_mean,
            (4.0 * self.flatness_variance).clamp(0.0, 1.0),
            (self.zero_crossing_rate / cfg.zcr_full_scale).clamp(0.0, 1.0),
            self.high_band_ratio.clamp(0.0, 1.0),
        ]
    }
}

pub fn noisiness_stats(clip: &AudioClip, span: &PhraseSpan, cfg: &FeatureConfig) -> Result<NoisinessStats> {
    span.check(clip)?;
    let samples = &clip.samples()[span.start..span.end];
    let sr = clip.sample_rate() as f64;
    let frame_len = clip.ms_to_samples(cfg.segmentation.frame_ms).min(samples.len());
    let hop = clip.ms_to_samples(cfg.segmentation.hop_ms);
    let cutoff = cfg.high_band_hz.min(sr / 4.0);

    let mut spectrum = PowerSpectrum::new(frame_len);
    let mut flat = Vec::new();
    let (mut high, mut total) = (0.0, 0.0);
    for (s, e) in frames(0, samples.len(), frame_len, hop) {
        let bins = spectrum.compute(&samples[s..e]);
        flat.push((flatness(&bins) / WHITE_NOISE_FLATNESS).min(1.0));
        for (k, p) in bins {
            total += p;
            if k as f64 * sr / frame_len as f64 > cutoff {
                high += p;
            }
        }
    }
    let n = flat.len() as f64;
    let mean = flat.iter().sum::<f64>() / n;
    let variance = flat.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
    Ok(NoisinessStats {
        flatness_mean: mean,
        flatness_variance: variance,
        zero_crossing_rate: zero_crossing_rate(samples),
        high_band_ratio: if total > 0.0 { high / total } else { 0.0 },
    })
}

pub fn noisiness_block(clip: &AudioClip, span: &PhraseSpan, cfg: &FeatureConfig) -> Result<[f64; 4]> {
    Ok(noisiness_stats(clip, span, cfg)?.normalized(cfg))
}

/// Frame-RMS envelope of a span.
pub fn envelope(clip: &AudioClip, span: &PhraseSpan, cfg: &SegmentationConfig) -> Result<Vec<f64>> {
    span.check(clip)?;
    let frame_len = clip.ms_to_samples(cfg.frame_ms);
    let hop = clip.ms_to_samples(cfg.hop_ms);
    Ok(frames(span.start, span.end, frame_len, hop)
        .into_iter()
        .map(|(s, e)| rms(&clip.samples()[s..e]))
        .collect())
}

pub fn prosody_block(clip: &AudioClip, span: &PhraseSpan, cfg: &FeatureConfig) -> Result<[f64; 4]> {
    let env = envelope(clip, span, &cfg.segmentation)?;
    let n = env.len();
    let peak_idx = prosody::argmax(&env);
    let peak = env[peak_idx];
    let mean = env.iter().sum::<f64>() / n as f64;
    let dt = clip.ms_to_samples(cfg.segmentation.hop_ms) as f64 / clip.sample_rate() as f64;
    let (attack, decay) = if peak > 0.0 {
        let rel: Vec<f64> = env.iter().map(|e| e / peak).collect();
        (
            prosody::regression_slope(&rel[..=peak_idx], dt),
            prosody::regression_slope(&rel[peak_idx..], dt),
        )
    } else {
        (0.0, 0.0)
    };
    Ok([
        (peak_idx as f64 + 0.5) / n as f64,
        prosody::level_unit(mean, cfg.level_floor_db),
        prosody::signed_unit(attack, cfg.slope_scale),
        prosody::signed_unit(decay, cfg.slope_scale),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhraseAnalysis {
    pub vector: FeatureVector12,
    pub low_confidence: bool,
}

pub fn analyze_phrase(clip: &AudioClip, span: &PhraseSpan, cfg: &FeatureConfig) -> Result<PhraseAnalysis> {
    let formants = formant_block(clip, span, cfg)?;
    let noisiness = noisiness_block(clip, span, cfg)?;
    let prosody = prosody_block(clip, span, cfg)?;
    Ok(PhraseAnalysis {
        vector: FeatureVector12::from_blocks(formants.values, noisiness, prosody)?,
        low_confidence: formants.low_confidence,
    })
}

pub fn phrase_vector(clip: &AudioClip, span: &PhraseSpan, cfg: &FeatureConfig) -> Result<FeatureVector12> {
    analyze_phrase(clip, span, cfg).map(|a| a.vector)
}

/// One CSV row: `clip_id,span_start,span_end,f1..f4,n1..n4,p1..p4,label`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub clip_id: String,
    pub span_start: usize,
    pub span_end: usize,
    pub vector: FeatureVector12,
    pub label: Option<String>,
}

pub const CSV_HEADER: [&str; 16] = [
    "clip_id", "span_start", "span_end", "f1", "f2", "f3", "f4", "n1", "n2", "n3", "n4", "p1",
    "p2", "p3", "p4", "label",
];

pub fn write_feature_csv<W: Write>(out: W, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for row in rows {
        let mut rec = vec![
            row.clip_id.clone(),
            row.span_start.to_string(),
            row.span_end.to_string(),
        ];
        rec.extend(row.vector.as_array().iter().map(f64::to_string));
        rec.push(row.label.clone().unwrap_or_default());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// Reads feature rows; with `require_label` every row must carry a non-empty label.
pub fn read_feature_csv<R: Read>(input: R, require_label: bool) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    for (i, name) in CSV_HEADER[..15].iter().enumerate() {
        if headers.get(i) != Some(*name) {
            return Err(Error::Csv(format!("column {i} must be {name:?}")));
        }
    }
    let has_label = headers.get(15) == Some("label");
    if require_label && !has_label {
        return Err(Error::Csv("missing required `label` column".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize| -> Result<f64> {
            field(j)
                .parse()
                .map_err(|_| Error::Csv(format!("line {line}: bad number {:?}", field(j))))
        };
        let idx = |j: usize| -> Result<usize> {
            field(j)
                .parse()
                .map_err(|_| Error::Csv(format!("line {line}: bad index {:?}", field(j))))
        };
        let mut values = [0.0; FEATURE_LEN];
        for (k, v) in values.iter_mut().enumerate() {
            *v = num(3 + k)?;
        }
        let label = has_label.then(|| field(15).to_string()).filter(|l| !l.is_empty());
        if require_label && label.is_none() {
            return Err(Error::Csv(format!("line {line}: empty label")));
        }
        rows.push(FeatureRow {
            clip_id: field(0).to_string(),
            span_start: idx(1)?,
            span_end: idx(2)?,
            vector: FeatureVector12::new(values)
                .map_err(|e| Error::Csv(format!("line {line}: {e}")))?,
            label,
        });
    }
    Ok(rows)
}

/// Segments a clip and analyzes every phrase.
pub fn extract_rows(clip_id: &str, clip: &AudioClip, cfg: &FeatureConfig, label: Option<&str>) -> Result<Vec<FeatureRow>> {
    segment_phrases(clip, &cfg.segmentation)?
        .iter()
        .map(|span| {
            Ok(FeatureRow {
                clip_id: clip_id.to_string(),
                span_start: span.start,
                span_end: span.end,
                vector: phrase_vector(clip, span, cfg)?,
                label: label.map(str::to_string),
            })
        })
        .collect()
}
