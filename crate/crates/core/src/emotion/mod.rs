//! Supervised feed-forward emotion classifier: 12 inputs, one tanh hidden
//! layer, softmax over a configurable list of emotional states.

mod model_file;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector12, FEATURE_LEN};

pub const DEFAULT_STATES: [&str; 6] = ["neutral", "fear", "grief", "anger", "tenderness", "exaltation"];

/// Ordered, unique, whitespace-free state identifiers; at least two.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct EmotionStateList(Vec<String>);

impl EmotionStateList {
    pub fn new<S: Into<String>>(states: impl IntoIterator<Item = S>) -> Result<Self> {
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        if states.len() < 2 {
            return Err(Error::InvalidStates("at least two states are required".into()));
        }
        for (i, s) in states.iter().enumerate() {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(Error::InvalidStates(format!("state {i} ({s:?}) must be a non-empty word")));
            }
            if states[..i].contains(s) {
                return Err(Error::InvalidStates(format!("duplicate state {s:?}")));
            }
        }
        Ok(Self(states))
    }

    pub fn default_list() -> Self {
        Self::new(DEFAULT_STATES).expect("default states are valid")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, state: &str) -> Option<usize> {
        self.0.iter().position(|s| s == state)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.0[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl TryFrom<Vec<String>> for EmotionStateList {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EmotionStateList> for Vec<String> {
    fn from(v: EmotionStateList) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionDistribution {
    pub probs: Vec<f64>,
    pub argmax: usize,
}

impl EmotionDistribution {
    fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        let mut argmax = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[argmax] {
                argmax = i;
            }
        }
        Self { probs, argmax }
    }
}

/// Network parameters. `w1` is `hidden x 12` and `w2` is `states x hidden`,
/// both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionNet {
    states: EmotionStateList,
    hidden: usize,
    seed: u64,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

/// Gradient of the loss with the same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
struct Gradient {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

struct Activations {
    hidden: Vec<f64>,
    out: EmotionDistribution,
}

impl EmotionNet {
    /// Glorot-uniform weights, `U(-sqrt(6/(fan_in+fan_out)), +..)`, drawn with
    /// ChaCha8 seeded by `seed`; biases zero.
    pub fn init(states: EmotionStateList, hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::ZeroHidden);
        }
        let s = states.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |fan_in: usize, fan_out: usize| -> Vec<f64> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)).collect()
        };
        let w1 = draw(FEATURE_LEN, hidden);
        let w2 = draw(hidden, s);
        Ok(Self {
            states,
            hidden,
            seed,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; s],
        })
    }

    pub fn states(&self) -> &EmotionStateList {
        &self.states
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Flat parameters in the order `w1, b1, w2, b2`.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn with_parameters(mut self, params: &[f64]) -> Result<Self> {
        if params.len() != self.parameter_count() {
            return Err(Error::InvalidEvent(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFiniteInput(i));
        }
        let mut rest = params;
        for part in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
        Ok(self)
    }

    fn activations(&self, x: &[f64; FEATURE_LEN]) -> Activations {
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|h| {
                let row = &self.w1[h * FEATURE_LEN..(h + 1) * FEATURE_LEN];
                (self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh()
            })
            .collect();
        let logits: Vec<f64> = (0..self.states.len())
            .map(|k| {
                let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
                self.b2[k] + row.iter().zip(&hidden).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        Activations {
            hidden,
            out: EmotionDistribution::from_logits(&logits),
        }
    }

    fn check_input(v: &FeatureVector12) -> Result<()> {
        match v.as_array().iter().position(|x| !x.is_finite()) {
            Some(i) => Err(Error::NonFiniteInput(i)),
            None => Ok(()),
        }
    }

    pub fn forward(&self, v: &FeatureVector12) -> Result<EmotionDistribution> {
        Self::check_input(v)?;
        Ok(self.activations(v.as_array()).out)
    }

    /// Index of the recognized state; ties go to the lowest index.
    pub fn classify_index(&self, v: &FeatureVector12) -> Result<usize> {
        self.forward(v).map(|d| d.argmax)
    }

    pub fn classify(&self, v: &FeatureVector12) -> Result<&str> {
        let i = self.classify_index(v)?;
        Ok(self.states.name(i))
    }

    /// Cross-entropy of one sample.
    pub fn sample_loss(&self, x: &[f64; FEATURE_LEN], label: usize) -> f64 {
        -self.activations(x).out.probs[label].ln()
    }

    pub fn mean_loss(&self, rows: &[(FeatureVector12, usize)]) -> f64 {
        rows.iter().map(|(v, y)| self.sample_loss(v.as_array(), *y)).sum::<f64>() / rows.len() as f64
    }

    pub fn accuracy(&self, rows: &[(FeatureVector12, usize)]) -> f64 {
        let correct = rows
            .iter()
            .filter(|(v, y)| self.activations(v.as_array()).out.argmax == *y)
            .count();
        correct as f64 / rows.len() as f64
    }

    fn zero_gradient(&self) -> Gradient {
        Gradient {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    /// Adds `scale * dL/dθ` for one sample into `grad`.
    fn accumulate_gradient(&self, x: &[f64; FEATURE_LEN], label: usize, scale: f64, grad: &mut Gradient) {
        let act = self.activations(x);
        let h = self.hidden;
        let mut d_hidden = vec![0.0; h];
        for k in 0..self.states.len() {
            let d_logit = act.out.probs[k] - if k == label { 1.0 } else { 0.0 };
            grad.b2[k] += scale * d_logit;
            for j in 0..h {
                grad.w2[k * h + j] += scale * d_logit * act.hidden[j];
                d_hidden[j] += d_logit * self.w2[k * h + j];
            }
        }
        for j in 0..h {
            let dz = d_hidden[j] * (1.0 - act.hidden[j] * act.hidden[j]);
            grad.b1[j] += scale * dz;
            for i in 0..FEATURE_LEN {
                grad.w1[j * FEATURE_LEN + i] += scale * dz * x[i];
            }
        }
    }

    fn gradient(&self, x: &[f64; FEATURE_LEN], label: usize) -> Vec<f64> {
        let mut g = self.zero_gradient();
        self.accumulate_gradient(x, label, 1.0, &mut g);
        [&g.w1[..], &g.b1, &g.w2, &g.b2].concat()
    }

    pub fn to_text(&self) -> String {
        model_file::write(self)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        model_file::read(text)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 200,
            batch_size: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub rows: Vec<(FeatureVector12, usize)>,
    pub hyper: Hyperparameters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Training-set loss before the first epoch, then after each epoch.
    pub losses: Vec<f64>,
    pub accuracy: f64,
}

/// Mini-batch gradient descent with momentum on mean cross-entropy.
/// Returns a trained copy; `net` is left untouched.
pub fn train(net: &EmotionNet, data: &TrainingSet) -> Result<(EmotionNet, TrainReport)> {
    if data.rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let s = net.states.len();
    if let Some((_, label)) = data.rows.iter().find(|(_, y)| *y >= s) {
        return Err(Error::LabelOutOfRange { label: *label, states: s });
    }
    let hp = data.hyper;
    let batch = hp.batch_size.max(1);
    let mut net = net.clone();
    let mut velocity = net.zero_gradient();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..data.rows.len()).collect();
    let mut losses = vec![net.mean_loss(&data.rows)];
    if !losses[0].is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }

    for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut grad = net.zero_gradient();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (v, y) = &data.rows[i];
                net.accumulate_gradient(v.as_array(), *y, scale, &mut grad);
            }
            let params = [
                (&mut net.w1, &mut velocity.w1, &grad.w1),
                (&mut net.b1, &mut velocity.b1, &grad.b1),
                (&mut net.w2, &mut velocity.w2, &grad.w2),
                (&mut net.b2, &mut velocity.b2, &grad.b2),
            ];
            for (theta, vel, g) in params {
                for ((t, v), g) in theta.iter_mut().zip(vel.iter_mut()).zip(g) {
                    *v = hp.momentum * *v - hp.learning_rate * g;
                    *t += *v;
                }
            }
        }
        let loss = net.mean_loss(&data.rows);
        if !loss.is_finite() || net.parameters().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        losses.push(loss);
    }
    let accuracy = net.accuracy(&data.rows);
    Ok((net, TrainReport { losses, accuracy }))
}

/// Largest relative error between backpropagated gradients and central
/// finite differences (step 1e-5) over every parameter.
pub fn gradient_check(net: &EmotionNet, sample: &FeatureVector12, label: usize) -> f64 {
    const STEP: f64 = 1e-5;
    let x = sample.as_array();
    let analytic = net.gradient(x, label);
    let params = net.parameters();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (i, a) in analytic.iter().enumerate() {
        let mut p = params.clone();
        p[i] = params[i] + STEP;
        probe = probe.with_parameters(&p).expect("finite parameters");
        let plus = probe.sample_loss(x, label);
        p[i] = params[i] - STEP;
        probe = probe.with_parameters(&p).expect("finite parameters");
        let minus = probe.sample_loss(x, label);
        let numeric = (plus - minus) / (2.0 * STEP);
        let denom = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}

/// Maps labeled feature rows onto state indices.
pub fn labeled_rows(
    rows: &[crate::features::FeatureRow],
    states: &EmotionStateList,
) -> Result<Vec<(FeatureVector12, usize)>> {
    rows.iter()
        .map(|r| {
            let label = r.label.as_deref().unwrap_or("");
            let idx = states
                .index_of(label)
                .ok_or_else(|| Error::UnknownState(label.to_string()))?;
            Ok((r.vector, idx))
        })
        .collect()
}
