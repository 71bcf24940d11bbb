//! Poster-gluer agents: sensitivity-driven moods, willingness budgets,
//! greedy cooperative placement and fixed-period pairwise mood compensation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::canvas::{apply_action, metrics, render, utility, Perturbation, QualityVector, Scene, SequenceConfig};
use crate::emotion::EmotionStateList;
use crate::error::{Error, Result};
use crate::rng;
use crate::script::CueState;

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: usize,
    pub mood: f64,
    pub fragment: String,
    /// `(sequence index, state index) -> weight`.
    pub sensitivity: BTreeMap<(usize, usize), f64>,
}

/// Mood-exchange gates. `Disabled` lets every unequal pair exchange.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Gates {
    Enabled { high: f64, low: f64 },
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensationParams {
    /// Ticks between rounds.
    pub period: u64,
    /// Fraction of the gap closed per exchange, in `(0, 1]`.
    pub rate: f64,
    pub gates: Gates,
}

impl Default for CompensationParams {
    fn default() -> Self {
        Self {
            period: 8,
            rate: 0.5,
            gates: Gates::Enabled { high: 5.0, low: -5.0 },
        }
    }
}

impl CompensationParams {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::InvalidTroupe("compensation period must be at least 1".into()));
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::InvalidTroupe(format!("compensation rate {} outside (0, 1]", self.rate)));
        }
        if let Gates::Enabled { high, low } = self.gates {
            if !(high.is_finite() && low.is_finite() && low < high) {
                return Err(Error::InvalidTroupe(format!("gates need low < high, got {low} / {high}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Troupe {
    agents: Vec<Agent>,
    mood_bound: f64,
    decay: f64,
    compensation: CompensationParams,
}

/// What the agents perceive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Environment {
    pub recognized_state: Option<String>,
    pub cue: CueState,
    pub sequence_values: BTreeMap<String, f64>,
    pub observer_report: QualityVector,
}

impl Troupe {
    pub fn new(agents: Vec<Agent>, mood_bound: f64, decay: f64, compensation: CompensationParams) -> Result<Self> {
        if !(mood_bound.is_finite() && mood_bound > 0.0) {
            return Err(Error::InvalidTroupe("mood bound must be positive".into()));
        }
        if !(0.0..=1.0).contains(&decay) {
            return Err(Error::InvalidTroupe(format!("decay {decay} outside [0, 1]")));
        }
        compensation.validate()?;
        for (i, a) in agents.iter().enumerate() {
            if a.id != i {
                return Err(Error::InvalidTroupe(format!("agent ids must be contiguous from 0; found {} at {i}", a.id)));
            }
            if !(a.mood.abs() <= mood_bound) {
                return Err(Error::InvalidTroupe(format!("agent {i} mood {} outside ±{mood_bound}", a.mood)));
            }
            if a.sensitivity.values().any(|w| !w.is_finite()) {
                return Err(Error::InvalidTroupe(format!("agent {i} has a non-finite sensitivity")));
            }
        }
        Ok(Self { agents, mood_bound, decay, compensation })
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, id: usize) -> Result<&Agent> {
        self.agents.get(id).ok_or(Error::UnknownAgent(id))
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn mood_bound(&self) -> f64 {
        self.mood_bound
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn compensation(&self) -> CompensationParams {
        self.compensation
    }

    pub fn moods(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.mood).collect()
    }

    pub fn total_mood(&self) -> f64 {
        self.agents.iter().map(|a| a.mood).sum()
    }

    pub fn set_moods(&mut self, moods: &[f64]) -> Result<()> {
        if moods.len() != self.agents.len() {
            return Err(Error::InvalidTroupe("mood count does not match agent count".into()));
        }
        if moods.iter().any(|m| !(m.abs() <= self.mood_bound)) {
            return Err(Error::InvalidTroupe("mood outside bound".into()));
        }
        for (a, m) in self.agents.iter_mut().zip(moods) {
            a.mood = *m;
        }
        Ok(())
    }

    pub fn set_decay(&mut self, decay: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&decay) {
            return Err(Error::InvalidTroupe(format!("decay {decay} outside [0, 1]")));
        }
        self.decay = decay;
        Ok(())
    }

    pub fn set_compensation(&mut self, params: CompensationParams) -> Result<()> {
        params.validate()?;
        self.compensation = params;
        Ok(())
    }

    pub fn set_sensitivity(&mut self, agent: usize, sequence: usize, state: usize, weight: f64) -> Result<()> {
        if !weight.is_finite() {
            return Err(Error::InvalidTroupe("sensitivity must be finite".into()));
        }
        let a = self.agents.get_mut(agent).ok_or(Error::UnknownAgent(agent))?;
        a.sensitivity.insert((sequence, state), weight);
        Ok(())
    }
}

/// `mood <- clamp(decay * mood + sensitivity[(sequence, state)], -M, M)`.
pub fn apply_stimulus(troupe: &Troupe, env: &Environment, states: &EmotionStateList) -> Result<Troupe> {
    let name = env
        .recognized_state
        .as_deref()
        .ok_or_else(|| Error::InvalidEvent("no recognized state to react to".into()))?;
    let state = states.index_of(name).ok_or_else(|| Error::UnknownState(name.to_string()))?;
    let key = (env.cue.sequence, state);
    let m = troupe.mood_bound;
    let mut out = troupe.clone();
    for a in &mut out.agents {
        let push = a.sensitivity.get(&key).copied().unwrap_or(0.0);
        a.mood = (troupe.decay * a.mood + push).clamp(-m, m);
    }
    Ok(out)
}

/// Pairs for one round: a seeded permutation cut into consecutive pairs; with
/// an odd count the last agent idles.
pub fn pairing_for_round(agents: usize, seed: u64, tick: u64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..agents).collect();
    order.shuffle(&mut rng::pairing_stream(seed, tick));
    order.chunks_exact(2).map(|p| (p[0], p[1])).collect()
}

/// One exchange round. Within each pair the happier agent gives
/// `rate * gap / 2` to the other when it is above the high gate and the
/// other is below the low gate. Total mood is conserved.
pub fn compensation_round(troupe: &Troupe, tick: u64, seed: u64) -> Troupe {
    let mut out = troupe.clone();
    let params = troupe.compensation;
    for (i, j) in pairing_for_round(troupe.agents.len(), seed, tick) {
        let (hi, lo) = if out.agents[i].mood >= out.agents[j].mood { (i, j) } else { (j, i) };
        let (mh, ml) = (out.agents[hi].mood, out.agents[lo].mood);
        if mh <= ml {
            continue;
        }
        let gated = match params.gates {
            Gates::Enabled { high, low } => mh > high && ml < low,
            Gates::Disabled => true,
        };
        if !gated {
            continue;
        }
        let delta = params.rate * (mh - ml) / 2.0;
        out.agents[hi].mood = mh - delta;
        out.agents[lo].mood = ml + delta;
    }
    out
}

/// Logistic share of `base_budget`: `floor(base * σ(3 * mood / M))`.
pub fn willingness(agent: &Agent, base_budget: u32, mood_bound: f64) -> u32 {
    let sigma = 1.0 / (1.0 + (-3.0 * agent.mood / mood_bound).exp());
    ((base_budget as f64 * sigma).floor() as u32).min(base_budget)
}

/// Draws one move: translate along one axis by ±1..±32 units, scale ×0.9 or
/// ×1.1, or opacity ±0.1, each kind equally likely.
pub fn draw_perturbation<R: Rng>(rng: &mut R) -> Perturbation {
    let sign = |rng: &mut R| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    match rng.gen_range(0..3) {
        0 => {
            let d = sign(rng) * rng.gen_range(1..=32) as f64;
            if rng.gen_bool(0.5) {
                Perturbation::Translate { dx: d, dy: 0.0 }
            } else {
                Perturbation::Translate { dx: 0.0, dy: d }
            }
        }
        1 => Perturbation::Scale { factor: if rng.gen_bool(0.5) { 1.1 } else { 0.9 } },
        _ => Perturbation::Opacity { delta: sign(rng) * 0.1 },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub scene: Scene,
    pub accepted: Option<Perturbation>,
    pub attempts: u32,
    pub utility: f64,
}

/// Tries `candidates` in order and keeps the first one that strictly raises
/// the scene utility.
pub fn step_with_candidates(
    agent: &Agent,
    scene: &Scene,
    cfg: &SequenceConfig,
    candidates: impl IntoIterator<Item = Perturbation>,
) -> Result<StepOutcome> {
    if scene.get(agent.id).is_none() {
        return Err(Error::UnknownAgent(agent.id));
    }
    let before = utility(scene, cfg);
    let mut attempts = 0;
    for action in candidates {
        attempts += 1;
        let Ok(candidate) = apply_action(scene, agent.id, action) else {
            continue;
        };
        let after = utility(&candidate, cfg);
        if after > before {
            return Ok(StepOutcome { scene: candidate, accepted: Some(action), attempts, utility: after });
        }
    }
    Ok(StepOutcome { scene: scene.clone(), accepted: None, attempts, utility: before })
}

/// Greedy hill-climbing step drawing up to `willingness` candidates from the
/// agent's own stream.
pub fn agent_step<R: Rng>(
    agent: &Agent,
    scene: &Scene,
    cfg: &SequenceConfig,
    rng: &mut R,
    base_budget: u32,
    mood_bound: f64,
) -> Result<StepOutcome> {
    let budget = willingness(agent, base_budget, mood_bound);
    let candidates = std::iter::from_fn(|| Some(draw_perturbation(rng))).take(budget as usize);
    step_with_candidates(agent, scene, cfg, candidates)
}

pub fn observer_report(scene: &Scene, cfg: &SequenceConfig) -> QualityVector {
    metrics(&render(scene), cfg)
}
