//! The fixed-tick loop wiring phrase events to recognized states, moods,
//! agent moves and the composed scene, plus event-sourced recording, replay,
//! offline batch runs and the live control session.
//!
//! Two clocks run side by side. The session tick counts every tick ever run
//! and stamps events and log lines; it never goes back. The simulation tick
//! drives compensation periods, observer refreshes and pairing seeds, and is
//! rewound by `restore` together with the rest of the engine state.

mod event;
mod live;
mod log;
mod offline;

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canvas::{render, QualityVector, Raster, Scene, SceneGraph, SequenceConfig};
use crate::emotion::EmotionNet;
use crate::error::{Error, Result};
use crate::features::FeatureVector12;
use crate::rng::agent_stream;
use crate::script::{advance_cue, CueAdvance, CueState, Script};
use crate::troupe::{
    agent_step, apply_stimulus, compensation_round, observer_report, CompensationParams, Environment, Gates, Troupe,
};

pub use event::{EventKind, InputEvent, ParamPath, WeightTerm};
pub use live::{LiveSession, Outbound};
pub use log::{replay, LogEntry, LogHeader, ReplayReport, SessionLog, LOG_VERSION};
pub use offline::{run_offline, OfflineInput, OfflineRun};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Logical ticks per second of session time.
    pub tick_rate: f64,
    /// Compensation period P in ticks; `None` keeps the script's value.
    pub compensation_period: Option<u64>,
    /// Observer refresh period O in ticks; `None` means O = P.
    pub observer_period: Option<u64>,
    /// Most candidate moves an agent may try per tick.
    pub base_budget: u32,
    /// Session ticks between recorded digests.
    pub digest_interval: u64,
    pub master_seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            tick_rate: 10.0,
            compensation_period: None,
            observer_period: None,
            base_budget: 8,
            digest_interval: 10,
            master_seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tick_rate.is_finite() && self.tick_rate > 0.0) {
            return Err(Error::InvalidConfig(format!("tick rate {} must be positive", self.tick_rate)));
        }
        if self.compensation_period == Some(0) {
            return Err(Error::InvalidConfig("compensation period must be at least 1".into()));
        }
        if self.observer_period == Some(0) {
            return Err(Error::InvalidConfig("observer period must be at least 1".into()));
        }
        if self.base_budget == 0 {
            return Err(Error::InvalidConfig("base budget must be at least 1".into()));
        }
        if self.digest_interval == 0 {
            return Err(Error::InvalidConfig("digest interval must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, seed excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.master_seed = 0;
        hex::encode(Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }

    /// Session tick on which a phrase ending at `secs` is delivered.
    pub fn tick_at(&self, secs: f64) -> u64 {
        (secs * self.tick_rate).ceil().max(0.0) as u64
    }
}

pub fn model_hash(model: &EmotionNet) -> String {
    hex::encode(Sha256::digest(model.to_text().as_bytes()))
}

/// Everything `restore` brings back.
#[derive(Debug, Clone)]
struct EngineState {
    sim_tick: u64,
    troupe: Troupe,
    scene: Scene,
    cue: CueState,
    terminal: bool,
    recognized: Option<String>,
    last_features: Option<FeatureVector12>,
    stimulus_pending: bool,
    sequences: Vec<SequenceConfig>,
    observer: QualityVector,
    rngs: Vec<ChaCha8Rng>,
}

/// One entry of the per-tick trace, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStep {
    Ingest { events: usize },
    Stimulus,
    Compensation,
    AgentStep { agent: usize },
    Observer,
    Emit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueView {
    pub sequence: usize,
    pub sequence_id: String,
    pub phrase: u32,
    pub terminal: bool,
}

/// What a tick produced.
#[derive(Debug, Clone)]
pub struct TickOutput {
    pub session_tick: u64,
    pub sim_tick: u64,
    pub scene: SceneGraph,
    pub raster: Raster,
    pub moods: Vec<f64>,
    pub recognized_state: Option<String>,
    pub cue: CueView,
    /// Present on ticks where the observer refreshed.
    pub observer: Option<QualityVector>,
    pub digest: String,
    /// Events that were due but could not be applied, with the reason.
    pub rejected: Vec<(InputEvent, String)>,
    /// Ids handed out to snapshot events this tick.
    pub snapshots: Vec<u64>,
    pub accepted_moves: usize,
}

pub struct Engine {
    script: Arc<Script>,
    model: Arc<EmotionNet>,
    config: EngineConfig,
    session_tick: u64,
    state: EngineState,
    snapshots: Vec<EngineState>,
    trace: Option<Vec<(u64, TraceStep)>>,
}

impl Engine {
    pub fn new(script: Arc<Script>, model: Arc<EmotionNet>, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        if model.states() != script.states() {
            return Err(Error::InvalidConfig(format!(
                "model states [{}] differ from script states [{}]",
                model.states().iter().collect::<Vec<_>>().join(", "),
                script.states().iter().collect::<Vec<_>>().join(", ")
            )));
        }
        let mut troupe = script.build_troupe()?;
        if let Some(p) = config.compensation_period {
            troupe.set_compensation(CompensationParams { period: p, ..troupe.compensation() })?;
        }
        let state = EngineState {
            sim_tick: 0,
            rngs: (0..troupe.len()).map(|i| agent_stream(config.master_seed, i)).collect(),
            troupe,
            scene: script.build_scene()?,
            cue: CueState::default(),
            terminal: false,
            recognized: None,
            last_features: None,
            stimulus_pending: false,
            sequences: (0..script.sequence_count()).map(|i| script.sequence(i).utility.clone()).collect(),
            observer: QualityVector::default(),
        };
        let mut engine = Self { script, model, config, session_tick: 0, state, snapshots: Vec::new(), trace: None };
        engine.state.observer = observer_report(&engine.state.scene, engine.current_config());
        Ok(engine)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn script(&self) -> &Arc<Script> {
        &self.script
    }

    pub fn model(&self) -> &Arc<EmotionNet> {
        &self.model
    }

    /// The next session tick to run.
    pub fn session_tick(&self) -> u64 {
        self.session_tick
    }

    pub fn sim_tick(&self) -> u64 {
        self.state.sim_tick
    }

    pub fn troupe(&self) -> &Troupe {
        &self.state.troupe
    }

    pub fn scene(&self) -> &Scene {
        &self.state.scene
    }

    pub fn cue(&self) -> CueView {
        CueView {
            sequence: self.state.cue.sequence,
            sequence_id: self.script.sequence(self.state.cue.sequence).id.clone(),
            phrase: self.state.cue.phrase,
            terminal: self.state.terminal,
        }
    }

    pub fn observer(&self) -> QualityVector {
        self.state.observer
    }

    pub fn snapshot_count(&self) -> u64 {
        self.snapshots.len() as u64
    }

    pub fn compensation_period(&self) -> u64 {
        self.state.troupe.compensation().period
    }

    pub fn observer_period(&self) -> u64 {
        self.config.observer_period.unwrap_or_else(|| self.compensation_period())
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    /// Drains the `(session tick, step)` trace recorded so far.
    pub fn take_trace(&mut self) -> Vec<(u64, TraceStep)> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn current_config(&self) -> &SequenceConfig {
        &self.state.sequences[self.state.cue.sequence]
    }

    fn record(&mut self, step: TraceStep) {
        let tick = self.session_tick;
        if let Some(t) = &mut self.trace {
            t.push((tick, step));
        }
    }

    /// Resolves every name an event mentions against the script, without
    /// touching state.
    pub fn check_event(&self, kind: &EventKind) -> Result<()> {
        match kind {
            EventKind::StateOverride(s) => {
                self.script.states().index_of(s).ok_or_else(|| Error::UnknownState(s.clone()))?;
            }
            EventKind::ParamUpdate { path, value } => self.check_param(path, *value)?,
            EventKind::Restore(id) if *id >= self.snapshot_count() => {
                return Err(Error::InvalidEvent(format!("unknown snapshot id {id}")));
            }
            _ => {}
        }
        Ok(())
    }

    fn check_param(&self, path: &ParamPath, value: f64) -> Result<()> {
        let seq = |id: &str| {
            self.script
                .sequence_index(id)
                .ok_or_else(|| Error::InvalidEvent(format!("unknown sequence {id:?} in {path}")))
        };
        match path {
            ParamPath::Decay if !(0.0..=1.0).contains(&value) => {
                Err(Error::InvalidEvent(format!("decay {value} outside [0, 1]")))
            }
            ParamPath::CompensationRate if !(value > 0.0 && value <= 1.0) => {
                Err(Error::InvalidEvent(format!("compensation rate {value} outside (0, 1]")))
            }
            ParamPath::Sensitivity { agent, sequence, state } => {
                if *agent >= self.script.agent_count() {
                    return Err(Error::UnknownAgent(*agent));
                }
                seq(sequence)?;
                self.script.states().index_of(state).ok_or_else(|| Error::UnknownState(state.clone()))?;
                Ok(())
            }
            ParamPath::Weight { sequence, .. } => {
                seq(sequence)?;
                if value < 0.0 {
                    return Err(Error::InvalidEvent(format!("utility weight {value} is negative")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Applies one event atomically: on error the state is untouched.
    fn apply_event(&mut self, kind: &EventKind) -> Result<Option<u64>> {
        self.check_event(kind)?;
        let states = self.script.states();
        match kind {
            EventKind::PhraseFeatures(v) => {
                let name = self.model.classify(v)?.to_string();
                self.state.recognized = Some(name);
                self.state.last_features = Some(*v);
                self.state.stimulus_pending = true;
                self.state.cue.phrase += 1;
            }
            EventKind::StateOverride(s) => {
                self.state.recognized = Some(s.clone());
                self.state.stimulus_pending = true;
            }
            EventKind::CueAdvance => match advance_cue(self.state.cue, &self.script) {
                CueAdvance::Moved(next) => self.state.cue = next,
                CueAdvance::Terminal => self.state.terminal = true,
            },
            EventKind::ParamUpdate { path, value } => {
                let value = *value;
                match path {
                    ParamPath::Decay => self.state.troupe.set_decay(value)?,
                    ParamPath::CompensationRate | ParamPath::HighGate | ParamPath::LowGate => {
                        let mut p = self.state.troupe.compensation();
                        match (path, &mut p.gates) {
                            (ParamPath::CompensationRate, _) => p.rate = value,
                            (ParamPath::HighGate, Gates::Enabled { high, .. }) => *high = value,
                            (ParamPath::LowGate, Gates::Enabled { low, .. }) => *low = value,
                            _ => return Err(Error::InvalidEvent("compensation gates are disabled".into())),
                        }
                        self.state.troupe.set_compensation(p)?;
                    }
                    ParamPath::Sensitivity { agent, sequence, state } => {
                        let s = self.script.sequence_index(sequence).expect("checked");
                        let st = states.index_of(state).expect("checked");
                        self.state.troupe.set_sensitivity(*agent, s, st, value)?;
                    }
                    ParamPath::Weight { sequence, term } => {
                        let s = self.script.sequence_index(sequence).expect("checked");
                        let mut cfg = self.state.sequences[s].clone();
                        let w = &mut cfg.weights;
                        *match term {
                            WeightTerm::Coverage => &mut w.coverage,
                            WeightTerm::Balance => &mut w.balance,
                            WeightTerm::Palette => &mut w.palette,
                            WeightTerm::Overlap => &mut w.overlap,
                        } = value;
                        cfg.validate()?;
                        self.state.sequences[s] = cfg;
                    }
                }
            }
            EventKind::Snapshot => {
                self.snapshots.push(self.state.clone());
                return Ok(Some(self.snapshots.len() as u64 - 1));
            }
            EventKind::Restore(id) => self.state = self.snapshots[*id as usize].clone(),
        }
        Ok(None)
    }

    /// Runs one tick over the events due on it:
    /// (1) ingest events, (2) stimulus if a state was recognized this tick,
    /// (3) compensation when `sim_tick % P == 0`, (4) agent steps in id
    /// order, (5) observer refresh when `sim_tick % O == 0`, (6) emit.
    pub fn tick(&mut self, events: &[InputEvent]) -> Result<TickOutput> {
        let mut rejected = Vec::new();
        let mut snapshots = Vec::new();

        self.record(TraceStep::Ingest { events: events.len() });
        for e in events {
            if e.tick != self.session_tick {
                rejected.push((e.clone(), format!("event stamped {} delivered on tick {}", e.tick, self.session_tick)));
                continue;
            }
            match self.apply_event(&e.kind) {
                Ok(Some(id)) => snapshots.push(id),
                Ok(None) => {}
                Err(err) => rejected.push((e.clone(), err.to_string())),
            }
        }

        if self.state.stimulus_pending {
            self.record(TraceStep::Stimulus);
            let env = Environment {
                recognized_state: self.state.recognized.clone(),
                cue: self.state.cue,
                sequence_values: self.current_config().values.clone(),
                observer_report: self.state.observer,
            };
            self.state.troupe = apply_stimulus(&self.state.troupe, &env, self.script.states())?;
            self.state.stimulus_pending = false;
        }

        let sim = self.state.sim_tick;
        if sim.is_multiple_of(self.compensation_period()) {
            self.record(TraceStep::Compensation);
            self.state.troupe = compensation_round(&self.state.troupe, sim, self.config.master_seed);
        }

        let mut accepted_moves = 0;
        let mood_bound = self.state.troupe.mood_bound();
        for id in 0..self.state.troupe.len() {
            self.record(TraceStep::AgentStep { agent: id });
            let cfg = &self.state.sequences[self.state.cue.sequence];
            let agent = &self.state.troupe.agents()[id];
            let out = agent_step(agent, &self.state.scene, cfg, &mut self.state.rngs[id], self.config.base_budget, mood_bound)?;
            if out.accepted.is_some() {
                accepted_moves += 1;
                self.state.scene = out.scene;
            }
        }

        let observer = if sim.is_multiple_of(self.observer_period()) {
            self.record(TraceStep::Observer);
            self.state.observer = observer_report(&self.state.scene, self.current_config());
            Some(self.state.observer)
        } else {
            None
        };

        self.record(TraceStep::Emit);
        let raster = render(&self.state.scene);
        let out = TickOutput {
            session_tick: self.session_tick,
            sim_tick: sim,
            scene: self.state.scene.graph(),
            digest: self.digest_of(&raster),
            raster,
            moods: self.state.troupe.moods(),
            recognized_state: self.state.recognized.clone(),
            cue: self.cue(),
            observer,
            rejected,
            snapshots,
            accepted_moves,
        };
        self.state.sim_tick += 1;
        self.session_tick += 1;
        Ok(out)
    }

    /// SHA-256 over the raster and the whole engine state: moods,
    /// placements, cue, recognized state, last phrase features, every tunable
    /// parameter and each agent stream's position.
    fn digest_of(&self, raster: &Raster) -> String {
        let s = &self.state;
        let mut h = Sha256::new();
        let mut f = |v: f64| h.update(v.to_bits().to_le_bytes());
        for m in s.troupe.moods() {
            f(m);
        }
        for (_, item) in s.scene.items() {
            let p = item.placement;
            for v in [p.x, p.y, p.scale, p.opacity] {
                f(v);
            }
        }
        f(s.troupe.decay());
        let c = s.troupe.compensation();
        f(c.rate);
        if let Gates::Enabled { high, low } = c.gates {
            f(high);
            f(low);
        }
        for a in s.troupe.agents() {
            for ((seq, state), w) in &a.sensitivity {
                f((seq * 1_000_003 + state) as f64);
                f(*w);
            }
        }
        for v in s.last_features.iter().flat_map(|v| v.as_array()) {
            f(*v);
        }
        h.update(s.sim_tick.to_le_bytes());
        h.update(c.period.to_le_bytes());
        h.update(raster.width.to_le_bytes());
        h.update(raster.height.to_le_bytes());
        h.update(&raster.rgba);
        h.update(serde_json::to_vec(&s.sequences).expect("sequence configs serialize"));
        for r in &s.rngs {
            h.update(r.get_word_pos().to_le_bytes());
        }
        h.update((s.cue.sequence as u64).to_le_bytes());
        h.update(s.cue.phrase.to_le_bytes());
        h.update([s.terminal as u8, s.stimulus_pending as u8]);
        h.update(s.recognized.as_deref().unwrap_or("").as_bytes());
        hex::encode(h.finalize())
    }
}
