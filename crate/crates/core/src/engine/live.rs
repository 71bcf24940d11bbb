//! Transport-independent live session: validates inbound wire messages,
//! queues them for the next tick, records the session log and produces the
//! outbound message stream.

use std::sync::Arc;

use serde_json::{json, Value};

use super::{Engine, EngineConfig, EventKind, InputEvent, LogEntry, LogHeader, SessionLog, TickOutput};
use crate::emotion::EmotionNet;
use crate::error::Result;
use crate::script::Script;

/// Longest inbound message accepted, in bytes.
pub const MAX_MESSAGE_BYTES: usize = 64 * 1024;

/// One outbound message.
#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    /// `{tick, kind, payload}`.
    Message { tick: u64, kind: &'static str, payload: Value },
    /// `{error, tick}`.
    Error { tick: u64, error: String },
}

impl Outbound {
    fn msg(tick: u64, kind: &'static str, payload: Value) -> Self {
        Self::Message { tick, kind, payload }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Self::Message { tick, kind, payload } => json!({ "tick": tick, "kind": kind, "payload": payload }),
            Self::Error { tick, error } => json!({ "error": error, "tick": tick }),
        }
    }

    pub fn to_text(&self) -> String {
        self.to_json().to_string()
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Message { kind, .. } => kind,
            Self::Error { .. } => "error",
        }
    }
}

pub struct LiveSession {
    engine: Engine,
    log: SessionLog,
    pending: Vec<InputEvent>,
    reserved_snapshots: u64,
    last_digest: String,
}

impl LiveSession {
    pub fn new(script: Arc<Script>, model: Arc<EmotionNet>, config: EngineConfig) -> Result<Self> {
        let engine = Engine::new(script, model, config)?;
        let log = SessionLog::new(LogHeader::for_engine(&engine));
        Ok(Self { engine, log, pending: Vec::new(), reserved_snapshots: 0, last_digest: String::new() })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    /// The session tick the next accepted message will be stamped with.
    pub fn next_tick(&self) -> u64 {
        self.engine.session_tick()
    }

    /// Validates one inbound message. A valid event is queued for the next
    /// tick, logged, and acknowledged; anything else yields an error and
    /// leaves the session untouched. The client's `tick` field is ignored:
    /// events are stamped at ingress.
    pub fn ingest(&mut self, text: &str) -> std::result::Result<Outbound, Outbound> {
        let tick = self.next_tick();
        let reject = |error: String| Outbound::Error { tick, error };
        if text.len() > MAX_MESSAGE_BYTES {
            return Err(reject(format!("message longer than {MAX_MESSAGE_BYTES} bytes")));
        }
        let value: Value = serde_json::from_str(text).map_err(|e| reject(format!("malformed JSON: {e}")))?;
        let event = InputEvent::from_json(&value).map_err(|e| reject(e.to_string()))?;
        match &event.kind {
            EventKind::Restore(id) if *id >= self.reserved_snapshots => {
                return Err(reject(format!("unknown snapshot id {id}")));
            }
            EventKind::Restore(_) => {}
            kind => self.engine.check_event(kind).map_err(|e| reject(e.to_string()))?,
        }
        let mut ack = json!({ "kind": event.kind.name() });
        if matches!(event.kind, EventKind::Snapshot) {
            ack["snapshot"] = self.reserved_snapshots.into();
            self.reserved_snapshots += 1;
        }
        let event = InputEvent::new(tick, event.kind);
        self.log.entries.push(LogEntry::Event(event.clone()));
        self.pending.push(event);
        Ok(Outbound::msg(tick, "ack", ack))
    }

    /// Runs one tick over everything queued since the last one.
    pub fn step(&mut self) -> Result<Vec<Outbound>> {
        let due = std::mem::take(&mut self.pending);
        let out = self.engine.tick(&due)?;
        self.log.record_tick(&out, self.engine.config().digest_interval);
        self.last_digest = out.digest.clone();
        Ok(tick_messages(&out, self.engine.troupe().mood_bound()))
    }

    /// Messages describing the current state, for a newly attached client.
    pub fn hello(&self) -> Vec<Outbound> {
        let e = &self.engine;
        let script = e.script();
        let tick = self.next_tick();
        vec![
            Outbound::msg(
                tick,
                "hello",
                json!({
                    "title": script.title(),
                    "states": script.states().iter().collect::<Vec<_>>(),
                    "sequences": (0..script.sequence_count()).map(|i| script.sequence(i).id.clone()).collect::<Vec<_>>(),
                    "agents": e.troupe().len(),
                    "mood_bound": e.troupe().mood_bound(),
                    "tick_rate": e.config().tick_rate,
                    "snapshots": self.reserved_snapshots,
                }),
            ),
            Outbound::msg(tick, "scene", json!({ "sim_tick": e.sim_tick(), "graph": e.scene().graph() })),
            Outbound::msg(tick, "moods", json!({ "moods": e.troupe().moods(), "mood_bound": e.troupe().mood_bound() })),
            Outbound::msg(tick, "cue", serde_json::to_value(e.cue()).expect("cue serializes")),
            Outbound::msg(tick, "observer", serde_json::to_value(e.observer()).expect("report serializes")),
        ]
    }

    /// The log closed with an end line at the current tick. The session
    /// keeps running; a later call closes it further along.
    pub fn finish(&self) -> SessionLog {
        let mut log = self.log.clone();
        log.finish(self.next_tick(), self.last_digest.clone());
        log
    }
}

fn tick_messages(out: &TickOutput, mood_bound: f64) -> Vec<Outbound> {
    let t = out.session_tick;
    let mut msgs: Vec<Outbound> = out
        .rejected
        .iter()
        .map(|(e, why)| Outbound::Error { tick: t, error: format!("{} rejected: {why}", e.kind.name()) })
        .collect();
    msgs.push(Outbound::msg(
        t,
        "scene",
        json!({ "sim_tick": out.sim_tick, "digest": out.digest, "graph": out.scene }),
    ));
    msgs.push(Outbound::msg(
        t,
        "moods",
        json!({ "moods": out.moods, "mood_bound": mood_bound, "recognized_state": out.recognized_state }),
    ));
    msgs.push(Outbound::msg(t, "cue", serde_json::to_value(&out.cue).expect("cue serializes")));
    if let Some(q) = out.observer {
        msgs.push(Outbound::msg(t, "observer", serde_json::to_value(q).expect("report serializes")));
    }
    msgs
}
