//! Session log: a header line, then events, periodic digests and an end line,
//! one JSON object per line.
//!
//! ```text
//! {"type":"header","version":1,"config_hash":"…","script_hash":"…","model_hash":"…","master_seed":0,"config":{…}}
//! {"type":"event","tick":12,"kind":"state_override","payload":{"state":"fear"}}
//! {"type":"digest","tick":20,"sim_tick":20,"digest":"…"}
//! {"type":"end","ticks":100,"digest":"…"}
//! ```

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{model_hash, Engine, EngineConfig, InputEvent, TickOutput};
use crate::emotion::EmotionNet;
use crate::error::{Error, Result};
use crate::script::Script;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    pub config_hash: String,
    pub script_hash: String,
    pub model_hash: String,
    pub master_seed: u64,
    pub config: EngineConfig,
}

impl LogHeader {
    pub fn for_engine(engine: &Engine) -> Self {
        Self {
            version: LOG_VERSION,
            config_hash: engine.config().hash(),
            script_hash: engine.script().hash(),
            model_hash: model_hash(engine.model()),
            master_seed: engine.config().master_seed,
            config: engine.config().clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogEntry {
    Event(InputEvent),
    Digest { tick: u64, sim_tick: u64, digest: String },
    End { ticks: u64, digest: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub entries: Vec<LogEntry>,
}

impl SessionLog {
    pub fn new(header: LogHeader) -> Self {
        Self { header, entries: Vec::new() }
    }

    pub fn events(&self) -> impl Iterator<Item = &InputEvent> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Event(ev) => Some(ev),
            _ => None,
        })
    }

    /// `(session tick, digest)` for every digest line.
    pub fn digests(&self) -> Vec<(u64, String)> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                LogEntry::Digest { tick, digest, .. } => Some((*tick, digest.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn end(&self) -> Option<(u64, &str)> {
        self.entries.iter().rev().find_map(|e| match e {
            LogEntry::End { ticks, digest } => Some((*ticks, digest.as_str())),
            _ => None,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.end().is_some()
    }

    /// Appends the digest line for `out` when it falls on a digest point.
    pub fn record_tick(&mut self, out: &TickOutput, interval: u64) {
        if out.session_tick.is_multiple_of(interval) {
            self.entries.push(LogEntry::Digest {
                tick: out.session_tick,
                sim_tick: out.sim_tick,
                digest: out.digest.clone(),
            });
        }
    }

    pub fn finish(&mut self, ticks: u64, digest: String) {
        self.entries.push(LogEntry::End { ticks, digest });
    }

    pub fn to_jsonl(&self) -> String {
        let mut header = serde_json::to_value(&self.header).expect("header serializes");
        header["type"] = "header".into();
        let mut out = header.to_string();
        out.push('\n');
        for e in &self.entries {
            let line = match e {
                LogEntry::Event(ev) => {
                    let mut v = ev.to_json();
                    v["type"] = "event".into();
                    v
                }
                LogEntry::Digest { tick, sim_tick, digest } => {
                    json!({ "type": "digest", "tick": tick, "sim_tick": sim_tick, "digest": digest })
                }
                LogEntry::End { ticks, digest } => json!({ "type": "end", "ticks": ticks, "digest": digest }),
            };
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, msg: String| Error::LogFormat { line: line + 1, msg };
        let (n, first) = lines.next().ok_or_else(|| err(0, "empty log".into()))?;
        let mut v: Value = serde_json::from_str(first).map_err(|e| err(n, e.to_string()))?;
        if v.get("type").and_then(Value::as_str) != Some("header") {
            return Err(err(n, "first line must be the header".into()));
        }
        v.as_object_mut().expect("object").remove("type");
        let header: LogHeader = serde_json::from_value(v).map_err(|e| err(n, e.to_string()))?;
        if header.version != LOG_VERSION {
            return Err(err(n, format!("unsupported log version {}", header.version)));
        }
        let mut log = Self::new(header);
        let mut last_tick = 0;
        for (n, line) in lines {
            if log.is_finished() {
                return Err(err(n, "content after the end line".into()));
            }
            let v: Value = serde_json::from_str(line).map_err(|e| err(n, e.to_string()))?;
            let u64_field = |key: &str| {
                v.get(key).and_then(Value::as_u64).ok_or_else(|| err(n, format!("missing integer {key:?}")))
            };
            let str_field = |key: &str| {
                v.get(key)
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| err(n, format!("missing string {key:?}")))
            };
            let entry = match v.get("type").and_then(Value::as_str) {
                Some("event") => LogEntry::Event(InputEvent::from_json(&v).map_err(|e| err(n, e.to_string()))?),
                Some("digest") => LogEntry::Digest {
                    tick: u64_field("tick")?,
                    sim_tick: u64_field("sim_tick")?,
                    digest: str_field("digest")?,
                },
                Some("end") => LogEntry::End { ticks: u64_field("ticks")?, digest: str_field("digest")? },
                other => return Err(err(n, format!("unknown line type {other:?}"))),
            };
            let tick = match &entry {
                LogEntry::Event(e) => e.tick,
                LogEntry::Digest { tick, .. } => *tick,
                LogEntry::End { ticks, .. } => *ticks,
            };
            if tick < last_tick {
                return Err(err(n, format!("tick {tick} goes back from {last_tick}")));
            }
            last_tick = tick;
            log.entries.push(entry);
        }
        Ok(log)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Refuses unless the artifacts, config and seed match the header.
    pub fn verify_artifacts(&self, script: &Script, model: &EmotionNet, config: &EngineConfig) -> Result<()> {
        let h = &self.header;
        let check = |what: &'static str, expected: &str, actual: String| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::HashMismatch { what, expected: expected.to_string(), actual })
            }
        };
        check("script", &h.script_hash, script.hash())?;
        check("model", &h.model_hash, model_hash(model))?;
        check("config", &h.config_hash, config.hash())?;
        check("master seed", &h.master_seed.to_string(), config.master_seed.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayReport {
    Identical { digests: usize },
    Diverged { tick: u64, expected: String, actual: String },
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identical { .. } => write!(f, "identical"),
            Self::Diverged { tick, expected, actual } => {
                write!(f, "diverged at tick {tick}: expected {expected}, got {actual}")
            }
        }
    }
}

/// Drives a fresh engine through the events of a log, one tick at a time.
pub(crate) fn drive<F>(engine: &mut Engine, events: &[InputEvent], ticks: u64, mut on_tick: F) -> Result<()>
where
    F: FnMut(&TickOutput, &[InputEvent]) -> Result<bool>,
{
    let mut rest = events;
    for t in 0..ticks {
        if let Some(e) = rest.first().filter(|e| e.tick < t) {
            return Err(Error::InvalidEvent(format!("event stamped {} is out of order", e.tick)));
        }
        let due = rest.iter().take_while(|e| e.tick == t).count();
        let (now, later) = rest.split_at(due);
        rest = later;
        let out = engine.tick(now)?;
        if !on_tick(&out, now)? {
            break;
        }
    }
    Ok(())
}

/// Re-executes `log` and compares every recorded digest. `config` defaults
/// to the one stored in the header.
pub fn replay(
    log: &SessionLog,
    script: Arc<Script>,
    model: Arc<EmotionNet>,
    config: Option<&EngineConfig>,
) -> Result<ReplayReport> {
    let config = config.unwrap_or(&log.header.config).clone();
    log.verify_artifacts(&script, &model, &config)?;
    let (ticks, end_digest) = log
        .end()
        .ok_or_else(|| Error::LogFormat { line: log.entries.len() + 1, msg: "missing end line".into() })?;
    let events: Vec<InputEvent> = log.events().cloned().collect();
    if let Some(late) = events.iter().find(|e| e.tick >= ticks) {
        return Err(Error::InvalidEvent(format!("event at tick {} after the end ({ticks})", late.tick)));
    }
    let expected = log.digests();
    let mut engine = Engine::new(script, model, config)?;
    let mut next = expected.iter().peekable();
    let mut checked = 0;
    let mut report = None;
    let mut last = String::new();
    drive(&mut engine, &events, ticks, |out, _| {
        while let Some((tick, digest)) = next.peek() {
            if *tick > out.session_tick {
                break;
            }
            if *tick == out.session_tick && *digest == out.digest {
                checked += 1;
                next.next();
                continue;
            }
            report = Some(ReplayReport::Diverged {
                tick: *tick,
                expected: digest.clone(),
                actual: if *tick == out.session_tick { out.digest.clone() } else { "no digest".into() },
            });
            return Ok(false);
        }
        last = out.digest.clone();
        Ok(true)
    })?;
    if let Some(r) = report {
        return Ok(r);
    }
    if let Some((tick, digest)) = next.next() {
        return Ok(ReplayReport::Diverged { tick: *tick, expected: digest.clone(), actual: "no digest".into() });
    }
    if last != end_digest {
        return Ok(ReplayReport::Diverged {
            tick: ticks.saturating_sub(1),
            expected: end_digest.to_string(),
            actual: last,
        });
    }
    Ok(ReplayReport::Identical { digests: checked + 1 })
}
