use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::features::{FeatureVector12, FEATURE_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightTerm {
    Coverage,
    Balance,
    Palette,
    Overlap,
}

impl WeightTerm {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "coverage" => Self::Coverage,
            "balance" => Self::Balance,
            "palette" => Self::Palette,
            "overlap" => Self::Overlap,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Self::Coverage => "coverage",
            Self::Balance => "balance",
            Self::Palette => "palette",
            Self::Overlap => "overlap",
        }
    }
}

/// Tunable engine parameter addressed by a dotted path.
///
/// * `troupe.decay`
/// * `troupe.compensation.rate`, `.high_gate`, `.low_gate`
/// * `agents.<id>.sensitivity.<sequence>.<state>`
/// * `sequences.<sequence>.weights.<coverage|balance|palette|overlap>`
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamPath {
    Decay,
    CompensationRate,
    HighGate,
    LowGate,
    Sensitivity { agent: usize, sequence: String, state: String },
    Weight { sequence: String, term: WeightTerm },
}

impl ParamPath {
    pub fn parse(path: &str) -> Result<Self> {
        let parts: Vec<&str> = path.split('.').collect();
        let bad = || Error::InvalidEvent(format!("unknown parameter path {path:?}"));
        Ok(match parts.as_slice() {
            ["troupe", "decay"] => Self::Decay,
            ["troupe", "compensation", "rate"] => Self::CompensationRate,
            ["troupe", "compensation", "high_gate"] => Self::HighGate,
            ["troupe", "compensation", "low_gate"] => Self::LowGate,
            ["agents", id, "sensitivity", seq, state] => Self::Sensitivity {
                agent: id.parse().map_err(|_| bad())?,
                sequence: seq.to_string(),
                state: state.to_string(),
            },
            ["sequences", seq, "weights", term] => Self::Weight {
                sequence: seq.to_string(),
                term: WeightTerm::parse(term).ok_or_else(bad)?,
            },
            _ => return Err(bad()),
        })
    }
}

impl std::fmt::Display for ParamPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Decay => write!(f, "troupe.decay"),
            Self::CompensationRate => write!(f, "troupe.compensation.rate"),
            Self::HighGate => write!(f, "troupe.compensation.high_gate"),
            Self::LowGate => write!(f, "troupe.compensation.low_gate"),
            Self::Sensitivity { agent, sequence, state } => {
                write!(f, "agents.{agent}.sensitivity.{sequence}.{state}")
            }
            Self::Weight { sequence, term } => write!(f, "sequences.{sequence}.weights.{}", term.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    PhraseFeatures(FeatureVector12),
    StateOverride(String),
    CueAdvance,
    ParamUpdate { path: ParamPath, value: f64 },
    /// Ids are assigned in processing order starting at 0.
    Snapshot,
    Restore(u64),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PhraseFeatures(_) => "phrase_features",
            Self::StateOverride(_) => "state_override",
            Self::CueAdvance => "cue_advance",
            Self::ParamUpdate { .. } => "param_update",
            Self::Snapshot => "snapshot",
            Self::Restore(_) => "restore",
        }
    }

    pub fn payload(&self) -> Value {
        match self {
            Self::PhraseFeatures(v) => json!({ "features": v.as_array() }),
            Self::StateOverride(s) => json!({ "state": s }),
            Self::CueAdvance | Self::Snapshot => json!({}),
            Self::ParamUpdate { path, value } => json!({ "path": path.to_string(), "value": value }),
            Self::Restore(id) => json!({ "id": id }),
        }
    }

    /// Structural parse of a `kind` plus `payload`; names are resolved later
    /// against the script.
    pub fn from_parts(kind: &str, payload: &Value) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidEvent(format!("{kind}: {msg}"));
        let empty = Map::new();
        let obj = match payload {
            Value::Object(m) => m,
            Value::Null => &empty,
            _ => return Err(bad("payload must be an object")),
        };
        Ok(match kind {
            "phrase_features" => {
                let arr = obj
                    .get("features")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("expected \"features\": [12 numbers]"))?;
                if arr.len() != FEATURE_LEN {
                    return Err(bad(&format!("expected {FEATURE_LEN} features, got {}", arr.len())));
                }
                let mut v = [0.0; FEATURE_LEN];
                for (slot, x) in v.iter_mut().zip(arr) {
                    *slot = x.as_f64().ok_or_else(|| bad("features must be numbers"))?;
                }
                Self::PhraseFeatures(FeatureVector12::new(v).map_err(|e| bad(&e.to_string()))?)
            }
            "state_override" => {
                let s = obj.get("state").and_then(Value::as_str).ok_or_else(|| bad("expected \"state\": string"))?;
                Self::StateOverride(s.to_string())
            }
            "cue_advance" => Self::CueAdvance,
            "param_update" => {
                let path = obj.get("path").and_then(Value::as_str).ok_or_else(|| bad("expected \"path\": string"))?;
                let value = obj.get("value").and_then(Value::as_f64).ok_or_else(|| bad("expected \"value\": number"))?;
                if !value.is_finite() {
                    return Err(bad("value must be finite"));
                }
                Self::ParamUpdate { path: ParamPath::parse(path)?, value }
            }
            "snapshot" => Self::Snapshot,
            "restore" => {
                let id = obj.get("id").and_then(Value::as_u64).ok_or_else(|| bad("expected \"id\": integer"))?;
                Self::Restore(id)
            }
            other => return Err(Error::InvalidEvent(format!("unknown kind {other:?}"))),
        })
    }
}

/// One input, stamped with the session tick it is due on.
#[derive(Debug, Clone, PartialEq)]
pub struct InputEvent {
    pub tick: u64,
    pub kind: EventKind,
}

impl InputEvent {
    pub fn new(tick: u64, kind: EventKind) -> Self {
        Self { tick, kind }
    }

    /// Wire form `{tick, kind, payload}`.
    pub fn to_json(&self) -> Value {
        json!({ "tick": self.tick, "kind": self.kind.name(), "payload": self.kind.payload() })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::InvalidEvent("message must be a JSON object".into()))?;
        let tick = match obj.get("tick") {
            None | Some(Value::Null) => 0,
            Some(t) => t.as_u64().ok_or_else(|| Error::InvalidEvent("tick must be a non-negative integer".into()))?,
        };
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidEvent("missing \"kind\"".into()))?;
        let payload = obj.get("payload").unwrap_or(&Value::Null);
        Ok(Self { tick, kind: EventKind::from_parts(kind, payload)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_round_trip() {
        for p in [
            "troupe.decay",
            "troupe.compensation.rate",
            "troupe.compensation.high_gate",
            "troupe.compensation.low_gate",
            "agents.3.sensitivity.arrest.fear",
            "sequences.arrest.weights.overlap",
        ] {
            assert_eq!(ParamPath::parse(p).unwrap().to_string(), p);
        }
        for p in ["troupe", "agents.x.sensitivity.a.b", "sequences.a.weights.color", ""] {
            assert!(ParamPath::parse(p).is_err(), "{p}");
        }
    }

    #[test]
    fn events_round_trip() {
        let v = FeatureVector12::new([0.25; FEATURE_LEN]).unwrap();
        let events = [
            EventKind::PhraseFeatures(v),
            EventKind::StateOverride("fear".into()),
            EventKind::CueAdvance,
            EventKind::ParamUpdate { path: ParamPath::Decay, value: 0.5 },
            EventKind::Snapshot,
            EventKind::Restore(2),
        ];
        for (i, kind) in events.into_iter().enumerate() {
            let e = InputEvent::new(i as u64, kind);
            assert_eq!(InputEvent::from_json(&e.to_json()).unwrap(), e);
        }
    }

    #[test]
    fn rejects_unknown_kind_and_bad_payloads() {
        let err = InputEvent::from_json(&json!({"tick": 1, "kind": "dance"})).unwrap_err();
        assert!(err.to_string().contains("unknown kind"));
        assert!(InputEvent::from_json(&json!({"kind": "phrase_features", "payload": {"features": [0.5]}})).is_err());
        assert!(InputEvent::from_json(&json!({"kind": "phrase_features", "payload": {"features": vec![2.0; 12]}})).is_err());
        assert!(InputEvent::from_json(&json!({"kind": "restore", "payload": {"id": -1}})).is_err());
        assert!(InputEvent::from_json(&json!([1, 2])).is_err());
    }
}
