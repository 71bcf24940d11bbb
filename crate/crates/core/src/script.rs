//! The play's structure: emotional states, the canvas and fragments, the
//! troupe declaration, and ordered sequences each carrying a utility config
//! and a sensitivity table. Loaded from a single JSON document:
//!
//! ```json
//! {
//!   "version": 1,
//!   "title": "…",
//!   "states": ["neutral", "fear", …],
//!   "canvas": { "width": 256, "height": 144, "background": [0.05, 0.05, 0.08] },
//!   "fragments": [
//!     { "id": "ember", "width": 48, "height": 32, "source": { "solid": { "rgba": [0.9, 0.3, 0.1, 1.0] } } },
//!     { "id": "tide", "width": 64, "height": 24,
//!       "source": { "gradient": { "from": [0,0,1,1], "to": [0,1,1,0.5], "vertical": false } } },
//!     { "id": "photo", "source": { "png": { "path": "photo.png" } } }
//!   ],
//!   "troupe": {
//!     "mood_bound": 10.0, "decay": 0.9,
//!     "compensation": { "period": 8, "rate": 0.5, "gates": { "mode": "enabled", "high": 5.0, "low": -5.0 } },
//!     "agents": [ { "id": 0, "fragment": "ember", "placement": { "x": 10, "y": 10, "scale": 1, "opacity": 1 } } ]
//!   },
//!   "sequences": [
//!     { "id": "arrest", "expected_phrases": 4,
//!       "utility": { "weights": { "coverage": 1, "balance": 0.5, "palette": 0, "overlap": 0.5 },
//!                    "target_centroid": [0.5, 0.5], "target_palette": [], "values": { "tension": 0.7 } },
//!       "sensitivity": [ { "agent": 0, "state": "fear", "weight": 2.0 } ] }
//!   ]
//! }
//! ```
//!
//! PNG paths resolve relative to the script file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canvas::{Fragment, Placement, Scene, SequenceConfig};
use crate::emotion::EmotionStateList;
use crate::error::{Error, Result};
use crate::troupe::{Agent, CompensationParams, Troupe};

pub const SCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasDecl {
    pub width: u32,
    pub height: u32,
    pub background: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FragmentSource {
    Solid { rgba: [f64; 4] },
    Gradient { from: [f64; 4], to: [f64; 4], vertical: bool },
    Png { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentDecl {
    pub id: String,
    /// Required for procedural fills; PNGs use their own size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    pub source: FragmentSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDecl {
    pub id: usize,
    pub fragment: String,
    pub placement: Placement,
    #[serde(default)]
    pub mood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TroupeDecl {
    pub mood_bound: f64,
    pub decay: f64,
    pub compensation: CompensationParams,
    pub agents: Vec<AgentDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub agent: usize,
    pub state: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDecl {
    pub id: String,
    pub utility: SequenceConfig,
    #[serde(default)]
    pub sensitivity: Vec<SensitivityRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_phrases: Option<u32>,
}

/// The on-disk document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptDoc {
    pub version: u32,
    pub title: String,
    pub states: Vec<String>,
    pub canvas: CanvasDecl,
    pub fragments: Vec<FragmentDecl>,
    pub troupe: TroupeDecl,
    pub sequences: Vec<SequenceDecl>,
}

/// A validated script with every reference resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    doc: ScriptDoc,
    states: EmotionStateList,
    fragments: BTreeMap<String, Arc<Fragment>>,
}

impl Script {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses and validates `text`; PNG fragments resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let doc: ScriptDoc = serde_json::from_str(text).map_err(|e| Error::ScriptParse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        Self::from_doc(doc, base_dir)
    }

    pub fn from_doc(doc: ScriptDoc, base_dir: &Path) -> Result<Self> {
        let invalid = |msg: String| Error::InvalidScript(msg);
        if doc.version != SCRIPT_VERSION {
            return Err(invalid(format!("unsupported version {}", doc.version)));
        }
        let states = EmotionStateList::new(doc.states.clone())?;
        if doc.sequences.is_empty() {
            return Err(Error::NoSequences);
        }
        Scene::new(doc.canvas.width, doc.canvas.height, doc.canvas.background)?;

        let mut fragments = BTreeMap::new();
        for decl in &doc.fragments {
            if fragments.contains_key(&decl.id) {
                return Err(invalid(format!("duplicate fragment id {:?}", decl.id)));
            }
            fragments.insert(decl.id.clone(), Arc::new(build_fragment(decl, base_dir)?));
        }

        let agent_count = doc.troupe.agents.len();
        for (i, a) in doc.troupe.agents.iter().enumerate() {
            if a.id != i {
                return Err(invalid(format!("agent ids must be 0..{agent_count} in order; found {} at position {i}", a.id)));
            }
            if !fragments.contains_key(&a.fragment) {
                return Err(invalid(format!("agent {} references undeclared fragment {:?}", a.id, a.fragment)));
            }
            a.placement.validate()?;
        }

        let mut seen = BTreeSet::new();
        for seq in &doc.sequences {
            if !seen.insert(seq.id.as_str()) {
                return Err(invalid(format!("duplicate sequence id {:?}", seq.id)));
            }
            seq.utility
                .validate()
                .map_err(|e| invalid(format!("sequence {:?}: {e}", seq.id)))?;
            for row in &seq.sensitivity {
                if states.index_of(&row.state).is_none() {
                    return Err(invalid(format!(
                        "sequence {:?} references undeclared state {:?}",
                        seq.id, row.state
                    )));
                }
                if row.agent >= agent_count {
                    return Err(invalid(format!(
                        "sequence {:?} references undeclared agent {}",
                        seq.id, row.agent
                    )));
                }
                if !row.weight.is_finite() {
                    return Err(invalid(format!("sequence {:?} has a non-finite sensitivity", seq.id)));
                }
            }
        }

        let script = Self { doc, states, fragments };
        script.build_troupe()?;
        Ok(script)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("script documents serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn doc(&self) -> &ScriptDoc {
        &self.doc
    }

    pub fn title(&self) -> &str {
        &self.doc.title
    }

    pub fn states(&self) -> &EmotionStateList {
        &self.states
    }

    pub fn sequence_count(&self) -> usize {
        self.doc.sequences.len()
    }

    pub fn sequence(&self, index: usize) -> &SequenceDecl {
        &self.doc.sequences[index]
    }

    pub fn sequence_index(&self, id: &str) -> Option<usize> {
        self.doc.sequences.iter().position(|s| s.id == id)
    }

    pub fn agent_count(&self) -> usize {
        self.doc.troupe.agents.len()
    }

    pub fn fragment(&self, id: &str) -> Option<&Arc<Fragment>> {
        self.fragments.get(id)
    }

    pub fn build_troupe(&self) -> Result<Troupe> {
        let mut agents: Vec<Agent> = self
            .doc
            .troupe
            .agents
            .iter()
            .map(|a| Agent {
                id: a.id,
                mood: a.mood,
                fragment: a.fragment.clone(),
                sensitivity: BTreeMap::new(),
            })
            .collect();
        for (s, seq) in self.doc.sequences.iter().enumerate() {
            for row in &seq.sensitivity {
                let state = self.states.index_of(&row.state).expect("validated at load");
                agents[row.agent].sensitivity.insert((s, state), row.weight);
            }
        }
        let t = &self.doc.troupe;
        Troupe::new(agents, t.mood_bound, t.decay, t.compensation)
    }

    pub fn build_scene(&self) -> Result<Scene> {
        let c = &self.doc.canvas;
        let mut scene = Scene::new(c.width, c.height, c.background)?;
        for a in &self.doc.troupe.agents {
            scene.insert(a.id, self.fragments[&a.fragment].clone(), a.placement)?;
        }
        Ok(scene)
    }

    /// SHA-256 over the canonical document and every fragment's pixels.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_string(&self.doc).expect("script documents serialize"));
        for (id, f) in &self.fragments {
            h.update(id.as_bytes());
            h.update(f.width().to_le_bytes());
            h.update(f.height().to_le_bytes());
            for y in 0..f.height() {
                for x in 0..f.width() {
                    for c in f.pixel(x, y) {
                        h.update(c.to_bits().to_le_bytes());
                    }
                }
            }
        }
        hex::encode(h.finalize())
    }
}

fn build_fragment(decl: &FragmentDecl, base_dir: &Path) -> Result<Fragment> {
    let size = || -> Result<(u32, u32)> {
        match (decl.width, decl.height) {
            (Some(w), Some(h)) => Ok((w, h)),
            _ => Err(Error::InvalidFragment {
                id: decl.id.clone(),
                msg: "procedural fragments need width and height".into(),
            }),
        }
    };
    match &decl.source {
        FragmentSource::Solid { rgba } => {
            let (w, h) = size()?;
            Fragment::solid(&decl.id, w, h, *rgba)
        }
        FragmentSource::Gradient { from, to, vertical } => {
            let (w, h) = size()?;
            Fragment::gradient(&decl.id, w, h, *from, *to, *vertical)
        }
        FragmentSource::Png { path } => Fragment::from_png(&decl.id, base_dir.join(path)),
    }
}

/// Position in the play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CueState {
    pub sequence: usize,
    /// Phrases heard since the current sequence began.
    pub phrase: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CueAdvance {
    Moved(CueState),
    /// Already at the last sequence; the cue stays put.
    Terminal,
}

pub fn advance_cue(cue: CueState, script: &Script) -> CueAdvance {
    if cue.sequence + 1 < script.sequence_count() {
        CueAdvance::Moved(CueState { sequence: cue.sequence + 1, phrase: 0 })
    } else {
        CueAdvance::Terminal
    }
}
