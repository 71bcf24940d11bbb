//! Versioned plain-text model format:
//!
//! ```text
//! emotion-net 1
//! states neutral fear grief anger tenderness exaltation
//! layout 12 16 6
//! activation tanh softmax
//! seed 42
//! w1 <hidden*12 values, row-major>
//! b1 <hidden values>
//! w2 <states*hidden values, row-major>
//! b2 <states values>
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a save/load
//! cycle is bit-exact.

use super::{EmotionNet, EmotionStateList};
use crate::error::{Error, Result};
use crate::features::FEATURE_LEN;

const MAGIC: &str = "emotion-net";
const VERSION: u32 = 1;

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

pub(super) fn write(net: &EmotionNet) -> String {
    let states: Vec<&str> = net.states.iter().collect();
    format!(
        "{MAGIC} {VERSION}\nstates {}\nlayout {FEATURE_LEN} {} {}\nactivation tanh softmax\nseed {}\nw1 {}\nb1 {}\nw2 {}\nb2 {}\n",
        states.join(" "),
        net.hidden,
        net.states.len(),
        net.seed,
        join(&net.w1),
        join(&net.b1),
        join(&net.w2),
        join(&net.b2),
    )
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::ModelFormat { line: self.line, msg: msg.into() }
    }

    /// Next line starting with `key`, returning the remaining words.
    fn field(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let (i, text) = self.inner.next().ok_or_else(|| Error::ModelFormat {
            line: self.line + 1,
            msg: format!("missing `{key}` line"),
        })?;
        self.line = i + 1;
        let mut words = text.split_whitespace();
        match words.next() {
            Some(k) if k == key => Ok(words.collect()),
            other => Err(self.err(format!("expected `{key}`, found {other:?}"))),
        }
    }

    fn values(&mut self, key: &str, count: usize) -> Result<Vec<f64>> {
        let words = self.field(key)?;
        if words.len() != count {
            return Err(self.err(format!("`{key}` needs {count} values, found {}", words.len())));
        }
        words
            .iter()
            .map(|w| match w.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(self.err(format!("bad value {w:?} in `{key}`"))),
            })
            .collect()
    }

    fn integer<T: std::str::FromStr>(&self, word: Option<&&str>) -> Result<T> {
        word.and_then(|w| w.parse().ok())
            .ok_or_else(|| self.err("expected an integer"))
    }
}

pub(super) fn read(text: &str) -> Result<EmotionNet> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    let header = lines.field(MAGIC)?;
    let version: u32 = lines.integer(header.first())?;
    if version != VERSION {
        return Err(lines.err(format!("unsupported version {version}")));
    }
    let states = EmotionStateList::new(lines.field("states")?.into_iter().map(str::to_string))
        .map_err(|e| lines.err(e.to_string()))?;
    let layout = lines.field("layout")?;
    if layout.len() != 3 {
        return Err(lines.err("layout needs three widths"));
    }
    let input: usize = lines.integer(layout.first())?;
    let hidden: usize = lines.integer(layout.get(1))?;
    let output: usize = lines.integer(layout.get(2))?;
    if input != FEATURE_LEN || output != states.len() || hidden == 0 {
        return Err(lines.err(format!(
            "layout {input} {hidden} {output} does not match 12 inputs and {} states",
            states.len()
        )));
    }
    if lines.field("activation")? != ["tanh", "softmax"] {
        return Err(lines.err("only `tanh softmax` is supported"));
    }
    let seed_words = lines.field("seed")?;
    let seed: u64 = lines.integer(seed_words.first())?;
    let w1 = lines.values("w1", hidden * FEATURE_LEN)?;
    let b1 = lines.values("b1", hidden)?;
    let w2 = lines.values("w2", output * hidden)?;
    let b2 = lines.values("b2", output)?;
    Ok(EmotionNet { states, hidden, seed, w1, b1, w2, b2 })
}
