//! Deterministic affective stage engine.
//!
//! Phrase-level voice features feed an emotion classifier whose recognized
//! state drives the moods of a troupe of image-composing agents. The agents
//! greedily improve a per-sequence utility of the composed canvas, exchange
//! mood pairwise at a fixed period, and read global image qualities from an
//! observer. Every run is event-sourced and replays bit-exactly.

pub mod audio;
pub mod canvas;
pub mod emotion;
pub mod engine;
pub mod error;
pub mod features;
pub mod rng;
pub mod script;
pub mod synth;
pub mod troupe;

pub use error::{Error, Result};
