//! Command-line front end: feature extraction, training, offline runs,
//! the live control server, replay verification and script validation.

pub mod cli;
pub mod fixtures;
pub mod server;

pub use cli::{run, Cli};
