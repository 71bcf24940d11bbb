use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::log::drive;
use super::{Engine, EngineConfig, EventKind, InputEvent, LogEntry, LogHeader, SessionLog};
use crate::audio::AudioClip;
use crate::canvas::Raster;
use crate::emotion::EmotionNet;
use crate::error::{Error, Result};
use crate::features::{phrase_vector, segment_phrases, FeatureConfig};
use crate::script::Script;

pub enum OfflineInput<'a> {
    /// Segmented into phrases; each phrase becomes one event on the tick
    /// its end falls in.
    Audio(&'a AudioClip, &'a FeatureConfig),
    /// Events are re-executed as recorded; the run lasts as long as the log
    /// says, or until the last event when it has no end line.
    Log(&'a SessionLog),
}

pub struct OfflineRun {
    pub log: SessionLog,
    pub final_raster: Raster,
    /// PNG frames written at digest points, in order.
    pub frames: Vec<PathBuf>,
    pub phrase_events: usize,
}

/// Phrase events for a clip, stamped by their end time.
pub fn phrase_events(clip: &AudioClip, features: &FeatureConfig, config: &EngineConfig) -> Result<Vec<InputEvent>> {
    let sr = clip.sample_rate() as f64;
    segment_phrases(clip, &features.segmentation)?
        .iter()
        .map(|span| {
            let v = phrase_vector(clip, span, features)?;
            Ok(InputEvent::new(config.tick_at(span.end as f64 / sr), EventKind::PhraseFeatures(v)))
        })
        .collect()
}

/// Runs a session without a live transport. With `frames_dir`, a PNG named
/// `frame_<tick>.png` is written at each digest point plus `final.png`.
pub fn run_offline(
    input: OfflineInput<'_>,
    script: Arc<Script>,
    model: Arc<EmotionNet>,
    config: EngineConfig,
    frames_dir: Option<&Path>,
) -> Result<OfflineRun> {
    let (events, ticks) = match input {
        OfflineInput::Audio(clip, features) => {
            let events = phrase_events(clip, features, &config)?;
            let last = events.last().map_or(0, |e| e.tick + 1);
            let ticks = config.tick_at(clip.duration_secs()).max(last).max(1);
            (events, ticks)
        }
        OfflineInput::Log(log) => {
            let events: Vec<InputEvent> = log.events().cloned().collect();
            let ticks = match log.end() {
                Some((t, _)) => t,
                None => events.last().map_or(0, |e| e.tick + 1),
            };
            (events, ticks.max(1))
        }
    };
    if let Some(dir) = frames_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut engine = Engine::new(script, model, config)?;
    let interval = engine.config().digest_interval;
    let mut log = SessionLog::new(LogHeader::for_engine(&engine));
    let mut frames = Vec::new();
    let mut last = None;
    drive(&mut engine, &events, ticks, |out, due| {
        log.entries.extend(due.iter().cloned().map(LogEntry::Event));
        log.record_tick(out, interval);
        if let (Some(dir), true) = (frames_dir, out.session_tick % interval == 0) {
            let path = dir.join(format!("frame_{:06}.png", out.session_tick));
            out.raster.write_png(&path)?;
            frames.push(path);
        }
        last = Some((out.raster.clone(), out.digest.clone()));
        Ok(true)
    })?;
    let (final_raster, digest) = last.expect("at least one tick runs");
    if let Some(dir) = frames_dir {
        final_raster.write_png(dir.join("final.png"))?;
    }
    log.finish(ticks, digest);
    let phrase_events = events.iter().filter(|e| matches!(e.kind, EventKind::PhraseFeatures(_))).count();
    Ok(OfflineRun { log, final_raster, frames, phrase_events })
}
