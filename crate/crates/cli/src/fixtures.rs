//! Regenerates the bundled synthetic material.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use stage_core::audio::AudioClip;
use stage_core::emotion::{labeled_rows, train, EmotionNet, EmotionStateList, Hyperparameters, TrainingSet};
use stage_core::features::{extract_rows, write_feature_csv, FeatureConfig, FeatureRow};
use stage_core::synth::{corpus, demo_performance, CORPUS_SAMPLE_RATE};

pub const DEMO_HIDDEN: usize = 16;
pub const DEMO_SEED: u64 = 7;

pub fn demo_model(rows: &[FeatureRow]) -> Result<EmotionNet> {
    let states = EmotionStateList::default_list();
    let data = TrainingSet {
        rows: labeled_rows(rows, &states)?,
        hyper: Hyperparameters { seed: DEMO_SEED, ..Default::default() },
    };
    let net = EmotionNet::init(states, DEMO_HIDDEN, DEMO_SEED)?;
    let (net, report) = train(&net, &data)?;
    log::info!("demo model training accuracy {:.3}", report.accuracy);
    Ok(net)
}

/// Writes `corpus/*.wav`, `corpus/features.csv`, `demo.wav` and
/// `demo_model.txt` under `dir`.
pub fn write_fixtures(dir: &Path) -> Result<Vec<PathBuf>> {
    let corpus_dir = dir.join("corpus");
    std::fs::create_dir_all(&corpus_dir).with_context(|| format!("creating {}", corpus_dir.display()))?;
    let states = EmotionStateList::default_list();
    let cfg = FeatureConfig::default();
    let mut written = Vec::new();
    let mut all_rows = Vec::new();
    for c in corpus() {
        let path = corpus_dir.join(format!("{}.wav", c.name));
        AudioClip::new(c.samples, CORPUS_SAMPLE_RATE)?.write_wav(&path)?;
        let clip = AudioClip::read_wav(&path)?;
        all_rows.extend(extract_rows(&c.name, &clip, &cfg, Some(states.name(c.label)))?);
        written.push(path);
    }
    let csv = corpus_dir.join("features.csv");
    write_feature_csv(std::fs::File::create(&csv)?, &all_rows)?;
    written.push(csv);

    let demo = dir.join("demo.wav");
    AudioClip::new(demo_performance(CORPUS_SAMPLE_RATE), CORPUS_SAMPLE_RATE)?.write_wav(&demo)?;
    written.push(demo);

    let model = dir.join("demo_model.txt");
    demo_model(&all_rows)?.save(&model)?;
    written.push(model);
    Ok(written)
}
