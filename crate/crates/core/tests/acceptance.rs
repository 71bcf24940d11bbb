//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use stage_core::audio::AudioClip;
use stage_core::canvas::*;
use stage_core::emotion::*;
use stage_core::engine::*;
use stage_core::features::*;
use stage_core::rng::agent_stream;
use stage_core::script::{CueState, Script};
use stage_core::synth;
use stage_core::troupe::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn demo_artifacts() -> (Arc<Script>, Arc<EmotionNet>) {
    let script = Script::load(fixtures().join("example_script.json")).expect("example script loads");
    let model = EmotionNet::load(fixtures().join("demo_model.txt")).expect("demo model loads");
    (Arc::new(script), Arc::new(model))
}

fn feature_contract() -> Outcome {
    let cfg = FeatureConfig::default();
    let mut wavs: Vec<PathBuf> = std::fs::read_dir(fixtures().join("corpus"))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "wav"))
        .collect();
    wavs.sort();
    ensure!(wavs.len() >= 20, "corpus has {} clips", wavs.len());
    let mut phrases = 0;
    for path in &wavs {
        let clip = AudioClip::read_wav(path).map_err(|e| e.to_string())?;
        let spans = segment_phrases(&clip, &cfg.segmentation).map_err(|e| e.to_string())?;
        ensure!(!spans.is_empty(), "{} has no phrases", path.display());
        for span in &spans {
            let v = phrase_vector(&clip, span, &cfg).map_err(|e| e.to_string())?;
            let a = v.as_array();
            ensure!(a.len() == 12, "{} components", a.len());
            ensure!(a.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)), "{}: {a:?}", path.display());
            phrases += 1;
        }
    }

    let sr = 16_000;
    let mut worst: f64 = 0.0;
    for formants in synth::VOWELS {
        let clip = AudioClip::new(synth::vowel(&synth::VowelSpec::new(formants), 0.6, sr as usize / 2, sr), sr)
            .map_err(|e| e.to_string())?;
        let span = PhraseSpan::new(0, clip.len(), rms(clip.samples()));
        let est = formant_block(&clip, &span, &cfg).map_err(|e| e.to_string())?;
        for (truth, got) in formants.iter().zip(est.hz) {
            let got = got.ok_or_else(|| format!("{formants:?}: missing formant"))?;
            worst = worst.max((got - truth).abs() / truth);
        }
    }
    ensure!(worst <= 0.10, "worst formant error {:.1}%", worst * 100.0);

    let n = sr as usize / 2;
    let tone = synth::vowel(&synth::VowelSpec::new(synth::VOWELS[1]), 0.5, n, sr);
    let noise = synth::white_noise(0.5, n, 23);
    let mut levels = Vec::new();
    for alpha in [0.0, 0.25, 0.5, 1.0] {
        let scaled: Vec<f64> = noise.iter().map(|x| alpha * x).collect();
        let clip = AudioClip::new(synth::mix(&tone, &scaled), sr).map_err(|e| e.to_string())?;
        let span = PhraseSpan::new(0, clip.len(), rms(clip.samples()));
        levels.push(noisiness_block(&clip, &span, &cfg).map_err(|e| e.to_string())?[0]);
    }
    ensure!(levels.windows(2).all(|w| w[0] < w[1]), "flatness not increasing: {levels:?}");

    Ok(format!(
        "{} clips, {phrases} phrases all 12-D in [0,1]; worst formant error {:.1}%; flatness {:.3?}",
        wavs.len(),
        worst * 100.0,
        levels
    ))
}

fn classifier_math() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_grad: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for i in 0..20 {
        let k = rng.gen_range(2..=8);
        let states = EmotionStateList::new((0..k).map(|j| format!("s{j}"))).unwrap();
        let net = EmotionNet::init(states, rng.gen_range(1..=16), i).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let x = FeatureVector12::new(std::array::from_fn(|_| rng.gen())).unwrap();
            worst_grad = worst_grad.max(gradient_check(&net, &x, rng.gen_range(0..k)));
        }
        for _ in 0..50 {
            let x = FeatureVector12::new(std::array::from_fn(|_| rng.gen())).unwrap();
            let p = net.forward(&x).map_err(|e| e.to_string())?;
            worst_sum = worst_sum.max((p.probs.iter().sum::<f64>() - 1.0).abs());
        }
    }
    ensure!(worst_grad < 1e-4, "gradient check error {worst_grad:e}");
    ensure!(worst_sum <= 1e-9, "softmax sum off by {worst_sum:e}");

    let (centers, rows) = synth::gaussian_clusters(4, 400, 0.05, 11);
    let nearest = |v: &FeatureVector12| {
        (0..4)
            .min_by(|&a, &b| {
                let d = |c: &[f64; 12]| v.as_array().iter().zip(c).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
                d(&centers[a]).total_cmp(&d(&centers[b]))
            })
            .unwrap()
    };
    ensure!(rows.iter().all(|(v, l)| nearest(v) == *l), "toy corpus is not separable by nearest center");
    let states = EmotionStateList::new(["a", "b", "c", "d"]).unwrap();
    let data = TrainingSet { rows, hyper: Hyperparameters { epochs: 200, seed: 5, ..Default::default() } };
    let net = EmotionNet::init(states, 12, 5).unwrap();
    let (a, ra) = train(&net, &data).map_err(|e| e.to_string())?;
    let (b, rb) = train(&net, &data).map_err(|e| e.to_string())?;
    ensure!(ra.accuracy >= 0.95, "toy accuracy {:.3}", ra.accuracy);
    let same = a.parameters().iter().zip(b.parameters()).all(|(x, y)| x.to_bits() == y.to_bits())
        && ra.losses.iter().zip(&rb.losses).all(|(x, y)| x.to_bits() == y.to_bits());
    ensure!(same, "training is not deterministic for a fixed seed");
    Ok(format!(
        "gradient error {worst_grad:.1e}, softmax sum error {worst_sum:.1e}, toy accuracy {:.3} in 200 epochs, repeatable",
        ra.accuracy
    ))
}

fn variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Brute-force pair averaging on plain arrays.
fn oracle_rounds(moods: &[f64], seed: u64) -> u64 {
    let mut m = moods.to_vec();
    let start = variance(&m);
    let mut round = 0;
    while variance(&m) >= 1e-6 * start {
        for (i, j) in pairing_for_round(m.len(), seed, round) {
            let avg = 0.5 * (m[i] + m[j]);
            m[i] = avg;
            m[j] = avg;
        }
        round += 1;
    }
    round
}

fn mood_dynamics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let states = EmotionStateList::default_list();
    let bound = 10.0;
    let n = 17;
    let agents = (0..n)
        .map(|id| Agent {
            id,
            mood: rng.gen_range(-bound..=bound),
            fragment: "f".into(),
            sensitivity: (0..6).map(|s| ((0, s), rng.gen_range(-25.0..25.0))).collect(),
        })
        .collect();
    let params = CompensationParams { period: 1, rate: 0.5, gates: Gates::Enabled { high: 3.0, low: -3.0 } };
    let mut t = Troupe::new(agents, bound, 0.9, params).unwrap();
    let mut worst_drift: f64 = 0.0;
    for round in 0..10_000u64 {
        if round % 4 == 0 {
            let env = Environment {
                recognized_state: Some(states.name(rng.gen_range(0..6)).to_string()),
                cue: CueState::default(),
                ..Default::default()
            };
            t = apply_stimulus(&t, &env, &states).map_err(|e| e.to_string())?;
            ensure!(t.moods().iter().all(|m| m.abs() <= bound), "clamp violated after stimulus in round {round}");
        }
        let gates = if rng.gen_bool(0.2) {
            Gates::Disabled
        } else {
            let high = rng.gen_range(0.0..8.0);
            Gates::Enabled { high, low: -rng.gen_range(0.0..8.0) }
        };
        t.set_compensation(CompensationParams { period: 1, rate: rng.gen_range(0.01..=1.0), gates }).unwrap();
        let before = t.total_mood();
        t = compensation_round(&t, round, 99);
        worst_drift = worst_drift.max((t.total_mood() - before).abs());
        ensure!(t.moods().iter().all(|m| m.abs() <= bound), "clamp violated after compensation in round {round}");
    }
    ensure!(worst_drift <= 1e-9, "total mood drifted by {worst_drift:e}");

    let mut slowest = 0;
    for seed in 0..50u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = r.gen_range(2..=16);
        let moods: Vec<f64> = (0..n).map(|_| r.gen_range(-bound..=bound)).collect();
        let limit = oracle_rounds(&moods, seed);
        slowest = slowest.max(limit);
        let agents = moods
            .iter()
            .enumerate()
            .map(|(id, m)| Agent { id, mood: *m, fragment: "f".into(), sensitivity: Default::default() })
            .collect();
        let mut t = Troupe::new(agents, bound, 1.0, CompensationParams { period: 1, rate: 1.0, gates: Gates::Disabled }).unwrap();
        let start = variance(&moods);
        let mut reached = false;
        for round in 0..limit {
            let before = variance(&t.moods());
            t = compensation_round(&t, round, seed);
            let after = variance(&t.moods());
            ensure!(after <= before, "seed {seed}: variance rose in round {round}");
            reached |= after < 1e-6 * start;
        }
        ensure!(reached, "seed {seed}: not below 1e-6 of initial variance within {limit} rounds");
    }
    Ok(format!(
        "10^4 rounds, max drift {worst_drift:.1e}, clamp held; 50 troupes contracted within oracle counts (max {slowest})"
    ))
}

fn oracle_pixel(bg: [f64; 3], items: &[(Fragment, Placement)], px: u32, py: u32) -> [f64; 3] {
    let mut c = bg;
    let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
    for (f, p) in items {
        let (w, h) = (f.width() as f64 * p.scale, f.height() as f64 * p.scale);
        if cx >= p.x && cx < p.x + w && cy >= p.y && cy < p.y + h {
            let u = (((cx - p.x) / p.scale).floor() as u32).min(f.width() - 1);
            let v = (((cy - p.y) / p.scale).floor() as u32).min(f.height() - 1);
            let s = f.pixel(u, v);
            let a = s[3] * p.opacity;
            for k in 0..3 {
                c[k] = a * s[k] + (1.0 - a) * c[k];
            }
        }
    }
    c
}

fn utility_and_greedy() -> Outcome {
    let (script, _) = demo_artifacts();
    let mut scene = script.build_scene().map_err(|e| e.to_string())?;
    let troupe = script.build_troupe().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut streams: Vec<_> = (0..troupe.len()).map(|i| agent_stream(41, i)).collect();
    let mut accepted = 0;
    for step in 0..1000 {
        let cfg = &script.sequence(step / 500).utility;
        let before = utility(&scene, cfg);
        let id = rng.gen_range(0..troupe.len());
        let mut agent = troupe.agents()[id].clone();
        agent.mood = rng.gen_range(-10.0..=10.0);
        let out = agent_step(&agent, &scene, cfg, &mut streams[id], 8, 10.0).map_err(|e| e.to_string())?;
        let after = utility(&out.scene, cfg);
        ensure!(after >= before, "step {step}: utility fell from {before} to {after}");
        accepted += out.accepted.is_some() as usize;
        scene = out.scene;
    }

    let frag = Arc::new(Fragment::solid("f", 8, 8, [1.0; 4]).unwrap());
    let weights = UtilityWeights { coverage: 0.0, balance: 1.0, palette: 0.0, overlap: 0.0 };
    for target in [[0.5, 0.5], [0.25, 0.75], [0.8, 0.2], [0.125, 0.125]] {
        let cfg = SequenceConfig { target_centroid: target, ..SequenceConfig::with_weights(weights) };
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for y in -8..=32 {
            for x in -8..=32 {
                let mut s = Scene::new(32, 32, [0.0; 3]).unwrap();
                s.insert(0, frag.clone(), Placement::at(x as f64, y as f64)).unwrap();
                let u = utility(&s, &cfg);
                if u > best.0 {
                    best = (u, x, y);
                }
            }
        }
        let expected = ((target[0] * 32.0 - 4.0).round() as i32, (target[1] * 32.0 - 4.0).round() as i32);
        ensure!((best.1, best.2) == expected, "target {target:?}: optimum {:?}, oracle {expected:?}", (best.1, best.2));
    }

    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let bg = [rng.gen(), rng.gen(), rng.gen()];
        let items: Vec<(Fragment, Placement)> = (0..rng.gen_range(0..5))
            .map(|_| {
                let (w, h) = (rng.gen_range(1..4), rng.gen_range(1..4));
                let from = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
                let to = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
                let p = Placement {
                    x: rng.gen_range(-2.0..4.0),
                    y: rng.gen_range(-2.0..4.0),
                    scale: rng.gen_range(0.5..2.0),
                    opacity: rng.gen(),
                };
                (Fragment::gradient("g", w, h, from, to, rng.gen()).unwrap(), p)
            })
            .collect();
        let mut s = Scene::new(4, 4, bg).unwrap();
        for (i, (f, p)) in items.iter().enumerate() {
            s.insert(i, Arc::new(f.clone()), *p).unwrap();
        }
        let r = render(&s);
        for py in 0..4 {
            for px in 0..4 {
                let want = oracle_pixel(bg, &items, px, py);
                let got = r.pixel(px, py);
                for k in 0..3 {
                    worst = worst.max((got[k] as f64 / 255.0 - want[k]).abs());
                }
            }
        }
    }
    ensure!(worst <= 1.0 / 255.0, "compositing off by {worst}");
    Ok(format!(
        "1000 steps non-decreasing ({accepted} accepted); 4 exhaustive balance optima match; 500 4x4 scenes within {:.2}/255",
        worst * 255.0
    ))
}

fn valid_message(rng: &mut ChaCha8Rng, script: &Script, snapshots: u64) -> Value {
    let states: Vec<&str> = script.states().iter().collect();
    let seq = script.sequence(rng.gen_range(0..script.sequence_count())).id.clone();
    match rng.gen_range(0..8) {
        0 | 1 => json!({"kind": "phrase_features", "payload": {"features": (0..12).map(|_| rng.gen::<f64>()).collect::<Vec<_>>()}}),
        2 | 3 => json!({"kind": "state_override", "payload": {"state": states.choose(rng).unwrap()}}),
        4 => json!({"kind": "cue_advance", "payload": {}}),
        5 => {
            let path = match rng.gen_range(0..4) {
                0 => "troupe.decay".to_string(),
                1 => "troupe.compensation.rate".to_string(),
                2 => format!("agents.{}.sensitivity.{seq}.{}", rng.gen_range(0..script.agent_count()), states.choose(rng).unwrap()),
                _ => format!("sequences.{seq}.weights.{}", ["coverage", "balance", "palette", "overlap"].choose(rng).unwrap()),
            };
            json!({"kind": "param_update", "payload": {"path": path, "value": rng.gen_range(0.05..1.0)}})
        }
        6 => json!({"kind": "snapshot"}),
        _ if snapshots > 0 => json!({"kind": "restore", "payload": {"id": rng.gen_range(0..snapshots)}}),
        _ => json!({"kind": "cue_advance"}),
    }
}

/// A serve-style session driven by random client traffic.
fn captured_session(seed: u64, ticks: u64) -> Result<SessionLog, String> {
    let (script, model) = demo_artifacts();
    let config = EngineConfig { master_seed: seed, ..Default::default() };
    let mut live = LiveSession::new(script.clone(), model, config).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut snapshots = 0;
    for _ in 0..ticks {
        for _ in 0..rng.gen_range(0..3) {
            if rng.gen_bool(0.4) {
                let msg = valid_message(&mut rng, &script, snapshots);
                if let Ok(ack) = live.ingest(&msg.to_string()) {
                    snapshots += ack.to_json()["payload"].get("snapshot").is_some() as u64;
                }
            }
        }
        live.step().map_err(|e| e.to_string())?;
    }
    SessionLog::parse(&live.finish().to_jsonl()).map_err(|e| e.to_string())
}

fn perturb(kind: &EventKind, rng: &mut ChaCha8Rng, script: &Script) -> Option<EventKind> {
    Some(match kind {
        EventKind::PhraseFeatures(v) => {
            let mut a = *v.as_array();
            let i = rng.gen_range(0..12);
            a[i] = if a[i] > 0.5 { a[i] - 0.25 } else { a[i] + 0.25 };
            EventKind::PhraseFeatures(FeatureVector12::new(a).unwrap())
        }
        EventKind::StateOverride(s) => {
            let other = script.states().iter().find(|x| x != s).unwrap();
            EventKind::StateOverride(other.to_string())
        }
        EventKind::ParamUpdate { path, value } => EventKind::ParamUpdate { path: path.clone(), value: value * 0.5 },
        _ => return None,
    })
}

fn determinism() -> Outcome {
    let (script, model) = demo_artifacts();
    let clip = AudioClip::read_wav(fixtures().join("demo.wav")).map_err(|e| e.to_string())?;
    let features = FeatureConfig::default();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let runs: Vec<OfflineRun> = dirs
        .iter()
        .map(|d| {
            run_offline(OfflineInput::Audio(&clip, &features), script.clone(), model.clone(), EngineConfig::default(), Some(d.path()))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    ensure!(runs[0].phrase_events >= 1, "no phrase events");
    ensure!(!runs[0].frames.is_empty(), "no frames written");
    ensure!(runs[0].log.digests() == runs[1].log.digests(), "offline digests differ between runs");
    ensure!(runs[0].log.end() == runs[1].log.end(), "final digests differ");
    for (a, b) in runs[0].frames.iter().zip(&runs[1].frames) {
        ensure!(std::fs::read(a).unwrap() == std::fs::read(b).unwrap(), "frame {} differs", a.display());
    }
    let report = replay(&runs[0].log, script.clone(), model.clone(), None).map_err(|e| e.to_string())?;
    ensure!(report.to_string() == "identical", "offline log replay: {report}");

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut sessions = 0;
    let mut perturbed = 0;
    for seed in 1..=3u64 {
        let log = captured_session(seed, 60)?;
        let report = replay(&log, script.clone(), model.clone(), None).map_err(|e| e.to_string())?;
        ensure!(report.to_string() == "identical", "session {seed}: {report}");
        sessions += 1;

        let candidates: Vec<usize> = log
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e, LogEntry::Event(ev) if perturb(&ev.kind, &mut rng.clone(), &script).is_some()))
            .map(|(i, _)| i)
            .collect();
        let Some(&idx) = candidates.choose(&mut rng) else { continue };
        let mut bent = log.clone();
        let LogEntry::Event(ev) = &mut bent.entries[idx] else { unreachable!() };
        let tick = ev.tick;
        ev.kind = perturb(&ev.kind, &mut rng, &script).unwrap();
        match replay(&bent, script.clone(), model.clone(), None).map_err(|e| e.to_string())? {
            ReplayReport::Diverged { tick: at, .. } if at >= tick => perturbed += 1,
            other => return Err(format!("session {seed}: perturbed event at tick {tick} gave {other}")),
        }
    }
    ensure!(perturbed >= 1, "no perturbable events in captured sessions");
    Ok(format!(
        "demo run twice: {} phrase events, {} frames, identical digests; {sessions} captured sessions replay identical; {perturbed} perturbations detected",
        runs[0].phrase_events,
        runs[0].frames.len()
    ))
}

fn near_valid(rng: &mut ChaCha8Rng, script: &Script) -> String {
    let mut text = valid_message(rng, script, 2).to_string();
    match rng.gen_range(0..9) {
        0 => {
            let cut = rng.gen_range(0..text.len());
            text.truncate(cut);
        }
        1 => {
            let i = rng.gen_range(0..text.len());
            text.remove(i);
        }
        2 => {
            let i = rng.gen_range(0..=text.len());
            text.insert(i, *b"{}[]\",:0-e.9 x\\".choose(rng).unwrap() as char);
        }
        3 => text = text.replacen("kind", ["knid", "Kind", "kind\u{0}"][rng.gen_range(0..3)], 1),
        4 => {
            let kinds = ["phrase_features", "state_override", "cue_advance", "param_update", "snapshot", "restore"];
            let from = kinds.iter().find(|k| text.contains(*k)).unwrap();
            text = text.replacen(from, kinds.choose(rng).unwrap(), 1);
        }
        5 => {
            let junk = ["-1", "1e999", "\"0.5\"", "null", "[]", "{}", "NaN", "18446744073709551616", "2.5"];
            if let Some(pos) = text.find(|c: char| c.is_ascii_digit()) {
                let end = pos + text[pos..].find(|c: char| !(c.is_ascii_digit() || ".e-+".contains(c))).unwrap_or(text.len() - pos);
                text.replace_range(pos..end, junk.choose(rng).unwrap());
            }
        }
        6 => text = format!("{}{}{}", "[".repeat(rng.gen_range(1..300)), text, "]".repeat(rng.gen_range(0..300))),
        7 => text = text.replacen("payload", "pay", 1),
        _ => text = format!("{text}{text}"),
    }
    text
}

fn robustness() -> Outcome {
    let (script, model) = demo_artifacts();
    let config = EngineConfig { master_seed: 3, ..Default::default() };
    let mut a = LiveSession::new(script.clone(), model.clone(), config.clone()).map_err(|e| e.to_string())?;
    let mut b = LiveSession::new(script.clone(), model, config).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut accepted, mut rejected, mut ticks) = (0, 0, 0);
    for i in 0..10_000 {
        let text = if i % 2 == 0 {
            let len = rng.gen_range(0..200);
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        } else {
            near_valid(&mut rng, &script)
        };
        let res = panic::catch_unwind(AssertUnwindSafe(|| a.ingest(&text)))
            .map_err(|_| format!("ingest panicked on message {i}: {text:?}"))?;
        if res.is_ok() {
            accepted += 1;
            ensure!(b.ingest(&text).is_ok(), "message {i} accepted by one session only");
        } else {
            rejected += 1;
        }
        if i % 100 == 99 {
            let da = panic::catch_unwind(AssertUnwindSafe(|| a.step()))
                .map_err(|_| format!("tick panicked after message {i}"))?
                .map_err(|e| e.to_string())?;
            let db = b.step().map_err(|e| e.to_string())?;
            let digest = |m: &[Outbound]| m.iter().find(|m| m.kind() == "scene").map(|m| m.to_json()["payload"]["digest"].clone());
            ensure!(digest(&da) == digest(&db), "digests diverged at tick {ticks}");
            ticks += 1;
        }
    }
    ensure!(a.log().digests() == b.log().digests(), "logged digests differ");
    Ok(format!("10^4 messages ({rejected} rejected, {accepted} accepted) over {ticks} ticks; no panic, digests unchanged"))
}

/// Name, check and optional time limit in seconds.
type Criterion = (&'static str, fn() -> Outcome, Option<u64>);

fn main() {
    let criteria: [Criterion; 6] = [
        ("feature contract", feature_contract, Some(30)),
        ("classifier math", classifier_math, Some(60)),
        ("mood dynamics", mood_dynamics, None),
        ("utility and greedy", utility_and_greedy, None),
        ("determinism", determinism, Some(60)),
        ("robustness", robustness, None),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit.map(Duration::from_secs)) {
            (Ok(detail), Some(l)) if elapsed > l => Err(format!("{detail}; took {elapsed:.1?}, limit {l:?}")),
            (o, _) => o,
        };
        let limit = limit.map_or(String::new(), |l| format!(", limit {l} s"));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({:.1} s{limit})", elapsed.as_secs_f64()),
            Err(why) => {
                failures += 1;
                println!("FAIL  {name}: {why} ({:.1} s{limit})", elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} of 6 criteria passed", 6 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
