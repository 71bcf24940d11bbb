use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use stage_core::audio::AudioClip;
use stage_core::emotion::{labeled_rows, train, EmotionNet, EmotionStateList, Hyperparameters, TrainingSet};
use stage_core::engine::{replay, run_offline, EngineConfig, LiveSession, OfflineInput, ReplayReport, SessionLog};
use stage_core::features::{extract_rows, read_feature_csv, write_feature_csv, FeatureConfig};
use stage_core::script::Script;

/// Every flag can also be set through the environment variable named in its
/// help text (prefix `STAGE_`).
#[derive(Parser, Debug)]
#[command(name = "stage", version, about = "Affective stage engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Segment WAV files into phrases and write one feature row per phrase.
    Features {
        #[arg(required = true)]
        wavs: Vec<PathBuf>,
        /// Label written on every row.
        #[arg(long)]
        label: Option<String>,
        /// CSV output; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Train an emotion classifier on a labeled feature CSV.
    Train(TrainArgs),
    /// Run a session offline from audio or a recorded session log.
    Run(RunArgs),
    /// Serve the live control protocol over WebSocket.
    Serve(ServeArgs),
    /// Re-execute a session log and compare its digests.
    Replay(ReplayArgs),
    /// Validate a script; exit code 0 when valid, 1 otherwise.
    Validate { script: PathBuf },
    /// Regenerate the bundled synthetic corpus, demo audio and demo model.
    Fixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, env = "STAGE_TRAIN_DATA")]
    pub data: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Comma-separated state list; the default six states when omitted.
    #[arg(long, value_delimiter = ',')]
    pub states: Option<Vec<String>>,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct Artifacts {
    #[arg(long, env = "STAGE_SCRIPT")]
    pub script: PathBuf,
    #[arg(long, env = "STAGE_MODEL")]
    pub model: PathBuf,
    /// Directory PNG fragments resolve against; the script's own directory
    /// when omitted.
    #[arg(long, env = "STAGE_FRAGMENTS")]
    pub fragments: Option<PathBuf>,
}

impl Artifacts {
    pub fn load(&self) -> Result<(Arc<Script>, Arc<EmotionNet>)> {
        let script = match &self.fragments {
            Some(dir) => {
                let text = std::fs::read_to_string(&self.script)
                    .with_context(|| format!("reading {}", self.script.display()))?;
                Script::parse(&text, dir)?
            }
            None => Script::load(&self.script)?,
        };
        let model = EmotionNet::load(&self.model)?;
        Ok((Arc::new(script), Arc::new(model)))
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct EngineFlags {
    /// JSON engine config; individual flags override its fields.
    #[arg(long = "config", env = "STAGE_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "STAGE_TICK_RATE")]
    pub tick_rate: Option<f64>,
    #[arg(long, env = "STAGE_COMPENSATION_PERIOD")]
    pub compensation_period: Option<u64>,
    #[arg(long, env = "STAGE_OBSERVER_PERIOD")]
    pub observer_period: Option<u64>,
    #[arg(long, env = "STAGE_BASE_BUDGET")]
    pub base_budget: Option<u32>,
    #[arg(long, env = "STAGE_DIGEST_INTERVAL")]
    pub digest_interval: Option<u64>,
    #[arg(long, env = "STAGE_SEED")]
    pub seed: Option<u64>,
}

impl EngineFlags {
    pub fn apply(&self, base: EngineConfig) -> Result<EngineConfig> {
        let mut c = match &self.config {
            Some(path) => serde_json::from_str(
                &std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            )
            .with_context(|| format!("parsing {}", path.display()))?,
            None => base,
        };
        if let Some(v) = self.tick_rate {
            c.tick_rate = v;
        }
        if let Some(v) = self.compensation_period {
            c.compensation_period = Some(v);
        }
        if let Some(v) = self.observer_period {
            c.observer_period = Some(v);
        }
        if let Some(v) = self.base_budget {
            c.base_budget = v;
        }
        if let Some(v) = self.digest_interval {
            c.digest_interval = v;
        }
        if let Some(v) = self.seed {
            c.master_seed = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub artifacts: Artifacts,
    #[command(flatten)]
    pub engine: EngineFlags,
    /// WAV input; each detected phrase becomes one event.
    #[arg(long, conflicts_with = "events", required_unless_present = "events")]
    pub audio: Option<PathBuf>,
    /// Session log whose events are re-executed; its header config is the
    /// default.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Where to write the resulting session log.
    #[arg(long)]
    pub log: PathBuf,
    /// Directory for PNG frames at digest points.
    #[arg(long)]
    pub frames: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[command(flatten)]
    pub artifacts: Artifacts,
    #[command(flatten)]
    pub engine: EngineFlags,
    #[arg(long, env = "STAGE_BIND", default_value = "127.0.0.1:8765")]
    pub bind: String,
    /// Session log written on shutdown.
    #[arg(long, env = "STAGE_SESSION_LOG")]
    pub log: Option<PathBuf>,
    /// Stop after this many ticks.
    #[arg(long)]
    pub max_ticks: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    pub log: PathBuf,
    #[command(flatten)]
    pub artifacts: Artifacts,
    /// Overrides of the header config; any mismatch refuses the replay.
    #[command(flatten)]
    pub engine: EngineFlags,
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Features { wavs, label, out } => features(&wavs, label.as_deref(), out.as_deref()),
        Command::Train(args) => train_cmd(&args),
        Command::Run(args) => run_cmd(&args),
        Command::Serve(args) => serve_cmd(&args),
        Command::Replay(args) => replay_cmd(&args),
        Command::Validate { script } => Ok(validate(&script)),
        Command::Fixtures { out } => {
            for path in crate::fixtures::write_fixtures(&out)? {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn features(wavs: &[PathBuf], label: Option<&str>, out: Option<&Path>) -> Result<ExitCode> {
    let cfg = FeatureConfig::default();
    let mut rows = Vec::new();
    for path in wavs {
        let clip = AudioClip::read_wav(path)?;
        let id = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        rows.extend(extract_rows(&id, &clip, &cfg, label)?);
    }
    match out {
        Some(path) => write_feature_csv(std::fs::File::create(path)?, &rows)?,
        None => write_feature_csv(std::io::stdout().lock(), &rows)?,
    }
    log::info!("{} phrases from {} files", rows.len(), wavs.len());
    Ok(ExitCode::SUCCESS)
}

fn train_cmd(args: &TrainArgs) -> Result<ExitCode> {
    let states = match &args.states {
        Some(s) => EmotionStateList::new(s.clone())?,
        None => EmotionStateList::default_list(),
    };
    let file = std::fs::File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let rows = read_feature_csv(file, true)?;
    let data = TrainingSet {
        rows: labeled_rows(&rows, &states)?,
        hyper: Hyperparameters {
            learning_rate: args.learning_rate,
            momentum: args.momentum,
            epochs: args.epochs,
            batch_size: args.batch_size,
            seed: args.seed,
        },
    };
    let net = EmotionNet::init(states, args.hidden, args.seed)?;
    let (net, report) = train(&net, &data)?;
    net.save(&args.out)?;
    println!(
        "trained on {} rows: loss {:.4} -> {:.4}, accuracy {:.3}",
        data.rows.len(),
        report.losses.first().copied().unwrap_or(f64::NAN),
        report.losses.last().copied().unwrap_or(f64::NAN),
        report.accuracy
    );
    Ok(ExitCode::SUCCESS)
}

fn run_cmd(args: &RunArgs) -> Result<ExitCode> {
    let (script, model) = args.artifacts.load()?;
    let features = FeatureConfig::default();
    let (clip, events);
    let (input, base) = match (&args.audio, &args.events) {
        (Some(path), _) => {
            clip = AudioClip::read_wav(path)?;
            (OfflineInput::Audio(&clip, &features), EngineConfig::default())
        }
        (None, Some(path)) => {
            events = SessionLog::load(path)?;
            (OfflineInput::Log(&events), events.header.config.clone())
        }
        (None, None) => bail!("either --audio or --events is required"),
    };
    let config = args.engine.apply(base)?;
    let run = run_offline(input, script, model, config, args.frames.as_deref())?;
    run.log.save(&args.log)?;
    let (ticks, digest) = run.log.end().expect("offline runs finish their log");
    println!(
        "{ticks} ticks, {} phrase events, {} frames, final digest {digest}",
        run.phrase_events,
        run.frames.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn serve_cmd(args: &ServeArgs) -> Result<ExitCode> {
    let (script, model) = args.artifacts.load()?;
    let config = args.engine.apply(EngineConfig::default())?;
    let session = LiveSession::new(script, model, config)?;
    let runtime = tokio::runtime::Runtime::new()?;
    let log = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.bind)
            .await
            .with_context(|| format!("binding {}", args.bind))?;
        log::info!("serving on ws://{}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        crate::server::serve(listener, session, args.max_ticks, shutdown).await
    })?;
    if let Some(path) = &args.log {
        log.save(path)?;
        log::info!("session log written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn replay_cmd(args: &ReplayArgs) -> Result<ExitCode> {
    let (script, model) = args.artifacts.load()?;
    let log = SessionLog::load(&args.log)?;
    let config = args.engine.apply(log.header.config.clone())?;
    let report = replay(&log, script, model, Some(&config))?;
    println!("{report}");
    Ok(match report {
        ReplayReport::Identical { .. } => ExitCode::SUCCESS,
        ReplayReport::Diverged { .. } => ExitCode::FAILURE,
    })
}

fn validate(path: &Path) -> ExitCode {
    match Script::load(path) {
        Ok(s) => {
            println!(
                "ok: {:?}, {} sequences, {} agents, {} states",
                s.title(),
                s.sequence_count(),
                s.agent_count(),
                s.states().len()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "invalid: {e}");
            ExitCode::FAILURE
        }
    }
}
