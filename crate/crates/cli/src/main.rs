//! Command-line interface: simulation, session generation, calibration,
//! training, evaluation and replay. All outputs are CSV or key=value text;
//! any error exits nonzero.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use bioarm_core::blink::{BlinkClassifier, BlinkDetector, HeuristicDetector};
use bioarm_core::session::SessionRecord;
use bioarm_core::sim::{
    gen_eeg, gen_emg, replay_session, run_calibration, run_simulation, Pathway, Scenario,
    ScenarioKind, SimConfig,
};
use bioarm_core::train::{
    build_dataset, curves_to_csv, evaluate, train, DatasetConfig, Hyperparams,
};

#[derive(Parser)]
#[command(name = "bioarm", version, about = "Dual-modal EEG/EMG prosthetic control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the discrete-event simulation over one or more scenarios.
    Simulate {
        /// Configuration file (key=value); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario files, in timeline order. A calibration scenario must
        /// precede any EMG scenario.
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
        /// Output directory for the run artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Trained classifier weights; a threshold detector is used when
        /// omitted.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Emit a synthetic session CSV for a scenario.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the calibration procedure for a calibration scenario and print
    /// the derived thresholds.
    Calibrate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the calibration as key=value lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the blink classifier on a directory of session CSVs.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Output weights file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Training-curve CSV; defaults to `<out>.curves.csv`.
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate trained weights on the test split of a session directory.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Metric report CSV.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replay a recorded session through the real-time pipelines.
    Replay {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the pipeline event log CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Eeg,
    Emg,
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> Result<SimConfig> {
    let mut cfg = match path {
        Some(p) => SimConfig::read_from_path(p)
            .with_context(|| format!("reading config {}", p.display()))?,
        None => SimConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_detector(weights: &Option<PathBuf>, cfg: &SimConfig) -> Result<BlinkDetector> {
    Ok(match weights {
        Some(path) => BlinkDetector::Network(
            BlinkClassifier::load_from_path(path)
                .with_context(|| format!("loading weights {}", path.display()))?,
        ),
        None => BlinkDetector::Heuristic(HeuristicDetector::new(cfg.heuristic_threshold)),
    })
}

fn load_sessions(dir: &Path) -> Result<Vec<SessionRecord>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading data directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .csv session files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            SessionRecord::read_from_path(p)
                .with_context(|| format!("parsing session {}", p.display()))
        })
        .collect()
}

fn dataset_config(cfg: &SimConfig) -> DatasetConfig {
    DatasetConfig {
        window_len: cfg.window_len,
        hop: cfg.hop,
        frame_ms: cfg.frame_ms,
        eeg_fs_hz: cfg.eeg_fs_hz,
        fc_eeg_hz: cfg.fc_eeg_hz,
        split_seed: cfg.seed,
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            scenario,
            out,
            seed,
            weights,
        } => {
            let cfg = load_config(&config, seed)?;
            let scenarios: Vec<Scenario> = scenario
                .iter()
                .map(|p| {
                    Scenario::read_from_path(p)
                        .with_context(|| format!("parsing scenario {}", p.display()))
                })
                .collect::<Result<_>>()?;
            let classifier = match &weights {
                Some(path) => Some(
                    BlinkClassifier::load_from_path(path)
                        .with_context(|| format!("loading weights {}", path.display()))?,
                ),
                None => None,
            };
            let outcome = run_simulation(&cfg, &scenarios, classifier)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            std::fs::write(out.join("config.txt"), cfg.write_to_string())?;
            std::fs::write(out.join("events.csv"), outcome.log.to_csv())?;
            std::fs::write(out.join("latency_records.csv"), outcome.latency.records_csv())?;
            std::fs::write(out.join("latency_summary.csv"), outcome.latency.summary_csv())?;
            std::fs::write(out.join("actuator_trace.csv"), &outcome.actuator_trace_csv)?;
            if let Some(session) = &outcome.eeg_session {
                session.write_to_path(out.join("session_eeg.csv"))?;
            }
            if let Some(session) = &outcome.emg_session {
                session.write_to_path(out.join("session_emg.csv"))?;
            }
            for pathway in [Pathway::EegBlink, Pathway::EmgElbow] {
                if let Some(stats) = outcome.latency.stats(pathway) {
                    println!(
                        "{}: {}/{} delivered, mean command latency {:.1} ms",
                        pathway, stats.delivered, stats.intents, stats.mean_command_ms
                    );
                }
            }
            if outcome.halted {
                println!("prosthetic node ended halted (watchdog)");
            }
            println!("run artifacts written to {}", out.display());
        }
        Command::Gen {
            kind,
            scenario,
            out,
            config,
            seed,
        } => {
            let cfg = load_config(&config, seed)?;
            let scenario = Scenario::read_from_path(&scenario)?;
            let session = match kind {
                GenKind::Eeg => {
                    if scenario.kind != ScenarioKind::Eeg {
                        bail!("--kind eeg requires an eeg scenario");
                    }
                    let samples = gen_eeg(&cfg, &scenario, cfg.seed)?;
                    session_from_samples(
                        &cfg,
                        samples,
                        bioarm_core::session::Channel::Eeg,
                        &scenario.blink_intervals(),
                    )
                }
                GenKind::Emg => {
                    if scenario.kind != ScenarioKind::Emg {
                        bail!("--kind emg requires an emg scenario");
                    }
                    let samples = gen_emg(&cfg, &scenario, cfg.seed)?;
                    session_from_samples(&cfg, samples, bioarm_core::session::Channel::Emg, &[])
                }
            };
            session.write_to_path(&out)?;
            println!("wrote {} rows to {}", session.rows.len(), out.display());
        }
        Command::Calibrate {
            scenario,
            config,
            seed,
            out,
        } => {
            let cfg = load_config(&config, seed)?;
            let scenario = Scenario::read_from_path(&scenario)?;
            if scenario.kind != ScenarioKind::Calibration {
                bail!("calibrate requires a calibration scenario");
            }
            let cal = run_calibration(&cfg, &scenario)?;
            let mut text = String::new();
            for (key, value) in cal.to_key_values() {
                println!("{key}={value}");
                text.push_str(&format!("{key}={value}\n"));
            }
            if let Some(path) = out {
                std::fs::write(&path, text)?;
                println!("calibration written to {}", path.display());
            }
        }
        Command::Train {
            data,
            out,
            seed,
            epochs,
            lr,
            curves,
            config,
        } => {
            let cfg = load_config(&config, seed)?;
            let sessions = load_sessions(&data)?;
            let dataset = build_dataset(&sessions, &dataset_config(&cfg))?;
            let mut hp = Hyperparams {
                seed: cfg.seed,
                ..Hyperparams::default()
            };
            if let Some(epochs) = epochs {
                hp.max_epochs = epochs;
            }
            if let Some(lr) = lr {
                hp.learning_rate = lr;
            }
            let outcome = train(&dataset, &hp)?;
            outcome.classifier.save_to_path(&out)?;
            let curves_path = curves.unwrap_or_else(|| {
                let mut p = out.as_os_str().to_owned();
                p.push(".curves.csv");
                PathBuf::from(p)
            });
            std::fs::write(&curves_path, curves_to_csv(&outcome.curves))?;
            let last = outcome.curves.last().expect("at least one epoch");
            println!(
                "trained {} epochs (best {}), final val acc {:.4}",
                outcome.curves.len(),
                outcome.best_epoch,
                last.val_acc
            );
            println!("weights: {}", out.display());
            println!("curves: {}", curves_path.display());
        }
        Command::Eval {
            weights,
            data,
            report,
            config,
            seed,
        } => {
            let cfg = load_config(&config, seed)?;
            let classifier = BlinkClassifier::load_from_path(&weights)?;
            let sessions = load_sessions(&data)?;
            let dataset = build_dataset(&sessions, &dataset_config(&cfg))?;
            let result = evaluate(&classifier, &dataset)?;
            std::fs::write(&report, result.to_csv())?;
            println!(
                "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  roc_auc {}",
                result.accuracy,
                result.precision,
                result.recall,
                result.f1,
                result
                    .roc_auc
                    .map(|a| format!("{a:.4}"))
                    .unwrap_or_else(|| "undefined".into()),
            );
            println!("report: {}", report.display());
        }
        Command::Replay {
            session,
            weights,
            config,
            seed,
            out,
        } => {
            let cfg = load_config(&config, seed)?;
            let record = SessionRecord::read_from_path(&session)?;
            let detector = load_detector(&weights, &cfg)?;
            let outcome = replay_session(&record, &cfg, detector, None)?;
            println!(
                "{} hand toggles, {} elbow commands",
                outcome.hand_toggles_ms.len(),
                outcome.elbow_commands_ms.len()
            );
            if let Some(score) = outcome.event_score {
                println!(
                    "event-level: {} labeled, {} emitted, {} matched, precision {:.3}, recall {:.3}",
                    score.labeled_events,
                    score.emitted_events,
                    score.matched,
                    score.precision,
                    score.recall
                );
            }
            if let Some(path) = out {
                std::fs::write(&path, outcome.log.to_csv())?;
                println!("pipeline events: {}", path.display());
            }
        }
    }
    Ok(())
}

fn session_from_samples(
    cfg: &SimConfig,
    samples: Vec<bioarm_core::TimedSample>,
    channel: bioarm_core::session::Channel,
    blink_spans: &[bioarm_core::TimeSpan],
) -> SessionRecord {
    use bioarm_core::session::{RowLabel, SessionMeta, SessionRow};
    let rows = samples
        .into_iter()
        .map(|s| SessionRow {
            t_ms: s.t_ms,
            channel,
            raw_value: s.value,
            quality: s.quality,
            label: if channel == bioarm_core::session::Channel::Eeg {
                if blink_spans.iter().any(|span| span.contains(s.t_ms)) {
                    RowLabel::Blink
                } else {
                    RowLabel::Rest
                }
            } else {
                RowLabel::None
            },
        })
        .collect();
    let meta = SessionMeta {
        headset_config: match channel {
            bioarm_core::session::Channel::Eeg => format!("sim-eeg-{}hz", cfg.eeg_fs_hz),
            bioarm_core::session::Channel::Emg => format!("sim-emg-{}hz", cfg.emg_fs_hz),
        },
        electrode_placement: match channel {
            bioarm_core::session::Channel::Eeg => "forehead".into(),
            bioarm_core::session::Channel::Emg => "biceps".into(),
        },
        ..SessionMeta::default()
    };
    SessionRecord::new(meta, rows)
}
