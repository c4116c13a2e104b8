//! Replay recorded session files through the real-time pipelines and score
//! emitted blink events against the recorded labels.

use std::collections::VecDeque;

use super::config::SimConfig;
use super::latency::EventLog;
use super::run::{WearerCommand, WearerNode};
use super::SimError;
use crate::blink::BlinkDetector;
use crate::emg::EmgCalibration;
use crate::session::{Channel, SessionRecord};
use crate::signal::TimedSample;

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    /// Pipeline-level event log; comparable to the live simulation's
    /// pipeline entries for the same stream and config.
    pub log: EventLog,
    /// Times at which hand toggles were emitted.
    pub hand_toggles_ms: Vec<f64>,
    /// Times at which elbow commands were emitted.
    pub elbow_commands_ms: Vec<f64>,
    /// Event-level scores against the recorded blink labels, when the
    /// session carries any.
    pub event_score: Option<EventScore>,
}

/// Event-level precision/recall of emitted toggles against labeled blink
/// intervals, with a one-window timing tolerance on top of the expected
/// detection horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventScore {
    pub labeled_events: usize,
    pub emitted_events: usize,
    pub matched: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Calibration for replay comes from the session metadata when present.
pub fn calibration_from_meta(record: &SessionRecord) -> Option<EmgCalibration> {
    let get = |key: &str| -> Option<f64> {
        record
            .meta
            .calibration
            .iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.parse().ok())
    };
    let (raw_min, raw_max) = (get("raw_min")?, get("raw_max")?);
    let (t1, t2) = (get("t1")?, get("t2")?);
    let alpha = get("alpha_margin")?;
    let beta = get("beta_margin")?;
    // Reconstruct reference levels consistent with the stored thresholds.
    let e_rest = t1 - alpha * (t2 - t1) / (1.0 + beta);
    Some(EmgCalibration {
        raw_min,
        raw_max,
        e_rest,
        e_mid: t1 + (t2 - t1) / 2.0,
        e_max: 1.0,
        alpha_margin: alpha,
        beta_margin: beta,
        t1,
        t2,
    })
}

/// Drive the wearer-side pipelines over a recorded session with the same
/// tick loop and link delays as the live simulation.
pub fn replay_session(
    record: &SessionRecord,
    cfg: &SimConfig,
    detector: BlinkDetector,
    calibration: Option<EmgCalibration>,
) -> Result<ReplayOutcome, SimError> {
    let calibration = calibration.or_else(|| calibration_from_meta(record));
    let mut node = WearerNode::new(cfg, detector, calibration)?;
    let mut log = EventLog::default();

    let mut eeg: VecDeque<(f64, TimedSample)> = record
        .samples(Channel::Eeg)
        .into_iter()
        .map(|s| (s.t_ms + cfg.eeg_link_delay_ms, s))
        .collect();
    let mut emg: VecDeque<(f64, TimedSample)> = record
        .samples(Channel::Emg)
        .into_iter()
        .map(|s| (s.t_ms + cfg.emg_link_delay_ms, s))
        .collect();

    let last_arrival = eeg
        .back()
        .map(|(a, _)| *a)
        .unwrap_or(0.0)
        .max(emg.back().map(|(a, _)| *a).unwrap_or(0.0));

    let mut hand_toggles_ms = Vec::new();
    let mut elbow_commands_ms = Vec::new();
    let mut tick: u64 = 0;
    loop {
        let now = tick as f64 * cfg.tick_ms;
        if now > last_arrival + cfg.tick_ms {
            break;
        }
        while let Some((arrive, _)) = eeg.front() {
            if *arrive > now {
                break;
            }
            let (_, sample) = eeg.pop_front().unwrap();
            if let Some(WearerCommand::HandToggle { emit_ms, .. }) =
                node.ingest_eeg(sample, now, &mut log)?
            {
                hand_toggles_ms.push(emit_ms);
            }
        }
        while let Some((arrive, _)) = emg.front() {
            if *arrive > now {
                break;
            }
            let (_, sample) = emg.pop_front().unwrap();
            if let Some(WearerCommand::Elbow { emit_ms, .. }) =
                node.ingest_emg(sample, now, &mut log)?
            {
                elbow_commands_ms.push(emit_ms);
            }
        }
        tick += 1;
    }

    let intervals = record.blink_intervals();
    let event_score = (!intervals.is_empty()).then(|| {
        score_events(&hand_toggles_ms, &intervals, cfg)
    });

    Ok(ReplayOutcome {
        log,
        hand_toggles_ms,
        elbow_commands_ms,
        event_score,
    })
}

/// Greedy in-order matching of emitted toggles to labeled intervals. A
/// toggle matches an interval when it falls inside the interval extended by
/// the pipeline's detection horizon (window assembly plus voting), with one
/// extra frame of tolerance on each side.
fn score_events(
    toggles: &[f64],
    intervals: &[crate::signal::TimeSpan],
    cfg: &SimConfig,
) -> EventScore {
    let horizon =
        (cfg.window_len + cfg.vote_capacity) as f64 * cfg.frame_ms + cfg.eeg_link_delay_ms;
    let tolerance = cfg.frame_ms;
    let mut matched = 0usize;
    let mut toggle_iter = toggles.iter().peekable();
    for interval in intervals {
        let lo = interval.start_ms - tolerance;
        let hi = interval.end_ms + horizon + tolerance;
        while let Some(&&t) = toggle_iter.peek() {
            if t < lo {
                toggle_iter.next();
            } else if t <= hi {
                matched += 1;
                toggle_iter.next();
                break;
            } else {
                break;
            }
        }
    }
    let precision = if toggles.is_empty() {
        0.0
    } else {
        matched as f64 / toggles.len() as f64
    };
    let recall = if intervals.is_empty() {
        0.0
    } else {
        matched as f64 / intervals.len() as f64
    };
    EventScore {
        labeled_events: intervals.len(),
        emitted_events: toggles.len(),
        matched,
        precision,
        recall,
    }
}
