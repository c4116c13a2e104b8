//! The discrete-event simulation: synthetic streams feed the wearer-side
//! pipelines, commands cross a lossy delayed link with stop-and-wait acks,
//! and the prosthetic node runs the watchdog and actuator. Virtual time
//! advances in fixed ticks; nothing sleeps.

use std::collections::VecDeque;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::config::SimConfig;
use super::gen::{gen_calibration, gen_eeg, gen_emg};
use super::latency::{EventLog, LatencyRecord, LatencyReport, Pathway};
use super::scenario::{EventKind, Scenario, ScenarioKind};
use super::SimError;
use crate::actuation::{ActuatorConfig, ArmActuator, MotionCommand};
use crate::blink::{
    BlinkClassifier, BlinkDetector, BlinkPipeline, BlinkPipelineConfig, DebounceMode,
    HandPosition, HeuristicDetector,
};
use crate::emg::{Band, BandState, ElbowCommand, EmgCalibration};
use crate::protocol::{
    CommandPacket, MotionParams, PacketBody, ReliabilityState, ReliableReceiver, ReliableSender,
    SenderPoll, TelemetryBody, Watchdog,
};
use crate::session::{Channel, RowLabel, SessionMeta, SessionRecord, SessionRow};
use crate::signal::{FrameAggregator, LowPassFilter, TimedSample};

/// Command produced by a wearer-side pipeline, before framing.
#[derive(Debug, Clone)]
pub(crate) enum WearerCommand {
    HandToggle {
        detect_ms: f64,
        emit_ms: f64,
    },
    Elbow {
        command: ElbowCommand,
        detect_ms: f64,
        emit_ms: f64,
    },
}

impl WearerCommand {
    fn pathway(&self) -> Pathway {
        match self {
            WearerCommand::HandToggle { .. } => Pathway::EegBlink,
            WearerCommand::Elbow { .. } => Pathway::EmgElbow,
        }
    }

    fn detect_ms(&self) -> f64 {
        match self {
            WearerCommand::HandToggle { detect_ms, .. } => *detect_ms,
            WearerCommand::Elbow { detect_ms, .. } => *detect_ms,
        }
    }

    fn emit_ms(&self) -> f64 {
        match self {
            WearerCommand::HandToggle { emit_ms, .. } => *emit_ms,
            WearerCommand::Elbow { emit_ms, .. } => *emit_ms,
        }
    }

    fn body(&self) -> PacketBody {
        match self {
            WearerCommand::HandToggle { .. } => PacketBody::HandToggle { motion: None },
            WearerCommand::Elbow { command, .. } => PacketBody::ElbowMove {
                direction: command.direction,
                motion: MotionParams::default(),
            },
        }
    }
}

/// Wearer-side node: both sensing pipelines. Shared between the live
/// simulation and session replay so their logs are comparable.
pub(crate) struct WearerNode {
    eeg_filter: LowPassFilter,
    eeg_agg: FrameAggregator,
    blink: BlinkPipeline,
    blink_run_start: Option<f64>,
    blink_prev_predicted: bool,
    emg_filter: LowPassFilter,
    emg_agg: FrameAggregator,
    band: BandState,
    band_prev: Band,
    band_run_start: Option<f64>,
    calibration: Option<EmgCalibration>,
    elbow_step_deg: f64,
}

impl WearerNode {
    pub(crate) fn new(
        cfg: &SimConfig,
        detector: BlinkDetector,
        calibration: Option<EmgCalibration>,
    ) -> Result<Self, SimError> {
        let blink = BlinkPipeline::new(
            BlinkPipelineConfig {
                window_len: cfg.window_len,
                debounce: DebounceMode::Vote {
                    capacity: cfg.vote_capacity,
                    threshold: cfg.vote_threshold,
                },
                refractory_windows: cfg.refractory_windows,
            },
            detector,
        )?;
        Ok(Self {
            eeg_filter: LowPassFilter::new(cfg.fc_eeg_hz, cfg.eeg_fs_hz)?,
            eeg_agg: FrameAggregator::new(cfg.frame_ms),
            blink,
            blink_run_start: None,
            blink_prev_predicted: false,
            emg_filter: LowPassFilter::new(cfg.fc_emg_hz, cfg.emg_fs_hz)?,
            emg_agg: FrameAggregator::new(cfg.emg_frame_ms()),
            band: BandState::new(cfg.persistence_frames).with_step_deg(cfg.elbow_step_deg),
            band_prev: Band::Rest,
            band_run_start: None,
            calibration,
            elbow_step_deg: cfg.elbow_step_deg,
        })
    }

    pub(crate) fn ingest_eeg(
        &mut self,
        sample: TimedSample,
        now_ms: f64,
        log: &mut EventLog,
    ) -> Result<Option<WearerCommand>, SimError> {
        let mut filtered = sample;
        if sample.is_usable() {
            filtered.value = self.eeg_filter.step(sample.value)?;
        }
        let Some(frame) = self.eeg_agg.push(filtered) else {
            return Ok(None);
        };
        let Some(step) = self.blink.push_frame(frame)? else {
            return Ok(None);
        };
        if step.predicted_blink {
            if !self.blink_prev_predicted {
                self.blink_run_start = Some(now_ms);
            }
            log.push(
                now_ms,
                "blink_pred",
                format!("frame={} p={:.4}", step.window_t_ms, step.p_blink),
            );
        }
        self.blink_prev_predicted = step.predicted_blink;
        if step.vote_event {
            log.push(now_ms, "vote_event", format!("frame={}", step.window_t_ms));
        }
        if let Some(cmd) = step.command {
            let target = match cmd.target {
                HandPosition::Open => "open",
                HandPosition::Closed => "closed",
            };
            log.push(now_ms, "hand_toggle", format!("target={target}"));
            return Ok(Some(WearerCommand::HandToggle {
                detect_ms: self.blink_run_start.unwrap_or(now_ms),
                emit_ms: now_ms,
            }));
        }
        Ok(None)
    }

    pub(crate) fn ingest_emg(
        &mut self,
        sample: TimedSample,
        now_ms: f64,
        log: &mut EventLog,
    ) -> Result<Option<WearerCommand>, SimError> {
        let Some(cal) = &self.calibration else {
            return Ok(None);
        };
        let mut filtered = sample;
        if sample.is_usable() {
            filtered.value = self.emg_filter.step(sample.value)?;
        }
        let Some(frame) = self.emg_agg.push(filtered) else {
            return Ok(None);
        };
        // Poor frames reset the run instead of classifying a band.
        let band = if frame.is_usable() {
            cal.classify_band(cal.normalize(frame.value))
        } else {
            Band::Rest
        };
        if band.is_movement() && band != self.band_prev {
            self.band_run_start = Some(now_ms);
            log.push(now_ms, "band_run", format!("band={band:?}"));
        }
        self.band_prev = band;
        if let Some(command) = self.band.update(band) {
            log.push(
                now_ms,
                "elbow_command",
                format!("direction={:?} step={}", command.direction, self.elbow_step_deg),
            );
            return Ok(Some(WearerCommand::Elbow {
                command,
                detect_ms: self.band_run_start.unwrap_or(now_ms),
                emit_ms: now_ms,
            }));
        }
        Ok(None)
    }
}

/// Constant-delay link that drops each frame independently with the loss
/// probability; order is preserved.
struct DelayedLink {
    rng: ChaCha12Rng,
    loss: f64,
    delay_ms: f64,
    in_flight: VecDeque<(f64, Vec<u8>)>,
}

impl DelayedLink {
    fn new(loss: f64, delay_ms: f64, seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
            loss,
            delay_ms,
            in_flight: VecDeque::new(),
        }
    }

    /// Returns false when the frame was dropped.
    fn send(&mut self, now_ms: f64, bytes: Vec<u8>) -> bool {
        if self.loss > 0.0 && self.rng.random_bool(self.loss) {
            return false;
        }
        self.in_flight.push_back((now_ms + self.delay_ms, bytes));
        true
    }

    fn poll(&mut self, now_ms: f64) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        while let Some((arrive, _)) = self.in_flight.front() {
            if *arrive > now_ms {
                break;
            }
            out.push(self.in_flight.pop_front().unwrap().1);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub log: EventLog,
    pub latency: LatencyReport,
    pub calibration: Option<EmgCalibration>,
    /// Exported control-phase streams, replayable against the same config.
    pub eeg_session: Option<SessionRecord>,
    pub emg_session: Option<SessionRecord>,
    pub actuator_trace_csv: String,
    pub halted: bool,
}

struct PlacedStream {
    arrivals: VecDeque<(f64, TimedSample)>,
    rows: Vec<SessionRow>,
}

fn place_stream(
    samples: Vec<TimedSample>,
    offset_ms: f64,
    link_delay_ms: f64,
    channel: Channel,
    blink_spans: &[crate::signal::TimeSpan],
) -> PlacedStream {
    let mut arrivals = VecDeque::with_capacity(samples.len());
    let mut rows = Vec::with_capacity(samples.len());
    for mut s in samples {
        let label = if channel == Channel::Eeg {
            if blink_spans.iter().any(|span| span.contains(s.t_ms)) {
                RowLabel::Blink
            } else {
                RowLabel::Rest
            }
        } else {
            RowLabel::None
        };
        s.t_ms += offset_ms;
        arrivals.push_back((s.t_ms + link_delay_ms, s));
        rows.push(SessionRow {
            t_ms: s.t_ms,
            channel,
            raw_value: s.value,
            quality: s.quality,
            label,
        });
    }
    PlacedStream { arrivals, rows }
}

/// Derive the session calibration from a generated calibration stream: the
/// same low-pass filter the live pipeline uses, then the three plateau
/// segments.
fn derive_calibration(
    cfg: &SimConfig,
    stream: &super::gen::CalibrationStream,
) -> Result<EmgCalibration, SimError> {
    let mut filter = LowPassFilter::new(cfg.fc_emg_hz, cfg.emg_fs_hz)?;
    let filtered: Vec<f64> = stream
        .samples
        .iter()
        .map(|s| filter.step(s.value))
        .collect::<Result<_, _>>()?;
    let segment = |range: &std::ops::Range<usize>| filtered[range.clone()].to_vec();
    Ok(EmgCalibration::from_recordings(
        &segment(&stream.rest_range),
        &segment(&stream.light_range),
        &segment(&stream.strong_range),
        cfg.alpha_margin,
        cfg.beta_margin,
    )?)
}

/// Run calibration scenarios (outside the control timeline) and return the
/// resulting thresholds.
pub fn run_calibration(cfg: &SimConfig, scenario: &Scenario) -> Result<EmgCalibration, SimError> {
    let plan = scenario.calibration.ok_or_else(|| SimError::Scenario {
        line: 0,
        message: "not a calibration scenario".into(),
    })?;
    let mut master = ChaCha12Rng::seed_from_u64(cfg.seed);
    let cal_seed = master.next_u64();
    let stream = gen_calibration(cfg, &plan, cal_seed)?;
    derive_calibration(cfg, &stream)
}

/// Run the full simulation over the scenario list. Calibration scenarios
/// run before the control timeline and must precede any EMG scenario;
/// control scenarios occupy consecutive time slots in list order.
pub fn run_simulation(
    cfg: &SimConfig,
    scenarios: &[Scenario],
    weights: Option<BlinkClassifier>,
) -> Result<SimOutcome, SimError> {
    for scenario in scenarios {
        scenario.validate()?;
    }
    let first_emg = scenarios
        .iter()
        .position(|s| s.kind == ScenarioKind::Emg);
    let first_cal = scenarios
        .iter()
        .position(|s| s.kind == ScenarioKind::Calibration);
    if let Some(emg_at) = first_emg {
        match first_cal {
            Some(cal_at) if cal_at < emg_at => {}
            _ => {
                return Err(SimError::MisorderedScenarios(
                    "an EMG scenario requires a calibration scenario before it".into(),
                ))
            }
        }
    }

    let mut master = ChaCha12Rng::seed_from_u64(cfg.seed);
    let cal_seed = master.next_u64();
    let cmd_link_seed = master.next_u64();
    let ack_link_seed = master.next_u64();

    let mut log = EventLog::default();
    let mut latency = LatencyReport::default();
    let mut calibration: Option<EmgCalibration> = None;
    let mut eeg_rows: Vec<SessionRow> = Vec::new();
    let mut emg_rows: Vec<SessionRow> = Vec::new();
    let mut eeg_arrivals: VecDeque<(f64, TimedSample)> = VecDeque::new();
    let mut emg_arrivals: VecDeque<(f64, TimedSample)> = VecDeque::new();
    let mut offset = 0.0;

    for scenario in scenarios {
        let scenario_seed = master.next_u64();
        match scenario.kind {
            ScenarioKind::Calibration => {
                let plan = scenario.calibration.expect("validated");
                let stream = gen_calibration(cfg, &plan, cal_seed)?;
                let cal = derive_calibration(cfg, &stream)?;
                log.push(
                    0.0,
                    "calibration",
                    format!("t1={} t2={}", cal.t1, cal.t2),
                );
                calibration = Some(cal);
            }
            ScenarioKind::Eeg => {
                let samples = gen_eeg(cfg, scenario, scenario_seed)?;
                let spans = scenario.blink_intervals();
                for event in &scenario.events {
                    latency
                        .records
                        .push(LatencyRecord::new(Pathway::EegBlink, offset + event.t_ms));
                }
                let placed =
                    place_stream(samples, offset, cfg.eeg_link_delay_ms, Channel::Eeg, &spans);
                eeg_arrivals.extend(placed.arrivals);
                eeg_rows.extend(placed.rows);
                offset += scenario.duration_ms;
            }
            ScenarioKind::Emg => {
                let samples = gen_emg(cfg, scenario, scenario_seed)?;
                for event in &scenario.events {
                    if matches!(event.kind, EventKind::Contraction(_)) {
                        latency
                            .records
                            .push(LatencyRecord::new(Pathway::EmgElbow, offset + event.t_ms));
                    }
                }
                let placed =
                    place_stream(samples, offset, cfg.emg_link_delay_ms, Channel::Emg, &[]);
                emg_arrivals.extend(placed.arrivals);
                emg_rows.extend(placed.rows);
                offset += scenario.duration_ms;
            }
        }
    }

    let detector = match weights {
        Some(clf) => BlinkDetector::Network(clf),
        None => BlinkDetector::Heuristic(HeuristicDetector::new(cfg.heuristic_threshold)),
    };
    let mut wearer = WearerNode::new(cfg, detector, calibration.clone())?;
    let mut sender = ReliableSender::new(ReliabilityState {
        next_seq: 0,
        retry_limit: 2,
        ack_timeout_ms: cfg.ack_timeout_ms,
    });
    let mut queue: VecDeque<(PacketBody, Option<usize>)> = VecDeque::new();
    let mut inflight: Option<(u8, Option<usize>)> = None;
    let mut receiver = ReliableReceiver::new();
    let mut watchdog = Watchdog::new(cfg.watchdog_ms, 0);
    let mut actuator = ArmActuator::new(ActuatorConfig {
        accel_fraction: 1.0 / 3.0,
        ..ActuatorConfig::default()
    });
    let mut cmd_link = DelayedLink::new(cfg.loss_probability, cfg.command_link_delay_ms, cmd_link_seed);
    let mut ack_link = DelayedLink::new(cfg.loss_probability, cfg.command_link_delay_ms, ack_link_seed);

    // Cursor per pathway over latency records for intent matching.
    let mut matched: Vec<bool> = vec![false; latency.records.len()];

    let drain_ms = 3.0 * cfg.ack_timeout_ms as f64 + 2.0 * cfg.command_link_delay_ms + 400.0;
    let total_ms = offset + drain_ms;
    let mut tick: u64 = 0;

    let match_intent = |records: &mut Vec<LatencyRecord>,
                            matched: &mut Vec<bool>,
                            cmd: &WearerCommand|
     -> Option<usize> {
        let mut candidate = None;
        for (i, record) in records.iter().enumerate() {
            if matched[i] || record.pathway != cmd.pathway() {
                continue;
            }
            if record.intent_ms <= cmd.emit_ms() {
                candidate = Some(i);
            } else {
                break;
            }
        }
        if let Some(i) = candidate {
            matched[i] = true;
            records[i].detect_ms = Some(cmd.detect_ms());
            records[i].emit_ms = Some(cmd.emit_ms());
        }
        candidate
    };

    loop {
        let now = tick as f64 * cfg.tick_ms;
        if now > total_ms {
            break;
        }
        let now_u64 = now as u64;

        // Sensor arrivals feed the pipelines.
        while let Some((arrive, _)) = eeg_arrivals.front() {
            if *arrive > now {
                break;
            }
            let (_, sample) = eeg_arrivals.pop_front().unwrap();
            if let Some(cmd) = wearer.ingest_eeg(sample, now, &mut log)? {
                let idx = match_intent(&mut latency.records, &mut matched, &cmd);
                queue.push_back((cmd.body(), idx));
            }
        }
        while let Some((arrive, _)) = emg_arrivals.front() {
            if *arrive > now {
                break;
            }
            let (_, sample) = emg_arrivals.pop_front().unwrap();
            if let Some(cmd) = wearer.ingest_emg(sample, now, &mut log)? {
                let idx = match_intent(&mut latency.records, &mut matched, &cmd);
                queue.push_back((cmd.body(), idx));
            }
        }

        // Retransmission timers.
        match sender.poll(now_u64) {
            SenderPoll::Retransmit { frame, attempt } => {
                let seq = inflight.map(|(s, _)| s).unwrap_or_default();
                log.push(now, "pkt_tx", format!("seq={seq} attempt={attempt}"));
                if !cmd_link.send(now, frame) {
                    log.push(now, "pkt_drop", format!("seq={seq}"));
                }
            }
            SenderPoll::GaveUp { seq, attempts } => {
                log.push(
                    now,
                    "delivery_failed",
                    format!("seq={seq} attempts={attempts}"),
                );
                inflight = None;
            }
            SenderPoll::Idle | SenderPoll::Waiting => {}
        }

        // Start the next queued command when the link is free.
        if inflight.is_none() && !queue.is_empty() && sender.is_idle() {
            let (body, record_idx) = queue.pop_front().unwrap();
            let seq = sender.state.next_seq;
            let frame = sender.start(body, now_u64)?;
            inflight = Some((seq, record_idx));
            log.push(now, "pkt_tx", format!("seq={seq} attempt=1"));
            if !cmd_link.send(now, frame) {
                log.push(now, "pkt_drop", format!("seq={seq}"));
            }
        }

        // Command frames arriving at the prosthetic node.
        for bytes in cmd_link.poll(now) {
            match receiver.on_frame(&bytes) {
                Ok(action) => {
                    watchdog.refresh(now_u64);
                    if !ack_link.send(now, action.ack_frame) {
                        log.push(now, "ack_drop", String::new());
                    }
                    match action.delivery {
                        Some(packet) => {
                            log.push(
                                now,
                                "pkt_rx",
                                format!("seq={} type={:?}", packet.seq, packet.body.packet_type()),
                            );
                            handle_delivery(
                                cfg,
                                &packet,
                                now,
                                &mut actuator,
                                &mut watchdog,
                                &mut log,
                                inflight,
                                &mut latency.records,
                            );
                        }
                        None => {
                            log.push(now, "pkt_dup", String::new());
                        }
                    }
                }
                Err(err) => {
                    log.push(now, "pkt_bad", err.to_string());
                }
            }
        }

        // Acks arriving back at the wearer node.
        for bytes in ack_link.poll(now) {
            if let Ok(packet) = CommandPacket::decode(&bytes) {
                if let Some(outcome) = sender.on_ack(packet.seq) {
                    log.push(
                        now,
                        "delivered",
                        format!("seq={} outcome={outcome:?}", packet.seq),
                    );
                    inflight = None;
                }
            }
        }

        // Safety watchdog.
        if let Some(halt) = watchdog.tick(now_u64) {
            log.push(
                now,
                "watchdog_halt",
                format!("last_valid={}", halt.last_valid_ms),
            );
            actuator.halt(now);
        }

        // Actuation.
        for joint in actuator.tick(now) {
            log.push(now, "profile_done", format!("joint={joint}"));
        }

        tick += 1;
    }

    let eeg_session = (!eeg_rows.is_empty()).then(|| {
        SessionRecord::new(
            SessionMeta {
                headset_config: format!("sim-eeg-{}hz", cfg.eeg_fs_hz),
                ..SessionMeta::default()
            },
            eeg_rows,
        )
    });
    let emg_session = (!emg_rows.is_empty()).then(|| {
        let mut meta = SessionMeta {
            headset_config: format!("sim-emg-{}hz", cfg.emg_fs_hz),
            electrode_placement: "biceps".into(),
            ..SessionMeta::default()
        };
        if let Some(cal) = &calibration {
            meta.calibration = cal.to_key_values();
        }
        SessionRecord::new(meta, emg_rows)
    });

    Ok(SimOutcome {
        actuator_trace_csv: actuator.trace_csv(),
        halted: watchdog.is_halted(),
        log,
        latency,
        calibration,
        eeg_session,
        emg_session,
    })
}

#[allow(clippy::too_many_arguments)]
fn handle_delivery(
    cfg: &SimConfig,
    packet: &CommandPacket,
    now: f64,
    actuator: &mut ArmActuator,
    watchdog: &mut Watchdog,
    log: &mut EventLog,
    inflight: Option<(u8, Option<usize>)>,
    records: &mut [LatencyRecord],
) {
    let record_idx = match inflight {
        Some((seq, idx)) if seq == packet.seq => idx,
        _ => None,
    };
    let command = match &packet.body {
        PacketBody::HandToggle { motion } => Some(MotionCommand::HandToggle { motion: *motion }),
        PacketBody::ElbowMove { direction, motion } => Some(MotionCommand::ElbowMove {
            direction: *direction,
            step_deg: cfg.elbow_step_deg,
            motion: *motion,
        }),
        PacketBody::Telemetry(TelemetryBody::Resume) => {
            watchdog.resume(now as u64);
            actuator.resume();
            log.push(now, "resume", String::new());
            None
        }
        PacketBody::Telemetry(_) => {
            log.push(now, "telemetry", String::new());
            None
        }
        PacketBody::Halt => {
            actuator.halt(now);
            log.push(now, "halt_cmd", String::new());
            None
        }
        PacketBody::Ack => None,
    };
    let Some(command) = command else { return };
    match actuator.execute(&command, now) {
        Ok(scheduled) => {
            let end = scheduled
                .iter()
                .map(|s| s.end_ms())
                .fold(now, f64::max);
            log.push(
                now,
                "cmd_exec",
                format!("type={:?} profiles={}", packet.body.packet_type(), scheduled.len()),
            );
            if let Some(idx) = record_idx {
                records[idx].deliver_ms = Some(now);
                records[idx].complete_ms = Some(end);
            }
        }
        Err(err) => {
            log.push(now, "cmd_rejected", err.to_string());
            if let Some(idx) = record_idx {
                records[idx].deliver_ms = Some(now);
            }
        }
    }
}
