//! Per-event latency records and per-pathway aggregates, plus the
//! append-only event log whose CSV form is the determinism surface of the
//! simulator.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pathway {
    EegBlink,
    EmgElbow,
}

impl std::fmt::Display for Pathway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pathway::EegBlink => write!(f, "eeg_blink"),
            Pathway::EmgElbow => write!(f, "emg_elbow"),
        }
    }
}

/// Stage timestamps for one intent, all in simulation milliseconds.
/// `None` marks a stage the event never reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyRecord {
    pub pathway: Pathway,
    /// Scenario event onset.
    pub intent_ms: f64,
    /// First window/frame in which the pipeline saw the event.
    pub detect_ms: Option<f64>,
    /// Command emitted by the debounce stage.
    pub emit_ms: Option<f64>,
    /// Command accepted at the prosthetic node.
    pub deliver_ms: Option<f64>,
    /// Scheduled motion finished.
    pub complete_ms: Option<f64>,
}

impl LatencyRecord {
    pub fn new(pathway: Pathway, intent_ms: f64) -> Self {
        Self {
            pathway,
            intent_ms,
            detect_ms: None,
            emit_ms: None,
            deliver_ms: None,
            complete_ms: None,
        }
    }

    /// Intent to command acceptance.
    pub fn command_latency_ms(&self) -> Option<f64> {
        self.deliver_ms.map(|d| d - self.intent_ms)
    }

    /// Intent to actuation complete.
    pub fn total_latency_ms(&self) -> Option<f64> {
        self.complete_ms.map(|c| c - self.intent_ms)
    }

    /// Stage durations: framing (intent to detection), debounce (detection
    /// to emission), transport (emission to delivery), actuation (delivery
    /// to completion). Present only when the downstream stage was reached.
    pub fn stages_ms(&self) -> [Option<f64>; 4] {
        [
            self.detect_ms.map(|d| d - self.intent_ms),
            self.emit_ms.zip(self.detect_ms).map(|(e, d)| e - d),
            self.deliver_ms.zip(self.emit_ms).map(|(d, e)| d - e),
            self.complete_ms.zip(self.deliver_ms).map(|(c, d)| c - d),
        ]
    }
}

/// Mean and nearest-rank percentiles per pathway.
#[derive(Debug, Clone, PartialEq)]
pub struct PathwayStats {
    pub pathway: Pathway,
    pub intents: usize,
    pub delivered: usize,
    pub mean_command_ms: f64,
    pub p50_command_ms: f64,
    pub p95_command_ms: f64,
    pub mean_total_ms: f64,
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatencyReport {
    pub records: Vec<LatencyRecord>,
}

impl LatencyReport {
    pub fn stats(&self, pathway: Pathway) -> Option<PathwayStats> {
        let records: Vec<&LatencyRecord> =
            self.records.iter().filter(|r| r.pathway == pathway).collect();
        if records.is_empty() {
            return None;
        }
        let mut command: Vec<f64> = records
            .iter()
            .filter_map(|r| r.command_latency_ms())
            .collect();
        command.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let totals: Vec<f64> = records.iter().filter_map(|r| r.total_latency_ms()).collect();
        let mean = |v: &[f64]| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        Some(PathwayStats {
            pathway,
            intents: records.len(),
            delivered: command.len(),
            mean_command_ms: mean(&command),
            p50_command_ms: nearest_rank(&command, 0.5),
            p95_command_ms: nearest_rank(&command, 0.95),
            mean_total_ms: mean(&totals),
        })
    }

    /// Per-record CSV.
    pub fn records_csv(&self) -> String {
        let mut out = String::from(
            "pathway,intent_ms,detect_ms,emit_ms,deliver_ms,complete_ms,command_latency_ms,total_latency_ms\n",
        );
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.pathway,
                r.intent_ms,
                fmt(r.detect_ms),
                fmt(r.emit_ms),
                fmt(r.deliver_ms),
                fmt(r.complete_ms),
                fmt(r.command_latency_ms()),
                fmt(r.total_latency_ms()),
            ));
        }
        out
    }

    /// Aggregate CSV, one row per pathway.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "pathway,intents,delivered,mean_command_ms,p50_command_ms,p95_command_ms,mean_total_ms\n",
        );
        for pathway in [Pathway::EegBlink, Pathway::EmgElbow] {
            if let Some(s) = self.stats(pathway) {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    s.pathway,
                    s.intents,
                    s.delivered,
                    s.mean_command_ms,
                    s.p50_command_ms,
                    s.p95_command_ms,
                    s.mean_total_ms,
                ));
            }
        }
        out
    }
}

/// Append-only simulation log; the CSV form is compared byte-for-byte in
/// determinism checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub entries: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub t_ms: f64,
    pub kind: &'static str,
    pub detail: String,
}

impl EventLog {
    pub fn push(&mut self, t_ms: f64, kind: &'static str, detail: impl Into<String>) {
        self.entries.push(LogEntry {
            t_ms,
            kind,
            detail: detail.into(),
        });
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_ms,kind,detail\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.t_ms, e.kind, e.detail));
        }
        out
    }

    /// Entries of the wearer-side pipelines only (no transport or
    /// actuation), used to compare live runs against replays.
    pub fn pipeline_csv(&self) -> String {
        const PIPELINE_KINDS: [&str; 5] = [
            "blink_pred",
            "vote_event",
            "hand_toggle",
            "band_run",
            "elbow_command",
        ];
        let mut out = String::from("t_ms,kind,detail\n");
        for e in &self.entries {
            if PIPELINE_KINDS.contains(&e.kind) {
                out.push_str(&format!("{},{},{}\n", e.t_ms, e.kind, e.detail));
            }
        }
        out
    }
}
