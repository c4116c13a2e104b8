//! Session CSV files: a `#`-prefixed key=value metadata header followed by
//! one row per sample.
//!
//! ```text
//! # participant_id=P01
//! # date_time=2025-01-01T00:00:00
//! # headset_config=sim-eeg-128hz
//! # electrode_placement=forehead
//! # cal_t1=0.3
//! t_ms,channel,raw_value,quality,label
//! 0,EEG,0.125,good,rest
//! ```
//!
//! Floats are written with the shortest representation that parses back to
//! the same value, so export -> parse -> export is byte-identical.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::signal::{Label, Quality, TimedSample};

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no usable rows in session")]
    Empty,
    #[error("line {line}: rows not sorted by t_ms within channel {channel}")]
    Unsorted { line: usize, channel: Channel },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SessionError {
    fn from(err: std::io::Error) -> Self {
        SessionError::Io(err.to_string())
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> SessionError {
    SessionError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Eeg,
    Emg,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Eeg => write!(f, "EEG"),
            Channel::Emg => write!(f, "EMG"),
        }
    }
}

/// Row label vocabulary; `None` marks unlabeled rows (all EMG rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowLabel {
    Blink,
    Rest,
    None,
}

impl RowLabel {
    pub fn to_label(self) -> Label {
        match self {
            RowLabel::Blink => Label::Blink,
            RowLabel::Rest => Label::Rest,
            RowLabel::None => Label::Unlabeled,
        }
    }
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowLabel::Blink => write!(f, "blink"),
            RowLabel::Rest => write!(f, "rest"),
            RowLabel::None => write!(f, "none"),
        }
    }
}

fn quality_str(q: Quality) -> &'static str {
    match q {
        Quality::Good => "good",
        Quality::Poor => "poor",
        Quality::Missing => "missing",
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionRow {
    pub t_ms: f64,
    pub channel: Channel,
    pub raw_value: f64,
    pub quality: Quality,
    pub label: RowLabel,
}

impl SessionRow {
    pub fn to_sample(&self) -> TimedSample {
        TimedSample {
            t_ms: self.t_ms,
            value: self.raw_value,
            quality: self.quality,
        }
    }
}

/// Session metadata block. Calibration entries keep their file order so a
/// round trip preserves bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionMeta {
    pub participant_id: String,
    pub date_time: String,
    pub headset_config: String,
    pub electrode_placement: String,
    pub calibration: Vec<(String, String)>,
}

impl Default for SessionMeta {
    fn default() -> Self {
        Self {
            participant_id: "SIM".into(),
            date_time: "2025-01-01T00:00:00".into(),
            headset_config: "sim".into(),
            electrode_placement: "forehead".into(),
            calibration: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub meta: SessionMeta,
    pub rows: Vec<SessionRow>,
}

const HEADER_ROW: &str = "t_ms,channel,raw_value,quality,label";

impl SessionRecord {
    pub fn new(meta: SessionMeta, rows: Vec<SessionRow>) -> Self {
        Self { meta, rows }
    }

    /// Rows of one channel as samples.
    pub fn samples(&self, channel: Channel) -> Vec<TimedSample> {
        self.rows
            .iter()
            .filter(|r| r.channel == channel)
            .map(|r| r.to_sample())
            .collect()
    }

    /// Maximal runs of consecutive rows labeled blink on the EEG channel,
    /// as half-open time intervals. A run extending to the end of the
    /// stream is closed using the last inter-row spacing.
    pub fn blink_intervals(&self) -> Vec<crate::signal::TimeSpan> {
        let rows: Vec<&SessionRow> = self
            .rows
            .iter()
            .filter(|r| r.channel == Channel::Eeg)
            .collect();
        let mut intervals = Vec::new();
        let mut start: Option<f64> = None;
        for row in &rows {
            match (row.label == RowLabel::Blink, start) {
                (true, None) => start = Some(row.t_ms),
                (false, Some(s)) => {
                    intervals.push(crate::signal::TimeSpan::new(s, row.t_ms));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            let last = rows.last().expect("a run implies at least one row");
            let dt = if rows.len() >= 2 {
                last.t_ms - rows[rows.len() - 2].t_ms
            } else {
                0.0
            };
            intervals.push(crate::signal::TimeSpan::new(s, last.t_ms + dt));
        }
        intervals
    }

    pub fn write_to_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# participant_id={}\n", self.meta.participant_id));
        out.push_str(&format!("# date_time={}\n", self.meta.date_time));
        out.push_str(&format!("# headset_config={}\n", self.meta.headset_config));
        out.push_str(&format!(
            "# electrode_placement={}\n",
            self.meta.electrode_placement
        ));
        for (key, value) in &self.meta.calibration {
            out.push_str(&format!("# cal_{key}={value}\n"));
        }
        out.push_str(HEADER_ROW);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.t_ms,
                row.channel,
                row.raw_value,
                quality_str(row.quality),
                row.label
            ));
        }
        out
    }

    pub fn write_to_path<P: AsRef<Path>>(&self, path: P) -> Result<(), SessionError> {
        std::fs::write(path, self.write_to_string())?;
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self, SessionError> {
        let mut meta = SessionMeta {
            participant_id: String::new(),
            date_time: String::new(),
            headset_config: String::new(),
            electrode_placement: String::new(),
            calibration: Vec::new(),
        };
        let mut rows = Vec::new();
        let mut saw_header = false;
        let mut last_t: [Option<(f64, usize)>; 2] = [None, None];

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if saw_header {
                    return Err(parse_err(line_no, "metadata after the column header"));
                }
                let rest = rest.trim_start();
                let (key, value) = rest
                    .split_once('=')
                    .ok_or_else(|| parse_err(line_no, "metadata line missing '='"))?;
                match key {
                    "participant_id" => meta.participant_id = value.to_string(),
                    "date_time" => meta.date_time = value.to_string(),
                    "headset_config" => meta.headset_config = value.to_string(),
                    "electrode_placement" => meta.electrode_placement = value.to_string(),
                    other => {
                        if let Some(cal_key) = other.strip_prefix("cal_") {
                            meta.calibration
                                .push((cal_key.to_string(), value.to_string()));
                        } else {
                            return Err(parse_err(
                                line_no,
                                format!("unknown metadata key '{other}'"),
                            ));
                        }
                    }
                }
                continue;
            }
            if !saw_header {
                if line != HEADER_ROW {
                    return Err(parse_err(
                        line_no,
                        format!("expected column header '{HEADER_ROW}'"),
                    ));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(parse_err(
                    line_no,
                    format!("expected 5 fields, got {}", fields.len()),
                ));
            }
            let t_ms: f64 = fields[0]
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad t_ms '{}'", fields[0])))?;
            let channel = match fields[1] {
                "EEG" => Channel::Eeg,
                "EMG" => Channel::Emg,
                other => return Err(parse_err(line_no, format!("bad channel '{other}'"))),
            };
            let raw_value: f64 = fields[2]
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad raw_value '{}'", fields[2])))?;
            let quality = match fields[3] {
                "good" => Quality::Good,
                "poor" => Quality::Poor,
                "missing" => Quality::Missing,
                other => return Err(parse_err(line_no, format!("bad quality '{other}'"))),
            };
            let label = match fields[4] {
                "blink" => RowLabel::Blink,
                "rest" => RowLabel::Rest,
                "none" => RowLabel::None,
                other => return Err(parse_err(line_no, format!("bad label '{other}'"))),
            };
            let slot = &mut last_t[match channel {
                Channel::Eeg => 0,
                Channel::Emg => 1,
            }];
            if let Some((prev, _)) = slot {
                if t_ms <= *prev {
                    return Err(SessionError::Unsorted {
                        line: line_no,
                        channel,
                    });
                }
            }
            *slot = Some((t_ms, line_no));
            rows.push(SessionRow {
                t_ms,
                channel,
                raw_value,
                quality,
                label,
            });
        }
        if !saw_header {
            return Err(parse_err(0, "missing column header"));
        }
        Ok(Self { meta, rows })
    }

    pub fn read_from_path<P: AsRef<Path>>(path: P) -> Result<Self, SessionError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }
}
