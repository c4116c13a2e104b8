//! Scenario files: line-oriented key=value with `[section]` headers. One
//! format covers calibration, EEG and EMG scenarios.
//!
//! ```text
//! [scenario]
//! kind=eeg
//! duration_ms=10000
//!
//! [event]
//! t_ms=2000
//! kind=blink
//! duration_ms=300
//!
//! [fault]
//! t_ms=6000
//! duration_ms=400
//! ```
//!
//! A calibration scenario replaces events with segment lengths:
//!
//! ```text
//! [scenario]
//! kind=calibration
//! rest_ms=5000
//! light_ms=3000
//! strong_ms=3000
//! ```

use super::SimError;
use crate::signal::TimeSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Calibration,
    Eeg,
    Emg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractionLevel {
    Light,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Blink,
    Contraction(ContractionLevel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioEvent {
    pub t_ms: f64,
    pub duration_ms: f64,
    pub kind: EventKind,
}

impl ScenarioEvent {
    pub fn span(&self) -> TimeSpan {
        TimeSpan::new(self.t_ms, self.t_ms + self.duration_ms)
    }
}

/// Rest/light/strong segment lengths for a calibration recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPlan {
    pub rest_ms: f64,
    pub light_ms: f64,
    pub strong_ms: f64,
}

impl CalibrationPlan {
    pub fn total_ms(&self) -> f64 {
        self.rest_ms + self.light_ms + self.strong_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub duration_ms: f64,
    pub events: Vec<ScenarioEvent>,
    /// Scripted poor-quality spans injected into the generated stream.
    pub faults: Vec<TimeSpan>,
    pub calibration: Option<CalibrationPlan>,
}

impl Scenario {
    pub fn eeg(duration_ms: f64, blinks: &[(f64, f64)]) -> Self {
        Self {
            kind: ScenarioKind::Eeg,
            duration_ms,
            events: blinks
                .iter()
                .map(|&(t_ms, duration_ms)| ScenarioEvent {
                    t_ms,
                    duration_ms,
                    kind: EventKind::Blink,
                })
                .collect(),
            faults: Vec::new(),
            calibration: None,
        }
    }

    pub fn emg(duration_ms: f64, contractions: &[(f64, f64, ContractionLevel)]) -> Self {
        Self {
            kind: ScenarioKind::Emg,
            duration_ms,
            events: contractions
                .iter()
                .map(|&(t_ms, duration_ms, level)| ScenarioEvent {
                    t_ms,
                    duration_ms,
                    kind: EventKind::Contraction(level),
                })
                .collect(),
            faults: Vec::new(),
            calibration: None,
        }
    }

    pub fn calibration(plan: CalibrationPlan) -> Self {
        Self {
            kind: ScenarioKind::Calibration,
            duration_ms: plan.total_ms(),
            events: Vec::new(),
            faults: Vec::new(),
            calibration: Some(plan),
        }
    }

    pub fn blink_intervals(&self) -> Vec<TimeSpan> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Blink)
            .map(|e| e.span())
            .collect()
    }

    /// Events must be sorted, non-overlapping and inside the duration.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.kind == ScenarioKind::Calibration {
            let plan = self.calibration.ok_or_else(|| SimError::Scenario {
                line: 0,
                message: "calibration scenario missing segment lengths".into(),
            })?;
            if plan.rest_ms <= 0.0 || plan.light_ms <= 0.0 || plan.strong_ms <= 0.0 {
                return Err(SimError::Scenario {
                    line: 0,
                    message: "calibration segments must be positive".into(),
                });
            }
            return Ok(());
        }
        let mut prev_end = f64::NEG_INFINITY;
        for event in &self.events {
            if event.duration_ms <= 0.0 {
                return Err(SimError::Scenario {
                    line: 0,
                    message: format!("event at {} ms has non-positive duration", event.t_ms),
                });
            }
            if event.t_ms < prev_end {
                return Err(SimError::Scenario {
                    line: 0,
                    message: format!("event at {} ms overlaps the previous event", event.t_ms),
                });
            }
            if event.t_ms + event.duration_ms > self.duration_ms {
                return Err(SimError::Scenario {
                    line: 0,
                    message: format!("event at {} ms runs past the scenario end", event.t_ms),
                });
            }
            let expected = match self.kind {
                ScenarioKind::Eeg => matches!(event.kind, EventKind::Blink),
                ScenarioKind::Emg => matches!(event.kind, EventKind::Contraction(_)),
                ScenarioKind::Calibration => false,
            };
            if !expected {
                return Err(SimError::Scenario {
                    line: 0,
                    message: format!("event kind at {} ms does not match scenario kind", event.t_ms),
                });
            }
            prev_end = event.t_ms + event.duration_ms;
        }
        Ok(())
    }

    pub fn write_to_string(&self) -> String {
        let mut out = String::from("[scenario]\n");
        out.push_str(&format!(
            "kind={}\n",
            match self.kind {
                ScenarioKind::Calibration => "calibration",
                ScenarioKind::Eeg => "eeg",
                ScenarioKind::Emg => "emg",
            }
        ));
        if let Some(plan) = &self.calibration {
            out.push_str(&format!("rest_ms={}\n", plan.rest_ms));
            out.push_str(&format!("light_ms={}\n", plan.light_ms));
            out.push_str(&format!("strong_ms={}\n", plan.strong_ms));
        } else {
            out.push_str(&format!("duration_ms={}\n", self.duration_ms));
        }
        for event in &self.events {
            out.push_str("\n[event]\n");
            out.push_str(&format!("t_ms={}\n", event.t_ms));
            out.push_str(&format!(
                "kind={}\n",
                match event.kind {
                    EventKind::Blink => "blink",
                    EventKind::Contraction(ContractionLevel::Light) => "light",
                    EventKind::Contraction(ContractionLevel::Strong) => "strong",
                }
            ));
            out.push_str(&format!("duration_ms={}\n", event.duration_ms));
        }
        for fault in &self.faults {
            out.push_str("\n[fault]\n");
            out.push_str(&format!("t_ms={}\n", fault.start_ms));
            out.push_str(&format!("duration_ms={}\n", fault.end_ms - fault.start_ms));
        }
        out
    }

    pub fn parse_str(text: &str) -> Result<Self, SimError> {
        #[derive(Default)]
        struct Section {
            name: String,
            line: usize,
            entries: Vec<(usize, String, String)>,
        }
        let mut sections: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                sections.push(Section {
                    name: name.to_string(),
                    line: line_no,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| SimError::Scenario {
                line: line_no,
                message: "expected key=value".into(),
            })?;
            let section = sections.last_mut().ok_or_else(|| SimError::Scenario {
                line: line_no,
                message: "key=value before any [section]".into(),
            })?;
            section
                .entries
                .push((line_no, key.trim().to_string(), value.trim().to_string()));
        }

        fn get_f64(section: &Section, key: &str) -> Result<f64, SimError> {
            let (line, _, value) = section
                .entries
                .iter()
                .find(|(_, k, _)| k == key)
                .ok_or_else(|| SimError::Scenario {
                    line: section.line,
                    message: format!("[{}] missing key '{key}'", section.name),
                })?;
            value.parse().map_err(|_| SimError::Scenario {
                line: *line,
                message: format!("bad value '{value}' for {key}"),
            })
        }
        fn get_str<'a>(section: &'a Section, key: &str) -> Result<(usize, &'a str), SimError> {
            section
                .entries
                .iter()
                .find(|(_, k, _)| k == key)
                .map(|(line, _, v)| (*line, v.as_str()))
                .ok_or_else(|| SimError::Scenario {
                    line: section.line,
                    message: format!("[{}] missing key '{key}'", section.name),
                })
        }

        let header = sections
            .iter()
            .find(|s| s.name == "scenario")
            .ok_or_else(|| SimError::Scenario {
                line: 0,
                message: "missing [scenario] section".into(),
            })?;
        let (kind_line, kind_str) = get_str(header, "kind")?;
        let kind = match kind_str {
            "calibration" => ScenarioKind::Calibration,
            "eeg" => ScenarioKind::Eeg,
            "emg" => ScenarioKind::Emg,
            other => {
                return Err(SimError::Scenario {
                    line: kind_line,
                    message: format!("unknown scenario kind '{other}'"),
                })
            }
        };

        let mut scenario = match kind {
            ScenarioKind::Calibration => Scenario::calibration(CalibrationPlan {
                rest_ms: get_f64(header, "rest_ms")?,
                light_ms: get_f64(header, "light_ms")?,
                strong_ms: get_f64(header, "strong_ms")?,
            }),
            _ => Scenario {
                kind,
                duration_ms: get_f64(header, "duration_ms")?,
                events: Vec::new(),
                faults: Vec::new(),
                calibration: None,
            },
        };

        for section in &sections {
            match section.name.as_str() {
                "scenario" => {}
                "event" => {
                    let (line, kind_str) = get_str(section, "kind")?;
                    let kind = match kind_str {
                        "blink" => EventKind::Blink,
                        "light" => EventKind::Contraction(ContractionLevel::Light),
                        "strong" => EventKind::Contraction(ContractionLevel::Strong),
                        other => {
                            return Err(SimError::Scenario {
                                line,
                                message: format!("unknown event kind '{other}'"),
                            })
                        }
                    };
                    scenario.events.push(ScenarioEvent {
                        t_ms: get_f64(section, "t_ms")?,
                        duration_ms: get_f64(section, "duration_ms")?,
                        kind,
                    });
                }
                "fault" => {
                    let t = get_f64(section, "t_ms")?;
                    let d = get_f64(section, "duration_ms")?;
                    scenario.faults.push(TimeSpan::new(t, t + d));
                }
                other => {
                    return Err(SimError::Scenario {
                        line: section.line,
                        message: format!("unknown section [{other}]"),
                    })
                }
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn read_from_path<P: AsRef<std::path::Path>>(path: P) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(e.to_string()))?;
        Self::parse_str(&text)
    }
}
