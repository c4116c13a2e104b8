//! Simulation configuration: every tunable parameter of the pipelines,
//! link and generators, persisted per run as line-oriented key=value text.

use super::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    /// Simulation tick in milliseconds.
    pub tick_ms: f64,

    // EEG pipeline
    pub eeg_fs_hz: f64,
    pub frame_ms: f64,
    pub window_len: usize,
    pub hop: usize,
    pub vote_capacity: usize,
    pub vote_threshold: f64,
    pub refractory_windows: u32,
    pub fc_eeg_hz: f64,

    // EMG pipeline
    pub emg_fs_hz: f64,
    pub emg_frame_hz: f64,
    pub persistence_frames: u32,
    pub fc_emg_hz: f64,
    pub alpha_margin: f64,
    pub beta_margin: f64,
    pub elbow_step_deg: f64,

    // Link and safety
    pub loss_probability: f64,
    pub ack_timeout_ms: u64,
    pub watchdog_ms: u64,
    pub eeg_link_delay_ms: f64,
    pub emg_link_delay_ms: f64,
    pub command_link_delay_ms: f64,

    // Generators
    pub eeg_noise_sigma: f64,
    pub blink_amplitude: f64,
    pub blink_tau_rise_ms: f64,
    pub blink_tau_fall_ms: f64,
    pub emg_noise_sigma: f64,
    pub emg_ramp_ms: f64,
    pub emg_rest_level: f64,
    pub emg_light_level: f64,
    pub emg_strong_level: f64,

    // Fallback detector
    pub heuristic_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            tick_ms: 1.0,
            eeg_fs_hz: 128.0,
            frame_ms: 50.0,
            window_len: 6,
            hop: 1,
            vote_capacity: 8,
            vote_threshold: 0.6,
            refractory_windows: 8,
            fc_eeg_hz: 10.0,
            emg_fs_hz: 200.0,
            emg_frame_hz: 40.0,
            persistence_frames: 8,
            fc_emg_hz: 25.0,
            alpha_margin: 0.5,
            beta_margin: 0.5,
            elbow_step_deg: 15.0,
            loss_probability: 0.0,
            ack_timeout_ms: 100,
            watchdog_ms: 2000,
            eeg_link_delay_ms: 10.0,
            emg_link_delay_ms: 250.0,
            command_link_delay_ms: 8.0,
            eeg_noise_sigma: 0.5,
            blink_amplitude: 2.5,
            blink_tau_rise_ms: 20.0,
            blink_tau_fall_ms: 80.0,
            emg_noise_sigma: 0.02,
            emg_ramp_ms: 100.0,
            emg_rest_level: 0.1,
            emg_light_level: 0.45,
            emg_strong_level: 0.85,
            heuristic_threshold: 1.1,
        }
    }
}

impl SimConfig {
    pub fn emg_frame_ms(&self) -> f64 {
        1000.0 / self.emg_frame_hz
    }

    /// Stable key order, so persisted configs are byte-reproducible.
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", self.seed.to_string()),
            ("tick_ms", self.tick_ms.to_string()),
            ("eeg_fs_hz", self.eeg_fs_hz.to_string()),
            ("frame_ms", self.frame_ms.to_string()),
            ("window_len", self.window_len.to_string()),
            ("hop", self.hop.to_string()),
            ("vote_capacity", self.vote_capacity.to_string()),
            ("vote_threshold", self.vote_threshold.to_string()),
            ("refractory_windows", self.refractory_windows.to_string()),
            ("fc_eeg_hz", self.fc_eeg_hz.to_string()),
            ("emg_fs_hz", self.emg_fs_hz.to_string()),
            ("emg_frame_hz", self.emg_frame_hz.to_string()),
            ("persistence_frames", self.persistence_frames.to_string()),
            ("fc_emg_hz", self.fc_emg_hz.to_string()),
            ("alpha_margin", self.alpha_margin.to_string()),
            ("beta_margin", self.beta_margin.to_string()),
            ("elbow_step_deg", self.elbow_step_deg.to_string()),
            ("loss_probability", self.loss_probability.to_string()),
            ("ack_timeout_ms", self.ack_timeout_ms.to_string()),
            ("watchdog_ms", self.watchdog_ms.to_string()),
            ("eeg_link_delay_ms", self.eeg_link_delay_ms.to_string()),
            ("emg_link_delay_ms", self.emg_link_delay_ms.to_string()),
            (
                "command_link_delay_ms",
                self.command_link_delay_ms.to_string(),
            ),
            ("eeg_noise_sigma", self.eeg_noise_sigma.to_string()),
            ("blink_amplitude", self.blink_amplitude.to_string()),
            ("blink_tau_rise_ms", self.blink_tau_rise_ms.to_string()),
            ("blink_tau_fall_ms", self.blink_tau_fall_ms.to_string()),
            ("emg_noise_sigma", self.emg_noise_sigma.to_string()),
            ("emg_ramp_ms", self.emg_ramp_ms.to_string()),
            ("emg_rest_level", self.emg_rest_level.to_string()),
            ("emg_light_level", self.emg_light_level.to_string()),
            ("emg_strong_level", self.emg_strong_level.to_string()),
            ("heuristic_threshold", self.heuristic_threshold.to_string()),
        ]
    }

    pub fn write_to_string(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.to_key_values() {
            out.push_str(&format!("{key}={value}\n"));
        }
        out
    }

    /// Parse key=value lines over the defaults; unknown keys are errors.
    pub fn parse_str(text: &str) -> Result<Self, SimError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| SimError::Config {
                line: line_no,
                message: "expected key=value".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value).map_err(|message| SimError::Config {
                line: line_no,
                message,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("bad value '{value}' for {key}"))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "tick_ms" => self.tick_ms = num(key, value)?,
            "eeg_fs_hz" => self.eeg_fs_hz = num(key, value)?,
            "frame_ms" => self.frame_ms = num(key, value)?,
            "window_len" => self.window_len = num(key, value)?,
            "hop" => self.hop = num(key, value)?,
            "vote_capacity" => self.vote_capacity = num(key, value)?,
            "vote_threshold" => self.vote_threshold = num(key, value)?,
            "refractory_windows" => self.refractory_windows = num(key, value)?,
            "fc_eeg_hz" => self.fc_eeg_hz = num(key, value)?,
            "emg_fs_hz" => self.emg_fs_hz = num(key, value)?,
            "emg_frame_hz" => self.emg_frame_hz = num(key, value)?,
            "persistence_frames" => self.persistence_frames = num(key, value)?,
            "fc_emg_hz" => self.fc_emg_hz = num(key, value)?,
            "alpha_margin" => self.alpha_margin = num(key, value)?,
            "beta_margin" => self.beta_margin = num(key, value)?,
            "elbow_step_deg" => self.elbow_step_deg = num(key, value)?,
            "loss_probability" => self.loss_probability = num(key, value)?,
            "ack_timeout_ms" => self.ack_timeout_ms = num(key, value)?,
            "watchdog_ms" => self.watchdog_ms = num(key, value)?,
            "eeg_link_delay_ms" => self.eeg_link_delay_ms = num(key, value)?,
            "emg_link_delay_ms" => self.emg_link_delay_ms = num(key, value)?,
            "command_link_delay_ms" => self.command_link_delay_ms = num(key, value)?,
            "eeg_noise_sigma" => self.eeg_noise_sigma = num(key, value)?,
            "blink_amplitude" => self.blink_amplitude = num(key, value)?,
            "blink_tau_rise_ms" => self.blink_tau_rise_ms = num(key, value)?,
            "blink_tau_fall_ms" => self.blink_tau_fall_ms = num(key, value)?,
            "emg_noise_sigma" => self.emg_noise_sigma = num(key, value)?,
            "emg_ramp_ms" => self.emg_ramp_ms = num(key, value)?,
            "emg_rest_level" => self.emg_rest_level = num(key, value)?,
            "emg_light_level" => self.emg_light_level = num(key, value)?,
            "emg_strong_level" => self.emg_strong_level = num(key, value)?,
            "heuristic_threshold" => self.heuristic_threshold = num(key, value)?,
            other => return Err(format!("unknown config key '{other}'")),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), SimError> {
        let checks: [(&str, bool); 8] = [
            ("tick_ms", self.tick_ms > 0.0),
            ("eeg_fs_hz", self.eeg_fs_hz > 0.0),
            ("frame_ms", self.frame_ms > 0.0),
            ("window_len", self.window_len >= 1),
            ("hop", self.hop >= 1),
            ("emg_frame_hz", self.emg_frame_hz > 0.0),
            (
                "loss_probability",
                (0.0..=1.0).contains(&self.loss_probability),
            ),
            (
                "vote_threshold",
                self.vote_threshold > 0.0 && self.vote_threshold <= 1.0,
            ),
        ];
        for (key, ok) in checks {
            if !ok {
                return Err(SimError::Config {
                    line: 0,
                    message: format!("invalid value for {key}"),
                });
            }
        }
        Ok(())
    }

    pub fn read_from_path<P: AsRef<std::path::Path>>(path: P) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(e.to_string()))?;
        Self::parse_str(&text)
    }
}
