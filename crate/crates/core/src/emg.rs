//! EMG envelope normalization, two-threshold calibration, three-band
//! classification and the consecutive-frame debounce that emits elbow
//! commands.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EmgError {
    #[error("calibration recording for {0} is empty")]
    EmptyRecording(&'static str),
    #[error("calibration levels not ordered: {lower} ({lower_value}) must be below {upper} ({upper_value})")]
    LevelsNotOrdered {
        lower: &'static str,
        lower_value: f64,
        upper: &'static str,
        upper_value: f64,
    },
    #[error("margin must lie strictly inside (0, 1), got {0}")]
    InvalidMargin(f64),
    #[error("calibration range is degenerate (min == max)")]
    DegenerateRange,
}

/// Activation band derived from the normalized envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Rest,
    Extend,
    Contract,
}

impl Band {
    pub fn is_movement(self) -> bool {
        matches!(self, Band::Extend | Band::Contract)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElbowDirection {
    /// Driven by the mid (Extend) band.
    Extend,
    /// Driven by the high (Contract) band.
    Flex,
}

/// Motion request produced by the debounce stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElbowCommand {
    pub direction: ElbowDirection,
    pub step_deg: f64,
}

/// Default angular step per emitted elbow command.
pub const DEFAULT_ELBOW_STEP_DEG: f64 = 15.0;

/// Session calibration: raw envelope extremes for normalization, the three
/// normalized reference levels, safety margins and the derived thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct EmgCalibration {
    pub raw_min: f64,
    pub raw_max: f64,
    pub e_rest: f64,
    pub e_mid: f64,
    pub e_max: f64,
    pub alpha_margin: f64,
    pub beta_margin: f64,
    pub t1: f64,
    pub t2: f64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

impl EmgCalibration {
    /// Build from already-normalized reference levels. The raw range is the
    /// identity map in this case.
    pub fn from_levels(
        e_rest: f64,
        e_mid: f64,
        e_max: f64,
        alpha_margin: f64,
        beta_margin: f64,
    ) -> Result<Self, EmgError> {
        for margin in [alpha_margin, beta_margin] {
            if !(margin > 0.0 && margin < 1.0) {
                return Err(EmgError::InvalidMargin(margin));
            }
        }
        if e_rest >= e_mid {
            return Err(EmgError::LevelsNotOrdered {
                lower: "rest",
                lower_value: e_rest,
                upper: "mid",
                upper_value: e_mid,
            });
        }
        if e_mid >= e_max {
            return Err(EmgError::LevelsNotOrdered {
                lower: "mid",
                lower_value: e_mid,
                upper: "max",
                upper_value: e_max,
            });
        }
        let t1 = e_rest + alpha_margin * (e_mid - e_rest);
        let t2 = e_mid + beta_margin * (e_max - e_mid);
        Ok(Self {
            raw_min: 0.0,
            raw_max: 1.0,
            e_rest,
            e_mid,
            e_max,
            alpha_margin,
            beta_margin,
            t1,
            t2,
        })
    }

    /// Calibrate from the three raw recordings. The raw extremes over the
    /// whole calibration session define the normalization; the rest level
    /// uses mean plus one standard deviation so the lower threshold sits
    /// above baseline noise.
    pub fn from_recordings(
        rest: &[f64],
        light: &[f64],
        strong: &[f64],
        alpha_margin: f64,
        beta_margin: f64,
    ) -> Result<Self, EmgError> {
        if rest.is_empty() {
            return Err(EmgError::EmptyRecording("rest"));
        }
        if light.is_empty() {
            return Err(EmgError::EmptyRecording("light"));
        }
        if strong.is_empty() {
            return Err(EmgError::EmptyRecording("strong"));
        }
        let all = rest.iter().chain(light).chain(strong);
        let raw_min = all.clone().cloned().fold(f64::INFINITY, f64::min);
        let raw_max = all.cloned().fold(f64::NEG_INFINITY, f64::max);
        if raw_max - raw_min <= f64::EPSILON {
            return Err(EmgError::DegenerateRange);
        }
        let norm = |v: f64| (v - raw_min) / (raw_max - raw_min);
        let rest_n: Vec<f64> = rest.iter().map(|&v| norm(v)).collect();
        let light_n: Vec<f64> = light.iter().map(|&v| norm(v)).collect();
        let strong_n: Vec<f64> = strong.iter().map(|&v| norm(v)).collect();

        let e_rest = mean(&rest_n) + std_dev(&rest_n);
        let e_mid = mean(&light_n);
        let e_max = mean(&strong_n);

        let mut cal = Self::from_levels(e_rest, e_mid, e_max, alpha_margin, beta_margin)?;
        cal.raw_min = raw_min;
        cal.raw_max = raw_max;
        Ok(cal)
    }

    /// Normalize a raw envelope value into [0, 1] using the calibration
    /// extremes, clamping outside values.
    pub fn normalize(&self, raw: f64) -> f64 {
        ((raw - self.raw_min) / (self.raw_max - self.raw_min)).clamp(0.0, 1.0)
    }

    /// Piecewise band rule: Rest below T1, Extend in [T1, T2), Contract at
    /// or above T2.
    pub fn classify_band(&self, e: f64) -> Band {
        if e < self.t1 {
            Band::Rest
        } else if e < self.t2 {
            Band::Extend
        } else {
            Band::Contract
        }
    }

    /// Key=value entries persisted into the per-session configuration.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        vec![
            ("t1".into(), format!("{}", self.t1)),
            ("t2".into(), format!("{}", self.t2)),
            ("alpha_margin".into(), format!("{}", self.alpha_margin)),
            ("beta_margin".into(), format!("{}", self.beta_margin)),
            ("raw_min".into(), format!("{}", self.raw_min)),
            ("raw_max".into(), format!("{}", self.raw_max)),
        ]
    }
}

/// Debounce state: the band must persist for `persistence` consecutive
/// frames before a command fires; the counter saturates after emission so a
/// sustained contraction produces exactly one command per run.
#[derive(Debug, Clone)]
pub struct BandState {
    current: Band,
    counter: u32,
    persistence: u32,
    emitted_for_run: bool,
    /// When set, the counter restarts after each emission so a held band
    /// repeats its command every `persistence` frames.
    repeat: bool,
    step_deg: f64,
}

impl BandState {
    pub fn new(persistence: u32) -> Self {
        Self {
            current: Band::Rest,
            counter: 0,
            persistence,
            emitted_for_run: false,
            repeat: false,
            step_deg: DEFAULT_ELBOW_STEP_DEG,
        }
    }

    pub fn with_repeat(mut self, repeat: bool) -> Self {
        self.repeat = repeat;
        self
    }

    pub fn with_step_deg(mut self, step_deg: f64) -> Self {
        self.step_deg = step_deg;
        self
    }

    pub fn band(&self) -> Band {
        self.current
    }

    pub fn counter(&self) -> u32 {
        self.counter
    }

    /// Advance by one classified frame; returns a command when the
    /// persistence requirement is first met for the current run.
    pub fn update(&mut self, band: Band) -> Option<ElbowCommand> {
        if band != self.current {
            self.current = band;
            self.counter = u32::from(band.is_movement());
            self.emitted_for_run = false;
        } else if band.is_movement() && self.counter < self.persistence {
            self.counter += 1;
        } else if !band.is_movement() {
            self.counter = 0;
        }

        if !band.is_movement() || self.emitted_for_run || self.counter < self.persistence {
            return None;
        }
        if self.repeat {
            self.counter = 0;
        } else {
            self.emitted_for_run = true;
        }
        let direction = match band {
            Band::Extend => ElbowDirection::Extend,
            Band::Contract => ElbowDirection::Flex,
            Band::Rest => unreachable!(),
        };
        Some(ElbowCommand {
            direction,
            step_deg: self.step_deg,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> EmgCalibration {
        EmgCalibration::from_levels(0.1, 0.5, 0.9, 0.5, 0.5).unwrap()
    }

    #[test]
    fn thresholds_from_reference_levels() {
        let c = cal();
        assert!((c.t1 - 0.3).abs() < 1e-12);
        assert!((c.t2 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn equal_levels_are_rejected() {
        let err = EmgCalibration::from_levels(0.5, 0.5, 0.9, 0.5, 0.5).unwrap_err();
        assert!(matches!(err, EmgError::LevelsNotOrdered { lower: "rest", .. }));
        let err = EmgCalibration::from_levels(0.1, 0.9, 0.9, 0.5, 0.5).unwrap_err();
        assert!(matches!(err, EmgError::LevelsNotOrdered { lower: "mid", .. }));
    }

    #[test]
    fn boundary_margins_are_rejected() {
        assert_eq!(
            EmgCalibration::from_levels(0.1, 0.5, 0.9, 0.0, 0.5),
            Err(EmgError::InvalidMargin(0.0))
        );
        assert_eq!(
            EmgCalibration::from_levels(0.1, 0.5, 0.9, 0.5, 1.0),
            Err(EmgError::InvalidMargin(1.0))
        );
    }

    #[test]
    fn normalization_clamps_to_unit_range() {
        let mut c = cal();
        c.raw_min = 0.2;
        c.raw_max = 1.0;
        assert_eq!(c.normalize(1.0), 1.0);
        assert_eq!(c.normalize(0.1), 0.0);
        assert!((c.normalize(0.6) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_raw_range_is_a_calibration_error() {
        let err =
            EmgCalibration::from_recordings(&[0.5, 0.5], &[0.5], &[0.5], 0.5, 0.5).unwrap_err();
        assert_eq!(err, EmgError::DegenerateRange);
    }

    #[test]
    fn empty_recordings_are_rejected() {
        assert_eq!(
            EmgCalibration::from_recordings(&[], &[0.4], &[0.9], 0.5, 0.5),
            Err(EmgError::EmptyRecording("rest"))
        );
    }

    #[test]
    fn recordings_produce_rest_level_above_baseline_noise() {
        let rest: Vec<f64> = (0..100).map(|i| 0.1 + 0.01 * ((i % 5) as f64)).collect();
        let light = vec![0.5; 50];
        let strong = vec![0.9; 50];
        let c = EmgCalibration::from_recordings(&rest, &light, &strong, 0.5, 0.5).unwrap();
        let rest_norm: Vec<f64> = rest.iter().map(|&v| c.normalize(v)).collect();
        let m = rest_norm.iter().sum::<f64>() / rest_norm.len() as f64;
        assert!(c.e_rest > m, "rest level must include the std margin");
        assert!(c.t1 > c.e_rest);
        assert!(c.t2 > c.t1);
    }

    #[test]
    fn band_boundaries_follow_piecewise_rule() {
        let c = cal();
        assert_eq!(c.classify_band(0.0), Band::Rest);
        assert_eq!(c.classify_band(c.t1), Band::Extend);
        assert_eq!(c.classify_band(c.t2), Band::Contract);
        assert_eq!(c.classify_band(c.t1 - 1e-12), Band::Rest);
        assert_eq!(c.classify_band(c.t2 - 1e-12), Band::Extend);
        assert_eq!(c.classify_band(1.0), Band::Contract);
    }

    #[test]
    fn eight_consecutive_contract_frames_fire_once() {
        let mut state = BandState::new(8);
        let mut commands = Vec::new();
        for i in 0..20 {
            if let Some(cmd) = state.update(Band::Contract) {
                commands.push((i, cmd));
            }
        }
        assert_eq!(commands.len(), 1);
        // Frames are 0-based, so the eighth frame is index 7.
        assert_eq!(commands[0].0, 7);
        assert_eq!(commands[0].1.direction, ElbowDirection::Flex);
    }

    #[test]
    fn seven_frames_then_rest_emits_nothing() {
        let mut state = BandState::new(8);
        for _ in 0..7 {
            assert!(state.update(Band::Contract).is_none());
        }
        assert!(state.update(Band::Rest).is_none());
        assert_eq!(state.counter(), 0);
        // A fresh run needs the full persistence again.
        for _ in 0..7 {
            assert!(state.update(Band::Contract).is_none());
        }
        assert!(state.update(Band::Contract).is_some());
    }

    #[test]
    fn alternating_bands_never_fire() {
        let mut state = BandState::new(8);
        for i in 0..1000 {
            let band = if i % 2 == 0 { Band::Extend } else { Band::Contract };
            assert!(state.update(band).is_none());
        }
    }

    #[test]
    fn extend_band_maps_to_extend_direction() {
        let mut state = BandState::new(3);
        state.update(Band::Extend);
        state.update(Band::Extend);
        let cmd = state.update(Band::Extend).unwrap();
        assert_eq!(cmd.direction, ElbowDirection::Extend);
        assert_eq!(cmd.step_deg, DEFAULT_ELBOW_STEP_DEG);
    }

    #[test]
    fn back_to_back_runs_each_fire() {
        let mut state = BandState::new(2);
        state.update(Band::Contract);
        assert!(state.update(Band::Contract).is_some());
        // Direct transition into Extend starts a new run.
        state.update(Band::Extend);
        assert!(state.update(Band::Extend).is_some());
    }

    #[test]
    fn repeat_mode_fires_every_persistence_frames() {
        let mut state = BandState::new(4).with_repeat(true);
        let mut count = 0;
        for _ in 0..16 {
            if state.update(Band::Contract).is_some() {
                count += 1;
            }
        }
        assert_eq!(count, 4);
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    /// Independent run-length oracle: one command per maximal run of at
    /// least `persistence` identical movement-band frames.
    fn run_length_oracle(stream: &[Band], persistence: usize) -> Vec<(usize, Band)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < stream.len() {
            let band = stream[i];
            let mut j = i;
            while j < stream.len() && stream[j] == band {
                j += 1;
            }
            if band.is_movement() && j - i >= persistence {
                out.push((i + persistence - 1, band));
            }
            i = j;
        }
        out
    }

    fn band_strategy() -> impl Strategy<Value = Band> {
        prop_oneof![
            Just(Band::Rest),
            Just(Band::Extend),
            Just(Band::Contract)
        ]
    }

    proptest! {
        #[test]
        fn debounce_matches_run_length_oracle(
            stream in prop::collection::vec(band_strategy(), 0..400),
            persistence in 1u32..12,
        ) {
            let mut state = BandState::new(persistence);
            let emitted: Vec<(usize, Band)> = stream
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| state.update(b).map(|_| (i, b)))
                .collect();
            let expected = run_length_oracle(&stream, persistence as usize);
            prop_assert_eq!(emitted, expected);
        }

        /// Band classification is monotone in the envelope value.
        #[test]
        fn band_is_monotone_in_envelope(
            e_rest in 0.01f64..0.3,
            gap1 in 0.05f64..0.3,
            gap2 in 0.05f64..0.3,
            alpha in 0.05f64..0.95,
            beta in 0.05f64..0.95,
            lo in 0.0f64..1.0,
            hi in 0.0f64..1.0,
        ) {
            let cal = EmgCalibration::from_levels(
                e_rest, e_rest + gap1, e_rest + gap1 + gap2, alpha, beta,
            ).unwrap();
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let rank = |b: Band| match b {
                Band::Rest => 0,
                Band::Extend => 1,
                Band::Contract => 2,
            };
            prop_assert!(rank(cal.classify_band(lo)) <= rank(cal.classify_band(hi)));
        }

        /// T1 grows with the alpha margin and T2 with the beta margin.
        #[test]
        fn thresholds_increase_with_margins(
            e_rest in 0.01f64..0.3,
            gap1 in 0.05f64..0.3,
            gap2 in 0.05f64..0.3,
            m1 in 0.05f64..0.9,
            dm in 0.01f64..0.09,
        ) {
            let (e_mid, e_max) = (e_rest + gap1, e_rest + gap1 + gap2);
            let a = EmgCalibration::from_levels(e_rest, e_mid, e_max, m1, m1).unwrap();
            let b = EmgCalibration::from_levels(e_rest, e_mid, e_max, m1 + dm, m1 + dm).unwrap();
            prop_assert!(b.t1 > a.t1);
            prop_assert!(b.t2 > a.t2);
        }
    }
}
