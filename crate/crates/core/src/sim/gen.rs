//! Synthetic EEG and EMG stream generators.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use super::config::SimConfig;
use super::scenario::{CalibrationPlan, ContractionLevel, EventKind, Scenario, ScenarioKind};
use super::SimError;
use crate::signal::{Quality, TimedSample};

/// Normalized double-exponential blink transient, scaled so its peak is 1.
fn blink_shape(t_ms: f64, tau_rise: f64, tau_fall: f64) -> f64 {
    if t_ms < 0.0 {
        return 0.0;
    }
    let g = (-t_ms / tau_fall).exp() - (-t_ms / tau_rise).exp();
    // Peak of g at t* = tr*tf/(tf-tr) * ln(tf/tr).
    let t_peak = tau_rise * tau_fall / (tau_fall - tau_rise) * (tau_fall / tau_rise).ln();
    let g_max = (-t_peak / tau_fall).exp() - (-t_peak / tau_rise).exp();
    g / g_max
}

fn apply_faults(samples: &mut [TimedSample], faults: &[crate::signal::TimeSpan]) {
    for sample in samples {
        if faults.iter().any(|f| f.contains(sample.t_ms)) {
            sample.quality = Quality::Poor;
        }
    }
}

/// Baseline Gaussian noise plus a normalized double-exponential transient of
/// peak `blink_amplitude` inside each scheduled blink interval. Scripted
/// fault spans are flagged Poor. Deterministic for a given seed.
pub fn gen_eeg(
    cfg: &SimConfig,
    scenario: &Scenario,
    seed: u64,
) -> Result<Vec<TimedSample>, SimError> {
    if scenario.kind != ScenarioKind::Eeg {
        return Err(SimError::Scenario {
            line: 0,
            message: "gen_eeg requires an eeg scenario".into(),
        });
    }
    scenario.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cfg.eeg_noise_sigma).expect("sigma must be non-negative");
    let n = (scenario.duration_ms / 1000.0 * cfg.eeg_fs_hz).floor() as usize;
    let dt = 1000.0 / cfg.eeg_fs_hz;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let mut value = noise.sample(&mut rng);
        for event in &scenario.events {
            if let EventKind::Blink = event.kind {
                if t >= event.t_ms && t < event.t_ms + event.duration_ms {
                    value += cfg.blink_amplitude
                        * blink_shape(t - event.t_ms, cfg.blink_tau_rise_ms, cfg.blink_tau_fall_ms);
                }
            }
        }
        samples.push(TimedSample::good(t, value));
    }
    apply_faults(&mut samples, &scenario.faults);
    Ok(samples)
}

fn ramp_profile(t: f64, start: f64, end: f64, ramp_ms: f64) -> f64 {
    // 0 before the event, 1 on the plateau, linear ramps at both edges.
    if t < start || t >= end + ramp_ms {
        0.0
    } else if t < start + ramp_ms {
        (t - start) / ramp_ms
    } else if t < end {
        1.0
    } else {
        1.0 - (t - end) / ramp_ms
    }
}

fn level_value(cfg: &SimConfig, level: ContractionLevel) -> f64 {
    match level {
        ContractionLevel::Light => cfg.emg_light_level,
        ContractionLevel::Strong => cfg.emg_strong_level,
    }
}

/// Envelope plateaus at the scheduled contraction levels with linear ramps,
/// plus Gaussian noise, clamped non-negative.
pub fn gen_emg(
    cfg: &SimConfig,
    scenario: &Scenario,
    seed: u64,
) -> Result<Vec<TimedSample>, SimError> {
    if scenario.kind != ScenarioKind::Emg {
        return Err(SimError::Scenario {
            line: 0,
            message: "gen_emg requires an emg scenario".into(),
        });
    }
    scenario.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cfg.emg_noise_sigma).expect("sigma must be non-negative");
    let n = (scenario.duration_ms / 1000.0 * cfg.emg_fs_hz).floor() as usize;
    let dt = 1000.0 / cfg.emg_fs_hz;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let mut value = cfg.emg_rest_level;
        for event in &scenario.events {
            if let EventKind::Contraction(level) = event.kind {
                let weight = ramp_profile(
                    t,
                    event.t_ms,
                    event.t_ms + event.duration_ms,
                    cfg.emg_ramp_ms,
                );
                value += weight * (level_value(cfg, level) - cfg.emg_rest_level);
            }
        }
        value += noise.sample(&mut rng);
        samples.push(TimedSample::good(t, value.max(0.0)));
    }
    apply_faults(&mut samples, &scenario.faults);
    Ok(samples)
}

/// Calibration stream: rest, then light, then strong segments with ramps,
/// returned together with the sample index ranges of the three plateaus
/// (ramp-contaminated edges excluded).
pub struct CalibrationStream {
    pub samples: Vec<TimedSample>,
    pub rest_range: std::ops::Range<usize>,
    pub light_range: std::ops::Range<usize>,
    pub strong_range: std::ops::Range<usize>,
}

pub fn gen_calibration(
    cfg: &SimConfig,
    plan: &CalibrationPlan,
    seed: u64,
) -> Result<CalibrationStream, SimError> {
    if plan.rest_ms <= 0.0 || plan.light_ms <= 0.0 || plan.strong_ms <= 0.0 {
        return Err(SimError::Scenario {
            line: 0,
            message: "calibration segments must be positive".into(),
        });
    }
    let light_start = plan.rest_ms;
    let strong_start = plan.rest_ms + plan.light_ms;
    let total = plan.total_ms();
    let scenario = Scenario {
        kind: ScenarioKind::Emg,
        duration_ms: total,
        events: vec![
            super::scenario::ScenarioEvent {
                t_ms: light_start,
                duration_ms: plan.light_ms - cfg.emg_ramp_ms,
                kind: EventKind::Contraction(ContractionLevel::Light),
            },
            super::scenario::ScenarioEvent {
                t_ms: strong_start,
                duration_ms: plan.strong_ms - cfg.emg_ramp_ms,
                kind: EventKind::Contraction(ContractionLevel::Strong),
            },
        ],
        faults: Vec::new(),
        calibration: None,
    };
    let samples = gen_emg(cfg, &scenario, seed)?;
    let dt = 1000.0 / cfg.emg_fs_hz;
    let len = samples.len();
    let idx = |t_ms: f64| ((t_ms / dt).ceil() as usize).min(len);
    let margin = cfg.emg_ramp_ms * 2.0;
    Ok(CalibrationStream {
        rest_range: 0..idx(plan.rest_ms),
        light_range: idx(light_start + margin)..idx(strong_start - cfg.emg_ramp_ms),
        strong_range: idx(strong_start + margin)..idx(total - cfg.emg_ramp_ms),
        samples,
    })
}
