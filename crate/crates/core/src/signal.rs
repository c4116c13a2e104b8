//! Sample representation, quality gating, the causal exponential-smoothing
//! low-pass filter, and sliding-window framing.

use std::f64::consts::PI;

use thiserror::Error;

/// Amplitudes are normalized into this symmetric range; anything outside is
/// treated as sensor saturation and gated like a poor-quality sample.
pub const AMPLITUDE_LIMIT: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("frequency must be positive and finite, got {0}")]
    InvalidFrequency(f64),
    #[error("non-finite sample value")]
    NonFiniteInput,
}

/// Per-sample quality flag as reported by the acquisition side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quality {
    Good,
    Poor,
    Missing,
}

impl Quality {
    /// Worse of two flags, where Missing > Poor > Good.
    pub fn worst(self, other: Quality) -> Quality {
        use Quality::*;
        match (self, other) {
            (Missing, _) | (_, Missing) => Missing,
            (Poor, _) | (_, Poor) => Poor,
            _ => Good,
        }
    }
}

/// One timestamped biosignal sample (EEG or EMG envelope).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedSample {
    pub t_ms: f64,
    pub value: f64,
    pub quality: Quality,
}

impl TimedSample {
    pub fn good(t_ms: f64, value: f64) -> Self {
        Self {
            t_ms,
            value,
            quality: Quality::Good,
        }
    }

    /// Quality after the saturation check: out-of-range amplitudes are
    /// downgraded to Poor even when flagged Good upstream.
    pub fn effective_quality(&self) -> Quality {
        if self.quality == Quality::Good
            && (!self.value.is_finite() || self.value.abs() > AMPLITUDE_LIMIT)
        {
            Quality::Poor
        } else {
            self.quality
        }
    }

    pub fn is_usable(&self) -> bool {
        self.effective_quality() == Quality::Good
    }
}

/// Half-open time interval `[start_ms, end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpan {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl TimeSpan {
    pub fn new(start_ms: f64, end_ms: f64) -> Self {
        Self { start_ms, end_ms }
    }

    pub fn contains(&self, t_ms: f64) -> bool {
        t_ms >= self.start_ms && t_ms < self.end_ms
    }

    pub fn intersects(&self, other: &TimeSpan) -> bool {
        self.start_ms < other.end_ms && other.start_ms < self.end_ms
    }
}

/// Smoothing coefficient for a first-order IIR low-pass at cutoff `fc_hz`
/// sampled at `fs_hz`: `alpha = dt / (tau + dt)` with `tau = 1/(2*pi*fc)`.
pub fn compute_alpha(fc_hz: f64, fs_hz: f64) -> Result<f64, SignalError> {
    if !(fc_hz.is_finite() && fc_hz > 0.0) {
        return Err(SignalError::InvalidFrequency(fc_hz));
    }
    if !(fs_hz.is_finite() && fs_hz > 0.0) {
        return Err(SignalError::InvalidFrequency(fs_hz));
    }
    let dt = 1.0 / fs_hz;
    let tau = 1.0 / (2.0 * PI * fc_hz);
    Ok(dt / (tau + dt))
}

/// First-order exponential-smoothing low-pass filter,
/// `y[n] = alpha*x[n] + (1-alpha)*y[n-1]`.
///
/// The state is seeded with the first input sample, so there is no startup
/// transient toward zero.
#[derive(Debug, Clone)]
pub struct LowPassFilter {
    alpha: f64,
    fc_hz: f64,
    fs_hz: f64,
    y_prev: Option<f64>,
}

impl LowPassFilter {
    pub fn new(fc_hz: f64, fs_hz: f64) -> Result<Self, SignalError> {
        Ok(Self {
            alpha: compute_alpha(fc_hz, fs_hz)?,
            fc_hz,
            fs_hz,
            y_prev: None,
        })
    }

    /// Filter with an explicit coefficient; used where the caller works in
    /// normalized units rather than frequencies.
    pub fn with_alpha(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
        Self {
            alpha,
            fc_hz: f64::NAN,
            fs_hz: f64::NAN,
            y_prev: None,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_cutoff(&mut self, fc_hz: f64) -> Result<(), SignalError> {
        self.alpha = compute_alpha(fc_hz, self.fs_hz)?;
        self.fc_hz = fc_hz;
        Ok(())
    }

    pub fn set_sample_rate(&mut self, fs_hz: f64) -> Result<(), SignalError> {
        self.alpha = compute_alpha(self.fc_hz, fs_hz)?;
        self.fs_hz = fs_hz;
        Ok(())
    }

    /// Advance the filter by one sample and return `y[n]`.
    ///
    /// A non-finite input is rejected and leaves the state unchanged.
    pub fn step(&mut self, x: f64) -> Result<f64, SignalError> {
        if !x.is_finite() {
            return Err(SignalError::NonFiniteInput);
        }
        let y = match self.y_prev {
            None => x,
            Some(prev) => self.alpha * x + (1.0 - self.alpha) * prev,
        };
        self.y_prev = Some(y);
        Ok(y)
    }

    pub fn output(&self) -> Option<f64> {
        self.y_prev
    }

    pub fn reset(&mut self) {
        self.y_prev = None;
    }
}

/// Window label used for training and event scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Blink,
    Rest,
    Unlabeled,
}

/// Fixed-length frame vector cut from a stream, with provenance for the
/// central frame used when labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    pub frames: Vec<f64>,
    /// Index of the first frame in the source stream.
    pub start_index: usize,
    /// Position of the central frame within the window, `window_len / 2`.
    pub central_index: usize,
    /// Time span of the central frame.
    pub central_span: TimeSpan,
    pub label: Label,
    /// Set when any frame in the window was Poor, Missing or saturated.
    /// Excluded windows must never reach a classifier.
    pub excluded: bool,
}

impl SignalWindow {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Cut sliding windows of `window_len` frames advanced by `hop` from a frame
/// stream. Produces `floor((n - window_len)/hop) + 1` windows; an input
/// shorter than one window yields none.
pub fn make_windows(samples: &[TimedSample], window_len: usize, hop: usize) -> Vec<SignalWindow> {
    assert!(window_len >= 1, "window_len must be at least 1");
    assert!(hop >= 1, "hop must be at least 1");
    let n = samples.len();
    if n < window_len {
        return Vec::new();
    }
    let count = (n - window_len) / hop + 1;
    let central = window_len / 2;
    let mut windows = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * hop;
        let slice = &samples[start..start + window_len];
        let excluded = slice.iter().any(|s| !s.is_usable());
        let c = start + central;
        let span_end = if c + 1 < n {
            samples[c + 1].t_ms
        } else if c > 0 {
            samples[c].t_ms + (samples[c].t_ms - samples[c - 1].t_ms)
        } else {
            samples[c].t_ms
        };
        windows.push(SignalWindow {
            frames: slice.iter().map(|s| s.value).collect(),
            start_index: start,
            central_index: central,
            central_span: TimeSpan::new(samples[c].t_ms, span_end),
            label: Label::Unlabeled,
            excluded,
        });
    }
    windows
}

/// A window is Blink when its central frame's time span intersects any of
/// the given blink intervals, Rest otherwise.
pub fn label_window(window: &SignalWindow, events: &[TimeSpan]) -> Label {
    if events.iter().any(|e| window.central_span.intersects(e)) {
        Label::Blink
    } else {
        Label::Rest
    }
}

/// Streaming aggregator that reduces a filtered sample stream into
/// fixed-duration frames (block mean, worst quality, block start time).
///
/// Blocks are aligned to absolute multiples of `frame_ms`; a block is
/// emitted when the first sample of a later block arrives, so a trailing
/// partial block is dropped. This matches between live, replay and offline
/// processing of the same stream.
#[derive(Debug, Clone)]
pub struct FrameAggregator {
    frame_ms: f64,
    block: Option<BlockAcc>,
}

#[derive(Debug, Clone)]
struct BlockAcc {
    index: i64,
    sum: f64,
    count: usize,
    quality: Quality,
}

impl FrameAggregator {
    pub fn new(frame_ms: f64) -> Self {
        assert!(frame_ms > 0.0, "frame_ms must be positive");
        Self {
            frame_ms,
            block: None,
        }
    }

    pub fn frame_ms(&self) -> f64 {
        self.frame_ms
    }

    /// Feed one sample; returns a completed frame when a block boundary was
    /// crossed.
    pub fn push(&mut self, sample: TimedSample) -> Option<TimedSample> {
        let index = (sample.t_ms / self.frame_ms).floor() as i64;
        let quality = sample.effective_quality();
        let mut emitted = None;
        match &mut self.block {
            Some(acc) if acc.index == index => {
                if quality != Quality::Missing {
                    acc.sum += sample.value;
                    acc.count += 1;
                }
                acc.quality = acc.quality.worst(quality);
                return None;
            }
            Some(acc) => {
                emitted = Some(Self::finish(acc, self.frame_ms));
            }
            None => {}
        }
        self.block = Some(BlockAcc {
            index,
            sum: if quality != Quality::Missing {
                sample.value
            } else {
                0.0
            },
            count: usize::from(quality != Quality::Missing),
            quality,
        });
        emitted
    }

    fn finish(acc: &BlockAcc, frame_ms: f64) -> TimedSample {
        let value = if acc.count > 0 {
            acc.sum / acc.count as f64
        } else {
            0.0
        };
        TimedSample {
            t_ms: acc.index as f64 * frame_ms,
            value,
            quality: acc.quality,
        }
    }
}
