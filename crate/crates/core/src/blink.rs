//! Real-time blink detection: per-window feature extraction, classifier
//! inference, vote-buffer debouncing and the hand open/close toggle.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::nn::FeedForward;
use crate::signal::{Quality, SignalWindow, TimedSample};

#[derive(Debug, Error)]
pub enum BlinkError {
    #[error("excluded input: window overlaps poor-quality samples")]
    ExcludedWindow,
    #[error("window must contain at least 2 frames, got {0}")]
    WindowTooShort(usize),
    #[error("non-finite feature value")]
    NonFiniteFeature,
    #[error("vote buffer capacity must be at least 1")]
    EmptyVoteBuffer,
    #[error("vote threshold must lie in (0, 1], got {0}")]
    InvalidVoteThreshold(f64),
    #[error("weights file: {0}")]
    WeightsFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Number of per-window statistics in a [`FeatureVector`].
pub const FEATURE_COUNT: usize = 6;

/// Per-window scalar statistics fed to the classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub mean: f64,
    pub std_dev: f64,
    pub rms: f64,
    pub peak_to_peak: f64,
    /// Sign changes between consecutive frames, divided by the number of
    /// transitions (`len - 1`). Always in [0, 1].
    pub zero_crossing_rate: f64,
    pub max_abs_first_difference: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.mean,
            self.std_dev,
            self.rms,
            self.peak_to_peak,
            self.zero_crossing_rate,
            self.max_abs_first_difference,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Deterministic statistics over the window's frames.
///
/// Windows flagged excluded are rejected; they must never reach feature
/// extraction or the classifier.
pub fn extract_features(window: &SignalWindow) -> Result<FeatureVector, BlinkError> {
    if window.excluded {
        return Err(BlinkError::ExcludedWindow);
    }
    let frames = &window.frames;
    let n = frames.len();
    if n < 2 {
        return Err(BlinkError::WindowTooShort(n));
    }
    let nf = n as f64;
    let mean = frames.iter().sum::<f64>() / nf;
    let var = frames.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    let rms = (frames.iter().map(|x| x * x).sum::<f64>() / nf).sqrt();
    let max = frames.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = frames.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut crossings = 0usize;
    let mut max_diff = 0.0f64;
    for pair in frames.windows(2) {
        if pair[0] * pair[1] < 0.0 {
            crossings += 1;
        }
        max_diff = max_diff.max((pair[1] - pair[0]).abs());
    }
    Ok(FeatureVector {
        mean,
        std_dev: var.sqrt(),
        rms,
        peak_to_peak: max - min,
        zero_crossing_rate: crossings as f64 / (nf - 1.0),
        max_abs_first_difference: max_diff,
    })
}

/// Per-feature normalization statistics (z-score), stored alongside the
/// network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNorm {
    pub mean: [f64; FEATURE_COUNT],
    pub scale: [f64; FEATURE_COUNT],
}

impl FeatureNorm {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; FEATURE_COUNT],
            scale: [1.0; FEATURE_COUNT],
        }
    }

    /// Fit mean and scale from raw feature rows; near-constant features get
    /// unit scale so normalization stays well-defined.
    pub fn fit(rows: &[[f64; FEATURE_COUNT]]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut scale = [0.0; FEATURE_COUNT];
        for row in rows {
            for j in 0..FEATURE_COUNT {
                let d = row[j] - mean[j];
                scale[j] += d * d / n;
            }
        }
        for s in &mut scale {
            *s = s.sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Self { mean, scale }
    }

    pub fn apply(&self, raw: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for j in 0..FEATURE_COUNT {
            out[j] = (raw[j] - self.mean[j]) / self.scale[j];
        }
        out
    }
}

const WEIGHTS_MAGIC: &[u8; 8] = b"BARMCLF1";

/// Feature-based blink classifier: normalization statistics plus a
/// single-hidden-layer softmax network over the six window features.
#[derive(Debug, Clone, PartialEq)]
pub struct BlinkClassifier {
    pub net: FeedForward,
    pub norm: FeatureNorm,
}

impl BlinkClassifier {
    pub fn new(net: FeedForward, norm: FeatureNorm) -> Self {
        assert_eq!(net.input, FEATURE_COUNT);
        assert_eq!(net.output, 2);
        Self { net, norm }
    }

    pub fn zeroed(hidden: usize) -> Self {
        Self {
            net: FeedForward::zeroed(FEATURE_COUNT, hidden, 2),
            norm: FeatureNorm::identity(),
        }
    }

    /// Softmax probabilities `(p_blink, p_rest)`.
    pub fn classify(&self, features: &FeatureVector) -> Result<(f64, f64), BlinkError> {
        if !features.is_finite() {
            return Err(BlinkError::NonFiniteFeature);
        }
        let x = self.norm.apply(&features.to_array());
        let p = self.net.probabilities(&x);
        Ok((p[0], p[1]))
    }

    /// Hard decision: blink when `p_blink >= 0.5`.
    pub fn predict(&self, features: &FeatureVector) -> Result<bool, BlinkError> {
        let (p_blink, _) = self.classify(features)?;
        Ok(p_blink >= 0.5)
    }

    /// Serialize to the flat little-endian weights format:
    /// magic, three u32 dimensions (input, hidden, output), then f64 arrays
    /// feature mean, feature scale, w1 (row-major), b1, w2 (row-major), b2.
    pub fn save<W: Write>(&self, mut out: W) -> Result<(), BlinkError> {
        out.write_all(WEIGHTS_MAGIC)?;
        for dim in [self.net.input, self.net.hidden, self.net.output] {
            out.write_all(&(dim as u32).to_le_bytes())?;
        }
        let mut write_f64s = |vals: &[f64]| -> std::io::Result<()> {
            for v in vals {
                out.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        };
        write_f64s(&self.norm.mean)?;
        write_f64s(&self.norm.scale)?;
        write_f64s(&self.net.w1)?;
        write_f64s(&self.net.b1)?;
        write_f64s(&self.net.w2)?;
        write_f64s(&self.net.b2)?;
        Ok(())
    }

    pub fn save_to_path<P: AsRef<Path>>(&self, path: P) -> Result<(), BlinkError> {
        let mut file = std::fs::File::create(path)?;
        self.save(&mut file)
    }

    pub fn load<R: Read>(mut input: R) -> Result<Self, BlinkError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != WEIGHTS_MAGIC {
            return Err(BlinkError::WeightsFormat(format!(
                "bad magic {magic:02x?}"
            )));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut buf = [0u8; 4];
            input.read_exact(&mut buf)?;
            *d = u32::from_le_bytes(buf) as usize;
        }
        let [inp, hidden, out] = dims;
        if inp != FEATURE_COUNT || out != 2 {
            return Err(BlinkError::WeightsFormat(format!(
                "unsupported dimensions {inp}x{hidden}x{out}"
            )));
        }
        let mut read_f64s = |count: usize| -> Result<Vec<f64>, BlinkError> {
            let mut vals = vec![0.0; count];
            for v in &mut vals {
                let mut buf = [0u8; 8];
                input.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
            Ok(vals)
        };
        let mean_v = read_f64s(FEATURE_COUNT)?;
        let scale_v = read_f64s(FEATURE_COUNT)?;
        let w1 = read_f64s(hidden * inp)?;
        let b1 = read_f64s(hidden)?;
        let w2 = read_f64s(out * hidden)?;
        let b2 = read_f64s(out)?;
        let mut mean = [0.0; FEATURE_COUNT];
        mean.copy_from_slice(&mean_v);
        let mut scale = [0.0; FEATURE_COUNT];
        scale.copy_from_slice(&scale_v);
        Ok(Self {
            net: FeedForward {
                input: inp,
                hidden,
                output: out,
                w1,
                b1,
                w2,
                b2,
            },
            norm: FeatureNorm { mean, scale },
        })
    }

    pub fn load_from_path<P: AsRef<Path>>(path: P) -> Result<Self, BlinkError> {
        let file = std::fs::File::open(path)?;
        Self::load(std::io::BufReader::new(file))
    }
}

/// Threshold fallback detector used when no trained weights are available:
/// the window's peak-to-peak amplitude mapped through a logistic curve
/// centred on a configurable threshold.
#[derive(Debug, Clone)]
pub struct HeuristicDetector {
    pub ptp_threshold: f64,
    pub steepness: f64,
}

impl HeuristicDetector {
    pub fn new(ptp_threshold: f64) -> Self {
        Self {
            ptp_threshold,
            steepness: 8.0,
        }
    }

    pub fn classify(&self, features: &FeatureVector) -> Result<(f64, f64), BlinkError> {
        if !features.is_finite() {
            return Err(BlinkError::NonFiniteFeature);
        }
        let margin = features.peak_to_peak / self.ptp_threshold - 1.0;
        let p_blink = 1.0 / (1.0 + (-self.steepness * margin).exp());
        Ok((p_blink, 1.0 - p_blink))
    }
}

/// Either inference backend behind the same probability interface.
#[derive(Debug, Clone)]
pub enum BlinkDetector {
    Network(BlinkClassifier),
    Heuristic(HeuristicDetector),
}

impl BlinkDetector {
    pub fn classify(&self, features: &FeatureVector) -> Result<(f64, f64), BlinkError> {
        match self {
            BlinkDetector::Network(clf) => clf.classify(features),
            BlinkDetector::Heuristic(h) => h.classify(features),
        }
    }
}

/// Ring buffer of the last `capacity` binary predictions. An event fires
/// when the count of blink votes reaches `ceil(threshold * capacity)`.
#[derive(Debug, Clone)]
pub struct VoteBuffer {
    buf: VecDeque<bool>,
    capacity: usize,
    accept_count: usize,
}

impl VoteBuffer {
    pub fn new(capacity: usize, threshold: f64) -> Result<Self, BlinkError> {
        if capacity == 0 {
            return Err(BlinkError::EmptyVoteBuffer);
        }
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(BlinkError::InvalidVoteThreshold(threshold));
        }
        // Small epsilon guards against float error pushing an exact
        // threshold*capacity product above its integer value.
        let accept_count = (threshold * capacity as f64 - 1e-9).ceil() as usize;
        Ok(Self {
            buf: VecDeque::with_capacity(capacity),
            capacity,
            accept_count: accept_count.max(1),
        })
    }

    pub fn accept_count(&self) -> usize {
        self.accept_count
    }

    pub fn blink_votes(&self) -> usize {
        self.buf.iter().filter(|v| **v).count()
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Push one prediction, evicting the oldest when full; returns whether
    /// the buffer now constitutes a blink event.
    pub fn vote(&mut self, y_hat: bool) -> bool {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(y_hat);
        self.blink_votes() >= self.accept_count
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandPosition {
    Open,
    Closed,
}

impl HandPosition {
    pub fn toggled(self) -> Self {
        match self {
            HandPosition::Open => HandPosition::Closed,
            HandPosition::Closed => HandPosition::Open,
        }
    }
}

/// Command emitted when the hand toggles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandCommand {
    pub target: HandPosition,
}

/// Open/closed toggle with a refractory period: after a toggle, further
/// events are ignored for `refractory_windows` processed windows.
#[derive(Debug, Clone)]
pub struct HandState {
    position: HandPosition,
    refractory_windows: u32,
    refractory_remaining: u32,
}

impl HandState {
    pub fn new(refractory_windows: u32) -> Self {
        Self {
            position: HandPosition::Open,
            refractory_windows,
            refractory_remaining: 0,
        }
    }

    pub fn position(&self) -> HandPosition {
        self.position
    }

    pub fn refractory_remaining(&self) -> u32 {
        self.refractory_remaining
    }

    /// Advance by one processed window. The refractory counter decrements
    /// first; a blink event then toggles only when it has reached zero.
    pub fn process_window(&mut self, blink_event: bool) -> Option<HandCommand> {
        self.refractory_remaining = self.refractory_remaining.saturating_sub(1);
        if blink_event && self.refractory_remaining == 0 {
            self.position = self.position.toggled();
            self.refractory_remaining = self.refractory_windows;
            Some(HandCommand {
                target: self.position,
            })
        } else {
            None
        }
    }
}

/// Pipeline action on a quality flag: poor or missing signal skips the
/// current window and clears accumulated votes so stale predictions cannot
/// fire a command after the signal recovers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoorSignalAction {
    Proceed,
    SkipAndClear,
}

pub fn suppress_on_poor_signal(quality: Quality) -> PoorSignalAction {
    match quality {
        Quality::Good => PoorSignalAction::Proceed,
        Quality::Poor | Quality::Missing => PoorSignalAction::SkipAndClear,
    }
}

/// Debounce strategy for accepting blink events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DebounceMode {
    /// Vote buffer of the last `capacity` predictions with an acceptance
    /// proportion.
    Vote { capacity: usize, threshold: f64 },
    /// Require this many consecutive positive windows.
    Consecutive(u32),
}

#[derive(Debug, Clone)]
pub struct BlinkPipelineConfig {
    pub window_len: usize,
    pub debounce: DebounceMode,
    pub refractory_windows: u32,
}

impl Default for BlinkPipelineConfig {
    fn default() -> Self {
        Self {
            window_len: 6,
            debounce: DebounceMode::Vote {
                capacity: 8,
                threshold: 0.6,
            },
            refractory_windows: 8,
        }
    }
}

/// Counters exposed for pipeline instrumentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlinkPipelineStats {
    pub windows_seen: u64,
    pub windows_excluded: u64,
    pub windows_classified: u64,
    pub vote_events: u64,
    pub toggles: u64,
}

/// Output of one pipeline step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlinkStep {
    pub window_t_ms: f64,
    pub p_blink: f64,
    pub predicted_blink: bool,
    pub vote_event: bool,
    pub command: Option<HandCommand>,
}

/// Streaming blink pipeline over aggregated frames: window assembly, quality
/// suppression, inference, debounce and the hand toggle.
#[derive(Debug, Clone)]
pub struct BlinkPipeline {
    cfg: BlinkPipelineConfig,
    detector: BlinkDetector,
    frames: VecDeque<TimedSample>,
    votes: VoteBuffer,
    consecutive: u32,
    hand: HandState,
    pub stats: BlinkPipelineStats,
}

impl BlinkPipeline {
    pub fn new(cfg: BlinkPipelineConfig, detector: BlinkDetector) -> Result<Self, BlinkError> {
        let votes = match cfg.debounce {
            DebounceMode::Vote {
                capacity,
                threshold,
            } => VoteBuffer::new(capacity, threshold)?,
            DebounceMode::Consecutive(_) => VoteBuffer::new(1, 1.0)?,
        };
        let hand = HandState::new(cfg.refractory_windows);
        Ok(Self {
            cfg,
            detector,
            frames: VecDeque::new(),
            votes,
            consecutive: 0,
            hand,
            stats: BlinkPipelineStats::default(),
        })
    }

    pub fn hand_position(&self) -> HandPosition {
        self.hand.position()
    }

    /// Feed one aggregated frame. Returns a step record when a full window
    /// was evaluated.
    pub fn push_frame(&mut self, frame: TimedSample) -> Result<Option<BlinkStep>, BlinkError> {
        if suppress_on_poor_signal(frame.effective_quality()) == PoorSignalAction::SkipAndClear {
            self.votes.clear();
            self.consecutive = 0;
        }
        if self.frames.len() == self.cfg.window_len {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        if self.frames.len() < self.cfg.window_len {
            return Ok(None);
        }
        self.stats.windows_seen += 1;

        let excluded = self.frames.iter().any(|s| !s.is_usable());
        if excluded {
            self.stats.windows_excluded += 1;
            return Ok(None);
        }

        let window = SignalWindow {
            frames: self.frames.iter().map(|s| s.value).collect(),
            start_index: 0,
            central_index: self.cfg.window_len / 2,
            central_span: crate::signal::TimeSpan::new(0.0, 0.0),
            label: crate::signal::Label::Unlabeled,
            excluded: false,
        };
        let features = extract_features(&window)?;
        let (p_blink, _) = self.detector.classify(&features)?;
        self.stats.windows_classified += 1;
        let predicted = p_blink >= 0.5;

        // Voting is frozen while a toggle is impossible anyway (refractory
        // still pending after this window's decrement), so one long
        // detector response cannot re-fire the moment the refractory ends.
        let toggle_possible = self.hand.refractory_remaining() <= 1;
        let vote_event = if toggle_possible {
            match self.cfg.debounce {
                DebounceMode::Vote { .. } => self.votes.vote(predicted),
                DebounceMode::Consecutive(required) => {
                    if predicted {
                        self.consecutive += 1;
                    } else {
                        self.consecutive = 0;
                    }
                    self.consecutive >= required
                }
            }
        } else {
            false
        };
        if vote_event {
            self.stats.vote_events += 1;
        }
        let command = self.hand.process_window(vote_event);
        if command.is_some() {
            self.stats.toggles += 1;
            self.votes.clear();
            self.consecutive = 0;
        }
        Ok(Some(BlinkStep {
            window_t_ms: frame.t_ms,
            p_blink,
            predicted_blink: predicted,
            vote_event,
            command,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Label, TimeSpan};

    fn window(frames: &[f64]) -> SignalWindow {
        SignalWindow {
            frames: frames.to_vec(),
            start_index: 0,
            central_index: frames.len() / 2,
            central_span: TimeSpan::new(0.0, 50.0),
            label: Label::Unlabeled,
            excluded: false,
        }
    }

    #[test]
    fn constant_window_features() {
        let f = extract_features(&window(&[3.0; 6])).unwrap();
        assert_eq!(f.mean, 3.0);
        assert_eq!(f.std_dev, 0.0);
        assert_eq!(f.peak_to_peak, 0.0);
        assert_eq!(f.zero_crossing_rate, 0.0);
        assert_eq!(f.max_abs_first_difference, 0.0);
    }

    #[test]
    fn alternating_zero_one_features() {
        let f = extract_features(&window(&[0.0, 1.0, 0.0, 1.0, 0.0, 1.0])).unwrap();
        assert_eq!(f.mean, 0.5);
        assert_eq!(f.peak_to_peak, 1.0);
        assert_eq!(f.max_abs_first_difference, 1.0);
        assert_eq!(f.std_dev, 0.5);
    }

    #[test]
    fn full_sign_alternation_has_unit_zero_crossing_rate() {
        let f = extract_features(&window(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0])).unwrap();
        assert_eq!(f.zero_crossing_rate, 1.0);
        assert_eq!(f.rms, 1.0);
    }

    #[test]
    fn excluded_window_is_rejected() {
        let mut w = window(&[0.0; 6]);
        w.excluded = true;
        assert!(matches!(
            extract_features(&w),
            Err(BlinkError::ExcludedWindow)
        ));
    }

    #[test]
    fn zero_weights_give_even_odds() {
        let clf = BlinkClassifier::zeroed(8);
        let f = extract_features(&window(&[0.1, 0.2, 0.3, 0.2, 0.1, 0.0])).unwrap();
        let (pb, pr) = clf.classify(&f).unwrap();
        assert!((pb - 0.5).abs() < 1e-15);
        assert!((pb + pr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_features_are_rejected() {
        let clf = BlinkClassifier::zeroed(8);
        let mut f = extract_features(&window(&[0.0; 6])).unwrap();
        f.rms = f64::NAN;
        assert!(matches!(
            clf.classify(&f),
            Err(BlinkError::NonFiniteFeature)
        ));
    }

    #[test]
    fn weights_round_trip_is_bit_exact() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        let clf = BlinkClassifier::new(
            crate::nn::FeedForward::glorot(FEATURE_COUNT, 8, 2, &mut rng),
            FeatureNorm {
                mean: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
                scale: [1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            },
        );
        let mut bytes = Vec::new();
        clf.save(&mut bytes).unwrap();
        let loaded = BlinkClassifier::load(bytes.as_slice()).unwrap();
        assert_eq!(clf, loaded);
    }

    #[test]
    fn weights_bad_magic_is_rejected() {
        let bytes = b"NOTMAGIC\x00\x00\x00\x00".to_vec();
        assert!(matches!(
            BlinkClassifier::load(bytes.as_slice()),
            Err(BlinkError::WeightsFormat(_))
        ));
    }

    #[test]
    fn vote_threshold_is_five_of_eight_at_default_settings() {
        let votes = VoteBuffer::new(8, 0.6).unwrap();
        assert_eq!(votes.accept_count(), 5);
    }

    #[test]
    fn five_votes_fire_four_do_not() {
        let mut votes = VoteBuffer::new(8, 0.6).unwrap();
        let mut fired = false;
        for y in [true, true, true, true, true, false, false, false] {
            fired = votes.vote(y);
        }
        assert_eq!(votes.blink_votes(), 5);
        assert!(fired);

        let mut votes = VoteBuffer::new(8, 0.6).unwrap();
        for y in [true, true, true, true, false, false, false, false] {
            fired = votes.vote(y);
        }
        assert_eq!(votes.blink_votes(), 4);
        assert!(!fired);

        let mut votes = VoteBuffer::new(8, 0.6).unwrap();
        for _ in 0..8 {
            fired = votes.vote(false);
        }
        assert!(!fired);
    }

    #[test]
    fn buffer_evicts_oldest_when_full() {
        let mut votes = VoteBuffer::new(3, 0.9).unwrap();
        votes.vote(true);
        votes.vote(false);
        votes.vote(false);
        votes.vote(false); // evicts the initial true
        assert_eq!(votes.blink_votes(), 0);
        assert_eq!(votes.len(), 3);
    }

    #[test]
    fn vote_threshold_matches_brute_force_for_small_buffers() {
        for capacity in 1usize..=16 {
            for tenths in 1..=9u32 {
                let theta = tenths as f64 / 10.0;
                let votes = VoteBuffer::new(capacity, theta).unwrap();
                // Brute-force rule: event when count >= theta * capacity,
                // compared in exact integer arithmetic (count*10 >= tenths*B).
                for count in 0..=capacity {
                    let brute = (count * 10) as u32 >= tenths * capacity as u32;
                    let ours = count >= votes.accept_count();
                    assert_eq!(
                        ours, brute,
                        "capacity={capacity} theta={theta} count={count}"
                    );
                }
            }
        }
    }

    #[test]
    fn toggle_flips_and_respects_refractory() {
        let mut hand = HandState::new(8);
        let cmd = hand.process_window(true).unwrap();
        assert_eq!(cmd.target, HandPosition::Closed);
        // Events during the refractory period are ignored.
        for _ in 0..7 {
            assert!(hand.process_window(true).is_none());
            assert_eq!(hand.position(), HandPosition::Closed);
        }
        // Refractory has elapsed after eight processed windows.
        let cmd = hand.process_window(true).unwrap();
        assert_eq!(cmd.target, HandPosition::Open);
    }

    #[test]
    fn no_event_leaves_state_unchanged() {
        let mut hand = HandState::new(8);
        assert!(hand.process_window(false).is_none());
        assert_eq!(hand.position(), HandPosition::Open);
    }

    #[test]
    fn poor_signal_maps_to_skip_and_clear() {
        assert_eq!(
            suppress_on_poor_signal(Quality::Good),
            PoorSignalAction::Proceed
        );
        assert_eq!(
            suppress_on_poor_signal(Quality::Poor),
            PoorSignalAction::SkipAndClear
        );
        assert_eq!(
            suppress_on_poor_signal(Quality::Missing),
            PoorSignalAction::SkipAndClear
        );
    }

    /// Detector that always votes blink, for pipeline-level tests.
    fn always_blink_pipeline() -> BlinkPipeline {
        // Heuristic with threshold far below any constant window's
        // peak-to-peak of zero will vote rest; instead use a network with a
        // bias so p_blink ~ 1.
        let mut clf = BlinkClassifier::zeroed(4);
        clf.net.b2[0] = 10.0;
        BlinkPipeline::new(
            BlinkPipelineConfig::default(),
            BlinkDetector::Network(clf),
        )
        .unwrap()
    }

    #[test]
    fn pipeline_never_classifies_excluded_windows() {
        let mut pipe = always_blink_pipeline();
        for i in 0..40 {
            let mut frame = TimedSample::good(i as f64 * 50.0, 0.0);
            if i % 6 == 0 {
                frame.quality = Quality::Poor;
            }
            pipe.push_frame(frame).unwrap();
        }
        // Every window of six consecutive frames contains a poor frame.
        assert!(pipe.stats.windows_seen > 0);
        assert_eq!(pipe.stats.windows_classified, 0);
        assert_eq!(
            pipe.stats.windows_excluded, pipe.stats.windows_seen,
            "all windows must be excluded"
        );
    }

    #[test]
    fn alternating_poor_good_never_fires_events() {
        let mut pipe = always_blink_pipeline();
        for i in 0..200 {
            let mut frame = TimedSample::good(i as f64 * 50.0, 1.0);
            if i % 2 == 0 {
                frame.quality = Quality::Poor;
            }
            let step = pipe.push_frame(frame).unwrap();
            assert!(step.is_none());
        }
        assert_eq!(pipe.stats.vote_events, 0);
    }

    #[test]
    fn poor_frame_clears_votes_so_events_need_reaccumulation() {
        fn push_good(pipe: &mut BlinkPipeline, t: &mut f64, n: usize) -> u32 {
            let mut events = 0;
            for _ in 0..n {
                if let Some(step) = pipe.push_frame(TimedSample::good(*t, 0.0)).unwrap() {
                    if step.vote_event {
                        events += 1;
                    }
                }
                *t += 50.0;
            }
            events
        }
        let mut pipe = always_blink_pipeline();
        let mut t = 0.0;
        // Warm up to the first event: 6 frames to fill the window, then
        // enough windows for five votes.
        assert!(push_good(&mut pipe, &mut t, 10) > 0);
        // A poor frame clears the buffer.
        let mut poor = TimedSample::good(t, 0.0);
        poor.quality = Quality::Poor;
        pipe.push_frame(poor).unwrap();
        t += 50.0;
        // Windows overlapping the poor frame are themselves excluded, so no
        // votes accumulate until six good frames have passed.
        let before = pipe.stats.vote_events;
        push_good(&mut pipe, &mut t, 5);
        assert_eq!(pipe.stats.vote_events, before);
    }

    #[test]
    fn isolated_misclassification_never_fires() {
        let mut votes = VoteBuffer::new(8, 0.6).unwrap();
        for i in 0..100 {
            let fired = votes.vote(i == 50);
            assert!(!fired);
        }
    }

    #[test]
    fn consecutive_mode_requires_unbroken_positive_run() {
        let mut clf = BlinkClassifier::zeroed(4);
        clf.net.b2[0] = 10.0; // always predicts blink
        let mut pipe = BlinkPipeline::new(
            BlinkPipelineConfig {
                debounce: DebounceMode::Consecutive(4),
                ..BlinkPipelineConfig::default()
            },
            BlinkDetector::Network(clf),
        )
        .unwrap();
        let mut first_event_window = None;
        for i in 0..12 {
            if let Some(step) = pipe
                .push_frame(TimedSample::good(i as f64 * 50.0, 0.0))
                .unwrap()
            {
                if step.vote_event && first_event_window.is_none() {
                    first_event_window = Some(i);
                }
            }
        }
        // Windows start at frame 5; the fourth consecutive positive window
        // lands at frame index 8.
        assert_eq!(first_event_window, Some(8));
    }

    /// A detector response spanning ten consecutive windows (a blink plus
    /// window overlap) must produce exactly one toggle, not a re-fire when
    /// the refractory expires.
    #[test]
    fn one_long_detector_response_toggles_once() {
        let detector = BlinkDetector::Heuristic(HeuristicDetector::new(1.0));
        let mut pipe =
            BlinkPipeline::new(BlinkPipelineConfig::default(), detector).unwrap();
        let mut toggles = 0;
        for i in 0..60 {
            // Windows see a large peak-to-peak while i is in the burst.
            let value = if (10..20).contains(&i) { 3.0 * ((i % 2) as f64) } else { 0.0 };
            if let Some(step) = pipe
                .push_frame(TimedSample::good(i as f64 * 50.0, value))
                .unwrap()
            {
                if step.command.is_some() {
                    toggles += 1;
                }
            }
        }
        assert_eq!(toggles, 1);
    }
}
