//! Dataset construction from session files and the stratified
//! train/validation/test split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::TrainError;
use crate::session::{Channel, SessionMeta, SessionRecord};
use crate::signal::{label_window, make_windows, FrameAggregator, Label, LowPassFilter, SignalWindow};

/// Split assignment for one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

pub const SPLIT_FRACTIONS: [(Split, f64); 3] = [
    (Split::Train, 0.7),
    (Split::Val, 0.2),
    (Split::Test, 0.1),
];

/// Windowing and filtering parameters for dataset construction.
#[derive(Debug, Clone, Copy)]
pub struct DatasetConfig {
    pub window_len: usize,
    pub hop: usize,
    pub frame_ms: f64,
    pub eeg_fs_hz: f64,
    pub fc_eeg_hz: f64,
    pub split_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            window_len: 6,
            hop: 1,
            frame_ms: 50.0,
            eeg_fs_hz: 128.0,
            fc_eeg_hz: 10.0,
            split_seed: 42,
        }
    }
}

/// Labeled windows with their split assignments; excluded windows never
/// enter the collection.
#[derive(Debug, Clone)]
pub struct SessionDataset {
    pub windows: Vec<SignalWindow>,
    pub splits: Vec<Split>,
    pub meta: Vec<SessionMeta>,
}

impl SessionDataset {
    /// Stratified 70/20/10 split over already-labeled windows, shuffled
    /// deterministically by the seed.
    pub fn from_labeled_windows(
        windows: Vec<SignalWindow>,
        seed: u64,
    ) -> Result<Self, TrainError> {
        if windows.is_empty() {
            return Err(TrainError::NoUsableWindows);
        }
        let splits = stratified_split(&windows, seed);
        Ok(Self {
            windows,
            splits,
            meta: Vec::new(),
        })
    }

    pub fn split(&self, id: Split) -> Vec<&SignalWindow> {
        self.windows
            .iter()
            .zip(&self.splits)
            .filter(|(_, s)| **s == id)
            .map(|(w, _)| w)
            .collect()
    }

    pub fn class_counts(&self, id: Split) -> (usize, usize) {
        let mut blink = 0;
        let mut rest = 0;
        for (w, s) in self.windows.iter().zip(&self.splits) {
            if *s == id {
                match w.label {
                    Label::Blink => blink += 1,
                    _ => rest += 1,
                }
            }
        }
        (blink, rest)
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Windows for one session: quality gating, low-pass filtering, frame
/// aggregation, sliding windows and central-frame labeling. Excluded
/// windows are dropped.
pub fn windows_from_session(
    record: &SessionRecord,
    cfg: &DatasetConfig,
) -> Result<Vec<SignalWindow>, TrainError> {
    let samples = record.samples(Channel::Eeg);
    let mut filter = LowPassFilter::new(cfg.fc_eeg_hz, cfg.eeg_fs_hz)
        .map_err(|_| TrainError::NoUsableWindows)?;
    let mut agg = FrameAggregator::new(cfg.frame_ms);
    let mut frames = Vec::new();
    for sample in samples {
        let mut filtered = sample;
        // Poor and missing samples pass through unfiltered so they cannot
        // disturb the filter state; their quality flag excludes them anyway.
        if sample.is_usable() {
            filtered.value = filter.step(sample.value).unwrap_or(sample.value);
        }
        if let Some(frame) = agg.push(filtered) {
            frames.push(frame);
        }
    }
    let events = record.blink_intervals();
    let mut windows = make_windows(&frames, cfg.window_len, cfg.hop);
    windows.retain(|w| !w.excluded);
    for w in &mut windows {
        w.label = label_window(w, &events);
    }
    Ok(windows)
}

/// Build the dataset from parsed session files: windows labeled via the
/// central-frame rule, poor windows discarded, then a seeded stratified
/// split.
pub fn build_dataset(
    sessions: &[SessionRecord],
    cfg: &DatasetConfig,
) -> Result<SessionDataset, TrainError> {
    let mut windows = Vec::new();
    let mut meta = Vec::new();
    for record in sessions {
        windows.extend(windows_from_session(record, cfg)?);
        meta.push(record.meta.clone());
    }
    if windows.is_empty() {
        return Err(TrainError::NoUsableWindows);
    }
    let splits = stratified_split(&windows, cfg.split_seed);
    Ok(SessionDataset {
        windows,
        splits,
        meta,
    })
}

/// Per-class largest-remainder split: each class lands within one window of
/// the exact 70/20/10 proportions. Windows are shuffled with the seed; ties
/// in the remainder resolve in train, val, test order.
fn stratified_split(windows: &[SignalWindow], seed: u64) -> Vec<Split> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut splits = vec![Split::Train; windows.len()];
    for class in [Label::Blink, Label::Rest, Label::Unlabeled] {
        let mut indices: Vec<usize> = windows
            .iter()
            .enumerate()
            .filter(|(_, w)| w.label == class)
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            continue;
        }
        indices.shuffle(&mut rng);
        let n = indices.len();
        let mut counts: Vec<usize> = SPLIT_FRACTIONS
            .iter()
            .map(|(_, f)| (f * n as f64).floor() as usize)
            .collect();
        let mut leftover = n - counts.iter().sum::<usize>();
        // Distribute the remainder by descending fractional part.
        let mut order: Vec<usize> = (0..SPLIT_FRACTIONS.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = SPLIT_FRACTIONS[a].1 * n as f64;
            let fb = SPLIT_FRACTIONS[b].1 * n as f64;
            (fb - fb.floor())
                .partial_cmp(&(fa - fa.floor()))
                .unwrap()
                .then(a.cmp(&b))
        });
        for &slot in &order {
            if leftover == 0 {
                break;
            }
            counts[slot] += 1;
            leftover -= 1;
        }
        let mut cursor = 0usize;
        for (slot, &count) in counts.iter().enumerate() {
            let split = SPLIT_FRACTIONS[slot].0;
            for &idx in &indices[cursor..cursor + count] {
                splits[idx] = split;
            }
            cursor += count;
        }
    }
    splits
}
