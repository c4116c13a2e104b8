//! Offline training: dataset construction from session files, augmentation,
//! stratified splitting, classifier training with early stopping and the
//! evaluation metric suite.

mod dataset;
mod metrics;

pub use dataset::{build_dataset, DatasetConfig, SessionDataset, Split};
pub use metrics::{evaluate, report_from_counts, roc_auc, EvalReport};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::blink::{extract_features, BlinkClassifier, FeatureNorm, FEATURE_COUNT};
use crate::nn::{cross_entropy, Adam, FeedForward, Gradients};
use crate::signal::{Label, SignalWindow};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Session(#[from] crate::session::SessionError),
    #[error("no usable windows after exclusion")]
    NoUsableWindows,
    #[error("{split} split is empty")]
    EmptySplit { split: &'static str },
    #[error("{split} split contains a single class")]
    SingleClass { split: &'static str },
    #[error(transparent)]
    Blink(#[from] crate::blink::BlinkError),
}

/// Augmentation noise/scale/shift parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub noise_sigma: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Maximum circular shift in frames; the shift is drawn uniformly from
    /// `-max..=max`.
    pub max_shift_frames: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.05,
            scale_min: 0.9,
            scale_max: 1.1,
            max_shift_frames: 1,
        }
    }
}

/// Produce an augmented copy of a training window: additive Gaussian noise,
/// a uniform amplitude scale, then a small circular shift. The label is
/// preserved. Deterministic for a given seed.
pub fn augment(window: &SignalWindow, seed: u64, cfg: &AugmentConfig) -> SignalWindow {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut frames = window.frames.clone();
    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("sigma must be non-negative");
        for v in &mut frames {
            *v += normal.sample(&mut rng);
        }
    }
    let scale = if cfg.scale_max > cfg.scale_min {
        rng.random_range(cfg.scale_min..=cfg.scale_max)
    } else {
        cfg.scale_min
    };
    for v in &mut frames {
        *v *= scale;
    }
    if cfg.max_shift_frames > 0 {
        let max = cfg.max_shift_frames as i64;
        let shift = rng.random_range(-max..=max);
        if shift != 0 {
            let n = frames.len() as i64;
            let offset = shift.rem_euclid(n) as usize;
            frames.rotate_right(offset);
        }
    }
    SignalWindow {
        frames,
        ..window.clone()
    }
}

#[derive(Debug, Clone)]
pub struct Hyperparams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a validation-loss improvement.
    pub patience: usize,
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
    pub augment: Option<AugmentConfig>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            hidden: 8,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            weight_decay: 1e-4,
            dropout: 0.2,
            seed: 42,
            augment: Some(AugmentConfig::default()),
        }
    }
}

/// Per-epoch training curve point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub classifier: BlinkClassifier,
    pub curves: Vec<EpochStats>,
    /// Epoch whose weights were kept (best validation loss).
    pub best_epoch: usize,
}

/// Training curves as CSV (`epoch,train_loss,val_loss,train_acc,val_acc`).
pub fn curves_to_csv(curves: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,train_acc,val_acc\n");
    for row in curves {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.epoch, row.train_loss, row.val_loss, row.train_acc, row.val_acc
        ));
    }
    out
}

fn class_index(label: Label) -> usize {
    // Output 0 is blink, output 1 is rest.
    match label {
        Label::Blink => 0,
        _ => 1,
    }
}

/// Train the blink classifier on the dataset's train split, early-stopping
/// on validation loss. Deterministic: the same dataset, hyperparameters and
/// seed give bitwise-identical weights.
pub fn train(dataset: &SessionDataset, hp: &Hyperparams) -> Result<TrainOutcome, TrainError> {
    let train_set = dataset.split(Split::Train);
    let val_set = dataset.split(Split::Val);
    if train_set.is_empty() {
        return Err(TrainError::EmptySplit { split: "train" });
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptySplit { split: "val" });
    }
    for (name, set) in [("train", &train_set), ("val", &val_set)] {
        let blinks = set.iter().filter(|w| w.label == Label::Blink).count();
        if blinks == 0 || blinks == set.len() {
            return Err(TrainError::SingleClass { split: name });
        }
    }

    // Normalization statistics come from the un-augmented train split.
    let mut train_raw = Vec::with_capacity(train_set.len());
    for window in &train_set {
        train_raw.push(extract_features(window)?.to_array());
    }
    let norm = FeatureNorm::fit(&train_raw);

    let val_features: Vec<([f64; FEATURE_COUNT], usize)> = val_set
        .iter()
        .map(|w| {
            Ok((
                norm.apply(&extract_features(w)?.to_array()),
                class_index(w.label),
            ))
        })
        .collect::<Result<_, TrainError>>()?;

    let mut rng = ChaCha12Rng::seed_from_u64(hp.seed);
    let mut net = FeedForward::glorot(FEATURE_COUNT, hp.hidden, 2, &mut rng);
    let mut adam = Adam::new(hp.learning_rate, &net);
    let mut grads = Gradients::zeroed_like(&net);

    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    let mut curves = Vec::new();
    let mut best_val_loss = f64::INFINITY;
    let mut best: Option<(FeedForward, usize)> = None;
    let mut epochs_since_best = 0usize;

    for epoch in 0..hp.max_epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_correct = 0usize;

        for batch in indices.chunks(hp.batch_size.max(1)) {
            grads.reset();
            for &idx in batch {
                let window = train_set[idx];
                let features = match hp.augment {
                    Some(cfg) => {
                        let seed = hp
                            .seed
                            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                            .wrapping_add((epoch as u64) << 32)
                            .wrapping_add(idx as u64);
                        extract_features(&augment(window, seed, &cfg))?
                    }
                    None => extract_features(window)?,
                };
                let x = norm.apply(&features.to_array());
                let target = class_index(window.label);
                let mask: Option<Vec<f64>> = if hp.dropout > 0.0 {
                    let keep = 1.0 - hp.dropout;
                    Some(
                        (0..hp.hidden)
                            .map(|_| if rng.random_bool(keep) { 1.0 / keep } else { 0.0 })
                            .collect(),
                    )
                } else {
                    None
                };
                let fwd = net.forward(&x, mask.as_deref());
                let loss = net.backward(&x, target, &fwd, mask.as_deref(), &mut grads);
                epoch_loss += loss;
                if usize::from(fwd.probs[0] < 0.5) == target {
                    epoch_correct += 1;
                }
            }
            grads.scale(1.0 / batch.len() as f64);
            grads.add_weight_decay(&net, hp.weight_decay);
            adam.step(&mut net, &grads);
        }

        let mut val_loss = 0.0;
        let mut val_correct = 0usize;
        for (x, target) in &val_features {
            let probs = net.probabilities(x);
            val_loss += cross_entropy(&probs, *target);
            if usize::from(probs[0] < 0.5) == *target {
                val_correct += 1;
            }
        }
        val_loss /= val_features.len() as f64;

        curves.push(EpochStats {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            val_loss,
            train_acc: epoch_correct as f64 / train_set.len() as f64,
            val_acc: val_correct as f64 / val_features.len() as f64,
        });

        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best = Some((net.clone(), epoch));
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= hp.patience {
                break;
            }
        }
    }

    let (best_net, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        classifier: BlinkClassifier::new(best_net, norm),
        curves,
        best_epoch,
    })
}
