//! Dual-modal EEG/EMG prosthetic control pipelines.
//!
//! The crate is organized around the stages of the control path:
//!
//! * [`signal`] — samples, quality gating, the causal low-pass filter and
//!   sliding-window framing shared by both pipelines.
//! * [`blink`] — per-window feature extraction, blink classification,
//!   vote-buffer debouncing and the hand open/close toggle.
//! * [`emg`] — envelope normalization, two-threshold calibration, band
//!   classification and the consecutive-frame debounce for elbow commands.
//! * [`train`] — dataset construction, augmentation, classifier training
//!   and the evaluation metric suite.
//! * [`protocol`] — wire format, CRC, stop-and-wait reliability and the
//!   safety watchdog between the wearer-side and prosthetic-side nodes.
//! * [`actuation`] — trapezoidal servo profiles and PWM pulse mapping.
//! * [`session`] — the CSV session file format shared by the recorder,
//!   trainer and replayer.
//! * [`sim`] — a deterministic discrete-event simulator wiring generators,
//!   pipelines, the command link and actuation together.

pub mod actuation;
pub mod blink;
pub mod emg;
pub mod nn;
pub mod protocol;
pub mod session;
pub mod signal;
pub mod sim;
pub mod train;

pub use signal::{Label, LowPassFilter, Quality, SignalWindow, TimeSpan, TimedSample};
