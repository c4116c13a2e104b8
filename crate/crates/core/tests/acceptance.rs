//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).

use std::f64::consts::PI;
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use bioarm_core::actuation::ServoProfile;
use bioarm_core::blink::VoteBuffer;
use bioarm_core::emg::{Band, BandState};
use bioarm_core::nn::{cross_entropy, FeedForward, Gradients};
use bioarm_core::protocol::{
    send_reliable, CommandPacket, MotionParams, PacketBody, ReliabilityState, ReliableReceiver,
    Watchdog,
};
use bioarm_core::session::{Channel, RowLabel, SessionMeta, SessionRecord, SessionRow};
use bioarm_core::signal::{compute_alpha, make_windows, Label, LowPassFilter, TimedSample};
use bioarm_core::sim::{
    gen_eeg, run_simulation, CalibrationPlan, ContractionLevel, Pathway, Scenario, SimConfig,
};
use bioarm_core::train::{
    build_dataset, evaluate, report_from_counts, roc_auc, train, DatasetConfig, Hyperparams,
    SessionDataset,
};

fn criterion(name: &str, body: impl FnOnce() + UnwindSafe) {
    let result = catch_unwind(body);
    match &result {
        Ok(()) => println!("acceptance {name}: PASS"),
        Err(_) => println!("acceptance {name}: FAIL"),
    }
    if let Err(payload) = result {
        resume_unwind(payload);
    }
}

#[test]
fn acceptance_01_filter_correctness() {
    criterion("01 filter correctness", || {
        let start = std::time::Instant::now();
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        for _ in 0..100 {
            let fc: f64 = rng.random_range(0.5..200.0);
            let fs: f64 = rng.random_range(16.0..2048.0);
            let alpha = compute_alpha(fc, fs).unwrap();
            // Independent evaluation via the algebraically equivalent form.
            let w = 2.0 * PI * fc;
            let oracle = w / (w + fs);
            assert!(
                (alpha - oracle).abs() <= 1e-12 * oracle.max(1.0),
                "fc={fc} fs={fs}: {alpha} vs {oracle}"
            );

            // Step response against the closed form
            // |y[n] - h| = |h - y0| * (1 - alpha)^n.
            let mut filter = LowPassFilter::with_alpha(alpha);
            filter.step(0.0).unwrap();
            let h: f64 = rng.random_range(0.5..5.0);
            for n in 1..=100i32 {
                let y = filter.step(h).unwrap();
                let expected = h.abs() * (1.0 - alpha).powi(n);
                assert!(
                    ((y - h).abs() - expected).abs() <= 1e-9 * h.abs(),
                    "n={n} fc={fc} fs={fs}"
                );
            }
        }
        assert!(start.elapsed().as_secs_f64() < 1.0, "criterion overran 1 s");
    });
}

#[test]
fn acceptance_02_windowing_oracle() {
    criterion("02 windowing oracle", || {
        let start = std::time::Instant::now();
        for n in 0..=64usize {
            let samples: Vec<TimedSample> = (0..n)
                .map(|i| TimedSample::good(i as f64 * 50.0, i as f64))
                .collect();
            for w in 1..=n.max(1) {
                for s in 1..=8usize {
                    let windows = make_windows(&samples, w, s);
                    // Brute-force enumeration of every fitting start index.
                    let mut expected = Vec::new();
                    let mut k = 0;
                    while k * s + w <= n {
                        expected.push(k * s);
                        k += 1;
                    }
                    assert_eq!(
                        windows.iter().map(|x| x.start_index).collect::<Vec<_>>(),
                        expected,
                        "n={n} w={w} s={s}"
                    );
                    for win in &windows {
                        assert_eq!(win.frames.len(), w);
                        assert_eq!(win.central_index, w / 2);
                    }
                }
            }
        }
        assert!(start.elapsed().as_secs_f64() < 5.0, "criterion overran 5 s");
    });
}

#[test]
fn acceptance_03_debounce_properties() {
    criterion("03 debounce properties", || {
        let mut rng = ChaCha12Rng::seed_from_u64(303);

        // (a) Vote buffer: an event fires exactly when the trailing window
        // of B predictions holds at least ceil(theta*B) votes.
        for _ in 0..10_000 {
            let capacity = rng.random_range(1..=16usize);
            let tenths = rng.random_range(1..=9u32);
            let theta = tenths as f64 / 10.0;
            let mut votes = VoteBuffer::new(capacity, theta).unwrap();
            let len = rng.random_range(1..=48usize);
            let stream: Vec<bool> = (0..len).map(|_| rng.random_bool(0.4)).collect();
            for (i, &y) in stream.iter().enumerate() {
                let fired = votes.vote(y);
                let lo = i.saturating_sub(capacity - 1);
                let count = stream[lo..=i].iter().filter(|v| **v).count();
                // Exact integer threshold: count*10 >= tenths*capacity.
                let oracle = (count * 10) as u32 >= tenths * capacity as u32;
                assert_eq!(fired, oracle, "capacity={capacity} theta={theta} i={i}");
            }
        }

        // (b) Band debounce: one command per maximal run of at least D
        // identical movement frames, verified against a run-length scanner.
        for _ in 0..10_000 {
            let persistence = rng.random_range(1..=12u32);
            let len = rng.random_range(1..=64usize);
            let stream: Vec<Band> = (0..len)
                .map(|_| match rng.random_range(0..3) {
                    0 => Band::Rest,
                    1 => Band::Extend,
                    _ => Band::Contract,
                })
                .collect();
            let mut state = BandState::new(persistence);
            let emitted: Vec<usize> = stream
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| state.update(b).map(|_| i))
                .collect();
            // Run-length oracle.
            let mut expected = Vec::new();
            let mut i = 0;
            while i < stream.len() {
                let band = stream[i];
                let mut j = i;
                while j < stream.len() && stream[j] == band {
                    j += 1;
                }
                if band.is_movement() && j - i >= persistence as usize {
                    expected.push(i + persistence as usize - 1);
                }
                i = j;
            }
            assert_eq!(emitted, expected, "persistence={persistence}");
        }
    });
}

#[test]
fn acceptance_04_metrics_fixture() {
    criterion("04 metrics fixture", || {
        let report = report_from_counts(14, 6, 13, 18);
        assert!((report.accuracy - 0.6275).abs() < 5e-5, "{}", report.accuracy);
        assert!((report.precision - 0.7000).abs() < 5e-5, "{}", report.precision);
        assert!((report.recall - 0.5185).abs() < 5e-5, "{}", report.recall);
        assert!((report.f1 - 0.5957).abs() < 5e-5, "{}", report.f1);

        // ROC-AUC against the O(n^2) pair-counting oracle for n <= 200.
        let mut rng = ChaCha12Rng::seed_from_u64(404);
        for _ in 0..60 {
            let n = rng.random_range(2..=200usize);
            let scored: Vec<(f64, bool)> = (0..n)
                .map(|_| {
                    let s = (rng.random_range(0.0..1.0f64) * 16.0).round() / 16.0;
                    (s, rng.random_bool(0.35))
                })
                .collect();
            let ours = roc_auc(&scored);
            let n_pos = scored.iter().filter(|(_, p)| *p).count();
            let n_neg = n - n_pos;
            if n_pos == 0 || n_neg == 0 {
                assert_eq!(ours, None);
                continue;
            }
            let mut pairs = 0.0;
            for &(sp, p) in &scored {
                if !p {
                    continue;
                }
                for &(sn, q) in &scored {
                    if q {
                        continue;
                    }
                    pairs += if sp > sn {
                        1.0
                    } else if sp == sn {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
            let oracle = pairs / (n_pos * n_neg) as f64;
            assert!((ours.unwrap() - oracle).abs() < 1e-12);
        }
    });
}

fn synthetic_blink_sessions(count: usize, seed_base: u64) -> Vec<SessionRecord> {
    let cfg = SimConfig::default(); // blink amplitude is 5x the noise sigma
    let blinks: Vec<(f64, f64)> = (0..19)
        .map(|i| (1000.0 + i as f64 * 1500.0, 300.0))
        .collect();
    let scenario = Scenario::eeg(30_000.0, &blinks);
    (0..count)
        .map(|i| {
            let samples = gen_eeg(&cfg, &scenario, seed_base + i as u64).unwrap();
            let spans = scenario.blink_intervals();
            let rows: Vec<SessionRow> = samples
                .into_iter()
                .map(|s| SessionRow {
                    t_ms: s.t_ms,
                    channel: Channel::Eeg,
                    raw_value: s.value,
                    quality: s.quality,
                    label: if spans.iter().any(|sp| sp.contains(s.t_ms)) {
                        RowLabel::Blink
                    } else {
                        RowLabel::Rest
                    },
                })
                .collect();
            SessionRecord::new(SessionMeta::default(), rows)
        })
        .collect()
}

/// 500 windows per class, strided across the full corpus.
fn balanced_dataset(sessions: &[SessionRecord], split_seed: u64) -> SessionDataset {
    let full = build_dataset(sessions, &DatasetConfig::default()).unwrap();
    let pick = |label: Label| -> Vec<_> {
        let of_class: Vec<_> = full
            .windows
            .iter()
            .filter(|w| w.label == label)
            .cloned()
            .collect();
        assert!(of_class.len() >= 500, "need 500 windows of {label:?}");
        let stride = of_class.len() as f64 / 500.0;
        (0..500)
            .map(|i| of_class[(i as f64 * stride) as usize].clone())
            .collect()
    };
    let mut windows = pick(Label::Blink);
    windows.extend(pick(Label::Rest));
    SessionDataset::from_labeled_windows(windows, split_seed).unwrap()
}

#[test]
fn acceptance_05_training_sanity() {
    criterion("05 training sanity", || {
        let start = std::time::Instant::now();

        // Gradient check: analytic gradients of cross-entropy (plus L2)
        // match central finite differences on 100 random configurations.
        let mut rng = ChaCha12Rng::seed_from_u64(505);
        let lambda = 1e-4;
        for _ in 0..100 {
            let mut net = FeedForward::glorot(6, 8, 2, &mut rng);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let class = usize::from(rng.random_bool(0.5));
            let mut grads = Gradients::zeroed_like(&net);
            let fwd = net.forward(&x, None);
            net.backward(&x, class, &fwd, None, &mut grads);
            grads.add_weight_decay(&net, lambda);
            let loss_at = |n: &FeedForward| {
                cross_entropy(&n.forward(&x, None).probs, class)
                    + 0.5 * lambda * n.weight_norm_sq()
            };
            fn param_mut(n: &mut FeedForward, tensor: usize, idx: usize) -> &mut f64 {
                match tensor {
                    0 => &mut n.w1[idx],
                    _ => &mut n.w2[idx],
                }
            }
            let h = 1e-6;
            let w_idx = rng.random_range(0..net.w1.len());
            for (tensor, idx) in [(0usize, w_idx), (2, w_idx % net.w2.len())] {
                let analytic = match tensor {
                    0 => grads.w1[idx],
                    _ => grads.w2[idx],
                };
                let original = *param_mut(&mut net, tensor, idx);
                *param_mut(&mut net, tensor, idx) = original + h;
                let plus = loss_at(&net);
                *param_mut(&mut net, tensor, idx) = original - h;
                let minus = loss_at(&net);
                *param_mut(&mut net, tensor, idx) = original;
                let numeric = (plus - minus) / (2.0 * h);
                let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
                assert!(rel < 1e-5, "gradient mismatch: {analytic} vs {numeric}");
            }
        }

        // Train on 500 blink / 500 rest synthetic windows and require test
        // F1 of at least 0.90.
        let sessions = synthetic_blink_sessions(5, 100);
        let dataset = balanced_dataset(&sessions, 42);
        let hp = Hyperparams {
            seed: 42,
            ..Hyperparams::default()
        };
        let outcome = train(&dataset, &hp).unwrap();
        let report = evaluate(&outcome.classifier, &dataset).unwrap();
        assert!(report.f1 >= 0.90, "test F1 {}", report.f1);
        assert!(
            start.elapsed().as_secs_f64() < 60.0,
            "criterion overran 60 s"
        );
    });
}

#[test]
fn acceptance_06_protocol() {
    criterion("06 protocol", || {
        // Monte Carlo stop-and-wait delivery at loss 0.3: the receiver gets
        // the packet unless all three attempts drop, so the delivery rate
        // is 1 - 0.3^3 = 0.973.
        let loss = 0.3;
        let trials = 100_000u32;
        let mut rng = ChaCha12Rng::seed_from_u64(606);
        let mut delivered_count = 0u32;
        for _ in 0..trials {
            let mut receiver = ReliableReceiver::new();
            let mut receiver_got = false;
            let mut channel = |frame: &[u8]| -> Option<u8> {
                if rng.random_bool(loss) {
                    return None;
                }
                let action = receiver.on_frame(frame).ok()?;
                if action.delivery.is_some() {
                    receiver_got = true;
                }
                if rng.random_bool(loss) {
                    return None; // ack lost; sender will retry
                }
                CommandPacket::decode(&action.ack_frame).ok().map(|a| a.seq)
            };
            let mut state = ReliabilityState::default();
            send_reliable(&mut state, PacketBody::Halt, &mut channel).unwrap();
            if receiver_got {
                delivered_count += 1;
            }
        }
        let rate = delivered_count as f64 / trials as f64;
        assert!(
            (rate - 0.973).abs() <= 0.005,
            "delivery rate {rate} vs 0.973"
        );

        // Encode/decode identity over 10^4 random packets.
        let mut rng = ChaCha12Rng::seed_from_u64(607);
        for _ in 0..10_000 {
            let packet = random_packet(&mut rng);
            let frame = packet.encode().unwrap();
            assert_eq!(CommandPacket::decode(&frame).unwrap(), packet);
        }

        // CRC fuzz: every single-byte corruption is detected.
        let mut rng = ChaCha12Rng::seed_from_u64(608);
        for _ in 0..10_000 {
            let packet = random_packet(&mut rng);
            let mut frame = packet.encode().unwrap();
            let idx = rng.random_range(0..frame.len());
            let original = frame[idx];
            let mut corrupted = original;
            while corrupted == original {
                corrupted = rng.random();
            }
            frame[idx] = corrupted;
            assert!(CommandPacket::decode(&frame).is_err(), "byte {idx}");
        }
    });
}

fn random_packet<R: Rng>(rng: &mut R) -> CommandPacket {
    let motion = MotionParams {
        duration_ms: rng.random_range(0..=65535),
        speed: rng.random(),
    };
    let body = match rng.random_range(0..6) {
        0 => PacketBody::HandToggle { motion: None },
        1 => PacketBody::HandToggle {
            motion: Some(motion),
        },
        2 => PacketBody::ElbowMove {
            direction: if rng.random_bool(0.5) {
                bioarm_core::emg::ElbowDirection::Flex
            } else {
                bioarm_core::emg::ElbowDirection::Extend
            },
            motion,
        },
        3 => PacketBody::Telemetry(bioarm_core::protocol::TelemetryBody::Status {
            battery_pct: rng.random_range(0..=100),
            link_ok: rng.random_bool(0.9),
        }),
        4 => PacketBody::Telemetry(bioarm_core::protocol::TelemetryBody::Resume),
        _ => {
            if rng.random_bool(0.5) {
                PacketBody::Ack
            } else {
                PacketBody::Halt
            }
        }
    };
    CommandPacket::new(rng.random(), body)
}

#[test]
fn acceptance_07_watchdog() {
    criterion("07 watchdog", || {
        for tick_hz in [10u64, 50, 100] {
            let period = 1000 / tick_hz;

            // Halt fires within one tick after the 2000 ms timeout.
            let mut dog = Watchdog::new(2000, 0);
            let mut halted_at = None;
            let mut t = 0;
            while halted_at.is_none() && t < 10_000 {
                t += period;
                if dog.tick(t).is_some() {
                    halted_at = Some(t);
                }
            }
            let at = halted_at.expect("watchdog must fire");
            assert!(
                at > 2000 && at <= 2000 + period,
                "{tick_hz} Hz fired at {at}"
            );

            // Never fires when commands arrive at least every 1900 ms.
            let mut dog = Watchdog::new(2000, 0);
            let mut t = 0;
            let mut last_command = 0;
            while t < 60_000 {
                t += period;
                if t - last_command >= 1900 {
                    dog.refresh(t);
                    last_command = t;
                }
                assert!(dog.tick(t).is_none(), "{tick_hz} Hz halted at {t}");
            }
        }
    });
}

#[test]
fn acceptance_08_trapezoid_kinematics() {
    criterion("08 trapezoid kinematics", || {
        // Reference case: 0 -> 90 degrees over 150 ms with equal thirds.
        let profile = ServoProfile::new(0.0, 90.0, 150.0, 1.0 / 3.0).unwrap();
        assert_eq!(profile.position(0.0), 0.0);
        assert_eq!(profile.position(150.0), 90.0);
        assert!((profile.position(75.0) - 45.0).abs() <= 1e-9);
        assert!((profile.peak_velocity_deg_per_s() - 900.0).abs() <= 1e-9);

        // Displacement equals the velocity integral for random profiles.
        let mut rng = ChaCha12Rng::seed_from_u64(808);
        for _ in 0..25 {
            let start: f64 = rng.random_range(-180.0..180.0);
            let delta: f64 = rng.random_range(-180.0..180.0);
            let duration: f64 = rng.random_range(30.0..250.0);
            let fraction: f64 = rng.random_range(0.05..=0.5);
            let p = ServoProfile::new(start, start + delta, duration, fraction).unwrap();
            assert_eq!(p.position(0.0), start);
            assert_eq!(p.position(duration), start + delta);
            let steps = 400_000usize;
            let h = duration / steps as f64;
            let mut integral = 0.0;
            for i in 0..steps {
                let t0 = i as f64 * h;
                integral += 0.5 * (p.velocity(t0) + p.velocity(t0 + h)) * h;
            }
            let rel = (integral - delta).abs() / delta.abs().max(1e-9);
            assert!(rel <= 1e-6, "relative error {rel}");
        }
    });
}

#[test]
fn acceptance_09_latency_consistency() {
    criterion("09 latency consistency", || {
        let start = std::time::Instant::now();
        // Frame timings per the reference build: 50 ms EEG frames and
        // 20 Hz EMG envelope frames.
        let cfg = SimConfig {
            frame_ms: 50.0,
            emg_frame_hz: 20.0,
            ..SimConfig::default()
        };

        let calibration = Scenario::calibration(CalibrationPlan {
            rest_ms: 5000.0,
            light_ms: 3000.0,
            strong_ms: 3000.0,
        });
        let eeg = Scenario::eeg(
            10_000.0,
            &[
                (1000.0, 300.0),
                (2500.0, 300.0),
                (4000.0, 300.0),
                (5500.0, 300.0),
                (7000.0, 300.0),
                (8500.0, 300.0),
                (9500.0, 300.0),
            ],
        );
        let emg = Scenario::emg(
            8000.0,
            &[
                (500.0, 500.0, ContractionLevel::Strong),
                (2000.0, 500.0, ContractionLevel::Strong),
                (3500.0, 500.0, ContractionLevel::Strong),
                (5000.0, 500.0, ContractionLevel::Strong),
                (6500.0, 500.0, ContractionLevel::Strong),
            ],
        );
        let outcome = run_simulation(&cfg, &[calibration, eeg, emg], None).unwrap();

        let eeg_stats = outcome.latency.stats(Pathway::EegBlink).unwrap();
        assert!(eeg_stats.delivered >= 6, "EEG delivered {}", eeg_stats.delivered);
        assert!(
            eeg_stats.mean_command_ms <= 400.0,
            "EEG mean {}",
            eeg_stats.mean_command_ms
        );
        assert!(
            eeg_stats.p95_command_ms <= 400.0,
            "EEG p95 {}",
            eeg_stats.p95_command_ms
        );

        let emg_stats = outcome.latency.stats(Pathway::EmgElbow).unwrap();
        assert_eq!(emg_stats.delivered, 5, "EMG delivered");
        // Debounce lower bound: persistence / frame rate.
        let debounce_floor = cfg.persistence_frames as f64 / cfg.emg_frame_hz * 1000.0;
        assert!(debounce_floor >= 400.0);
        for record in outcome
            .latency
            .records
            .iter()
            .filter(|r| r.pathway == Pathway::EmgElbow)
        {
            if let Some(latency) = record.command_latency_ms() {
                assert!(latency >= 400.0, "EMG latency {latency} under the floor");
            }
        }
        assert!(
            emg_stats.mean_command_ms >= 640.0 && emg_stats.mean_command_ms <= 960.0,
            "EMG mean {}",
            emg_stats.mean_command_ms
        );
        assert!(
            start.elapsed().as_secs_f64() < 10.0,
            "criterion overran 10 s"
        );
    });
}

#[test]
fn acceptance_10_determinism() {
    criterion("10 determinism", || {
        // Full pipeline runs: byte-identical event logs.
        let cfg = SimConfig {
            loss_probability: 0.15,
            emg_frame_hz: 20.0,
            ..SimConfig::default()
        };
        let scenarios = [
            Scenario::calibration(CalibrationPlan {
                rest_ms: 5000.0,
                light_ms: 3000.0,
                strong_ms: 3000.0,
            }),
            Scenario::eeg(
                6000.0,
                &[(1000.0, 300.0), (2500.0, 300.0), (4000.0, 300.0), (5200.0, 300.0)],
            ),
            Scenario::emg(4000.0, &[(500.0, 500.0, ContractionLevel::Strong)]),
        ];
        let a = run_simulation(&cfg, &scenarios, None).unwrap();
        let b = run_simulation(&cfg, &scenarios, None).unwrap();
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        assert_eq!(a.latency.records_csv(), b.latency.records_csv());
        assert_eq!(
            a.eeg_session.as_ref().unwrap().write_to_string(),
            b.eeg_session.as_ref().unwrap().write_to_string()
        );

        // Training determinism: byte-identical weights.
        let sessions = synthetic_blink_sessions(2, 900);
        let dataset = build_dataset(&sessions, &DatasetConfig::default()).unwrap();
        let hp = Hyperparams {
            max_epochs: 15,
            seed: 11,
            ..Hyperparams::default()
        };
        let first = train(&dataset, &hp).unwrap();
        let second = train(&dataset, &hp).unwrap();
        let mut bytes_first = Vec::new();
        first.classifier.save(&mut bytes_first).unwrap();
        let mut bytes_second = Vec::new();
        second.classifier.save(&mut bytes_second).unwrap();
        assert_eq!(bytes_first, bytes_second);
    });
}
