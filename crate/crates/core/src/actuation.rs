//! Servo command generation: trapezoidal velocity profiles, PWM pulse-width
//! mapping and per-joint scheduling for the four finger servos and the two
//! mirrored elbow servos.

use thiserror::Error;

use crate::blink::HandPosition;
use crate::emg::ElbowDirection;
use crate::protocol::MotionParams;

#[derive(Debug, Error, PartialEq)]
pub enum ActuationError {
    #[error("acceleration fraction must lie in (0, 0.5], got {0}")]
    InvalidAccelFraction(f64),
    #[error("profile duration must be non-negative and finite, got {0}")]
    InvalidDuration(f64),
    #[error("node is halted; command rejected")]
    Halted,
}

/// Symmetric trapezoidal motion profile: velocity ramps up over the
/// acceleration fraction of the duration, cruises, then ramps down over the
/// same fraction. Position is monotone from start to target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoProfile {
    pub start_deg: f64,
    pub target_deg: f64,
    pub duration_ms: f64,
    pub accel_fraction: f64,
}

impl ServoProfile {
    pub fn new(
        start_deg: f64,
        target_deg: f64,
        duration_ms: f64,
        accel_fraction: f64,
    ) -> Result<Self, ActuationError> {
        if !(accel_fraction > 0.0 && accel_fraction <= 0.5) {
            return Err(ActuationError::InvalidAccelFraction(accel_fraction));
        }
        if !duration_ms.is_finite() || duration_ms < 0.0 {
            return Err(ActuationError::InvalidDuration(duration_ms));
        }
        Ok(Self {
            start_deg,
            target_deg,
            duration_ms,
            accel_fraction,
        })
    }

    pub fn displacement_deg(&self) -> f64 {
        self.target_deg - self.start_deg
    }

    /// Cruise velocity in degrees per millisecond. With the default
    /// third/third/third split this is 1.5x the average velocity.
    fn cruise_velocity(&self) -> f64 {
        if self.duration_ms == 0.0 {
            return 0.0;
        }
        self.displacement_deg() / (self.duration_ms * (1.0 - self.accel_fraction))
    }

    /// Peak angular speed in degrees per second.
    pub fn peak_velocity_deg_per_s(&self) -> f64 {
        self.cruise_velocity().abs() * 1000.0
    }

    /// Position at `t_ms`, clamped to the profile endpoints outside
    /// [0, duration].
    pub fn position(&self, t_ms: f64) -> f64 {
        if self.duration_ms == 0.0 || self.displacement_deg() == 0.0 {
            return if t_ms < self.duration_ms {
                self.start_deg
            } else {
                self.target_deg
            };
        }
        let t = t_ms.clamp(0.0, self.duration_ms);
        let ramp = self.accel_fraction * self.duration_ms;
        let vc = self.cruise_velocity();
        if t < ramp {
            self.start_deg + 0.5 * (vc / ramp) * t * t
        } else if t < self.duration_ms - ramp {
            self.start_deg + 0.5 * vc * ramp + vc * (t - ramp)
        } else {
            let remaining = self.duration_ms - t;
            self.target_deg - 0.5 * (vc / ramp) * remaining * remaining
        }
    }

    /// Velocity at `t_ms` in degrees per millisecond: piecewise linear and
    /// continuous, zero outside the profile.
    pub fn velocity(&self, t_ms: f64) -> f64 {
        if self.duration_ms == 0.0
            || self.displacement_deg() == 0.0
            || t_ms < 0.0
            || t_ms > self.duration_ms
        {
            return 0.0;
        }
        let ramp = self.accel_fraction * self.duration_ms;
        let vc = self.cruise_velocity();
        if t_ms < ramp {
            vc * t_ms / ramp
        } else if t_ms < self.duration_ms - ramp {
            vc
        } else {
            vc * (self.duration_ms - t_ms) / ramp
        }
    }

    pub fn is_complete(&self, t_ms: f64) -> bool {
        t_ms >= self.duration_ms
    }
}

/// Mechanical limits and PWM endpoints for one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig {
    pub min_deg: f64,
    pub max_deg: f64,
    pub pulse_min_us: f64,
    pub pulse_max_us: f64,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            min_deg: 0.0,
            max_deg: 180.0,
            pulse_min_us: 1000.0,
            pulse_max_us: 2000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseMapping {
    pub pulse_us: u32,
    pub clamped: bool,
}

/// Linear angle-to-pulse map with round-half-to-even integer microseconds.
/// Angles outside the joint limits are clamped and flagged.
pub fn angle_to_pulse(cfg: &JointConfig, angle_deg: f64) -> PulseMapping {
    debug_assert!(cfg.min_deg < cfg.max_deg, "joint limits must be ordered");
    debug_assert!(
        cfg.pulse_min_us < cfg.pulse_max_us,
        "pulse widths must increase with angle"
    );
    let clamped_angle = angle_deg.clamp(cfg.min_deg, cfg.max_deg);
    let fraction = (clamped_angle - cfg.min_deg) / (cfg.max_deg - cfg.min_deg);
    let pulse = cfg.pulse_min_us + fraction * (cfg.pulse_max_us - cfg.pulse_min_us);
    PulseMapping {
        pulse_us: round_half_to_even(pulse),
        clamped: clamped_angle != angle_deg,
    }
}

fn round_half_to_even(x: f64) -> u32 {
    let floor = x.floor();
    let frac = x - floor;
    let base = floor as u32;
    match frac.partial_cmp(&0.5) {
        Some(std::cmp::Ordering::Greater) => base + 1,
        Some(std::cmp::Ordering::Less) => base,
        _ => base + base % 2,
    }
}

/// Joint addressing on the prosthetic: four finger servos and two elbow
/// servos (the second elbow servo mirrors the first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Joint {
    Finger(u8),
    Elbow(u8),
}

impl std::fmt::Display for Joint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Joint::Finger(i) => write!(f, "finger{i}"),
            Joint::Elbow(i) => write!(f, "elbow{i}"),
        }
    }
}

pub const FINGER_COUNT: u8 = 4;
pub const ELBOW_COUNT: u8 = 2;

/// Node-level motion command, decoded from the wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionCommand {
    HandToggle { motion: Option<MotionParams> },
    ElbowMove {
        direction: ElbowDirection,
        step_deg: f64,
        motion: MotionParams,
    },
}

#[derive(Debug, Clone)]
pub struct ActuatorConfig {
    pub finger_joint: JointConfig,
    pub elbow_joint: JointConfig,
    pub open_pose_deg: f64,
    pub closed_pose_deg: f64,
    pub accel_fraction: f64,
    /// Used when a command supplies no duration; scaled by the speed byte.
    pub full_speed_deg_per_s: f64,
    pub min_profile_ms: f64,
    pub max_profile_ms: f64,
}

impl Default for ActuatorConfig {
    fn default() -> Self {
        Self {
            finger_joint: JointConfig::default(),
            elbow_joint: JointConfig {
                min_deg: 0.0,
                max_deg: 150.0,
                ..JointConfig::default()
            },
            open_pose_deg: 10.0,
            closed_pose_deg: 160.0,
            accel_fraction: 1.0 / 3.0,
            full_speed_deg_per_s: 1080.0,
            min_profile_ms: 50.0,
            max_profile_ms: 200.0,
        }
    }
}

/// A profile bound to a joint and a start time on the simulation clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledProfile {
    pub joint: Joint,
    pub profile: ServoProfile,
    pub start_ms: f64,
}

impl ScheduledProfile {
    pub fn end_ms(&self) -> f64 {
        self.start_ms + self.profile.duration_ms
    }

    pub fn position_at(&self, now_ms: f64) -> f64 {
        self.profile.position(now_ms - self.start_ms)
    }
}

/// One row of the exportable motion trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t_ms: f64,
    pub joint: Joint,
    pub angle_deg: f64,
    pub pulse_us: u32,
}

/// Prosthetic-side actuator: holds current joint angles, schedules profiles
/// for incoming commands and refuses commands while halted.
#[derive(Debug, Clone)]
pub struct ArmActuator {
    cfg: ActuatorConfig,
    finger_deg: [f64; FINGER_COUNT as usize],
    elbow_deg: f64,
    hand: HandPosition,
    halted: bool,
    active: Vec<ScheduledProfile>,
    trace: Vec<TraceRow>,
}

impl ArmActuator {
    pub fn new(cfg: ActuatorConfig) -> Self {
        let open = cfg.open_pose_deg;
        Self {
            cfg,
            finger_deg: [open; FINGER_COUNT as usize],
            elbow_deg: 0.0,
            hand: HandPosition::Open,
            halted: false,
            active: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn hand_position(&self) -> HandPosition {
        self.hand
    }

    pub fn elbow_angle_deg(&self) -> f64 {
        self.elbow_deg
    }

    pub fn finger_angles_deg(&self) -> [f64; FINGER_COUNT as usize] {
        self.finger_deg
    }

    pub fn active_profiles(&self) -> &[ScheduledProfile] {
        &self.active
    }

    /// Stop all motion and latch the halted state.
    pub fn halt(&mut self, _now_ms: f64) {
        self.active.clear();
        self.halted = true;
    }

    pub fn resume(&mut self) {
        self.halted = false;
    }

    fn profile_duration_ms(&self, motion: &MotionParams, travel_deg: f64) -> f64 {
        if motion.duration_ms > 0 {
            return (motion.duration_ms as f64)
                .clamp(self.cfg.min_profile_ms, self.cfg.max_profile_ms);
        }
        // No explicit duration: derive one from the speed byte.
        let speed = motion.speed.max(1) as f64 / 255.0;
        let velocity = self.cfg.full_speed_deg_per_s * speed;
        let ms = travel_deg.abs() / velocity * 1000.0;
        ms.clamp(self.cfg.min_profile_ms, self.cfg.max_profile_ms)
    }

    /// Schedule profiles for a command. A hand toggle drives all four finger
    /// joints to the opposite pose; an elbow command drives both elbow
    /// servos symmetrically (the second is mirrored at trace time).
    ///
    /// Joint angles track the commanded targets: a new command supersedes
    /// any profile still active on the same joints and starts from the
    /// previous target.
    pub fn execute(
        &mut self,
        command: &MotionCommand,
        now_ms: f64,
    ) -> Result<Vec<ScheduledProfile>, ActuationError> {
        if self.halted {
            return Err(ActuationError::Halted);
        }
        match command {
            MotionCommand::HandToggle { .. } => {
                self.active.retain(|p| !matches!(p.joint, Joint::Finger(_)));
            }
            MotionCommand::ElbowMove { .. } => {
                self.active.retain(|p| !matches!(p.joint, Joint::Elbow(_)));
            }
        }

        let mut scheduled = Vec::new();
        match command {
            MotionCommand::HandToggle { motion } => {
                let motion = motion.unwrap_or_default();
                self.hand = self.hand.toggled();
                let target_pose = match self.hand {
                    HandPosition::Open => self.cfg.open_pose_deg,
                    HandPosition::Closed => self.cfg.closed_pose_deg,
                };
                for i in 0..FINGER_COUNT {
                    let start = self.finger_deg[i as usize];
                    let target = target_pose.clamp(
                        self.cfg.finger_joint.min_deg,
                        self.cfg.finger_joint.max_deg,
                    );
                    let duration = self.profile_duration_ms(&motion, target - start);
                    let profile =
                        ServoProfile::new(start, target, duration, self.cfg.accel_fraction)?;
                    scheduled.push(ScheduledProfile {
                        joint: Joint::Finger(i),
                        profile,
                        start_ms: now_ms,
                    });
                }
            }
            MotionCommand::ElbowMove {
                direction,
                step_deg,
                motion,
            } => {
                let delta = match direction {
                    ElbowDirection::Flex => *step_deg,
                    ElbowDirection::Extend => -*step_deg,
                };
                let start = self.elbow_deg;
                let target = (start + delta)
                    .clamp(self.cfg.elbow_joint.min_deg, self.cfg.elbow_joint.max_deg);
                let duration = if target == start {
                    0.0
                } else {
                    self.profile_duration_ms(motion, target - start)
                };
                let profile = ServoProfile::new(start, target, duration, self.cfg.accel_fraction)?;
                for i in 0..ELBOW_COUNT {
                    scheduled.push(ScheduledProfile {
                        joint: Joint::Elbow(i),
                        profile,
                        start_ms: now_ms,
                    });
                }
            }
        }

        for sched in &scheduled {
            match sched.joint {
                Joint::Finger(i) => self.finger_deg[i as usize] = sched.profile.target_deg,
                Joint::Elbow(0) => self.elbow_deg = sched.profile.target_deg,
                Joint::Elbow(_) => {}
            }
        }
        self.active.extend(scheduled.iter().cloned());
        Ok(scheduled)
    }

    /// Sample all active profiles at `now_ms`, appending to the trace;
    /// returns the joints whose profiles completed on this tick.
    pub fn tick(&mut self, now_ms: f64) -> Vec<Joint> {
        let mut completed = Vec::new();
        for sched in &self.active {
            let local = now_ms - sched.start_ms;
            let angle = sched.profile.position(local);
            // The second elbow servo is mounted mirrored.
            let (trace_angle, joint_cfg) = match sched.joint {
                Joint::Elbow(1) => (
                    self.cfg.elbow_joint.max_deg - angle,
                    &self.cfg.elbow_joint,
                ),
                Joint::Elbow(_) => (angle, &self.cfg.elbow_joint),
                Joint::Finger(_) => (angle, &self.cfg.finger_joint),
            };
            self.trace.push(TraceRow {
                t_ms: now_ms,
                joint: sched.joint,
                angle_deg: trace_angle,
                pulse_us: angle_to_pulse(joint_cfg, trace_angle).pulse_us,
            });
            if sched.profile.is_complete(local) {
                completed.push(sched.joint);
            }
        }
        self.active
            .retain(|p| !p.profile.is_complete(now_ms - p.start_ms));
        completed
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    /// Motion trace as CSV (`t_ms,joint,angle_deg,pulse_us`).
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t_ms,joint,angle_deg,pulse_us\n");
        for row in &self.trace {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.t_ms, row.joint, row.angle_deg, row.pulse_us
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_profile() -> ServoProfile {
        ServoProfile::new(0.0, 90.0, 150.0, 1.0 / 3.0).unwrap()
    }

    #[test]
    fn endpoints_are_exact() {
        let p = default_profile();
        assert_eq!(p.position(0.0), 0.0);
        assert_eq!(p.position(150.0), 90.0);
    }

    #[test]
    fn midpoint_and_peak_velocity_match_closed_form() {
        let p = default_profile();
        assert!((p.position(75.0) - 45.0).abs() <= 1e-9);
        assert!((p.peak_velocity_deg_per_s() - 900.0).abs() <= 1e-9);
    }

    #[test]
    fn constant_profile_never_moves() {
        let p = ServoProfile::new(30.0, 30.0, 100.0, 1.0 / 3.0).unwrap();
        for t in 0..=100 {
            assert_eq!(p.position(t as f64), 30.0);
            assert_eq!(p.velocity(t as f64), 0.0);
        }
    }

    #[test]
    fn out_of_range_times_clamp_to_endpoints() {
        let p = default_profile();
        assert_eq!(p.position(-5.0), 0.0);
        assert_eq!(p.position(1000.0), 90.0);
        assert_eq!(p.velocity(-5.0), 0.0);
        assert_eq!(p.velocity(1000.0), 0.0);
    }

    #[test]
    fn velocity_is_continuous_at_phase_boundaries() {
        let p = default_profile();
        let ramp = 50.0;
        for boundary in [ramp, 150.0 - ramp] {
            let before = p.velocity(boundary - 1e-9);
            let after = p.velocity(boundary + 1e-9);
            assert!((before - after).abs() < 1e-6);
        }
    }

    #[test]
    fn displacement_equals_velocity_integral() {
        for (start, target, duration, f) in [
            (0.0, 90.0, 150.0, 1.0 / 3.0),
            (10.0, -35.0, 80.0, 0.25),
            (-20.0, 120.0, 200.0, 0.5),
            (5.0, 5.5, 50.0, 0.1),
        ] {
            let p = ServoProfile::new(start, target, duration, f).unwrap();
            let steps = 200_000;
            let h = duration / steps as f64;
            let mut integral = 0.0;
            for i in 0..steps {
                let t0 = i as f64 * h;
                integral += 0.5 * (p.velocity(t0) + p.velocity(t0 + h)) * h;
            }
            let rel = (integral - p.displacement_deg()).abs()
                / p.displacement_deg().abs().max(1e-12);
            assert!(rel <= 1e-6, "profile {start}->{target}: rel err {rel}");
        }
    }

    #[test]
    fn default_pulse_map_endpoints() {
        let cfg = JointConfig::default();
        assert_eq!(angle_to_pulse(&cfg, 0.0).pulse_us, 1000);
        assert_eq!(angle_to_pulse(&cfg, 180.0).pulse_us, 2000);
        assert_eq!(angle_to_pulse(&cfg, 90.0).pulse_us, 1500);
    }

    #[test]
    fn out_of_range_angle_clamps_with_flag() {
        let cfg = JointConfig::default();
        let mapping = angle_to_pulse(&cfg, 200.0);
        assert_eq!(mapping.pulse_us, 2000);
        assert!(mapping.clamped);
        let mapping = angle_to_pulse(&cfg, -10.0);
        assert_eq!(mapping.pulse_us, 1000);
        assert!(mapping.clamped);
        assert!(!angle_to_pulse(&cfg, 90.0).clamped);
    }

    #[test]
    fn pulse_rounding_is_half_to_even() {
        // 0.27 deg -> 1001.5 us exactly; ties round to the even integer.
        let cfg = JointConfig::default();
        assert_eq!(round_half_to_even(1001.5), 1002);
        assert_eq!(round_half_to_even(1002.5), 1002);
        assert_eq!(round_half_to_even(1002.4), 1002);
        assert_eq!(round_half_to_even(1002.6), 1003);
        let _ = cfg;
    }

    #[test]
    fn hand_toggle_schedules_four_finger_profiles() {
        let mut arm = ArmActuator::new(ActuatorConfig::default());
        let scheduled = arm
            .execute(&MotionCommand::HandToggle { motion: None }, 0.0)
            .unwrap();
        assert_eq!(scheduled.len(), 4);
        assert_eq!(arm.hand_position(), HandPosition::Closed);
        for sched in &scheduled {
            assert!(matches!(sched.joint, Joint::Finger(_)));
            assert_eq!(sched.profile.target_deg, 160.0);
        }
    }

    #[test]
    fn elbow_command_drives_two_joints() {
        let mut arm = ArmActuator::new(ActuatorConfig::default());
        let cmd = MotionCommand::ElbowMove {
            direction: ElbowDirection::Flex,
            step_deg: 15.0,
            motion: MotionParams::default(),
        };
        let scheduled = arm.execute(&cmd, 0.0).unwrap();
        assert_eq!(scheduled.len(), 2);
        assert_eq!(arm.elbow_angle_deg(), 15.0);
    }

    #[test]
    fn elbow_at_limit_yields_zero_length_profile() {
        let mut arm = ArmActuator::new(ActuatorConfig::default());
        let flex = MotionCommand::ElbowMove {
            direction: ElbowDirection::Flex,
            step_deg: 15.0,
            motion: MotionParams::default(),
        };
        for _ in 0..10 {
            arm.execute(&flex, 0.0).unwrap();
        }
        assert_eq!(arm.elbow_angle_deg(), 150.0);
        let scheduled = arm.execute(&flex, 0.0).unwrap();
        assert_eq!(scheduled[0].profile.duration_ms, 0.0);
        assert_eq!(scheduled[0].profile.displacement_deg(), 0.0);
    }

    #[test]
    fn halted_node_rejects_commands() {
        let mut arm = ArmActuator::new(ActuatorConfig::default());
        arm.halt(0.0);
        let err = arm
            .execute(&MotionCommand::HandToggle { motion: None }, 1.0)
            .unwrap_err();
        assert_eq!(err, ActuationError::Halted);
        arm.resume();
        assert!(arm
            .execute(&MotionCommand::HandToggle { motion: None }, 2.0)
            .is_ok());
    }

    #[test]
    fn tick_reports_completion_and_records_trace() {
        let mut arm = ArmActuator::new(ActuatorConfig::default());
        arm.execute(&MotionCommand::HandToggle { motion: None }, 0.0)
            .unwrap();
        assert!(arm.tick(75.0).is_empty());
        let completed = arm.tick(150.0);
        assert_eq!(completed.len(), 4);
        assert!(arm.active_profiles().is_empty());
        assert!(!arm.trace().is_empty());
        let csv = arm.trace_csv();
        assert!(csv.starts_with("t_ms,joint,angle_deg,pulse_us\n"));
        assert!(csv.contains("finger0"));
    }
}
