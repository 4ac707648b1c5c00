//! Deployment state machine for the lift, steer and lock servos.
//!
//! ```text
//!   Locked <──lock/unlock──> Stowed ──deploy──> Deploying ──(motion complete)──> Deployed
//!                              ^                                                   │  ^
//!                              └──────────────────────stow─────────────────────────┘  │
//!                                                              Deployed ──place──> Placed ──lift──┘
//! ```
//!
//! `steer` is accepted in every mode except `Locked` and leaves the mode unchanged.
//! Each accepted command yields a constant-velocity setpoint trajectory at the
//! servo's rated speed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::geometry::{LinkageGeometry, ServoRole, ServoSpec, STEER_MAX, STEER_MIN};
use crate::kinematics::{self, KinematicsError, Linkage};
use crate::statics::{self, margin, ServoMargin};
use crate::terrain::{self, RoverPose, TerrainProfile};

/// Largest spacing between trajectory samples, rad.
pub const SAMPLE_SPACING: f64 = 1.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Stowed,
    Deploying,
    Deployed,
    Placed,
    Locked,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Stowed => "stowed",
            Mode::Deploying => "deploying",
            Mode::Deployed => "deployed",
            Mode::Placed => "placed",
            Mode::Locked => "locked",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Command {
    Deploy,
    Place,
    Lift,
    Stow,
    Lock,
    Unlock,
    /// Wheel steer angle, rad.
    Steer(f64),
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Deploy => f.write_str("deploy"),
            Command::Place => f.write_str("place"),
            Command::Lift => f.write_str("lift"),
            Command::Stow => f.write_str("stow"),
            Command::Lock => f.write_str("lock"),
            Command::Unlock => f.write_str("unlock"),
            Command::Steer(a) => write!(f, "steer {}", a.to_degrees()),
        }
    }
}

/// Parses one script line: `deploy`, `place`, `lift`, `stow`, `lock`, `unlock` or
/// `steer <degrees>`.
impl FromStr for Command {
    type Err = SequencerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut words = s.split_whitespace();
        let head = words.next().unwrap_or_default();
        let cmd = match head {
            "deploy" => Command::Deploy,
            "place" => Command::Place,
            "lift" => Command::Lift,
            "stow" => Command::Stow,
            "lock" => Command::Lock,
            "unlock" => Command::Unlock,
            "steer" => {
                let deg: f64 = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| SequencerError::Parse(format!("steer needs an angle in degrees: {s:?}")))?;
                Command::Steer(deg.to_radians())
            }
            _ => return Err(SequencerError::Parse(format!("unknown command {s:?}"))),
        };
        if words.next().is_some() {
            return Err(SequencerError::Parse(format!("trailing input in {s:?}")));
        }
        Ok(cmd)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SequencerError {
    #[error("illegal transition: {command} while {mode}")]
    IllegalTransition { mode: Mode, command: String },
    #[error("steer angle {:.3}° outside [0°, 90°]", .0.to_degrees())]
    SteerOutOfRange(f64),
    #[error("no servo with role {0:?} configured")]
    MissingServo(ServoRole),
    #[error("setpoint {name} = {:.3}° outside servo {servo} limits", .value.to_degrees())]
    SetpointOutOfLimits { name: &'static str, value: f64, servo: String },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("script parse error: {0}")]
    Parse(String),
}

/// Lift-servo angles held in each limb mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoints {
    pub stowed: f64,
    pub deployed: f64,
    pub placed: f64,
}

impl Setpoints {
    /// Stowed at `theta_up`, deployed at `deployed_theta_l`, placed at the ground
    /// contact for `pose` on `profile`.
    pub fn for_pose(
        geom: &LinkageGeometry,
        deployed_theta_l: f64,
        mount_offset: f64,
        pose: &RoverPose,
        profile: &TerrainProfile,
    ) -> Result<Self, KinematicsError> {
        let contact = terrain::contact_solve(geom, pose, mount_offset, profile);
        let s = |t: f64| kinematics::servo_angle(geom, t).map(|sol| sol.theta_s);
        Ok(Self { stowed: s(geom.theta_up)?, deployed: s(deployed_theta_l)?, placed: s(contact.theta_l)? })
    }

    /// As [`Setpoints::for_pose`] for a level rover on flat firm ground.
    pub fn flat_ground(
        geom: &LinkageGeometry,
        deployed_theta_l: f64,
        mount_offset: f64,
    ) -> Result<Self, KinematicsError> {
        let profile = terrain::build_terrain(&[terrain::Segment::flat(10.0)]).expect("flat terrain");
        let pose = RoverPose { x: 5.0, z: 0.0, pitch: 0.0 };
        Self::for_pose(geom, deployed_theta_l, mount_offset, &pose, &profile)
    }
}

/// Commanded mode and servo setpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequencerState {
    pub mode: Mode,
    pub theta_s: f64,
    pub theta_z: f64,
    pub locked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub angle: f64,
}

/// Time-stamped setpoints for one servo, starting at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoTrajectory {
    pub role: ServoRole,
    pub samples: Vec<TrajectorySample>,
}

impl ServoTrajectory {
    /// Constant-velocity move from `from` to `to` at `speed` rad/s.
    pub fn slew(role: ServoRole, from: f64, to: f64, speed: f64) -> Self {
        let delta = to - from;
        let duration = delta.abs() / speed;
        let n = (delta.abs() / SAMPLE_SPACING).ceil().max(1.0) as usize;
        let mut samples: Vec<TrajectorySample> = (0..n)
            .map(|i| {
                let f = i as f64 / n as f64;
                TrajectorySample { t: duration * f, angle: from + delta * f }
            })
            .collect();
        samples.push(TrajectorySample { t: duration, angle: to });
        Self { role, samples }
    }

    pub fn empty(role: ServoRole) -> Self {
        Self { role, samples: Vec::new() }
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn start(&self) -> Option<f64> {
        self.samples.first().map(|s| s.angle)
    }

    pub fn end(&self) -> Option<f64> {
        self.samples.last().map(|s| s.angle)
    }
}

/// Servo assignment and setpoints driving the state machine.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequencer {
    pub setpoints: Setpoints,
    pub lift: ServoSpec,
    pub steer: ServoSpec,
    pub lock: ServoSpec,
}

impl Sequencer {
    pub fn new(setpoints: Setpoints, servos: &[ServoSpec]) -> Result<Self, SequencerError> {
        let find = |role| servos.iter().find(|s| s.role == role).cloned().ok_or(SequencerError::MissingServo(role));
        let seq = Self {
            setpoints,
            lift: find(ServoRole::Lift)?,
            steer: find(ServoRole::Steer)?,
            lock: find(ServoRole::Lock)?,
        };
        for (name, value) in
            [("stowed", setpoints.stowed), ("deployed", setpoints.deployed), ("placed", setpoints.placed)]
        {
            if value < seq.lift.angle_min || value > seq.lift.angle_max {
                return Err(SequencerError::SetpointOutOfLimits { name, value, servo: seq.lift.name.clone() });
            }
        }
        Ok(seq)
    }

    /// Sequencer for the configured geometry on flat ground.
    pub fn from_config(cfg: &Config) -> Result<Self, SequencerError> {
        let sim = &cfg.simulation;
        let setpoints = Setpoints::flat_ground(&cfg.geometry, sim.deployed_theta_l, sim.mount_offset)?;
        Self::new(setpoints, &cfg.servos)
    }

    pub fn initial_state(&self) -> SequencerState {
        SequencerState { mode: Mode::Stowed, theta_s: self.setpoints.stowed, theta_z: 0.0, locked: false }
    }

    pub fn command(
        &self,
        state: SequencerState,
        cmd: Command,
    ) -> Result<(SequencerState, ServoTrajectory), SequencerError> {
        let illegal = || SequencerError::IllegalTransition { mode: state.mode, command: cmd.to_string() };
        let lift_to = |mode: Mode, target: f64| {
            let traj = ServoTrajectory::slew(ServoRole::Lift, state.theta_s, target, self.lift.rated_speed);
            (SequencerState { mode, theta_s: target, ..state }, traj)
        };
        let sp = self.setpoints;
        let out = match (state.mode, cmd) {
            (Mode::Locked, Command::Steer(_)) => return Err(illegal()),
            (_, Command::Steer(angle)) => {
                if !(STEER_MIN..=STEER_MAX).contains(&angle) {
                    return Err(SequencerError::SteerOutOfRange(angle));
                }
                let traj = ServoTrajectory::slew(ServoRole::Steer, state.theta_z, angle, self.steer.rated_speed);
                (SequencerState { theta_z: angle, ..state }, traj)
            }
            (Mode::Stowed, Command::Deploy) => lift_to(Mode::Deploying, sp.deployed),
            (Mode::Deployed, Command::Place) => lift_to(Mode::Placed, sp.placed),
            (Mode::Placed, Command::Lift) => lift_to(Mode::Deployed, sp.deployed),
            (Mode::Deployed, Command::Stow) => lift_to(Mode::Stowed, sp.stowed),
            (Mode::Stowed, Command::Lock) => {
                let traj = ServoTrajectory::slew(
                    ServoRole::Lock,
                    self.lock.angle_min,
                    self.lock.angle_max,
                    self.lock.rated_speed,
                );
                (SequencerState { mode: Mode::Locked, locked: true, ..state }, traj)
            }
            (Mode::Locked, Command::Unlock) => {
                let traj = ServoTrajectory::slew(
                    ServoRole::Lock,
                    self.lock.angle_max,
                    self.lock.angle_min,
                    self.lock.rated_speed,
                );
                (SequencerState { mode: Mode::Stowed, locked: false, ..state }, traj)
            }
            _ => return Err(illegal()),
        };
        Ok(out)
    }

    /// Finishes an in-progress deployment.
    pub fn complete(&self, state: SequencerState) -> Result<SequencerState, SequencerError> {
        match state.mode {
            Mode::Deploying => Ok(SequencerState { mode: Mode::Deployed, ..state }),
            mode => Err(SequencerError::IllegalTransition { mode, command: "complete".into() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    /// Worst |T_s| along the trajectory, N·m.
    pub demand: f64,
    pub worst_theta_l: Option<f64>,
    pub safety_factor: f64,
    pub servos: Vec<ServoMargin>,
}

impl BudgetReport {
    pub fn all_pass(&self) -> bool {
        self.servos.iter().all(|s| s.pass)
    }

    pub fn passes(&self, name: &str) -> Option<bool> {
        self.servos.iter().find(|s| s.name == name).map(|s| s.pass)
    }
}

/// Worst servo torque along a lift trajectory against each servo's capacity.
///
/// Only lift trajectories load a servo through the linkage; steer and lock moves
/// carry no modelled torque and pass vacuously. Samples outside a servo's angle
/// limits fail that servo.
pub fn validate_torque_budget(
    trajectory: &ServoTrajectory,
    geom: &LinkageGeometry,
    w: f64,
    servos: &[ServoSpec],
    safety_factor: f64,
) -> Result<BudgetReport, SequencerError> {
    let mut demand = 0.0;
    let mut worst_theta_l = None;
    if trajectory.role == ServoRole::Lift && !trajectory.samples.is_empty() {
        let link = Linkage::new(*geom)?;
        // Subdivide each sample interval tenfold.
        let mut angles = Vec::new();
        for pair in trajectory.samples.windows(2) {
            let (a, b) = (pair[0].angle, pair[1].angle);
            angles.extend((0..10).map(|k| a + (b - a) * k as f64 / 10.0));
        }
        angles.extend(trajectory.end());
        for theta_s in angles {
            let theta_l = link.inverse_servo(theta_s)?;
            let t = statics::servo_torque(geom, theta_l, w).map_err(|e| match e {
                statics::StaticsError::Kinematics(k) => SequencerError::Kinematics(k),
                other => SequencerError::Parse(other.to_string()),
            })?;
            if t.torque_magnitude() >= demand {
                demand = t.torque_magnitude();
                worst_theta_l = Some(theta_l);
            }
        }
    }
    let servos = servos
        .iter()
        .map(|s| {
            let mut m = margin(&s.name, s.steady_torque, demand, safety_factor);
            let outside = trajectory.samples.iter().any(|p| p.angle < s.angle_min || p.angle > s.angle_max);
            if outside && s.role == trajectory.role {
                m.pass = false;
            }
            m
        })
        .collect();
    Ok(BudgetReport { demand, worst_theta_l, safety_factor, servos })
}

/// One row of the event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub mode: Mode,
    pub theta_s: f64,
    pub theta_z: f64,
    pub locked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRun {
    pub events: Vec<Event>,
    pub trajectories: Vec<ServoTrajectory>,
    pub final_state: SequencerState,
}

/// Parses a script: one command per line, `#` comments and blank lines ignored.
pub fn parse_script(text: &str) -> Result<Vec<Command>, SequencerError> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or_default().trim();
            (!line.is_empty())
                .then(|| line.parse::<Command>().map_err(|e| SequencerError::Parse(format!("line {}: {e}", i + 1))))
        })
        .collect()
}

/// Executes commands back to back; a deployment completes when its motion ends.
pub fn run_script(seq: &Sequencer, commands: &[Command]) -> Result<ScriptRun, SequencerError> {
    let mut state = seq.initial_state();
    let mut t0 = 0.0;
    let mut events =
        vec![Event { t: 0.0, mode: state.mode, theta_s: state.theta_s, theta_z: state.theta_z, locked: state.locked }];
    let mut trajectories = Vec::new();
    for &cmd in commands {
        let (next, traj) = seq.command(state, cmd)?;
        for s in traj.samples.iter().skip(1) {
            let (theta_s, theta_z) = match traj.role {
                ServoRole::Lift => (s.angle, state.theta_z),
                ServoRole::Steer => (state.theta_s, s.angle),
                ServoRole::Lock => (state.theta_s, state.theta_z),
            };
            events.push(Event { t: t0 + s.t, mode: next.mode, theta_s, theta_z, locked: state.locked });
        }
        t0 += traj.duration();
        state = if next.mode == Mode::Deploying { seq.complete(next)? } else { next };
        events.push(Event {
            t: t0,
            mode: state.mode,
            theta_s: state.theta_s,
            theta_z: state.theta_z,
            locked: state.locked,
        });
        trajectories.push(traj);
    }
    Ok(ScriptRun { events, trajectories, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference_servos;
    use approx::assert_abs_diff_eq;

    fn seq() -> Sequencer {
        Sequencer::from_config(&Config::default()).unwrap()
    }

    #[test]
    fn nominal_deploy_place_lift_stow() {
        let s = seq();
        let st = s.initial_state();
        let (st, traj) = s.command(st, Command::Deploy).unwrap();
        assert_eq!(st.mode, Mode::Deploying);
        assert_eq!(traj.end(), Some(s.setpoints.deployed));
        let st = s.complete(st).unwrap();
        assert_eq!(st.mode, Mode::Deployed);
        let (st, traj) = s.command(st, Command::Place).unwrap();
        assert_eq!((st.mode, traj.end()), (Mode::Placed, Some(s.setpoints.placed)));
        let (st, _) = s.command(st, Command::Lift).unwrap();
        assert_eq!(st.mode, Mode::Deployed);
        let (st, traj) = s.command(st, Command::Stow).unwrap();
        assert_eq!((st.mode, traj.end()), (Mode::Stowed, Some(s.setpoints.stowed)));
        let (st, _) = s.command(st, Command::Lock).unwrap();
        assert!(st.locked && st.mode == Mode::Locked);
    }

    #[test]
    fn guarded_transitions() {
        let s = seq();
        let err = s.command(s.initial_state(), Command::Place).unwrap_err();
        assert_eq!(err.to_string(), "illegal transition: place while stowed");
        let (locked, _) = s.command(s.initial_state(), Command::Lock).unwrap();
        assert!(matches!(s.command(locked, Command::Steer(0.2)), Err(SequencerError::IllegalTransition { .. })));
        assert!(matches!(s.command(s.initial_state(), Command::Steer(2.0)), Err(SequencerError::SteerOutOfRange(_))));
        assert!(s.complete(s.initial_state()).is_err());
    }

    #[test]
    fn sixty_degree_move_takes_rated_time() {
        let speed = reference_servos()[0].rated_speed;
        let traj = ServoTrajectory::slew(ServoRole::Lift, 0.3, 0.3 + 60f64.to_radians(), speed);
        assert_abs_diff_eq!(traj.duration(), 0.12, epsilon = 1e-12);
        assert_eq!(traj.start(), Some(0.3));
        assert_eq!(traj.end(), Some(0.3 + 60f64.to_radians()));
        let dts: Vec<f64> = traj.samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        assert!(dts.iter().all(|dt| (dt - dts[0]).abs() < 1e-12));
    }

    #[test]
    fn budgets() {
        let cfg = Config::default();
        let s = seq();
        let servos = reference_servos();
        let (st, _) = s.command(s.initial_state(), Command::Deploy).unwrap();
        let st = s.complete(st).unwrap();
        let (st, _) = s.command(st, Command::Place).unwrap();
        let (_, lift) = s.command(st, Command::Lift).unwrap();
        let r1 = validate_torque_budget(&lift, &cfg.geometry, 9.8, &servos[..1], 1.5).unwrap();
        assert!(r1.all_pass());
        assert!(r1.servos[0].margin > 10.0);
        let r3 = validate_torque_budget(&lift, &cfg.geometry, 9.8, &servos[2..], 1.5).unwrap();
        assert!(!r3.all_pass());
        let empty = ServoTrajectory::empty(ServoRole::Lift);
        let r = validate_torque_budget(&empty, &cfg.geometry, 9.8, &servos, 1.5).unwrap();
        assert_eq!(r.demand, 0.0);
        assert!(r.all_pass());
    }

    #[test]
    fn script_parsing() {
        let cmds = parse_script("deploy\n# comment\n\nsteer 45\nplace  # go\n").unwrap();
        assert_eq!(cmds.len(), 3);
        assert!(matches!(cmds[1], Command::Steer(a) if (a - 45f64.to_radians()).abs() < 1e-15));
        assert!(parse_script("jump").is_err());
        assert!(parse_script("steer").is_err());
        assert!(parse_script("lift now").is_err());
    }

    #[test]
    fn script_run_ends_at_setpoints() {
        let s = seq();
        let run = run_script(&s, &parse_script("deploy\nplace\nsteer 30\nlift\nstow\nlock").unwrap()).unwrap();
        assert_eq!(run.final_state.mode, Mode::Locked);
        assert!(run.events.windows(2).all(|w| w[1].t >= w[0].t));
        let last = run.events.last().unwrap();
        assert_eq!(last.theta_s, s.setpoints.stowed);
        assert_abs_diff_eq!(last.theta_z, 30f64.to_radians(), epsilon = 0.0);
    }
}
