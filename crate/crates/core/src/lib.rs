//! Mechanism analysis for a wheel-on-limb rover instrument.
//!
//! The limb is a parallelogram carrying a test wheel, lifted by a servo through
//! a four-bar linkage `A-B-C-D`: `AB` is the servo crank, `BC` the coupler,
//! `CD` the adjustable link rigid with the limb and `AD` the grounded bar.
//!
//! Modules, bottom up:
//!
//! * [`units`], [`geometry`], [`config`]: shared types and configuration.
//! * [`kinematics`]: wheel position, four-bar closure, servo angle and its inverse.
//! * [`statics`]: coupler force and servo torque, with a virtual-work cross-check.
//! * [`optimizer`]: `(theta_l, l_CD)` response sweeps, optimum pick, installation-angle calibration.
//! * [`terrain`]: quasi-static 2-D traverse with passive contour following.
//! * [`sequencer`]: deploy/place/lift/stow/lock state machine and torque budgets.
//!
//! All quantities are SI internally (m, rad, N, N·m, s).

pub mod config;
pub mod geometry;
pub mod kinematics;
pub mod optimizer;
pub mod roots;
pub mod sequencer;
pub mod statics;
pub mod terrain;
pub mod units;

pub use config::{load_config, Config, ConfigError, SimulationSettings};
pub use geometry::{LimbState, LinkageGeometry, Point2, ServoRole, ServoSpec};
pub use kinematics::{FourBarSolution, KinematicsError, Linkage, Triangle, WorkspaceReport};
pub use optimizer::{CalibrationError, CalibrationTarget, Criterion, SweepGrid};
pub use sequencer::{Command, Mode, Sequencer, SequencerError, SequencerState, ServoTrajectory, Setpoints};
pub use statics::{ForceResolution, StaticsError};
pub use terrain::{TerrainError, TerrainProfile, TraverseTrace};
