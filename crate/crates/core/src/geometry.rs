//! Mechanism parameters and the small value types shared across modules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A violated type invariant, named by the config key it came from.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field} must be {constraint}")]
pub struct InvariantError {
    pub field: String,
    pub constraint: String,
}

impl InvariantError {
    pub fn new(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Self { field: field.into(), constraint: constraint.into() }
    }
}

/// Planar point in the mechanism's sagittal plane: `x` forward, `z` up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point2 {
    pub x: f64,
    pub z: f64,
}

impl Point2 {
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.z - other.z)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.z - rhs.z)
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.z + rhs.z)
    }
}

/// Every parameter of the limb mechanism, in SI units.
///
/// `p = (l1 cos θl, l1 sin θl + h − r)` places the wheel's lowest point relative
/// to the rover ground datum below the limb pivot. The four-bar `A-B-C-D` maps the
/// lifting angle `θl` to the servo angle `θs`; `theta_ins` is the mounting angle
/// of the grounded bar `AD`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageGeometry {
    /// Parallelogram long side (limb length).
    pub l1: f64,
    /// Parallelogram short side. Layout only; no kinematic effect.
    pub l2: f64,
    #[serde(rename = "lAD")]
    pub l_ad: f64,
    #[serde(rename = "lAB")]
    pub l_ab: f64,
    #[serde(rename = "lBC")]
    pub l_bc: f64,
    /// The adjustable link, swept by the design optimizer.
    #[serde(rename = "lCD")]
    pub l_cd: f64,
    pub theta_ins: f64,
    /// Limb pivot height above the rover ground datum.
    pub h: f64,
    /// Test-wheel radius.
    pub r: f64,
    /// Lift-folding limit.
    pub theta_up: f64,
    /// Terrain-following limit.
    pub theta_dn: f64,
}

/// Parameters that are not fixed by the source data and were chosen for this tool.
pub const ASSUMED_PARAMETERS: &[(&str, &str)] = &[
    ("h", "default 0.150 m; not given numerically for the reference rover"),
    ("r", "default 0.100 m; not given numerically for the reference rover"),
    ("l2", "default 0.060 m; layout only"),
    (
        "theta_ins",
        "calibrated; the min servo-angle target is unreachable with the reference links, \
         so the default matches max |T_s| = 2.8 N·m at lCD = 160 mm, w = 9.8 N",
    ),
];

impl LinkageGeometry {
    /// Installation angle of the reference geometry, from
    /// [`crate::optimizer::calibrate_installation_angle`] with a 2.8 N·m max-torque target.
    pub const REFERENCE_THETA_INS: f64 = 1.750_101_199_776_029_4;

    /// Reference link set: `lAD 102, lAB 120, lBC 130, l1 370, lCD 160` mm,
    /// workspace `[-40°, 60°]`.
    pub fn reference() -> Self {
        Self {
            l1: 0.370,
            l2: 0.060,
            l_ad: 0.102,
            l_ab: 0.120,
            l_bc: 0.130,
            l_cd: 0.160,
            theta_ins: Self::REFERENCE_THETA_INS,
            h: 0.150,
            r: 0.100,
            theta_up: 60f64.to_radians(),
            theta_dn: (-40f64).to_radians(),
        }
    }

    pub fn with_lcd(&self, l_cd: f64) -> Self {
        Self { l_cd, ..*self }
    }

    pub fn with_theta_ins(&self, theta_ins: f64) -> Self {
        Self { theta_ins, ..*self }
    }

    /// Checks the scalar invariants. Four-bar closure over the workspace is
    /// checked separately by [`crate::kinematics::workspace_check`].
    pub fn validate(&self) -> Result<(), InvariantError> {
        let lengths = [
            ("l1", self.l1),
            ("l2", self.l2),
            ("lAD", self.l_ad),
            ("lAB", self.l_ab),
            ("lBC", self.l_bc),
            ("lCD", self.l_cd),
            ("h", self.h),
            ("r", self.r),
        ];
        for (name, v) in lengths {
            if !v.is_finite() {
                return Err(InvariantError::new(name, "finite"));
            }
            if v <= 0.0 {
                return Err(InvariantError::new(name, "positive"));
            }
        }
        for (name, v) in [("theta_ins", self.theta_ins), ("theta_up", self.theta_up), ("theta_dn", self.theta_dn)] {
            if !v.is_finite() {
                return Err(InvariantError::new(name, "finite"));
            }
        }
        if self.theta_dn >= self.theta_up {
            return Err(InvariantError::new("theta_dn", "less than theta_up"));
        }
        Ok(())
    }

    /// Whether `theta_l` lies in `[theta_dn, theta_up]`, allowing `tol` rad of slack.
    pub fn in_workspace(&self, theta_l: f64, tol: f64) -> bool {
        theta_l >= self.theta_dn - tol && theta_l <= self.theta_up + tol
    }
}

/// Limb configuration at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbState {
    pub theta_l: f64,
    pub theta_s: f64,
    pub wheel_pos: Point2,
    /// Wheel steer about the vertical axis, `[0, π/2]`.
    pub theta_z: f64,
}

pub const STEER_MIN: f64 = 0.0;
pub const STEER_MAX: f64 = std::f64::consts::FRAC_PI_2;

impl LimbState {
    /// Builds a consistent state from the lifting angle.
    pub fn at(geom: &LinkageGeometry, theta_l: f64, theta_z: f64) -> Result<Self, crate::kinematics::KinematicsError> {
        if !(STEER_MIN..=STEER_MAX).contains(&theta_z) {
            return Err(crate::kinematics::KinematicsError::SteerOutOfRange { theta_z });
        }
        let wheel_pos = crate::kinematics::fk_wheel_position(geom, theta_l)?;
        let theta_s = crate::kinematics::servo_angle(geom, theta_l)?.theta_s;
        Ok(Self { theta_l, theta_s, wheel_pos, theta_z })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServoRole {
    /// Lifts and places the limb through the four-bar.
    Lift,
    /// Rotates the test wheel about the vertical axis.
    Steer,
    /// Holds the stowed limb.
    Lock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoSpec {
    pub name: String,
    pub role: ServoRole,
    /// Steady-state torque, N·m.
    pub steady_torque: f64,
    /// Rated speed, rad/s.
    pub rated_speed: f64,
    pub angle_min: f64,
    pub angle_max: f64,
}

impl ServoSpec {
    pub fn validate(&self) -> Result<(), InvariantError> {
        let field = |f: &str| format!("servos[{}].{f}", self.name);
        if !(self.steady_torque.is_finite() && self.steady_torque > 0.0) {
            return Err(InvariantError::new(field("steady_torque"), "positive"));
        }
        if !(self.rated_speed.is_finite() && self.rated_speed > 0.0) {
            return Err(InvariantError::new(field("rated_speed"), "positive"));
        }
        if !(self.angle_min.is_finite() && self.angle_max.is_finite()) {
            return Err(InvariantError::new(field("angle_min"), "finite"));
        }
        if self.angle_min >= self.angle_max {
            return Err(InvariantError::new(field("angle_min"), "less than angle_max"));
        }
        Ok(())
    }

    /// Time to slew through `delta` rad at the rated speed.
    pub fn slew_time(&self, delta: f64) -> f64 {
        delta.abs() / self.rated_speed
    }
}
