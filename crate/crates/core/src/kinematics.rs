//! Parallelogram limb and four-bar driving linkage kinematics.
//!
//! The wheel position follows from the lifting angle directly. The servo angle
//! follows from closing triangles `ACD` and `ABC` with the law of cosines, where
//! the angle at `D` is `θD = π − θl − θins` and `B`, `D` sit on opposite sides of
//! the diagonal `AC`, so `θA = ∠BAC + ∠DAC` and `θs = θA − θins`.
//!
//! The inverse map `θs → θl` has no closed form and is found by bisection on a
//! [`Linkage`], which verifies monotonicity once at construction.

use std::cell::Cell;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{LinkageGeometry, Point2};
use crate::roots::bisect;

/// Slack allowed on arccos arguments before a configuration is declared infeasible.
pub const ACOS_EPS: f64 = 1e-9;
/// Angular tolerance on workspace bounds, rad.
pub const WORKSPACE_TOL: f64 = 1e-12;
/// Bisection bracket width for the inverse servo map, rad.
pub const INVERSE_XTOL: f64 = 1e-12;
/// Largest workspace sampling step used by [`workspace_check`], rad (0.1°).
pub const WORKSPACE_STEP: f64 = 0.1 * PI / 180.0;

/// The two triangles closed by the four-bar solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Triangle {
    /// Crank `AB`, coupler `BC`, diagonal `AC`.
    Abc,
    /// Ground bar `AD`, adjustable link `CD`, diagonal `AC`.
    Adc,
}

impl fmt::Display for Triangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Triangle::Abc => f.write_str("ABC"),
            Triangle::Adc => f.write_str("ADC"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("theta_l = {:.4}° is outside the workspace [{:.4}°, {:.4}°]", .theta_l.to_degrees(), .min.to_degrees(), .max.to_degrees())]
    OutOfWorkspace { theta_l: f64, min: f64, max: f64 },
    #[error("infeasible linkage at theta_l = {:.4}°: triangle {triangle} does not close (cosine {arg:.6})", .theta_l.to_degrees())]
    Infeasible { triangle: Triangle, theta_l: f64, arg: f64 },
    #[error("servo target {:.6}° is outside the achievable range [{:.6}°, {:.6}°]", .theta_s.to_degrees(), .min.to_degrees(), .max.to_degrees())]
    TargetOutOfRange { theta_s: f64, min: f64, max: f64 },
    #[error("servo angle is not monotonic in theta_l near {:.3}°; the inverse map is undefined", .theta_l.to_degrees())]
    NonMonotonic { theta_l: f64 },
    #[error("steer angle {:.3}° outside [0°, 90°]", .theta_z.to_degrees())]
    SteerOutOfRange { theta_z: f64 },
}

thread_local! {
    static CLAMPS: Cell<u64> = const { Cell::new(0) };
}

/// Number of arccos arguments clamped back into `[-1, 1]` on this thread.
///
/// A clamp happens only when an argument overshoots by at most [`ACOS_EPS`];
/// anything larger is an [`KinematicsError::Infeasible`] error.
pub fn acos_clamp_count() -> u64 {
    CLAMPS.with(|c| c.get())
}

/// arccos of a law-of-cosines argument, with the feasibility check.
pub(crate) fn acos_checked(arg: f64, triangle: Triangle, theta_l: f64) -> Result<f64, KinematicsError> {
    if !arg.is_finite() || arg.abs() > 1.0 + ACOS_EPS {
        return Err(KinematicsError::Infeasible { triangle, theta_l, arg });
    }
    if arg.abs() > 1.0 {
        CLAMPS.with(|c| c.set(c.get() + 1));
        return Ok(arg.clamp(-1.0, 1.0).acos());
    }
    Ok(arg.acos())
}

/// Angle opposite side `c` in a triangle with sides `a`, `b`, `c`.
pub(crate) fn law_of_cosines(a: f64, b: f64, c: f64, triangle: Triangle, theta_l: f64) -> Result<f64, KinematicsError> {
    acos_checked((a * a + b * b - c * c) / (2.0 * a * b), triangle, theta_l)
}

fn check_workspace(geom: &LinkageGeometry, theta_l: f64) -> Result<(), KinematicsError> {
    if geom.in_workspace(theta_l, WORKSPACE_TOL) {
        Ok(())
    } else {
        Err(KinematicsError::OutOfWorkspace { theta_l, min: geom.theta_dn, max: geom.theta_up })
    }
}

/// Wheel position for a lifting angle, without the workspace check.
pub fn wheel_position(geom: &LinkageGeometry, theta_l: f64) -> Point2 {
    let (s, c) = theta_l.sin_cos();
    Point2::new(geom.l1 * c, geom.l1 * s + geom.h - geom.r)
}

/// `p = (l1 cos θl, l1 sin θl + h − r)`.
pub fn fk_wheel_position(geom: &LinkageGeometry, theta_l: f64) -> Result<Point2, KinematicsError> {
    check_workspace(geom, theta_l)?;
    Ok(wheel_position(geom, theta_l))
}

/// Angle at joint `D` between `DA` and `DC`.
pub fn angle_at_d(geom: &LinkageGeometry, theta_l: f64) -> f64 {
    PI - theta_l - geom.theta_ins
}

/// Length of the diagonal `AC` from triangle `ACD`.
pub fn coupler_diagonal(geom: &LinkageGeometry, theta_l: f64) -> f64 {
    let (a, c) = (geom.l_ad, geom.l_cd);
    let sq = a * a + c * c - 2.0 * a * c * angle_at_d(geom, theta_l).cos();
    sq.max(0.0).sqrt()
}

/// Closed four-bar at one lifting angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourBarSolution {
    pub l_ac: f64,
    pub angle_bac: f64,
    pub angle_dac: f64,
    pub theta_a: f64,
    pub theta_s: f64,
}

/// Servo angle `θs = ∠BAC + ∠DAC − θins` for a lifting angle.
pub fn servo_angle(geom: &LinkageGeometry, theta_l: f64) -> Result<FourBarSolution, KinematicsError> {
    let l_ac = coupler_diagonal(geom, theta_l);
    let angle_bac = law_of_cosines(geom.l_ab, l_ac, geom.l_bc, Triangle::Abc, theta_l)?;
    let angle_dac = law_of_cosines(geom.l_ad, l_ac, geom.l_cd, Triangle::Adc, theta_l)?;
    let theta_a = angle_bac + angle_dac;
    Ok(FourBarSolution { l_ac, angle_bac, angle_dac, theta_a, theta_s: theta_a - geom.theta_ins })
}

/// Samples `[theta_dn, theta_up]` uniformly with at most `max_step` spacing, endpoints included.
pub fn workspace_samples(geom: &LinkageGeometry, max_step: f64) -> impl Iterator<Item = f64> {
    let span = geom.theta_up - geom.theta_dn;
    let n = (span / max_step).ceil().max(1.0) as usize;
    let (lo, hi) = (geom.theta_dn, geom.theta_up);
    (0..=n).map(move |i| if i == n { hi } else { lo + span * i as f64 / n as f64 })
}

/// Outcome of [`workspace_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceReport {
    pub samples: usize,
    pub feasible: bool,
    /// First infeasible sample, if any.
    pub violation: Option<(f64, Triangle)>,
    pub monotonic: bool,
    /// `θs` grows with `θl` (only meaningful when monotonic).
    pub increasing: bool,
    pub theta_s_min: Option<f64>,
    pub theta_s_max: Option<f64>,
    /// The workspace covers the contour-following requirement `[-30°, 50°]`.
    pub covers_requirement: bool,
}

impl WorkspaceReport {
    pub fn passes(&self) -> bool {
        self.feasible && self.monotonic
    }
}

/// Contour-following range the limb must at least reach.
pub const REQUIRED_RANGE_DEG: (f64, f64) = (-30.0, 50.0);

/// Samples the workspace at ≤ 0.1° and reports four-bar closure, monotonicity
/// of `θs(θl)` and the servo angle range.
pub fn workspace_check(geom: &LinkageGeometry) -> WorkspaceReport {
    let mut samples = 0;
    let mut violation = None;
    let mut values = Vec::new();
    for theta_l in workspace_samples(geom, WORKSPACE_STEP) {
        samples += 1;
        match servo_angle(geom, theta_l) {
            Ok(sol) => values.push((theta_l, sol.theta_s)),
            Err(KinematicsError::Infeasible { triangle, .. }) => {
                if violation.is_none() {
                    violation = Some((theta_l, triangle));
                }
            }
            Err(_) => unreachable!("servo_angle only reports infeasibility"),
        }
    }
    let feasible = violation.is_none();
    let (monotonic, increasing) = monotonicity(&values);
    let fold =
        |init: f64, f: fn(f64, f64) -> f64| (!values.is_empty()).then(|| values.iter().map(|v| v.1).fold(init, f));
    let covers_requirement = geom.theta_dn <= REQUIRED_RANGE_DEG.0.to_radians() + WORKSPACE_TOL
        && geom.theta_up >= REQUIRED_RANGE_DEG.1.to_radians() - WORKSPACE_TOL;
    WorkspaceReport {
        samples,
        feasible,
        violation,
        monotonic: feasible && monotonic,
        increasing,
        theta_s_min: fold(f64::INFINITY, f64::min),
        theta_s_max: fold(f64::NEG_INFINITY, f64::max),
        covers_requirement,
    }
}

fn monotonicity(values: &[(f64, f64)]) -> (bool, bool) {
    if values.len() < 2 {
        return (true, true);
    }
    let inc = values.windows(2).all(|w| w[1].1 > w[0].1);
    let dec = values.windows(2).all(|w| w[1].1 < w[0].1);
    (inc || dec, inc)
}

/// A geometry verified feasible and monotone over its workspace, with the servo
/// range cached for inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linkage {
    geom: LinkageGeometry,
    theta_s_dn: f64,
    theta_s_up: f64,
}

impl Linkage {
    pub fn new(geom: LinkageGeometry) -> Result<Self, KinematicsError> {
        let report = workspace_check(&geom);
        if let Some((theta_l, triangle)) = report.violation {
            let arg = f64::NAN;
            return Err(KinematicsError::Infeasible { triangle, theta_l, arg });
        }
        if !report.monotonic {
            return Err(KinematicsError::NonMonotonic { theta_l: first_reversal(&geom) });
        }
        let theta_s_dn = servo_angle(&geom, geom.theta_dn)?.theta_s;
        let theta_s_up = servo_angle(&geom, geom.theta_up)?.theta_s;
        Ok(Self { geom, theta_s_dn, theta_s_up })
    }

    pub fn geometry(&self) -> &LinkageGeometry {
        &self.geom
    }

    /// Servo angles at `theta_dn` and `theta_up`.
    pub fn servo_endpoints(&self) -> (f64, f64) {
        (self.theta_s_dn, self.theta_s_up)
    }

    pub fn servo_range(&self) -> (f64, f64) {
        (self.theta_s_dn.min(self.theta_s_up), self.theta_s_dn.max(self.theta_s_up))
    }

    /// `θl = f⁻¹(θs)` by bisection over the workspace.
    pub fn inverse_servo(&self, theta_s: f64) -> Result<f64, KinematicsError> {
        let (min, max) = self.servo_range();
        if !(theta_s >= min - WORKSPACE_TOL && theta_s <= max + WORKSPACE_TOL) {
            return Err(KinematicsError::TargetOutOfRange { theta_s, min, max });
        }
        if theta_s == self.theta_s_dn {
            return Ok(self.geom.theta_dn);
        }
        if theta_s == self.theta_s_up {
            return Ok(self.geom.theta_up);
        }
        let geom = self.geom;
        let residual = |theta_l: f64| match servo_angle(&geom, theta_l) {
            Ok(sol) => sol.theta_s - theta_s,
            Err(_) => f64::NAN,
        };
        bisect(residual, geom.theta_dn, geom.theta_up, INVERSE_XTOL * 1e-3).ok_or(KinematicsError::TargetOutOfRange {
            theta_s,
            min,
            max,
        })
    }

    /// Wheel position reached at a servo angle.
    pub fn fk_from_servo(&self, theta_s: f64) -> Result<Point2, KinematicsError> {
        let theta_l = self.inverse_servo(theta_s)?;
        fk_wheel_position(&self.geom, theta_l)
    }
}

fn first_reversal(geom: &LinkageGeometry) -> f64 {
    let pts: Vec<(f64, f64)> = workspace_samples(geom, WORKSPACE_STEP)
        .filter_map(|t| servo_angle(geom, t).ok().map(|s| (t, s.theta_s)))
        .collect();
    let sign0 = pts.windows(2).map(|w| (w[1].1 - w[0].1).signum()).next().unwrap_or(0.0);
    pts.windows(2).find(|w| (w[1].1 - w[0].1).signum() != sign0).map(|w| w[0].0).unwrap_or(geom.theta_dn)
}

/// One-shot inverse; builds and verifies a [`Linkage`] on every call.
pub fn inverse_servo(geom: &LinkageGeometry, theta_s: f64) -> Result<f64, KinematicsError> {
    Linkage::new(*geom)?.inverse_servo(theta_s)
}

pub fn fk_from_servo(geom: &LinkageGeometry, theta_s: f64) -> Result<Point2, KinematicsError> {
    Linkage::new(*geom)?.fk_from_servo(theta_s)
}
