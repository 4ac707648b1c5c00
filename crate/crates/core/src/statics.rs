//! Quasi-static force transmission through the four-bar.
//!
//! The wheel load `w` produces a moment `l1·w·cos θl` about the limb pivot `D`.
//! Link `CD` balances it through the coupler force `F_BC` acting at transmission
//! angle `θC = ∠BCD`, and the crank `AB` carries it back to the servo at `∠ABC = θB`:
//!
//! ```text
//! F_BC = l1·w·cos θl / (lCD·sin θC)
//! T_s  = −lAB·F_BC·sin θB
//! ```
//!
//! The crank length `lAB` is the moment arm that turns the coupler force into a
//! torque. [`virtual_work_torque`] computes the same torque from `dθs/dθl`
//! without touching the force path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{LinkageGeometry, ServoSpec};
use crate::kinematics::{self, law_of_cosines, KinematicsError, Triangle};

/// Servo torques are computed against this reference wheel load, N.
pub const REFERENCE_LOAD: f64 = 9.8;
/// |sin θC| at or below this is a transmission singularity.
pub const SINGULAR_SIN_C: f64 = 1e-6;
/// Central-difference step for [`virtual_work_torque`], rad.
pub const VIRTUAL_WORK_STEP: f64 = 1e-6;
pub const DEFAULT_SAFETY_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StaticsError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("transmission singularity at theta_l = {:.4}°: |sin theta_C| = {sin_c:.3e}", .theta_l.to_degrees())]
    Singular { theta_l: f64, sin_c: f64 },
    #[error("servo angle derivative {derivative:.3e} too small at theta_l = {:.4}°", .theta_l.to_degrees())]
    FlatServoMap { theta_l: f64, derivative: f64 },
    #[error("load scale must be positive, got {0}")]
    BadLoadScale(f64),
}

/// Internal angles and loads at one lifting angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceResolution {
    pub theta_b: f64,
    pub theta_c: f64,
    /// Coupler member force, N.
    pub f_bc: f64,
    /// Signed servo torque, N·m (negative opposes the gravity moment).
    pub t_s: f64,
}

impl ForceResolution {
    pub fn torque_magnitude(&self) -> f64 {
        self.t_s.abs()
    }
}

/// `(θB, θC)` with `θB = ∠ABC` and `θC = ∠ACB + ∠ACD`.
pub fn internal_angles(geom: &LinkageGeometry, theta_l: f64) -> Result<(f64, f64), KinematicsError> {
    let l_ac = kinematics::coupler_diagonal(geom, theta_l);
    let theta_b = law_of_cosines(geom.l_ab, geom.l_bc, l_ac, Triangle::Abc, theta_l)?;
    let acb = law_of_cosines(l_ac, geom.l_bc, geom.l_ab, Triangle::Abc, theta_l)?;
    let acd = law_of_cosines(l_ac, geom.l_cd, geom.l_ad, Triangle::Adc, theta_l)?;
    Ok((theta_b, acb + acd))
}

/// Coupler force and servo torque holding wheel load `w` at `theta_l`.
pub fn servo_torque(geom: &LinkageGeometry, theta_l: f64, w: f64) -> Result<ForceResolution, StaticsError> {
    let (theta_b, theta_c) = internal_angles(geom, theta_l)?;
    let sin_c = theta_c.sin();
    if sin_c.abs() <= SINGULAR_SIN_C {
        return Err(StaticsError::Singular { theta_l, sin_c });
    }
    let f_bc = geom.l1 * w * theta_l.cos() / (geom.l_cd * sin_c);
    let t_s = -geom.l_ab * f_bc * theta_b.sin();
    Ok(ForceResolution { theta_b, theta_c, f_bc, t_s })
}

/// Torque from the virtual-work balance `T·dθs = l1·w·cos θl·dθl`.
pub fn virtual_work_torque(geom: &LinkageGeometry, theta_l: f64, w: f64) -> Result<f64, StaticsError> {
    let h = VIRTUAL_WORK_STEP;
    let fwd = kinematics::servo_angle(geom, theta_l + h)?.theta_s;
    let back = kinematics::servo_angle(geom, theta_l - h)?.theta_s;
    let derivative = (fwd - back) / (2.0 * h);
    if derivative.abs() < 1e-9 {
        return Err(StaticsError::FlatServoMap { theta_l, derivative });
    }
    Ok(geom.l1 * w * theta_l.cos() / derivative)
}

/// Largest |T_s| over the workspace sampled at ≤ 0.1°, with the `θl` where it occurs.
pub fn max_torque_over_workspace(geom: &LinkageGeometry, w: f64) -> Result<(f64, f64), StaticsError> {
    let mut best = (0.0, geom.theta_dn);
    for theta_l in kinematics::workspace_samples(geom, kinematics::WORKSPACE_STEP) {
        let t = servo_torque(geom, theta_l, w)?.torque_magnitude();
        if t > best.0 {
            best = (t, theta_l);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoMargin {
    pub name: String,
    /// Steady torque, N·m.
    pub capacity: f64,
    /// capacity / demand; infinite for zero demand.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingReport {
    pub reference_load: f64,
    pub load_scale: f64,
    /// Scaled worst-case torque, N·m.
    pub demand: f64,
    pub worst_theta_l: f64,
    pub safety_factor: f64,
    pub servos: Vec<ServoMargin>,
}

pub(crate) fn margin(name: &str, capacity: f64, demand: f64, safety_factor: f64) -> ServoMargin {
    let margin = if demand > 0.0 { capacity / demand } else { f64::INFINITY };
    ServoMargin { name: name.to_owned(), capacity, margin, pass: margin >= safety_factor }
}

/// Worst-case servo demand over the workspace at [`REFERENCE_LOAD`] × `load_scale`,
/// with each servo's capacity margin.
pub fn motor_sizing(
    geom: &LinkageGeometry,
    load_scale: f64,
    servos: &[ServoSpec],
    safety_factor: f64,
) -> Result<SizingReport, StaticsError> {
    if !(load_scale.is_finite() && load_scale > 0.0) {
        return Err(StaticsError::BadLoadScale(load_scale));
    }
    let (peak, worst_theta_l) = max_torque_over_workspace(geom, REFERENCE_LOAD)?;
    let demand = peak * load_scale;
    let servos = servos.iter().map(|s| margin(&s.name, s.steady_torque, demand, safety_factor)).collect();
    Ok(SizingReport { reference_load: REFERENCE_LOAD, load_scale, demand, worst_theta_l, safety_factor, servos })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ServoRole;
    use crate::units::kgcm_to_newton_metre;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn g() -> LinkageGeometry {
        LinkageGeometry::reference()
    }

    #[test]
    fn equilateral_crank_triangle_gives_sixty_degrees() {
        let mut geom = g();
        geom.l_ab = 0.15;
        geom.l_bc = 0.15;
        let theta_d =
            ((geom.l_ad.powi(2) + geom.l_cd.powi(2) - 0.15f64.powi(2)) / (2.0 * geom.l_ad * geom.l_cd)).acos();
        let theta_l = PI - theta_d - geom.theta_ins;
        let (theta_b, _) = internal_angles(&geom, theta_l).unwrap();
        assert_abs_diff_eq!(theta_b, PI / 3.0, epsilon = 1e-7);
    }

    #[test]
    fn right_angle_at_d_theta_b() {
        let geom = g();
        let theta_l = PI / 2.0 - geom.theta_ins;
        let (theta_b, _) = internal_angles(&geom, theta_l).unwrap();
        let l_ac: f64 = (0.102f64.powi(2) + 0.160f64.powi(2)).sqrt();
        let expected = ((0.12f64.powi(2) + 0.13f64.powi(2) - l_ac * l_ac) / (2.0 * 0.12 * 0.13)).acos();
        assert_abs_diff_eq!(theta_b, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(theta_b.to_degrees(), 98.671_507, epsilon = 1e-4);
    }

    #[test]
    fn vertical_limb_and_zero_load_carry_no_torque() {
        let mut geom = g();
        geom.theta_up = PI / 2.0;
        let f = servo_torque(&geom, PI / 2.0, 9.8).unwrap();
        assert_abs_diff_eq!(f.t_s, 0.0, epsilon = 1e-14);
        let f = servo_torque(&geom, 0.3, 0.0).unwrap();
        assert_eq!((f.t_s, f.f_bc), (0.0, 0.0));
        assert_abs_diff_eq!(virtual_work_torque(&geom, PI / 2.0, 9.8).unwrap(), 0.0, epsilon = 1e-14);
        assert_eq!(virtual_work_torque(&geom, 0.3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn torque_is_linear_in_load() {
        let geom = g();
        for deg in [-40.0f64, -5.0, 20.0, 59.0] {
            let t = deg.to_radians();
            let a = servo_torque(&geom, t, 9.8).unwrap().t_s;
            assert_eq!(servo_torque(&geom, t, -9.8).unwrap().t_s, -a);
            assert_relative_eq!(servo_torque(&geom, t, 19.6).unwrap().t_s, 2.0 * a, max_relative = 1e-12);
        }
    }

    #[test]
    fn force_balance_matches_virtual_work_on_reference() {
        let geom = g();
        for t in kinematics::workspace_samples(&geom, 1f64.to_radians()) {
            let fb = servo_torque(&geom, t, 9.8).unwrap().t_s;
            let vw = virtual_work_torque(&geom, t, 9.8).unwrap();
            assert_relative_eq!(fb.abs(), vw.abs(), max_relative = 1e-6);
        }
    }

    #[test]
    fn singular_transmission_is_an_error() {
        // lAC = lAB + lBC and lAC = lCD - lAD at θD = 0: B, C and D are collinear, θC = 0.
        let geom = LinkageGeometry { l_cd: 0.352, theta_ins: PI / 2.0, ..g() };
        let theta_l = PI - geom.theta_ins;
        assert!((kinematics::coupler_diagonal(&geom, theta_l) - 0.25).abs() < 1e-12);
        let err = servo_torque(&geom, theta_l, 9.8).unwrap_err();
        assert!(matches!(err, StaticsError::Singular { .. }), "{err}");
    }

    #[test]
    fn sizing_margins() {
        let geom = g();
        let servo = |name: &str, kgcm: f64| ServoSpec {
            name: name.into(),
            role: ServoRole::Lift,
            steady_torque: kgcm_to_newton_metre(kgcm).unwrap(),
            rated_speed: 8.0,
            angle_min: -PI,
            angle_max: PI,
        };
        let report = motor_sizing(&geom, 1.0, &[servo("servo-1", 500.0), servo("servo-3", 2.0)], 1.5).unwrap();
        assert_abs_diff_eq!(report.demand, 2.8, epsilon = 0.01);
        assert_abs_diff_eq!(report.servos[0].margin, 49.033_25 / report.demand, epsilon = 1e-9);
        assert!(report.servos[0].margin > 17.0 && report.servos[0].pass);
        assert!(report.servos[1].margin < 1.0 && !report.servos[1].pass);
        assert!(matches!(motor_sizing(&geom, 0.0, &[], 1.5), Err(StaticsError::BadLoadScale(_))));
        let doubled = motor_sizing(&geom, 2.0, &[], 1.5).unwrap();
        assert_relative_eq!(doubled.demand, 2.0 * report.demand, max_relative = 1e-12);
    }
}
