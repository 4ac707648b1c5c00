//! Design-space sweep over `(θl, lCD)`, optimum selection and calibration of the
//! installation angle.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::LinkageGeometry;
use crate::kinematics::{self, Linkage};
use crate::roots::bisect;
use crate::statics::{self, max_torque_over_workspace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error("sweep range {name} is invalid: {reason}")]
    BadRange { name: &'static str, reason: String },
    #[error("no lCD row is feasible over the whole theta_l axis")]
    NoFeasibleRow,
}

/// Inclusive arithmetic range `start, start + step, …, end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl SweepRange {
    pub const fn new(start: f64, end: f64, step: f64) -> Self {
        Self { start, end, step }
    }

    pub fn values(&self, name: &'static str) -> Result<Vec<f64>, OptimizerError> {
        let bad = |reason: &str| OptimizerError::BadRange { name, reason: reason.to_owned() };
        if !(self.start.is_finite() && self.end.is_finite() && self.step.is_finite()) {
            return Err(bad("non-finite bound"));
        }
        if self.step <= 0.0 {
            return Err(bad("step must be positive"));
        }
        if self.end < self.start {
            return Err(bad("end precedes start"));
        }
        let span = (self.end - self.start) / self.step;
        // Tolerate representation error in the step count, e.g. 100° / 1°.
        let n = (span + 1e-9).floor() as usize;
        let mut v: Vec<f64> = (0..=n).map(|i| self.start + self.step * i as f64).collect();
        let last = v.last_mut().expect("at least one value");
        if (*last - self.end).abs() <= 1e-9 * self.step {
            *last = self.end;
        }
        Ok(v)
    }
}

/// Sweep ranges used by default: `θl ∈ [-40°, 60°]` at 1°, `lCD ∈ [100, 250] mm` at 5 mm.
pub fn default_ranges() -> (SweepRange, SweepRange) {
    (
        SweepRange::new((-40f64).to_radians(), 60f64.to_radians(), 1f64.to_radians()),
        SweepRange::new(0.100, 0.250, 0.005),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub theta_s: f64,
    /// Signed servo torque, N·m.
    pub t_s: f64,
}

/// Servo angle and torque sampled over `(lCD, θl)`; rows are `lCD`, columns `θl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub base: LinkageGeometry,
    pub w: f64,
    pub theta_l_axis: Vec<f64>,
    pub lcd_axis: Vec<f64>,
    /// `None` marks an infeasible or singular cell.
    pub cells: Vec<Vec<Option<SweepCell>>>,
}

/// Evaluates one grid point; infeasible and singular points give `None`.
pub fn evaluate_cell(geom: &LinkageGeometry, theta_l: f64, w: f64) -> Option<SweepCell> {
    let theta_s = kinematics::servo_angle(geom, theta_l).ok()?.theta_s;
    let t_s = statics::servo_torque(geom, theta_l, w).ok()?.t_s;
    Some(SweepCell { theta_s, t_s })
}

pub fn sweep(
    geom: &LinkageGeometry,
    theta_l: SweepRange,
    lcd: SweepRange,
    w: f64,
) -> Result<SweepGrid, OptimizerError> {
    let theta_l_axis = theta_l.values("theta_l")?;
    let lcd_axis = lcd.values("lCD")?;
    if lcd_axis[0] <= 0.0 {
        return Err(OptimizerError::BadRange { name: "lCD", reason: "lengths must be positive".into() });
    }
    let cells = lcd_axis
        .iter()
        .map(|&l| {
            let g = geom.with_lcd(l);
            theta_l_axis.iter().map(|&t| evaluate_cell(&g, t, w)).collect()
        })
        .collect();
    Ok(SweepGrid { base: *geom, w, theta_l_axis, lcd_axis, cells })
}

/// Per-`lCD` summary over feasible `θl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowAggregate {
    pub lcd: f64,
    pub feasible_cells: usize,
    pub total_cells: usize,
    pub min_theta_s: Option<f64>,
    pub max_abs_torque: Option<f64>,
    /// Not dominated by another fully feasible row on both objectives.
    pub pareto: bool,
}

impl RowAggregate {
    pub fn fully_feasible(&self) -> bool {
        self.feasible_cells == self.total_cells
    }
}

impl SweepGrid {
    pub fn shape(&self) -> (usize, usize) {
        (self.lcd_axis.len(), self.theta_l_axis.len())
    }

    pub fn feasibility(&self) -> Vec<Vec<bool>> {
        self.cells.iter().map(|r| r.iter().map(Option::is_some).collect()).collect()
    }

    pub fn aggregates(&self) -> Vec<RowAggregate> {
        let mut rows: Vec<RowAggregate> = self
            .lcd_axis
            .iter()
            .zip(&self.cells)
            .map(|(&lcd, row)| {
                let feasible: Vec<&SweepCell> = row.iter().flatten().collect();
                let min_theta_s = feasible.iter().map(|c| c.theta_s).reduce(f64::min);
                let max_abs_torque = feasible.iter().map(|c| c.t_s.abs()).reduce(f64::max);
                RowAggregate {
                    lcd,
                    feasible_cells: feasible.len(),
                    total_cells: row.len(),
                    min_theta_s,
                    max_abs_torque,
                    pareto: false,
                }
            })
            .collect();
        let objectives: Vec<Option<(f64, f64)>> = rows
            .iter()
            .map(|r| match (r.fully_feasible(), r.min_theta_s, r.max_abs_torque) {
                (true, Some(a), Some(t)) => Some((a, t)),
                _ => None,
            })
            .collect();
        for (i, row) in rows.iter_mut().enumerate() {
            let Some((a, t)) = objectives[i] else { continue };
            row.pareto = !objectives.iter().flatten().any(|&(a2, t2)| a2 <= a && t2 <= t && (a2 < a || t2 < t));
        }
        rows
    }
}

/// How [`select_optimum`] trades servo angle against torque. Both objectives are minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Criterion {
    /// Smallest `lCD` whose min `θs` and max `|T_s|` are both within the given
    /// fractions of their best values over fully feasible rows. When no row
    /// qualifies, the row with the smallest worst-case relative gap wins.
    Moderate {
        angle_tol: f64,
        torque_tol: f64,
    },
    MinTorque,
    MinAngle,
}

impl Default for Criterion {
    fn default() -> Self {
        Criterion::Moderate { angle_tol: 0.05, torque_tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub lcd: f64,
    pub min_theta_s: f64,
    pub max_abs_torque: f64,
    /// Whether the moderate criterion was met outright (always true for the pure criteria).
    pub within_tolerance: bool,
    pub table: Vec<RowAggregate>,
}

fn relative_gap(value: f64, best: f64) -> f64 {
    let d = value - best;
    if d == 0.0 {
        0.0
    } else if best == 0.0 {
        f64::INFINITY
    } else {
        d / best.abs()
    }
}

pub fn select_optimum(grid: &SweepGrid, criterion: Criterion) -> Result<Optimum, OptimizerError> {
    let table = grid.aggregates();
    let mut candidates: Vec<(f64, f64, f64)> = table
        .iter()
        .filter(|r| r.fully_feasible())
        .filter_map(|r| Some((r.lcd, r.min_theta_s?, r.max_abs_torque?)))
        .collect();
    if candidates.is_empty() {
        return Err(OptimizerError::NoFeasibleRow);
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best_angle = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let best_torque = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let pick_min = |key: fn(&(f64, f64, f64)) -> f64| {
        *candidates.iter().min_by(|a, b| key(a).total_cmp(&key(b)).then(a.0.total_cmp(&b.0))).expect("non-empty")
    };
    let (chosen, within_tolerance) = match criterion {
        Criterion::MinTorque => (pick_min(|c| c.2), true),
        Criterion::MinAngle => (pick_min(|c| c.1), true),
        Criterion::Moderate { angle_tol, torque_tol } => {
            let worst_gap = |c: &(f64, f64, f64)| {
                (relative_gap(c.1, best_angle) / angle_tol).max(relative_gap(c.2, best_torque) / torque_tol)
            };
            match candidates.iter().find(|c| worst_gap(c) <= 1.0) {
                Some(c) => (*c, true),
                None => {
                    let c = candidates
                        .iter()
                        .min_by(|a, b| worst_gap(a).total_cmp(&worst_gap(b)).then(a.0.total_cmp(&b.0)))
                        .expect("non-empty");
                    (*c, false)
                }
            }
        }
    };
    Ok(Optimum { lcd: chosen.0, min_theta_s: chosen.1, max_abs_torque: chosen.2, within_tolerance, table })
}

/// What the installation angle is calibrated against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CalibrationTarget {
    /// Workspace minimum of `θs` at the given `lCD`.
    MinServoAngle { theta_s: f64, l_cd: f64 },
    /// Workspace maximum of `|T_s|` at the given `lCD` and load.
    MaxTorque { torque: f64, l_cd: f64, w: f64 },
}

impl CalibrationTarget {
    /// Largest |residual| accepted as a solution.
    pub fn tolerance(&self) -> f64 {
        match self {
            CalibrationTarget::MinServoAngle { .. } => 0.05f64.to_radians(),
            CalibrationTarget::MaxTorque { .. } => 1e-6,
        }
    }

    fn l_cd(&self) -> f64 {
        match *self {
            CalibrationTarget::MinServoAngle { l_cd, .. } | CalibrationTarget::MaxTorque { l_cd, .. } => l_cd,
        }
    }

    /// Achieved value minus target at one installation angle; `None` when the
    /// geometry is infeasible or non-monotone somewhere in the workspace.
    pub fn residual(&self, geom: &LinkageGeometry, theta_ins: f64) -> Option<f64> {
        let g = geom.with_lcd(self.l_cd()).with_theta_ins(theta_ins);
        let link = Linkage::new(g).ok()?;
        match *self {
            CalibrationTarget::MinServoAngle { theta_s, .. } => Some(link.servo_range().0 - theta_s),
            CalibrationTarget::MaxTorque { torque, w, .. } => Some(max_torque_over_workspace(&g, w).ok()?.0 - torque),
        }
    }
}

impl fmt::Display for CalibrationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CalibrationTarget::MinServoAngle { theta_s, l_cd } => {
                write!(f, "min servo angle {:.3}° at lCD = {:.1} mm", theta_s.to_degrees(), l_cd * 1e3)
            }
            CalibrationTarget::MaxTorque { torque, l_cd, w } => {
                write!(f, "max |T_s| {torque} N·m at lCD = {:.1} mm, w = {w} N", l_cd * 1e3)
            }
        }
    }
}

impl CalibrationTarget {
    /// Formats a residual in the target's display unit.
    pub fn format_residual(&self, r: f64) -> String {
        match self {
            CalibrationTarget::MinServoAngle { .. } => format!("{:+.3}°", r.to_degrees()),
            CalibrationTarget::MaxTorque { .. } => format!("{r:+.6} N·m"),
        }
    }
}

/// Sampled residual curve over the search interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualCurve {
    pub points: Vec<(f64, Option<f64>)>,
}

impl ResidualCurve {
    /// Admissible sample with the smallest |residual|.
    pub fn closest(&self) -> Option<(f64, f64)> {
        self.points.iter().filter_map(|&(t, r)| r.map(|r| (t, r))).min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", describe_failure(.target, .interval, .curve))]
pub struct CalibrationError {
    pub target: CalibrationTarget,
    pub interval: (f64, f64),
    pub curve: ResidualCurve,
}

fn describe_failure(target: &CalibrationTarget, interval: &(f64, f64), curve: &ResidualCurve) -> String {
    let head = format!(
        "calibration failed: no installation angle in ({:.2}°, {:.2}°) meets {target}",
        interval.0.to_degrees(),
        interval.1.to_degrees()
    );
    match curve.closest() {
        Some((t, r)) => format!(
            "{head}; closest admissible theta_ins = {:.3}° with residual {}",
            t.to_degrees(),
            target.format_residual(r)
        ),
        None => format!("{head}; no admissible installation angle in the interval"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub theta_ins: f64,
    pub residual: f64,
    pub curve: ResidualCurve,
}

/// Residual curve sampling step, rad.
pub const CALIBRATION_SCAN_STEP: f64 = 0.25 * std::f64::consts::PI / 180.0;

/// Finds `θins` in the open `interval` that meets `target`.
///
/// The interval is scanned at [`CALIBRATION_SCAN_STEP`]; the first sign change
/// between admissible samples is refined by bisection.
pub fn calibrate_installation_angle(
    geom: &LinkageGeometry,
    target: CalibrationTarget,
    interval: (f64, f64),
) -> Result<Calibration, CalibrationError> {
    let (lo, hi) = interval;
    let n = ((hi - lo) / CALIBRATION_SCAN_STEP).ceil().max(2.0) as usize;
    // Open interval: sample strictly inside.
    let points: Vec<(f64, Option<f64>)> = (1..n)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            (t, target.residual(geom, t))
        })
        .collect();
    let curve = ResidualCurve { points };
    let fail = |curve: ResidualCurve| CalibrationError { target, interval, curve };

    let bracket = curve.points.windows(2).find_map(|w| match (w[0], w[1]) {
        ((a, Some(ra)), (b, Some(rb))) if ra == 0.0 || ra.signum() != rb.signum() => Some((a, b)),
        _ => None,
    });
    let Some((a, b)) = bracket else { return Err(fail(curve)) };
    let root = bisect(|t| target.residual(geom, t).unwrap_or(f64::NAN), a, b, 1e-13);
    match root.and_then(|t| target.residual(geom, t).map(|r| (t, r))) {
        Some((theta_ins, residual)) if residual.abs() <= target.tolerance() => {
            Ok(Calibration { theta_ins, residual, curve })
        }
        _ => Err(fail(curve)),
    }
}

/// The angle target for the reference link set: min `θs` = 45.64° at `lCD` = 160 mm.
pub fn reference_angle_target() -> CalibrationTarget {
    CalibrationTarget::MinServoAngle { theta_s: 45.64f64.to_radians(), l_cd: 0.160 }
}

/// The torque target for the reference link set: max `|T_s|` = 2.8 N·m at `lCD` = 160 mm, w = 9.8 N.
pub fn reference_torque_target() -> CalibrationTarget {
    CalibrationTarget::MaxTorque { torque: 2.8, l_cd: 0.160, w: statics::REFERENCE_LOAD }
}

/// Search interval for installation angles, `(0°, 90°)`.
pub fn default_interval() -> (f64, f64) {
    (0.0, 90f64.to_radians())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g() -> LinkageGeometry {
        LinkageGeometry::reference()
    }

    #[test]
    fn range_values() {
        let (t, l) = default_ranges();
        assert_eq!(t.values("t").unwrap().len(), 101);
        assert_eq!(l.values("l").unwrap().len(), 31);
        assert_eq!(*l.values("l").unwrap().last().unwrap(), 0.250);
        assert_eq!(SweepRange::new(1.0, 1.0, 0.5).values("x").unwrap(), vec![1.0]);
        assert!(SweepRange::new(0.0, 1.0, 0.0).values("x").is_err());
        assert!(SweepRange::new(1.0, 0.0, 0.1).values("x").is_err());
    }

    #[test]
    fn grid_shape_and_pointwise_agreement() {
        let (t, l) = default_ranges();
        let grid = sweep(&g(), t, l, 9.8).unwrap();
        assert_eq!(grid.shape(), (31, 101));
        for (i, &lcd) in grid.lcd_axis.iter().enumerate() {
            for (j, &theta_l) in grid.theta_l_axis.iter().enumerate() {
                let geom = g().with_lcd(lcd);
                match (grid.cells[i][j], kinematics::servo_angle(&geom, theta_l)) {
                    (Some(c), Ok(sol)) => assert_eq!(c.theta_s, sol.theta_s),
                    (None, Ok(_)) => assert!(statics::servo_torque(&geom, theta_l, 9.8).is_err()),
                    (Some(_), Err(e)) => panic!("cell feasible but pointwise failed: {e}"),
                    (None, Err(_)) => {}
                }
            }
        }
    }

    #[test]
    fn singleton_grid_returns_its_row() {
        let (t, _) = default_ranges();
        let grid = sweep(&g(), t, SweepRange::new(0.16, 0.16, 0.005), 9.8).unwrap();
        let opt = select_optimum(&grid, Criterion::default()).unwrap();
        assert_eq!(opt.lcd, 0.16);
        assert!(opt.within_tolerance);
    }

    #[test]
    fn infeasible_grid_is_an_error() {
        let (t, _) = default_ranges();
        let geom = LinkageGeometry { l_bc: 0.001, ..g() };
        let grid = sweep(&geom, t, SweepRange::new(0.1, 0.2, 0.05), 9.8).unwrap();
        assert_eq!(select_optimum(&grid, Criterion::default()), Err(OptimizerError::NoFeasibleRow));
    }

    #[test]
    fn selection_ignores_evaluation_order() {
        let (t, l) = default_ranges();
        let grid = sweep(&g(), t, l, 9.8).unwrap();
        let mut shuffled = grid.clone();
        shuffled.lcd_axis.reverse();
        shuffled.cells.reverse();
        for row in &mut shuffled.cells {
            row.reverse();
        }
        shuffled.theta_l_axis.reverse();
        for c in [Criterion::default(), Criterion::MinTorque, Criterion::MinAngle] {
            let a = select_optimum(&grid, c).unwrap();
            let b = select_optimum(&shuffled, c).unwrap();
            assert_eq!((a.lcd, a.min_theta_s, a.max_abs_torque), (b.lcd, b.min_theta_s, b.max_abs_torque));
        }
    }

    #[test]
    fn pure_criteria() {
        let (t, l) = default_ranges();
        let grid = sweep(&g(), t, l, 9.8).unwrap();
        let rows: Vec<_> = grid.aggregates().into_iter().filter(|r| r.fully_feasible()).collect();
        let min_t = rows.iter().map(|r| r.max_abs_torque.unwrap()).fold(f64::INFINITY, f64::min);
        assert_eq!(select_optimum(&grid, Criterion::MinTorque).unwrap().max_abs_torque, min_t);
        let min_a = rows.iter().map(|r| r.min_theta_s.unwrap()).fold(f64::INFINITY, f64::min);
        assert_eq!(select_optimum(&grid, Criterion::MinAngle).unwrap().min_theta_s, min_a);
    }

    #[test]
    fn calibration_recovers_a_known_angle() {
        let known = 84.0f64.to_radians();
        let truth = g().with_theta_ins(known);
        let min = Linkage::new(truth).unwrap().servo_range().0;
        let target = CalibrationTarget::MinServoAngle { theta_s: min, l_cd: truth.l_cd };
        let cal = calibrate_installation_angle(&g(), target, default_interval()).unwrap();
        assert_abs_diff_eq!(cal.theta_ins, known, epsilon = 0.05f64.to_radians());
    }

    #[test]
    fn unreachable_target_fails_with_curve() {
        let target = CalibrationTarget::MinServoAngle { theta_s: (-500f64).to_radians(), l_cd: 0.16 };
        let err = calibrate_installation_angle(&g(), target, default_interval()).unwrap_err();
        assert!(!err.curve.points.is_empty());
        assert!(err.curve.closest().is_some());
        assert!(err.to_string().starts_with("calibration failed"));
    }

    #[test]
    fn reference_theta_ins_reproduces() {
        let cal = calibrate_installation_angle(&g(), reference_torque_target(), (0.0, std::f64::consts::PI)).unwrap();
        assert_abs_diff_eq!(cal.theta_ins, LinkageGeometry::REFERENCE_THETA_INS, epsilon = 1e-9);
    }
}
