//! Quasi-static 2-D traverse of a two-axle rover carrying the limb.
//!
//! The ground is a polyline. Soft spans lower it by a prescribed sinkage, blended
//! over [`BLEND_RAMP`] at each span edge, so the effective surface is again a
//! polyline. The rover body rests with both axle points on the effective
//! surface. The limb is passive: the wheel drops until its circle first touches
//! the surface, which is the largest `θl` in the workspace with zero clearance.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimulationSettings;
use crate::geometry::{LinkageGeometry, Point2};
use crate::kinematics;
use crate::roots::bisect;
use crate::statics;
use crate::units::{AngleUnit, LengthUnit};

/// Width of the linear sinkage ramps at each soft-span edge, m.
pub const BLEND_RAMP: f64 = 0.05;
/// Pose fixed-point iteration limit and tolerance.
pub const POSE_MAX_ITER: usize = 50;
pub const POSE_TOL: f64 = 1e-9;
/// Downward scan step used to bracket first contact, rad.
pub const CONTACT_SCAN_STEP: f64 = 0.25 * std::f64::consts::PI / 180.0;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("terrain segment {index}: {reason}")]
    BadSegment { index: usize, reason: String },
    #[error("terrain x must be strictly increasing (vertex {index})")]
    NotIncreasing { index: usize },
    #[error("soft span {index}: {reason}")]
    BadSoftSpan { index: usize, reason: String },
    #[error("x = {x:.4} m is outside the terrain [{min:.4}, {max:.4}] m")]
    OutOfRange { x: f64, min: f64, max: f64 },
    #[error("rover pose did not converge at x = {x:.4} m")]
    PoseNotConverged { x: f64 },
    #[error("traverse step must be positive")]
    BadStep,
    #[error("cannot read terrain file {path}")]
    Io { path: String, source: std::io::Error },
    #[error("terrain file parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// A stretch of soft ground lowered by `depth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftSpan {
    pub x_start: f64,
    pub x_end: f64,
    pub depth: f64,
}

impl SoftSpan {
    /// Sinkage at `x`, ramped linearly over the first and last [`BLEND_RAMP`].
    pub fn sinkage_at(&self, x: f64) -> f64 {
        if x <= self.x_start || x >= self.x_end {
            return 0.0;
        }
        let ramp = self.ramp();
        let edge = (x - self.x_start).min(self.x_end - x);
        if edge >= ramp {
            self.depth
        } else {
            self.depth * edge / ramp
        }
    }

    fn ramp(&self) -> f64 {
        BLEND_RAMP.min(0.5 * (self.x_end - self.x_start))
    }

    fn breakpoints(&self) -> [f64; 4] {
        let r = self.ramp();
        [self.x_start, self.x_start + r, self.x_end - r, self.x_end]
    }
}

/// One piece of a terrain description: along-slope length, slope angle (rad),
/// optional soft sinkage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub length: f64,
    pub slope: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinkage: Option<f64>,
}

impl Segment {
    pub fn flat(length: f64) -> Self {
        Self { length, slope: 0.0, sinkage: None }
    }

    pub fn slope_deg(length: f64, deg: f64) -> Self {
        Self { length, slope: deg.to_radians(), sinkage: None }
    }

    pub fn soft(self, depth: f64) -> Self {
        Self { sinkage: Some(depth), ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainProfile {
    vertices: Vec<Point2>,
    soft_spans: Vec<SoftSpan>,
    #[serde(skip)]
    effective: Vec<Point2>,
}

impl TerrainProfile {
    pub fn new(vertices: Vec<Point2>, mut soft_spans: Vec<SoftSpan>) -> Result<Self, TerrainError> {
        if vertices.len() < 2 {
            return Err(TerrainError::BadSegment { index: 0, reason: "need at least two vertices".into() });
        }
        for (i, w) in vertices.windows(2).enumerate() {
            if !(w[0].is_finite() && w[1].is_finite()) || w[1].x <= w[0].x {
                return Err(TerrainError::NotIncreasing { index: i + 1 });
            }
        }
        soft_spans.sort_by(|a, b| a.x_start.total_cmp(&b.x_start));
        let (x0, xn) = (vertices[0].x, vertices[vertices.len() - 1].x);
        for (i, s) in soft_spans.iter().enumerate() {
            let bad = |reason: &str| TerrainError::BadSoftSpan { index: i, reason: reason.into() };
            if !(s.depth.is_finite() && s.depth >= 0.0) {
                return Err(bad("sinkage depth must be non-negative"));
            }
            if s.x_end.partial_cmp(&s.x_start) != Some(std::cmp::Ordering::Greater) {
                return Err(bad("x_end must exceed x_start"));
            }
            if s.x_start < x0 || s.x_end > xn {
                return Err(bad("span lies outside the terrain"));
            }
            if i > 0 && s.x_start < soft_spans[i - 1].x_end {
                return Err(bad("spans overlap"));
            }
        }
        let mut profile = Self { vertices, soft_spans, effective: Vec::new() };
        profile.effective = profile.build_effective();
        Ok(profile)
    }

    fn build_effective(&self) -> Vec<Point2> {
        let mut xs: Vec<f64> = self.vertices.iter().map(|p| p.x).collect();
        xs.extend(self.soft_spans.iter().flat_map(|s| s.breakpoints()));
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        xs.into_iter().map(|x| Point2::new(x, self.nominal_unchecked(x) - self.sinkage_unchecked(x))).collect()
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn soft_spans(&self) -> &[SoftSpan] {
        &self.soft_spans
    }

    /// The effective (sunk) surface as a polyline.
    pub fn effective_polyline(&self) -> &[Point2] {
        &self.effective
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.vertices[0].x, self.vertices[self.vertices.len() - 1].x)
    }

    fn check(&self, x: f64) -> Result<(), TerrainError> {
        let (min, max) = self.x_range();
        if x >= min && x <= max {
            Ok(())
        } else {
            Err(TerrainError::OutOfRange { x, min, max })
        }
    }

    fn nominal_unchecked(&self, x: f64) -> f64 {
        interpolate(&self.vertices, x)
    }

    fn sinkage_unchecked(&self, x: f64) -> f64 {
        self.soft_spans.iter().map(|s| s.sinkage_at(x)).sum()
    }

    pub fn nominal_height(&self, x: f64) -> Result<f64, TerrainError> {
        self.check(x)?;
        Ok(self.nominal_unchecked(x))
    }

    pub fn sinkage(&self, x: f64) -> Result<f64, TerrainError> {
        self.check(x)?;
        Ok(self.sinkage_unchecked(x))
    }

    /// Nominal surface height minus soft-span sinkage.
    pub fn effective_height(&self, x: f64) -> Result<f64, TerrainError> {
        self.check(x)?;
        Ok(interpolate(&self.effective, x))
    }

    /// The same ground seen driving the other way, over the same x range.
    pub fn mirrored(&self) -> Self {
        let (x0, xn) = self.x_range();
        let flip = |x: f64| x0 + xn - x;
        let vertices = self.vertices.iter().rev().map(|p| Point2::new(flip(p.x), p.z)).collect();
        let spans = self
            .soft_spans
            .iter()
            .map(|s| SoftSpan { x_start: flip(s.x_end), x_end: flip(s.x_start), depth: s.depth })
            .collect();
        Self::new(vertices, spans).expect("mirror of a valid profile is valid")
    }

    /// Signed distance from `c` to the effective surface (negative below it) and
    /// the closest surface point.
    pub fn signed_distance(&self, c: Point2) -> (f64, Point2) {
        let mut best = (f64::INFINITY, self.effective[0]);
        for w in self.effective.windows(2) {
            let q = closest_on_segment(w[0], w[1], c);
            let d = c.distance(q);
            if d < best.0 {
                best = (d, q);
            }
        }
        let (min, max) = self.x_range();
        let below = c.x >= min && c.x <= max && c.z < interpolate(&self.effective, c.x);
        (if below { -best.0 } else { best.0 }, best.1)
    }
}

fn interpolate(poly: &[Point2], x: f64) -> f64 {
    let i = poly.partition_point(|p| p.x <= x);
    if i == 0 {
        return poly[0].z;
    }
    if i >= poly.len() {
        return poly[poly.len() - 1].z;
    }
    let (a, b) = (poly[i - 1], poly[i]);
    if x == a.x {
        return a.z;
    }
    a.z + (b.z - a.z) * (x - a.x) / (b.x - a.x)
}

fn closest_on_segment(a: Point2, b: Point2, c: Point2) -> Point2 {
    let (dx, dz) = (b.x - a.x, b.z - a.z);
    let t = (((c.x - a.x) * dx + (c.z - a.z) * dz) / (dx * dx + dz * dz)).clamp(0.0, 1.0);
    Point2::new(a.x + t * dx, a.z + t * dz)
}

/// Assembles a profile from segments laid left to right starting at the origin.
pub fn build_terrain(segments: &[Segment]) -> Result<TerrainProfile, TerrainError> {
    let Some(first) = segments.first() else {
        return Err(TerrainError::BadSegment { index: 0, reason: "no segments".into() });
    };
    if first.slope != 0.0 {
        return Err(TerrainError::BadSegment { index: 0, reason: "first segment must be flat".into() });
    }
    let mut vertices = vec![Point2::new(0.0, 0.0)];
    let mut spans = Vec::new();
    for (index, s) in segments.iter().enumerate() {
        let bad = |reason: &str| TerrainError::BadSegment { index, reason: reason.into() };
        if !(s.length.is_finite() && s.length > 0.0) {
            return Err(bad("length must be positive"));
        }
        if !(s.slope.is_finite() && s.slope.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(bad("slope must lie strictly between -90° and 90°"));
        }
        let start = *vertices.last().expect("seeded");
        let end = Point2::new(start.x + s.length * s.slope.cos(), start.z + s.length * s.slope.sin());
        if let Some(depth) = s.sinkage {
            if !(depth.is_finite() && depth >= 0.0) {
                return Err(bad("sinkage must be non-negative"));
            }
            spans.push(SoftSpan { x_start: start.x, x_end: end.x, depth });
        }
        vertices.push(end);
    }
    TerrainProfile::new(vertices, spans)
}

/// Segments of the built-in validation scenario: flat approach, 30° climb and
/// descent, then a 50°-walled sand trap whose floor sinks 100 mm.
///
/// | segment      | length (m) | slope |
/// |--------------|-----------:|------:|
/// | approach     | 2.0        |   0°  |
/// | climb        | 3.0        | +30°  |
/// | plateau      | 2.0        |   0°  |
/// | descent      | 3.0        | −30°  |
/// | flat         | 2.0        |   0°  |
/// | trap wall    | 0.1        | −50°  |
/// | trap floor   | 1.5 (soft, 0.100 m sinkage) | 0° |
/// | trap wall    | 0.1        | +50°  |
/// | run-out      | 3.0        |   0°  |
pub fn fig2_segments() -> Vec<Segment> {
    vec![
        Segment::flat(2.0),
        Segment::slope_deg(3.0, 30.0),
        Segment::flat(2.0),
        Segment::slope_deg(3.0, -30.0),
        Segment::flat(2.0),
        Segment::slope_deg(0.1, -50.0),
        Segment::flat(1.5).soft(0.100),
        Segment::slope_deg(0.1, 50.0),
        Segment::flat(3.0),
    ]
}

pub fn fig2_preset() -> TerrainProfile {
    build_terrain(&fig2_segments()).expect("preset is valid")
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TerrainUnits {
    length: LengthUnit,
    angle: AngleUnit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TerrainFile {
    #[serde(default)]
    units: TerrainUnits,
    segments: Vec<Segment>,
}

/// Parses a terrain document:
/// `{"units": {"length": "m", "angle": "deg"}, "segments": [{"length": 2, "slope": 0, "sinkage": 0.1}]}`.
pub fn terrain_from_json_str(text: &str) -> Result<TerrainProfile, TerrainError> {
    let file: TerrainFile = serde_json::from_str(text)?;
    let u = file.units;
    let segments: Vec<Segment> = file
        .segments
        .into_iter()
        .map(|s| Segment {
            length: u.length.to_si(s.length),
            slope: u.angle.to_si(s.slope),
            sinkage: s.sinkage.map(|d| u.length.to_si(d)),
        })
        .collect();
    build_terrain(&segments)
}

pub fn load_terrain(path: impl AsRef<Path>) -> Result<TerrainProfile, TerrainError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| TerrainError::Io { path: path.display().to_string(), source })?;
    terrain_from_json_str(&text)
}

/// Rover body pose: front-axle ground point and pitch (nose up positive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoverPose {
    pub x: f64,
    pub z: f64,
    pub pitch: f64,
}

impl RoverPose {
    /// Maps a rover-frame point (`x` forward, `z` up from the front-axle ground point) to the world.
    pub fn to_world(&self, p: Point2) -> Point2 {
        let (s, c) = self.pitch.sin_cos();
        Point2::new(self.x + c * p.x - s * p.z, self.z + s * p.x + c * p.z)
    }

    pub fn rear_axle(&self, wheelbase: f64) -> Point2 {
        self.to_world(Point2::new(-wheelbase, 0.0))
    }
}

/// Pose with both axle points on the effective surface.
pub fn solve_rover_pose(profile: &TerrainProfile, x_front: f64, wheelbase: f64) -> Result<RoverPose, TerrainError> {
    solve_rover_pose_from(profile, x_front, wheelbase, 0.0)
}

/// As [`solve_rover_pose`], starting the fixed-point iteration from `pitch_guess`.
pub fn solve_rover_pose_from(
    profile: &TerrainProfile,
    x_front: f64,
    wheelbase: f64,
    pitch_guess: f64,
) -> Result<RoverPose, TerrainError> {
    let z_front = profile.effective_height(x_front)?;
    let mut pitch = pitch_guess;
    for _ in 0..POSE_MAX_ITER {
        let x_rear = x_front - wheelbase * pitch.cos();
        let z_rear = profile.effective_height(x_rear)?;
        let sin = (z_front - z_rear) / wheelbase;
        if sin.abs() > 1.0 {
            return Err(TerrainError::PoseNotConverged { x: x_front });
        }
        let next = sin.asin();
        let moved = wheelbase * (next - pitch).abs();
        pitch = next;
        if moved <= POSE_TOL {
            return Ok(RoverPose { x: x_front, z: z_front, pitch });
        }
    }
    Err(TerrainError::PoseNotConverged { x: x_front })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Saturation {
    /// No ground within reach; the wheel hangs at `theta_dn`.
    Hanging,
    /// The wheel would penetrate even at `theta_up`.
    Jammed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub theta_l: f64,
    /// Closest point of the effective surface to the wheel.
    pub point: Point2,
    /// Tilt of the contact normal from vertical; positive when the ground rises ahead.
    pub contact_angle: f64,
    pub sinkage: f64,
    /// Wheel clearance to the surface at `theta_l`, m.
    pub clearance: f64,
    pub saturation: Option<Saturation>,
}

/// World position of the limb wheel centre.
pub fn wheel_center(geom: &LinkageGeometry, pose: &RoverPose, mount_offset: f64, theta_l: f64) -> Point2 {
    let (s, c) = theta_l.sin_cos();
    pose.to_world(Point2::new(mount_offset + geom.l1 * c, geom.h + geom.l1 * s))
}

/// Signed wheel clearance to the effective surface; negative means penetration.
pub fn clearance(
    geom: &LinkageGeometry,
    pose: &RoverPose,
    mount_offset: f64,
    profile: &TerrainProfile,
    theta_l: f64,
) -> f64 {
    profile.signed_distance(wheel_center(geom, pose, mount_offset, theta_l)).0 - geom.r
}

/// Lowers the passive limb onto the ground from the lift limit.
pub fn contact_solve(geom: &LinkageGeometry, pose: &RoverPose, mount_offset: f64, profile: &TerrainProfile) -> Contact {
    let gap = |t: f64| clearance(geom, pose, mount_offset, profile, t);
    let (theta_l, saturation) = if gap(geom.theta_up) < 0.0 {
        (geom.theta_up, Some(Saturation::Jammed))
    } else {
        let mut hi = geom.theta_up;
        let mut found = None;
        while hi > geom.theta_dn {
            let lo = (hi - CONTACT_SCAN_STEP).max(geom.theta_dn);
            if gap(lo) <= 0.0 {
                found = bisect(gap, lo, hi, 1e-14);
                break;
            }
            hi = lo;
        }
        match found {
            Some(t) => (t, None),
            None => (geom.theta_dn, Some(Saturation::Hanging)),
        }
    };
    let center = wheel_center(geom, pose, mount_offset, theta_l);
    let (d, point) = profile.signed_distance(center);
    let n = center - point;
    let contact_angle = if n.x == 0.0 && n.z == 0.0 { 0.0 } else { (-n.x * d.signum()).atan2(n.z * d.signum()) };
    Contact {
        theta_l,
        point,
        contact_angle,
        sinkage: profile.sinkage(point.x).unwrap_or(0.0),
        clearance: d - geom.r,
        saturation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub distance: f64,
    pub pose: RoverPose,
    pub theta_l: f64,
    pub theta_s: f64,
    pub t_s: Option<f64>,
    pub contact: Point2,
    pub contact_angle: f64,
    pub sinkage: f64,
    pub clearance: f64,
    pub saturation: Option<Saturation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraverseTrace {
    pub records: Vec<TraceRecord>,
}

/// Front-axle positions for which the rear axle and the whole limb reach stay on the terrain.
pub fn traverse_limits(geom: &LinkageGeometry, profile: &TerrainProfile, settings: &SimulationSettings) -> (f64, f64) {
    let (x0, xn) = profile.x_range();
    let reach = settings.mount_offset.abs() + geom.l1 + geom.r + geom.h;
    (x0 + settings.wheelbase + 1e-6, xn - reach)
}

/// Marches the rover forward in `settings.step` increments across the terrain.
pub fn traverse(
    geom: &LinkageGeometry,
    profile: &TerrainProfile,
    settings: &SimulationSettings,
) -> Result<TraverseTrace, TerrainError> {
    let (start, end) = traverse_limits(geom, profile, settings);
    traverse_between(geom, profile, settings, start, end)
}

pub fn traverse_between(
    geom: &LinkageGeometry,
    profile: &TerrainProfile,
    settings: &SimulationSettings,
    start: f64,
    end: f64,
) -> Result<TraverseTrace, TerrainError> {
    if !(settings.step.is_finite() && settings.step > 0.0) {
        return Err(TerrainError::BadStep);
    }
    let (lo, hi) = traverse_limits(geom, profile, settings);
    for x in [start, end] {
        if x < lo || x > hi {
            return Err(TerrainError::OutOfRange { x, min: lo, max: hi });
        }
    }
    let n = ((end - start) / settings.step + 1e-9).floor() as usize;
    let mut records = Vec::with_capacity(n + 1);
    let mut pitch = 0.0;
    for i in 0..=n {
        let x = start + settings.step * i as f64;
        let pose = solve_rover_pose_from(profile, x, settings.wheelbase, pitch)?;
        pitch = pose.pitch;
        let contact = contact_solve(geom, &pose, settings.mount_offset, profile);
        let theta_s = kinematics::servo_angle(geom, contact.theta_l).map(|s| s.theta_s).unwrap_or(f64::NAN);
        let t_s = statics::servo_torque(geom, contact.theta_l, settings.w).ok().map(|f| f.t_s);
        records.push(TraceRecord {
            distance: x - start,
            pose,
            theta_l: contact.theta_l,
            theta_s,
            t_s,
            contact: contact.point,
            contact_angle: contact.contact_angle,
            sinkage: contact.sinkage,
            clearance: contact.clearance,
            saturation: contact.saturation,
        });
    }
    Ok(TraverseTrace { records })
}

/// Limb angle on flat ground with a level rover: `asin((r − h)/l1)`.
pub fn flat_contact_angle(geom: &LinkageGeometry) -> f64 {
    ((geom.r - geom.h) / geom.l1).asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flat(len: f64) -> TerrainProfile {
        build_terrain(&[Segment::flat(len)]).unwrap()
    }

    #[test]
    fn single_flat_segment() {
        let t = flat(10.0);
        assert_eq!(t.vertices(), &[Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)]);
        assert_eq!(t.effective_height(3.3).unwrap(), 0.0);
    }

    #[test]
    fn ramp_rise() {
        let t = build_terrain(&[Segment::flat(1.0), Segment::slope_deg(2.0, 45.0)]).unwrap();
        let end = t.vertices()[2];
        assert_abs_diff_eq!(end.z, 2.0 * 45f64.to_radians().sin(), epsilon = 1e-15);
        assert_eq!(t.effective_height(t.vertices()[1].x).unwrap(), t.vertices()[1].z);
        assert_eq!(t.effective_height(end.x).unwrap(), end.z);
    }

    #[test]
    fn segment_errors() {
        assert!(build_terrain(&[Segment::slope_deg(1.0, 10.0)]).is_err());
        assert!(build_terrain(&[Segment::flat(1.0), Segment::slope_deg(1.0, 90.0)]).is_err());
        assert!(build_terrain(&[Segment::flat(1.0).soft(-0.1)]).is_err());
        assert!(build_terrain(&[Segment::flat(0.0)]).is_err());
        assert!(TerrainProfile::new(vec![Point2::new(0.0, 0.0), Point2::new(0.0, 1.0)], vec![]).is_err());
        let overlap =
            vec![SoftSpan { x_start: 0.0, x_end: 2.0, depth: 0.1 }, SoftSpan { x_start: 1.0, x_end: 3.0, depth: 0.1 }];
        assert!(TerrainProfile::new(vec![Point2::new(0.0, 0.0), Point2::new(5.0, 0.0)], overlap).is_err());
    }

    #[test]
    fn soft_span_lowers_and_blends() {
        let t = build_terrain(&[Segment::flat(1.0), Segment::flat(1.0).soft(0.1), Segment::flat(1.0)]).unwrap();
        assert_abs_diff_eq!(t.effective_height(1.5).unwrap(), -0.100, epsilon = 1e-15);
        assert_abs_diff_eq!(t.effective_height(1.025).unwrap(), -0.050, epsilon = 1e-12);
        assert_eq!(t.effective_height(1.0).unwrap(), 0.0);
        assert_eq!(t.effective_height(2.0).unwrap(), 0.0);
        assert!(t.effective_height(3.5).is_err());
    }

    #[test]
    fn fig2_has_the_scenario_faces() {
        let t = fig2_preset();
        let slopes: Vec<f64> =
            t.vertices().windows(2).map(|w| ((w[1].z - w[0].z) / (w[1].x - w[0].x)).atan().to_degrees()).collect();
        assert!(slopes.iter().any(|s| (s - 30.0).abs() < 1e-9));
        assert!(slopes.iter().any(|s| (s + 30.0).abs() < 1e-9));
        assert!(slopes.iter().any(|s| (s.abs() - 50.0).abs() < 1e-9));
        assert_eq!(t.soft_spans().len(), 1);
        assert_eq!(t.soft_spans()[0].depth, 0.100);
    }

    #[test]
    fn terrain_file_units() {
        let text = r#"{"units": {"length": "mm", "angle": "deg"},
            "segments": [{"length": 1000, "slope": 0}, {"length": 2000, "slope": 30, "sinkage": 50}]}"#;
        let t = terrain_from_json_str(text).unwrap();
        assert_abs_diff_eq!(t.vertices()[2].z, 1.0, epsilon = 1e-12);
        assert_eq!(t.soft_spans()[0].depth, 0.05);
        assert!(terrain_from_json_str(r#"{"segments": [], "extra": 1}"#).is_err());
    }

    #[test]
    fn level_pose_on_flat() {
        let p = solve_rover_pose(&flat(5.0), 2.0, 0.726).unwrap();
        assert_eq!(p.pitch, 0.0);
    }

    #[test]
    fn pitch_on_uniform_ramp() {
        let t = build_terrain(&[Segment::flat(1.0), Segment::slope_deg(5.0, 30.0)]).unwrap();
        let p = solve_rover_pose(&t, 1.0 + 4.0 * 30f64.to_radians().cos(), 0.726).unwrap();
        assert_abs_diff_eq!(p.pitch, 30f64.to_radians(), epsilon = 1e-9);
    }

    #[test]
    fn pitch_across_ramp_foot_matches_bisection() {
        let t = build_terrain(&[Segment::flat(2.0), Segment::slope_deg(3.0, 30.0)]).unwrap();
        let wb = 0.726;
        for x in [2.1, 2.3, 2.5, 2.6] {
            let p = solve_rover_pose(&t, x, wb).unwrap();
            let zf = t.effective_height(x).unwrap();
            let closure = |pitch: f64| zf - t.effective_height(x - wb * pitch.cos()).unwrap() - wb * pitch.sin();
            let oracle = bisect(closure, 0.0, 30f64.to_radians(), 1e-14).unwrap();
            assert!(p.pitch > 0.0 && p.pitch < 30f64.to_radians());
            assert_abs_diff_eq!(p.pitch, oracle, epsilon = 1e-8);
        }
    }

    #[test]
    fn flat_contact_closed_form() {
        let g = LinkageGeometry::reference();
        let pose = RoverPose { x: 2.0, z: 0.0, pitch: 0.0 };
        let c = contact_solve(&g, &pose, 0.0, &flat(5.0));
        let expected = ((0.100f64 - 0.150) / 0.370).asin();
        assert_abs_diff_eq!(expected.to_degrees(), -7.7659, epsilon = 1e-3);
        assert_abs_diff_eq!(c.theta_l, expected, epsilon = 1e-12);
        assert_eq!(c.saturation, None);
        assert_abs_diff_eq!(c.contact_angle, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.clearance, 0.0, epsilon = 1e-12);
        assert_eq!(c.sinkage, 0.0);
    }

    #[test]
    fn soft_ground_contact_shifts_by_sinkage() {
        let g = LinkageGeometry::reference();
        let t = build_terrain(&[Segment::flat(1.0), Segment::flat(3.0).soft(0.1), Segment::flat(1.0)]).unwrap();
        // Whole rover and wheel on the soft floor.
        let pose = solve_rover_pose(&t, 2.5, 0.726).unwrap();
        assert_abs_diff_eq!(pose.z, -0.1, epsilon = 1e-15);
        let c = contact_solve(&g, &pose, 0.0, &t);
        assert_abs_diff_eq!(c.theta_l, flat_contact_angle(&g), epsilon = 1e-12);
        assert_abs_diff_eq!(c.sinkage, 0.1, epsilon = 1e-12);
        // Level rover on firm ground with only the wheel over the soft floor.
        let pose = RoverPose { x: 1.0, z: 0.0, pitch: 0.0 };
        let t2 = build_terrain(&[Segment::flat(1.2), Segment::flat(3.0).soft(0.1), Segment::flat(1.0)]).unwrap();
        let c = contact_solve(&g, &pose, 0.0, &t2);
        assert_abs_diff_eq!(c.theta_l, ((g.r - g.h - 0.100) / g.l1).asin(), epsilon = 1e-12);
    }

    #[test]
    fn saturation_flags() {
        let g = LinkageGeometry::reference();
        // A deep pit ahead: nothing to touch.
        let pit = TerrainProfile::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.01, -5.0), Point2::new(5.0, -5.0)],
            vec![],
        )
        .unwrap();
        let c = contact_solve(&g, &RoverPose { x: 1.0, z: 0.0, pitch: 0.0 }, 0.0, &pit);
        assert_eq!(c.saturation, Some(Saturation::Hanging));
        assert_eq!(c.theta_l, g.theta_dn);
        // A wall right at the pivot.
        let wall = TerrainProfile::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.05, 0.0), Point2::new(1.06, 3.0), Point2::new(5.0, 3.0)],
            vec![],
        )
        .unwrap();
        let c = contact_solve(&g, &RoverPose { x: 1.0, z: 0.0, pitch: 0.0 }, 0.0, &wall);
        assert_eq!(c.saturation, Some(Saturation::Jammed));
        assert_eq!(c.theta_l, g.theta_up);
    }

    #[test]
    fn flat_traverse_is_constant() {
        let g = LinkageGeometry::reference();
        let settings = SimulationSettings { step: 0.05, ..Default::default() };
        let trace = traverse(&g, &flat(4.0), &settings).unwrap();
        assert!(trace.records.len() > 10);
        for r in &trace.records {
            assert_abs_diff_eq!(r.theta_l, flat_contact_angle(&g), epsilon = 1e-12);
        }
        assert!(trace.records.windows(2).all(|w| w[1].distance > w[0].distance));
    }

    #[test]
    fn bad_step_rejected() {
        let g = LinkageGeometry::reference();
        let settings = SimulationSettings { step: 0.0, ..Default::default() };
        assert!(matches!(traverse(&g, &flat(4.0), &settings), Err(TerrainError::BadStep)));
    }
}
