//! Structured-text (JSON) configuration.
//!
//! ```json
//! {
//!   "units": { "length": "mm", "angle": "deg", "torque": "kgcm", "speed": "s_per_60deg" },
//!   "geometry": { "l1": 370, "lAD": 102, "lAB": 120, "lBC": 130, "lCD": 160,
//!                 "theta_ins": 100.273, "h": 150, "r": 100, "theta_up": 60, "theta_dn": -40 },
//!   "servos": [ { "name": "servo-1", "role": "lift", "steady_torque": 500,
//!                 "rated_speed": 0.12, "angle_min": -60, "angle_max": 150 } ],
//!   "simulation": { "w": 9.8, "wheelbase": 726, "step": 10 }
//! }
//! ```
//!
//! `units` applies to every length, angle, torque and servo speed in the file;
//! each defaults to SI (`m`, `rad`, `Nm`, `rad_per_s`). The wheel load `w` is
//! always newtons. Omitted optional values take the defaults of
//! [`LinkageGeometry::reference`] and [`SimulationSettings::default`]. Unknown keys
//! are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{InvariantError, LinkageGeometry, ServoRole, ServoSpec};
use crate::units::{AngleUnit, LengthUnit, SpeedUnit, TorqueUnit};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(#[from] InvariantError),
}

/// Scenario settings shared by the simulator, sequencer and sizing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    /// Wheel load, N.
    pub w: f64,
    pub wheelbase: f64,
    /// Limb pivot ahead of the front axle, m.
    pub mount_offset: f64,
    /// Traverse step, m.
    pub step: f64,
    pub safety_factor: f64,
    pub load_scale: f64,
    /// Limb angle held in the `Deployed` mode, rad.
    pub deployed_theta_l: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            w: crate::statics::REFERENCE_LOAD,
            wheelbase: 0.726,
            mount_offset: 0.0,
            step: 0.01,
            safety_factor: crate::statics::DEFAULT_SAFETY_FACTOR,
            load_scale: 1.0,
            deployed_theta_l: 0.0,
        }
    }
}

/// A validated configuration in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub geometry: LinkageGeometry,
    pub servos: Vec<ServoSpec>,
    pub simulation: SimulationSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            geometry: LinkageGeometry::reference(),
            servos: reference_servos(),
            simulation: SimulationSettings::default(),
        }
    }
}

/// Lift, steer and lock servos of the reference build.
pub fn reference_servos() -> Vec<ServoSpec> {
    let speed = SpeedUnit::SecondsPer60Deg.to_si(0.12);
    let servo = |name: &str, role, kgcm: f64, min: f64, max: f64| ServoSpec {
        name: name.to_owned(),
        role,
        steady_torque: TorqueUnit::KgCm.to_si(kgcm),
        rated_speed: speed,
        angle_min: f64::to_radians(min),
        angle_max: f64::to_radians(max),
    };
    vec![
        servo("servo-1", ServoRole::Lift, 500.0, -60.0, 150.0),
        servo("servo-2", ServoRole::Steer, 20.0, 0.0, 90.0),
        servo("servo-3", ServoRole::Lock, 2.0, 0.0, 90.0),
    ]
}

impl Config {
    pub fn servo(&self, role: ServoRole) -> Option<&ServoSpec> {
        self.servos.iter().find(|s| s.role == role)
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        self.geometry.validate()?;
        for s in &self.servos {
            s.validate()?;
        }
        let sim = &self.simulation;
        let positive = [
            ("simulation.wheelbase", sim.wheelbase),
            ("simulation.step", sim.step),
            ("simulation.safety_factor", sim.safety_factor),
            ("simulation.load_scale", sim.load_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(InvariantError::new(name, "positive"));
            }
        }
        if !sim.w.is_finite() {
            return Err(InvariantError::new("simulation.w", "finite"));
        }
        if !sim.mount_offset.is_finite() {
            return Err(InvariantError::new("simulation.mount_offset", "finite"));
        }
        if !self.geometry.in_workspace(sim.deployed_theta_l, 0.0) {
            return Err(InvariantError::new("simulation.deployed_theta_l", "within [theta_dn, theta_up]"));
        }
        Ok(())
    }

    /// Parses a config document and converts it to SI.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text)?;
        let cfg = raw.resolve();
        cfg.validate()?;
        Ok(cfg)
    }

    /// The config written back in SI units with every field explicit.
    ///
    /// Loading this text gives back an identical `Config`.
    pub fn to_canonical_json(&self) -> String {
        let raw = RawConfig::canonical(self);
        let mut s = serde_json::to_string_pretty(&raw).expect("config serializes");
        s.push('\n');
        s
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    Config::from_json_str(&text)
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawUnits {
    length: LengthUnit,
    angle: AngleUnit,
    torque: TorqueUnit,
    speed: SpeedUnit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    l1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l2: Option<f64>,
    #[serde(rename = "lAD")]
    l_ad: f64,
    #[serde(rename = "lAB")]
    l_ab: f64,
    #[serde(rename = "lBC")]
    l_bc: f64,
    #[serde(rename = "lCD")]
    l_cd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_ins: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_dn: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawServo {
    name: String,
    role: ServoRole,
    steady_torque: f64,
    rated_speed: f64,
    angle_min: f64,
    angle_max: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wheelbase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mount_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    safety_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    load_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deployed_theta_l: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    units: RawUnits,
    geometry: RawGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    servos: Option<Vec<RawServo>>,
    #[serde(default)]
    simulation: RawSimulation,
}

impl RawConfig {
    fn resolve(self) -> Config {
        let u = self.units;
        let len = |v: f64| u.length.to_si(v);
        let ang = |v: f64| u.angle.to_si(v);
        let reference = LinkageGeometry::reference();
        let g = &self.geometry;
        let geometry = LinkageGeometry {
            l1: len(g.l1),
            l2: g.l2.map(len).unwrap_or(reference.l2),
            l_ad: len(g.l_ad),
            l_ab: len(g.l_ab),
            l_bc: len(g.l_bc),
            l_cd: len(g.l_cd),
            theta_ins: g.theta_ins.map(ang).unwrap_or(reference.theta_ins),
            h: g.h.map(len).unwrap_or(reference.h),
            r: g.r.map(len).unwrap_or(reference.r),
            theta_up: g.theta_up.map(ang).unwrap_or(reference.theta_up),
            theta_dn: g.theta_dn.map(ang).unwrap_or(reference.theta_dn),
        };
        let servos = match self.servos {
            Some(list) => list
                .into_iter()
                .map(|s| ServoSpec {
                    name: s.name,
                    role: s.role,
                    steady_torque: u.torque.to_si(s.steady_torque),
                    rated_speed: u.speed.to_si(s.rated_speed),
                    angle_min: ang(s.angle_min),
                    angle_max: ang(s.angle_max),
                })
                .collect(),
            None => reference_servos(),
        };
        let d = SimulationSettings::default();
        let s = &self.simulation;
        let simulation = SimulationSettings {
            w: s.w.unwrap_or(d.w),
            wheelbase: s.wheelbase.map(len).unwrap_or(d.wheelbase),
            mount_offset: s.mount_offset.map(len).unwrap_or(d.mount_offset),
            step: s.step.map(len).unwrap_or(d.step),
            safety_factor: s.safety_factor.unwrap_or(d.safety_factor),
            load_scale: s.load_scale.unwrap_or(d.load_scale),
            deployed_theta_l: s.deployed_theta_l.map(ang).unwrap_or(d.deployed_theta_l),
        };
        Config { geometry, servos, simulation }
    }

    fn canonical(cfg: &Config) -> Self {
        let g = &cfg.geometry;
        let s = &cfg.simulation;
        RawConfig {
            units: RawUnits::default(),
            geometry: RawGeometry {
                l1: g.l1,
                l2: Some(g.l2),
                l_ad: g.l_ad,
                l_ab: g.l_ab,
                l_bc: g.l_bc,
                l_cd: g.l_cd,
                theta_ins: Some(g.theta_ins),
                h: Some(g.h),
                r: Some(g.r),
                theta_up: Some(g.theta_up),
                theta_dn: Some(g.theta_dn),
            },
            servos: Some(
                cfg.servos
                    .iter()
                    .map(|s| RawServo {
                        name: s.name.clone(),
                        role: s.role,
                        steady_torque: s.steady_torque,
                        rated_speed: s.rated_speed,
                        angle_min: s.angle_min,
                        angle_max: s.angle_max,
                    })
                    .collect(),
            ),
            simulation: RawSimulation {
                w: Some(s.w),
                wheelbase: Some(s.wheelbase),
                mount_offset: Some(s.mount_offset),
                step: Some(s.step),
                safety_factor: Some(s.safety_factor),
                load_scale: Some(s.load_scale),
                deployed_theta_l: Some(s.deployed_theta_l),
            },
        }
    }
}
