//! Unit conversions applied at the configuration boundary.

use serde::{Deserialize, Serialize};

/// One kilogram-force centimetre in newton metres (standard gravity × 0.01 m).
pub const KGCM_TO_NM: f64 = 0.0980665;

/// Converts a servo datasheet torque in kg·cm to N·m.
///
/// Returns `None` for negative or non-finite input.
pub fn kgcm_to_newton_metre(t: f64) -> Option<f64> {
    if t.is_finite() && t >= 0.0 {
        Some(t * KGCM_TO_NM)
    } else {
        None
    }
}

pub fn newton_metre_to_kgcm(t: f64) -> f64 {
    t / KGCM_TO_NM
}

/// Rated speed from a datasheet figure of "seconds per 60 degrees".
pub fn rated_speed_from_s_per_60deg(seconds: f64) -> f64 {
    std::f64::consts::FRAC_PI_3 / seconds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    M,
    Mm,
}

impl LengthUnit {
    pub fn to_si(self, v: f64) -> f64 {
        match self {
            LengthUnit::M => v,
            LengthUnit::Mm => v / 1000.0,
        }
    }

    pub fn from_si(self, v: f64) -> f64 {
        match self {
            LengthUnit::M => v,
            LengthUnit::Mm => v * 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[default]
    Rad,
    Deg,
}

impl AngleUnit {
    pub fn to_si(self, v: f64) -> f64 {
        match self {
            AngleUnit::Rad => v,
            AngleUnit::Deg => v.to_radians(),
        }
    }

    pub fn from_si(self, v: f64) -> f64 {
        match self {
            AngleUnit::Rad => v,
            AngleUnit::Deg => v.to_degrees(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TorqueUnit {
    #[default]
    #[serde(rename = "Nm")]
    NewtonMetre,
    #[serde(rename = "kgcm")]
    KgCm,
}

impl TorqueUnit {
    pub fn to_si(self, v: f64) -> f64 {
        match self {
            TorqueUnit::NewtonMetre => v,
            TorqueUnit::KgCm => v * KGCM_TO_NM,
        }
    }
}

/// How servo rated speeds are written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SpeedUnit {
    #[default]
    #[serde(rename = "rad_per_s")]
    RadPerSecond,
    #[serde(rename = "deg_per_s")]
    DegPerSecond,
    /// Datasheet convention: time to sweep 60 degrees.
    #[serde(rename = "s_per_60deg")]
    SecondsPer60Deg,
}

impl SpeedUnit {
    pub fn to_si(self, v: f64) -> f64 {
        match self {
            SpeedUnit::RadPerSecond => v,
            SpeedUnit::DegPerSecond => v.to_radians(),
            SpeedUnit::SecondsPer60Deg => rated_speed_from_s_per_60deg(v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kgcm_conversion() {
        assert_eq!(kgcm_to_newton_metre(0.0), Some(0.0));
        assert_relative_eq!(kgcm_to_newton_metre(500.0).unwrap(), 49.03325, max_relative = 1e-12);
        assert_relative_eq!(kgcm_to_newton_metre(2.0).unwrap(), 0.196133, max_relative = 1e-12);
        assert_eq!(kgcm_to_newton_metre(-1.0), None);
        assert_eq!(kgcm_to_newton_metre(f64::NAN), None);
    }

    #[test]
    fn degree_round_trip_is_tight() {
        for i in -3600..=3600 {
            let deg = i as f64 * 0.1;
            let back = AngleUnit::Deg.from_si(AngleUnit::Deg.to_si(deg));
            assert!((back - deg).abs() <= 1e-15 * deg.abs().max(1.0), "{deg} -> {back}");
        }
    }

    #[test]
    fn sixty_degrees_in_point_twelve_seconds() {
        let w = SpeedUnit::SecondsPer60Deg.to_si(0.12);
        assert_relative_eq!(60f64.to_radians() / w, 0.12, max_relative = 1e-15);
    }
}
