//! `limbkin` command-line front end.
//!
//! Exit codes: 0 success, 1 domain error (infeasible linkage, failed
//! calibration, illegal sequence), 2 usage or configuration error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
pub mod output;
pub mod svg;

pub use svg::{emit_svg, Figure, Panel, Series};

/// Marks an error as a usage or configuration problem (exit 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Inclusive `start:end:step` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

fn parse_span(s: &str) -> Result<Span, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts[..] else {
        return Err(format!("expected start:end:step, got {s:?}"));
    };
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let span = Span { start: p(a)?, end: p(b)?, step: p(c)? };
    if !(span.step > 0.0 && span.end >= span.start) {
        return Err(format!("need end >= start and step > 0 in {s:?}"));
    }
    Ok(span)
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Debug, Parser)]
#[command(
    name = "limbkin",
    version,
    about = "Kinematics, statics, design sweeps and traverse simulation for a wheel-on-limb rover mechanism"
)]
pub struct Cli {
    /// Configuration file (JSON). Falls back to $LIMBKIN_CONFIG, then the built-in reference build.
    #[arg(long, global = true, env = "LIMBKIN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Directory receiving CSV, SVG and manifest files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward or inverse limb kinematics.
    Kin(KinArgs),
    /// Coupler force and servo torque.
    Torque(TorqueArgs),
    /// Sweep lCD and the lifting angle, then pick a design.
    Sweep(SweepArgs),
    /// Solve the installation angle for a target.
    Calibrate(CalibrateArgs),
    /// Quasi-static traverse over a terrain profile.
    Simulate(SimulateArgs),
    /// Run a deployment script through the state machine.
    Sequence(SequenceArgs),
}

#[derive(Debug, Args)]
pub struct KinArgs {
    /// Lifting angle, degrees.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["theta_s", "sweep"])]
    pub theta_l: Option<f64>,
    /// Servo angle, degrees (inverse map).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "sweep")]
    pub theta_s: Option<f64>,
    /// Lifting-angle range in degrees, start:end:step. Default: the workspace at 1°.
    #[arg(long, value_parser = parse_span, allow_hyphen_values = true)]
    pub sweep: Option<Span>,
}

#[derive(Debug, Args)]
pub struct TorqueArgs {
    /// Lifting angle, degrees.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "sweep")]
    pub theta_l: Option<f64>,
    /// Wheel load, N. Default from the configuration.
    #[arg(long, allow_hyphen_values = true)]
    pub w: Option<f64>,
    /// Lifting-angle range in degrees, start:end:step. Default: the workspace at 1°.
    #[arg(long, value_parser = parse_span, allow_hyphen_values = true)]
    pub sweep: Option<Span>,
    /// Also write a servo sizing report.
    #[arg(long)]
    pub sizing: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CriterionArg {
    Moderate,
    MinTorque,
    MinAngle,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// lCD range in millimetres, start:end:step.
    #[arg(long, value_parser = parse_span, default_value = "100:250:5")]
    pub lcd: Span,
    /// Lifting-angle range in degrees, start:end:step.
    #[arg(long, value_parser = parse_span, default_value = "-40:60:1", allow_hyphen_values = true)]
    pub theta_l: Span,
    /// Wheel load, N. Default from the configuration.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long, value_enum, default_value = "moderate")]
    pub criterion: CriterionArg,
    /// Moderate criterion: allowed relative gap on the servo-angle objective.
    #[arg(long, default_value_t = 0.05)]
    pub angle_tol: f64,
    /// Moderate criterion: allowed relative gap on the torque objective.
    #[arg(long, default_value_t = 0.05)]
    pub torque_tol: f64,
    /// Write a two-panel SVG of the per-lCD aggregates.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    /// Minimum servo angle over the workspace, degrees.
    Angle,
    /// Maximum |T_s| over the workspace, N·m.
    Torque,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum, default_value = "angle")]
    pub target: TargetArg,
    /// Target value (degrees or N·m). Default: 45.64° or 2.8 N·m.
    #[arg(long, allow_hyphen_values = true)]
    pub value: Option<f64>,
    /// lCD at which the target applies, mm.
    #[arg(long, default_value_t = 160.0)]
    pub lcd: f64,
    /// Search interval for the installation angle in degrees, lo:hi (open).
    #[arg(long, value_parser = parse_pair, default_value = "0:90")]
    pub interval: (f64, f64),
    /// Wheel load for the torque target, N. Default from the configuration.
    #[arg(long)]
    pub w: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `fig2` or a terrain file.
    #[arg(long, default_value = "fig2")]
    pub terrain: String,
    /// Front-axle step, m. Default from the configuration.
    #[arg(long)]
    pub step: Option<f64>,
    /// Wheel load, N. Default from the configuration.
    #[arg(long)]
    pub w: Option<f64>,
    /// Write an SVG of the terrain and the limb-angle trace.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct SequenceArgs {
    /// Command script, one of deploy/place/lift/stow/lock/unlock/`steer <deg>` per line.
    #[arg(long)]
    pub script: PathBuf,
}

/// Parses `args` (including the program name), runs, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::dispatch(&cli, argv) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    let usage = e.chain().any(|c| c.is::<UsageError>() || c.is::<limbkin_core::ConfigError>());
    if usage {
        2
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans() {
        assert_eq!(parse_span("-40:60:1").unwrap(), Span { start: -40.0, end: 60.0, step: 1.0 });
        assert!(parse_span("1:2").is_err());
        assert!(parse_span("2:1:1").is_err());
        assert!(parse_span("0:1:0").is_err());
        assert_eq!(parse_pair("0:90").unwrap(), (0.0, 90.0));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
