use std::path::Path;

use anyhow::{Context, Result};
use limbkin_core::kinematics::{self, workspace_check, Linkage};
use limbkin_core::optimizer::{self, select_optimum, sweep, CalibrationTarget, Criterion, SweepRange};
use limbkin_core::sequencer::{parse_script, run_script, validate_torque_budget, Sequencer};
use limbkin_core::statics::{motor_sizing, servo_torque};
use limbkin_core::terrain::{self, traverse, Saturation, TerrainProfile};
use limbkin_core::{load_config, Config, LinkageGeometry, ServoRole};
use serde::Serialize;

use crate::output::{csv_bytes, num, ConfigSource, Outputs, RunManifest};
use crate::svg::{render, Figure, Panel, Series};
use crate::{
    CalibrateArgs, Cli, Command, CriterionArg, KinArgs, SequenceArgs, SimulateArgs, Span, SweepArgs, TargetArg,
    TorqueArgs, UsageError,
};

struct Ctx {
    cfg: Config,
    out: Outputs,
}

pub(crate) fn dispatch(cli: &Cli, argv: Vec<String>) -> Result<String> {
    let (cfg, source) = match &cli.config {
        Some(path) => (load_config(path)?, ConfigSource::File(path.clone())),
        None => (Config::default(), ConfigSource::BuiltIn),
    };
    let name = match cli.command {
        Command::Kin(_) => "kin",
        Command::Torque(_) => "torque",
        Command::Sweep(_) => "sweep",
        Command::Calibrate(_) => "calibrate",
        Command::Simulate(_) => "simulate",
        Command::Sequence(_) => "sequence",
    };
    let manifest = RunManifest::new(name, argv, source, &cfg)?;
    let mut ctx = Ctx { cfg, out: Outputs::new(cli.out_dir.clone(), manifest) };
    let result = match &cli.command {
        Command::Kin(a) => kin(&mut ctx, a),
        Command::Torque(a) => torque(&mut ctx, a),
        Command::Sweep(a) => sweep_cmd(&mut ctx, a),
        Command::Calibrate(a) => calibrate(&mut ctx, a),
        Command::Simulate(a) => simulate(&mut ctx, a),
        Command::Sequence(a) => sequence(&mut ctx, a),
    };
    // Failed runs still record whatever they wrote.
    ctx.out.finish()?;
    result
}

fn deg_span(s: Span) -> SweepRange {
    SweepRange { start: s.start.to_radians(), end: s.end.to_radians(), step: s.step.to_radians() }
}

fn angles(geom: &LinkageGeometry, span: Option<Span>) -> Result<Vec<f64>> {
    let range = match span {
        Some(s) => deg_span(s),
        None => SweepRange { start: geom.theta_dn, end: geom.theta_up, step: 1f64.to_radians() },
    };
    range.values("theta_l").map_err(|e| UsageError(e.to_string()).into())
}

fn load(w: Option<f64>, cfg: &Config) -> Result<f64> {
    let w = w.unwrap_or(cfg.simulation.w);
    if !w.is_finite() {
        return Err(UsageError(format!("w must be finite, got {w}")).into());
    }
    Ok(w)
}

fn kin(ctx: &mut Ctx, a: &KinArgs) -> Result<String> {
    let geom = ctx.cfg.geometry;
    let theta_ls = match (a.theta_l, a.theta_s) {
        (Some(t), _) => vec![t.to_radians()],
        (None, Some(s)) => vec![Linkage::new(geom)?.inverse_servo(s.to_radians())?],
        (None, None) => angles(&geom, a.sweep)?,
    };
    let mut rows = Vec::with_capacity(theta_ls.len());
    for &t in &theta_ls {
        let p = kinematics::fk_wheel_position(&geom, t)?;
        let sol = kinematics::servo_angle(&geom, t)?;
        rows.push(vec![
            num(t.to_degrees()),
            num(sol.theta_s.to_degrees()),
            num(p.x * 1e3),
            num(p.z * 1e3),
            num(sol.l_ac * 1e3),
        ]);
    }
    ctx.out.write("kin.csv", &csv_bytes(&["theta_l_deg", "theta_s_deg", "px_mm", "pz_mm", "lac_mm"], rows)?)?;
    let report = workspace_check(&geom);
    let range = |v: Option<f64>| v.map_or("n/a".to_owned(), |x| format!("{:.2}°", x.to_degrees()));
    Ok(format!(
        "kin: {} rows; workspace {} (servo range {} .. {}, monotonic {})",
        theta_ls.len(),
        if report.passes() { "ok" } else { "FAILS" },
        range(report.theta_s_min),
        range(report.theta_s_max),
        report.monotonic
    ))
}

fn torque(ctx: &mut Ctx, a: &TorqueArgs) -> Result<String> {
    let geom = ctx.cfg.geometry;
    let w = load(a.w, &ctx.cfg)?;
    let theta_ls = match a.theta_l {
        Some(t) => vec![t.to_radians()],
        None => angles(&geom, a.sweep)?,
    };
    let mut rows = Vec::new();
    let mut peak: f64 = 0.0;
    for &t in &theta_ls {
        kinematics::fk_wheel_position(&geom, t)?;
        let f = servo_torque(&geom, t, w)?;
        peak = peak.max(f.t_s.abs());
        rows.push(vec![
            num(t.to_degrees()),
            num(f.theta_b.to_degrees()),
            num(f.theta_c.to_degrees()),
            num(f.f_bc),
            num(f.t_s),
        ]);
    }
    ctx.out
        .write("torque.csv", &csv_bytes(&["theta_l_deg", "theta_B_deg", "theta_C_deg", "F_BC_N", "T_s_Nm"], rows)?)?;
    let mut summary = format!("torque: {} rows at w = {w} N; max |T_s| = {peak:.4} N·m", theta_ls.len());
    if a.sizing {
        let sim = &ctx.cfg.simulation;
        let report = motor_sizing(&geom, sim.load_scale, &ctx.cfg.servos, sim.safety_factor)?;
        ctx.out.write_json("sizing.json", &report)?;
        for s in &report.servos {
            summary.push_str(&format!("; {} margin {:.2} {}", s.name, s.margin, if s.pass { "pass" } else { "FAIL" }));
        }
    }
    Ok(summary)
}

fn sweep_cmd(ctx: &mut Ctx, a: &SweepArgs) -> Result<String> {
    let w = load(a.w, &ctx.cfg)?;
    let lcd = SweepRange { start: a.lcd.start * 1e-3, end: a.lcd.end * 1e-3, step: a.lcd.step * 1e-3 };
    let grid = sweep(&ctx.cfg.geometry, deg_span(a.theta_l), lcd, w).map_err(|e| UsageError(e.to_string()))?;
    let criterion = match a.criterion {
        CriterionArg::Moderate => Criterion::Moderate { angle_tol: a.angle_tol, torque_tol: a.torque_tol },
        CriterionArg::MinTorque => Criterion::MinTorque,
        CriterionArg::MinAngle => Criterion::MinAngle,
    };

    let mut long = Vec::new();
    for (l, row) in grid.lcd_axis.iter().zip(&grid.cells) {
        for (t, cell) in grid.theta_l_axis.iter().zip(row) {
            long.push(vec![
                num(l * 1e3),
                num(t.to_degrees()),
                num(cell.map(|c| c.theta_s.to_degrees())),
                num(cell.map(|c| c.t_s)),
                cell.is_some().to_string(),
            ]);
        }
    }
    ctx.out
        .write("sweep_grid.csv", &csv_bytes(&["lcd_mm", "theta_l_deg", "theta_s_deg", "T_s_Nm", "feasible"], long)?)?;

    let optimum = select_optimum(&grid, criterion);
    let chosen = optimum.as_ref().ok().map(|o| o.lcd);
    let table = grid.aggregates();
    let rows = table.iter().map(|r| {
        vec![
            num(r.lcd * 1e3),
            r.feasible_cells.to_string(),
            r.total_cells.to_string(),
            num(r.min_theta_s.map(f64::to_degrees)),
            num(r.max_abs_torque),
            r.pareto.to_string(),
            (Some(r.lcd) == chosen).to_string(),
        ]
    });
    ctx.out.write(
        "sweep_aggregate.csv",
        &csv_bytes(
            &["lcd_mm", "feasible_cells", "total_cells", "min_theta_s_deg", "max_abs_T_s_Nm", "pareto", "selected"],
            rows,
        )?,
    )?;

    if a.svg {
        let feasible: Vec<_> = table.iter().filter(|r| r.fully_feasible()).collect();
        let angle: Vec<(f64, f64)> =
            feasible.iter().filter_map(|r| Some((r.lcd * 1e3, r.min_theta_s?.to_degrees()))).collect();
        let torque: Vec<(f64, f64)> = feasible.iter().filter_map(|r| Some((r.lcd * 1e3, r.max_abs_torque?))).collect();
        let marker = |pts: &[(f64, f64)]| -> Vec<Series> {
            let Some(x) = chosen.map(|l| l * 1e3) else { return Vec::new() };
            let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            vec![Series::new(format!("selected lCD = {x:.0} mm"), vec![(x, lo), (x, hi)]).dashed()]
        };
        let panel = |title: &str, y: &str, label: &str, pts: Vec<(f64, f64)>| {
            let mut series = vec![Series::new(label, pts.clone())];
            series.extend(marker(&pts));
            Panel { title: title.into(), x_label: "lCD (mm)".into(), y_label: y.into(), series }
        };
        let fig = Figure {
            panels: vec![
                panel("(a) driving angle", "min servo angle (deg)", "min θs over θl", angle),
                panel("(b) driving torque", "max |T_s| (N·m)", "max |T_s| over θl", torque),
            ],
            note: Some(format!("manifest: {}", ctx.out.manifest_name())),
        };
        ctx.out.write("sweep.svg", render(&fig)?.as_bytes())?;
    }

    let o = optimum.context("no design selected")?;
    Ok(format!(
        "sweep: {}×{} grid; selected lCD = {:.1} mm (min θs {:.2}°, max |T_s| {:.4} N·m{})",
        grid.lcd_axis.len(),
        grid.theta_l_axis.len(),
        o.lcd * 1e3,
        o.min_theta_s.to_degrees(),
        o.max_abs_torque,
        if o.within_tolerance { "" } else { ", tolerance not met: minimax fallback" }
    ))
}

#[derive(Serialize)]
struct CalibrationReport {
    status: &'static str,
    target: CalibrationTarget,
    interval_deg: (f64, f64),
    theta_ins_deg: Option<f64>,
    residual: Option<f64>,
    closest_theta_ins_deg: Option<f64>,
    closest_residual: Option<f64>,
    message: Option<String>,
}

fn calibrate(ctx: &mut Ctx, a: &CalibrateArgs) -> Result<String> {
    let l_cd = a.lcd * 1e-3;
    let target = match a.target {
        TargetArg::Angle => CalibrationTarget::MinServoAngle { theta_s: a.value.unwrap_or(45.64).to_radians(), l_cd },
        TargetArg::Torque => {
            CalibrationTarget::MaxTorque { torque: a.value.unwrap_or(2.8), l_cd, w: load(a.w, &ctx.cfg)? }
        }
    };
    let interval = (a.interval.0.to_radians(), a.interval.1.to_radians());
    if interval.1.partial_cmp(&interval.0) != Some(std::cmp::Ordering::Greater) {
        return Err(UsageError(format!("empty interval {:?}", a.interval)).into());
    }
    let result = optimizer::calibrate_installation_angle(&ctx.cfg.geometry, target, interval);
    let curve = match &result {
        Ok(c) => &c.curve,
        Err(e) => &e.curve,
    };
    let closest = curve.closest();
    let residual_unit = match target {
        CalibrationTarget::MinServoAngle { .. } => 1f64.to_degrees(),
        CalibrationTarget::MaxTorque { .. } => 1.0,
    };
    let rows = curve.points.iter().map(|&(t, r)| vec![num(t.to_degrees()), num(r.map(|r| r * residual_unit))]);
    let residual_col = match target {
        CalibrationTarget::MinServoAngle { .. } => "residual_deg",
        CalibrationTarget::MaxTorque { .. } => "residual_Nm",
    };
    ctx.out.write("calibration_residuals.csv", &csv_bytes(&["theta_ins_deg", residual_col], rows)?)?;
    let report = CalibrationReport {
        status: if result.is_ok() { "ok" } else { "failed" },
        target,
        interval_deg: a.interval,
        theta_ins_deg: result.as_ref().ok().map(|c| c.theta_ins.to_degrees()),
        residual: result.as_ref().ok().map(|c| c.residual),
        closest_theta_ins_deg: closest.map(|c| c.0.to_degrees()),
        closest_residual: closest.map(|c| c.1),
        message: result.as_ref().err().map(|e| e.to_string()),
    };
    ctx.out.write_json("calibration.json", &report)?;
    let cal = result?;
    Ok(format!("calibrate: theta_ins = {:.6}° (residual {:.3e})", cal.theta_ins.to_degrees(), cal.residual))
}

fn terrain_arg(name: &str) -> Result<TerrainProfile> {
    if name == "fig2" {
        return Ok(terrain::fig2_preset());
    }
    terrain::load_terrain(Path::new(name)).map_err(|e| UsageError(format!("terrain {name}: {e}")).into())
}

fn simulate(ctx: &mut Ctx, a: &SimulateArgs) -> Result<String> {
    let profile = terrain_arg(&a.terrain)?;
    let geom = ctx.cfg.geometry;
    let mut settings = ctx.cfg.simulation;
    settings.w = load(a.w, &ctx.cfg)?;
    if let Some(step) = a.step {
        if !(step.is_finite() && step > 0.0) {
            return Err(UsageError(format!("step must be positive, got {step}")).into());
        }
        settings.step = step;
    }
    let trace = traverse(&geom, &profile, &settings)?;
    let rows = trace.records.iter().map(|r| {
        vec![
            num(r.distance),
            num(r.pose.pitch.to_degrees()),
            num(r.theta_l.to_degrees()),
            num(r.theta_s.to_degrees()),
            num(r.t_s),
            num(r.contact.x),
            num(r.contact.z),
            num(r.contact_angle.to_degrees()),
            num(r.sinkage * 1e3),
            match r.saturation {
                None => "none",
                Some(Saturation::Hanging) => "hanging",
                Some(Saturation::Jammed) => "jammed",
            }
            .to_owned(),
        ]
    });
    let header = [
        "distance_m",
        "pitch_deg",
        "theta_l_deg",
        "theta_s_deg",
        "T_s_Nm",
        "contact_x_m",
        "contact_z_m",
        "contact_angle_deg",
        "sinkage_mm",
        "saturated",
    ];
    ctx.out.write("simulate.csv", &csv_bytes(&header, rows)?)?;

    if a.svg {
        let nominal: Vec<(f64, f64)> = profile.vertices().iter().map(|p| (p.x, p.z)).collect();
        let effective: Vec<(f64, f64)> = profile.effective_polyline().iter().map(|p| (p.x, p.z)).collect();
        let start = trace.records.first().map_or(0.0, |r| r.pose.x);
        let limb: Vec<(f64, f64)> =
            trace.records.iter().map(|r| (r.distance + start, r.theta_l.to_degrees())).collect();
        let fig = Figure {
            panels: vec![
                Panel {
                    title: "terrain".into(),
                    x_label: "x (m)".into(),
                    y_label: "z (m)".into(),
                    series: vec![
                        Series::new("nominal surface", nominal).dashed(),
                        Series::new("effective surface", effective),
                    ],
                },
                Panel {
                    title: "limb angle".into(),
                    x_label: "front axle x (m)".into(),
                    y_label: "θl (deg)".into(),
                    series: vec![Series::new("θl", limb)],
                },
            ],
            note: Some(format!("manifest: {}", ctx.out.manifest_name())),
        };
        ctx.out.write("simulate.svg", render(&fig)?.as_bytes())?;
    }

    let lo = trace.records.iter().map(|r| r.theta_l).fold(f64::INFINITY, f64::min);
    let hi = trace.records.iter().map(|r| r.theta_l).fold(f64::NEG_INFINITY, f64::max);
    let saturated = trace.records.iter().filter(|r| r.saturation.is_some()).count();
    Ok(format!(
        "simulate: {} steps; θl {:.2}° .. {:.2}°; {saturated} saturated",
        trace.records.len(),
        lo.to_degrees(),
        hi.to_degrees()
    ))
}

#[derive(Serialize)]
struct TrajectoryBudget {
    index: usize,
    command: String,
    role: ServoRole,
    duration_s: f64,
    demand_nm: f64,
    servo: String,
    capacity_nm: f64,
    margin: f64,
    pass: bool,
}

#[derive(Serialize)]
struct SequenceReport {
    safety_factor: f64,
    w: f64,
    pass: bool,
    trajectories: Vec<TrajectoryBudget>,
}

fn sequence(ctx: &mut Ctx, a: &SequenceArgs) -> Result<String> {
    let text = std::fs::read_to_string(&a.script)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", a.script.display())))?;
    let commands = parse_script(&text).map_err(|e| UsageError(e.to_string()))?;
    let seq = Sequencer::from_config(&ctx.cfg)?;
    let run = run_script(&seq, &commands)?;

    let rows = run.events.iter().map(|e| {
        vec![
            num(e.t),
            e.mode.to_string(),
            num(e.theta_s.to_degrees()),
            num(e.theta_z.to_degrees()),
            e.locked.to_string(),
        ]
    });
    ctx.out.write("sequence.csv", &csv_bytes(&["t_s", "mode", "theta_s_deg", "theta_z_deg", "locked"], rows)?)?;

    let sim = &ctx.cfg.simulation;
    let w = sim.w * sim.load_scale;
    let mut budgets = Vec::new();
    for (i, (cmd, traj)) in commands.iter().zip(&run.trajectories).enumerate() {
        let servo = match traj.role {
            ServoRole::Lift => &seq.lift,
            ServoRole::Steer => &seq.steer,
            ServoRole::Lock => &seq.lock,
        };
        let report =
            validate_torque_budget(traj, &ctx.cfg.geometry, w, std::slice::from_ref(servo), sim.safety_factor)?;
        let m = &report.servos[0];
        budgets.push(TrajectoryBudget {
            index: i,
            command: cmd.to_string(),
            role: traj.role,
            duration_s: traj.duration(),
            demand_nm: report.demand,
            servo: m.name.clone(),
            capacity_nm: m.capacity,
            margin: m.margin,
            pass: m.pass,
        });
    }
    let pass = budgets.iter().all(|b| b.pass);
    let worst = budgets.iter().map(|b| b.demand_nm).fold(0.0, f64::max);
    let report = SequenceReport { safety_factor: sim.safety_factor, w, pass, trajectories: budgets };
    ctx.out.write_json("sequence_budget.json", &report)?;
    Ok(format!(
        "sequence: {} commands, {:.3} s, final mode {}; torque budget {} (worst demand {worst:.4} N·m)",
        commands.len(),
        run.events.last().map_or(0.0, |e| e.t),
        run.final_state.mode,
        if pass { "pass" } else { "FAIL" }
    ))
}
