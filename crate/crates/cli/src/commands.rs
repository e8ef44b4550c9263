use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use magtrap::analysis::{
    bz_zero_crossing, distance_sweep, AspectRatio, SweepConfig, SweepTable, TrapMap, TrapMapOptions,
};
use magtrap::field::{evaluate_grid, force_and_flux, plane_points, Plane, FIELD_CSV_HEADER};
use magtrap::objective::{evaluate_loss, LossBreakdown, LossConfig};
use magtrap::optimizer::{
    brute_force_2mag, gradient_check, multi_restart_problem, tune_force_target_problem, GradCheckReport,
    OptimizationReport, Problem,
};

use crate::config::RunConfig;
use crate::{Command, Common, PlaneArg};

const MM: f64 = 1e-3;

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Optimize {
            common,
            out,
            field_csv,
        } => optimize(&common, out, field_csv),
        Command::Field {
            common,
            angles,
            plane,
            offset_mm,
            bounds_mm,
            nu,
            nv,
            out,
        } => field(&common, angles, plane, offset_mm, bounds_mm, nu, nv, out),
        Command::Sweep {
            common,
            distances,
            counts,
            threshold_mn,
            radius_mm,
            window,
            map_resolution,
            no_continuation,
            out,
            json,
        } => sweep(
            &common,
            &distances,
            counts,
            threshold_mn,
            radius_mm,
            window,
            map_resolution,
            !no_continuation,
            out,
            json,
        ),
        Command::Analyze {
            common,
            angles,
            threshold_mn,
            radius_mm,
            map_resolution,
            bz_range_mm,
            out,
        } => analyze(
            &common,
            &angles,
            threshold_mn,
            radius_mm,
            map_resolution,
            &bz_range_mm,
            out,
        ),
        Command::Gradcheck {
            common,
            trials,
            h_deg,
            tolerance,
            out,
        } => gradcheck(&common, trials, h_deg, tolerance, out),
        Command::Oracle {
            common,
            resolution,
            surface_csv,
            out,
        } => oracle(&common, resolution, surface_csv, out),
    }
}

fn setup(common: &Common) -> Result<RunConfig> {
    if let Some(n) = common.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    RunConfig::resolve(common.config.as_deref(), &common.overrides)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Opens a CSV destination whose first line is `# config: {...}`.
fn csv_sink(path: Option<&Path>, config: &RunConfig) -> Result<Box<dyn Write>> {
    let mut w = sink(path)?;
    writeln!(w, "# config: {}", serde_json::to_string(config)?)?;
    Ok(w)
}

fn parse_range(text: &str, parts: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("cannot parse `{text}`"))?;
    if values.len() != parts {
        bail!("expected {parts} `:`-separated numbers, got `{text}`");
    }
    Ok(values)
}

fn linspace_mm(text: &str) -> Result<Vec<f64>> {
    let v = parse_range(text, 3)?;
    let count = v[2];
    if count < 1.0 || count.fract() != 0.0 {
        bail!("distance count must be a positive integer, got {count}");
    }
    let n = count as usize;
    Ok((0..n)
        .map(|k| {
            let t = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
            (v[0] + (v[1] - v[0]) * t) * MM
        })
        .collect())
}

#[derive(Serialize)]
struct OptimizeOutput<'a> {
    config: &'a RunConfig,
    mode: &'static str,
    target_force_n: Option<f64>,
    stage1: Option<OptimizationReport>,
    report: OptimizationReport,
}

fn optimize(common: &Common, out: Option<PathBuf>, field_csv: Option<PathBuf>) -> Result<ExitCode> {
    let cfg = setup(common)?;
    let (array, grid, robot) = (cfg.array()?, cfg.grid()?, cfg.robot()?);
    let (policy, adam) = (cfg.policy()?, cfg.adam()?);
    let output = if cfg.tunes() {
        let problem = Problem::new(&array, &grid, &robot, LossConfig::direction_only())?;
        let tuned = tune_force_target_problem(&problem, &policy, &adam, cfg.gamma, None)?;
        OptimizeOutput {
            config: &cfg,
            mode: "tuned",
            target_force_n: Some(tuned.target_force),
            stage1: Some(tuned.stage1),
            report: tuned.stage2,
        }
    } else {
        let loss = cfg.loss()?;
        let problem = Problem::new(&array, &grid, &robot, loss)?;
        OptimizeOutput {
            config: &cfg,
            mode: if loss.magnitude_weight == 0.0 {
                "direction_only"
            } else {
                "fixed_target"
            },
            target_force_n: (loss.magnitude_weight > 0.0).then_some(loss.target_force),
            stage1: None,
            report: multi_restart_problem(&problem, &policy, &adam, None)?,
        }
    };
    let report = &output.report;
    eprintln!(
        "angles [deg] {:?}  loss {:.6}  accuracy {:.4}  restarts {}{}",
        report.best_angles_deg,
        report.best_loss,
        report.best_accuracy,
        report.restarts_executed,
        if report.threshold_met {
            ""
        } else {
            "  (threshold not met)"
        }
    );
    if let Some(path) = field_csv {
        let solved = array.with_angles(&report.best_angles_deg)?;
        let field = evaluate_grid(&solved, &grid, &robot)?;
        let mut w = csv_sink(Some(&path), &cfg)?;
        field.write_csv(&mut w)?;
        w.flush()?;
    }
    write_json(out.as_deref(), &output)?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn field(
    common: &Common,
    angles: Option<Vec<f64>>,
    plane: PlaneArg,
    offset_mm: f64,
    bounds_mm: Option<String>,
    nu: Option<usize>,
    nv: Option<usize>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let cfg = setup(common)?;
    let template = cfg.array()?;
    let angles = angles.unwrap_or_else(|| vec![0.0; template.len()]);
    let array = template.with_angles(&angles)?;
    let robot = cfg.robot()?;
    let default_grid =
        plane == PlaneArg::Xy && offset_mm == 0.0 && bounds_mm.is_none() && nu.is_none() && nv.is_none();
    let points = if default_grid {
        cfg.grid()?.points().to_vec()
    } else {
        let (u, v) = match bounds_mm {
            Some(text) => {
                let b = parse_range(&text, 4)?;
                ((b[0] * MM, b[1] * MM), (b[2] * MM, b[3] * MM))
            }
            None => default_bounds(&cfg, plane, &array),
        };
        let plane = match plane {
            PlaneArg::Xy => Plane::Xy { z: offset_mm * MM },
            PlaneArg::Yz => Plane::Yz { x: offset_mm * MM },
        };
        let (nu_default, nv_default) = match plane {
            Plane::Xy { .. } => (cfg.grid_columns, cfg.grid_rows),
            Plane::Yz { .. } => (101, 101),
        };
        plane_points(plane, u, v, nu.unwrap_or(nu_default), nv.unwrap_or(nv_default))?
    };

    let mut w = csv_sink(out.as_deref(), &cfg)?;
    let mut csv = csv::Writer::from_writer(&mut w);
    let mut header: Vec<&str> = FIELD_CSV_HEADER.to_vec();
    header.push("error");
    csv.write_record(&header)?;
    let mut failed = 0;
    let near = points
        .iter()
        .filter(|p| {
            array
                .magnets()
                .iter()
                .any(|m| (**p - m.center()).norm() < m.validity_radius())
        })
        .count();
    if near > 0 {
        log::warn!(
            "{near} of {} points lie within 1.5 magnet diagonals of a source; dipole model is approximate there",
            points.len()
        );
    }
    for p in &points {
        let position = [p.x / MM, p.y / MM, p.z / MM].map(|v| v.to_string());
        let inside = array.magnets().iter().position(|m| m.contains(p));
        let result = match inside {
            Some(k) => Err(anyhow!("inside magnet {}", k + 1)),
            None => force_and_flux(p, &array, &robot).map_err(Into::into),
        };
        let mut row: Vec<String> = position.to_vec();
        match result {
            Ok((f, b)) => {
                row.extend([f.x, f.y, f.z, b.x, b.y, b.z].map(|v| format!("{v:e}")));
                row.push(String::new());
            }
            Err(e) => {
                failed += 1;
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(e.to_string());
            }
        }
        csv.write_record(&row)?;
    }
    csv.flush()?;
    drop(csv);
    w.flush()?;
    if failed > 0 {
        log::warn!("{failed} of {} points could not be evaluated", points.len());
    }
    Ok(ExitCode::SUCCESS)
}

/// Trap area for XY; for YZ, from just off the array face out to twice the
/// trap distance, spanning the array length plus one edge on both sides.
fn default_bounds(
    cfg: &RunConfig,
    plane: PlaneArg,
    array: &magtrap::geometry::MagnetArray<f64>,
) -> ((f64, f64), (f64, f64)) {
    let w = cfg.half_width_mm * MM;
    let d = cfg.trap_distance_mm * MM;
    match plane {
        PlaneArg::Xy => ((-w, w), (d - w, d + w)),
        PlaneArg::Yz => {
            let edge = cfg.edge_length_mm * MM;
            let reach = array
                .magnets()
                .iter()
                .map(|m| m.center().z.abs())
                .fold(0.0, f64::max)
                + edge;
            ((edge, 2.0 * d.max(edge)), (-reach, reach))
        }
    }
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    config: &'a RunConfig,
    sweep: &'a SweepConfig,
    table: &'a SweepTable,
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    common: &Common,
    distances: &str,
    counts: Vec<usize>,
    threshold_mn: f64,
    radius_mm: f64,
    window: usize,
    map_resolution: usize,
    continuation: bool,
    out: Option<PathBuf>,
    json: Option<PathBuf>,
) -> Result<ExitCode> {
    let cfg = setup(common)?;
    if counts.contains(&0) {
        bail!("the magnet array is empty (count 0)");
    }
    let sweep_cfg = SweepConfig {
        counts,
        distances: linspace_mm(distances)?,
        edge_length: cfg.edge_length_mm * MM,
        remanence: cfg.remanence_t,
        extra_spacing: cfg.extra_spacing_mm * MM,
        pitch_override: cfg.pitch(),
        robot: cfg.robot()?,
        grid_half_width: cfg.half_width_mm * MM,
        grid_resolution: (cfg.grid_columns, cfg.grid_rows),
        loss: if cfg.tunes() {
            LossConfig::direction_only()
        } else {
            cfg.loss()?
        },
        tune: cfg.tunes(),
        gamma: cfg.gamma,
        policy: cfg.policy()?,
        adam: cfg.adam()?,
        continuation,
        map: TrapMapOptions {
            half_width: cfg.half_width_mm * MM,
            resolution: map_resolution,
        },
        force_radius: radius_mm * MM,
        aspect_threshold: threshold_mn * 1e-3,
        smoothing_window: window,
    };
    let table = distance_sweep(&sweep_cfg)?;
    let failed = table.rows.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} sweep points failed", table.rows.len());
    }
    let mut w = csv_sink(out.as_deref(), &cfg)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    if let Some(path) = json {
        write_json(
            Some(&path),
            &SweepOutput {
                config: &cfg,
                sweep: &sweep_cfg,
                table: &table,
            },
        )?;
    }
    Ok(if failed == table.rows.len() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    config: &'a RunConfig,
    angles_deg: &'a [f64],
    loss: LossBreakdown<f64>,
    trap_center_mm: [f64; 2],
    trap_offset_mm: [f64; 2],
    map_cell_mm: f64,
    avg_force_n: Option<f64>,
    aspect: Option<AspectRatio>,
    aspect_error: Option<String>,
    bz_crossing_mm: Option<f64>,
    bz_crossing_error: Option<String>,
}

fn analyze(
    common: &Common,
    angles: &[f64],
    threshold_mn: f64,
    radius_mm: f64,
    map_resolution: usize,
    bz_range_mm: &str,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let cfg = setup(common)?;
    let array = cfg.array()?.with_angles(angles)?;
    let (grid, robot) = (cfg.grid()?, cfg.robot()?);
    let loss_cfg = if cfg.tunes() {
        LossConfig::direction_only()
    } else {
        cfg.loss()?
    };
    let loss = evaluate_loss(&array, &grid, &robot, &loss_cfg)?;
    let d = cfg.trap_distance_mm * MM;
    let map = TrapMap::sample(
        &array,
        &robot,
        d,
        &TrapMapOptions {
            half_width: cfg.half_width_mm * MM,
            resolution: map_resolution,
        },
    )?;
    let center = map.trap_center()?;
    let aspect = map.aspect_ratio(threshold_mn * 1e-3);
    let range = parse_range(bz_range_mm, 2)?;
    let crossing = bz_zero_crossing(&array, range[0] * MM, range[1] * MM);
    let output = AnalyzeOutput {
        config: &cfg,
        angles_deg: angles,
        loss,
        trap_center_mm: [center[0] / MM, center[1] / MM],
        trap_offset_mm: [center[0] / MM, (center[1] - d) / MM],
        map_cell_mm: map.cell_size() / MM,
        avg_force_n: map.avg_force(radius_mm * MM).ok(),
        aspect_error: aspect.as_ref().err().map(|e| e.to_string()),
        aspect: aspect.ok(),
        bz_crossing_error: crossing.as_ref().err().map(|e| e.to_string()),
        bz_crossing_mm: crossing.ok().map(|y| y / MM),
    };
    write_json(out.as_deref(), &output)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct GradcheckOutput<'a> {
    config: &'a RunConfig,
    loss: LossConfig<f64>,
    tolerance: f64,
    passed: bool,
    report: GradCheckReport,
}

fn gradcheck(
    common: &Common,
    trials: usize,
    h_deg: f64,
    tolerance: f64,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let cfg = setup(common)?;
    let (array, grid, robot) = (cfg.array()?, cfg.grid()?, cfg.robot()?);
    // With tuning the target is only known after a run; use γ times the
    // total force of the untouched array so both loss terms are exercised.
    let loss = if cfg.tunes() {
        let total = evaluate_grid(&array, &grid, &robot)?.total_magnitude();
        LossConfig::new(1.0, 1.0, cfg.gamma * total)?
    } else {
        cfg.loss()?
    };
    let report = gradient_check(&array, &grid, &robot, &loss, trials, h_deg, cfg.seed)?;
    let passed = report.max_relative_error <= tolerance;
    eprintln!(
        "max relative error {:.3e} over {} components ({} skipped): {}",
        report.max_relative_error,
        report.compared,
        report.skipped,
        if passed { "ok" } else { "FAILED" }
    );
    write_json(
        out.as_deref(),
        &GradcheckOutput {
            config: &cfg,
            loss,
            tolerance,
            passed,
            report,
        },
    )?;
    Ok(if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

#[derive(Serialize)]
struct OracleOutput<'a> {
    config: &'a RunConfig,
    resolution_deg: f64,
    steps_per_axis: usize,
    evaluations: usize,
    best_angles_deg: [f64; 2],
    best_loss: f64,
}

fn oracle(
    common: &Common,
    resolution: f64,
    surface_csv: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let cfg = setup(common)?;
    let result = brute_force_2mag(&cfg.array()?, &cfg.grid()?, &cfg.robot()?, resolution)?;
    if let Some(path) = surface_csv {
        let mut w = csv_sink(Some(&path), &cfg)?;
        result.write_csv(&mut w)?;
        w.flush()?;
    }
    write_json(
        out.as_deref(),
        &OracleOutput {
            config: &cfg,
            resolution_deg: result.resolution_deg,
            steps_per_axis: result.steps_per_axis,
            evaluations: result.evaluations(),
            best_angles_deg: result.best_angles_deg,
            best_loss: result.best_loss,
        },
    )?;
    Ok(ExitCode::SUCCESS)
}
