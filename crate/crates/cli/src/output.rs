//! Export writers: trajectory CSV, iteration log, plan report and plot data.
//!
//! Every writer produces a deterministic byte stream for fixed inputs;
//! numbers go out with 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use spinroll_core::geometry::sphere_embed;
use spinroll_core::kinematics::format_sig17;
use spinroll_core::Trajectory64;
use spinroll_core::planner::IterationRecord;
use spinroll_core::{GoalSpec64, PlanResult64};

/// Summary of one planning run.
#[derive(Debug, Clone, Serialize)]
pub struct PlanReport {
    pub converged: bool,
    pub iterations: u32,
    pub wall_time_s: f64,
    pub e_n: f64,
    pub e_r: f64,
    pub plane_error: f64,
    pub spin_error: f64,
    pub plane_path_length: f64,
    pub sphere_path_length: f64,
    pub straightness: f64,
    pub slide_ratio: f64,
    /// Set when planning aborted before iterating.
    pub failure: Option<String>,
}

impl PlanReport {
    pub fn from_result(result: &PlanResult64, goal: &GoalSpec64, wall_time_s: f64) -> Self {
        let d = &result.diag;
        Self {
            converged: result.converged(),
            iterations: result.iterations,
            wall_time_s,
            e_n: d.e_n,
            e_r: d.e_r,
            plane_error: d.plane_error,
            spin_error: d.spin_error,
            plane_path_length: result.trajectory.total_plane_length(),
            sphere_path_length: result.trajectory.final_sample().s_sphere,
            straightness: result.trajectory.straightness(goal),
            slide_ratio: result.trajectory.slide_ratio(),
            failure: None,
        }
    }

    pub fn failed(reason: String) -> Self {
        Self {
            converged: false,
            iterations: 0,
            wall_time_s: 0.0,
            e_n: f64::NAN,
            e_r: f64::NAN,
            plane_error: f64::NAN,
            spin_error: f64::NAN,
            plane_path_length: f64::NAN,
            sphere_path_length: f64::NAN,
            straightness: f64::NAN,
            slide_ratio: f64::NAN,
            failure: Some(reason),
        }
    }
}

pub fn write_report(path: &Path, report: &PlanReport) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    fs::write(path, text)
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory64, r_o: f64) -> std::io::Result<()> {
    let mut buf = Vec::new();
    traj.write_csv(r_o, &mut buf)?;
    fs::write(path, buf)
}

/// One JSON record per iteration.
pub fn write_iteration_log(path: &Path, log: &[IterationRecord<f64>]) -> std::io::Result<()> {
    let mut buf = Vec::new();
    for rec in log {
        serde_json::to_writer(&mut buf, rec).expect("record serializes");
        buf.push(b'\n');
    }
    fs::write(path, buf)
}

/// Plane path as `x,y` rows.
pub fn write_plane_path(path: &Path, traj: &Trajectory64) -> std::io::Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "x,y")?;
    for s in &traj.samples {
        writeln!(buf, "{},{}", format_sig17(s.state.u_s), format_sig17(s.state.v_s))?;
    }
    fs::write(path, buf)
}

/// Embedded sphere path as `x,y,z` rows.
pub fn write_sphere_path(path: &Path, traj: &Trajectory64, r_o: f64) -> std::io::Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "x,y,z")?;
    for s in &traj.samples {
        let e = sphere_embed(s.state.sphere_point(), r_o);
        writeln!(buf, "{},{},{}", format_sig17(e[0]), format_sig17(e[1]), format_sig17(e[2]))?;
    }
    fs::write(path, buf)
}

/// Error trajectories over the iteration index.
pub fn write_error_series(path: &Path, log: &[IterationRecord<f64>]) -> std::io::Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "k,e_n,e_r,plane_error,spin_error,phase")?;
    for rec in log {
        if let Some(d) = rec.diag {
            writeln!(
                buf,
                "{},{},{},{},{},{:?}",
                rec.k,
                format_sig17(d.e_n),
                format_sig17(d.e_r),
                format_sig17(d.plane_error),
                format_sig17(d.spin_error),
                rec.phase,
            )?;
        } else {
            writeln!(buf, "{},,,,,{:?}", rec.k, rec.phase)?;
        }
    }
    fs::write(path, buf)
}

/// Writes the full output bundle of a plan run into `dir`.
pub fn write_plan_bundle(
    dir: &Path,
    result: &PlanResult64,
    goal: &GoalSpec64,
    r_o: f64,
    wall_time_s: f64,
) -> std::io::Result<PlanReport> {
    fs::create_dir_all(dir)?;
    let report = PlanReport::from_result(result, goal, wall_time_s);
    write_report(&dir.join("report.json"), &report)?;
    write_trajectory_csv(&dir.join("trajectory.csv"), &result.trajectory, r_o)?;
    write_iteration_log(&dir.join("iterations.jsonl"), &result.log)?;
    write_plane_path(&dir.join("plane_path.csv"), &result.trajectory)?;
    write_sphere_path(&dir.join("sphere_path.csv"), &result.trajectory, r_o)?;
    write_error_series(&dir.join("errors.csv"), &result.log)?;
    Ok(report)
}
