use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spinroll_core::error::PlanError;
use spinroll_core::kinematics::{simulate, Variant};
use spinroll_core::planner;
use spinroll_core::reachability::{distance_surface, min_distance};
use spinroll_core::timescale;


use spinroll_cli::config::RunConfig;
use spinroll_cli::output::{self, PlanReport};
use spinroll_cli::batch;

/// Motion planning for a sphere that rolls and spins along a straight line
/// on a plane.
#[derive(Parser)]
#[command(name = "spinroll", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TimeOverrides {
    /// Override the constant time scale.
    #[arg(long)]
    t_const: Option<f64>,
    /// Override the simulation horizon, s.
    #[arg(long)]
    t_f: Option<f64>,
    /// Override the time mode: constant or smooth.
    #[arg(long)]
    timescale_mode: Option<String>,
    /// Smooth-profile amplitude, rad/s.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Smooth-profile duration, s.
    #[arg(long)]
    t_s: Option<f64>,
}

impl TimeOverrides {
    fn apply(&self, config: &mut RunConfig) {
        if let Some(v) = self.t_const {
            config.time.t_const = v;
        }
        if let Some(v) = self.t_f {
            config.time.t_f = v;
        }
        if let Some(m) = &self.timescale_mode {
            config.time.mode = m.clone();
        }
        if let Some(v) = self.amplitude {
            config.time.amplitude = Some(v);
        }
        if let Some(v) = self.t_s {
            config.time.t_s = Some(v);
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the iterative planner and export the converged trajectory.
    Plan {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Kinematics variant override: as-written or trig-corrected.
        #[arg(long)]
        variant: Option<String>,
        /// No-op: the toolkit is deterministic and seed-free.
        #[arg(long)]
        seedless: bool,
        #[command(flatten)]
        time: TimeOverrides,
    },
    /// Evaluate the minimum-distance constraint for a goal.
    Distance {
        #[arg(long)]
        config: PathBuf,
        /// Also emit the normalized distance surface over a goal-angle grid.
        #[arg(long)]
        grid: bool,
        /// Number of u-angle samples for the grid.
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
        /// Fixed v-angle for the grid, rad.
        #[arg(long, default_value_t = 0.01)]
        grid_v: f64,
        /// Comma-separated spin goals for the grid, rad.
        #[arg(long, default_value = "0.5,1.5,2.5")]
        grid_spins: String,
        /// Output directory for the grid table (prints the report either way).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One forward solve with explicit tuning constants (no planning loop).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        seedless: bool,
        #[command(flatten)]
        time: TimeOverrides,
    },
    /// Run a list of scenarios concurrently and aggregate their reports.
    Batch {
        /// Scenario list file.
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker count.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long)]
        seedless: bool,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    match s {
        "as-written" => Ok(Variant::AsWritten),
        "trig-corrected" => Ok(Variant::TrigCorrected),
        other => Err(format!("unknown variant {other:?} (expected as-written or trig-corrected)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Plan { config, out, variant, seedless: _, time } => {
            let mut cfg = RunConfig::load(&config).map_err(|e| e.message)?;
            time.apply(&mut cfg);
            cfg.validate().map_err(|e| e.message)?;
            if let Some(v) = variant {
                cfg.planner.variant = Some(parse_variant(&v)?);
            }
            let goal = cfg.goal_spec();
            let params = cfg.plan_params();
            let start = std::time::Instant::now();
            match planner::plan(&goal, &params) {
                Ok(result) => {
                    let wall = start.elapsed().as_secs_f64();
                    let report = output::write_plan_bundle(&out, &result, &goal, cfg.sphere.radius, wall)
                        .map_err(|e| format!("cannot write outputs: {e}"))?;
                    println!("{}", serde_json::to_string_pretty(&report).expect("report"));
                    Ok(if report.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
                }
                Err(e) => {
                    let report = PlanReport::failed(plan_error_label(&e));
                    std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
                    output::write_report(&out.join("report.json"), &report)
                        .map_err(|e| format!("cannot write report: {e}"))?;
                    println!("{}", serde_json::to_string_pretty(&report).expect("report"));
                    Ok(ExitCode::from(2))
                }
            }
        }
        Command::Distance { config, grid, grid_points, grid_v, grid_spins, out } => {
            let cfg = RunConfig::load(&config).map_err(|e| e.message)?;
            let goal = cfg.goal_spec();
            let report = min_distance(&goal, cfg.sphere.radius, cfg.distance_formulation())
                .map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report"));
            if grid {
                let spins: Vec<f64> = grid_spins
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad spin list: {e}")))
                    .collect::<Result<_, _>>()?;
                let n = grid_points.max(2);
                let u_grid: Vec<f64> =
                    (0..n).map(|i| std::f64::consts::PI * i as f64 / (n - 1) as f64).collect();
                let cells =
                    distance_surface(&u_grid, grid_v, &spins, cfg.sphere.radius, cfg.distance_formulation());
                let mut buf = String::from("u_goal,v_goal,spin_goal,d_over_r\n");
                for c in cells {
                    buf.push_str(&format!(
                        "{},{},{},{}\n",
                        c.u_goal,
                        c.v_goal,
                        c.spin_goal,
                        c.d_over_r.map_or(String::new(), |d| d.to_string()),
                    ));
                }
                match out {
                    Some(dir) => {
                        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
                        std::fs::write(dir.join("distance_surface.csv"), buf)
                            .map_err(|e| e.to_string())?;
                    }
                    None => print!("{buf}"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { config, out, variant, seedless: _, time } => {
            let mut cfg = RunConfig::load(&config).map_err(|e| e.message)?;
            let base_cfg = cfg.clone();
            let retiming = time.t_const.is_some()
                || time.t_f.is_some()
                || time.timescale_mode.is_some()
                || time.amplitude.is_some()
                || time.t_s.is_some();
            time.apply(&mut cfg);
            cfg.validate().map_err(|e| e.message)?;
            if let Some(v) = variant {
                cfg.planner.variant = Some(parse_variant(&v)?);
            }
            let tuning = cfg.tuning_state();
            let traj = if retiming {
                // Timescale overrides go through the re-timing path, which
                // checks that the paths are unchanged under the new scale.
                let base = simulate(&base_cfg.sim_setup(&tuning))
                    .map_err(|e| format!("solve failed: {e}"))?;
                timescale::retime(&base_cfg.sim_setup(&tuning), &base, cfg.time_scale(), 1e-4)
                    .map_err(|e| format!("re-timing failed: {e}"))?
            } else {
                simulate(&cfg.sim_setup(&tuning)).map_err(|e| format!("solve failed: {e}"))?
            };
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            output::write_trajectory_csv(&out.join("trajectory.csv"), &traj, cfg.sphere.radius)
                .map_err(|e| e.to_string())?;
            output::write_plane_path(&out.join("plane_path.csv"), &traj).map_err(|e| e.to_string())?;
            output::write_sphere_path(&out.join("sphere_path.csv"), &traj, cfg.sphere.radius)
                .map_err(|e| e.to_string())?;
            let goal = cfg.goal_spec();
            let diag = planner::extract_diagnostics(&traj, &goal, cfg.sphere.radius);
            let summary = serde_json::json!({
                "outcome": format!("{:?}", traj.outcome),
                "e_n": diag.e_n,
                "e_r": diag.e_r,
                "plane_error": diag.plane_error,
                "spin_error": diag.spin_error,
                "straightness": traj.straightness(&goal),
                "slide_ratio": traj.slide_ratio(),
                "plane_path_length": traj.total_plane_length(),
                "sphere_path_length": traj.final_sample().s_sphere,
            });
            let text = serde_json::to_string_pretty(&summary).expect("summary");
            std::fs::write(out.join("summary.json"), format!("{text}\n")).map_err(|e| e.to_string())?;
            println!("{text}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Batch { scenarios, out, parallel, seedless: _ } => {
            let outcome = batch::run_batch(&scenarios, &out, parallel).map_err(|e| e.message)?;
            println!(
                "{} scenarios, {} converged",
                outcome.reports.len(),
                outcome.reports.len() - outcome.failures
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn plan_error_label(e: &PlanError) -> String {
    match e {
        PlanError::InfeasibleGoal { d, dist } => {
            format!("InfeasibleGoal: minimum distance d = {d}, requested displacement {dist}")
        }
        PlanError::ExcludedDirection { g_f, band } => {
            format!("ExcludedDirection: goal angle {g_f} within {band} of pi/4")
        }
        PlanError::Reachability(inner) => format!("Reachability: {inner}"),
    }
}

