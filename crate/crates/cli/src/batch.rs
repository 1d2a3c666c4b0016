//! Batch harness: independent plans on a bounded worker pool.
//!
//! Scenarios share nothing; each writes its own output directory, so the
//! per-scenario bytes are identical whatever the parallelism. The summary
//! table is assembled in scenario order after all workers finish.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use spinroll_core::kinematics::format_sig17;
use spinroll_core::planner;

use crate::config::{ConfigError, RunConfig, ScenarioList};
use crate::output::{self, PlanReport};

pub struct BatchOutcome {
    pub reports: Vec<(String, PlanReport)>,
    pub failures: usize,
}

/// Runs every scenario and writes `summary.csv` plus one directory per
/// scenario under `out_dir`.
pub fn run_batch(
    scenario_file: &Path,
    out_dir: &Path,
    parallelism: usize,
) -> Result<BatchOutcome, ConfigError> {
    let (list, base) = ScenarioList::load(scenario_file)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| ConfigError { message: format!("cannot create {}: {e}", out_dir.display()) })?;

    let jobs: Vec<(usize, String, PathBuf)> = list
        .scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.name.clone(), base.join(&s.config)))
        .collect();

    let mut slots: Vec<Option<(String, PlanReport)>> = vec![None; jobs.len()];
    let workers = parallelism.max(1).min(jobs.len().max(1));
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for _ in 0..workers {
            let jobs = &jobs;
            let next = &next;
            let out_dir = out_dir.to_path_buf();
            handles.push(scope.spawn(move || {
                let mut results = Vec::new();
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= jobs.len() {
                        break;
                    }
                    let (index, name, config_path) = &jobs[i];
                    let report = run_scenario(config_path, &out_dir.join(name));
                    results.push((*index, name.clone(), report));
                }
                results
            }));
        }
        for handle in handles {
            for (index, name, report) in handle.join().expect("worker panicked") {
                slots[index] = Some((name, report));
            }
        }
    });

    let reports: Vec<(String, PlanReport)> = slots.into_iter().flatten().collect();
    let failures = reports.iter().filter(|(_, r)| !r.converged).count();
    write_summary(&out_dir.join("summary.csv"), &reports)
        .map_err(|e| ConfigError { message: format!("cannot write summary: {e}") })?;
    Ok(BatchOutcome { reports, failures })
}

fn run_scenario(config_path: &Path, out_dir: &Path) -> PlanReport {
    let config = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => return PlanReport::failed(e.message),
    };
    let goal = config.goal_spec();
    let params = config.plan_params();
    let start = std::time::Instant::now();
    match planner::plan(&goal, &params) {
        Ok(result) => {
            let wall = start.elapsed().as_secs_f64();
            match output::write_plan_bundle(out_dir, &result, &goal, config.sphere.radius, wall) {
                Ok(report) => report,
                Err(e) => PlanReport::failed(format!("write failed: {e}")),
            }
        }
        Err(e) => PlanReport::failed(e.to_string()),
    }
}

/// Summary table; deliberately excludes wall time so the bytes are
/// reproducible across runs and parallelism settings.
fn write_summary(path: &Path, reports: &[(String, PlanReport)]) -> std::io::Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "name,converged,iterations,e_n,e_r,plane_error,spin_error,failure")?;
    for (name, r) in reports {
        writeln!(
            buf,
            "{},{},{},{},{},{},{},{}",
            name,
            r.converged,
            r.iterations,
            format_sig17(r.e_n),
            format_sig17(r.e_r),
            format_sig17(r.plane_error),
            format_sig17(r.spin_error),
            r.failure.as_deref().unwrap_or(""),
        )?;
    }
    std::fs::write(path, buf)
}
