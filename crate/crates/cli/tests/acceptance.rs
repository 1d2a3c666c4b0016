//! Acceptance suite: one test per acceptance criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`).
//!
//! Run with:
//!   cargo test -p spinroll-cli --test acceptance -- --nocapture --test-threads 1

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::PathBuf;
use std::sync::OnceLock;

use spinroll_cli::RunConfig;
use spinroll_core::geometry::{
    cap_spin_change, rotate_to_goal_frame, sphere_embed, PlanePoint, SpherePoint,
};
use spinroll_core::kinematics::{simulate, Configuration, IntegratorOptions, SimSetup, Variant};
use spinroll_core::planner::{chord_error, plan, PhaseUpdate, PlanResult};
use spinroll_core::reachability::{min_distance, DistanceFormulation, GoalSpec};
use spinroll_core::timescale::{path_deviation, smooth_velocity, TimeScale};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn case_study_config() -> RunConfig {
    RunConfig::load(&configs_dir().join("case_study.toml")).expect("case study config")
}

/// The case-study planning run, shared by criteria 1, 3, 4 and 5.
fn case_study_run() -> &'static (RunConfig, PlanResult<f64>) {
    static RUN: OnceLock<(RunConfig, PlanResult<f64>)> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = case_study_config();
        let goal = config.goal_spec();
        let params = config.plan_params();
        let result = plan(&goal, &params).expect("planning starts");
        (config, result)
    })
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Simple deterministic generator for property sampling.
struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn angle(&mut self) -> f64 {
        (self.next_f64() * 2.0 - 1.0) * PI
    }
}

#[test]
fn criterion_1_case_study_convergence() {
    let start = std::time::Instant::now();
    let (_config, result) = case_study_run();
    let wall = start.elapsed().as_secs_f64();
    let d = &result.diag;
    let ok = result.converged()
        && result.iterations <= 500
        && wall <= 120.0
        && d.e_n <= 0.07
        && d.e_r <= 0.07
        && d.plane_error <= 0.12
        && d.spin_error <= 0.05;
    println!(
        "criterion 1 ({}): converged={} iterations={} wall={wall:.1}s e_n={:.4} e_r={:.4} plane={:.4} spin={:.4}",
        status(ok),
        result.converged(),
        result.iterations,
        d.e_n,
        d.e_r,
        d.plane_error,
        d.spin_error
    );
    assert!(
        ok,
        "case-study planning did not satisfy all four tolerances: \
         e_n={} (<=0.07) e_r={} (<=0.07) plane={} (<=0.12) spin={} (<=0.05)",
        d.e_n, d.e_r, d.plane_error, d.spin_error
    );
}

#[test]
fn criterion_2_minimum_distance() {
    let config = case_study_config();
    let report = min_distance(&config.goal_spec(), 0.5, config.distance_formulation()).unwrap();
    let ok = (report.d - 2.15).abs() <= 0.05 && report.feasible;
    println!("criterion 2 ({}): d={:.4} feasible={}", status(ok), report.d, report.feasible);
    assert!(ok, "d = {}", report.d);
}

#[test]
fn criterion_3_straight_line_property() {
    let (config, result) = case_study_run();
    let goal = config.goal_spec();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for rec in &result.log {
        if rec.solve_complete {
            worst = worst.max(rec.straightness);
            checked += 1;
        }
    }
    let ok = checked > 0 && worst <= 5e-3 && goal.goal_angle() == (3.2_f64).atan2(3.0);
    println!(
        "criterion 3 ({}): {} complete iterates, max ray deviation {:.2e} rad",
        status(ok),
        checked,
        worst
    );
    assert!(ok, "max deviation {worst}");
}

#[test]
fn criterion_4_time_scale_invariance() {
    let (config, result) = case_study_run();
    // Re-run the best tunables with (T, t_f) and (10T, 10 t_f) at a tight
    // tolerance and compare the paths over matched arc length.
    let tuning = result.tuning;
    let mut setup = config.sim_setup(&tuning);
    setup.options = IntegratorOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() };
    setup.time = TimeScale::constant(1.0, 15.0);
    let reference = simulate(&setup).unwrap();
    let mut slow = setup.clone();
    slow.time = TimeScale::constant(10.0, 150.0);
    let scaled = simulate(&slow).unwrap();
    let dev = path_deviation(&reference, &scaled, 0.5);
    let ok = reference.outcome.is_complete() && scaled.outcome.is_complete() && dev <= 1e-4;
    println!("criterion 4 ({}): path deviation {dev:.3e} over matched arc length", status(ok));
    assert!(ok, "deviation {dev}");
}

#[test]
fn criterion_5_smooth_velocity_profile() {
    let (a, t_s) = (12.91_f64, 160.0_f64);
    let end_zero = smooth_velocity(0.0, a, t_s) == 0.0 && smooth_velocity(t_s, a, t_s) == 0.0;
    let mid = smooth_velocity(t_s / 2.0, a, t_s);
    let mid_ok = (mid - 14.120).abs() <= 1e-3;

    // Re-time the case-study tunables under the smooth profile and check
    // the rest-to-rest property of the angular velocities.
    let (config, result) = case_study_run();
    let mut setup = config.sim_setup(&result.tuning);
    setup.time = TimeScale::smooth(a, t_s, 1.0, t_s);
    setup.options = IntegratorOptions { rtol: 1e-8, atol: 1e-8, ..Default::default() };
    let traj = simulate(&setup).unwrap();
    let omega = |i: usize, j: usize| {
        let (s0, s1) = (&traj.samples[i], &traj.samples[j]);
        let dt = s1.t - s0.t;
        let du = (s1.state.u_o - s0.state.u_o) / dt;
        let dv = (s1.state.v_o - s0.state.v_o) / dt;
        let dp = (s1.state.psi - s0.state.psi) / dt;
        (du * du + dv * dv + dp * dp).sqrt()
    };
    let n = traj.samples.len();
    let start_speed = omega(0, 1);
    let end_speed = omega(n - 2, n - 1);
    let rest_ok = traj.outcome.is_complete() && start_speed < 1e-3 && end_speed < 1e-3;

    let ok = end_zero && mid_ok && rest_ok;
    println!(
        "criterion 5 ({}): endpoints exact-zero={} midpoint={:.4} start={:.2e} end={:.2e} rad/s",
        status(ok),
        end_zero,
        mid,
        start_speed,
        end_speed
    );
    assert!(ok, "midpoint {mid}, start {start_speed}, end {end_speed}");
}

#[test]
fn criterion_6_multi_spin_convergence() {
    let cases = [
        ("multi_spin_a.toml", -1.7),
        ("multi_spin_b.toml", 1.3),
        ("multi_spin_c.toml", 2.3),
    ];
    let mut all_ok = true;
    let mut lines = Vec::new();
    for (file, psi_f) in cases {
        let config = RunConfig::load(&configs_dir().join(file)).unwrap();
        let goal = config.goal_spec();
        let params = config.plan_params();
        let result = plan(&goal, &params).unwrap();
        let d = &result.diag;
        let ok = result.converged() && result.iterations <= 500;
        all_ok &= ok;
        lines.push(format!(
            "  psi_f={psi_f:+.1}: converged={} iters={} e_n={:.4} e_r={:.4} plane={:.4} spin={:.4}",
            result.converged(),
            result.iterations,
            d.e_n,
            d.e_r,
            d.plane_error,
            d.spin_error
        ));
    }
    println!("criterion 6 ({}):", status(all_ok));
    for line in &lines {
        println!("{line}");
    }
    assert!(all_ok, "{}", lines.join("\n"));
}

#[test]
fn criterion_7_property_suite() {
    let mut rng = Lcg(0x5EED);

    // Embedding norm over 1000 samples.
    let mut norm_ok = true;
    for _ in 0..1000 {
        let p = SpherePoint::new(rng.angle(), rng.angle());
        let e = sphere_embed(p, 0.5);
        let norm = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
        norm_ok &= (norm - 0.5).abs() <= 0.5 * 1e-12;
    }

    // Goal-frame rotation vs the vertical-axis matrix oracle, 1e-9.
    let mut rot_ok = true;
    for _ in 0..1000 {
        let p = SpherePoint::new(rng.angle(), rng.angle());
        let g_f = rng.angle();
        let q = rotate_to_goal_frame(p, g_f).unwrap();
        let [x, y, z] = sphere_embed(p, 1.0);
        let gp = g_f - FRAC_PI_4;
        let oracle = [x * gp.cos() - y * gp.sin(), x * gp.sin() + y * gp.cos(), z];
        let qe = sphere_embed(q, 1.0);
        for i in 0..3 {
            rot_ok &= (qe[i] - oracle[i]).abs() <= 1e-9;
        }
    }

    // Spin change from a polar cap matches the curvature quadrature, 1e-3.
    let r_o = 0.5;
    let theta_c = 1.1_f64;
    let steps = 20_000;
    let mut integral = 0.0;
    for i in 0..steps {
        let th = theta_c * (i as f64 + 0.5) / steps as f64;
        integral += th.sin() * (theta_c / steps as f64) * 2.0 * PI;
    }
    let cap_area = 2.0 * PI * r_o * r_o * (1.0 - theta_c.cos());
    let quad_ok = (cap_spin_change(cap_area, r_o) - integral).abs() <= 1e-3;

    // Chord metric vs the embedding oracle, 1e-12.
    let mut chord_ok = true;
    for _ in 0..1000 {
        let a = SpherePoint::new(rng.angle(), rng.angle());
        let b = SpherePoint::new(rng.angle(), rng.angle());
        let ea = sphere_embed(a, 0.5);
        let eb = sphere_embed(b, 0.5);
        let norm = ((ea[0] - eb[0]).powi(2) + (ea[1] - eb[1]).powi(2) + (ea[2] - eb[2]).powi(2)).sqrt();
        chord_ok &= (chord_error(a, b, 0.5) - norm).abs() <= 1e-12;
    }

    // Best-error monotonicity on the case-study iteration log: the running
    // minima never increase within a descent episode.
    let (_config, result) = case_study_run();
    let mut mono_ok = true;
    let mut prev: Option<(PhaseUpdate, f64, f64)> = None;
    for rec in &result.log {
        if let Some(d) = rec.diag {
            if let Some((last_phase, e_n_best, e_r_best)) = prev {
                if last_phase == PhaseUpdate::Phase1Zeta {
                    mono_ok &= d.e_n_best <= e_n_best + 1e-15;
                }
                if matches!(last_phase, PhaseUpdate::Phase1Zeta | PhaseUpdate::Phase2Radius) {
                    mono_ok &= d.e_r_best <= e_r_best + 1e-15;
                }
            }
            prev = Some((rec.phase, d.e_n_best, d.e_r_best));
        } else {
            prev = None;
        }
    }

    // Batch determinism: serial and parallel runs produce identical bytes.
    let dir = std::env::temp_dir().join(format!("spinroll-accept-batch-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let quick = r#"
[sphere]
radius = 0.5

[goal]
u_s = 3.0
v_s = 3.2
u_o = -2.3707963267948966
v_o = 0.8
psi = 0.8

[time]
t-f = 1.5

[integrator]
rtol = 1e-6
atol = 1e-9
min-samples = 100

[planner]
max-iters = 3
"#;
    std::fs::write(dir.join("a.toml"), quick).unwrap();
    std::fs::write(dir.join("b.toml"), quick.replace("t-f = 1.5", "t-f = 2.0")).unwrap();
    std::fs::write(
        dir.join("scenarios.toml"),
        "[[scenarios]]\nname = \"a\"\nconfig = \"a.toml\"\n\n[[scenarios]]\nname = \"b\"\nconfig = \"b.toml\"\n",
    )
    .unwrap();
    spinroll_cli::batch::run_batch(&dir.join("scenarios.toml"), &dir.join("serial"), 1).unwrap();
    spinroll_cli::batch::run_batch(&dir.join("scenarios.toml"), &dir.join("parallel"), 8).unwrap();
    let read = |p: &str| std::fs::read(dir.join(p)).unwrap();
    let batch_ok = read("serial/summary.csv") == read("parallel/summary.csv")
        && read("serial/a/trajectory.csv") == read("parallel/a/trajectory.csv")
        && read("serial/b/trajectory.csv") == read("parallel/b/trajectory.csv");

    // Integrator tolerance halving on an error-controlled solve.
    let benign = |rtol: f64| SimSetup {
        goal: GoalSpec::from_origin(PlanePoint::new(2.0, 2.1), SpherePoint::new(0.6, 0.3), 0.3),
        initial: Configuration::zero(),
        r_o: 0.5,
        mu_r: 4.0,
        zeta_prime: 0.0,
        r_a: 0.2,
        psi_u: 0.0,
        time: TimeScale::constant(1.0, 0.25),
        variant: Variant::AsWritten,
        v_shift: false,
        cap_form: DistanceFormulation::default(),
        options: IntegratorOptions {
            rtol,
            atol: rtol,
            max_step: Some(0.25),
            min_samples: 2,
            ..Default::default()
        },
        pole_softening: 1e-3,
    };
    let coarse = simulate(&benign(1e-8)).unwrap();
    let fine = simulate(&benign(5e-9)).unwrap();
    let (fa, fb) = (coarse.final_sample().state, fine.final_sample().state);
    let halving_diff = [fa.u_s - fb.u_s, fa.v_s - fb.v_s, fa.u_o - fb.u_o, fa.v_o - fb.v_o, fa.psi - fb.psi]
        .iter()
        .fold(0.0_f64, |m, d| m.max(d.abs()));
    let halving_ok = halving_diff < 10.0 * 1e-8;

    let ok = norm_ok && rot_ok && quad_ok && chord_ok && mono_ok && batch_ok && halving_ok;
    println!(
        "criterion 7 ({}): norm={} rotation={} quadrature={} chord={} monotone={} batch={} halving={} (diff {halving_diff:.2e})",
        status(ok),
        norm_ok,
        rot_ok,
        quad_ok,
        chord_ok,
        mono_ok,
        batch_ok,
        halving_ok
    );
    assert!(ok);
}

#[test]
fn criterion_8_no_sliding_diagnostic() {
    // Smoke solve: case-study goal with the initial tuning constants under
    // the default variant, at the tight module tolerances.
    let goal = GoalSpec::from_origin(
        PlanePoint::new(3.0, 3.2),
        SpherePoint::new(-FRAC_PI_2 - 0.8, 0.8),
        0.8,
    );
    let setup = |variant: Variant| SimSetup {
        goal,
        initial: Configuration::zero(),
        r_o: 0.5,
        mu_r: 4.0,
        zeta_prime: 0.0,
        r_a: 0.005,
        psi_u: 0.0,
        time: TimeScale::constant(1.0, 15.0),
        variant,
        v_shift: false,
        cap_form: DistanceFormulation::default(),
        options: IntegratorOptions { rtol: 1e-8, atol: 1e-8, ..Default::default() },
        pole_softening: 1e-3,
    };
    let default_run = simulate(&setup(Variant::default())).unwrap();
    let slide = default_run.slide_ratio();
    let default_ok = default_run.outcome.is_complete() && slide <= 1e-3;

    // Recorded arbitration fixture: the corrected-trig reading is
    // inconsistent on the same smoke case, which is why it is not the
    // default.
    let corrected = simulate(&setup(Variant::TrigCorrected)).unwrap();
    let corrected_slide = corrected.slide_ratio();
    let corrected_dev = corrected.straightness(&goal);
    let arbitration_ok = corrected_slide > 1e-3 || corrected_dev > 5e-3;

    let ok = default_ok && arbitration_ok && Variant::default() == Variant::AsWritten;
    println!(
        "criterion 8 ({}): default-variant slide ratio {slide:.2e}; corrected-variant slide {corrected_slide:.2e}, deviation {corrected_dev:.2e}",
        status(ok)
    );
    assert!(ok, "slide {slide}, corrected {corrected_slide}/{corrected_dev}");
}
