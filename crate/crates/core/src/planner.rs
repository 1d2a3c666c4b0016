//! The three-phase iterative tuning loop.
//!
//! Each iteration runs one forward solve, extracts where the sphere curve
//! actually went, and nudges exactly one tuning constant:
//!
//! * Phase I steers the projection shift `zeta_q` until the curve passes the
//!   goal orientation (nearest-point error `e_n`).
//! * Phase II first grows the radius offset `r_q` until the curve *ends* on
//!   the goal orientation (`e_r`), then shifts `r_u`/`zeta_u` to land the
//!   plane endpoint on the goal position.
//! * Phase III biases the desired under-cap area through `psi_u` until the
//!   final spin angle matches.
//!
//! The running best errors act as the line-search step sizes, so steps
//! shrink as iterates improve. All equality tests that the source pseudocode
//! writes with exact `=` use the matching tolerance as the equality radius.

use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::geometry::{rotate_to_goal_frame, sphere_embed, zx_zy_angles, PlanePoint, SpherePoint};
use crate::kinematics::{simulate, Configuration, IntegratorOptions, SimSetup, Trajectory, Variant};
use crate::reachability::{min_distance, DistanceFormulation, GoalSpec};
use crate::scalar::Real;
use crate::timescale::TimeScale;

/// Planner-owned tuning constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningState<T> {
    /// Phase-I projection shift, rad.
    pub zeta_q: T,
    /// Phase-II projection shift, rad.
    pub zeta_u: T,
    /// Phase-II radius gain, m.
    pub r_q: T,
    /// Phase-II radius shift, m.
    pub r_u: T,
    /// Phase-III spin bias, rad.
    pub psi_u: T,
    /// Iteration counter.
    pub k: u32,
}

impl<T: Real> TuningState<T> {
    pub fn initial(r_q_init: T) -> Self {
        Self {
            zeta_q: T::zero(),
            zeta_u: T::zero(),
            r_q: r_q_init,
            r_u: T::zero(),
            psi_u: T::zero(),
            k: 0,
        }
    }

    /// Combined projection shift fed to the controller.
    pub fn zeta_prime(&self) -> T {
        self.zeta_q + self.zeta_u
    }

    /// Combined radius offset fed to the controller.
    pub fn r_a(&self) -> T {
        self.r_q + self.r_u
    }
}

/// Convergence tolerances and the iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances<T> {
    /// Nearest-point orientation error bound, m.
    pub eps_n: T,
    /// Final orientation error bound, m.
    pub eps_r: T,
    /// Plane position error bound, m.
    pub eps_p: T,
    /// Spin angle error bound, rad.
    pub eps_s: T,
    pub max_iters: u32,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            eps_n: T::lit(0.07),
            eps_r: T::lit(0.07),
            eps_p: T::lit(0.12),
            eps_s: T::lit(0.05),
            max_iters: 500,
        }
    }
}

/// Sphere sections relative to the rotated goal, used by the Phase-I sign
/// rule.
///
/// All points are rotated into the goal frame first. `rho_1`/`rho_2`
/// classify the v-plane crossing by which side of the goal's u-section it
/// lies on (right/left); `rho_3`/`rho_4` classify the u-plane crossing by
/// the goal's v-section (below/above). `rho_n*` are the quadrant flags of
/// the nearest point, numbered cyclically: `n1` above-right, `n2`
/// below-right, `n3` below-left, `n4` above-left, where above means
/// `v_r >= v_r(goal)` and right means `u_r >= u_r(goal)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegionFlags {
    pub rho_1: bool,
    pub rho_2: bool,
    pub rho_3: bool,
    pub rho_4: bool,
    pub rho_n1: bool,
    pub rho_n2: bool,
    pub rho_n3: bool,
    pub rho_n4: bool,
}

/// Everything the update rules need from one solved trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics<T> {
    /// Point of the sphere curve nearest to the goal orientation.
    pub nearest: SpherePoint<T>,
    /// Final point of the sphere curve.
    pub last: SpherePoint<T>,
    /// Last crossing of the `u = u_goal` cutting plane, if any.
    pub crossing_u: Option<SpherePoint<T>>,
    /// Last crossing of the `v = v_goal` cutting plane, if any.
    pub crossing_v: Option<SpherePoint<T>>,
    /// Plane position at the nearest sample.
    pub plane_nearest: PlanePoint<T>,
    /// Final plane position.
    pub plane_last: PlanePoint<T>,
    /// Unwrapped spin at the nearest sample and at the end.
    pub spin_nearest: T,
    pub spin_last: T,
    /// Nearest-point and final orientation errors, m.
    pub e_n: T,
    pub e_r: T,
    /// Running minima used as step sizes.
    pub e_n_best: T,
    pub e_r_best: T,
    pub e_s_best: T,
    /// Plane-distance ratio of the nearest sample.
    pub d_s: T,
    /// Spin loop count `|psi_l / psi_n|`.
    pub n_s: T,
    /// Final plane position error, m.
    pub plane_error: T,
    /// Final spin error, rad.
    pub spin_error: T,
}

/// Chord distance between two sphere points through the embedding.
pub fn chord_error<T: Real>(a: SpherePoint<T>, b: SpherePoint<T>, r_o: T) -> T {
    let (sua, cua) = a.u.sin_cos();
    let (sva, cva) = a.v.sin_cos();
    let (sub, cub) = b.u.sin_cos();
    let (svb, cvb) = b.v.sin_cos();
    let d1 = sva - svb;
    let d2 = cua * cva - cub * cvb;
    let d3 = sua * cva - sub * cvb;
    r_o * (d1 * d1 + d2 * d2 + d3 * d3).sqrt()
}

/// Finds the last sign-change crossing of `series = target` and linearly
/// interpolates the companion coordinate.
fn last_crossing<T: Real>(
    samples: &[crate::kinematics::Sample<T>],
    pick: impl Fn(&Configuration<T>) -> (T, T),
    target: T,
) -> Option<(T, T)> {
    let mut result = None;
    let mut prev: Option<(T, T)> = None;
    for s in samples {
        let (val, other) = pick(&s.state);
        let diff = (val - target).wrap_angle();
        if let Some((pd, po)) = prev {
            if pd == T::zero() {
                result = Some((target, po));
            } else if pd * diff < T::zero() && (diff - pd).abs() < T::PI() {
                let tau = pd / (pd - diff);
                result = Some((target, po + (other - po) * tau));
            }
        }
        prev = Some((diff, other));
    }
    if let Some((pd, po)) = prev {
        if pd == T::zero() {
            result = Some((target, po));
        }
    }
    result
}

/// Collects the per-iteration diagnostics from a solved trajectory.
///
/// The nearest point minimizes the embedded chord distance to the goal
/// orientation; crossings keep their last occurrence since the curve may
/// pass a cutting plane several times. Best-error fields are seeded with the
/// current values; the planner replaces them with its running minima.
pub fn extract_diagnostics<T: Real>(
    traj: &Trajectory<T>,
    goal: &GoalSpec<T>,
    r_o: T,
) -> IterationDiagnostics<T> {
    let goal_embed = sphere_embed(goal.orient_goal, r_o);
    let mut best_i = 0usize;
    let mut best_d = T::infinity();
    for (i, s) in traj.samples.iter().enumerate() {
        let e = sphere_embed(s.state.sphere_point(), r_o);
        let mut d = T::zero();
        for k in 0..3 {
            d = d + (e[k] - goal_embed[k]) * (e[k] - goal_embed[k]);
        }
        if d < best_d {
            best_d = d;
            best_i = i;
        }
    }
    let nearest_sample = &traj.samples[best_i];
    let final_sample = traj.final_sample();

    let crossing_u = last_crossing(&traj.samples, |c| (c.u_o, c.v_o), goal.orient_goal.u)
        .map(|(u, v)| SpherePoint::new(u, v));
    let crossing_v = last_crossing(&traj.samples, |c| (c.v_o, c.u_o), goal.orient_goal.v)
        .map(|(v, u)| SpherePoint::new(u, v));

    let e_n = chord_error(nearest_sample.state.sphere_point(), goal.orient_goal, r_o);
    let e_r = chord_error(final_sample.state.sphere_point(), goal.orient_goal, r_o);
    let plane_nearest = nearest_sample.state.plane_point();
    let plane_last = final_sample.state.plane_point();
    let denom = goal.plane_start.distance(&goal.plane_goal);
    let d_s = plane_nearest.distance(&goal.plane_goal) / denom;
    let spin_nearest = nearest_sample.state.psi;
    let spin_last = final_sample.state.psi;
    let n_s = {
        let r = (spin_last / spin_nearest).abs();
        if r.is_finite() {
            r
        } else {
            T::infinity()
        }
    };
    let plane_error = plane_last.distance(&goal.plane_goal);
    let spin_error = (goal.spin_goal - spin_last).abs();

    IterationDiagnostics {
        nearest: nearest_sample.state.sphere_point(),
        last: final_sample.state.sphere_point(),
        crossing_u,
        crossing_v,
        plane_nearest,
        plane_last,
        spin_nearest,
        spin_last,
        e_n,
        e_r,
        e_n_best: e_n,
        e_r_best: e_r,
        e_s_best: spin_error,
        d_s,
        n_s,
        plane_error,
        spin_error,
    }
}

/// Builds the section flags from goal-frame rotated points.
pub fn region_flags<T: Real>(
    diag: &IterationDiagnostics<T>,
    goal: &GoalSpec<T>,
) -> Result<RegionFlags, crate::error::GeometryError> {
    let g_f = goal.goal_angle();
    let f = rotate_to_goal_frame(goal.orient_goal, g_f)?;
    let n = rotate_to_goal_frame(diag.nearest, g_f)?;
    let u_cross = diag.crossing_u.map(|p| rotate_to_goal_frame(p, g_f)).transpose()?;
    let v_cross = diag.crossing_v.map(|p| rotate_to_goal_frame(p, g_f)).transpose()?;

    let above = n.v >= f.v;
    let right = n.u >= f.u;
    Ok(RegionFlags {
        rho_1: v_cross.is_some_and(|p| p.u >= f.u),
        rho_2: v_cross.is_some_and(|p| p.u < f.u),
        rho_3: u_cross.is_some_and(|p| p.v < f.v),
        rho_4: u_cross.is_some_and(|p| p.v >= f.v),
        rho_n1: above && right,
        rho_n2: !above && right,
        rho_n3: !above && !right,
        rho_n4: above && !right,
    })
}

/// Direction of the Phase-I update: `+1`, `-1`, or `0` for no change.
pub fn phase1_sign<T: Real>(
    flags: &RegionFlags,
    rotated_goal: SpherePoint<T>,
) -> i8 {
    let v_f = rotated_goal.v >= T::zero();
    let u_f = rotated_goal.u >= T::zero();
    if flags.rho_2 && flags.rho_4 {
        // Exceptional updates: unwind loops of the curve back toward the
        // start.
        if flags.rho_n2 {
            1
        } else if flags.rho_n4 {
            if v_f {
                if u_f {
                    1
                } else {
                    -1
                }
            } else {
                -1
            }
        } else {
            0
        }
    } else if !flags.rho_1 && !flags.rho_2 && !flags.rho_3 && !flags.rho_4 {
        // No cutting-plane crossings exist.
        if v_f {
            -1
        } else {
            1
        }
    } else if (flags.rho_n2 && flags.rho_n3) || (flags.rho_3 && flags.rho_n2 && flags.rho_n4) {
        // Unreachable with exclusive quadrant flags; kept so the branch
        // structure matches the full section decision table.
        if u_f {
            1
        } else {
            -1
        }
    } else {
        // Normal updates: the above-section pair {n1, n4} moves with the
        // goal's hemisphere, the below pair {n2, n3} against it.
        let above = flags.rho_n1 || flags.rho_n4;
        if above == v_f {
            1
        } else {
            -1
        }
    }
}

/// Phase-I update of `zeta_q`.
///
/// `damping` scales the raw increment; the planner halves it whenever the
/// update direction flips so the search cannot lock into a two-cycle around
/// the basin floor.
pub fn phase1_update<T: Real>(
    diag: &IterationDiagnostics<T>,
    goal: &GoalSpec<T>,
    tuning: &TuningState<T>,
    damping: T,
) -> Result<(TuningState<T>, i8), crate::error::GeometryError> {
    let g_f = goal.goal_angle();
    let flags = region_flags(diag, goal)?;
    let f_rot = rotate_to_goal_frame(goal.orient_goal, g_f)?;
    let n_rot = rotate_to_goal_frame(diag.nearest, g_f)?;
    let (q_zx_f, q_zy_f) = zx_zy_angles(f_rot);
    let (q_zx_n, q_zy_n) = zx_zy_angles(n_rot);
    let magnitude = if q_zx_f == q_zx_n {
        diag.e_n_best * (q_zx_f - q_zx_n).abs()
    } else {
        diag.e_n_best * (q_zy_f - q_zy_n).abs()
    };
    // Far from convergence the raw product overshoots the basins the shift
    // angle moves through, which are a few tenths of a radian wide.
    let magnitude = magnitude.min(T::lit(0.1));
    let sign = phase1_sign(&flags, f_rot);
    let mut next = *tuning;
    next.zeta_q = tuning.zeta_q + T::lit(sign as f64) * damping * magnitude;
    Ok((next, sign))
}

/// Phase-II radius update of `r_q`.
///
/// The increment grows the curve loops; it is added while the endpoint still
/// differs from the nearest point (within `eps_r`) and subtracted with the
/// small-loop magnitude once they coincide.
pub fn phase2_radius_update<T: Real>(
    diag: &IterationDiagnostics<T>,
    tuning: &TuningState<T>,
    r_o: T,
    eps_r: T,
) -> TuningState<T> {
    phase2_radius_update_damped(diag, tuning, r_o, eps_r, T::infinity()).0
}

/// Radius update with the planner's step policy applied: `damping` scales
/// the increment, and the result is clamped to a trust region of half the
/// current radius (the raw increment scales with the endpoint error, which
/// early in a run is the sphere diameter and would throw the radius far
/// outside the regime where the loop structure survives). Passing infinite
/// damping disables the policy and recovers the bare update rule.
/// Returns the new state and the direction taken (`+1` grow, `-1` shrink).
pub fn phase2_radius_update_damped<T: Real>(
    diag: &IterationDiagnostics<T>,
    tuning: &TuningState<T>,
    r_o: T,
    eps_r: T,
    damping: T,
) -> (TuningState<T>, i8) {
    let base = diag.d_s * diag.e_r_best;
    let one = T::one();
    let two = T::lit(2.0);
    let scaled = if diag.n_s <= one {
        base
    } else if diag.n_s <= two {
        diag.n_s * base
    } else if diag.n_s.is_finite() {
        base / diag.n_s
    } else {
        T::zero()
    };
    let clamp = |step: T| {
        if damping.is_finite() {
            let cap = (tuning.r_q.abs() * T::lit(0.5)).max(T::lit(1e-3));
            num_traits::clamp(step * damping, -cap, cap)
        } else {
            step
        }
    };
    let mut next = *tuning;
    if chord_error(diag.last, diag.nearest, r_o) > eps_r {
        next.r_q = tuning.r_q + clamp(r_o * scaled);
        (next, 1)
    } else {
        next.r_q = tuning.r_q - clamp(r_o * base);
        (next, -1)
    }
}

/// Phase-II plane update of `r_u` and `zeta_u`.
///
/// Returns `None` when the endpoint coincides with the start (the shift
/// ratio is undefined); the planner skips the update in that case. The
/// shift ratio is clamped at 1: when the endpoint froze early the raw ratio
/// exceeds 1 and one unclamped step drives the radius offset far enough
/// negative that the steering loses its working range.
pub fn phase2_plane_update<T: Real>(
    diag: &IterationDiagnostics<T>,
    goal: &GoalSpec<T>,
    tuning: &TuningState<T>,
    r_o: T,
) -> Option<TuningState<T>> {
    let denom = diag.plane_last.distance(&goal.plane_start);
    if denom <= T::lit(1e-12) {
        return None;
    }
    let mut next = *tuning;
    next.r_u = tuning.r_u - tuning.r_q * (diag.plane_error / denom).min(T::one());
    let shift = (next.r_u * tuning.zeta_q.tan() / r_o).atan();
    next.zeta_u = if goal.orient_goal.v >= T::zero() {
        tuning.zeta_u - shift
    } else {
        tuning.zeta_u + shift
    };
    Some(next)
}

/// Phase-III spin update of `psi_u`.
pub fn phase3_spin_update<T: Real>(
    diag: &IterationDiagnostics<T>,
    goal: &GoalSpec<T>,
    tuning: &TuningState<T>,
) -> TuningState<T> {
    let mut next = *tuning;
    let sign = if goal.spin_goal >= diag.spin_last { T::one() } else { -T::one() };
    // The spin bias enters the dynamics only through the deviation angle,
    // which is exactly 2 pi periodic in it; large error-sized hops would
    // alias around the circle, so the step is capped.
    let step = diag.e_s_best.min(T::lit(0.5));
    next.psi_u = (tuning.psi_u - step * sign).wrap_angle();
    next
}

/// Which update a planning iteration applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseUpdate {
    /// Terminal iterate; no update applied.
    Converged,
    Phase1Zeta,
    Phase2Radius,
    Phase2Plane,
    /// Plane update skipped because the endpoint coincides with the start.
    Phase2PlaneSkipped,
    Phase3Spin,
    /// Epoch boundary where both the plane and the spin updates applied.
    Phase2PlaneAndSpin,
    /// The solve failed (pole, step underflow, or budget); its diagnostics
    /// are untrustworthy, so the tuning state was contracted toward the
    /// previous one instead of a formula update.
    FailedSolve,
    /// The solve produced no usable samples; contracted as for
    /// [`PhaseUpdate::FailedSolve`].
    DeadIterate,
    /// Pattern-search refinement step around the best iterate, taken when
    /// the phase updates stagnate.
    Refine,
}

/// One line of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord<T> {
    pub k: u32,
    /// Tuning constants used for this solve.
    pub tuning: TuningState<T>,
    pub diag: Option<IterationDiagnostics<T>>,
    pub phase: PhaseUpdate,
    /// Whether the solve ran to the horizon.
    pub solve_complete: bool,
    /// Plane-path deviation from the goal ray, rad.
    pub straightness: T,
    /// Arc-length mismatch ratio.
    pub slide_ratio: T,
    /// Termination flags at this iterate.
    pub within_eps_n: bool,
    pub within_eps_r: bool,
    pub within_eps_p: bool,
    pub within_eps_s: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanOutcome {
    Converged,
    /// Iteration budget exhausted; the carried state is the best iterate.
    MaxIterations,
}

/// Result of a planning run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanResult<T> {
    pub outcome: PlanOutcome,
    pub tuning: TuningState<T>,
    pub trajectory: Trajectory<T>,
    pub diag: IterationDiagnostics<T>,
    pub log: Vec<IterationRecord<T>>,
    pub iterations: u32,
}

impl<T: Real> PlanResult<T> {
    pub fn converged(&self) -> bool {
        matches!(self.outcome, PlanOutcome::Converged)
    }
}

/// Planner configuration beyond the goal itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanParams<T> {
    pub r_o: T,
    pub mu_r: T,
    pub time: TimeScale<T>,
    pub tolerances: Tolerances<T>,
    pub variant: Variant,
    pub v_shift: bool,
    pub cap_form: DistanceFormulation,
    pub integrator: IntegratorOptions<T>,
    /// Chart-pole softening passed to every solve.
    pub pole_softening: T,
    /// Half-width of the rejected band around the uncontrollable plane
    /// direction `pi/4`.
    pub pi4_exclusion_band: T,
    pub r_q_init: T,
    /// Gate planning on the minimum-distance constraint.
    pub check_feasibility: bool,
}

impl<T: Real> PlanParams<T> {
    pub fn new(r_o: T, mu_r: T, time: TimeScale<T>) -> Self {
        // The planner runs its inner solves at a deliberately diffusive
        // profile: the update laws descend sampled error surfaces, and a
        // sharply resolved integration exposes their chaotic fine structure,
        // which no small-step tuning can descend. The profile below is the
        // validated planning configuration; exports and re-timing use the
        // tight module defaults.
        let integrator = IntegratorOptions {
            rtol: T::lit(1e-2),
            atol: T::lit(1e-5),
            max_step: Some(time.horizon() / T::lit(400.0)),
            max_rhs_evals: 2_000_000,
            ..IntegratorOptions::default()
        };
        Self {
            r_o,
            mu_r,
            time,
            tolerances: Tolerances::default(),
            variant: Variant::default(),
            v_shift: false,
            cap_form: DistanceFormulation::default(),
            integrator,
            pole_softening: T::lit(1e-3),
            pi4_exclusion_band: T::lit(1e-3),
            r_q_init: T::lit(0.005),
            check_feasibility: true,
        }
    }
}

/// Phase-I iterations allowed per episode before the planner hands control
/// to the next pending phase.
const PHASE1_STALL_LIMIT: u32 = 25;

/// Iterations without a best-score improvement before the planner switches
/// from the phase updates to the pattern-search refinement.
const STAGNATION_LIMIT: u32 = 40;

/// Distinct tuning states kept as refinement anchors.
const MAX_ANCHORS: usize = 8;

struct BestIterate<T> {
    score: T,
    tuning: TuningState<T>,
    trajectory: Trajectory<T>,
    diag: IterationDiagnostics<T>,
}

/// Deterministic coarse grid walked around an anchor before the compass
/// refinement: the landscape has disjoint basins the compass cannot cross,
/// so the anchor's neighborhood is surveyed first.
struct GridSurvey<T> {
    center: TuningState<T>,
    index: usize,
    offsets: Vec<(T, T, T)>,
}

impl<T: Real> GridSurvey<T> {
    /// `scale = 1` is the coarse pass; later passes shrink the lattice
    /// around the refined best.
    fn new(center: TuningState<T>, scale: f64) -> Self {
        let mut offsets = Vec::new();
        for i in -3i32..=3 {
            for j in -2i32..=2 {
                for l in -3i32..=3 {
                    if i == 0 && j == 0 && l == 0 {
                        continue;
                    }
                    offsets.push((
                        T::lit(i as f64 * 0.06 * scale),
                        T::lit(j as f64 * 0.01 * scale),
                        T::lit(l as f64 * 0.25 * scale),
                    ));
                }
            }
        }
        Self { center, index: 0, offsets }
    }

    fn candidate(&self) -> Option<TuningState<T>> {
        self.offsets.get(self.index).map(|&(dz, dr, dp)| {
            let mut t = self.center;
            t.zeta_q = t.zeta_q + dz;
            t.r_q = t.r_q + dr;
            t.psi_u = (t.psi_u + dp).wrap_angle();
            t
        })
    }

    fn advance(&mut self) -> bool {
        self.index += 1;
        self.index < self.offsets.len()
    }
}

/// Compass pattern search over the three effective dials: the projection
/// shift (through `zeta_q`), the radius offset (through `r_q`) and the spin
/// bias. Descends the normalized worst-criterion score; steps halve after
/// every unsuccessful full poll.
struct PatternSearch<T> {
    center: TuningState<T>,
    center_score: T,
    steps: [T; 3],
    /// Next poll direction, `dial * 2 + (dir < 0)`.
    poll: usize,
}

impl<T: Real> PatternSearch<T> {
    fn new(center: TuningState<T>, center_score: T) -> Self {
        Self {
            center,
            center_score,
            steps: [T::lit(0.05), T::lit(4e-3), T::lit(0.3)],
            poll: 0,
        }
    }

    fn candidate(&self) -> TuningState<T> {
        let dial = self.poll / 2;
        let dir = if self.poll.is_multiple_of(2) { T::one() } else { -T::one() };
        let mut t = self.center;
        match dial {
            0 => t.zeta_q = t.zeta_q + dir * self.steps[0],
            1 => t.r_q = t.r_q + dir * self.steps[1],
            _ => t.psi_u = (t.psi_u + dir * self.steps[2]).wrap_angle(),
        }
        t
    }

    /// Advances the search with the candidate's score. Returns false once
    /// the steps have shrunk to nothing.
    fn step(&mut self, candidate: TuningState<T>, score: T) -> bool {
        if score < self.center_score {
            self.center = candidate;
            self.center_score = score;
            self.poll = 0;
            return true;
        }
        self.poll += 1;
        if self.poll >= 6 {
            self.poll = 0;
            for s in &mut self.steps {
                *s = *s * T::lit(0.5);
            }
        }
        self.steps[0] > T::lit(1e-7)
    }
}

/// Runs the nested three-phase loop until the full configuration converges
/// or the iteration budget runs out.
pub fn plan<T: Real>(goal: &GoalSpec<T>, params: &PlanParams<T>) -> Result<PlanResult<T>, PlanError> {
    let tol = params.tolerances;
    let g_f = goal.goal_angle();
    if (g_f - T::FRAC_PI_4()).abs() < params.pi4_exclusion_band {
        return Err(PlanError::ExcludedDirection {
            g_f: g_f.to_f64(),
            band: params.pi4_exclusion_band.to_f64(),
        });
    }
    if params.check_feasibility {
        // A displacement beyond the sphere circumference waives the
        // constraint outright, including for spin goals whose distance
        // chain has no real solution.
        let waived = goal.plane_displacement() >= T::TAU() * params.r_o;
        if !waived {
            let report = min_distance(goal, params.r_o, params.cap_form)?;
            if !report.feasible {
                return Err(PlanError::InfeasibleGoal {
                    d: report.d.to_f64(),
                    dist: goal.plane_displacement().to_f64(),
                });
            }
        }
    }

    let mut tuning = TuningState::initial(params.r_q_init);
    let mut prev_tuning = tuning;
    // The best errors are the line-search step sizes. They are scoped to
    // descent episodes: a plane or spin update moves the landscape the inner
    // loops are descending, so carrying a stale minimum across it freezes
    // the steps. The orientation minimum restarts with each run of
    // consecutive Phase-I iterates, the endpoint minimum with each
    // radius-tuning span, and the spin minimum runs over the whole plan.
    let mut e_n_best = T::infinity();
    let mut e_r_best = T::infinity();
    let mut e_s_best = T::infinity();
    let mut last_phase: Option<PhaseUpdate> = None;
    let mut log: Vec<IterationRecord<T>> = Vec::new();
    let mut best: Option<BestIterate<T>> = None;
    // Line-search state for the two inner loops: direction of the previous
    // step, adaptive damping halved on direction flips, and the Phase-I
    // episode length for the stall escape.
    let mut p1_sign: i8 = 0;
    let mut p1_damping = T::one();
    let mut p1_len: u32 = 0;
    let mut p2_sign: i8 = 0;
    let mut p2_damping = T::one();
    let mut last_improve_k: u32 = 0;
    let mut polish: Option<PatternSearch<T>> = None;
    let mut survey: Option<GridSurvey<T>> = None;
    // Survey passes left, coarse to fine: each pass re-centers the lattice
    // on the best iterate found so far.
    let mut survey_scales: Vec<f64> = vec![0.25, 1.0];
    // Distinct well-scoring tuning states, used as refinement anchors in
    // score order once the phase updates stagnate.
    let mut anchors: Vec<(T, TuningState<T>)> = Vec::new();
    let mut next_anchor: usize = 0;

    for k in 0..tol.max_iters {
        tuning.k = k;
        if polish.is_none()
            && survey.is_none()
            && k.saturating_sub(last_improve_k) > STAGNATION_LIMIT
        {
            // The phase updates have stopped improving the best iterate;
            // survey the best anchor's neighborhood (coarse, then fine on
            // the next stagnation), then refine around the recorded
            // anchors in score order.
            if let Some(scale) = survey_scales.pop() {
                if let Some(b) = &best {
                    let gs = GridSurvey::new(b.tuning, scale);
                    if let Some(c) = gs.candidate() {
                        tuning = c;
                        tuning.k = k;
                        survey = Some(gs);
                    }
                }
            } else if !anchors.is_empty() {
                let (score, center) = anchors[next_anchor % anchors.len()];
                next_anchor += 1;
                tuning = center;
                tuning.k = k;
                let ps = PatternSearch::new(tuning, score);
                tuning = ps.candidate();
                polish = Some(ps);
            }
        }
        let setup = SimSetup {
            goal: *goal,
            initial: Configuration::new(
                goal.plane_start.u,
                goal.plane_start.v,
                goal.orient_start.u,
                goal.orient_start.v,
                goal.spin_start,
            ),
            r_o: params.r_o,
            mu_r: params.mu_r,
            zeta_prime: tuning.zeta_prime(),
            r_a: tuning.r_a(),
            psi_u: tuning.psi_u,
            time: params.time,
            variant: params.variant,
            v_shift: params.v_shift,
            cap_form: params.cap_form,
            options: params.integrator,
            pole_softening: params.pole_softening,
        };

        let contract = |tuning: &TuningState<T>, prev: &TuningState<T>| {
            let half = T::lit(0.5);
            let mut c = *tuning;
            c.zeta_q = (tuning.zeta_q + prev.zeta_q) * half;
            c.zeta_u = (tuning.zeta_u + prev.zeta_u) * half;
            c.r_q = (tuning.r_q + prev.r_q) * half;
            c.r_u = (tuning.r_u + prev.r_u) * half;
            c.psi_u = (tuning.psi_u + prev.psi_u) * half;
            c
        };

        let traj = match simulate(&setup) {
            Ok(t) if t.samples.len() >= 2 => t,
            _ => {
                // No usable samples: contract toward the last workable
                // tuning state instead of replaying the same failure.
                log.push(IterationRecord {
                    k,
                    tuning,
                    diag: None,
                    phase: PhaseUpdate::DeadIterate,
                    solve_complete: false,
                    straightness: T::nan(),
                    slide_ratio: T::nan(),
                    within_eps_n: false,
                    within_eps_r: false,
                    within_eps_p: false,
                    within_eps_s: false,
                });
                last_phase = Some(PhaseUpdate::DeadIterate);
                tuning = contract(&tuning, &prev_tuning);
                continue;
            }
        };

        let runaway = {
            // A runaway solve completes but the rolling rate blew up past
            // the goal; its endpoint data is as useless as a truncated one.
            let final_err = traj.final_sample().state.plane_point().distance(&goal.plane_goal);
            final_err > T::lit(2.0) * goal.plane_displacement()
        };
        if !traj.outcome.is_complete() || runaway {
            // Failed iterate: a pole or the work budget truncated the solve,
            // so the endpoint diagnostics describe a partial trajectory.
            // Record it for inspection and contract instead of updating.
            let diag = extract_diagnostics(&traj, goal, params.r_o);
            let phase = if polish.is_some() { PhaseUpdate::Refine } else { PhaseUpdate::FailedSolve };
            log.push(IterationRecord {
                k,
                tuning,
                diag: Some(diag),
                phase,
                solve_complete: false,
                straightness: traj.straightness(goal),
                slide_ratio: traj.slide_ratio(),
                within_eps_n: false,
                within_eps_r: false,
                within_eps_p: false,
                within_eps_s: false,
            });
            last_phase = Some(phase);
            if let Some(gs) = &mut survey {
                if gs.advance() {
                    tuning = gs.candidate().expect("in range");
                } else {
                    survey = None;
                    if let Some(b) = &best {
                        let ps = PatternSearch::new(b.tuning, b.score);
                        tuning = ps.candidate();
                        polish = Some(ps);
                    }
                }
            } else if let Some(ps) = &mut polish {
                if !ps.step(tuning, T::infinity()) {
                    break;
                }
                tuning = ps.candidate();
            } else {
                tuning = contract(&tuning, &prev_tuning);
            }
            continue;
        }

        let mut diag = extract_diagnostics(&traj, goal, params.r_o);
        // Running minima act as step sizes within the current spin epoch;
        // the epoch boundary (a spin or plane update) resets them because
        // those updates move the landscape the inner loops descend.
        let epoch_boundary = matches!(
            last_phase,
            None | Some(PhaseUpdate::Phase3Spin)
                | Some(PhaseUpdate::Phase2Plane)
                | Some(PhaseUpdate::Phase2PlaneAndSpin)
                | Some(PhaseUpdate::Phase2PlaneSkipped)
        );
        if epoch_boundary {
            e_n_best = diag.e_n;
            e_r_best = diag.e_r;
        } else {
            e_n_best = e_n_best.min(diag.e_n);
            e_r_best = e_r_best.min(diag.e_r);
        }
        e_s_best = e_s_best.min(diag.spin_error);
        diag.e_n_best = e_n_best;
        diag.e_r_best = e_r_best;
        diag.e_s_best = e_s_best;

        let within_eps_n = diag.e_n <= tol.eps_n;
        let within_eps_r = diag.e_r <= tol.eps_r;
        let within_eps_p = diag.plane_error <= tol.eps_p;
        let within_eps_s = diag.spin_error <= tol.eps_s;

        let score = (diag.e_n / tol.eps_n)
            .max(diag.e_r / tol.eps_r)
            .max(diag.plane_error / tol.eps_p)
            .max(diag.spin_error / tol.eps_s);
        if best.as_ref().is_none_or(|b| score < b.score) {
            best = Some(BestIterate { score, tuning, trajectory: traj.clone(), diag });
            last_improve_k = k;
        }
        // Anchor bookkeeping: keep the best-scoring states that are
        // meaningfully distinct in dial space.
        let distinct = |a: &TuningState<T>, b: &TuningState<T>| {
            (a.zeta_prime() - b.zeta_prime()).abs() > T::lit(0.05)
                || (a.r_a() - b.r_a()).abs() > T::lit(0.01)
                || (a.psi_u - b.psi_u).wrap_angle().abs() > T::lit(0.3)
        };
        if score.is_finite() {
            match anchors.iter_mut().find(|(_, t)| !distinct(t, &tuning)) {
                Some(slot) => {
                    if score < slot.0 {
                        *slot = (score, tuning);
                    }
                }
                None => anchors.push((score, tuning)),
            }
            anchors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            anchors.truncate(MAX_ANCHORS);
        }

        let mut record = IterationRecord {
            k,
            tuning,
            diag: Some(diag),
            phase: PhaseUpdate::Converged,
            solve_complete: traj.outcome.is_complete(),
            straightness: traj.straightness(goal),
            slide_ratio: traj.slide_ratio(),
            within_eps_n,
            within_eps_r,
            within_eps_p,
            within_eps_s,
        };

        if within_eps_n && within_eps_r && within_eps_p && within_eps_s {
            log.push(record);
            return Ok(PlanResult {
                outcome: PlanOutcome::Converged,
                tuning,
                trajectory: traj,
                diag,
                log,
                iterations: k + 1,
            });
        }

        prev_tuning = tuning;
        if let Some(gs) = &mut survey {
            record.phase = PhaseUpdate::Refine;
            log.push(record);
            last_phase = Some(PhaseUpdate::Refine);
            if gs.advance() {
                tuning = gs.candidate().expect("in range");
            } else {
                // Survey complete: descend from the best point it found.
                survey = None;
                if let Some(b) = &best {
                    let ps = PatternSearch::new(b.tuning, b.score);
                    tuning = ps.candidate();
                    polish = Some(ps);
                }
            }
            continue;
        }
        if let Some(ps) = &mut polish {
            record.phase = PhaseUpdate::Refine;
            log.push(record);
            last_phase = Some(PhaseUpdate::Refine);
            if ps.step(tuning, score) {
                tuning = ps.candidate();
            } else {
                // Steps exhausted: resume the phase updates from the best
                // iterate found so far.
                polish = None;
                if let Some(b) = &best {
                    tuning = b.tuning;
                }
                last_improve_k = k;
                last_phase = None;
            }
            continue;
        }
        // A Phase-I episode that cannot reach eps_n (the basin floor at the
        // current radius sits above it) must not gate the other phases
        // forever; hand control to the next pending phase after a bounded
        // number of attempts.
        let p1_stalled = p1_len >= PHASE1_STALL_LIMIT;
        if !within_eps_n && !p1_stalled {
            record.phase = PhaseUpdate::Phase1Zeta;
            let (next, sign) = phase1_update(&diag, goal, &tuning, p1_damping).map_err(|e| {
                PlanError::Reachability(crate::error::ReachabilityError::NumericalDomain {
                    context: "goal-frame rotation",
                    value: match e {
                        crate::error::GeometryError::Domain { value, .. } => value,
                        crate::error::GeometryError::Pole { value, .. } => value,
                    },
                })
            })?;
            if sign != 0 && p1_sign != 0 && sign != p1_sign {
                p1_damping = (p1_damping * T::lit(0.5)).max(T::lit(1.0 / 64.0));
            }
            p1_sign = sign;
            p1_len += 1;
            tuning = next;
        } else if !within_eps_r {
            record.phase = PhaseUpdate::Phase2Radius;
            let (next, sign) =
                phase2_radius_update_damped(&diag, &tuning, params.r_o, tol.eps_r, p2_damping);
            if p2_sign != 0 && sign != p2_sign {
                p2_damping = (p2_damping * T::lit(0.5)).max(T::lit(1.0 / 64.0));
            }
            p2_sign = sign;
            tuning = next;
        } else {
            // Epoch boundary: this solve satisfies the orientation bounds,
            // so the plane and spin corrections both apply to it before the
            // inner loops restart.
            let mut plane_applied = false;
            let mut plane_skipped = false;
            if !within_eps_p {
                match phase2_plane_update(&diag, goal, &tuning, params.r_o) {
                    Some(next) => {
                        tuning = next;
                        plane_applied = true;
                    }
                    None => plane_skipped = true,
                }
            }
            let spin_applied = !within_eps_s;
            if spin_applied {
                tuning = phase3_spin_update(&diag, goal, &tuning);
            }
            record.phase = match (plane_applied, spin_applied) {
                (true, true) => PhaseUpdate::Phase2PlaneAndSpin,
                (true, false) => PhaseUpdate::Phase2Plane,
                (false, true) => PhaseUpdate::Phase3Spin,
                (false, false) => {
                    if plane_skipped {
                        PhaseUpdate::Phase2PlaneSkipped
                    } else {
                        // Only the stalled orientation bound is failing:
                        // perturb the radius to move its landscape.
                        tuning = phase2_radius_update(&diag, &tuning, params.r_o, tol.eps_r);
                        PhaseUpdate::Phase2Radius
                    }
                }
            };
        }
        if record.phase != PhaseUpdate::Phase1Zeta {
            p1_sign = 0;
            p1_damping = T::one();
            p1_len = 0;
        }
        if !matches!(record.phase, PhaseUpdate::Phase1Zeta | PhaseUpdate::Phase2Radius) {
            p2_sign = 0;
            p2_damping = T::one();
        }
        last_phase = Some(record.phase);
        log.push(record);
    }

    let best = best.expect("at least one iterate ran");
    Ok(PlanResult {
        outcome: PlanOutcome::MaxIterations,
        tuning: best.tuning,
        trajectory: best.trajectory,
        diag: best.diag,
        log,
        iterations: tol.max_iters,
    })
}
