//! The five-state contact kinematics with the controller in the loop, and
//! the adaptive integrator that produces trajectories.
//!
//! The state is `(u_s, v_s, u_o, v_o, psi)`. The sphere angles are integrated
//! unwrapped for continuity; chart evaluations wrap on demand. Two extra
//! quadrature states accumulate the plane and sphere arc lengths so the
//! no-sliding diagnostic costs nothing extra.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::controller::{control_inputs, ControlContext, ControlInputs};
use crate::error::{ControlError, SimulationError};
use crate::geometry::{sphere_embed, SpherePoint};
use crate::reachability::GoalSpec;
use crate::scalar::Real;
use crate::timescale::TimeScale;

/// `|cos(v_o)|` below which the chart derivative is a pole.
const V_POLE_TOL: f64 = 1e-9;

/// Full contact configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Configuration<T> {
    /// Plane position, m.
    pub u_s: T,
    pub v_s: T,
    /// Sphere angles, rad, possibly unwrapped.
    pub u_o: T,
    pub v_o: T,
    /// Spin angle, rad, cumulative (never wrapped).
    pub psi: T,
}

impl<T: Real> Configuration<T> {
    pub fn new(u_s: T, v_s: T, u_o: T, v_o: T, psi: T) -> Self {
        Self { u_s, v_s, u_o, v_o, psi }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero(), T::zero())
    }

    /// Wrapped sphere chart point.
    pub fn sphere_point(&self) -> SpherePoint<T> {
        SpherePoint::new(self.u_o, self.v_o)
    }

    pub fn plane_point(&self) -> crate::geometry::PlanePoint<T> {
        crate::geometry::PlanePoint::new(self.u_s, self.v_s)
    }
}

/// Time derivative of [`Configuration`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative<T> {
    pub du_s: T,
    pub dv_s: T,
    pub du_o: T,
    pub dv_o: T,
    pub dpsi: T,
}

/// Which reading of the plane-velocity rows is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// The drift and `gamma_s` entries of both plane rows carry
    /// `sin(theta + phi)`. The steering angle is solved so that the velocity
    /// ratio equals `tan(G_f)` exactly under this form, and the plane and
    /// sphere arc-length rates agree identically.
    #[default]
    AsWritten,
    /// Same rows with `cos(theta + phi)` in the `u_s` drift and `gamma_s`
    /// entries. Kept for the no-sliding arbitration test.
    TrigCorrected,
}

/// One accepted integration sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample<T> {
    pub t: T,
    pub state: Configuration<T>,
    pub inputs: ControlInputs<T>,
    /// Cumulative plane arc length, m.
    pub s_plane: T,
    /// Cumulative sphere arc length, m.
    pub s_sphere: T,
    /// Whether the smooth time scale fell back to the constant scale here.
    pub scale_fallback: bool,
}

/// How a solve ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SolveOutcome {
    Complete,
    /// The step size underflowed; the trajectory is truncated at `t`.
    StepFailure { t: f64 },
    /// The evaluation budget ran out; the trajectory is truncated at `t`.
    BudgetExhausted { t: f64 },
    /// A stage evaluation failed irrecoverably.
    Aborted { t: f64, reason: String },
}

impl SolveOutcome {
    pub fn is_complete(&self) -> bool {
        matches!(self, SolveOutcome::Complete)
    }
}

/// Integration counters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SolveStats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evals: usize,
}

/// Time-ordered samples from one solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    pub samples: Vec<Sample<T>>,
    pub outcome: SolveOutcome,
    pub stats: SolveStats,
}

/// Integrator options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Upper bound on the step, s.
    pub max_step: Option<T>,
    /// Minimum output-sample density over the horizon. Steps larger than
    /// the sample spacing are filled with cubic Hermite interpolation, so
    /// this does not constrain the step size.
    pub min_samples: usize,
    /// Per-solve budget of right-hand-side evaluations.
    pub max_rhs_evals: usize,
}

impl<T: Real> Default for IntegratorOptions<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-8),
            atol: T::lit(1e-8),
            max_step: None,
            min_samples: 2000,
            max_rhs_evals: 4_000_000,
        }
    }
}

/// Everything needed to run one forward solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSetup<T> {
    pub goal: GoalSpec<T>,
    pub initial: Configuration<T>,
    pub r_o: T,
    pub mu_r: T,
    /// `zeta_q + zeta_u`.
    pub zeta_prime: T,
    /// `r_q + r_u`.
    pub r_a: T,
    /// Spin tuning angle.
    pub psi_u: T,
    pub time: TimeScale<T>,
    pub variant: Variant,
    pub v_shift: bool,
    pub cap_form: crate::reachability::DistanceFormulation,
    pub options: IntegratorOptions<T>,
    /// Lower bound substituted for `|cos(v_o)|` in the chart-singular
    /// derivative terms. The sphere itself is regular where the chart
    /// degenerates; this lets trajectories cross the coordinate pole the
    /// way the curve actually does, instead of stalling the stepper in a
    /// band that carries negligible real rotation. Set it at or below the
    /// pole tolerance to recover the hard-failure behavior.
    pub pole_softening: T,
}

impl<T: Real> SimSetup<T> {
    fn control_context(&self) -> Result<ControlContext<T>, crate::error::ReachabilityError> {
        let tracker =
            crate::controller::SpinTracker::for_goal(&self.goal, self.psi_u, self.r_o, self.cap_form)?;
        Ok(ControlContext::new(
            self.goal,
            self.r_o,
            self.mu_r,
            self.zeta_prime,
            self.r_a,
            tracker,
            self.time,
            self.v_shift,
        ))
    }
}

/// Evaluates the state derivative at `(t, x)` with the controller in the
/// loop. Fails on the `cos(v_o) = 0` pole and on steering singularities.
pub fn rhs<T: Real>(
    t: T,
    x: &Configuration<T>,
    ctx: &ControlContext<T>,
    variant: Variant,
) -> Result<(StateDerivative<T>, ControlInputs<T>), ControlError> {
    rhs_softened(t, x, ctx, variant, T::zero())
}

/// [`rhs`] with the chart-pole softening applied; `softening` bounds
/// `|cos(v_o)|` away from zero in the singular terms.
pub fn rhs_softened<T: Real>(
    t: T,
    x: &Configuration<T>,
    ctx: &ControlContext<T>,
    variant: Variant,
    softening: T,
) -> Result<(StateDerivative<T>, ControlInputs<T>), ControlError> {
    let cv_raw = x.v_o.cos();
    if cv_raw.abs() < T::lit(V_POLE_TOL) && softening < T::lit(V_POLE_TOL) {
        return Err(ControlError::Geometry(crate::error::GeometryError::Pole {
            context: "rhs cos(v_o)",
            value: x.v_o.to_f64(),
            tol: V_POLE_TOL,
        }));
    }
    let cv = if cv_raw.abs() < softening {
        num_traits::Float::copysign(softening, cv_raw + T::lit(f64::MIN_POSITIVE))
    } else {
        cv_raw
    };
    let (inputs, _) = control_inputs(t, x, ctx)?;
    let r_o = ctx.r_o;
    let th = inputs.theta + inputs.phi;
    let (s_th, c_th) = th.sin_cos();
    let (s_psi, c_psi) = x.psi.sin_cos();
    let s_pt = (x.psi + th).sin();
    let c_pt = (x.psi + th).cos();
    let tv = x.v_o.sin() / cv;
    let (alpha, beta, gamma, delta) =
        (inputs.alpha_s, inputs.beta_s, inputs.gamma_s, inputs.delta);

    let du_s = match variant {
        Variant::AsWritten => s_th * (T::one() - r_o * gamma) + r_o * beta * s_th,
        Variant::TrigCorrected => c_th * (T::one() - r_o * gamma) + r_o * beta * s_th,
    };
    let dv_s = s_th * (T::one() - r_o * gamma) - r_o * beta * c_th;
    let du_o = (s_th * (s_psi - c_psi) * (r_o.recip() - gamma) - beta * s_pt) / cv;
    let dv_o = s_th * (c_psi + s_psi) * (r_o.recip() - gamma) - beta * c_pt;
    let dpsi =
        tv * (s_th * (s_psi - c_psi) * (r_o.recip() - gamma) + inputs.phi.cos() / r_o - beta * s_pt)
            - alpha;

    Ok((
        StateDerivative {
            du_s: delta * du_s,
            dv_s: delta * dv_s,
            du_o: delta * du_o,
            dv_o: delta * dv_o,
            dpsi: delta * dpsi,
        },
        inputs,
    ))
}

const STAGES: usize = 7;
const NSTATE: usize = 7;

/// Dormand-Prince 5(4) coefficients.
const C: [f64; STAGES] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Error coefficients `b5 - b4`.
const E: [f64; STAGES] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn eval_rhs<T: Real>(
    t: T,
    y: &[T; NSTATE],
    ctx: &ControlContext<T>,
    variant: Variant,
    softening: T,
) -> Result<[T; NSTATE], ControlError> {
    let cfg = Configuration::new(y[0], y[1], y[2], y[3], y[4]);
    let (d, _) = rhs_softened(t, &cfg, ctx, variant, softening)?;
    let ds_plane = d.du_s.hypot(d.dv_s);
    let cv = y[3].cos();
    let r_o = ctx.r_o;
    let ds_sphere = r_o * (cv * cv * d.du_o * d.du_o + d.dv_o * d.dv_o).sqrt();
    Ok([d.du_s, d.dv_s, d.du_o, d.dv_o, d.dpsi, ds_plane, ds_sphere])
}

/// Integrates the kinematics over the setup's horizon with an embedded 5(4)
/// pair and records every accepted step.
///
/// Failures near poles truncate the trajectory and are reported in
/// [`Trajectory::outcome`] rather than discarding the samples; the planner
/// treats such solves as failed iterates.
pub fn simulate<T: Real>(setup: &SimSetup<T>) -> Result<Trajectory<T>, SimulationError> {
    let ctx = setup.control_context().map_err(SimulationError::Setup)?;
    let t_f = setup.time.horizon();
    let opts = &setup.options;

    let h_max = opts.max_step.unwrap_or(t_f / T::lit(500.0));
    let h_min = t_f * T::lit(1e-14);
    let out_dt = t_f / T::from_usize(opts.min_samples.max(1)).unwrap();

    let mut y: [T; NSTATE] = [
        setup.initial.u_s,
        setup.initial.v_s,
        setup.initial.u_o,
        setup.initial.v_o,
        setup.initial.psi,
        T::zero(),
        T::zero(),
    ];
    let mut t = T::zero();
    let mut stats = SolveStats::default();
    let mut samples = Vec::with_capacity(opts.min_samples + 64);

    let record = |samples: &mut Vec<Sample<T>>, t: T, y: &[T; NSTATE]| -> Result<(), ControlError> {
        let state = Configuration::new(y[0], y[1], y[2], y[3], y[4]);
        let (inputs, _) = control_inputs(t, &state, &ctx)?;
        let u_prime = (ctx.goal.orient_goal.u - state.u_o).wrap_angle();
        let dist = ctx.goal.plane_goal.distance(&state.plane_point());
        let (_, fallback) = ctx.time.rolling_rate_flagged(
            t,
            dist,
            ctx.goal.orient_goal.v,
            u_prime,
            inputs.alpha_s,
        );
        samples.push(Sample { t, state, inputs, s_plane: y[5], s_sphere: y[6], scale_fallback: fallback });
        Ok(())
    };

    let mut k: [[T; NSTATE]; STAGES] = [[T::zero(); NSTATE]; STAGES];
    stats.rhs_evals += 1;
    k[0] = eval_rhs(t, &y, &ctx, setup.variant, setup.pole_softening)?;
    record(&mut samples, t, &y).map_err(SimulationError::from)?;

    let mut h = h_max.min(t_f * T::lit(1e-4)).max(h_min);
    let mut next_out = out_dt;
    let order_inv = T::lit(0.2);

    'outer: while t < t_f {
        if stats.rhs_evals >= opts.max_rhs_evals {
            return Ok(Trajectory {
                samples,
                outcome: SolveOutcome::BudgetExhausted { t: t.to_f64() },
                stats,
            });
        }
        if h < h_min {
            return Ok(Trajectory {
                samples,
                outcome: SolveOutcome::StepFailure { t: t.to_f64() },
                stats,
            });
        }
        let h_step = h.min(t_f - t);

        // Stages 2..7; stage 1 is the FSAL carry.
        let mut stage_failed = false;
        for s in 1..STAGES {
            let mut ys = y;
            for i in 0..NSTATE {
                let mut acc = T::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc = acc + T::lit(A[s][j]) * kj[i];
                }
                ys[i] = y[i] + h_step * acc;
            }
            stats.rhs_evals += 1;
            match eval_rhs(t + T::lit(C[s]) * h_step, &ys, &ctx, setup.variant, setup.pole_softening) {
                Ok(v) => k[s] = v,
                Err(err) => {
                    // A pole inside the step: shrink and retry, or give up at
                    // the floor.
                    stats.steps_rejected += 1;
                    h = h_step * T::lit(0.25);
                    if h < h_min {
                        return Ok(Trajectory {
                            samples,
                            outcome: SolveOutcome::Aborted { t: t.to_f64(), reason: err.to_string() },
                            stats,
                        });
                    }
                    stage_failed = true;
                    break;
                }
            }
        }
        if stage_failed {
            continue 'outer;
        }

        // 5th-order solution is stage row 7 of A; error from the embedded pair.
        let y_new = {
            let mut yn = y;
            for i in 0..NSTATE {
                // k[6] is evaluated at y_new already (FSAL property of the
                // tableau: row 7 of A equals b5).
                let mut acc = T::zero();
                for (j, kj) in k.iter().enumerate().take(6) {
                    acc = acc + T::lit(A[6][j]) * kj[i];
                }
                yn[i] = y[i] + h_step * acc;
            }
            yn
        };

        let mut err_sq = T::zero();
        for i in 0..NSTATE {
            let mut e = T::zero();
            for (j, kj) in k.iter().enumerate() {
                e = e + T::lit(E[j]) * kj[i];
            }
            let e = e * h_step;
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let r = e / scale;
            err_sq = err_sq + r * r;
        }
        let err = (err_sq / T::lit(NSTATE as f64)).sqrt();

        if err <= T::one() {
            // Dense output: fill the sample grid across the step with cubic
            // Hermite interpolation (the FSAL stages supply the end-point
            // derivatives for free).
            let mut fill_err = None;
            {
                let y0 = &y;
                let f0 = &k[0];
                let f1 = &k[6];
                while next_out < t + h_step {
                    let theta = (next_out - t) / h_step;
                    let one = T::one();
                    let th2 = theta * theta;
                    let th3 = th2 * theta;
                    let h00 = one - T::lit(3.0) * th2 + T::lit(2.0) * th3;
                    let h10 = theta * (one - theta) * (one - theta);
                    let h01 = T::lit(3.0) * th2 - T::lit(2.0) * th3;
                    let h11 = th2 * (theta - one);
                    let mut yi = [T::zero(); NSTATE];
                    for i in 0..NSTATE {
                        yi[i] = h00 * y0[i]
                            + h01 * y_new[i]
                            + h_step * (h10 * f0[i] + h11 * f1[i]);
                    }
                    if let Err(e) = record(&mut samples, next_out, &yi) {
                        fill_err = Some(e);
                        break;
                    }
                    next_out = next_out + out_dt;
                }
            }
            t = t + h_step;
            y = y_new;
            stats.steps_accepted += 1;
            k[0] = k[6]; // FSAL
            if let Some(e) = fill_err {
                return Ok(Trajectory {
                    samples,
                    outcome: SolveOutcome::Aborted { t: t.to_f64(), reason: e.to_string() },
                    stats,
                });
            }
            if let Err(e) = record(&mut samples, t, &y) {
                return Ok(Trajectory {
                    samples,
                    outcome: SolveOutcome::Aborted { t: t.to_f64(), reason: e.to_string() },
                    stats,
                });
            }
            let factor = if err == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.9) * err.powf(-order_inv)).min(T::lit(5.0)).max(T::lit(0.2))
            };
            h = (h_step * factor).min(h_max);
        } else {
            stats.steps_rejected += 1;
            let factor = (T::lit(0.9) * err.powf(-order_inv)).min(T::one()).max(T::lit(0.1));
            h = h_step * factor;
        }
    }

    Ok(Trajectory { samples, outcome: SolveOutcome::Complete, stats })
}

impl<T: Real> Trajectory<T> {
    pub fn final_sample(&self) -> &Sample<T> {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn total_plane_length(&self) -> T {
        self.final_sample().s_plane
    }

    /// `|s_plane - s_sphere| / max(s_plane, 1e-9)` at the end of the solve.
    pub fn slide_ratio(&self) -> T {
        let f = self.final_sample();
        (f.s_plane - f.s_sphere).abs() / f.s_plane.max(T::lit(1e-9))
    }

    /// Maximum angular deviation of the plane path from the goal ray.
    ///
    /// Samples closer than 1e-6 m to the start are skipped; the angle
    /// difference is wrapped.
    pub fn straightness(&self, goal: &GoalSpec<T>) -> T {
        let g_f = goal.goal_angle();
        let origin = &self.samples[0].state;
        let mut worst = T::zero();
        for s in &self.samples[1..] {
            let du = s.state.u_s - origin.u_s;
            let dv = s.state.v_s - origin.v_s;
            if du.hypot(dv) <= T::lit(1e-6) {
                continue;
            }
            let dev = (dv.atan2(du) - g_f).wrap_angle().abs();
            worst = worst.max(dev);
        }
        worst
    }

    /// Linear interpolation of the state at a given plane arc length.
    pub fn sample_at_arc_length(&self, s: T) -> Sample<T> {
        let samples = &self.samples;
        if s <= samples[0].s_plane {
            return samples[0];
        }
        let last = self.final_sample();
        if s >= last.s_plane {
            return *last;
        }
        let mut lo = 0usize;
        let mut hi = samples.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if samples[mid].s_plane <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (a, b) = (&samples[lo], &samples[hi]);
        let span = b.s_plane - a.s_plane;
        let w = if span > T::zero() { (s - a.s_plane) / span } else { T::zero() };
        let lerp = |x: T, y: T| x + (y - x) * w;
        Sample {
            t: lerp(a.t, b.t),
            state: Configuration::new(
                lerp(a.state.u_s, b.state.u_s),
                lerp(a.state.v_s, b.state.v_s),
                lerp(a.state.u_o, b.state.u_o),
                lerp(a.state.v_o, b.state.v_o),
                lerp(a.state.psi, b.state.psi),
            ),
            inputs: a.inputs,
            s_plane: s,
            s_sphere: lerp(a.s_sphere, b.s_sphere),
            scale_fallback: a.scale_fallback,
        }
    }

    /// Writes the trajectory as CSV with a fixed column set.
    pub fn write_csv<W: Write>(&self, r_o: T, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "t,s_plane,s_sphere,u_s,v_s,u_o,v_o,psi,x_o,y_o,z_o,delta,alpha_s,beta_s,gamma_s,theta,phi,psi_q"
        )?;
        for s in &self.samples {
            let e = sphere_embed(s.state.sphere_point(), r_o);
            let row = [
                s.t,
                s.s_plane,
                s.s_sphere,
                s.state.u_s,
                s.state.v_s,
                s.state.u_o,
                s.state.v_o,
                s.state.psi,
                e[0],
                e[1],
                e[2],
                s.inputs.delta,
                s.inputs.alpha_s,
                s.inputs.beta_s,
                s.inputs.gamma_s,
                s.inputs.theta,
                s.inputs.phi,
                s.inputs.psi_q,
            ];
            let mut first = true;
            for v in row {
                if !first {
                    write!(w, ",")?;
                }
                write!(w, "{}", format_sig17(v.to_f64()))?;
                first = false;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Formats a float with 17 significant digits, enough to round-trip `f64`.
pub fn format_sig17(x: f64) -> String {
    format!("{x:.16e}")
}
