//! The virtual-surface geometric controller.
//!
//! The controller shapes a fictitious surface sandwiched at the contact
//! point. Its curvature triple, evaluated against the goal orientation and
//! the tuning constants, yields the arc-length control inputs
//! `(alpha_s, beta_s, gamma_s)`; the steering pair `(theta, phi)` keeps the
//! plane path on the goal ray, and the rolling rate `delta` maps arc length
//! to time.

use serde::{Deserialize, Serialize};

use crate::error::ControlError;
use crate::geometry::helicoid_torsion;
use crate::kinematics::Configuration;
use crate::reachability::{cap_base, DistanceFormulation, GoalSpec};
use crate::scalar::Real;
use crate::timescale::TimeScale;

/// Distance from `pi/2` below which the incircle evaluation is clamped.
const INCIRCLE_CLAMP: f64 = 1e-6;

/// `|cos|` threshold treated as a tangent pole.
const TAN_POLE_TOL: f64 = 1e-9;

/// `|R_t|` below which the virtual surface is degenerate.
const DEGENERATE_RADIUS: f64 = 1e-12;

/// Geometry of the desired virtual surface at one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualSurfaceState<T> {
    /// Desired normal-curvature radius, m.
    pub r_n: T,
    /// Desired geodesic radius, m (equal to `r_n` under the radius rule).
    pub r_g: T,
    /// Total radius `r_n + r_g`, m.
    pub r_t: T,
    /// Built-in incircle radius, m.
    pub r_i: T,
    /// Tuned radius offset, m.
    pub r_a: T,
    /// Stereographic projection angle, rad.
    pub zeta: T,
    /// Constant angle shift applied by the planner, rad.
    pub zeta_prime: T,
    /// Remaining u-curve angle `u_goal - u_o`, rad.
    pub u_prime: T,
    /// Remaining v-curve angle `v_goal - v_o`, rad.
    pub v_prime: T,
}

/// Arc-length control inputs plus steering and rolling rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInputs<T> {
    pub alpha_s: T,
    /// Always non-negative (absolute-value form).
    pub beta_s: T,
    pub gamma_s: T,
    /// Goal direction on the plane, rad.
    pub g_f: T,
    /// Rolling rate, m/s; non-negative.
    pub delta: T,
    pub theta: T,
    pub phi: T,
    /// Spin angle deviation, rad.
    pub psi_q: T,
}

/// Desired under-cap area bookkeeping for the spin deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinTracker<T> {
    /// Desired under-cap area including the spin tuning correction, m^2.
    pub s_t: T,
    /// Spin tuning angle, rad.
    pub psi_u: T,
}

impl<T: Real> SpinTracker<T> {
    /// Builds the tracker for a goal: `S_t = S'_c + R_o^2 (psi_f + psi_u - psi')`.
    pub fn for_goal(
        goal: &GoalSpec<T>,
        psi_u: T,
        r_o: T,
        form: DistanceFormulation,
    ) -> Result<Self, crate::error::ReachabilityError> {
        let cap = cap_base(goal.orient_goal, r_o, form)?;
        let s_t = cap.s_c_prime + r_o * r_o * (goal.spin_goal + psi_u - cap.psi_prime);
        Ok(Self { s_t, psi_u })
    }

    /// Cap area swept by the spin up to the current sample.
    pub fn swept_area(r_o: T, psi_t: T, psi_0: T) -> T {
        r_o * r_o * (psi_t - psi_0)
    }
}

/// Spin angle deviation `psi_q = (S_t - R_o^2 (psi_t - psi_0)) / R_o^2`.
pub fn spin_deviation<T: Real>(psi_t: T, psi_0: T, tracker: &SpinTracker<T>, r_o: T) -> T {
    (tracker.s_t - SpinTracker::swept_area(r_o, psi_t, psi_0)) / (r_o * r_o)
}

/// Incircle radius of the isosceles triangle spanned by the remaining
/// u-curve angle.
///
/// The construction is defined for angles in `[0, pi]`; an unwrapped feed
/// that has run past `pi` saturates there, where the radius settles at the
/// constant `R_o / mu_r`. Past `pi/2` the bounded offset `R_o / mu_r` is
/// added. The trigonometry is evaluated with the cosine clamped away from
/// zero, which pins the value one clamp-width inside the `pi/2` pole
/// instead of erroring there.
pub fn incircle_radius<T: Real>(u_prime: T, r_o: T, mu_r: T) -> T {
    let up = u_prime.abs().min(T::PI());
    let past_pole = up >= T::FRAC_PI_2();
    let mut c = up.cos();
    let clamp = T::lit(INCIRCLE_CLAMP);
    if c.abs() < clamp {
        c = num_traits::Float::copysign(clamp, c + T::lit(f64::MIN_POSITIVE));
    }
    let r_i = r_o / c;
    let l_i = T::lit(2.0) * r_o * up.sin() / c;
    let s_i = (T::lit(2.0) * r_i + l_i) / T::lit(2.0);
    let radicand = (s_i - r_i).powi(2) * (s_i - l_i) / s_i;
    let base = radicand.max(T::zero()).sqrt();
    if past_pole {
        r_o / mu_r + base
    } else {
        base
    }
}

/// Stereographic projection angle `zeta = atan(R_o tan(v_goal + zeta') / R_t)`.
pub fn projection_angle<T: Real>(
    v_of: T,
    zeta_prime: T,
    r_o: T,
    r_t: T,
) -> Result<T, ControlError> {
    let arg = v_of + zeta_prime;
    if arg.cos().abs() < T::lit(TAN_POLE_TOL) {
        return Err(ControlError::Geometry(crate::error::GeometryError::Pole {
            context: "projection_angle tan",
            value: arg.to_f64(),
            tol: TAN_POLE_TOL,
        }));
    }
    if r_t.abs() < T::lit(DEGENERATE_RADIUS) {
        return Err(ControlError::DegenerateRadius { r_t: r_t.to_f64() });
    }
    Ok((r_o * arg.tan() / r_t).atan())
}

impl<T: Real> VirtualSurfaceState<T> {
    /// Builds the virtual surface from the incircle radius and the tuned
    /// offset, applying the radius rule `R_n = R_g = (R_i + R_a) / 2`.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        u_prime: T,
        v_prime: T,
        zeta_prime: T,
        r_a: T,
        v_of: T,
        r_o: T,
        mu_r: T,
    ) -> Result<Self, ControlError> {
        let r_i = incircle_radius(u_prime, r_o, mu_r);
        let r_n = (r_i + r_a) / T::lit(2.0);
        let r_g = r_n;
        let r_t = r_n + r_g;
        let zeta = projection_angle(v_of, zeta_prime, r_o, r_t)?;
        Ok(Self { r_n, r_g, r_t, r_i, r_a, zeta, zeta_prime, u_prime, v_prime })
    }
}

/// Per-plan constants the controller needs at every evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlContext<T> {
    pub goal: GoalSpec<T>,
    pub r_o: T,
    pub mu_r: T,
    /// Constant shift of the projection angle, `zeta_q + zeta_u`.
    pub zeta_prime: T,
    /// Tuned radius offset, `r_q + r_u`.
    pub r_a: T,
    pub tracker: SpinTracker<T>,
    pub time: TimeScale<T>,
    /// Shifts the v-curve argument of `alpha_s` by `+pi/2` to move the
    /// region of attraction for slow-converging spin goals.
    pub v_shift: bool,
    /// Cached goal direction.
    pub g_f: T,
}

impl<T: Real> ControlContext<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        goal: GoalSpec<T>,
        r_o: T,
        mu_r: T,
        zeta_prime: T,
        r_a: T,
        tracker: SpinTracker<T>,
        time: TimeScale<T>,
        v_shift: bool,
    ) -> Self {
        let g_f = goal.goal_angle();
        Self { goal, r_o, mu_r, zeta_prime, r_a, tracker, time, v_shift, g_f }
    }
}

/// Evaluates the full control input vector at one state.
pub fn control_inputs<T: Real>(
    t: T,
    state: &Configuration<T>,
    ctx: &ControlContext<T>,
) -> Result<(ControlInputs<T>, VirtualSurfaceState<T>), ControlError> {
    let r_o = ctx.r_o;
    // The angle feeds stay unwrapped: the state is a continuous coordinate,
    // and wrapping the u-feed would stall the rolling rate every time a
    // loop of the sphere curve revisits the goal angle modulo a turn.
    let u_prime = ctx.goal.orient_goal.u - state.u_o;
    let v_prime = ctx.goal.orient_goal.v - state.v_o;
    let vs = VirtualSurfaceState::build(
        u_prime,
        v_prime,
        ctx.zeta_prime,
        ctx.r_a,
        ctx.goal.orient_goal.v,
        r_o,
        ctx.mu_r,
    )?;

    let v_of = ctx.goal.orient_goal.v;
    let alpha_arg = if ctx.v_shift { v_of + T::FRAC_PI_2() } else { v_of };
    if alpha_arg.cos().abs() < T::lit(TAN_POLE_TOL) {
        return Err(ControlError::Geometry(crate::error::GeometryError::Pole {
            context: "control_inputs tan(v_goal)",
            value: alpha_arg.to_f64(),
            tol: TAN_POLE_TOL,
        }));
    }
    let alpha_s = alpha_arg.tan() / r_o - vs.zeta.tan() / vs.r_t;
    let beta_s = helicoid_torsion(v_prime, r_o, vs.r_t);
    let gamma_s = (vs.r_n - r_o) / (vs.r_n * r_o);

    let psi_q = spin_deviation(state.psi, ctx.goal.spin_start, &ctx.tracker, r_o);

    let tan_g = ctx.g_f.tan();
    let w = ((T::one() - tan_g) * (r_o.recip() - gamma_s) - beta_s * tan_g) / beta_s;
    if w.is_nan() {
        return Err(ControlError::SteeringSingularity);
    }
    // cot^-1 on the (0, pi) branch.
    let theta = T::FRAC_PI_2() - w.atan() - psi_q;
    let phi_case = ctx.g_f > -T::lit(3.0) * T::FRAC_PI_4() && ctx.g_f < T::FRAC_PI_4();
    let phi = psi_q + if phi_case { T::PI() } else { T::zero() };

    // Remaining distance measured as the signed projection onto the goal
    // ray, floored at zero. On the approach this equals the Euclidean
    // distance; past the goal it pins the rolling rate at rest. The bare
    // distance makes arrival one-sided unstable: an integration step that
    // lands a hair beyond the goal would see the distance grow again and
    // the rate run away.
    let (sg, cg) = ctx.g_f.sin_cos();
    let dist = ((ctx.goal.plane_goal.u - state.u_s) * cg + (ctx.goal.plane_goal.v - state.v_s) * sg)
        .max(T::zero());
    let delta = ctx.time.rolling_rate(t, dist, v_of, u_prime, alpha_s);

    Ok((
        ControlInputs { alpha_s, beta_s, gamma_s, g_f: ctx.g_f, delta, theta, phi, psi_q },
        vs,
    ))
}

/// Rolling rate in constant-scale mode: `|P_f - P| * |v_goal * u' / T|`.
pub fn rolling_rate<T: Real>(dist: T, v_of: T, u_prime: T, t_scale: T) -> T {
    dist * (v_of * u_prime / t_scale).abs()
}
