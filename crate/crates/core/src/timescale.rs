//! Time parameterization: the scaling constant `T`, the smooth rest-to-rest
//! velocity profile, and re-timing a converged plan without changing its
//! paths.
//!
//! The rolling rate factors the time variable out of the kinematics, so any
//! positive rescaling of it re-times the motion along the same contact
//! curves.

use serde::{Deserialize, Serialize};

use crate::error::{ControlError, RetimeError};
use crate::scalar::Real;

/// `|alpha_s|` below which the smooth scale is singular.
const ALPHA_SINGULAR: f64 = 1e-12;

/// Rolling-rate time parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum TimeScale<T> {
    /// Fixed scaling constant.
    Constant { t_const: T, t_f: T },
    /// Seventh-order polynomial velocity profile with zero speed and zero
    /// acceleration at both ends. `t_const` is the fallback scale for
    /// evaluations where `alpha_s` vanishes.
    Smooth { amplitude: T, t_s: T, t_const: T, t_f: T },
}

impl<T: Real> TimeScale<T> {
    pub fn constant(t_const: T, t_f: T) -> Self {
        Self::Constant { t_const, t_f }
    }

    pub fn smooth(amplitude: T, t_s: T, t_const: T, t_f: T) -> Self {
        Self::Smooth { amplitude, t_s, t_const, t_f }
    }

    /// Simulation horizon, s.
    pub fn horizon(&self) -> T {
        match *self {
            Self::Constant { t_f, .. } | Self::Smooth { t_f, .. } => t_f,
        }
    }

    pub fn with_horizon(self, t_f: T) -> Self {
        match self {
            Self::Constant { t_const, .. } => Self::Constant { t_const, t_f },
            Self::Smooth { amplitude, t_s, t_const, .. } => {
                Self::Smooth { amplitude, t_s, t_const, t_f }
            }
        }
    }

    /// The scaling constant at time `t`.
    ///
    /// In smooth mode this is `c * omega_s(t) / alpha_s` with
    /// `c = |v_goal * u'| * |P_f - P(t)|`; a vanishing `alpha_s` is an error
    /// there (the evaluation has no finite scale).
    pub fn effective_t(&self, t: T, dist: T, v_of: T, u_prime: T, alpha_s: T) -> Result<T, ControlError> {
        match *self {
            Self::Constant { t_const, .. } => Ok(t_const),
            Self::Smooth { amplitude, t_s, .. } => {
                if alpha_s.abs() < T::lit(ALPHA_SINGULAR) {
                    return Err(ControlError::SingularScale { alpha_s: alpha_s.to_f64() });
                }
                let c = (v_of * u_prime).abs() * dist;
                Ok(c * smooth_velocity(t, amplitude, t_s) / alpha_s)
            }
        }
    }

    /// Rolling rate at time `t`, with the smooth-mode singularity folded back
    /// to the constant scale. Returns the rate and whether the fallback
    /// fired.
    pub fn rolling_rate(&self, t: T, dist: T, v_of: T, u_prime: T, alpha_s: T) -> T {
        self.rolling_rate_flagged(t, dist, v_of, u_prime, alpha_s).0
    }

    pub fn rolling_rate_flagged(
        &self,
        t: T,
        dist: T,
        v_of: T,
        u_prime: T,
        alpha_s: T,
    ) -> (T, bool) {
        let c = (v_of * u_prime).abs() * dist;
        match *self {
            Self::Constant { t_const, .. } => (dist * (v_of * u_prime / t_const).abs(), false),
            Self::Smooth { amplitude, t_s, t_const, .. } => {
                if alpha_s.abs() < T::lit(ALPHA_SINGULAR) {
                    (dist * (v_of * u_prime / t_const).abs(), true)
                } else {
                    // delta = c^2 omega_s / alpha_s; the profile drives the
                    // rate to zero at both ends for a rest-to-rest motion.
                    ((c * c * smooth_velocity(t, amplitude, t_s) / alpha_s).abs(), false)
                }
            }
        }
    }
}

/// Smooth rest-to-rest angular velocity profile on `[0, T_s]`:
/// `a (-140 t^7/T_s^7 + 420 t^6/T_s^6 - 420 t^5/T_s^5 + 140 t^4/T_s^4)`,
/// equivalently `140 a tau^4 (1 - tau)^3`.
pub fn smooth_velocity<T: Real>(t: T, amplitude: T, t_s: T) -> T {
    let tau = t / t_s;
    let t4 = tau * tau * tau * tau;
    let c140 = T::lit(140.0);
    let c420 = T::lit(420.0);
    amplitude * t4 * (-c140 * tau * tau * tau + c420 * tau * tau - c420 * tau + c140)
}

/// Re-integrates a converged plan under a new time scale and checks that the
/// plane and sphere paths are unchanged as functions of arc length.
pub fn retime<T: Real>(
    setup: &crate::kinematics::SimSetup<T>,
    reference: &crate::kinematics::Trajectory<T>,
    new_time: TimeScale<T>,
    tol: T,
) -> Result<crate::kinematics::Trajectory<T>, RetimeError> {
    let mut setup = setup.clone();
    setup.time = new_time;
    let traj = crate::kinematics::simulate(&setup)?;
    let drift = path_deviation(reference, &traj, setup.r_o);
    if drift > tol {
        return Err(RetimeError::PathDrift { drift: drift.to_f64(), tol: tol.to_f64() });
    }
    Ok(traj)
}

/// Sup-norm deviation between two trajectories compared at matched plane arc
/// length (over the arc range both cover), across both the plane path and
/// the embedded sphere path.
pub fn path_deviation<T: Real>(
    a: &crate::kinematics::Trajectory<T>,
    b: &crate::kinematics::Trajectory<T>,
    r_o: T,
) -> T {
    use crate::geometry::sphere_embed;

    let s_end = a.total_plane_length().min(b.total_plane_length());
    let n = 800;
    let mut worst = T::zero();
    for i in 0..=n {
        let s = s_end * T::from_usize(i).unwrap() / T::from_usize(n).unwrap();
        let pa = a.sample_at_arc_length(s);
        let pb = b.sample_at_arc_length(s);
        let plane = (pa.state.u_s - pb.state.u_s).hypot(pa.state.v_s - pb.state.v_s);
        let ea = sphere_embed(pa.state.sphere_point(), r_o);
        let eb = sphere_embed(pb.state.sphere_point(), r_o);
        let mut sphere = T::zero();
        for k in 0..3 {
            sphere = sphere + (ea[k] - eb[k]) * (ea[k] - eb[k]);
        }
        let sphere = sphere.sqrt();
        worst = worst.max(plane).max(sphere);
    }
    worst
}
