//! Surface charts, curvature triples, spherical-cap trigonometry and the
//! goal-frame rotation.
//!
//! Everything here is a pure function of its value arguments. Angles are in
//! radians, lengths in meters. Chart angles are kept in `[-pi, pi]`; the
//! operations that can push a result outside that range wrap it back.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::scalar::Real;

/// Width of the silent clamp applied to inverse-trig arguments that drift
/// past `[-1, 1]` by rounding. Anything further out is a hard error.
const UNIT_CLAMP_TOL: f64 = 1e-9;

/// Tolerance used to detect chart poles.
const POLE_TOL: f64 = 1e-9;

/// Contact point on the sphere chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint<T> {
    /// u-angle, rad, in `[-pi, pi]`.
    pub u: T,
    /// v-angle, rad, in `[-pi, pi]`.
    pub v: T,
}

impl<T: Real> SpherePoint<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u: u.wrap_angle(), v: v.wrap_angle() }
    }

    pub fn origin() -> Self {
        Self { u: T::zero(), v: T::zero() }
    }
}

/// Contact point on the plane chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint<T> {
    /// u-coordinate, m.
    pub u: T,
    /// v-coordinate, m.
    pub v: T,
}

impl<T: Real> PlanePoint<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// The three induced-curvature scalars of a curve direction on a surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTriple<T> {
    /// Geodesic curvature, 1/m.
    pub k_g: T,
    /// Normal curvature, 1/m.
    pub k_n: T,
    /// Geodesic torsion, 1/m.
    pub tau_g: T,
}

/// Curvatures of the sphere chart along the two principal angle directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereCurvatures<T> {
    pub u_dir: CurvatureTriple<T>,
    pub v_dir: CurvatureTriple<T>,
}

/// Embeds a sphere chart point into R^3.
///
/// The chart places the contact pole `(0, 0)` at the bottom of the sphere,
/// `(0, 0, -R_o)`.
pub fn sphere_embed<T: Real>(p: SpherePoint<T>, r_o: T) -> [T; 3] {
    let (su, cu) = p.u.sin_cos();
    let (sv, cv) = p.v.sin_cos();
    [-r_o * su * cv, r_o * sv, -r_o * cu * cv]
}

/// Curvature triples of the sphere along the u- and v-directions.
///
/// The geodesic curvature of the u-direction has a pole at `|v| = pi/2`.
pub fn sphere_curvatures<T: Real>(
    p: SpherePoint<T>,
    r_o: T,
) -> Result<SphereCurvatures<T>, GeometryError> {
    let half_pi = T::FRAC_PI_2();
    if (p.v.abs() - half_pi).abs() < T::lit(POLE_TOL) {
        return Err(GeometryError::Pole {
            context: "sphere_curvatures k_gu",
            value: p.v.to_f64(),
            tol: POLE_TOL,
        });
    }
    let k_n = r_o.recip();
    Ok(SphereCurvatures {
        u_dir: CurvatureTriple { k_g: p.v.tan() / r_o, k_n, tau_g: T::zero() },
        v_dir: CurvatureTriple { k_g: T::zero(), k_n, tau_g: T::zero() },
    })
}

/// Geodesic torsion of the helicoid-shaped virtual surface.
///
/// Uses the difference form `|R_v^2 cos^2(v_v) - R_t^2|^(1/2) / R_v^2`; the
/// absolute value keeps the radicand admissible for every `R_t`.
pub fn helicoid_torsion<T: Real>(v_v: T, r_v: T, r_t: T) -> T {
    let cv = v_v.cos();
    (r_v * r_v * cv * cv - r_t * r_t).abs().sqrt() / (r_v * r_v)
}

/// Sum-form torsion of the helicoid embedding, kept as a cross-check
/// companion to [`helicoid_torsion`]: `(R_v^2 cos^2(v_v) + R_t^2)^(1/2) / R_v^2`.
pub fn helicoid_torsion_sum_form<T: Real>(v_v: T, r_v: T, r_t: T) -> T {
    let cv = v_v.cos();
    (r_v * r_v * cv * cv + r_t * r_t).sqrt() / (r_v * r_v)
}

/// Spin-angle change produced by sweeping the cap area `s` on a sphere of
/// radius `r_o` (the enclosed area times the Gaussian curvature `1/R_o^2`).
pub fn cap_spin_change<T: Real>(s: T, r_o: T) -> T {
    s / (r_o * r_o)
}

/// Clamps an inverse-trig argument to `[-1, 1]`.
///
/// Arguments beyond the clamp width are reported as a domain error rather
/// than silently saturated.
pub fn clamp_unit<T: Real>(x: T, context: &'static str) -> Result<T, GeometryError> {
    let one = T::one();
    if x.abs() <= one {
        Ok(x)
    } else if x.abs() - one <= T::lit(UNIT_CLAMP_TOL) {
        Ok(num_traits::Float::copysign(one, x))
    } else {
        Err(GeometryError::Domain { context, value: x.to_f64() })
    }
}

/// Rotates a sphere point into the goal frame.
///
/// The rotation angle is `G_f - pi/4` about the vertical axis through the
/// sphere center. The principal inverse-sine solution lands in the lower
/// hemisphere, so points that start in the upper hemisphere are remapped by
/// `(u, v) -> (-u, pi - v)`, which preserves the horizontal embedding
/// components and restores the vertical one.
pub fn rotate_to_goal_frame<T: Real>(
    p: SpherePoint<T>,
    g_f: T,
) -> Result<SpherePoint<T>, GeometryError> {
    let gp = g_f - T::FRAC_PI_4();
    let (sg, cg) = gp.sin_cos();
    let su = p.u.sin();
    let (sv, cv) = p.v.sin_cos();

    let sin_vr = clamp_unit(-sg * su * cv + cg * sv, "rotate_to_goal_frame v")?;
    let v_r = sin_vr.asin();
    let cos_vr = v_r.cos();
    let u_r = if cos_vr == T::zero() {
        T::zero()
    } else {
        clamp_unit((cg * su * cv + sg * sv) / cos_vr, "rotate_to_goal_frame u")?.asin()
    };

    let au = p.u.abs();
    let av = p.v.abs();
    let half_pi = T::FRAC_PI_2();
    let pi = T::PI();
    // Region table for the quadrant-dependent remap; boundaries take the
    // first matching branch in listed order.
    let upper = (av <= half_pi && (half_pi <= au && au <= pi))
        || (half_pi < av && (au < half_pi));
    if upper {
        Ok(SpherePoint::new(-u_r, pi - v_r))
    } else {
        Ok(SpherePoint::new(u_r, v_r))
    }
}

/// Angle offsets of a sphere point from the Z-X and Z-Y planes.
pub fn zx_zy_angles<T: Real>(p: SpherePoint<T>) -> (T, T) {
    let q_zx = p.u.abs();
    let q_zy = (p.u.sin() * p.v.cos()).atan2(p.v.sin()).abs();
    (q_zx, q_zy)
}
