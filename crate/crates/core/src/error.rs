//! Error types shared across the crate.

use thiserror::Error;

/// Errors from the pure surface-geometry operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    /// Evaluation point sits on a declared chart pole.
    #[error("chart pole at {context}: |{value}| within {tol} of pi/2")]
    Pole { context: &'static str, value: f64, tol: f64 },
    /// An inverse-trig argument left `[-1, 1]` by more than the clamp width.
    #[error("inverse-trig argument {value} outside [-1, 1] in {context}")]
    Domain { context: &'static str, value: f64 },
}

/// Errors from the minimum-distance computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReachabilityError {
    /// The formula chain is derived for a sphere starting at the chart origin
    /// with zero spin; other initial states are rejected.
    #[error("goal outside the construction's assumptions: {reason}")]
    InvalidGoal { reason: String },
    /// A radicand or inverse-sine argument left its domain by more than 1e-9.
    #[error("numerical domain violation in {context}: {value}")]
    NumericalDomain { context: &'static str, value: f64 },
}

/// Errors from controller input evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    /// The steering angle argument evaluated to NaN (`beta_s = 0` with a
    /// vanishing numerator).
    #[error("steering singularity: cot^-1 argument is NaN")]
    SteeringSingularity,
    /// The virtual-surface total radius collapsed to zero.
    #[error("degenerate virtual surface: |R_t| = {r_t}")]
    DegenerateRadius { r_t: f64 },
    /// Smooth time scaling divides by alpha_s.
    #[error("singular time scale: |alpha_s| = {alpha_s} below threshold")]
    SingularScale { alpha_s: f64 },
}

/// Errors from a single trajectory integration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Control(#[from] ControlError),
    /// Building the spin tracker failed before the first step.
    #[error("solve setup: {0}")]
    Setup(#[from] ReachabilityError),
    /// The adaptive step size underflowed, typically close to the
    /// `cos(v_o) = 0` pole. The partial trajectory is preserved by the caller.
    #[error("step size underflow at t = {t} (step {step})")]
    StepFailure { t: f64, step: f64 },
    /// The per-solve work budget was exhausted.
    #[error("evaluation budget exhausted at t = {t}")]
    BudgetExhausted { t: f64 },
}

/// Errors that abort planning before any iteration runs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    /// The requested plane displacement is shorter than the minimum distance.
    #[error("infeasible goal: |P_f - P_0| = {dist} does not exceed d = {d}")]
    InfeasibleGoal { d: f64, dist: f64 },
    /// Goal direction falls inside the exclusion band around pi/4.
    #[error("goal direction {g_f} within {band} of the uncontrollable direction pi/4")]
    ExcludedDirection { g_f: f64, band: f64 },
    #[error(transparent)]
    Reachability(#[from] ReachabilityError),
}

/// Errors from re-timing a converged plan.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetimeError {
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    /// The re-timed paths drifted from the reference beyond tolerance.
    #[error("path drift {drift} exceeds {tol} under the new time scale")]
    PathDrift { drift: f64, tol: f64 },
}
