//! Motion planning for a sphere that rolls and spins along a straight line
//! on a plane.
//!
//! The toolkit steers the sphere to a full goal configuration (plane
//! position, contact orientation, spin angle) by shaping a virtual contact
//! surface whose curvatures become arc-length control inputs, integrating
//! the resulting contact kinematics, and iteratively tuning the surface
//! constants until the trajectory lands on the goal.
//!
//! Module map:
//!
//! * [`geometry`]: charts, curvatures, cap trigonometry, goal-frame rotation.
//! * [`reachability`]: minimum plane distance needed for a goal, feasibility.
//! * [`controller`]: the virtual-surface inputs and steering angles.
//! * [`kinematics`]: the five-state kinematics and the adaptive integrator.
//! * [`planner`]: the three-phase iterative tuning loop.
//! * [`timescale`]: rolling-rate time scaling and re-timing.
//!
//! All numerics are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the CLI uses.

pub mod controller;
pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod planner;
pub mod reachability;
pub mod scalar;
pub mod timescale;

pub use scalar::Real;

/// `f64` aliases for the common surface of the crate.
pub type SpherePoint64 = geometry::SpherePoint<f64>;
pub type PlanePoint64 = geometry::PlanePoint<f64>;
pub type GoalSpec64 = reachability::GoalSpec<f64>;
pub type DistanceReport64 = reachability::DistanceReport<f64>;
pub type Configuration64 = kinematics::Configuration<f64>;
pub type Trajectory64 = kinematics::Trajectory<f64>;
pub type SimSetup64 = kinematics::SimSetup<f64>;
pub type IntegratorOptions64 = kinematics::IntegratorOptions<f64>;
pub type TimeScale64 = timescale::TimeScale<f64>;
pub type TuningState64 = planner::TuningState<f64>;
pub type Tolerances64 = planner::Tolerances<f64>;
pub type PlanParams64 = planner::PlanParams<f64>;
pub type PlanResult64 = planner::PlanResult<f64>;
