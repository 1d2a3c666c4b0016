//! Run-configuration files.
//!
//! Configs are TOML. Angles are radians, lengths meters, times seconds.
//! Only `[sphere]`, `[goal]` and `[time]` are required; everything else
//! falls back to the library defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinroll_core::kinematics::Variant;
use spinroll_core::{Configuration64, IntegratorOptions64, SimSetup64};
use spinroll_core::{PlanParams64, Tolerances64, TuningState64};
use spinroll_core::reachability::{AlphaForm, CapAreaForm, DistanceFormulation};
use spinroll_core::GoalSpec64;
use spinroll_core::TimeScale64;
use spinroll_core::{geometry, kinematics, planner, reachability};

pub type Configuration64Alias = Configuration64;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSection {
    /// Sphere radius R_o, m.
    pub radius: f64,
    /// Divider bounding the built-in incircle radius.
    #[serde(default = "default_mu_r")]
    pub mu_r: f64,
}

fn default_mu_r() -> f64 {
    4.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    #[serde(default)]
    pub u_s: f64,
    #[serde(default)]
    pub v_s: f64,
    #[serde(default)]
    pub u_o: f64,
    #[serde(default)]
    pub v_o: f64,
    #[serde(default)]
    pub psi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesSection {
    #[serde(default = "d_eps_n")]
    pub eps_n: f64,
    #[serde(default = "d_eps_n")]
    pub eps_r: f64,
    #[serde(default = "d_eps_p")]
    pub eps_p: f64,
    #[serde(default = "d_eps_s")]
    pub eps_s: f64,
}

fn d_eps_n() -> f64 {
    0.07
}
fn d_eps_p() -> f64 {
    0.12
}
fn d_eps_s() -> f64 {
    0.05
}

impl Default for TolerancesSection {
    fn default() -> Self {
        Self { eps_n: d_eps_n(), eps_r: d_eps_n(), eps_p: d_eps_p(), eps_s: d_eps_s() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TimeSection {
    /// Simulation horizon, s.
    pub t_f: f64,
    /// "constant" or "smooth".
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_t_const")]
    pub t_const: f64,
    /// Smooth-profile amplitude, rad/s.
    pub amplitude: Option<f64>,
    /// Smooth-profile duration, s.
    pub t_s: Option<f64>,
}

fn default_mode() -> String {
    "constant".into()
}
fn default_t_const() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct IntegratorSection {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub max_step: Option<f64>,
    pub min_samples: Option<usize>,
    pub max_rhs_evals: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PlannerSection {
    pub max_iters: Option<u32>,
    pub r_q_init: Option<f64>,
    #[serde(default)]
    pub v_shift: bool,
    pub variant: Option<Variant>,
    pub pi4_exclusion_band: Option<f64>,
    pub check_feasibility: Option<bool>,
    pub pole_softening: Option<f64>,
    pub alpha_form: Option<AlphaForm>,
    pub cap_area_form: Option<CapAreaForm>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSection {
    #[serde(default)]
    pub zeta_q: f64,
    #[serde(default)]
    pub zeta_u: f64,
    pub r_q: Option<f64>,
    #[serde(default)]
    pub r_u: f64,
    #[serde(default)]
    pub psi_u: f64,
}

/// A full run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sphere: SphereSection,
    #[serde(default)]
    pub start: StateSection,
    pub goal: StateSection,
    #[serde(default)]
    pub tolerances: TolerancesSection,
    pub time: TimeSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub planner: PlannerSection,
    #[serde(default)]
    pub tuning: TuningSection,
}

/// Config loading / validation failure with the offending field when known.
#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(message: impl Into<String>) -> ConfigError {
    ConfigError { message: message.into() }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| err(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    // Negated comparisons are deliberate: NaN must fail the checks.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.sphere.radius > 0.0) {
            return Err(err("sphere.radius must be positive"));
        }
        if !(self.sphere.mu_r > 0.0) {
            return Err(err("sphere.mu_r must be positive"));
        }
        if !(self.time.t_f > 0.0) {
            return Err(err("time.t-f must be positive"));
        }
        match self.time.mode.as_str() {
            "constant" => {
                if self.time.t_const == 0.0 {
                    return Err(err("time.t-const must be nonzero in constant mode"));
                }
            }
            "smooth" => {
                let a = self.time.amplitude.ok_or_else(|| err("time.amplitude required in smooth mode"))?;
                let t_s = self.time.t_s.ok_or_else(|| err("time.t-s required in smooth mode"))?;
                if !(a > 0.0) {
                    return Err(err("time.amplitude must be positive"));
                }
                if !(t_s > 0.0) {
                    return Err(err("time.t-s must be positive"));
                }
            }
            other => return Err(err(format!("time.mode must be \"constant\" or \"smooth\", got {other:?}"))),
        }
        for (name, v) in [
            ("tolerances.eps_n", self.tolerances.eps_n),
            ("tolerances.eps_r", self.tolerances.eps_r),
            ("tolerances.eps_p", self.tolerances.eps_p),
            ("tolerances.eps_s", self.tolerances.eps_s),
        ] {
            if !(v > 0.0) {
                return Err(err(format!("{name} must be positive")));
            }
        }
        if let Some(r) = self.integrator.rtol {
            if !(r > 0.0) {
                return Err(err("integrator.rtol must be positive"));
            }
        }
        if let Some(a) = self.integrator.atol {
            if !(a > 0.0) {
                return Err(err("integrator.atol must be positive"));
            }
        }
        Ok(())
    }

    pub fn time_scale(&self) -> TimeScale64 {
        match self.time.mode.as_str() {
            "smooth" => TimeScale64::smooth(
                self.time.amplitude.expect("validated"),
                self.time.t_s.expect("validated"),
                self.time.t_const,
                self.time.t_f,
            ),
            _ => TimeScale64::constant(self.time.t_const, self.time.t_f),
        }
    }

    pub fn goal_spec(&self) -> GoalSpec64 {
        reachability::GoalSpec {
            plane_start: geometry::PlanePoint::new(self.start.u_s, self.start.v_s),
            orient_start: geometry::SpherePoint::new(self.start.u_o, self.start.v_o),
            spin_start: self.start.psi,
            plane_goal: geometry::PlanePoint::new(self.goal.u_s, self.goal.v_s),
            orient_goal: geometry::SpherePoint::new(self.goal.u_o, self.goal.v_o),
            spin_goal: self.goal.psi,
        }
    }

    pub fn distance_formulation(&self) -> DistanceFormulation {
        DistanceFormulation {
            cap_area: self.planner.cap_area_form.unwrap_or_default(),
            alpha: self.planner.alpha_form.unwrap_or_default(),
        }
    }

    pub fn plan_params(&self) -> PlanParams64 {
        let mut params = planner::PlanParams::new(self.sphere.radius, self.sphere.mu_r, self.time_scale());
        params.tolerances = Tolerances64 {
            eps_n: self.tolerances.eps_n,
            eps_r: self.tolerances.eps_r,
            eps_p: self.tolerances.eps_p,
            eps_s: self.tolerances.eps_s,
            max_iters: self.planner.max_iters.unwrap_or(500),
        };
        if let Some(v) = self.planner.variant {
            params.variant = v;
        }
        params.v_shift = self.planner.v_shift;
        params.cap_form = self.distance_formulation();
        if let Some(v) = self.planner.r_q_init {
            params.r_q_init = v;
        }
        if let Some(v) = self.planner.pi4_exclusion_band {
            params.pi4_exclusion_band = v;
        }
        if let Some(v) = self.planner.check_feasibility {
            params.check_feasibility = v;
        }
        if let Some(v) = self.planner.pole_softening {
            params.pole_softening = v;
        }
        // The integrator section overrides the planner's solve profile.
        if let Some(v) = self.integrator.rtol {
            params.integrator.rtol = v;
        }
        if let Some(v) = self.integrator.atol {
            params.integrator.atol = v;
        }
        if let Some(v) = self.integrator.max_step {
            params.integrator.max_step = Some(v);
        }
        if let Some(v) = self.integrator.min_samples {
            params.integrator.min_samples = v;
        }
        if let Some(v) = self.integrator.max_rhs_evals {
            params.integrator.max_rhs_evals = v;
        }
        params
    }

    pub fn tuning_state(&self) -> TuningState64 {
        TuningState64 {
            zeta_q: self.tuning.zeta_q,
            zeta_u: self.tuning.zeta_u,
            r_q: self.tuning.r_q.unwrap_or(0.005),
            r_u: self.tuning.r_u,
            psi_u: self.tuning.psi_u,
            k: 0,
        }
    }

    /// Integrator options for a standalone solve (tight module defaults
    /// unless the config overrides them).
    pub fn sim_integrator(&self) -> IntegratorOptions64 {
        let mut opts = IntegratorOptions64::default();
        if let Some(v) = self.integrator.rtol {
            opts.rtol = v;
        }
        if let Some(v) = self.integrator.atol {
            opts.atol = v;
        }
        if let Some(v) = self.integrator.max_step {
            opts.max_step = Some(v);
        }
        if let Some(v) = self.integrator.min_samples {
            opts.min_samples = v;
        }
        if let Some(v) = self.integrator.max_rhs_evals {
            opts.max_rhs_evals = v;
        }
        opts
    }

    pub fn sim_setup(&self, tuning: &TuningState64) -> SimSetup64 {
        kinematics::SimSetup {
            goal: self.goal_spec(),
            initial: kinematics::Configuration::new(
                self.start.u_s,
                self.start.v_s,
                self.start.u_o,
                self.start.v_o,
                self.start.psi,
            ),
            r_o: self.sphere.radius,
            mu_r: self.sphere.mu_r,
            zeta_prime: tuning.zeta_prime(),
            r_a: tuning.r_a(),
            psi_u: tuning.psi_u,
            time: self.time_scale(),
            variant: self.planner.variant.unwrap_or_default(),
            v_shift: self.planner.v_shift,
            cap_form: self.distance_formulation(),
            options: self.sim_integrator(),
            pole_softening: self.planner.pole_softening.unwrap_or(1e-3),
        }
    }
}

/// Scenario list for the batch runner.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioList {
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Config path, relative to the scenario file's directory.
    pub config: PathBuf,
}

impl ScenarioList {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        let list: ScenarioList =
            toml::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok((list, base))
    }
}
