//! JSON robot configuration: parsing, validation and conversion into the
//! library's model types.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, RowDVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::actuator::{self, ActuatorModel, ActuatorParams, ControllerGains};
use crate::controller::{ControllerOptions, EvaluationPoint, SystemController};
use crate::distribution::ForceConstraints;
use crate::dynamics::{self, InertialParams, RobotModel};
use crate::kinematics::{self, RobotGeometry};
use crate::manifold::{Cotangent, Manifold, Pose, Tangent};
use crate::plant::SimConfig;
use crate::trajectory::parse_pose;

/// Smallest singular value of `Λ` accepted at the home pose.
pub const RANK_TOL: f64 = 1e-8;
/// Most negative eigenvalue of `M − m₀ΛᵀΛ` accepted at the home pose.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io(String),
    Parse { line: usize, column: usize, message: String },
    /// `invariant` names the violated check, e.g. `"rank"` or `"psd"`.
    Validation { invariant: &'static str, message: String },
}

impl ConfigError {
    fn invalid(invariant: &'static str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            invariant,
            message: message.into(),
        }
    }

    pub fn invariant(&self) -> Option<&'static str> {
        match self {
            ConfigError::Validation { invariant, .. } => Some(invariant),
            _ => None,
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "{m}"),
            ConfigError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            ConfigError::Validation { invariant, message } => {
                write!(f, "validation failed ({invariant}): {message}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorSpec {
    pub anchor: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attachment: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<[[f64; 3]; 3]>,
    #[serde(default)]
    pub gravity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub c: Vec<f64>,
    /// Higher resistance terms `k₁, k₂, …`; `k₀` comes from `actuator_params.k0`.
    #[serde(default)]
    pub k: Vec<f64>,
    #[serde(default)]
    pub c_tilde: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorParamsSpec {
    pub m0: f64,
    pub k0: f64,
    /// Actuator inertia reflected into `M`; defaults to `m0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflected_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
}

/// A scalar applied to every actuator, or one value each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerActuator {
    All(f64),
    Each(Vec<f64>),
}

impl PerActuator {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            PerActuator::All(v) => vec![*v; n],
            PerActuator::Each(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub t_min: PerActuator,
    pub f_cmd_max: PerActuator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ControllerSpec {
    Pd {
        kp: f64,
        kd: f64,
    },
    #[serde(rename = "statespace")]
    StateSpace {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<f64>,
        #[serde(rename = "C")]
        c: Vec<f64>,
        #[serde(rename = "D")]
        d: Vec<f64>,
        l: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default = "default_dt_physics")]
    pub dt_physics: f64,
    #[serde(default = "default_dt_control")]
    pub dt_control: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_offset: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<Vec<f64>>,
    #[serde(default)]
    pub noise_sigma: f64,
}

fn default_dt_physics() -> f64 {
    2.5e-4
}
fn default_dt_control() -> f64 {
    1e-3
}
fn default_duration() -> f64 {
    5.0
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            dt_physics: default_dt_physics(),
            dt_control: default_dt_control(),
            duration: default_duration(),
            initial_offset: None,
            disturbance: None,
            noise_sigma: 0.0,
        }
    }
}

/// Box in chart coordinates used for workspace sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EvalAt {
    #[default]
    Measured,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub manifold: String,
    pub actuators: Vec<ActuatorSpec>,
    pub body: BodySpec,
    pub actuator_params: ActuatorParamsSpec,
    pub constraints: ConstraintSpec,
    pub controller: ControllerSpec,
    #[serde(default)]
    pub sim: SimSpec,
    /// Home pose; rigid poses are `[x, y, z, w, qx, qy, qz]`.
    pub home: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<WorkspaceSpec>,
    #[serde(default)]
    pub eval_at: EvalAt,
}

/// Everything built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Robot {
    pub model: RobotModel,
    pub gains: ControllerGains,
    pub constraints: ForceConstraints,
    pub sim: SimConfig,
    pub home: Pose,
    pub options: ControllerOptions,
}

impl Robot {
    pub fn controller(&self) -> Result<SystemController, ConfigError> {
        SystemController::new(
            self.model.clone(),
            self.gains.clone(),
            self.constraints.clone(),
            self.options,
            self.sim.dt_control,
        )
        .map_err(|e| ConfigError::invalid("sim", e.to_string()))
    }
}

pub fn parse_config(text: &str) -> Result<RobotConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Parse and validate.
pub fn load_config(path: &Path) -> Result<RobotConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    let config = parse_config(&text)?;
    config.build()?;
    Ok(config)
}

fn vec3(values: &[f64], what: &'static str) -> Result<Vector3<f64>, ConfigError> {
    if values.len() > 3 {
        return Err(ConfigError::invalid("schema", format!("{what} has {} components", values.len())));
    }
    let mut v = Vector3::zeros();
    for (i, x) in values.iter().enumerate() {
        v[i] = *x;
    }
    Ok(v)
}

impl RobotConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn manifold(&self) -> Result<Manifold, ConfigError> {
        Manifold::from_selector(&self.manifold)
            .ok_or_else(|| ConfigError::invalid("schema", format!("unknown manifold {:?}", self.manifold)))
    }

    pub fn geometry(&self) -> Result<RobotGeometry, ConfigError> {
        let manifold = self.manifold()?;
        let anchors = self
            .actuators
            .iter()
            .map(|a| vec3(&a.anchor, "anchor"))
            .collect::<Result<Vec<_>, _>>()?;
        let attachments = self
            .actuators
            .iter()
            .map(|a| vec3(a.attachment.as_deref().unwrap_or(&[]), "attachment"))
            .collect::<Result<Vec<_>, _>>()?;
        RobotGeometry::new(manifold, anchors, attachments).map_err(|e| ConfigError::invalid("geometry", e.to_string()))
    }

    pub fn actuator_model(&self) -> ActuatorModel {
        let p = &self.actuator_params;
        let extra = p.model.clone().unwrap_or_default();
        let mut k = vec![p.k0];
        k.extend(extra.k);
        ActuatorModel {
            c: extra.c,
            k,
            c_tilde: extra.c_tilde,
        }
    }

    pub fn gains(&self) -> Result<ControllerGains, ConfigError> {
        let p = &self.actuator_params;
        let bad = |e: crate::Error| ConfigError::invalid("controller", e.to_string());
        match &self.controller {
            ControllerSpec::Pd { kp, kd } => actuator::pd_gains(*kp, *kd, p.k0, p.m0).map_err(bad),
            ControllerSpec::StateSpace { a, b, c, d, l } => {
                if d.len() != *l {
                    return Err(ConfigError::invalid(
                        "controller",
                        format!("D has {} entries but l = {l}", d.len()),
                    ));
                }
                let s = a.len();
                if a.iter().any(|row| row.len() != s) {
                    return Err(ConfigError::invalid("controller", "A must be square"));
                }
                let a = DMatrix::from_fn(s, s, |i, j| a[i][j]);
                ControllerGains::new(
                    a,
                    DVector::from_vec(b.clone()),
                    RowDVector::from_vec(c.clone()),
                    RowDVector::from_vec(d.clone()),
                    p.k0,
                    p.m0,
                )
                .map_err(bad)
            }
        }
    }

    /// Build the model and check every cross-module invariant at the home pose.
    pub fn build(&self) -> Result<Robot, ConfigError> {
        let manifold = self.manifold()?;
        let geometry = self.geometry()?;
        let (n, dim) = (geometry.n(), geometry.dim());

        let body = &self.body;
        let inertia = match (manifold, body.inertia) {
            (_, Some(rows)) => Matrix3::from_fn(|i, j| rows[i][j]),
            (Manifold::Rigid, None) => return Err(ConfigError::invalid("schema", "rigid bodies need an inertia tensor")),
            (Manifold::Euclidean(_), None) => Matrix3::identity(),
        };
        let p = &self.actuator_params;
        if !(p.m0 >= 0.0) || !(p.k0 >= 0.0) {
            return Err(ConfigError::invalid("actuator_params", "m0 and k0 must be non-negative"));
        }
        if !self.actuator_model().is_ideal() {
            return Err(ConfigError::invalid(
                "actuator_params",
                "only the ideal actuator model (k0 alone) can be simulated; use tune-check to analyze others",
            ));
        }
        let inertial = InertialParams::new(
            body.mass,
            inertia,
            vec3(&body.gravity, "gravity")?,
            p.reflected_mass.unwrap_or(p.m0),
        )
        .map_err(|e| ConfigError::invalid("body", e.to_string()))?;
        let model = RobotModel {
            geometry,
            inertial,
            actuator: ActuatorParams {
                m0: p.m0,
                model: self.actuator_model(),
            },
        };

        let home = parse_pose(manifold, &self.home, "home").map_err(|e| ConfigError::invalid("schema", e.to_string()))?;
        if n < dim {
            return Err(ConfigError::invalid(
                "rank",
                format!("{n} actuators cannot control {dim} degrees of freedom"),
            ));
        }
        let smin = kinematics::min_singular_value(&model.geometry, &home)
            .map_err(|e| ConfigError::invalid("rank", e.to_string()))?;
        if !(smin > RANK_TOL) {
            return Err(ConfigError::invalid(
                "rank",
                format!("actuator Jacobian at home has smallest singular value {smin:e}"),
            ));
        }
        let margin = dynamics::psd_margin(&model, &home).map_err(|e| ConfigError::invalid("psd", e.to_string()))?;
        if margin < -PSD_TOL {
            return Err(ConfigError::invalid(
                "psd",
                format!("M - m0 LtL has eigenvalue {margin:e} at home"),
            ));
        }

        let gains = self.gains()?;
        let report = actuator::stability_check(&gains, &model.actuator.model, &actuator::standard_masses(p.m0))
            .map_err(|e| ConfigError::invalid("stability", e.to_string()))?;
        if !report.passed() {
            return Err(ConfigError::invalid(
                "stability",
                format!("closed loop has a pole with real part {:e}", report.worst_real_part()),
            ));
        }

        let constraints = ForceConstraints::new(
            self.constraints.t_min.expand(n),
            self.constraints.f_cmd_max.expand(n),
        )
        .map_err(|e| ConfigError::invalid("constraints", e.to_string()))?;

        let s = &self.sim;
        let tangent = |v: &Option<Vec<f64>>, what: &str| -> Result<Option<Vec<f64>>, ConfigError> {
            match v {
                Some(v) if v.len() != dim => Err(ConfigError::invalid(
                    "sim",
                    format!("{what} has {} components, expected {dim}", v.len()),
                )),
                other => Ok(other.clone()),
            }
        };
        let sim = SimConfig {
            dt_physics: s.dt_physics,
            dt_control: s.dt_control,
            duration: s.duration,
            initial_offset: tangent(&s.initial_offset, "initial_offset")?.map(Tangent::from),
            disturbance: tangent(&s.disturbance, "disturbance")?.map(Cotangent::from),
            noise_sigma: s.noise_sigma,
            seed: 0,
        };
        sim.substeps().map_err(|e| ConfigError::invalid("sim", e.to_string()))?;

        if let Some(ws) = &self.workspace {
            if ws.min.len() != dim || ws.max.len() != dim || ws.min.iter().zip(&ws.max).any(|(a, b)| !(a <= b)) {
                return Err(ConfigError::invalid(
                    "workspace",
                    format!("bounds must have {dim} components with min <= max"),
                ));
            }
        }

        Ok(Robot {
            model,
            gains,
            constraints,
            sim,
            home,
            options: ControllerOptions {
                evaluate_at: match self.eval_at {
                    EvalAt::Measured => EvaluationPoint::Measured,
                    EvalAt::Reference => EvaluationPoint::Reference,
                },
                ..ControllerOptions::default()
            },
        })
    }
}
