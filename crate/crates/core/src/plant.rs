//! Ground-truth physics and the closed simulation loop.

use nalgebra::{DVector, Quaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::controller::{Command, ReferenceSample, StepReport, SystemController};
use crate::dynamics::{self, RobotModel};
use crate::error::{check_len, Error, Result};
use crate::kinematics;
use crate::manifold::{ActuatorVector, Cotangent, Manifold, Pose, Tangent};
use crate::trace::{TraceLog, TraceRow};
use crate::trajectory::Reference;

/// Any state component beyond this magnitude is treated as a blow-up.
pub const BLOWUP_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub pose: Pose,
    pub twist: Tangent,
    pub t: f64,
}

impl PlantState {
    pub fn at_rest(pose: Pose) -> Self {
        let dim = pose.dim();
        Self {
            pose,
            twist: Tangent::zeros(dim),
            t: 0.0,
        }
    }
}

/// Force actually delivered by the actuators for a commanded `f_c`.
///
/// Only the ideal model `f = f_c − k₀ ℓ̇` is simulated.
pub fn applied_forces(model: &RobotModel, pose: &Pose, twist: &Tangent, f_c: &ActuatorVector) -> Result<ActuatorVector> {
    check_len("commanded forces", model.n(), f_c.len())?;
    if !model.actuator.model.is_ideal() {
        return Err(Error::InvalidParameter(
            "the plant simulates ideal actuators only (k0 term)".into(),
        ));
    }
    let rates = kinematics::actuator_rates(&model.geometry, pose, twist)?;
    Ok(ActuatorVector(&f_c.0 - rates.0 * model.actuator.k0()))
}

fn flat_pose(pose: &Pose) -> Vec<f64> {
    pose.to_vec()
}

/// Time derivative of `[pose coordinates, twist]`.
fn derivative(
    model: &RobotModel,
    pose: &Pose,
    twist: &Tangent,
    f_c: &ActuatorVector,
    disturbance: Option<&Cotangent>,
) -> Result<Vec<f64>> {
    let f = applied_forces(model, pose, twist, f_c)?;
    let lambda = kinematics::jacobian(&model.geometry, pose)?;
    let mut tau = lambda.transpose() * f.0;
    if let Some(w) = disturbance {
        tau += &w.0;
    }
    let accel = dynamics::forward_dynamics(model, pose, twist, &Cotangent(tau))?;
    let mut out = match pose {
        Pose::Euclidean(_) => twist.iter().copied().collect::<Vec<_>>(),
        Pose::Rigid { orientation, .. } => {
            let q = orientation.quaternion();
            let omega = Quaternion::new(0.0, twist[3], twist[4], twist[5]);
            let qdot = (omega * q) * 0.5;
            vec![twist[0], twist[1], twist[2], qdot.w, qdot.i, qdot.j, qdot.k]
        }
    };
    out.extend(accel.iter());
    Ok(out)
}

fn unflatten(manifold: Manifold, y: &[f64], t: f64) -> Result<PlantState> {
    let split = match manifold {
        Manifold::Euclidean(d) => d,
        Manifold::Rigid => 7,
    };
    if y.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_LIMIT) {
        return Err(Error::NumericBlowup { t });
    }
    let pose = Pose::from_vec(manifold, &y[..split]).ok_or(Error::NumericBlowup { t })?;
    Ok(PlantState {
        pose,
        twist: Tangent::from_slice(&y[split..]),
        t,
    })
}

/// One RK4 step of length `dt` with `f_c` held. Quaternions are integrated as
/// four coordinates and renormalized.
pub fn step_plant(
    model: &RobotModel,
    state: &PlantState,
    f_c: &ActuatorVector,
    disturbance: Option<&Cotangent>,
    dt: f64,
) -> Result<PlantState> {
    check_len("plant twist", model.dim(), state.twist.len())?;
    let manifold = model.geometry.manifold();
    let mut y0 = flat_pose(&state.pose);
    y0.extend(state.twist.iter());
    let y0 = DVector::from_vec(y0);

    let eval = |y: &DVector<f64>, t: f64| -> Result<DVector<f64>> {
        let s = unflatten(manifold, y.as_slice(), t)?;
        Ok(DVector::from_vec(derivative(model, &s.pose, &s.twist, f_c, disturbance)?))
    };
    let t = state.t;
    let k1 = eval(&y0, t)?;
    let k2 = eval(&(&y0 + &k1 * (dt / 2.0)), t + dt / 2.0)?;
    let k3 = eval(&(&y0 + &k2 * (dt / 2.0)), t + dt / 2.0)?;
    let k4 = eval(&(&y0 + &k3 * dt), t + dt)?;
    let y1 = y0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let mut next = unflatten(manifold, y1.as_slice(), t + dt)?;
    next.pose = next.pose.renormalized();
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt_physics: f64,
    /// Must be an integer multiple of `dt_physics`.
    pub dt_control: f64,
    pub duration: f64,
    /// Start at `η_r(0) ⊕ offset` instead of on the reference.
    pub initial_offset: Option<Tangent>,
    /// Constant wrench added to the actuator wrench.
    pub disturbance: Option<Cotangent>,
    /// Standard deviation of additive Gaussian noise on measured actuator values.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_physics: 2.5e-4,
            dt_control: 1e-3,
            duration: 5.0,
            initial_offset: None,
            disturbance: None,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Physics substeps per control tick.
    pub fn substeps(&self) -> Result<usize> {
        if !(self.dt_physics > 0.0) || !(self.dt_control >= self.dt_physics) || !(self.duration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt_physics <= dt_control and duration > 0 (got {}, {}, {})",
                self.dt_physics, self.dt_control, self.duration
            )));
        }
        let ratio = self.dt_control / self.dt_physics;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::InvalidParameter(format!(
                "dt_control {} is not a multiple of dt_physics {}",
                self.dt_control, self.dt_physics
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise sigma {}", self.noise_sigma)));
        }
        Ok(ratio.round() as usize)
    }
}

/// What the loop saw on one control tick.
#[derive(Debug)]
pub struct Tick<'a> {
    pub plant: &'a PlantState,
    pub measured: &'a ActuatorVector,
    pub reference: &'a ReferenceSample,
    pub report: &'a StepReport,
}

/// Closed-loop run with ideal (optionally noisy) sensing. One trace row per
/// control tick; the run stops after the first brake.
pub fn run_closed_loop(controller: &SystemController, reference: &dyn Reference, sim: &SimConfig) -> Result<TraceLog> {
    run_closed_loop_observed(controller, reference, sim, &mut |_| {})
}

/// [`run_closed_loop`] with a callback on every tick.
pub fn run_closed_loop_observed(
    controller: &SystemController,
    reference: &dyn Reference,
    sim: &SimConfig,
    observer: &mut dyn FnMut(&Tick),
) -> Result<TraceLog> {
    let substeps = sim.substeps()?;
    let model = controller.model();
    let (dim, n) = (model.dim(), model.n());
    let ticks = (sim.duration / sim.dt_control).round() as usize;

    let start = reference.sample(0.0);
    let mut plant = PlantState {
        pose: match &sim.initial_offset {
            Some(off) => {
                check_len("initial offset", dim, off.len())?;
                start.pose.retract(off)
            }
            None => start.pose.clone(),
        },
        twist: start.velocity.clone(),
        t: 0.0,
    };
    if let Some(w) = &sim.disturbance {
        check_len("disturbance wrench", dim, w.len())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let noise = Normal::new(0.0, sim.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut state = controller.initial_state();
    let mut log = TraceLog::new(dim, n);
    for k in 0..=ticks {
        let t = k as f64 * sim.dt_control;
        plant.t = t;
        let mut measured = kinematics::inverse_kinematics(&model.geometry, &plant.pose)?;
        if sim.noise_sigma > 0.0 {
            for v in measured.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
        let sample = reference.sample(t);
        let (report, next) = controller.step(&state, &measured, &sample)?;
        state = next;
        observer(&Tick {
            plant: &plant,
            measured: &measured,
            reference: &sample,
            report: &report,
        });
        log.push(trace_row(model, &plant, &sample, &report)?)?;

        let f_c = match &report.command {
            Command::Forces(f) => f.clone(),
            Command::Brake => break,
        };
        if k == ticks {
            break;
        }
        for _ in 0..substeps {
            plant = step_plant(model, &plant, &f_c, sim.disturbance.as_ref(), sim.dt_physics)?;
        }
    }
    Ok(log)
}

fn trace_row(model: &RobotModel, plant: &PlantState, sample: &ReferenceSample, report: &StepReport) -> Result<TraceRow> {
    let theta_d = report
        .theta_d()
        .cloned()
        .unwrap_or_else(|| plant.pose.difference(&sample.pose));
    let at = report.evaluation_pose.as_ref().unwrap_or(&plant.pose);
    let modes = dynamics::modal_decomposition(model, at)?.project(&theta_d);
    let (f_c, tensions) = match &report.command {
        Command::Forces(f) => (
            f.iter().copied().collect(),
            report.tensions().map_or_else(|| vec![0.0; model.n()], |t| t.iter().copied().collect()),
        ),
        Command::Brake => (vec![0.0; model.n()], vec![0.0; model.n()]),
    };
    Ok(TraceRow {
        t: plant.t,
        eta: plant.pose.chart_coordinates(),
        eta_r: sample.pose.chart_coordinates(),
        theta_d: theta_d.iter().copied().collect(),
        modes,
        f_c,
        tensions,
        brake: report.command.is_brake(),
    })
}

/// Summary numbers for a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingMetrics {
    /// Largest `|θ_d|`.
    pub max_error: f64,
    /// Root mean square of `|θ_d|`.
    pub rms_error: f64,
    /// Per mode, time from the first row until `|πᵢ·θ_d|` stays within 2% of
    /// its peak; infinite if it never does.
    pub settling_times: Vec<f64>,
    pub brake_events: usize,
}

pub fn tracking_metrics(trace: &TraceLog) -> Result<TrackingMetrics> {
    let rows = &trace.rows;
    let first = rows
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty trace".into()))?;
    let norms: Vec<f64> = rows
        .iter()
        .map(|r| r.theta_d.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let max_error = norms.iter().copied().fold(0.0, f64::max);
    let rms_error = (norms.iter().map(|v| v * v).sum::<f64>() / norms.len() as f64).sqrt();
    let settling_times = (0..trace.dim)
        .map(|i| {
            let peak = rows.iter().map(|r| r.modes[i].abs()).fold(0.0, f64::max);
            let threshold = 0.02 * peak;
            match rows.iter().rposition(|r| r.modes[i].abs() > threshold) {
                None => 0.0,
                Some(j) if j + 1 == rows.len() => f64::INFINITY,
                Some(j) => rows[j + 1].t - first.t,
            }
        })
        .collect();
    Ok(TrackingMetrics {
        max_error,
        rms_error,
        settling_times,
        brake_events: trace.brake_events(),
    })
}
