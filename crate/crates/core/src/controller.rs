//! The control loop for an end effector driven by parallel actuators.
//!
//! Each tick:
//!
//! 1. take the reference `(η_r, φ_r, α_r)`;
//! 2. measure actuator values `ℓ`;
//! 3. recover the pose `η = Y(ℓ)` by forward kinematics;
//! 4. form `θ_d = ⊿(η, η_r)` and its derivative stack;
//! 5. command an acceleration with the single-actuator gains applied
//!    componentwise to tangent vectors: `α_c = α_r + Cξ + Dθ_d`;
//! 6. convert it to a wrench `τ_c = μ + M α_c`;
//! 7. compute the back-EMF feed-forward `f_b = k₀ Λ(η_r) φ_r`;
//! 8. compute the no-load forces `f₀`;
//! 9. if `(τ_c, f_b, f₀)` is in the wrench set command `f_c = F(τ_c, f_b, f₀) + f_b`,
//!    otherwise brake.
//!
//! Only `ℓ` is measurable, so derivatives of `θ_d` come from backward
//! differences over recent ticks, and the velocity `φ` used in `μ` and `f₀`
//! is the least-squares solution of `Λ φ = ℓ̇` with `ℓ̇` differenced likewise.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::actuator::{closed_loop_poles, ControllerGains};
use crate::distribution::{self, ForceConstraints};
use crate::dynamics::{self, RobotModel};
use crate::error::{check_len, Error, Result};
use crate::kinematics::{self, FkOptions};
use crate::manifold::{ActuatorVector, Cotangent, Pose, Tangent};
use nalgebra::Complex;

/// Where `M`, `μ`, `Λ`, the wrench set and `F` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvaluationPoint {
    /// At the measured pose and estimated velocity; `θ_d = ⊿(η, η_r)`.
    #[default]
    Measured,
    /// At the reference pose and velocity; `θ_d = −⊿(η_r, η)`.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOptions {
    pub evaluate_at: EvaluationPoint,
    pub fk: FkOptions,
    /// Number of `θ_d` samples kept for differencing.
    pub window: usize,
}

impl Default for ControllerOptions {
    fn default() -> Self {
        Self {
            evaluate_at: EvaluationPoint::Measured,
            fk: FkOptions::default(),
            window: 3,
        }
    }
}

/// One sample of the reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    pub t: f64,
    pub pose: Pose,
    pub velocity: Tangent,
    pub accel: Tangent,
}

impl ReferenceSample {
    /// Stationary reference at `pose`.
    pub fn hold(t: f64, pose: Pose) -> Self {
        let dim = pose.dim();
        Self {
            t,
            pose,
            velocity: Tangent::zeros(dim),
            accel: Tangent::zeros(dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Forces(ActuatorVector),
    Brake,
}

impl Command {
    pub fn is_brake(&self) -> bool {
        matches!(self, Command::Brake)
    }
}

/// Why the controller braked.
#[derive(Debug, Clone, PartialEq)]
pub enum BrakeReason {
    /// Latched from an earlier tick.
    Latched,
    /// Forward kinematics failed on the measurement.
    ForwardKinematics(Error),
    /// The commanded wrench left the wrench set.
    OutOfWorkspace,
}

/// Controller memory between ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemControllerState {
    /// Internal state `ξ`, one tangent vector per controller state.
    pub xi: Vec<Tangent>,
    /// Recent `θ_d`, newest first.
    pub history: VecDeque<Tangent>,
    pub previous_lengths: Option<ActuatorVector>,
    /// Last recovered pose, used as the next forward-kinematics guess.
    pub last_pose: Option<Pose>,
    pub brake: bool,
}

impl SystemControllerState {
    pub fn new(gains: &ControllerGains, dim: usize) -> Self {
        Self {
            xi: vec![Tangent::zeros(dim); gains.states()],
            history: VecDeque::new(),
            previous_lengths: None,
            last_pose: None,
            brake: false,
        }
    }

    /// Clear the brake latch and the differencing memory, keep `ξ`.
    pub fn reset_brake(&mut self) {
        self.brake = false;
        self.history.clear();
        self.previous_lengths = None;
    }
}

/// Everything computed during one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub command: Command,
    pub brake_reason: Option<BrakeReason>,
    /// Recovered pose `Y(ℓ)`.
    pub pose: Option<Pose>,
    /// `[θ_d, θ̇_d, …]`.
    pub theta_stack: Vec<Tangent>,
    pub velocity_estimate: Option<Tangent>,
    pub alpha_c: Option<Tangent>,
    pub tau_c: Option<Cotangent>,
    pub f_b: Option<ActuatorVector>,
    pub f_0: Option<ActuatorVector>,
    pub f_p: Option<ActuatorVector>,
    /// `Λ` at the evaluation point.
    pub lambda: Option<DMatrix<f64>>,
    /// Pose where `M`, `μ`, `Λ` were evaluated.
    pub evaluation_pose: Option<Pose>,
}

impl StepReport {
    fn braked(reason: BrakeReason) -> Self {
        Self {
            command: Command::Brake,
            brake_reason: Some(reason),
            pose: None,
            theta_stack: Vec::new(),
            velocity_estimate: None,
            alpha_c: None,
            tau_c: None,
            f_b: None,
            f_0: None,
            f_p: None,
            lambda: None,
            evaluation_pose: None,
        }
    }

    pub fn theta_d(&self) -> Option<&Tangent> {
        self.theta_stack.first()
    }

    /// Predicted tensions `f₀ − f_p`.
    pub fn tensions(&self) -> Option<ActuatorVector> {
        match (&self.f_0, &self.f_p) {
            (Some(f0), Some(fp)) => Some(ActuatorVector(&f0.0 - &fp.0)),
            _ => None,
        }
    }
}

/// `(Mξ)ᵢ = Σⱼ Mᵢⱼ ξⱼ` for a list of tangent vectors.
pub fn matrix_action(mtx: &DMatrix<f64>, v: &[Tangent]) -> Result<Vec<Tangent>> {
    check_len("tangent list", mtx.ncols(), v.len())?;
    let dim = v.first().map_or(0, |t| t.len());
    if let Some(bad) = v.iter().find(|t| t.len() != dim) {
        return Err(Error::DimensionMismatch {
            what: "tangent vector",
            expected: dim,
            got: bad.len(),
        });
    }
    Ok((0..mtx.nrows())
        .map(|i| {
            let mut acc = DVector::zeros(dim);
            for (j, t) in v.iter().enumerate() {
                acc.axpy(mtx[(i, j)], &t.0, 1.0);
            }
            Tangent(acc)
        })
        .collect())
}

/// The system controller: robot model, single-actuator gains, force limits
/// and a fixed control period.
#[derive(Debug, Clone)]
pub struct SystemController {
    model: RobotModel,
    gains: ControllerGains,
    constraints: ForceConstraints,
    options: ControllerOptions,
    dt: f64,
    phi: DMatrix<f64>,
    gamma: DVector<f64>,
}

impl SystemController {
    pub fn new(
        model: RobotModel,
        gains: ControllerGains,
        constraints: ForceConstraints,
        options: ControllerOptions,
        dt: f64,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("control period {dt}")));
        }
        check_len("constraints", model.n(), constraints.n())?;
        let window = options.window.max(gains.order()).max(2);
        let (phi, gamma) = gains.discretize(dt);
        Ok(Self {
            model,
            gains,
            constraints,
            options: ControllerOptions { window, ..options },
            dt,
            phi,
            gamma,
        })
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    pub fn constraints(&self) -> &ForceConstraints {
        &self.constraints
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn initial_state(&self) -> SystemControllerState {
        SystemControllerState::new(&self.gains, self.model.dim())
    }

    /// One pass of the control loop. Pure: the new state is returned.
    pub fn step(
        &self,
        state: &SystemControllerState,
        lengths: &ActuatorVector,
        reference: &ReferenceSample,
    ) -> Result<(StepReport, SystemControllerState)> {
        check_len("measured actuator values", self.model.n(), lengths.len())?;
        check_len("reference pose", self.model.dim(), reference.pose.dim())?;
        if state.brake {
            return Ok((StepReport::braked(BrakeReason::Latched), state.clone()));
        }
        let mut next = state.clone();
        let geom = &self.model.geometry;

        // measured pose
        let guess = state.last_pose.clone().unwrap_or_else(|| reference.pose.clone());
        let pose = match kinematics::forward_kinematics_with(geom, lengths, &guess, self.options.fk) {
            Ok(sol) => sol.pose,
            Err(e @ (Error::NoConvergence { .. } | Error::RankDeficient(_))) => {
                next.brake = true;
                return Ok((StepReport::braked(BrakeReason::ForwardKinematics(e)), next));
            }
            Err(e) => return Err(e),
        };

        // pose error and its derivatives
        let theta_d = match self.options.evaluate_at {
            EvaluationPoint::Measured => pose.difference(&reference.pose),
            EvaluationPoint::Reference => Tangent(-reference.pose.difference(&pose).0),
        };
        if next.history.is_empty() {
            next.history.extend(std::iter::repeat_n(theta_d.clone(), self.options.window));
        } else {
            next.history.push_front(theta_d.clone());
            next.history.truncate(self.options.window);
        }
        let theta_stack: Vec<Tangent> = (0..self.gains.order())
            .map(|j| backward_difference(&next.history, j, self.dt))
            .collect();

        // velocity estimate from actuator rates
        let lambda_measured = kinematics::jacobian(geom, &pose)?;
        let rates = match &state.previous_lengths {
            Some(prev) => (&lengths.0 - &prev.0) / self.dt,
            None => DVector::zeros(self.model.n()),
        };
        let velocity_estimate = Tangent(damped_least_squares(&lambda_measured, &rates));
        next.previous_lengths = Some(lengths.clone());
        next.last_pose = Some(pose.clone());

        // commanded acceleration
        let mut alpha_c = reference.accel.0.clone();
        for (d, theta) in self.gains.d.iter().zip(&theta_stack) {
            alpha_c.axpy(*d, &theta.0, 1.0);
        }
        for (c, xi) in self.gains.c.iter().zip(&state.xi) {
            alpha_c.axpy(*c, &xi.0, 1.0);
        }
        let alpha_c = Tangent(alpha_c);

        // ξ' = Φξ + Γθ_d
        if self.gains.states() > 0 {
            let phi_xi = matrix_action(&self.phi, &state.xi)?;
            next.xi = phi_xi
                .into_iter()
                .enumerate()
                .map(|(i, t)| Tangent(t.0 + &theta_d.0 * self.gamma[i]))
                .collect();
        }

        let (eval_pose, eval_velocity, lambda) = match self.options.evaluate_at {
            EvaluationPoint::Measured => (pose.clone(), velocity_estimate.clone(), lambda_measured),
            EvaluationPoint::Reference => (
                reference.pose.clone(),
                reference.velocity.clone(),
                kinematics::jacobian(geom, &reference.pose)?,
            ),
        };

        // command wrench
        let m = dynamics::mass_matrix(&self.model, &eval_pose)?;
        let mu = dynamics::bias_force(&self.model, &eval_pose, &eval_velocity)?;
        let tau_c = Cotangent(mu.0 + m * &alpha_c.0);

        // back-EMF feed-forward at the reference
        let reference_rates = kinematics::actuator_rates(geom, &reference.pose, &reference.velocity)?;
        let f_b = ActuatorVector(reference_rates.0 * self.gains.k0);

        let f_0 = dynamics::no_load_forces(&self.model, &eval_pose, &eval_velocity, &alpha_c)?;

        let mut report = StepReport {
            command: Command::Brake,
            brake_reason: None,
            pose: Some(pose),
            theta_stack,
            velocity_estimate: Some(velocity_estimate),
            alpha_c: Some(alpha_c),
            tau_c: Some(tau_c.clone()),
            f_b: Some(f_b.clone()),
            f_0: Some(f_0.clone()),
            f_p: None,
            lambda: Some(lambda.clone()),
            evaluation_pose: Some(eval_pose),
        };

        match distribution::distribute(&lambda, &tau_c, &f_b, &f_0, &self.constraints) {
            Ok(f_p) => {
                report.command = Command::Forces(ActuatorVector(&f_p.0 + &f_b.0));
                report.f_p = Some(f_p);
            }
            Err(Error::Infeasible) => {
                report.brake_reason = Some(BrakeReason::OutOfWorkspace);
                next.brake = true;
            }
            Err(e) => return Err(e),
        }
        Ok((report, next))
    }
}

/// `j`-th backward difference of the newest samples, divided by `dtʲ`.
fn backward_difference(history: &VecDeque<Tangent>, order: usize, dt: f64) -> Tangent {
    let dim = history[0].len();
    if order >= history.len() {
        return Tangent::zeros(dim);
    }
    let mut acc = DVector::zeros(dim);
    let mut binom = 1.0;
    for (i, sample) in history.iter().take(order + 1).enumerate() {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc.axpy(sign * binom, &sample.0, 1.0);
        binom = binom * (order - i) as f64 / (i + 1) as f64;
    }
    Tangent(acc / dt.powi(order as i32))
}

fn damped_least_squares(lambda: &DMatrix<f64>, rates: &DVector<f64>) -> DVector<f64> {
    let dim = lambda.ncols();
    let normal = lambda.transpose() * lambda + DMatrix::identity(dim, dim) * 1e-12;
    let rhs = lambda.transpose() * rates;
    normal
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(dim))
}

/// Closed-loop poles predicted for one decoupled error mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePrediction {
    pub modal_mass: f64,
    pub poles: Vec<Complex<f64>>,
}

/// For each mode of `N = M⁻¹ΛᵀΛ` at `pose`, the poles of the single-actuator
/// loop with the load mass replaced by the modal mass.
pub fn predicted_modal_response(
    model: &RobotModel,
    gains: &ControllerGains,
    pose: &Pose,
) -> Result<Vec<ModePrediction>> {
    let modes = dynamics::modal_decomposition(model, pose)?;
    modes
        .modal_masses
        .iter()
        .map(|&m| {
            Ok(ModePrediction {
                modal_mass: m,
                poles: closed_loop_poles(gains, &model.actuator.model, m)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuator::{pd_gains, ActuatorParams};
    use crate::dynamics::InertialParams;
    use crate::kinematics::RobotGeometry;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn fixture(gravity: f64, k0: f64) -> RobotModel {
        RobotModel {
            geometry: RobotGeometry::point_mass(&[&[0.0, 0.0], &[4.0, 0.0], &[2.0, 3.0]]).unwrap(),
            inertial: InertialParams::point(1.0, 0.1)
                .unwrap()
                .with_gravity(Vector3::new(0.0, -gravity, 0.0)),
            actuator: ActuatorParams::ideal(0.1, k0),
        }
    }

    fn controller(gravity: f64, t_min: f64) -> SystemController {
        let model = fixture(gravity, 0.0);
        SystemController::new(
            model,
            pd_gains(4.0, 4.0, 0.0, 0.1).unwrap(),
            ForceConstraints::uniform(3, t_min, 50.0).unwrap(),
            ControllerOptions::default(),
            1e-3,
        )
        .unwrap()
    }

    #[test]
    fn matrix_action_cases() {
        let a = Tangent::from_slice(&[1.0, 2.0]);
        let b = Tangent::from_slice(&[-1.0, 0.5]);
        let v = vec![a.clone(), b.clone()];
        assert_eq!(matrix_action(&DMatrix::identity(2, 2), &v).unwrap(), v);
        let zero = matrix_action(&DMatrix::zeros(2, 2), &v).unwrap();
        assert!(zero.iter().all(|t| t.norm() == 0.0));
        let out = matrix_action(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), &v).unwrap();
        assert_eq!(out[0].as_slice(), &[-1.0, 3.0]);
        assert_eq!(out[1].as_slice(), &[-1.0, 8.0]);
        assert!(matrix_action(&DMatrix::zeros(2, 3), &v).is_err());
    }

    #[test]
    fn backward_differences() {
        let h: VecDeque<Tangent> = [9.0, 4.0, 1.0].iter().map(|v| Tangent::from_slice(&[*v])).collect();
        assert_eq!(backward_difference(&h, 0, 0.5)[0], 9.0);
        assert_eq!(backward_difference(&h, 1, 0.5)[0], 10.0);
        assert_eq!(backward_difference(&h, 2, 0.5)[0], 8.0);
    }

    #[test]
    fn perfect_tracking_commands_nothing() {
        let c = controller(0.0, 0.0);
        let pose = Pose::euclidean(&[2.0, 1.0]);
        let lengths = kinematics::inverse_kinematics(&c.model().geometry, &pose).unwrap();
        let (report, _) = c
            .step(&c.initial_state(), &lengths, &ReferenceSample::hold(0.0, pose))
            .unwrap();
        assert!(report.theta_d().unwrap().norm() < 1e-12);
        assert!(report.tau_c.unwrap().norm() < 1e-12);
        match report.command {
            Command::Forces(f) => assert!(f.norm() < 1e-10),
            Command::Brake => panic!("unexpected brake"),
        }
    }

    #[test]
    fn static_hold_with_gravity() {
        let c = controller(9.81, 0.5);
        let pose = Pose::euclidean(&[2.0, 1.0]);
        let lengths = kinematics::inverse_kinematics(&c.model().geometry, &pose).unwrap();
        let (report, _) = c
            .step(&c.initial_state(), &lengths, &ReferenceSample::hold(0.0, pose))
            .unwrap();
        let tau = report.tau_c.clone().unwrap();
        assert_relative_eq!(tau[1], 9.81, epsilon = 1e-9);
        let Command::Forces(f) = report.command else {
            panic!("unexpected brake")
        };
        for (a, b) in f.iter().zip([-0.5, -0.5, -10.2572136]) {
            assert_relative_eq!(*a, b, epsilon = 1e-7);
        }
    }

    #[test]
    fn out_of_workspace_brakes_and_latches() {
        let c = controller(9.81, 0.5);
        let pose = Pose::euclidean(&[2.0, 1.0]);
        let lengths = kinematics::inverse_kinematics(&c.model().geometry, &pose).unwrap();
        let far = ReferenceSample::hold(0.0, Pose::euclidean(&[2.0, 40.0]));
        let (report, state) = c.step(&c.initial_state(), &lengths, &far).unwrap();
        assert!(report.command.is_brake());
        assert_eq!(report.brake_reason, Some(BrakeReason::OutOfWorkspace));
        assert!(state.brake);
        let near = ReferenceSample::hold(0.001, pose);
        let (again, state) = c.step(&state, &lengths, &near).unwrap();
        assert!(again.command.is_brake());
        assert_eq!(again.brake_reason, Some(BrakeReason::Latched));
        let mut reset = state;
        reset.reset_brake();
        let (after, _) = c.step(&reset, &lengths, &near).unwrap();
        assert!(!after.command.is_brake());
    }

    #[test]
    fn fixture_mode_predictions() {
        let model = fixture(0.0, 0.0);
        let preds = predicted_modal_response(&model, &pd_gains(4.0, 4.0, 0.0, 0.1).unwrap(), &Pose::euclidean(&[2.0, 1.0]))
            .unwrap();
        for p in &preds {
            for pole in &p.poles {
                assert!((pole.re + 2.0).abs() < 1e-6);
            }
        }
        let damped = fixture(0.0, 0.5);
        let preds = predicted_modal_response(&damped, &pd_gains(4.0, 4.0, 0.5, 0.1).unwrap(), &Pose::euclidean(&[2.0, 1.0]))
            .unwrap();
        for (p, m) in preds.iter().zip([0.725, 0.8142857]) {
            let damping: f64 = -p.poles.iter().map(|z| z.re).sum::<f64>();
            assert_relative_eq!(damping, 4.0 + 0.5 / m, epsilon = 1e-6);
        }
    }
}
