//! End-effector dynamics: `τ = M α + μ`.
//!
//! The Lagrangian is `l(η, φ) = ½ φᵀ M(η) φ − v(η)` with
//! `M = M_body + m_a ΛᵀΛ` (body inertia plus reflected actuator inertia) and
//! `v` the gravity potential of the body. The bias force `μ` is obtained from
//! the Euler-Lagrange expansion with the pose dependence of `M` taken by
//! central differences; for rigid poses, whose angular velocity is expressed in
//! the world frame, the rotational rows pick up the extra `−ω × p_ω` term of the
//! reduced equations.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use crate::actuator::ActuatorParams;
use crate::error::{check_len, Error, Result};
use crate::kinematics::{self, RobotGeometry, FD_STEP};
use crate::manifold::{ActuatorVector, Cotangent, Manifold, Pose, Tangent};

/// Body inertia, gravity and the actuator inertia reflected into `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct InertialParams {
    pub body_mass: f64,
    /// Body-frame inertia tensor about the body origin (rigid models only).
    pub inertia: Matrix3<f64>,
    pub gravity: Vector3<f64>,
    /// Effective actuator mass that appears in `M` as `m_a ΛᵀΛ`.
    pub reflected_mass: f64,
}

impl InertialParams {
    pub fn new(
        body_mass: f64,
        inertia: Matrix3<f64>,
        gravity: Vector3<f64>,
        reflected_mass: f64,
    ) -> Result<Self> {
        if !(body_mass > 0.0) || !body_mass.is_finite() {
            return Err(Error::InvalidParameter(format!("body mass {body_mass}")));
        }
        if !(reflected_mass >= 0.0) || !reflected_mass.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "reflected actuator mass {reflected_mass}"
            )));
        }
        if (inertia - inertia.transpose()).amax() > 1e-12 * inertia.amax().max(1.0) {
            return Err(Error::InvalidParameter("inertia tensor is not symmetric".into()));
        }
        if inertia.symmetric_eigenvalues().min() <= 0.0 {
            return Err(Error::InvalidParameter(
                "inertia tensor is not positive definite".into(),
            ));
        }
        Ok(Self {
            body_mass,
            inertia,
            gravity,
            reflected_mass,
        })
    }

    /// Point mass with no gravity.
    pub fn point(body_mass: f64, reflected_mass: f64) -> Result<Self> {
        Self::new(body_mass, Matrix3::identity(), Vector3::zeros(), reflected_mass)
    }

    pub fn with_gravity(mut self, gravity: Vector3<f64>) -> Self {
        self.gravity = gravity;
        self
    }
}

/// Everything the dynamics and controller need to know about a robot.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub geometry: RobotGeometry,
    pub inertial: InertialParams,
    pub actuator: ActuatorParams,
}

impl RobotModel {
    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn n(&self) -> usize {
        self.geometry.n()
    }

    fn body_mass_matrix(&self, pose: &Pose) -> DMatrix<f64> {
        let mb = self.inertial.body_mass;
        match self.geometry.manifold() {
            Manifold::Euclidean(d) => DMatrix::identity(d, d) * mb,
            Manifold::Rigid => {
                let r = pose.orientation().to_rotation_matrix();
                let world = r.matrix() * self.inertial.inertia * r.matrix().transpose();
                let mut m = DMatrix::zeros(6, 6);
                for i in 0..3 {
                    m[(i, i)] = mb;
                }
                m.view_mut((3, 3), (3, 3)).copy_from(&world);
                m
            }
        }
    }

    /// `∂v/∂η` for the gravity potential `v = −m_b g·p`.
    fn potential_gradient(&self) -> DVector<f64> {
        let g = -self.inertial.body_mass * self.inertial.gravity;
        let mut out = DVector::zeros(self.dim());
        let d = match self.geometry.manifold() {
            Manifold::Euclidean(d) => d,
            Manifold::Rigid => 3,
        };
        for i in 0..d {
            out[i] = g[i];
        }
        out
    }

    /// Gravity potential `v(η)`.
    pub fn potential(&self, pose: &Pose) -> f64 {
        -self.inertial.body_mass * self.inertial.gravity.dot(&pose.position3())
    }
}

/// `M(η) = M_body + m_a ΛᵀΛ`.
pub fn mass_matrix(model: &RobotModel, pose: &Pose) -> Result<DMatrix<f64>> {
    let lambda = kinematics::jacobian(&model.geometry, pose)?;
    Ok(model.body_mass_matrix(pose) + lambda.transpose() * &lambda * model.inertial.reflected_mass)
}

/// Kinetic plus potential energy.
pub fn total_energy(model: &RobotModel, pose: &Pose, twist: &Tangent) -> Result<f64> {
    let m = mass_matrix(model, pose)?;
    Ok(0.5 * twist.dot(&(m * &twist.0)) + model.potential(pose))
}

/// `μ(η, φ)` such that `τ = M α + μ` are the equations of motion.
pub fn bias_force(model: &RobotModel, pose: &Pose, twist: &Tangent) -> Result<Cotangent> {
    let dim = model.dim();
    check_len("twist", dim, twist.len())?;
    let h = FD_STEP;
    let m = mass_matrix(model, pose)?;
    let phi = &twist.0;
    let mut mu = model.potential_gradient();

    let speed = phi.norm();
    if speed > 0.0 {
        let dir = phi / speed;
        // Ṁφ along the flow of φ
        let ahead = mass_matrix(model, &pose.retract(&(&dir * h)))?;
        let behind = mass_matrix(model, &pose.retract(&(&dir * -h)))?;
        let m_dot = (ahead - behind) * (speed / (2.0 * h));
        mu += m_dot * phi;

        // −½ ∂(φᵀMφ)/∂η
        let mut e = DVector::zeros(dim);
        for i in 0..dim {
            e[i] = h;
            let plus = mass_matrix(model, &pose.retract(&e))?;
            e[i] = -h;
            let minus = mass_matrix(model, &pose.retract(&e))?;
            e[i] = 0.0;
            let dq = (phi.dot(&(plus * phi)) - phi.dot(&(minus * phi))) / (2.0 * h);
            mu[i] -= 0.5 * dq;
        }

        if let Manifold::Rigid = model.geometry.manifold() {
            let p = &m * phi;
            let omega = Vector3::new(phi[3], phi[4], phi[5]);
            let p_omega = Vector3::new(p[3], p[4], p[5]);
            let coadjoint = omega.cross(&p_omega);
            for i in 0..3 {
                mu[3 + i] -= coadjoint[i];
            }
        }
    }
    Ok(Cotangent(mu))
}

/// `α = M⁻¹(τ − μ)`.
pub fn forward_dynamics(
    model: &RobotModel,
    pose: &Pose,
    twist: &Tangent,
    wrench: &Cotangent,
) -> Result<Tangent> {
    check_len("wrench", model.dim(), wrench.len())?;
    let m = mass_matrix(model, pose)?;
    let mu = bias_force(model, pose, twist)?;
    let chol = m.cholesky().ok_or(Error::SingularMass)?;
    Ok(Tangent(chol.solve(&(&wrench.0 - mu.0))))
}

/// `f₀ = m₀ Λα + m₀ φ·(dΛ/dη)φ`: the forces the actuators would see if they
/// moved along the same `ℓ(t)` with nothing attached.
pub fn no_load_forces(
    model: &RobotModel,
    pose: &Pose,
    twist: &Tangent,
    accel: &Tangent,
) -> Result<ActuatorVector> {
    let lambda = kinematics::jacobian(&model.geometry, pose)?;
    check_len("acceleration", lambda.ncols(), accel.len())?;
    let curvature = kinematics::jacobian_directional_derivative(&model.geometry, pose, twist)?;
    let m0 = model.actuator.m0;
    Ok(ActuatorVector((lambda * &accel.0 + curvature.0) * m0))
}

/// Cable tensions `f₀ − f`.
pub fn cable_tensions(f0: &ActuatorVector, f: &ActuatorVector) -> Result<ActuatorVector> {
    check_len("actuator forces", f0.len(), f.len())?;
    Ok(ActuatorVector(&f0.0 - &f.0))
}

/// Eigenstructure of `N = M⁻¹ΛᵀΛ`.
///
/// Modes are sorted by decreasing eigenvalue (increasing modal mass). For each
/// mode `σᵢ` is the eigenvector and `πᵢ` the dual covector with `πᵢ·σⱼ = δᵢⱼ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalDecomposition {
    pub eigenvalues: Vec<f64>,
    /// `1/eigenvalue`; `f64::INFINITY` marks a clamped mode.
    pub modal_masses: Vec<f64>,
    pub sigma: Vec<Tangent>,
    pub pi: Vec<Cotangent>,
    /// Largest imaginary part among the eigenvalues of `N` computed directly
    /// from the non-symmetric matrix.
    pub max_imaginary: f64,
}

/// Eigenvalues at or below this are treated as zero (infinite modal mass).
pub const CLAMPED_EIGENVALUE: f64 = 1e-12;

impl ModalDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn is_clamped(&self, mode: usize) -> bool {
        self.modal_masses[mode].is_infinite()
    }

    /// `πᵢ·θ` for every mode.
    pub fn project(&self, theta: &Tangent) -> Vec<f64> {
        self.pi.iter().map(|p| p.pair(theta)).collect()
    }
}

/// The modal matrix `N = M⁻¹ΛᵀΛ`.
pub fn modal_matrix(model: &RobotModel, pose: &Pose) -> Result<DMatrix<f64>> {
    let lambda = kinematics::jacobian(&model.geometry, pose)?;
    let m = mass_matrix(model, pose)?;
    let chol = m.cholesky().ok_or(Error::SingularMass)?;
    Ok(chol.solve(&(lambda.transpose() * lambda)))
}

pub fn modal_decomposition(model: &RobotModel, pose: &Pose) -> Result<ModalDecomposition> {
    let lambda = kinematics::jacobian(&model.geometry, pose)?;
    let m = mass_matrix(model, pose)?;
    let dim = m.nrows();

    let m_eig = SymmetricEigen::new(m.clone());
    if m_eig.eigenvalues.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::SingularMass);
    }
    let sqrt_d = m_eig.eigenvalues.map(f64::sqrt);
    let v = &m_eig.eigenvectors;
    let m_half = v * DMatrix::from_diagonal(&sqrt_d) * v.transpose();
    let m_inv_half = v * DMatrix::from_diagonal(&sqrt_d.map(|s| 1.0 / s)) * v.transpose();

    let ltl = lambda.transpose() * &lambda;
    let n_tilde = &m_inv_half * &ltl * &m_inv_half;
    let n_tilde = (&n_tilde + n_tilde.transpose()) * 0.5;
    let eig = SymmetricEigen::new(n_tilde);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(dim);
    let mut modal_masses = Vec::with_capacity(dim);
    let mut sigma = Vec::with_capacity(dim);
    let mut pi = Vec::with_capacity(dim);
    for &i in &order {
        let mut vt: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        // sign: largest-magnitude component positive
        let imax = vt.iamax();
        if vt[imax] < 0.0 {
            vt = -vt;
        }
        let lam = eig.eigenvalues[i];
        eigenvalues.push(lam);
        modal_masses.push(if lam <= CLAMPED_EIGENVALUE {
            f64::INFINITY
        } else {
            1.0 / lam
        });
        let s = &m_inv_half * &vt;
        let p = &m_half * &vt;
        let scale = p.dot(&s);
        sigma.push(Tangent(s));
        pi.push(Cotangent(p / scale));
    }

    let n = m.cholesky().ok_or(Error::SingularMass)?.solve(&ltl);
    let max_imaginary = n
        .complex_eigenvalues()
        .iter()
        .map(|c| c.im.abs())
        .fold(0.0, f64::max);

    Ok(ModalDecomposition {
        eigenvalues,
        modal_masses,
        sigma,
        pi,
        max_imaginary,
    })
}

/// Smallest eigenvalue of `M − m₀ΛᵀΛ`; non-negative when the declared no-load
/// mass is consistent with the inertia in `M`.
pub fn psd_margin(model: &RobotModel, pose: &Pose) -> Result<f64> {
    let lambda = kinematics::jacobian(&model.geometry, pose)?;
    let m = mass_matrix(model, pose)?;
    let diff = m - lambda.transpose() * &lambda * model.actuator.m0;
    Ok(diff.symmetric_eigenvalues().min())
}
