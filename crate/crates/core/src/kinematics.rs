//! Actuator-value map `L`, its derivative `Λ`, and forward kinematics.
//!
//! Actuator `k` runs from a fixed anchor `aₖ` (frame coordinates) to an
//! attachment point `bₖ` on the body (body coordinates). Its value is the
//! straight-line distance between the two:
//!
//! ```text
//! ℓₖ(η) = | p + R bₖ − aₖ |
//! ```
//!
//! Row `k` of `Λ` is `uₖ` for a point mass and `[uₖ, rₖ × uₖ]` for a rigid
//! body, with `uₖ` the unit anchor-to-attachment direction and `rₖ = R bₖ`.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{check_len, Error, Result};
use crate::manifold::{ActuatorVector, Manifold, Pose, Tangent};

/// Below this length an actuator's direction is undefined.
pub const MIN_ACTUATOR_LENGTH: f64 = 1e-12;

/// Default step for the numerical derivatives in this crate.
pub const FD_STEP: f64 = 1e-6;

/// Anchors and attachments for `n` actuators on a given manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotGeometry {
    manifold: Manifold,
    anchors: Vec<Vector3<f64>>,
    attachments: Vec<Vector3<f64>>,
}

impl RobotGeometry {
    /// Build a geometry. Point-mass (Euclidean) models must have zero
    /// attachments; anchors of a `d`-dimensional point mass may only use their
    /// first `d` coordinates.
    pub fn new(
        manifold: Manifold,
        anchors: Vec<Vector3<f64>>,
        attachments: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::InvalidParameter("at least one actuator is required".into()));
        }
        check_len("attachments", anchors.len(), attachments.len())?;
        if let Manifold::Euclidean(d) = manifold {
            if !(1..=3).contains(&d) {
                return Err(Error::InvalidParameter(format!("euclidean dimension {d}")));
            }
            for (k, (a, b)) in anchors.iter().zip(&attachments).enumerate() {
                if b.norm() != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "actuator {k}: point-mass models take no attachment offset"
                    )));
                }
                if a.iter().skip(d).any(|c| *c != 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "actuator {k}: anchor has components beyond dimension {d}"
                    )));
                }
            }
        }
        if anchors
            .iter()
            .chain(&attachments)
            .any(|v| v.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidParameter("non-finite geometry".into()));
        }
        Ok(Self {
            manifold,
            anchors,
            attachments,
        })
    }

    /// Point-mass geometry from anchors given in `d` coordinates.
    pub fn point_mass(anchors: &[&[f64]]) -> Result<Self> {
        let d = anchors.first().map_or(0, |a| a.len());
        let mut out = Vec::with_capacity(anchors.len());
        for a in anchors {
            check_len("anchor", d, a.len())?;
            let mut v = Vector3::zeros();
            for (i, c) in a.iter().enumerate() {
                v[i] = *c;
            }
            out.push(v);
        }
        let n = out.len();
        Self::new(Manifold::Euclidean(d), out, vec![Vector3::zeros(); n])
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    /// Number of actuators.
    pub fn n(&self) -> usize {
        self.anchors.len()
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    pub fn anchors(&self) -> &[Vector3<f64>] {
        &self.anchors
    }

    pub fn attachments(&self) -> &[Vector3<f64>] {
        &self.attachments
    }

    fn check_pose(&self, pose: &Pose) -> Result<()> {
        check_len("pose dimension", self.dim(), pose.dim())?;
        if pose.manifold() != self.manifold {
            return Err(Error::InvalidParameter("pose on a different manifold".into()));
        }
        Ok(())
    }

    /// Per actuator: vector from anchor to attachment, and the world-frame
    /// attachment offset `R bₖ`.
    fn spans(&self, pose: &Pose) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        let p = pose.position3();
        let r = pose.orientation();
        self.anchors
            .iter()
            .zip(&self.attachments)
            .map(|(a, b)| {
                let offset = r * b;
                (p + offset - a, offset)
            })
            .collect()
    }
}

/// `L(η)`: actuator values at a pose.
pub fn inverse_kinematics(geom: &RobotGeometry, pose: &Pose) -> Result<ActuatorVector> {
    geom.check_pose(pose)?;
    let lengths: Vec<f64> = geom.spans(pose).iter().map(|(s, _)| s.norm()).collect();
    for (k, l) in lengths.iter().enumerate() {
        if *l < MIN_ACTUATOR_LENGTH {
            return Err(Error::DegenerateGeometry {
                actuator: k,
                length: *l,
            });
        }
    }
    Ok(ActuatorVector::from(lengths))
}

/// `Λ_η`, the `n × d_M` derivative of the actuator values.
pub fn jacobian(geom: &RobotGeometry, pose: &Pose) -> Result<DMatrix<f64>> {
    geom.check_pose(pose)?;
    let dim = geom.dim();
    let mut lambda = DMatrix::zeros(geom.n(), dim);
    for (k, (span, offset)) in geom.spans(pose).iter().enumerate() {
        let len = span.norm();
        if len < MIN_ACTUATOR_LENGTH {
            return Err(Error::DegenerateGeometry {
                actuator: k,
                length: len,
            });
        }
        let u = span / len;
        match geom.manifold {
            Manifold::Euclidean(d) => {
                for i in 0..d {
                    lambda[(k, i)] = u[i];
                }
            }
            Manifold::Rigid => {
                let m = offset.cross(&u);
                for i in 0..3 {
                    lambda[(k, i)] = u[i];
                    lambda[(k, 3 + i)] = m[i];
                }
            }
        }
    }
    Ok(lambda)
}

/// `ℓ̇ = Λ_η φ`.
pub fn actuator_rates(geom: &RobotGeometry, pose: &Pose, twist: &Tangent) -> Result<ActuatorVector> {
    let lambda = jacobian(geom, pose)?;
    check_len("twist", lambda.ncols(), twist.len())?;
    Ok(ActuatorVector(lambda * &twist.0))
}

/// The curvature term `φ·(dΛ/dη)φ`: the part of `ℓ̈` not explained by `Λα`.
///
/// Central differences of `Λ` along the flow of `φ` with step `h`, contracted
/// with `φ`.
pub fn jacobian_directional_derivative(
    geom: &RobotGeometry,
    pose: &Pose,
    twist: &Tangent,
) -> Result<ActuatorVector> {
    jacobian_directional_derivative_with_step(geom, pose, twist, FD_STEP)
}

pub fn jacobian_directional_derivative_with_step(
    geom: &RobotGeometry,
    pose: &Pose,
    twist: &Tangent,
    h: f64,
) -> Result<ActuatorVector> {
    geom.check_pose(pose)?;
    check_len("twist", geom.dim(), twist.len())?;
    let speed = twist.norm();
    if speed == 0.0 {
        // still surface degenerate geometry at the base pose
        jacobian(geom, pose)?;
        return Ok(ActuatorVector::zeros(geom.n()));
    }
    let dir = &twist.0 / speed;
    let ahead = jacobian(geom, &pose.retract(&(&dir * h)))?;
    let behind = jacobian(geom, &pose.retract(&(&dir * -h)))?;
    let d_lambda = (ahead - behind) / (2.0 * h);
    Ok(ActuatorVector(d_lambda * &twist.0 * speed))
}

/// Options for [`forward_kinematics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkOptions {
    pub max_iters: usize,
    /// Initial Levenberg damping.
    pub damping: f64,
    /// Stop once every component of the step is below this.
    pub step_tol: f64,
}

impl Default for FkOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            damping: 1e-10,
            step_tol: 1e-13,
        }
    }
}

/// Result of a forward-kinematics solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FkSolution {
    pub pose: Pose,
    /// `|L(η) − ℓ|₂` at the returned pose.
    pub residual: f64,
    pub iterations: usize,
}

/// `Y(ℓ)`: the pose whose actuator values best match `lengths` in the least
/// squares sense, by damped Gauss-Newton started at `guess`.
pub fn forward_kinematics(
    geom: &RobotGeometry,
    lengths: &ActuatorVector,
    guess: &Pose,
) -> Result<FkSolution> {
    forward_kinematics_with(geom, lengths, guess, FkOptions::default())
}

pub fn forward_kinematics_with(
    geom: &RobotGeometry,
    lengths: &ActuatorVector,
    guess: &Pose,
    opts: FkOptions,
) -> Result<FkSolution> {
    check_len("actuator values", geom.n(), lengths.len())?;
    let dim = geom.dim();

    let mut pose = guess.clone();
    let mut residual = inverse_kinematics(geom, &pose)?.0 - &lengths.0;
    let mut cost = residual.norm_squared();
    let mut damping = opts.damping;

    for iter in 0..opts.max_iters {
        if residual.amax() == 0.0 {
            return finish(geom, pose, residual.norm(), iter);
        }
        let lambda = jacobian(geom, &pose)?;
        let gradient = lambda.transpose() * &residual;
        let normal = lambda.transpose() * &lambda;

        let (step, trial, trial_residual, trial_cost) = loop {
            let h = &normal + DMatrix::identity(dim, dim) * damping;
            let Some(chol) = h.cholesky() else {
                damping *= 10.0;
                if damping > 1e12 {
                    return Err(Error::RankDeficient("forward kinematics normal equations".into()));
                }
                continue;
            };
            let step: DVector<f64> = -chol.solve(&gradient);
            let trial = pose.retract(&step).renormalized();
            let trial_residual = match inverse_kinematics(geom, &trial) {
                Ok(l) => l.0 - &lengths.0,
                Err(Error::DegenerateGeometry { .. }) => {
                    damping *= 10.0;
                    if damping > 1e12 {
                        return Err(Error::NoConvergence {
                            iterations: iter,
                            residual: cost.sqrt(),
                        });
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let trial_cost = trial_residual.norm_squared();
            if trial_cost <= cost {
                break (step, trial, trial_residual, trial_cost);
            }
            if step.amax() <= opts.step_tol {
                // no descent left to find at this resolution
                return finish(geom, pose, cost.sqrt(), iter);
            }
            damping *= 10.0;
            if damping > 1e12 {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    residual: cost.sqrt(),
                });
            }
        };

        pose = trial;
        residual = trial_residual;
        cost = trial_cost;
        damping = (damping / 10.0).max(opts.damping);
        if step.amax() <= opts.step_tol {
            return finish(geom, pose, cost.sqrt(), iter + 1);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        residual: cost.sqrt(),
    })
}

fn finish(geom: &RobotGeometry, pose: Pose, residual: f64, iterations: usize) -> Result<FkSolution> {
    if geom.n() < geom.dim() {
        return Err(Error::RankDeficient(format!(
            "{} actuators cannot determine {} coordinates",
            geom.n(),
            geom.dim()
        )));
    }
    let lambda = jacobian(geom, &pose)?;
    let sv = lambda.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-10 * smax.max(1.0)) {
        return Err(Error::RankDeficient(format!(
            "actuator Jacobian at the solution (smallest singular value {smin:e})"
        )));
    }
    Ok(FkSolution {
        pose,
        residual,
        iterations,
    })
}

/// Smallest singular value of `Λ` at a pose; the controllability check uses
/// this against `1e-8`.
pub fn min_singular_value(geom: &RobotGeometry, pose: &Pose) -> Result<f64> {
    if geom.n() < geom.dim() {
        return Ok(0.0);
    }
    Ok(jacobian(geom, pose)?.singular_values().min())
}
