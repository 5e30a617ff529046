//! Configuration manifolds for the end effector.
//!
//! Two manifolds are supported: Euclidean space of dimension 1, 2 or 3 (a
//! point-mass end effector) and the six-dimensional space of rigid-body poses.
//! Tangent vectors for rigid poses stack linear velocity over the world-frame
//! angular velocity, so a perturbation `θ = [v; ω]` acts as
//!
//! ```text
//! p' = p + v,    q' = exp(ω) ⊗ q
//! ```
//!
//! and [`Pose::difference`] is its left inverse.

use std::fmt;
use std::ops::{Deref, DerefMut};

use nalgebra::{DVector, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Which configuration manifold a robot lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Manifold {
    /// ℝᵈ with `d ∈ {1, 2, 3}`.
    Euclidean(usize),
    /// Position plus orientation.
    Rigid,
}

impl Manifold {
    /// Dimension of the tangent space.
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Euclidean(d) => *d,
            Manifold::Rigid => 6,
        }
    }

    /// Parse the config selector (`euclidean1`, `euclidean2`, `euclidean3`, `se3`).
    pub fn from_selector(s: &str) -> Option<Self> {
        match s {
            "euclidean1" => Some(Manifold::Euclidean(1)),
            "euclidean2" => Some(Manifold::Euclidean(2)),
            "euclidean3" => Some(Manifold::Euclidean(3)),
            "se3" => Some(Manifold::Rigid),
            _ => None,
        }
    }

    pub fn selector(&self) -> &'static str {
        match self {
            Manifold::Euclidean(1) => "euclidean1",
            Manifold::Euclidean(2) => "euclidean2",
            Manifold::Euclidean(_) => "euclidean3",
            Manifold::Rigid => "se3",
        }
    }

    /// Identity element: origin, or origin with identity orientation.
    pub fn origin(&self) -> Pose {
        match self {
            Manifold::Euclidean(d) => Pose::Euclidean(DVector::zeros(*d)),
            Manifold::Rigid => Pose::Rigid {
                position: Vector3::zeros(),
                orientation: UnitQuaternion::identity(),
            },
        }
    }
}

macro_rules! real_vector_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub DVector<f64>);

        impl $name {
            pub fn zeros(n: usize) -> Self {
                Self(DVector::zeros(n))
            }

            pub fn from_slice(values: &[f64]) -> Self {
                Self(DVector::from_column_slice(values))
            }

            pub fn into_inner(self) -> DVector<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = DVector<f64>;
            fn deref(&self) -> &DVector<f64> {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut DVector<f64> {
                &mut self.0
            }
        }

        impl From<DVector<f64>> for $name {
            fn from(v: DVector<f64>) -> Self {
                Self(v)
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(DVector::from_vec(v))
            }
        }
    };
}

real_vector_newtype!(
    /// Element of the tangent space: velocity, acceleration or a pose difference.
    Tangent
);
real_vector_newtype!(
    /// Element of the cotangent space: a generalized force (wrench).
    Cotangent
);
real_vector_newtype!(
    /// One real per actuator: lengths, rates or forces.
    ActuatorVector
);

impl Cotangent {
    /// Virtual-work pairing with a tangent vector.
    pub fn pair(&self, t: &Tangent) -> f64 {
        self.0.dot(&t.0)
    }
}

/// End-effector configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Pose {
    Euclidean(DVector<f64>),
    Rigid {
        position: Vector3<f64>,
        orientation: UnitQuaternion<f64>,
    },
}

impl Pose {
    pub fn euclidean(coords: &[f64]) -> Self {
        Pose::Euclidean(DVector::from_column_slice(coords))
    }

    /// Rigid pose from a position and a (not necessarily normalized)
    /// quaternion given as `(w, x, y, z)`.
    pub fn rigid(position: [f64; 3], wxyz: [f64; 4]) -> Self {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Pose::Rigid {
            position: Vector3::from(position),
            orientation: UnitQuaternion::from_quaternion(q),
        }
    }

    pub fn manifold(&self) -> Manifold {
        match self {
            Pose::Euclidean(p) => Manifold::Euclidean(p.len()),
            Pose::Rigid { .. } => Manifold::Rigid,
        }
    }

    pub fn dim(&self) -> usize {
        self.manifold().dim()
    }

    /// World position of the body origin, padded with zeros to three components.
    pub fn position3(&self) -> Vector3<f64> {
        match self {
            Pose::Euclidean(p) => {
                let mut out = Vector3::zeros();
                for (i, v) in p.iter().enumerate().take(3) {
                    out[i] = *v;
                }
                out
            }
            Pose::Rigid { position, .. } => *position,
        }
    }

    pub fn orientation(&self) -> UnitQuaternion<f64> {
        match self {
            Pose::Euclidean(_) => UnitQuaternion::identity(),
            Pose::Rigid { orientation, .. } => *orientation,
        }
    }

    /// Flat coordinates: Euclidean coordinates, or position then
    /// quaternion `(w, x, y, z)`.
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Pose::Euclidean(p) => p.iter().copied().collect(),
            Pose::Rigid {
                position,
                orientation,
            } => {
                let q = orientation.quaternion();
                vec![position.x, position.y, position.z, q.w, q.i, q.j, q.k]
            }
        }
    }

    /// `d_M` numbers describing the pose: Euclidean coordinates, or position
    /// stacked with the rotation vector of the orientation.
    pub fn chart_coordinates(&self) -> Vec<f64> {
        match self {
            Pose::Euclidean(p) => p.iter().copied().collect(),
            Pose::Rigid {
                position,
                orientation,
            } => {
                let w = rotation_log(orientation);
                vec![position.x, position.y, position.z, w.x, w.y, w.z]
            }
        }
    }

    /// Inverse of [`Pose::to_vec`] for the given manifold.
    pub fn from_vec(manifold: Manifold, values: &[f64]) -> Option<Self> {
        match manifold {
            Manifold::Euclidean(d) if values.len() == d => Some(Pose::euclidean(values)),
            Manifold::Rigid if values.len() == 7 => {
                let norm = values[3..7].iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm > 0.0) || !norm.is_finite() {
                    return None;
                }
                Some(Pose::rigid(
                    [values[0], values[1], values[2]],
                    [values[3], values[4], values[5], values[6]],
                ))
            }
            _ => None,
        }
    }

    /// Move along a tangent vector: `η ⊕ θ`.
    ///
    /// Panics if `theta` has the wrong dimension.
    pub fn retract(&self, theta: &DVector<f64>) -> Pose {
        assert_eq!(theta.len(), self.dim(), "tangent dimension mismatch");
        match self {
            Pose::Euclidean(p) => Pose::Euclidean(p + theta),
            Pose::Rigid {
                position,
                orientation,
            } => {
                let v = Vector3::new(theta[0], theta[1], theta[2]);
                let w = Vector3::new(theta[3], theta[4], theta[5]);
                Pose::Rigid {
                    position: position + v,
                    orientation: rotation_exp(&w) * orientation,
                }
            }
        }
    }

    /// `⊿(self, other)`: the tangent vector at `self` pointing to `other`, so
    /// that `other ≈ self ⊕ ⊿(self, other)`. Rigid poses use the
    /// product-manifold logarithm (translation and rotation independently),
    /// choosing the rotation vector of magnitude at most π.
    ///
    /// Panics if the poses live on different manifolds.
    pub fn difference(&self, other: &Pose) -> Tangent {
        match (self, other) {
            (Pose::Euclidean(a), Pose::Euclidean(b)) => {
                assert_eq!(a.len(), b.len(), "pose dimension mismatch");
                Tangent(b - a)
            }
            (
                Pose::Rigid {
                    position: p1,
                    orientation: q1,
                },
                Pose::Rigid {
                    position: p2,
                    orientation: q2,
                },
            ) => {
                let dp = p2 - p1;
                let w = rotation_log(&(q2 * q1.inverse()));
                Tangent(DVector::from_column_slice(&[dp.x, dp.y, dp.z, w.x, w.y, w.z]))
            }
            _ => panic!("pose difference across manifolds"),
        }
    }

    /// Re-project the orientation onto the unit sphere.
    pub fn renormalized(&self) -> Pose {
        match self {
            Pose::Euclidean(_) => self.clone(),
            Pose::Rigid {
                position,
                orientation,
            } => Pose::Rigid {
                position: *position,
                orientation: UnitQuaternion::new_normalize(*orientation.quaternion()),
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_vec().iter().map(|v| format!("{v}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// `pose_difference` as a free function.
pub fn pose_difference(from: &Pose, to: &Pose) -> Tangent {
    from.difference(to)
}

/// Unit quaternion of the rotation vector `w`.
pub fn rotation_exp(w: &Vector3<f64>) -> UnitQuaternion<f64> {
    let angle = w.norm();
    let half = 0.5 * angle;
    // sin(θ/2)/θ
    let k = if angle < 1e-8 {
        0.5 - angle * angle / 48.0
    } else {
        half.sin() / angle
    };
    UnitQuaternion::new_unchecked(Quaternion::new(half.cos(), k * w.x, k * w.y, k * w.z))
}

/// Rotation vector (magnitude in `[0, π]`) of a unit quaternion.
pub fn rotation_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let mut w = q.quaternion().w;
    let mut v = q.quaternion().imag();
    if w < 0.0 {
        w = -w;
        v = -v;
    }
    let s = v.norm();
    if s < 1e-300 {
        return v * 2.0;
    }
    let angle = 2.0 * s.atan2(w);
    v * (angle / s)
}
