#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use proptest::prelude::*;

use paractl::actuator::ActuatorParams;
use paractl::dynamics::{InertialParams, RobotModel};
use paractl::kinematics::{self, RobotGeometry};
use paractl::manifold::rotation_exp;
use paractl::{Manifold, Pose};

pub fn p3_geometry() -> RobotGeometry {
    RobotGeometry::point_mass(&[&[0.0, 0.0], &[4.0, 0.0], &[2.0, 3.0]]).unwrap()
}

pub fn p3_model(m0: f64, k0: f64, gravity: f64) -> RobotModel {
    RobotModel {
        geometry: p3_geometry(),
        inertial: InertialParams::point(1.0, m0)
            .unwrap()
            .with_gravity(Vector3::new(0.0, -gravity, 0.0)),
        actuator: ActuatorParams::ideal(m0, k0),
    }
}

/// Eight cables from the corners of a 4 m cube to the corners of a 0.6 m box.
/// Top and bottom cables cross over in opposite directions, which keeps the
/// box controllable and able to hold itself up with every cable taut.
pub fn rigid_geometry() -> RobotGeometry {
    let mut anchors = Vec::new();
    let mut attachments = Vec::new();
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                anchors.push(Vector3::new(2.0 * sx, 2.0 * sy, 2.0 * sz));
                attachments.push(Vector3::new(-0.3 * sx * sz, 0.3 * sy * sz, 0.3 * sz));
            }
        }
    }
    RobotGeometry::new(Manifold::Rigid, anchors, attachments).unwrap()
}

pub fn rigid_model(m0: f64, gravity: f64) -> RobotModel {
    RobotModel {
        geometry: rigid_geometry(),
        inertial: InertialParams::new(
            2.0,
            Matrix3::new(0.10, 0.01, 0.0, 0.01, 0.12, 0.0, 0.0, 0.0, 0.15),
            Vector3::new(0.0, 0.0, -gravity),
            m0,
        )
        .unwrap(),
        actuator: ActuatorParams::ideal(m0, 0.0),
    }
}

pub fn p3_pose() -> impl Strategy<Value = Pose> {
    (1.2..2.8f64, 0.3..1.5f64).prop_map(|(x, y)| Pose::euclidean(&[x, y]))
}

pub fn rigid_pose() -> impl Strategy<Value = Pose> {
    (prop::array::uniform3(-0.3..0.3f64), prop::array::uniform3(-0.25..0.25f64)).prop_map(|(p, w)| {
        let q = rotation_exp(&Vector3::from(w));
        Pose::rigid(p, [q.w, q.i, q.j, q.k])
    })
}

pub fn vector(n: usize, scale: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-scale..scale, n).prop_map(DVector::from_vec)
}

/// `Λ` by central differences of the actuator-value map.
pub fn jacobian_by_differences(geom: &RobotGeometry, pose: &Pose) -> DMatrix<f64> {
    let h = 1e-6;
    let dim = pose.dim();
    let mut out = DMatrix::zeros(geom.n(), dim);
    for j in 0..dim {
        let mut e = DVector::zeros(dim);
        e[j] = h;
        let plus = kinematics::inverse_kinematics(geom, &pose.retract(&e)).unwrap();
        let minus = kinematics::inverse_kinematics(geom, &pose.retract(&-e)).unwrap();
        out.set_column(j, &((plus.0 - minus.0) / (2.0 * h)));
    }
    out
}
