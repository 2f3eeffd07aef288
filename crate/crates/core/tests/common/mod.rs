#![allow(dead_code)]

use std::f64::consts::PI;

use centroidal_core::model::{JointKind, JointSpec, LinkSpec, Model, ModelSpec, Origin};
use centroidal_core::spatial::{exp_se3, Mat3, Vec3};
use centroidal_core::{SpatialMotion, State, Transform, VelocityState};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec3(rng: &mut impl Rng, scale: f64) -> Vec3 {
    Vec3::from_fn(|_, _| rng.random_range(-scale..scale))
}

pub fn unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = vec3(rng, 1.0);
        if v.norm() > 0.1 {
            return v.normalize();
        }
    }
}

pub fn twist(rng: &mut impl Rng, scale: f64) -> SpatialMotion {
    SpatialMotion::new(vec3(rng, scale), vec3(rng, scale))
}

pub fn pose(rng: &mut impl Rng) -> Transform {
    exp_se3(&twist(rng, 2.0), 1.0)
}

pub fn shape(rng: &mut impl Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

pub fn state(rng: &mut impl Rng, model: &Model) -> (State, VelocityState) {
    let n = model.dof();
    (
        State::new(pose(rng), shape(rng, n, PI)),
        VelocityState::new(twist(rng, 1.0), shape(rng, n, 1.0)),
    )
}

/// Principal moments satisfying the triangle inequality, rotated at random.
fn inertia(rng: &mut impl Rng) -> [f64; 6] {
    let a: f64 = rng.random_range(0.2..1.5);
    let b: f64 = rng.random_range(0.2..1.5);
    let c = rng.random_range((a - b).abs() + 0.05..a + b - 0.05);
    let r = exp_se3(&SpatialMotion::new(Vec3::zeros(), vec3(rng, PI)), 1.0).rotation;
    let i: Mat3 = r * Mat3::from_diagonal(&Vec3::new(a, b, c)) * r.transpose();
    [
        i[(0, 0)],
        i[(0, 1)],
        i[(0, 2)],
        i[(1, 1)],
        i[(1, 2)],
        i[(2, 2)],
    ]
}

fn angles(rng: &mut impl Rng) -> [f64; 3] {
    [
        rng.random_range(-PI..PI),
        rng.random_range(-1.5..1.5),
        rng.random_range(-PI..PI),
    ]
}

/// Random kinematic tree with `joints` joints, mostly revolute.
pub fn random_tree(rng: &mut impl Rng, joints: usize) -> Model {
    let mut links = vec![LinkSpec::new(
        "l0",
        rng.random_range(0.5..3.0),
        vec3(rng, 0.3).into(),
        inertia(rng),
    )];
    let mut specs = Vec::new();
    for k in 1..=joints {
        links.push(LinkSpec::new(
            format!("l{k}"),
            rng.random_range(0.3..2.0),
            vec3(rng, 0.5).into(),
            inertia(rng),
        ));
        let parent = rng.random_range(0..k);
        specs.push(JointSpec {
            name: format!("j{k}"),
            parent: format!("l{parent}"),
            child: format!("l{k}"),
            kind: if rng.random_bool(0.8) {
                JointKind::Revolute
            } else {
                JointKind::Prismatic
            },
            origin: Origin {
                xyz: vec3(rng, 0.8).into(),
                rpy: angles(rng),
            },
            axis: unit(rng).into(),
        });
    }
    Model::from_spec(ModelSpec {
        base: "l0".into(),
        gravity: [0.0, 0.0, -9.81],
        links,
        joints: specs,
    })
    .expect("generated model is valid")
}

/// Serial chain whose joints all turn about the base z axis, with every
/// distal link axisymmetric about that axis and its CoM on it. The
/// connection is then constant and flat.
pub fn coaxial_chain(rng: &mut impl Rng, joints: usize) -> Model {
    let mut links = vec![LinkSpec::new(
        "l0",
        rng.random_range(0.5..3.0),
        vec3(rng, 0.3).into(),
        inertia(rng),
    )];
    let mut specs = Vec::new();
    for k in 1..=joints {
        let a = rng.random_range(0.3..1.2);
        let c = rng.random_range(0.2..1.5);
        links.push(LinkSpec::new(
            format!("l{k}"),
            rng.random_range(0.3..2.0),
            [0.0, 0.0, rng.random_range(-0.5..0.5)],
            [a, 0.0, 0.0, a, 0.0, c],
        ));
        specs.push(JointSpec {
            name: format!("j{k}"),
            parent: format!("l{}", k - 1),
            child: format!("l{k}"),
            kind: JointKind::Revolute,
            origin: Origin {
                xyz: [0.0, 0.0, rng.random_range(-1.0..1.0)],
                rpy: [0.0, 0.0, rng.random_range(-PI..PI)],
            },
            axis: [0.0, 0.0, if rng.random_bool(0.5) { 1.0 } else { -1.0 }],
        });
    }
    Model::from_spec(ModelSpec {
        base: "l0".into(),
        gravity: [0.0, 0.0, -9.81],
        links,
        joints: specs,
    })
    .expect("generated model is valid")
}

/// `log(a⁻¹ b)`, the body-frame difference of two poses.
pub fn body_difference(a: &Transform, b: &Transform) -> SpatialMotion {
    centroidal_core::spatial::log_se3(&a.inverse().compose(b))
}

/// State advanced by `ε` along `ν`: `(H exp(εv), s + εṡ)`.
pub fn advance(state: &State, nu: &VelocityState, eps: f64) -> State {
    State::new(
        state.pose.compose(&exp_se3(&nu.v, eps)),
        &state.s + &nu.sdot * eps,
    )
}
