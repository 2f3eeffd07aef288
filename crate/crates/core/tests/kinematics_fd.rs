mod common;

use centroidal_core::kinematics::{
    com, convert_velocity, forward_kinematics, frame_jacobian, link_jacobian, Representation,
};
use centroidal_core::model::three_link;
use centroidal_core::spatial::log_se3;
use centroidal_core::{SpatialMotion, Transform};
use common::{advance, body_difference, rng, state};

const EPS: f64 = 1e-6;

/// FD velocity of every link along `ν` in the requested representation.
fn fd_velocity(a: &Transform, b: &Transform, repr: Representation) -> SpatialMotion {
    match repr {
        Representation::Left => body_difference(a, b) * (0.5 / EPS),
        Representation::Right => log_se3(&b.compose(&a.inverse())) * (0.5 / EPS),
        Representation::Mixed => {
            let body = body_difference(a, b) * (0.5 / EPS);
            let mid = a.compose(&centroidal_core::spatial::exp_se3(&body, EPS));
            SpatialMotion::new(
                (b.origin - a.origin) * (0.5 / EPS),
                mid.rotation * body.angular,
            )
        }
    }
}

#[test]
fn link_jacobians_match_finite_differences() {
    let mut r = rng(11);
    let models = [
        three_link(1.0),
        common::random_tree(&mut r, 4),
        common::random_tree(&mut r, 6),
    ];
    for model in &models {
        for _ in 0..20 {
            let (st, nu) = state(&mut r, model);
            let plus = forward_kinematics(model, &advance(&st, &nu, EPS)).unwrap();
            let minus = forward_kinematics(model, &advance(&st, &nu, -EPS)).unwrap();
            for name in model.link_names() {
                for repr in [
                    Representation::Left,
                    Representation::Right,
                    Representation::Mixed,
                ] {
                    let jac = link_jacobian(model, &st, name, repr).unwrap();
                    let fd = fd_velocity(minus.pose(name).unwrap(), plus.pose(name).unwrap(), repr);
                    let err = (jac.apply(&nu) - fd).to_vector().amax();
                    assert!(err <= 1e-5, "{name} {repr:?}: {err:e}");
                }
            }
        }
    }
}

#[test]
fn offset_frame_jacobian_is_transformed_link_jacobian() {
    let mut r = rng(12);
    let model = common::random_tree(&mut r, 5);
    let offset = common::pose(&mut r);
    for _ in 0..20 {
        let (st, nu) = state(&mut r, &model);
        let link = model.link_names().last().unwrap();
        let body = link_jacobian(&model, &st, link, Representation::Left)
            .unwrap()
            .apply(&nu);
        let frame = frame_jacobian(&model, &st, link, &offset, Representation::Left)
            .unwrap()
            .apply(&nu);
        assert!((offset.inverse_apply_motion(&body) - frame).norm() <= 1e-12);
        // The representations are related by the frame's world pose.
        let world = forward_kinematics(&model, &st)
            .unwrap()
            .pose(link)
            .unwrap()
            .compose(&offset);
        for repr in [Representation::Mixed, Representation::Right] {
            let direct = frame_jacobian(&model, &st, link, &offset, repr)
                .unwrap()
                .apply(&nu);
            let converted = convert_velocity(&frame, Representation::Left, repr, &world);
            assert!((direct - converted).norm() <= 1e-12);
        }
    }
}

#[test]
fn base_jacobian_is_the_base_velocity() {
    let mut r = rng(13);
    let model = common::random_tree(&mut r, 3);
    let base = model.link_names().next().unwrap().to_string();
    for _ in 0..20 {
        let (st, nu) = state(&mut r, &model);
        let v = link_jacobian(&model, &st, &base, Representation::Left)
            .unwrap()
            .apply(&nu);
        assert!((v - nu.v).norm() <= 1e-14);
    }
}

#[test]
fn com_moves_with_jacobian_weighted_velocity() {
    let mut r = rng(14);
    let model = common::random_tree(&mut r, 4);
    for _ in 0..20 {
        let (st, nu) = state(&mut r, &model);
        let fd = (com(&model, &advance(&st, &nu, EPS)).unwrap()
            - com(&model, &advance(&st, &nu, -EPS)).unwrap())
            * (0.5 / EPS);
        // Mass-weighted mixed velocities of the link CoMs.
        let fk = forward_kinematics(&model, &st).unwrap();
        let mut weighted = nalgebra::Vector3::zeros();
        for (i, (name, _)) in fk.iter().enumerate() {
            let inertia = model.link_inertia(i);
            let c = Transform::new(nalgebra::Matrix3::identity(), inertia.com);
            let v = frame_jacobian(&model, &st, name, &c, Representation::Mixed)
                .unwrap()
                .apply(&nu);
            weighted += v.linear * inertia.mass;
        }
        let analytic = weighted / model.total_mass();
        assert!((analytic - fd).amax() <= 1e-5);
    }
}
