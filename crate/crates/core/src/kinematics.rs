//! Forward kinematics, link Jacobians, centre of mass and conversions between
//! velocity representations.

use nalgebra::{DMatrix, DVector};

use crate::model::{Model, State, VelocityState};
use crate::spatial::{Mat6, SpatialMotion, Transform, Vec3};
use crate::Error;

/// How a frame velocity is expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    /// `^{L[A]} v`: world-frame velocity of the origin and world angular velocity.
    Mixed,
    /// `^L v`: body velocity, `H⁻¹Ḣ`.
    Left,
    /// `^A v`: spatial velocity, `ḢH⁻¹`.
    Right,
}

/// Poses `^B H_L` of every link relative to the base, indexed like the model's links.
pub fn base_link_poses(model: &Model, s: &DVector<f64>) -> Vec<Transform> {
    let mut poses = vec![Transform::identity(); model.num_links()];
    for &ji in &model.order {
        let j = &model.joints[ji];
        poses[j.child] = poses[j.parent].compose(&j.transform(s[ji]));
    }
    poses
}

/// World poses of every link.
#[derive(Clone, Debug)]
pub struct LinkPoses<'m> {
    model: &'m Model,
    poses: Vec<Transform>,
}

impl<'m> LinkPoses<'m> {
    pub fn pose(&self, link: &str) -> Result<&Transform, Error> {
        Ok(&self.poses[self.model.link_index(link)?])
    }

    pub fn by_index(&self, link: usize) -> &Transform {
        &self.poses[link]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Transform)> {
        self.model.link_names().zip(self.poses.iter())
    }

    pub fn into_vec(self) -> Vec<Transform> {
        self.poses
    }
}

pub fn forward_kinematics<'m>(model: &'m Model, state: &State) -> Result<LinkPoses<'m>, Error> {
    model.check_shape(&state.s)?;
    let poses = base_link_poses(model, &state.s)
        .into_iter()
        .map(|p| state.pose.compose(&p))
        .collect();
    Ok(LinkPoses { model, poses })
}

/// `^i J = [^i X | ^i S]` mapping `ν = (v, ṡ)` to a frame velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian {
    pub base: Mat6,
    pub shape: DMatrix<f64>,
    pub repr: Representation,
}

impl Jacobian {
    pub fn apply(&self, nu: &VelocityState) -> SpatialMotion {
        let v = self.base * nu.v.to_vector() + &self.shape * &nu.sdot;
        SpatialMotion::from_slice(v.as_slice())
    }

    /// The full `6 × (6 + n_J)` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.shape.ncols();
        let mut m = DMatrix::zeros(6, 6 + n);
        m.view_mut((0, 0), (6, 6)).copy_from(&self.base);
        m.view_mut((0, 6), (6, n)).copy_from(&self.shape);
        m
    }
}

/// Left (body) Jacobian of a frame rigidly attached to `link` at `offset`
/// (`^L H_F`), given the base-relative link poses.
pub(crate) fn left_frame_jacobian(
    model: &Model,
    base_poses: &[Transform],
    link: usize,
    offset: &Transform,
) -> Jacobian {
    let b_h_f = base_poses[link].compose(offset);
    let f_h_b = b_h_f.inverse();
    let mut shape = DMatrix::zeros(6, model.dof());
    let mut at = link;
    while let Some(ji) = model.parent_joint[at] {
        let j = &model.joints[ji];
        // ^F X_{C_j} S_j
        let f_h_c = f_h_b.compose(&base_poses[j.child]);
        let col = f_h_c.apply_motion(&j.subspace());
        shape.column_mut(ji).copy_from(&col.to_vector());
        at = j.parent;
    }
    Jacobian {
        base: f_h_b.motion_matrix(),
        shape,
        repr: Representation::Left,
    }
}

/// Re-expresses a left Jacobian of a frame with world pose `world`.
pub(crate) fn change_representation(
    jac: Jacobian,
    world: &Transform,
    repr: Representation,
) -> Jacobian {
    let m = match repr {
        Representation::Left => return jac,
        Representation::Right => world.motion_matrix(),
        Representation::Mixed => Transform::from_rotation(world.rotation).motion_matrix(),
    };
    Jacobian {
        base: m * jac.base,
        shape: DMatrix::from_iterator(6, 6, m.iter().copied()) * jac.shape,
        repr,
    }
}

pub fn link_jacobian(
    model: &Model,
    state: &State,
    link: &str,
    repr: Representation,
) -> Result<Jacobian, Error> {
    frame_jacobian(model, state, link, &Transform::identity(), repr)
}

/// Jacobian of a frame fixed to `link` at `offset` (`^L H_F`).
pub fn frame_jacobian(
    model: &Model,
    state: &State,
    link: &str,
    offset: &Transform,
    repr: Representation,
) -> Result<Jacobian, Error> {
    model.check_shape(&state.s)?;
    let li = model.link_index(link)?;
    let base_poses = base_link_poses(model, &state.s);
    let jac = left_frame_jacobian(model, &base_poses, li, offset);
    let world = state.pose.compose(&base_poses[li]).compose(offset);
    Ok(change_representation(jac, &world, repr))
}

/// CoM of the whole mechanism in base coordinates, `^B p_com`.
pub fn com_in_base(model: &Model, s: &DVector<f64>) -> Vec3 {
    com_from_poses(model, &base_link_poses(model, s))
}

pub(crate) fn com_from_poses(model: &Model, base_poses: &[Transform]) -> Vec3 {
    let weighted: Vec3 = base_poses
        .iter()
        .zip(&model.inertias)
        .map(|(p, i)| p.transform_point(&i.com) * i.mass)
        .sum();
    weighted / model.total_mass()
}

/// CoM in inertial coordinates, `^A p_com`.
pub fn com(model: &Model, state: &State) -> Result<Vec3, Error> {
    model.check_shape(&state.s)?;
    Ok(state.pose.transform_point(&com_in_base(model, &state.s)))
}

/// Converts the velocity of a frame with pose `pose = ^A H_B` between representations.
pub fn convert_velocity(
    v: &SpatialMotion,
    from: Representation,
    to: Representation,
    pose: &Transform,
) -> SpatialMotion {
    let rot = Transform::from_rotation(pose.rotation);
    let left = match from {
        Representation::Left => *v,
        Representation::Right => pose.inverse_apply_motion(v),
        Representation::Mixed => rot.inverse_apply_motion(v),
    };
    match to {
        Representation::Left => left,
        Representation::Right => pose.apply_motion(&left),
        Representation::Mixed => rot.apply_motion(&left),
    }
}
