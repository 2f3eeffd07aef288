//! Floating-base dynamics `M(q) ν̇ + C(q,ν)ν + G(q) = [0; τ] + Σ (^iJ)ᵀ ^i f`.
//!
//! The mass matrix is assembled from composite inertias expressed in the base
//! frame and partitioned as `[𝕃 𝔸; 𝔸ᵀ 𝕊]`. The bias `Cν + G` comes from a
//! Newton–Euler sweep with zero acceleration; `C` itself is never formed.

use nalgebra::{DMatrix, DVector};

use crate::kinematics::{
    base_link_poses, change_representation, left_frame_jacobian, Representation,
};
use crate::lie::{rkmk4_step, LieDerivative, LieState, Trivialization};
use crate::model::{Model, State, VelocityState};
use crate::spatial::{
    congruence, cross6, crossdual6, Mat3, Mat6, SpatialForce, SpatialMotion, Transform,
};
use crate::Error;

/// `M(s)` and its blocks, all expressed in the base frame `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct MassPartition {
    pub full: DMatrix<f64>,
    /// Locked inertia `_B𝕃_B`.
    pub locked: Mat6,
    /// Coupling `_B𝔸`, 6 × n_J.
    pub coupling: DMatrix<f64>,
    /// Joint-space block `𝕊`, n_J × n_J.
    pub shape: DMatrix<f64>,
}

impl MassPartition {
    fn from_blocks(locked: Mat6, coupling: DMatrix<f64>, shape: DMatrix<f64>) -> Self {
        let n = shape.nrows();
        let mut full = DMatrix::zeros(6 + n, 6 + n);
        full.view_mut((0, 0), (6, 6)).copy_from(&locked);
        full.view_mut((0, 6), (6, n)).copy_from(&coupling);
        full.view_mut((6, 0), (n, 6))
            .copy_from(&coupling.transpose());
        full.view_mut((6, 6), (n, n)).copy_from(&shape);
        Self {
            full,
            locked,
            coupling,
            shape,
        }
    }

    /// `_B J = 𝕃 v + 𝔸 ṡ`.
    pub fn base_momentum(&self, nu: &VelocityState) -> SpatialForce {
        let j = self.locked * nu.v.to_vector() + &self.coupling * &nu.sdot;
        SpatialForce::from_slice(j.as_slice())
    }

    /// Mechanical connection `𝒜 = 𝕃⁻¹𝔸` (6 × n_J).
    pub fn connection(&self) -> Result<DMatrix<f64>, Error> {
        let chol = self
            .locked
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("locked inertia"))?;
        let mut out = self.coupling.clone();
        for mut col in out.column_iter_mut() {
            let x = chol.solve(&col.fixed_rows::<6>(0).into_owned());
            col.copy_from(&x);
        }
        Ok(out)
    }

    pub fn kinetic_energy(&self, nu: &VelocityState) -> f64 {
        let v = nu.to_vector();
        0.5 * v.dot(&(&self.full * &v))
    }
}

/// Mass matrix partition at shape `s`. Depends on `s` only.
pub fn mass_partition(model: &Model, s: &DVector<f64>) -> Result<MassPartition, Error> {
    model.check_shape(s)?;
    Ok(partition_from_poses(model, &base_link_poses(model, s)))
}

pub(crate) fn partition_from_poses(model: &Model, poses: &[Transform]) -> MassPartition {
    let n = model.dof();
    // Link inertias in B, then accumulated into subtree composites.
    let mut composite: Vec<Mat6> = poses
        .iter()
        .zip(&model.inertias)
        .map(|(p, i)| congruence(&i.matrix(), p))
        .collect();
    for &ji in model.order.iter().rev() {
        let j = &model.joints[ji];
        let child = composite[j.child];
        composite[j.parent] += child;
    }
    let axes: Vec<nalgebra::Vector6<f64>> = model
        .joints
        .iter()
        .map(|j| poses[j.child].apply_motion(&j.subspace()).to_vector())
        .collect();

    let mut coupling = DMatrix::zeros(6, n);
    let mut shape = DMatrix::zeros(n, n);
    for (ji, j) in model.joints.iter().enumerate() {
        let f = composite[j.child] * axes[ji];
        coupling.column_mut(ji).copy_from(&f);
        // Walk the joint's ancestors (itself included).
        let mut at = Some(ji);
        while let Some(ki) = at {
            let value = axes[ki].dot(&f);
            shape[(ji, ki)] = value;
            shape[(ki, ji)] = value;
            at = model.parent_joint[model.joints[ki].parent];
        }
    }
    MassPartition::from_blocks(composite[model.base], coupling, shape)
}

/// `Σ_L J_Lᵀ M_L J_L` with left link Jacobians. Independent of the composite
/// assembly; used to cross-check it.
pub fn mass_matrix_from_jacobians(model: &Model, s: &DVector<f64>) -> Result<DMatrix<f64>, Error> {
    model.check_shape(s)?;
    let poses = base_link_poses(model, s);
    let n = model.dof();
    let mut m = DMatrix::zeros(6 + n, 6 + n);
    for (l, inertia) in model.inertias.iter().enumerate() {
        let j = left_frame_jacobian(model, &poses, l, &Transform::identity()).matrix();
        let ml = DMatrix::from_iterator(6, 6, inertia.matrix().iter().copied());
        m += j.transpose() * ml * j;
    }
    Ok(m)
}

/// A wrench applied at a frame fixed to a link.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalWrench {
    pub link: String,
    /// Contact frame relative to the link, `^L H_C`.
    pub contact: Transform,
    /// Wrench expressed in the mixed frame `C[A]` (contact origin, inertial axes).
    pub wrench: SpatialForce,
}

impl ExternalWrench {
    pub fn new(link: impl Into<String>, contact: Transform, wrench: SpatialForce) -> Self {
        Self {
            link: link.into(),
            contact,
            wrench,
        }
    }
}

/// `Σ (^iJ)ᵀ ^i f` using mixed contact Jacobians.
pub fn contact_generalized_force(
    model: &Model,
    state: &State,
    wrenches: &[ExternalWrench],
) -> Result<DVector<f64>, Error> {
    model.check_shape(&state.s)?;
    let poses = base_link_poses(model, &state.s);
    let mut out = DVector::zeros(6 + model.dof());
    for w in wrenches {
        let li = model.link_index(&w.link)?;
        let jac = left_frame_jacobian(model, &poses, li, &w.contact);
        let world = state.pose.compose(&poses[li]).compose(&w.contact);
        let jac = change_representation(jac, &world, Representation::Mixed);
        out +=
            jac.matrix().transpose() * DVector::from_column_slice(w.wrench.to_vector().as_slice());
    }
    Ok(out)
}

/// Per-link gravity wrench in link coordinates, about the link origin.
pub(crate) fn link_gravity_wrench(
    model: &Model,
    link: usize,
    world_rotation: &Mat3,
) -> SpatialForce {
    let i = &model.inertias[link];
    let f = world_rotation.transpose() * model.gravity() * i.mass;
    SpatialForce::new(f, i.com.cross(&f))
}

/// `C(q,ν)ν + G(q)`: inverse dynamics at zero acceleration.
pub fn bias_and_gravity(
    model: &Model,
    state: &State,
    nu: &VelocityState,
) -> Result<DVector<f64>, Error> {
    model.check_shape(&state.s)?;
    model.check_shape(&nu.sdot)?;
    let nl = model.num_links();
    let mut vel = vec![SpatialMotion::zero(); nl];
    let mut acc = vec![SpatialMotion::zero(); nl];
    let mut rot = vec![Mat3::identity(); nl];
    let mut parent_to_child = vec![Transform::identity(); nl];
    vel[model.base] = nu.v;
    rot[model.base] = state.pose.rotation;
    for &ji in &model.order {
        let j = &model.joints[ji];
        let (p, c) = (j.parent, j.child);
        let x = j.transform(state.s[ji]);
        let sq = j.subspace() * nu.sdot[ji];
        vel[c] = x.inverse_apply_motion(&vel[p]) + sq;
        acc[c] = x.inverse_apply_motion(&acc[p]) + cross6(&vel[c], &sq);
        rot[c] = rot[p] * x.rotation;
        parent_to_child[c] = x;
    }
    let mut force: Vec<SpatialForce> = (0..nl)
        .map(|l| {
            let inertia = &model.inertias[l];
            inertia.momentum(&acc[l]) + crossdual6(&vel[l], &inertia.momentum(&vel[l]))
                - link_gravity_wrench(model, l, &rot[l])
        })
        .collect();
    let mut out = DVector::zeros(6 + model.dof());
    for &ji in model.order.iter().rev() {
        let j = &model.joints[ji];
        out[6 + ji] = j.subspace().dot(&force[j.child]);
        let up = parent_to_child[j.child].apply_force(&force[j.child]);
        force[j.parent] += up;
    }
    out.fixed_rows_mut::<6>(0)
        .copy_from(&force[model.base].to_vector());
    Ok(out)
}

/// Generalized accelerations `ν̇` of the forced floating-base equations.
pub fn forward_dynamics(
    model: &Model,
    state: &State,
    nu: &VelocityState,
    tau: &DVector<f64>,
    wrenches: &[ExternalWrench],
) -> Result<DVector<f64>, Error> {
    model.check_shape(tau)?;
    let partition = mass_partition(model, &state.s)?;
    forward_dynamics_with(model, &partition, state, nu, tau, wrenches)
}

fn forward_dynamics_with(
    model: &Model,
    partition: &MassPartition,
    state: &State,
    nu: &VelocityState,
    tau: &DVector<f64>,
    wrenches: &[ExternalWrench],
) -> Result<DVector<f64>, Error> {
    let mut rhs = -bias_and_gravity(model, state, nu)?;
    for (i, t) in tau.iter().enumerate() {
        rhs[6 + i] += t;
    }
    if !wrenches.is_empty() {
        rhs += contact_generalized_force(model, state, wrenches)?;
    }
    let chol = partition
        .full
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("mass matrix"))?;
    Ok(chol.solve(&rhs))
}

/// Joint torques and external wrenches acting during a simulation.
pub trait Forcing: Sync {
    fn torques(&self, _t: f64, state: &State, _nu: &VelocityState) -> DVector<f64> {
        DVector::zeros(state.s.len())
    }

    fn wrenches(&self, _t: f64) -> Vec<ExternalWrench> {
        Vec::new()
    }
}

/// No torques, no external wrenches.
#[derive(Clone, Copy, Debug, Default)]
pub struct Unforced;

impl Forcing for Unforced {}

/// A wrench switched on over `[start, end]` with a `sin²` ramp of length
/// `ramp` at both ends, so the applied force is continuously differentiable.
#[derive(Clone, Debug)]
pub struct ScheduledWrench {
    pub wrench: ExternalWrench,
    pub start: f64,
    pub end: f64,
    pub ramp: f64,
}

impl ScheduledWrench {
    pub fn envelope(&self, t: f64) -> f64 {
        if t <= self.start || t >= self.end {
            return 0.0;
        }
        let edge = (t - self.start).min(self.end - t);
        if self.ramp <= 0.0 || edge >= self.ramp {
            1.0
        } else {
            (std::f64::consts::FRAC_PI_2 * edge / self.ramp)
                .sin()
                .powi(2)
        }
    }

    pub fn at(&self, t: f64) -> Option<ExternalWrench> {
        let k = self.envelope(t);
        (k != 0.0).then(|| ExternalWrench {
            wrench: self.wrench.wrench * k,
            ..self.wrench.clone()
        })
    }
}

/// Zero joint torques plus a list of scheduled wrenches.
#[derive(Clone, Debug, Default)]
pub struct WrenchSchedule(pub Vec<ScheduledWrench>);

impl Forcing for WrenchSchedule {
    fn wrenches(&self, t: f64) -> Vec<ExternalWrench> {
        self.0.iter().filter_map(|w| w.at(t)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: State,
    pub velocity: VelocityState,
}

/// Number of fixed steps covering `[0, t_end]` and the step that lands
/// exactly on `t_end`.
pub(crate) fn step_count(t_end: f64, dt: f64) -> Result<(usize, f64), Error> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_end must be non-negative, got {t_end}"
        )));
    }
    let steps = (t_end / dt).round() as usize;
    Ok(if steps == 0 {
        (0, dt)
    } else {
        (steps, t_end / steps as f64)
    })
}

fn pack(n: usize, s: &DVector<f64>, nu: &VelocityState) -> DVector<f64> {
    let mut y = DVector::zeros(2 * n + 6);
    y.rows_mut(0, n).copy_from(s);
    y.rows_mut(n, 6 + n).copy_from(&nu.to_vector());
    y
}

fn unpack(n: usize, pose: Transform, y: &DVector<f64>) -> (State, VelocityState) {
    let s = y.rows(0, n).into_owned();
    let nu = VelocityState::from_vector(&y.rows(n, 6 + n).into_owned());
    (State::new(pose, s), nu)
}

/// Integrates the dynamics with fixed-step RK4, advancing the base pose with
/// exponential updates. Optionally carries a centroidal frame `^A H_C`
/// driven by `^A v_loc`.
pub(crate) fn simulate_impl(
    model: &Model,
    state0: &State,
    nu0: &VelocityState,
    forcing: &dyn Forcing,
    t_end: f64,
    dt: f64,
    centroidal: Option<Transform>,
) -> Result<Vec<(Sample, Option<Transform>)>, Error> {
    model.check_shape(&state0.s)?;
    model.check_shape(&nu0.sdot)?;
    let (steps, dt) = step_count(t_end, dt)?;
    let n = model.dof();
    let sides: &[Trivialization] = if centroidal.is_some() {
        &[Trivialization::Left, Trivialization::Right]
    } else {
        &[Trivialization::Left]
    };
    let mut poses = vec![state0.pose];
    poses.extend(centroidal);
    let mut y = LieState {
        poses,
        vector: pack(n, &state0.s, nu0),
    };

    let rhs = |t: f64, ls: &LieState| -> Result<LieDerivative, Error> {
        let (state, nu) = unpack(n, ls.poses[0], &ls.vector);
        let partition = mass_partition(model, &state.s)?;
        let tau = forcing.torques(t, &state, &nu);
        let wrenches = forcing.wrenches(t);
        let acc = forward_dynamics_with(model, &partition, &state, &nu, &tau, &wrenches)?;
        let mut d = DVector::zeros(2 * n + 6);
        d.rows_mut(0, n).copy_from(&nu.sdot);
        d.rows_mut(n, 6 + n).copy_from(&acc);
        let mut twists = vec![nu.v];
        if ls.poses.len() > 1 {
            let a = partition.connection()?;
            let corr = &a * &nu.sdot;
            let v_loc = nu.v + SpatialMotion::from_slice(corr.as_slice());
            twists.push(state.pose.apply_motion(&v_loc));
        }
        if !d.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        Ok(LieDerivative { twists, vector: d })
    };

    let record = |t: f64, ls: &LieState| {
        let (state, velocity) = unpack(n, ls.poses[0], &ls.vector);
        (Sample { t, state, velocity }, ls.poses.get(1).copied())
    };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(record(0.0, &y));
    for k in 0..steps {
        let t = k as f64 * dt;
        y = rkmk4_step(sides, &y, t, dt, rhs)?;
        let t1 = (k + 1) as f64 * dt;
        let finite = y.vector.iter().all(|x| x.is_finite())
            && y.poses.iter().all(|p| {
                p.rotation
                    .iter()
                    .chain(p.origin.iter())
                    .all(|x| x.is_finite())
            });
        if !finite {
            return Err(Error::NonFinite { t: t1 });
        }
        out.push(record(t1, &y));
    }
    Ok(out)
}

pub fn simulate(
    model: &Model,
    state0: &State,
    nu0: &VelocityState,
    forcing: &dyn Forcing,
    t_end: f64,
    dt: f64,
) -> Result<Vec<Sample>, Error> {
    Ok(simulate_impl(model, state0, nu0, forcing, t_end, dt, None)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model, three_link};
    use crate::spatial::Vec3;

    fn single_body() -> Model {
        parse_model(
            r#"
base = "b"
gravity = [0.0, 0.0, 0.0]
[[links]]
name = "b"
mass = 2.0
com = [0.1, -0.2, 0.05]
inertia = [0.5, 0.01, 0.0, 0.8, 0.02, 1.1]
"#,
        )
        .unwrap()
    }

    #[test]
    fn single_body_partition_is_link_inertia() {
        let m = single_body();
        let p = mass_partition(&m, &DVector::zeros(0)).unwrap();
        assert!((p.locked - m.link_inertia(0).matrix()).amax() < 1e-15);
        assert_eq!(p.full.nrows(), 6);
    }

    #[test]
    fn crba_matches_jacobian_assembly() {
        let m = three_link(1.0);
        for s in [[0.0, 0.0], [0.7, -2.1], [3.0, 1.0]] {
            let s = DVector::from_row_slice(&s);
            let p = mass_partition(&m, &s).unwrap();
            let oracle = mass_matrix_from_jacobians(&m, &s).unwrap();
            assert!((&p.full - oracle).amax() < 1e-12);
        }
    }

    #[test]
    fn flat_mechanism_coupling_is_angular_and_constant() {
        let m = three_link(0.0);
        let a0 = mass_partition(&m, &DVector::zeros(2)).unwrap().coupling;
        for s in [[0.5, -1.0], [2.0, 3.0]] {
            let a = mass_partition(&m, &DVector::from_row_slice(&s))
                .unwrap()
                .coupling;
            assert!((&a - &a0).amax() < 1e-14);
            assert!(a.rows(0, 3).amax() < 1e-15);
        }
    }

    #[test]
    fn zero_velocity_zero_gravity_bias_vanishes() {
        let m = three_link(1.0).with_gravity(Vec3::zeros());
        let st = State::at_shape(DVector::from_vec(vec![0.3, 0.4]));
        let h = bias_and_gravity(&m, &st, &VelocityState::zero(2)).unwrap();
        assert_eq!(h.amax(), 0.0);
        let acc =
            forward_dynamics(&m, &st, &VelocityState::zero(2), &DVector::zeros(2), &[]).unwrap();
        assert_eq!(acc.amax(), 0.0);
    }

    #[test]
    fn gravity_bias_is_minus_total_weight_in_base() {
        let m = three_link(1.0);
        let pose = Transform::from_xyz_rpy([0.5, -1.0, 2.0], [0.3, -0.2, 0.9]);
        let s = DVector::from_vec(vec![0.8, -0.4]);
        let st = State::new(pose, s.clone());
        let h = bias_and_gravity(&m, &st, &VelocityState::zero(2)).unwrap();
        // Total weight at the CoM in A, pulled back to B.
        let p = pose.transform_point(&crate::kinematics::com_in_base(&m, &s));
        let w = m.gravity() * m.total_mass();
        let weight_a = SpatialForce::new(w, p.cross(&w));
        let weight_b = pose.inverse_apply_force(&weight_a);
        assert!((h.fixed_rows::<6>(0) + weight_b.to_vector()).amax() < 1e-12);
    }

    #[test]
    fn free_body_matches_newton_euler() {
        let m = single_body();
        let inertia = *m.link_inertia(0);
        let st = State::new(
            Transform::from_xyz_rpy([0.0; 3], [0.1, 0.2, 0.3]),
            DVector::zeros(0),
        );
        let v = SpatialMotion::new(Vec3::new(0.3, -0.1, 0.2), Vec3::new(1.0, -0.5, 0.7));
        let nu = VelocityState::new(v, DVector::zeros(0));
        // Wrench at the body frame, given in mixed coordinates.
        let f_mixed = SpatialForce::new(Vec3::new(1.0, 2.0, -0.5), Vec3::new(0.1, 0.0, 0.3));
        let w = ExternalWrench::new("b", Transform::identity(), f_mixed);
        let acc = forward_dynamics(&m, &st, &nu, &DVector::zeros(0), &[w]).unwrap();
        let f_body = Transform::from_rotation(st.pose.rotation).inverse_apply_force(&f_mixed);
        let rhs = f_body - crossdual6(&v, &inertia.momentum(&v));
        let expected = inertia.matrix().cholesky().unwrap().solve(&rhs.to_vector());
        assert!((acc.fixed_rows::<6>(0) - expected).amax() < 1e-12);
    }

    #[test]
    fn inverse_recovers_applied_forces() {
        let m = three_link(1.0);
        let st = State::new(
            Transform::from_xyz_rpy([1.0, 0.0, 0.0], [0.1, 0.2, 0.3]),
            DVector::from_vec(vec![0.4, -1.3]),
        );
        let nu = VelocityState::new(
            SpatialMotion::new(Vec3::new(0.2, 0.1, -0.3), Vec3::new(0.5, -0.4, 1.0)),
            DVector::from_vec(vec![0.7, -0.2]),
        );
        let tau = DVector::from_vec(vec![0.3, -0.8]);
        let wrench = ExternalWrench::new(
            "link2",
            Transform::from_translation(Vec3::new(0.5, 0.0, 0.0)),
            SpatialForce::new(Vec3::new(0.0, 1.0, 2.0), Vec3::new(0.1, 0.2, 0.0)),
        );
        let acc = forward_dynamics(&m, &st, &nu, &tau, std::slice::from_ref(&wrench)).unwrap();
        let p = mass_partition(&m, &st.s).unwrap();
        let lhs = &p.full * &acc + bias_and_gravity(&m, &st, &nu).unwrap();
        let mut applied = contact_generalized_force(&m, &st, &[wrench]).unwrap();
        applied[6] += tau[0];
        applied[7] += tau[1];
        assert!((lhs - applied).amax() < 1e-10);
    }

    #[test]
    fn rest_stays_at_rest() {
        let m = three_link(1.0).with_gravity(Vec3::zeros());
        let st = State::at_shape(DVector::from_vec(vec![0.2, 0.1]));
        let traj = simulate(&m, &st, &VelocityState::zero(2), &Unforced, 0.5, 0.01).unwrap();
        assert_eq!(traj.len(), 51);
        let last = traj.last().unwrap();
        assert_eq!(last.state, st);
        assert_eq!(last.velocity, VelocityState::zero(2));
    }

    #[test]
    fn envelope_ramps() {
        let w = ScheduledWrench {
            wrench: ExternalWrench::new("base", Transform::identity(), SpatialForce::zero()),
            start: 1.0,
            end: 3.0,
            ramp: 0.5,
        };
        assert_eq!(w.envelope(0.5), 0.0);
        assert_eq!(w.envelope(2.0), 1.0);
        assert!((w.envelope(1.25) - 0.5).abs() < 1e-12);
        assert_eq!(w.envelope(3.5), 0.0);
    }
}
