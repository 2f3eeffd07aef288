//! Total and centroidal momentum, locked and average velocities, and the
//! centroidal frame `C` obtained by integrating `^AḢ_C = ^A v_loc^ ^A H_C`.
//!
//! Frames: `A` inertial, `B` base, `G = (p_com, [A])`, `N = (p_com, [B])`.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{
    link_gravity_wrench, mass_partition, simulate_impl, step_count, ExternalWrench, Forcing,
    MassPartition,
};
use crate::kinematics::{base_link_poses, com_from_poses, com_in_base};
use crate::lie::{rkmk4_step, LieDerivative, LieState, Trivialization};
use crate::model::{Model, State, VelocityState};
use crate::path::ShapePath;
use crate::spatial::{congruence, Mat6, SpatialForce, SpatialMotion, Transform, Vec3};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameTag {
    /// Inertial frame.
    A,
    /// Base link frame.
    B,
    /// CoM origin, inertial orientation.
    G,
    /// CoM origin, base orientation.
    N,
    /// Centroidal frame.
    C,
}

/// A momentum together with the frame it is expressed in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Momentum {
    pub value: SpatialForce,
    pub frame: FrameTag,
}

/// `^A H_F` for `F ∈ {A, B, G, N}`.
pub fn frame_pose(model: &Model, state: &State, frame: FrameTag) -> Result<Transform, Error> {
    model.check_shape(&state.s)?;
    let com_b = com_in_base(model, &state.s);
    Ok(match frame {
        FrameTag::A => Transform::identity(),
        FrameTag::B => state.pose,
        FrameTag::G => Transform::from_translation(state.pose.transform_point(&com_b)),
        FrameTag::N => state.pose.compose(&Transform::from_translation(com_b)),
        FrameTag::C => {
            return Err(Error::InvalidArgument(
                "the centroidal frame depends on the motion history".into(),
            ))
        }
    })
}

fn unsupported(frame: FrameTag, op: &str) -> Error {
    Error::InvalidArgument(format!("{op} is not defined for frame {frame:?}"))
}

fn momentum_from(
    partition: &MassPartition,
    state: &State,
    nu: &VelocityState,
    com_a: &Vec3,
    frame: FrameTag,
) -> Result<Momentum, Error> {
    let jb = partition.base_momentum(nu);
    let value = match frame {
        FrameTag::B => jb,
        FrameTag::A => state.pose.apply_force(&jb),
        FrameTag::G => {
            Transform::from_translation(-com_a).apply_force(&state.pose.apply_force(&jb))
        }
        other => return Err(unsupported(other, "total momentum")),
    };
    Ok(Momentum { value, frame })
}

/// `_B J = 𝕃v + 𝔸ṡ`, `_A J = _AX^B _B J`, `_G J = _GX^A _A J`.
pub fn total_momentum(
    model: &Model,
    state: &State,
    nu: &VelocityState,
    frame: FrameTag,
) -> Result<Momentum, Error> {
    model.check_shape(&nu.sdot)?;
    let partition = mass_partition(model, &state.s)?;
    let com_a = state.pose.transform_point(&com_in_base(model, &state.s));
    momentum_from(&partition, state, nu, &com_a, frame)
}

fn locked_in_base(partition: &MassPartition, nu: &VelocityState) -> Result<SpatialMotion, Error> {
    let a = partition.connection()?;
    let corr = a * &nu.sdot;
    Ok(nu.v + SpatialMotion::from_slice(corr.as_slice()))
}

/// `^B v_loc = v + 𝕃⁻¹𝔸ṡ`, re-expressed in `A` or `N` on request.
pub fn locked_velocity(
    model: &Model,
    state: &State,
    nu: &VelocityState,
    frame: FrameTag,
) -> Result<SpatialMotion, Error> {
    model.check_shape(&nu.sdot)?;
    let partition = mass_partition(model, &state.s)?;
    let vb = locked_in_base(&partition, nu)?;
    match frame {
        FrameTag::B => Ok(vb),
        FrameTag::A => Ok(state.pose.apply_motion(&vb)),
        FrameTag::N => {
            let b_h_n = Transform::from_translation(com_in_base(model, &state.s));
            Ok(b_h_n.inverse_apply_motion(&vb))
        }
        other => Err(unsupported(other, "locked velocity")),
    }
}

/// `^G v_ave = ^GX_B ^B v_loc`.
pub fn average_velocity(
    model: &Model,
    state: &State,
    nu: &VelocityState,
) -> Result<SpatialMotion, Error> {
    let vb = locked_velocity(model, state, nu, FrameTag::B)?;
    let g_h_b = frame_pose(model, state, FrameTag::G)?
        .inverse()
        .compose(&state.pose);
    Ok(g_h_b.apply_motion(&vb))
}

/// `^G v_ave = _G𝕃_G⁻¹ _G J`, the route through the centroidal momentum.
pub fn average_velocity_from_momentum(
    model: &Model,
    state: &State,
    nu: &VelocityState,
) -> Result<SpatialMotion, Error> {
    let jg = total_momentum(model, state, nu, FrameTag::G)?;
    let lg = locked_inertia_at(model, state, FrameTag::G)?;
    let chol = lg
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("locked inertia"))?;
    Ok(SpatialMotion::from_vector(
        &chol.solve(&jg.value.to_vector()),
    ))
}

/// `_F𝕃_F = _FX^B _B𝕃_B ^BX_F`.
pub fn locked_inertia_at(model: &Model, state: &State, frame: FrameTag) -> Result<Mat6, Error> {
    let partition = mass_partition(model, &state.s)?;
    let f_h_b = match frame {
        FrameTag::B => Transform::identity(),
        FrameTag::A | FrameTag::G | FrameTag::N => frame_pose(model, state, frame)?
            .inverse()
            .compose(&state.pose),
        other => return Err(unsupported(other, "locked inertia")),
    };
    Ok(congruence(&partition.locked, &f_h_b))
}

/// Total gravity wrench about the origin of `A`.
pub fn gravity_wrench(model: &Model, state: &State) -> Result<SpatialForce, Error> {
    model.check_shape(&state.s)?;
    let poses = base_link_poses(model, &state.s);
    Ok(poses
        .iter()
        .enumerate()
        .map(|(l, p)| {
            let world = state.pose.compose(p);
            world.apply_force(&link_gravity_wrench(model, l, &world.rotation))
        })
        .fold(SpatialForce::zero(), |a, b| a + b))
}

/// `d/dt _A J`: gravity plus external wrenches, all about the origin of `A`.
/// Joint torques do not enter.
pub fn momentum_rate(
    model: &Model,
    state: &State,
    _nu: &VelocityState,
    _tau: &DVector<f64>,
    wrenches: &[ExternalWrench],
) -> Result<SpatialForce, Error> {
    let poses = base_link_poses(model, &state.s);
    let mut rate = gravity_wrench(model, state)?;
    for w in wrenches {
        let li = model.link_index(&w.link)?;
        let contact = state.pose.compose(&poses[li]).compose(&w.contact);
        rate += Transform::from_translation(contact.origin).apply_force(&w.wrench);
    }
    Ok(rate)
}

/// `(⟨_A J, ξ⟩, 𝔽L·ξ_Q)`; the second entry is `νᵀ M (^BX_A ξ; 0)`.
pub fn momentum_map_pairing(
    model: &Model,
    state: &State,
    nu: &VelocityState,
    xi: &SpatialMotion,
) -> Result<(f64, f64), Error> {
    let ja = total_momentum(model, state, nu, FrameTag::A)?;
    let left = xi.dot(&ja.value);
    let partition = mass_partition(model, &state.s)?;
    let mut generator = DVector::zeros(6 + model.dof());
    generator
        .fixed_rows_mut::<6>(0)
        .copy_from(&state.pose.inverse_apply_motion(xi).to_vector());
    let right = nu.to_vector().dot(&(&partition.full * generator));
    Ok((left, right))
}

/// Per-sample momentum quantities written by the command-line tools.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumSummary {
    pub momentum_a: SpatialForce,
    pub momentum_g: SpatialForce,
    pub locked_a: SpatialMotion,
    pub average: SpatialMotion,
    pub com: Vec3,
}

pub fn momentum_summary(
    model: &Model,
    state: &State,
    nu: &VelocityState,
) -> Result<MomentumSummary, Error> {
    model.check_shape(&nu.sdot)?;
    let poses = base_link_poses(model, &state.s);
    let partition = crate::dynamics::partition_from_poses(model, &poses);
    let com = state.pose.transform_point(&com_from_poses(model, &poses));
    let ja = momentum_from(&partition, state, nu, &com, FrameTag::A)?.value;
    let jg = momentum_from(&partition, state, nu, &com, FrameTag::G)?.value;
    let vb = locked_in_base(&partition, nu)?;
    let locked_a = state.pose.apply_motion(&vb);
    let average = Transform::from_translation(-com).apply_motion(&locked_a);
    Ok(MomentumSummary {
        momentum_a: ja,
        momentum_g: jg,
        locked_a,
        average,
        com,
    })
}

/// How the base moves while the shape follows a prescribed path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaseMotion {
    /// `H` held at its initial value, `v = 0`.
    Fixed,
    /// Constant body velocity, `H(t) = H₀ exp(tξ)`.
    Twist(SpatialMotion),
    /// Free-floating base: `_A J` starts at the given value and evolves under
    /// gravity only; `v` follows from `𝕃 (v + 𝒜ṡ) = _B J`.
    FreeFloating { momentum: SpatialForce },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CentroidalSample {
    pub t: f64,
    pub state: State,
    pub velocity: VelocityState,
    /// `^A H_C`.
    pub frame: Transform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CentroidalTrajectory {
    pub samples: Vec<CentroidalSample>,
}

impl CentroidalTrajectory {
    /// `max_t ‖^C p_com(t) − ^C p_com(0)‖`.
    pub fn com_drift(&self, model: &Model) -> Result<f64, Error> {
        let local = |s: &CentroidalSample| -> Result<Vec3, Error> {
            let p = crate::kinematics::com(model, &s.state)?;
            Ok(s.frame.inverse().transform_point(&p))
        };
        let first = local(&self.samples[0])?;
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            worst = worst.max((local(s)? - first).norm());
        }
        Ok(worst)
    }

    pub fn last(&self) -> &CentroidalSample {
        self.samples
            .last()
            .expect("trajectory has at least one sample")
    }
}

/// Default initial centroidal frame: origin at the CoM, base orientation.
pub fn default_initial_frame(model: &Model, state: &State) -> Result<Transform, Error> {
    let com = crate::kinematics::com(model, state)?;
    Ok(Transform::new(state.pose.rotation, com))
}

/// Integrates the centroidal frame along a prescribed shape path with
/// fixed-step Lie-group RK4.
pub fn integrate_centroidal_frame(
    model: &Model,
    path: &dyn ShapePath,
    base: &BaseMotion,
    base_pose: Transform,
    initial_frame: Option<Transform>,
    dt: f64,
) -> Result<CentroidalTrajectory, Error> {
    if path.dof() != model.dof() {
        return Err(Error::Dimension {
            what: "shape path",
            expected: model.dof(),
            got: path.dof(),
        });
    }
    let (steps, dt) = step_count(path.duration(), dt)?;
    let (s0, _) = path.eval(0.0);
    let state0 = State::new(base_pose, s0);
    let frame0 = match initial_frame {
        Some(f) => f,
        None => default_initial_frame(model, &state0)?,
    };
    let momentum0 = match base {
        BaseMotion::FreeFloating { momentum } => {
            DVector::from_column_slice(momentum.to_vector().as_slice())
        }
        _ => DVector::zeros(0),
    };

    // Base velocity, locked velocity in B and d/dt of the carried momentum.
    let velocities = |t: f64,
                      ls: &LieState|
     -> Result<(State, VelocityState, SpatialMotion, DVector<f64>), Error> {
        let (s, sdot) = path.eval(t);
        let state = State::new(ls.poses[0], s);
        let partition = mass_partition(model, &state.s)?;
        let conn = partition.connection()?;
        let corr = SpatialMotion::from_slice((&conn * &sdot).as_slice());
        let (v, v_loc, dj) = match base {
            BaseMotion::Fixed => (SpatialMotion::zero(), corr, DVector::zeros(0)),
            BaseMotion::Twist(xi) => (*xi, *xi + corr, DVector::zeros(0)),
            BaseMotion::FreeFloating { .. } => {
                let ja = SpatialForce::from_slice(ls.vector.as_slice());
                let jb = state.pose.inverse_apply_force(&ja);
                let chol = partition
                    .locked
                    .cholesky()
                    .ok_or(Error::NotPositiveDefinite("locked inertia"))?;
                let v_loc = SpatialMotion::from_vector(&chol.solve(&jb.to_vector()));
                let g = gravity_wrench(model, &state)?;
                (
                    v_loc - corr,
                    v_loc,
                    DVector::from_column_slice(g.to_vector().as_slice()),
                )
            }
        };
        if !v_loc.is_finite() {
            return Err(Error::NonFinite { t });
        }
        Ok((state, VelocityState::new(v, sdot), v_loc, dj))
    };

    let sides = [Trivialization::Left, Trivialization::Right];
    let mut y = LieState {
        poses: vec![base_pose, frame0],
        vector: momentum0,
    };
    let mut samples = Vec::with_capacity(steps + 1);
    let mut record = |t: f64, ls: &LieState| -> Result<(), Error> {
        let (state, velocity, _, _) = velocities(t, ls)?;
        samples.push(CentroidalSample {
            t,
            state,
            velocity,
            frame: ls.poses[1],
        });
        Ok(())
    };
    record(0.0, &y)?;
    for k in 0..steps {
        let t = k as f64 * dt;
        y = rkmk4_step(&sides, &y, t, dt, |t, ls| {
            let (state, velocity, v_loc, dj) = velocities(t, ls)?;
            Ok::<_, Error>(LieDerivative {
                twists: vec![velocity.v, state.pose.apply_motion(&v_loc)],
                vector: dj,
            })
        })?;
        record((k + 1) as f64 * dt, &y)?;
    }
    Ok(CentroidalTrajectory { samples })
}

/// Forward-dynamics simulation carrying the centroidal frame along.
pub fn simulate_with_centroidal_frame(
    model: &Model,
    state0: &State,
    nu0: &VelocityState,
    forcing: &dyn Forcing,
    t_end: f64,
    dt: f64,
    initial_frame: Option<Transform>,
) -> Result<CentroidalTrajectory, Error> {
    let frame0 = match initial_frame {
        Some(f) => f,
        None => default_initial_frame(model, state0)?,
    };
    let samples = simulate_impl(model, state0, nu0, forcing, t_end, dt, Some(frame0))?
        .into_iter()
        .map(|(s, frame)| CentroidalSample {
            t: s.t,
            state: s.state,
            velocity: s.velocity,
            frame: frame.expect("centroidal frame is carried"),
        })
        .collect();
    Ok(CentroidalTrajectory { samples })
}

/// Columns `𝒜_i` of the connection as motion vectors.
pub(crate) fn columns(a: &DMatrix<f64>) -> Vec<SpatialMotion> {
    a.column_iter()
        .map(|c| SpatialMotion::from_slice(c.as_slice()))
        .collect()
}
