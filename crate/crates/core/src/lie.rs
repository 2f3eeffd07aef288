//! Fourth-order Runge–Kutta–Munthe-Kaas stepping on SE(3) × Rⁿ.
//!
//! Each pose is advanced by an exponential update, so rotations stay on SO(3)
//! up to round-off no matter how many steps are taken.

use nalgebra::DVector;

use crate::spatial::{cross6, exp_se3, SpatialMotion, Transform};

/// Which side the velocity is trivialized on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trivialization {
    /// `Ḣ = H v^` (body velocity).
    Left,
    /// `Ḣ = v^ H` (spatial velocity).
    Right,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LieState {
    pub poses: Vec<Transform>,
    pub vector: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LieDerivative {
    pub twists: Vec<SpatialMotion>,
    pub vector: DVector<f64>,
}

const A: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [0.5, 0.0, 0.0],
    [0.0, 0.5, 0.0],
    [0.0, 0.0, 1.0],
];
const B: [f64; 4] = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
const C: [f64; 4] = [0.0, 0.5, 0.5, 1.0];

fn displace(side: Trivialization, base: &Transform, theta: &SpatialMotion) -> Transform {
    let e = exp_se3(theta, 1.0);
    match side {
        Trivialization::Left => base.compose(&e),
        Trivialization::Right => e.compose(base),
    }
}

/// Algebra-coordinate rate `Θ̇` given the trivialized velocity at `H₀·exp(Θ)`
/// (left) or `exp(Θ)·H₀` (right), truncated after the second commutator.
fn dexp_inv(side: Trivialization, theta: &SpatialMotion, v: &SpatialMotion) -> SpatialMotion {
    let c1 = cross6(theta, v);
    let c2 = cross6(theta, &c1);
    match side {
        Trivialization::Left => *v + c1 * 0.5 + c2 * (1.0 / 12.0),
        Trivialization::Right => *v - c1 * 0.5 + c2 * (1.0 / 12.0),
    }
}

/// Advances `state` from `t` to `t + dt` with classical RK4 coefficients.
pub fn rkmk4_step<E>(
    sides: &[Trivialization],
    state: &LieState,
    t: f64,
    dt: f64,
    mut rhs: impl FnMut(f64, &LieState) -> Result<LieDerivative, E>,
) -> Result<LieState, E> {
    debug_assert_eq!(sides.len(), state.poses.len());
    let n_pose = sides.len();
    let mut k_alg: Vec<Vec<SpatialMotion>> = Vec::with_capacity(4);
    let mut k_vec: Vec<DVector<f64>> = Vec::with_capacity(4);

    for stage in 0..4 {
        let mut poses = Vec::with_capacity(n_pose);
        let mut thetas = Vec::with_capacity(n_pose);
        for p in 0..n_pose {
            let mut theta = SpatialMotion::zero();
            for (j, a) in A[stage].iter().enumerate().take(stage) {
                if *a != 0.0 {
                    theta += k_alg[j][p] * (a * dt);
                }
            }
            poses.push(displace(sides[p], &state.poses[p], &theta));
            thetas.push(theta);
        }
        let mut vector = state.vector.clone();
        for (j, a) in A[stage].iter().enumerate().take(stage) {
            if *a != 0.0 {
                vector.axpy(a * dt, &k_vec[j], 1.0);
            }
        }
        let stage_state = LieState { poses, vector };
        let d = rhs(t + C[stage] * dt, &stage_state)?;
        k_alg.push(
            (0..n_pose)
                .map(|p| dexp_inv(sides[p], &thetas[p], &d.twists[p]))
                .collect(),
        );
        k_vec.push(d.vector);
    }

    let poses = (0..n_pose)
        .map(|p| {
            let mut theta = SpatialMotion::zero();
            for (j, b) in B.iter().enumerate() {
                theta += k_alg[j][p] * (b * dt);
            }
            displace(sides[p], &state.poses[p], &theta)
        })
        .collect();
    let mut vector = state.vector.clone();
    for (j, b) in B.iter().enumerate() {
        vector.axpy(b * dt, &k_vec[j], 1.0);
    }
    Ok(LieState { poses, vector })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{Mat3, Vec3};
    use std::convert::Infallible;

    #[test]
    fn constant_twist_matches_exponential() {
        let xi = SpatialMotion::new(Vec3::new(0.3, -0.1, 0.7), Vec3::new(0.9, 0.2, -0.5));
        let h0 = Transform::from_xyz_rpy([1.0, 2.0, 3.0], [0.1, 0.2, 0.3]);
        for side in [Trivialization::Left, Trivialization::Right] {
            let mut s = LieState {
                poses: vec![h0],
                vector: DVector::zeros(0),
            };
            let dt = 0.01;
            for k in 0..100 {
                s = rkmk4_step(&[side], &s, k as f64 * dt, dt, |_, _| {
                    Ok::<_, Infallible>(LieDerivative {
                        twists: vec![xi],
                        vector: DVector::zeros(0),
                    })
                })
                .unwrap();
            }
            let expected = match side {
                Trivialization::Left => h0.compose(&exp_se3(&xi, 1.0)),
                Trivialization::Right => exp_se3(&xi, 1.0).compose(&h0),
            };
            assert!((s.poses[0].rotation - expected.rotation).amax() < 1e-12);
            assert!((s.poses[0].origin - expected.origin).amax() < 1e-12);
        }
    }

    #[test]
    fn fourth_order_on_time_varying_spin() {
        // Ṙ = R ω(t)^ with ω(t) = (cos t, sin t, 1): compare step halving.
        let run = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut s = LieState {
                poses: vec![Transform::identity()],
                vector: DVector::zeros(0),
            };
            for k in 0..n {
                s = rkmk4_step(&[Trivialization::Left], &s, k as f64 * dt, dt, |t, _| {
                    Ok::<_, Infallible>(LieDerivative {
                        twists: vec![SpatialMotion::new(
                            Vec3::zeros(),
                            Vec3::new(t.cos(), t.sin(), 1.0),
                        )],
                        vector: DVector::zeros(0),
                    })
                })
                .unwrap();
            }
            s.poses[0].rotation
        };
        let reference = run(2000);
        let e1 = (run(20) - reference).amax();
        let e2 = (run(40) - reference).amax();
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
        let r: Mat3 = run(40);
        assert!((r.transpose() * r - Mat3::identity()).amax() < 1e-14);
    }
}
