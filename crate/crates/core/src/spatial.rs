//! SE(3) and 6D spatial-vector algebra.
//!
//! Every 6-vector in this crate is ordered linear part first: motions are
//! `(v; ω)` and wrenches are `(f; τ)`.

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;
pub type Mat4 = Matrix4<f64>;

const SKEW_TOL: f64 = 1e-12;
const SMALL_ANGLE: f64 = 1e-8;

/// Skew-symmetric matrix such that `hat3(w) * x == w.cross(&x)`.
pub fn hat3(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat3`]. Rejects matrices whose symmetric part exceeds `1e-12`.
pub fn vee3(m: &Mat3) -> Result<Vec3, Error> {
    let sym = (m + m.transpose()) * 0.5;
    if sym.norm() > SKEW_TOL {
        return Err(Error::NotSkew(sym.norm()));
    }
    Ok(skew_part(m))
}

/// Axial vector of the skew part of `m`, without any check.
pub(crate) fn skew_part(m: &Mat3) -> Vec3 {
    Vec3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    ) * 0.5
}

/// A motion vector (twist): linear velocity then angular velocity.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SpatialMotion {
    pub linear: Vec3,
    pub angular: Vec3,
}

/// A force vector (wrench): force then torque.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SpatialForce {
    pub linear: Vec3,
    pub angular: Vec3,
}

macro_rules! six_vector {
    ($t:ident) => {
        impl $t {
            pub fn new(linear: Vec3, angular: Vec3) -> Self {
                Self { linear, angular }
            }

            pub fn zero() -> Self {
                Self::default()
            }

            pub fn from_vector(v: &Vec6) -> Self {
                Self {
                    linear: v.fixed_rows::<3>(0).into_owned(),
                    angular: v.fixed_rows::<3>(3).into_owned(),
                }
            }

            pub fn from_slice(s: &[f64]) -> Self {
                assert_eq!(s.len(), 6, "six components expected");
                Self {
                    linear: Vec3::new(s[0], s[1], s[2]),
                    angular: Vec3::new(s[3], s[4], s[5]),
                }
            }

            pub fn to_vector(&self) -> Vec6 {
                Vec6::new(
                    self.linear.x,
                    self.linear.y,
                    self.linear.z,
                    self.angular.x,
                    self.angular.y,
                    self.angular.z,
                )
            }

            pub fn norm(&self) -> f64 {
                (self.linear.norm_squared() + self.angular.norm_squared()).sqrt()
            }

            pub fn is_finite(&self) -> bool {
                self.linear
                    .iter()
                    .chain(self.angular.iter())
                    .all(|x| x.is_finite())
            }
        }

        impl std::ops::Add for $t {
            type Output = $t;
            fn add(self, rhs: $t) -> $t {
                $t::new(self.linear + rhs.linear, self.angular + rhs.angular)
            }
        }

        impl std::ops::AddAssign for $t {
            fn add_assign(&mut self, rhs: $t) {
                self.linear += rhs.linear;
                self.angular += rhs.angular;
            }
        }

        impl std::ops::Sub for $t {
            type Output = $t;
            fn sub(self, rhs: $t) -> $t {
                $t::new(self.linear - rhs.linear, self.angular - rhs.angular)
            }
        }

        impl std::ops::Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                $t::new(-self.linear, -self.angular)
            }
        }

        impl std::ops::Mul<f64> for $t {
            type Output = $t;
            fn mul(self, k: f64) -> $t {
                $t::new(self.linear * k, self.angular * k)
            }
        }
    };
}

six_vector!(SpatialMotion);
six_vector!(SpatialForce);

impl SpatialMotion {
    /// Pairing with a wrench (power).
    pub fn dot(&self, f: &SpatialForce) -> f64 {
        self.linear.dot(&f.linear) + self.angular.dot(&f.angular)
    }
}

/// 4×4 twist matrix `[ω^, v; 0, 0]`.
pub fn hat6(v: &SpatialMotion) -> Mat4 {
    let mut m = Mat4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&v.angular));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&v.linear);
    m
}

/// Inverse of [`hat6`].
pub fn vee6(m: &Mat4) -> Result<SpatialMotion, Error> {
    let bottom = m.fixed_view::<1, 4>(3, 0).norm();
    if bottom > SKEW_TOL {
        return Err(Error::NotTwist(bottom));
    }
    let w = vee3(&m.fixed_view::<3, 3>(0, 0).into_owned())?;
    Ok(SpatialMotion::new(
        m.fixed_view::<3, 1>(0, 3).into_owned(),
        w,
    ))
}

/// `v×` applied to `u`: `[ω^, v^; 0, ω^] u`. This is the se(3) Lie bracket.
pub fn cross6(v: &SpatialMotion, u: &SpatialMotion) -> SpatialMotion {
    SpatialMotion::new(
        v.angular.cross(&u.linear) + v.linear.cross(&u.angular),
        v.angular.cross(&u.angular),
    )
}

/// `v×*` applied to `f`: `[ω^, 0; v^, ω^] f`.
pub fn crossdual6(v: &SpatialMotion, f: &SpatialForce) -> SpatialForce {
    SpatialForce::new(
        v.angular.cross(&f.linear),
        v.linear.cross(&f.linear) + v.angular.cross(&f.angular),
    )
}

/// Rigid transformation `^A H_B`: rotation from `[B]` to `[A]` and the
/// coordinates of `o_B` in `A`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub rotation: Mat3,
    pub origin: Vec3,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn new(rotation: Mat3, origin: Vec3) -> Self {
        Self { rotation, origin }
    }

    pub fn identity() -> Self {
        Self::new(Mat3::identity(), Vec3::zeros())
    }

    pub fn from_translation(origin: Vec3) -> Self {
        Self::new(Mat3::identity(), origin)
    }

    pub fn from_rotation(rotation: Mat3) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    /// Rotation about the unit `axis` by `angle`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        Self::from_rotation(rotation_about(axis, angle))
    }

    /// URDF-style fixed-axis roll/pitch/yaw: `Rz(yaw) Ry(pitch) Rx(roll)`.
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        let rx = rotation_about(&Vec3::x(), rpy[0]);
        let ry = rotation_about(&Vec3::y(), rpy[1]);
        let rz = rotation_about(&Vec3::z(), rpy[2]);
        Self::new(rz * ry * rx, Vec3::new(xyz[0], xyz[1], xyz[2]))
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.origin))
    }

    pub fn compose(&self, other: &Transform) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.origin + self.origin,
        )
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.origin
    }

    pub fn to_homogeneous(&self) -> Mat4 {
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.origin);
        m
    }

    /// Reads the rotation and origin blocks of a homogeneous matrix.
    pub fn from_homogeneous(m: &Mat4) -> Self {
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Largest deviation from orthonormality and unit determinant.
    pub fn orthonormality_error(&self) -> f64 {
        let e = (self.rotation.transpose() * self.rotation - Mat3::identity()).amax();
        e.max((self.rotation.determinant() - 1.0).abs())
    }

    pub fn is_valid(&self) -> bool {
        self.orthonormality_error() <= 1e-12
            && self
                .rotation
                .iter()
                .chain(self.origin.iter())
                .all(|x| x.is_finite())
    }

    /// Motion transform `X = [R, o^R; 0, R]` mapping `^B v` to `^A v`.
    pub fn motion_matrix(&self) -> Mat6 {
        let r = self.rotation;
        let mut x = Mat6::zeros();
        x.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        x.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(hat3(&self.origin) * r));
        x.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
        x
    }

    /// Wrench transform `[R, 0; o^R, R] = X^{-T}` mapping `_B f` to `_A f`.
    pub fn force_matrix(&self) -> Mat6 {
        let r = self.rotation;
        let mut x = Mat6::zeros();
        x.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        x.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(hat3(&self.origin) * r));
        x.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
        x
    }

    pub fn apply_motion(&self, v: &SpatialMotion) -> SpatialMotion {
        let w = self.rotation * v.angular;
        SpatialMotion::new(self.rotation * v.linear + self.origin.cross(&w), w)
    }

    pub fn apply_force(&self, f: &SpatialForce) -> SpatialForce {
        let lin = self.rotation * f.linear;
        SpatialForce::new(lin, self.rotation * f.angular + self.origin.cross(&lin))
    }

    /// `X(H)^{-1} v`, i.e. the motion transform of the inverse.
    pub fn inverse_apply_motion(&self, v: &SpatialMotion) -> SpatialMotion {
        let rt = self.rotation.transpose();
        SpatialMotion::new(
            rt * (v.linear - self.origin.cross(&v.angular)),
            rt * v.angular,
        )
    }

    /// `X(H)^T f`: wrench in `A` pulled back to `B`.
    pub fn inverse_apply_force(&self, f: &SpatialForce) -> SpatialForce {
        let rt = self.rotation.transpose();
        SpatialForce::new(
            rt * f.linear,
            rt * (f.angular - self.origin.cross(&f.linear)),
        )
    }
}

impl std::ops::Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

impl std::ops::Mul for &Transform {
    type Output = Transform;
    fn mul(self, rhs: &Transform) -> Transform {
        self.compose(rhs)
    }
}

/// Motion transform `X(H)`.
pub fn motion_transform(h: &Transform) -> Mat6 {
    h.motion_matrix()
}

/// Wrench transform `X(H)^{-T}`.
pub fn force_transform(h: &Transform) -> Mat6 {
    h.force_matrix()
}

/// Rodrigues rotation about a unit axis.
pub fn rotation_about(axis: &Vec3, angle: f64) -> Mat3 {
    let k = hat3(axis);
    Mat3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Closed-form SE(3) exponential of `dt * v^`.
pub fn exp_se3(v: &SpatialMotion, dt: f64) -> Transform {
    let w = v.angular * dt;
    let u = v.linear * dt;
    let theta = w.norm();
    let k = hat3(&w);
    let k2 = k * k;
    let (a, b, c) = if theta < SMALL_ANGLE {
        (
            1.0 - theta * theta / 6.0,
            0.5 - theta * theta / 24.0,
            1.0 / 6.0 - theta * theta / 120.0,
        )
    } else {
        let t2 = theta * theta;
        (
            theta.sin() / theta,
            (1.0 - theta.cos()) / t2,
            (theta - theta.sin()) / (t2 * theta),
        )
    };
    let rotation = Mat3::identity() + k * a + k2 * b;
    let left_jac = Mat3::identity() + k * b + k2 * c;
    Transform::new(rotation, left_jac * u)
}

/// Rotation vector of `r` (principal logarithm of SO(3)).
pub fn log_so3(r: &Mat3) -> Vec3 {
    let s = skew_part(r);
    let sin_t = s.norm();
    let cos_t = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = sin_t.atan2(cos_t);
    if theta < SMALL_ANGLE {
        return s;
    }
    if std::f64::consts::PI - theta > 1e-6 {
        return s * (theta / sin_t);
    }
    // Near π the skew part vanishes; recover the axis from R + I = 2nn^T + (1 + cos)(I - nn^T).
    let b = (r + Mat3::identity()) * 0.5;
    let col = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap_or(0);
    let mut n: Vec3 = b.column(col).into_owned();
    n /= n.norm();
    if n.dot(&s) < 0.0 {
        n = -n;
    }
    n * theta
}

/// Logarithm of SE(3): the twist `ξ` with `exp_se3(ξ, 1) == h`.
pub fn log_se3(h: &Transform) -> SpatialMotion {
    let w = log_so3(&h.rotation);
    let theta = w.norm();
    let k = hat3(&w);
    let v_inv = if theta < SMALL_ANGLE {
        Mat3::identity() - k * 0.5 + k * k / 12.0
    } else {
        let half = 0.5 * theta;
        let coef = (1.0 - half * half.cos() / half.sin()) / (theta * theta);
        Mat3::identity() - k * 0.5 + k * k * coef
    };
    SpatialMotion::new(v_inv * h.origin, w)
}

/// Geodesic angle of the rotation part.
pub fn rotation_angle(r: &Mat3) -> f64 {
    let s = skew_part(r).norm();
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    s.atan2(c)
}

/// Rigid-body inertia carried by a frame: mass, CoM in that frame, rotational
/// inertia about the frame origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialInertia {
    pub mass: f64,
    pub com: Vec3,
    pub rot_inertia: Mat3,
}

impl SpatialInertia {
    pub fn new(mass: f64, com: Vec3, rot_inertia: Mat3) -> Self {
        Self {
            mass,
            com,
            rot_inertia,
        }
    }

    /// Builds from the rotational inertia about the CoM (parallel-axis shift).
    pub fn from_com_inertia(mass: f64, com: Vec3, inertia_at_com: Mat3) -> Self {
        let c = hat3(&com);
        Self::new(mass, com, inertia_at_com - c * c * mass)
    }

    /// Rotational inertia about the CoM.
    pub fn inertia_at_com(&self) -> Mat3 {
        let c = hat3(&self.com);
        self.rot_inertia + c * c * self.mass
    }

    /// Assembled 6×6 matrix `[m 1, -m c^; m c^, I]`.
    pub fn matrix(&self) -> Mat6 {
        let mc = hat3(&self.com) * self.mass;
        let mut m = Mat6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(Mat3::identity() * self.mass));
        m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-mc));
        m.fixed_view_mut::<3, 3>(3, 0).copy_from(&mc);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.rot_inertia);
        m
    }

    /// Reads mass, CoM and rotational inertia back from a 6×6 inertia matrix.
    pub fn from_matrix(m: &Mat6) -> Self {
        let mass = m[(0, 0)];
        let mc = m.fixed_view::<3, 3>(3, 0).into_owned();
        Self::new(
            mass,
            skew_part(&mc) / mass,
            m.fixed_view::<3, 3>(3, 3).into_owned(),
        )
    }

    /// Momentum `M v`.
    pub fn momentum(&self, v: &SpatialMotion) -> SpatialForce {
        let m = self.mass;
        SpatialForce::new(
            (v.linear - self.com.cross(&v.angular)) * m,
            self.com.cross(&v.linear) * m + self.rot_inertia * v.angular,
        )
    }

    pub fn is_positive_definite(&self) -> bool {
        self.mass > 0.0
            && self.matrix().iter().all(|x| x.is_finite())
            && (self.rot_inertia - self.rot_inertia.transpose()).amax() <= 1e-12
            && self.matrix().cholesky().is_some()
    }
}

/// Re-expresses the inertia in the frame whose pose relative to the
/// inertia's frame is `h^{-1}`: `h` maps the inertia's frame to the target.
pub fn inertia_to_frame(inertia: &SpatialInertia, h: &Transform) -> SpatialInertia {
    let rot = h.rotation;
    let com = h.transform_point(&inertia.com);
    let ic = rot * inertia.inertia_at_com() * rot.transpose();
    SpatialInertia::from_com_inertia(inertia.mass, com, ic)
}

/// 6×6 congruence `force_matrix(h) · M · motion_matrix(h^{-1})`.
pub fn congruence(m: &Mat6, h: &Transform) -> Mat6 {
    h.force_matrix() * m * h.inverse().motion_matrix()
}
