//! Mechanical connection `𝒜(s) = 𝕃⁻¹𝔸`, its curvature
//! `B_ij = ∂_j𝒜_i − ∂_i𝒜_j + 𝒜_i × 𝒜_j`, and the consequences of flatness:
//! a frame function `F(s)` with `^A H_C = H·F(s)`, and zero holonomy over
//! closed shape loops.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::centroidal::{columns, integrate_centroidal_frame, BaseMotion, CentroidalTrajectory};
use crate::dynamics::mass_partition;
use crate::exec::{self, Execution};
use crate::lie::{rkmk4_step, LieDerivative, LieState, Trivialization};
use crate::model::{JointKind, Model};
use crate::path::ShapePath;
use crate::spatial::{cross6, log_se3, rotation_angle, SpatialMotion, Transform, Vec6};
use crate::Error;

/// `𝒜(s)`, a `6 × n_J` matrix whose columns are motion vectors in `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct Connection {
    pub s: DVector<f64>,
    pub matrix: DMatrix<f64>,
}

impl Connection {
    pub fn column(&self, i: usize) -> SpatialMotion {
        SpatialMotion::from_slice(self.matrix.column(i).as_slice())
    }

    pub fn columns(&self) -> Vec<SpatialMotion> {
        columns(&self.matrix)
    }
}

pub fn connection(model: &Model, s: &DVector<f64>) -> Result<Connection, Error> {
    let matrix = mass_partition(model, s)?.connection()?;
    Ok(Connection {
        s: s.clone(),
        matrix,
    })
}

fn check_pair(model: &Model, i: usize, j: usize) -> Result<(), Error> {
    let n = model.dof();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "joint index out of range: ({i}, {j}) with {n} joints"
        )));
    }
    Ok(())
}

fn check_step(h: f64) -> Result<(), Error> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {h}"
        )));
    }
    Ok(())
}

/// Connection at `s` and at `s ± h e_k` for every axis `k`.
struct Stencil {
    center: Vec<SpatialMotion>,
    /// `deriv[k][i] = ∂_k 𝒜_i` by central differences.
    deriv: Vec<Vec<SpatialMotion>>,
}

impl Stencil {
    fn new(model: &Model, s: &DVector<f64>, h: f64) -> Result<Self, Error> {
        let center = connection(model, s)?.columns();
        let mut deriv = Vec::with_capacity(model.dof());
        for k in 0..model.dof() {
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[k] += h;
            sm[k] -= h;
            let ap = connection(model, &sp)?.matrix;
            let am = connection(model, &sm)?.matrix;
            deriv.push(columns(&((ap - am) / (2.0 * h))));
        }
        Ok(Self { center, deriv })
    }

    fn curvature(&self, i: usize, j: usize) -> SpatialMotion {
        self.deriv[j][i] - self.deriv[i][j] + cross6(&self.center[i], &self.center[j])
    }
}

/// `B_ij(s)` with partial derivatives by central differences of step `h`.
pub fn curvature(
    model: &Model,
    s: &DVector<f64>,
    i: usize,
    j: usize,
    h: f64,
) -> Result<SpatialMotion, Error> {
    check_pair(model, i, j)?;
    check_step(h)?;
    if i == j {
        return Ok(SpatialMotion::zero());
    }
    model.check_shape(s)?;
    let center = connection(model, s)?;
    let partial = |k: usize, col: usize| -> Result<SpatialMotion, Error> {
        let mut sp = s.clone();
        let mut sm = s.clone();
        sp[k] += h;
        sm[k] -= h;
        let ap = connection(model, &sp)?.column(col);
        let am = connection(model, &sm)?.column(col);
        Ok((ap - am) * (0.5 / h))
    };
    Ok(partial(j, i)? - partial(i, j)? + cross6(&center.column(i), &center.column(j)))
}

/// All entries `B_ij`, `i < j`, at one shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Curvature {
    pub s: DVector<f64>,
    pub h: f64,
    pub entries: Vec<((usize, usize), SpatialMotion)>,
}

impl Curvature {
    pub fn get(&self, i: usize, j: usize) -> Option<SpatialMotion> {
        if i == j {
            return Some(SpatialMotion::zero());
        }
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        self.entries
            .iter()
            .find(|(p, _)| *p == (a, b))
            .map(|(_, v)| *v * sign)
    }
}

pub fn curvature_at(model: &Model, s: &DVector<f64>, h: f64) -> Result<Curvature, Error> {
    check_step(h)?;
    model.check_shape(s)?;
    let n = model.dof();
    let stencil = Stencil::new(model, s, h)?;
    let entries = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| ((i, j), stencil.curvature(i, j)))
        .collect();
    Ok(Curvature {
        s: s.clone(),
        h,
        entries,
    })
}

/// Tensor grid over shape space; axis `k` has `counts[k]` evenly spaced
/// points covering `ranges[k]` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub ranges: Vec<[f64; 2]>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    /// `points` per axis over `[−π, π]` for revolute joints and `[−1, 1]`
    /// for prismatic ones.
    pub fn for_model(model: &Model, points: usize) -> Self {
        let ranges = (0..model.dof())
            .map(|k| match model.joint_kind(k) {
                JointKind::Revolute => [-PI, PI],
                JointKind::Prismatic => [-1.0, 1.0],
            })
            .collect();
        Self {
            ranges,
            counts: vec![points; model.dof()],
        }
    }

    pub fn uniform(dof: usize, lo: f64, hi: f64, points: usize) -> Self {
        Self {
            ranges: vec![[lo, hi]; dof],
            counts: vec![points; dof],
        }
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point with lexicographic index `index` (last axis fastest).
    pub fn point(&self, mut index: usize) -> DVector<f64> {
        let n = self.counts.len();
        let mut s = DVector::zeros(n);
        for k in (0..n).rev() {
            let c = self.counts[k];
            let q = index % c;
            index /= c;
            let [lo, hi] = self.ranges[k];
            s[k] = if c == 1 {
                lo
            } else {
                lo + (hi - lo) * q as f64 / (c - 1) as f64
            };
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMax {
    pub i: usize,
    pub j: usize,
    pub joints: [String; 2],
    pub max_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstSample {
    pub grid_index: usize,
    pub s: Vec<f64>,
    pub i: usize,
    pub j: usize,
    pub curvature: [f64; 6],
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub model_hash: String,
    pub method: String,
    pub grid: GridSpec,
    pub h: f64,
    pub tol: f64,
    pub pairs: Vec<PairMax>,
    pub max_norm: f64,
    pub flat: bool,
    pub verdict: String,
    pub worst: Option<WorstSample>,
}

const METHOD: &str = "curvature sampled on a tensor grid with central differences; \
the verdict holds at the sampled points and tolerance only";

/// Evaluates every `B_ij`, `i < j`, on the grid. The reduction is a max with
/// ties resolved toward the smallest grid index, so the result does not
/// depend on the schedule.
pub fn flatness_report(
    model: &Model,
    grid: &GridSpec,
    tol: f64,
    h: f64,
    execution: Execution,
) -> Result<FlatnessReport, Error> {
    check_step(h)?;
    let n = model.dof();
    if grid.counts.len() != n || grid.ranges.len() != n {
        return Err(Error::Dimension {
            what: "grid axes",
            expected: n,
            got: grid.counts.len(),
        });
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let names: Vec<String> = model.spec().joints.iter().map(|j| j.name.clone()).collect();
    let mut report = FlatnessReport {
        model_hash: model.hash(),
        method: METHOD.into(),
        grid: grid.clone(),
        h,
        tol,
        pairs: pairs
            .iter()
            .map(|&(i, j)| PairMax {
                i,
                j,
                joints: [names[i].clone(), names[j].clone()],
                max_norm: 0.0,
            })
            .collect(),
        max_norm: 0.0,
        flat: true,
        verdict: "flat".into(),
        worst: None,
    };
    if pairs.is_empty() {
        return Ok(report);
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }

    let indices: Vec<usize> = (0..grid.len()).collect();
    let samples = exec::map(
        execution,
        &indices,
        |&g| -> Result<Vec<SpatialMotion>, Error> {
            let s = grid.point(g);
            let stencil = Stencil::new(model, &s, h)?;
            Ok(pairs
                .iter()
                .map(|&(i, j)| stencil.curvature(i, j))
                .collect())
        },
    );

    let mut worst: Option<(usize, usize, SpatialMotion, f64)> = None;
    for (g, sample) in samples.into_iter().enumerate() {
        for (p, b) in sample?.into_iter().enumerate() {
            let norm = b.norm();
            if !norm.is_finite() {
                return Err(Error::NonFinite { t: f64::NAN });
            }
            let pm = &mut report.pairs[p];
            pm.max_norm = pm.max_norm.max(norm);
            if worst.as_ref().is_none_or(|w| norm > w.3) {
                worst = Some((g, p, b, norm));
            }
        }
    }
    let (g, p, b, norm) = worst.expect("grid and pairs are non-empty");
    report.max_norm = norm;
    report.flat = norm <= tol;
    report.verdict = if report.flat { "flat" } else { "non-flat" }.into();
    let v: Vec6 = b.to_vector();
    report.worst = Some(WorstSample {
        grid_index: g,
        s: grid.point(g).iter().copied().collect(),
        i: pairs[p].0,
        j: pairs[p].1,
        curvature: [v[0], v[1], v[2], v[3], v[4], v[5]],
        norm,
    });
    Ok(report)
}

/// Integrates `dΔ/dσ = ξ(σ)^ Δ` from `σ = 0` to `1` with `steps` RK4 steps.
fn transport(
    start: Transform,
    steps: usize,
    mut xi: impl FnMut(f64) -> Result<SpatialMotion, Error>,
) -> Result<Transform, Error> {
    let sides = [Trivialization::Right];
    let mut y = LieState {
        poses: vec![start],
        vector: DVector::zeros(0),
    };
    let dt = 1.0 / steps as f64;
    for k in 0..steps {
        y = rkmk4_step(&sides, &y, k as f64 * dt, dt, |t, _| {
            let v = xi(t)?;
            if !v.is_finite() {
                return Err(Error::NonFinite { t });
            }
            Ok(LieDerivative {
                twists: vec![v],
                vector: DVector::zeros(0),
            })
        })?;
    }
    Ok(y.poses[0])
}

/// Order in which the coordinate axes are swept by the recursion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AxisOrder {
    #[default]
    Forward,
    Reversed,
}

/// `s ↦ ^B F(s)` built by transporting `F(0)` along the coordinate axes:
/// axis `i` is swept with the earlier axes at their target values and the
/// later ones at zero.
#[derive(Clone, Debug)]
pub struct FrameFunction<'m> {
    model: &'m Model,
    steps: usize,
    base: Transform,
}

pub fn construct_frame_function(model: &Model, steps: usize, base: Transform) -> FrameFunction<'_> {
    FrameFunction {
        model,
        steps: steps.max(1),
        base,
    }
}

impl FrameFunction<'_> {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn base(&self) -> Transform {
        self.base
    }

    pub fn eval(&self, s: &DVector<f64>) -> Result<Transform, Error> {
        self.eval_ordered(s, AxisOrder::Forward)
    }

    pub fn eval_ordered(&self, s: &DVector<f64>, order: AxisOrder) -> Result<Transform, Error> {
        self.model.check_shape(s)?;
        let n = s.len();
        let axes: Vec<usize> = match order {
            AxisOrder::Forward => (0..n).collect(),
            AxisOrder::Reversed => (0..n).rev().collect(),
        };
        let mut f = self.base;
        let mut at = DVector::zeros(n);
        for i in axes {
            let target = s[i];
            if target == 0.0 {
                continue;
            }
            f = transport(f, self.steps, |sigma| {
                let mut p = at.clone();
                p[i] = sigma * target;
                Ok(connection(self.model, &p)?.column(i) * target)
            })?;
            at[i] = target;
        }
        Ok(f)
    }
}

/// `‖(F(s + h e_i) ⊖ F(s − h e_i)) / 2h − 𝒜_i(s)‖` for every axis, with the
/// right-trivialized difference `log(F₊ F₋⁻¹)`.
pub fn verify_frame_function(
    model: &Model,
    frame: &FrameFunction<'_>,
    s: &DVector<f64>,
    h: f64,
) -> Result<Vec<f64>, Error> {
    check_step(h)?;
    let a = connection(model, s)?;
    (0..model.dof())
        .map(|i| {
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[i] += h;
            sm[i] -= h;
            let fp = frame.eval(&sp)?;
            let fm = frame.eval(&sm)?;
            let d = log_se3(&fp.compose(&fm.inverse())) * (0.5 / h);
            Ok((d - a.column(i)).norm())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Holonomy {
    /// `^B H_C(T) · ^B H_C(0)⁻¹`.
    pub drift: Transform,
    pub angle: f64,
    /// Distance between the origins of `C` at the start and at the end.
    pub displacement: f64,
    /// `max_t ‖^C p_com(t) − ^C p_com(0)‖`.
    pub com_deviation: f64,
    pub trajectory: CentroidalTrajectory,
}

/// Largest endpoint gap accepted as a closed loop.
pub const LOOP_TOLERANCE: f64 = 1e-9;

/// Carries the centroidal frame around a closed shape loop with the base
/// held at the identity.
pub fn holonomy(model: &Model, path: &dyn ShapePath, dt: f64) -> Result<Holonomy, Error> {
    let gap = path.closure_gap();
    if gap.is_nan() || gap > LOOP_TOLERANCE {
        return Err(Error::OpenLoop(gap));
    }
    let traj = integrate_centroidal_frame(
        model,
        path,
        &BaseMotion::Fixed,
        Transform::identity(),
        None,
        dt,
    )?;
    let c0 = traj.samples[0].frame;
    let c1 = traj.last().frame;
    let drift = c1.compose(&c0.inverse());
    Ok(Holonomy {
        drift,
        angle: rotation_angle(&drift.rotation),
        displacement: (c1.origin - c0.origin).norm(),
        com_deviation: traj.com_drift(model)?,
        trajectory: traj,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmallLoop {
    /// `log` of the drift, as a twist.
    pub drift: SpatialMotion,
    /// `ε² B_ij(s₀)`.
    pub predicted: SpatialMotion,
    pub mismatch: f64,
}

/// Transports the identity around the square `s₀ → s₀ + εe_j → s₀ + εe_j + εe_i
/// → s₀ + εe_i → s₀` and compares the drift with `ε² B_ij(s₀)`.
pub fn small_loop_check(
    model: &Model,
    s0: &DVector<f64>,
    i: usize,
    j: usize,
    eps: f64,
) -> Result<SmallLoop, Error> {
    check_pair(model, i, j)?;
    if i == j {
        return Err(Error::InvalidArgument(
            "a loop needs two distinct axes".into(),
        ));
    }
    check_step(eps)?;
    model.check_shape(s0)?;
    let legs = [(j, eps), (i, eps), (j, -eps), (i, -eps)];
    let mut at = s0.clone();
    let mut f = Transform::identity();
    for (axis, delta) in legs {
        let from = at.clone();
        f = transport(f, 64, |sigma| {
            let mut p = from.clone();
            p[axis] += sigma * delta;
            Ok(connection(model, &p)?.column(axis) * delta)
        })?;
        at[axis] += delta;
    }
    let drift = log_se3(&f);
    let predicted = curvature(model, s0, i, j, 1e-4)? * (eps * eps);
    Ok(SmallLoop {
        drift,
        predicted,
        mismatch: (drift - predicted).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model, three_link};
    use crate::path::{ConstantShape, Sinusoid};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn flat_connection_is_angular_and_parallel() {
        let m = three_link(0.0);
        let a = connection(&m, &v(&[0.7, -2.0])).unwrap();
        let (c1, c2) = (a.column(0), a.column(1));
        assert!(c1.linear.norm() < 1e-15 && c2.linear.norm() < 1e-15);
        assert!(c1.angular.cross(&c2.angular).norm() < 1e-15);
    }

    #[test]
    fn empty_connection_without_joints() {
        let m = parse_model(
            "base = \"b\"\n[[links]]\nname = \"b\"\nmass = 1.0\ncom = [0.0, 0.0, 0.0]\ninertia = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0]\n",
        )
        .unwrap();
        let a = connection(&m, &DVector::zeros(0)).unwrap();
        assert_eq!(a.matrix.shape(), (6, 0));
        let r = flatness_report(
            &m,
            &GridSpec::for_model(&m, 20),
            1e-7,
            1e-4,
            Execution::Sequential,
        )
        .unwrap();
        assert!(r.flat && r.pairs.is_empty() && r.worst.is_none());
    }

    #[test]
    fn curvature_examples() {
        let flat = three_link(0.0);
        let s = v(&[1.3, -0.4]);
        assert!(curvature(&flat, &s, 0, 1, 1e-4).unwrap().norm() <= 1e-7);
        let bent = three_link(1.0);
        let b12 = curvature(&bent, &v(&[0.0, 0.0]), 0, 1, 1e-4).unwrap();
        assert!(b12.norm() > 0.01);
        let b21 = curvature(&bent, &s, 1, 0, 1e-4).unwrap();
        let b12 = curvature(&bent, &s, 0, 1, 1e-4).unwrap();
        assert!((b12 + b21).to_vector().amax() <= 1e-12);
        assert_eq!(
            curvature(&bent, &s, 1, 1, 1e-4).unwrap(),
            SpatialMotion::zero()
        );
        assert!(curvature(&bent, &s, 0, 2, 1e-4).is_err());
        // The stencil route agrees with the direct one.
        let all = curvature_at(&bent, &s, 1e-4).unwrap();
        assert!((all.get(0, 1).unwrap() - b12).norm() < 1e-12);
        assert!((all.get(1, 0).unwrap() + b12).norm() < 1e-12);
    }

    #[test]
    fn grid_points() {
        let g = GridSpec::uniform(2, -1.0, 1.0, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g.point(0), v(&[-1.0, -1.0]));
        assert_eq!(g.point(1), v(&[-1.0, 0.0]));
        assert_eq!(g.point(8), v(&[1.0, 1.0]));
    }

    #[test]
    fn report_verdicts() {
        let grid = GridSpec::uniform(2, -PI, PI, 5);
        let r =
            flatness_report(&three_link(0.0), &grid, 1e-7, 1e-4, Execution::Sequential).unwrap();
        assert!(r.flat);
        assert_eq!(r.verdict, "flat");
        let r =
            flatness_report(&three_link(1.0), &grid, 1e-7, 1e-4, Execution::Sequential).unwrap();
        assert!(!r.flat);
        let w = r.worst.as_ref().unwrap();
        assert_eq!(w.norm, r.max_norm);
        assert_eq!(r.pairs[0].max_norm, r.max_norm);
        let par =
            flatness_report(&three_link(1.0), &grid, 1e-7, 1e-4, Execution::Parallel).unwrap();
        assert_eq!(par, r);
    }

    #[test]
    fn frame_function_basics() {
        let m = three_link(0.0);
        let base = Transform::from_xyz_rpy([0.1, 0.2, 0.3], [0.3, 0.0, -0.2]);
        let f = construct_frame_function(&m, 200, base);
        assert_eq!(f.eval(&v(&[0.0, 0.0])).unwrap(), base);
        let s = v(&[1.1, -2.3]);
        let a = f.eval_ordered(&s, AxisOrder::Forward).unwrap();
        let b = f.eval_ordered(&s, AxisOrder::Reversed).unwrap();
        assert!(rotation_angle(&(a.rotation.transpose() * b.rotation)) < 1e-8);
        assert!((a.origin - b.origin).norm() < 1e-8);
        let r = verify_frame_function(&m, &f, &v(&[0.4, 0.9]), 1e-5).unwrap();
        assert!(r.iter().all(|&x| x <= 1e-5), "{r:?}");

        let bent = three_link(1.0);
        let g = construct_frame_function(&bent, 50, Transform::identity());
        let r = verify_frame_function(&bent, &g, &v(&[0.4, 0.9]), 1e-5).unwrap();
        assert!(r.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn holonomy_examples() {
        let constant = ConstantShape {
            s: v(&[0.3, 0.4]),
            duration: 1.0,
        };
        let h = holonomy(&three_link(1.0), &constant, 1e-2).unwrap();
        assert_eq!(h.drift, Transform::identity());
        let flat = holonomy(&three_link(0.0), &Sinusoid::new(10.0), 1e-2).unwrap();
        assert!(flat.angle < 1e-5, "{}", flat.angle);
        let bent = holonomy(&three_link(1.0), &Sinusoid::new(10.0), 1e-2).unwrap();
        assert!(bent.angle > 0.05, "{}", bent.angle);
    }

    #[test]
    fn small_loops() {
        let flat = small_loop_check(&three_link(0.0), &v(&[0.5, -1.0]), 0, 1, 1e-2).unwrap();
        assert!(flat.drift.norm() <= 1e-8 && flat.predicted.norm() <= 1e-8);
        let bent = three_link(1.0);
        let s0 = v(&[0.0, 0.0]);
        let a = small_loop_check(&bent, &s0, 0, 1, 1e-2).unwrap();
        let b = small_loop_check(&bent, &s0, 0, 1, 5e-3).unwrap();
        assert!(a.mismatch < 0.1 * a.predicted.norm(), "{a:?}");
        assert!(
            a.mismatch / b.mismatch >= 4.0,
            "{} {}",
            a.mismatch,
            b.mismatch
        );
        assert!(small_loop_check(&bent, &s0, 1, 1, 1e-2).is_err());
    }
}
