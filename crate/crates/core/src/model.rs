//! Floating-base kinematic trees, their text format and the built-in
//! three-link mechanism.
//!
//! Model files are TOML:
//!
//! ```toml
//! base = "base"
//! gravity = [0.0, 0.0, -9.81]
//!
//! [[links]]
//! name = "base"
//! mass = 1.0
//! com = [0.0, 0.0, 0.0]
//! inertia = [1.0, 0.0, 0.0, 1.0, 0.0, 4.0]   # ixx ixy ixz iyy iyz izz, about the CoM
//!
//! [[joints]]
//! name = "j1"
//! parent = "base"
//! child = "arm"
//! type = "revolute"
//! axis = [0.0, 0.0, 1.0]
//! origin = { xyz = [1.0, 0.0, 0.0], rpy = [0.0, 0.0, 0.0] }
//! ```
//!
//! Inertia entries are taken about the link CoM with the link frame's
//! orientation. Joint order in the file defines the indexing of `s`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::spatial::{Mat3, SpatialInertia, SpatialMotion, Transform, Vec3};
use crate::{Error, ModelError};

pub const DEFAULT_GRAVITY: [f64; 3] = [0.0, 0.0, -9.81];
const AXIS_TOL: f64 = 1e-10;

fn default_gravity() -> [f64; 3] {
    DEFAULT_GRAVITY
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub name: String,
    pub mass: f64,
    pub com: [f64; 3],
    /// `ixx, ixy, ixz, iyy, iyz, izz` about the CoM.
    pub inertia: [f64; 6],
}

impl LinkSpec {
    pub fn new(name: impl Into<String>, mass: f64, com: [f64; 3], inertia: [f64; 6]) -> Self {
        Self {
            name: name.into(),
            mass,
            com,
            inertia,
        }
    }

    pub fn inertia_at_com(&self) -> Mat3 {
        let [xx, xy, xz, yy, yz, zz] = self.inertia;
        Mat3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }

    /// Spatial inertia about the link frame origin.
    pub fn spatial_inertia(&self) -> SpatialInertia {
        SpatialInertia::from_com_inertia(self.mass, Vec3::from(self.com), self.inertia_at_com())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Origin {
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
}

impl Origin {
    pub fn transform(&self) -> Transform {
        Transform::from_xyz_rpy(self.xyz, self.rpy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub parent: String,
    pub child: String,
    #[serde(rename = "type")]
    pub kind: JointKind,
    /// Parent frame to joint frame at zero displacement.
    pub origin: Origin,
    pub axis: [f64; 3],
}

/// Raw model description, exactly as read from or written to a file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub base: String,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub joints: Vec<JointSpec>,
}

/// Joint data resolved against link indices.
#[derive(Clone, Debug)]
pub(crate) struct Joint {
    pub kind: JointKind,
    pub origin: Transform,
    pub axis: Vec3,
    pub parent: usize,
    pub child: usize,
}

impl Joint {
    /// `^P H_C` for displacement `q`.
    pub fn transform(&self, q: f64) -> Transform {
        let motion = match self.kind {
            JointKind::Revolute => Transform::from_axis_angle(&self.axis, q),
            JointKind::Prismatic => Transform::from_translation(self.axis * q),
        };
        self.origin.compose(&motion)
    }

    /// Motion subspace in the child link frame.
    pub fn subspace(&self) -> SpatialMotion {
        match self.kind {
            JointKind::Revolute => SpatialMotion::new(Vec3::zeros(), self.axis),
            JointKind::Prismatic => SpatialMotion::new(self.axis, Vec3::zeros()),
        }
    }
}

/// A validated, immutable floating-base tree.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    pub(crate) inertias: Vec<SpatialInertia>,
    pub(crate) joints: Vec<Joint>,
    /// Joint whose child is the link, per link; `None` for the base.
    pub(crate) parent_joint: Vec<Option<usize>>,
    /// Joint indices ordered so that parents come before children.
    pub(crate) order: Vec<usize>,
    pub(crate) base: usize,
    gravity: Vec3,
    total_mass: f64,
}

/// Configuration `(H, s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    /// Base pose `^A H_B`.
    pub pose: Transform,
    pub s: DVector<f64>,
}

impl State {
    pub fn new(pose: Transform, s: DVector<f64>) -> Self {
        Self { pose, s }
    }

    pub fn at_shape(s: DVector<f64>) -> Self {
        Self::new(Transform::identity(), s)
    }
}

/// Velocity `ν = (v, ṡ)` with `v = ^B v_{A,B}`.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityState {
    pub v: SpatialMotion,
    pub sdot: DVector<f64>,
}

impl VelocityState {
    pub fn new(v: SpatialMotion, sdot: DVector<f64>) -> Self {
        Self { v, sdot }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(SpatialMotion::zero(), DVector::zeros(n))
    }

    /// Stacked `(v; ṡ)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut nu = DVector::zeros(6 + self.sdot.len());
        nu.fixed_rows_mut::<6>(0).copy_from(&self.v.to_vector());
        nu.rows_mut(6, self.sdot.len()).copy_from(&self.sdot);
        nu
    }

    pub fn from_vector(nu: &DVector<f64>) -> Self {
        let v = SpatialMotion::from_slice(&nu.as_slice()[..6]);
        Self::new(v, nu.rows(6, nu.len() - 6).into_owned())
    }
}

fn finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// Lists every violated invariant of a description. Empty means valid.
pub fn validate(spec: &ModelSpec) -> Vec<ModelError> {
    let mut report = Vec::new();

    let mut link_index = HashMap::new();
    for (i, l) in spec.links.iter().enumerate() {
        if link_index.insert(l.name.as_str(), i).is_some() {
            report.push(ModelError::DuplicateName(l.name.clone()));
        }
        if !finite(&[l.mass]) || !finite(&l.com) || !finite(&l.inertia) {
            report.push(ModelError::NonFinite(l.name.clone()));
        } else if !l.spatial_inertia().is_positive_definite()
            || l.inertia_at_com().cholesky().is_none()
        {
            report.push(ModelError::InertiaNotSpd(l.name.clone()));
        }
    }
    let mut joint_names = HashSet::new();
    for j in &spec.joints {
        if !joint_names.insert(j.name.as_str()) || link_index.contains_key(j.name.as_str()) {
            report.push(ModelError::DuplicateName(j.name.clone()));
        }
    }
    if !finite(&spec.gravity) {
        report.push(ModelError::NonFinite("gravity".into()));
    }
    let base = link_index.get(spec.base.as_str()).copied();
    if base.is_none() {
        report.push(ModelError::UnknownBase(spec.base.clone()));
    }

    let mut parent_of: HashMap<usize, (usize, usize)> = HashMap::new();
    for (ji, j) in spec.joints.iter().enumerate() {
        if !finite(&j.axis) || !finite(&j.origin.xyz) || !finite(&j.origin.rpy) {
            report.push(ModelError::NonFinite(j.name.clone()));
        } else if (Vec3::from(j.axis).norm() - 1.0).abs() > AXIS_TOL {
            report.push(ModelError::NonUnitAxis(j.name.clone()));
        }
        let parent = link_index.get(j.parent.as_str()).copied();
        let child = link_index.get(j.child.as_str()).copied();
        for (name, idx) in [(&j.parent, parent), (&j.child, child)] {
            if idx.is_none() {
                report.push(ModelError::UnknownLink {
                    joint: j.name.clone(),
                    link: name.clone(),
                });
            }
        }
        if let (Some(p), Some(c)) = (parent, child) {
            if Some(c) == base {
                report.push(ModelError::BaseHasParent(j.child.clone()));
            } else if parent_of.insert(c, (p, ji)).is_some() {
                report.push(ModelError::MultipleParents(j.child.clone()));
            }
        }
    }

    // Walk parent pointers from every link; a revisit is a cycle, a dead end
    // away from the base is a disconnected link.
    if let Some(base) = base {
        let mut cycle_joints = HashSet::new();
        for start in 0..spec.links.len() {
            let mut seen = HashSet::new();
            let mut at = start;
            while at != base {
                if !seen.insert(at) {
                    let (_, ji) = parent_of[&at];
                    if cycle_joints.insert(ji) {
                        report.push(ModelError::Cycle(spec.joints[ji].name.clone()));
                    }
                    break;
                }
                match parent_of.get(&at) {
                    Some(&(p, _)) => at = p,
                    None => {
                        report.push(ModelError::Disconnected(spec.links[at].name.clone()));
                        break;
                    }
                }
            }
        }
        let mut dedup = HashSet::new();
        report.retain(|e| dedup.insert(format!("{e}")));
    }
    report
}

impl Model {
    pub fn from_spec(spec: ModelSpec) -> Result<Self, ModelError> {
        if let Some(err) = validate(&spec).into_iter().next() {
            return Err(err);
        }
        let index: HashMap<&str, usize> = spec
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.name.as_str(), i))
            .collect();
        let base = index[spec.base.as_str()];
        let joints: Vec<Joint> = spec
            .joints
            .iter()
            .map(|j| Joint {
                kind: j.kind,
                origin: j.origin.transform(),
                axis: Vec3::from(j.axis),
                parent: index[j.parent.as_str()],
                child: index[j.child.as_str()],
            })
            .collect();
        let mut parent_joint = vec![None; spec.links.len()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); spec.links.len()];
        for (ji, j) in joints.iter().enumerate() {
            parent_joint[j.child] = Some(ji);
            children[j.parent].push(ji);
        }
        let mut order = Vec::with_capacity(joints.len());
        let mut queue = VecDeque::from([base]);
        while let Some(l) = queue.pop_front() {
            for &ji in &children[l] {
                order.push(ji);
                queue.push_back(joints[ji].child);
            }
        }
        let inertias: Vec<SpatialInertia> =
            spec.links.iter().map(LinkSpec::spatial_inertia).collect();
        let total_mass = inertias.iter().map(|i| i.mass).sum();
        Ok(Self {
            gravity: Vec3::from(spec.gravity),
            spec,
            inertias,
            joints,
            parent_joint,
            order,
            base,
            total_mass,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Number of internal joints `n_J`.
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn num_links(&self) -> usize {
        self.inertias.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn gravity(&self) -> Vec3 {
        self.gravity
    }

    pub fn base_index(&self) -> usize {
        self.base
    }

    pub fn link_names(&self) -> impl Iterator<Item = &str> {
        self.spec.links.iter().map(|l| l.name.as_str())
    }

    pub fn link_index(&self, name: &str) -> Result<usize, Error> {
        self.spec
            .links
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLink(name.to_owned()))
    }

    pub fn link_inertia(&self, link: usize) -> &SpatialInertia {
        &self.inertias[link]
    }

    pub fn joint_kind(&self, joint: usize) -> JointKind {
        self.joints[joint].kind
    }

    /// Parent link index of every link (`None` for the base).
    pub fn parent_link(&self, link: usize) -> Option<usize> {
        self.parent_joint[link].map(|j| self.joints[j].parent)
    }

    /// Copy of the model with a different gravity vector.
    pub fn with_gravity(&self, g: Vec3) -> Model {
        let mut m = self.clone();
        m.gravity = g;
        m.spec.gravity = [g.x, g.y, g.z];
        m
    }

    /// SHA-256 of the serialized description.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serialize(self).as_bytes()))
    }

    pub(crate) fn check_shape(&self, s: &DVector<f64>) -> Result<(), Error> {
        if s.len() != self.dof() {
            return Err(Error::Dimension {
                what: "shape",
                expected: self.dof(),
                got: s.len(),
            });
        }
        Ok(())
    }
}

pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    let spec: ModelSpec = toml::from_str(text).map_err(|e| ModelError::Schema(e.to_string()))?;
    Model::from_spec(spec)
}

pub fn serialize(model: &Model) -> String {
    toml::to_string(model.spec()).expect("model descriptions always serialize")
}

/// Planar three-body mechanism: a 1 kg base with `I_zz = 4 kg·m²` and two
/// 1 kg distal links (`I_zz = 1 kg·m²` about their CoM) hinged about `+z` at
/// `(∓1, 0, 0)`. Each distal CoM sits `d` metres from its hinge along the
/// link's x axis, which points along base `−y` at `s = 0`.
pub fn three_link(d: f64) -> Model {
    let joint = |name: &str, child: &str, x: f64| JointSpec {
        name: name.into(),
        parent: "base".into(),
        child: child.into(),
        kind: JointKind::Revolute,
        origin: Origin {
            xyz: [x, 0.0, 0.0],
            rpy: [0.0, 0.0, -FRAC_PI_2],
        },
        axis: [0.0, 0.0, 1.0],
    };
    let spec = ModelSpec {
        base: "base".into(),
        gravity: DEFAULT_GRAVITY,
        links: vec![
            LinkSpec::new("base", 1.0, [0.0; 3], [1.0, 0.0, 0.0, 1.0, 0.0, 4.0]),
            LinkSpec::new("link1", 1.0, [d, 0.0, 0.0], [1.0, 0.0, 0.0, 1.0, 0.0, 1.0]),
            LinkSpec::new("link2", 1.0, [d, 0.0, 0.0], [1.0, 0.0, 0.0, 1.0, 0.0, 1.0]),
        ],
        joints: vec![
            joint("joint1", "link1", -1.0),
            joint("joint2", "link2", 1.0),
        ],
    };
    Model::from_spec(spec).expect("three-link model is valid")
}

/// Parses names like `three-link:d=1` or `three-link` (d = 1).
pub fn builtin(name: &str) -> Option<Model> {
    let rest = name.strip_prefix("three-link")?;
    let d = match rest {
        "" => 1.0,
        r => r.strip_prefix(":d=")?.parse().ok()?,
    };
    Some(three_link(d))
}
