//! Model record, chain builder, state packing, and the patchable-field
//! registry.
//!
//! A [`ChainSpec`] describes a serial articulated chain (optionally on a
//! floating planar-yaw base) as plain data. [`build_chain_model`] validates
//! it and produces a [`SimModel`]: sizes, kinematic tree, parameter arrays,
//! and derived constants. Models are deep-copied with `Clone`; every copy is
//! independent of the original.
//!
//! Derived constants (`subtree_mass`, `total_mass`, `dof_inertia`) are
//! recomputed by [`SimModel::set_const`] at the nominal configuration
//! `qpos0`. Parameter patches through [`SimModel::patch_field`] deliberately
//! do not refresh them; the caller decides when to refresh based on
//! [`Field::requires_refresh`].

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hfield::HeightField;
use crate::kernel::{self, Workspace};

/// Tolerance on `| ||axis|| - 1 |` for joint axes.
pub const UNIT_AXIS_TOL: f64 = 1e-12;

/// One revolute joint: rotation axis and joint-origin offset, both expressed
/// in the parent body frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub axis: [f64; 3],
    pub offset: [f64; 3],
}

/// Inertial description of one body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    /// Mass in kg; must be positive.
    pub mass: f64,
    /// Diagonal body-frame inertia in kg·m²; components must be non-negative.
    pub inertia_diag: [f64; 3],
    /// COM offset in the body frame, meters.
    pub ipos: [f64; 3],
}

/// A site: a query point attached to a body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub body: usize,
    pub offset: [f64; 3],
}

/// Serializable height-field description. Elevation rows live inline or in
/// an external text/CSV matrix referenced by `data_file` (resolved relative
/// to the spec document by [`ChainSpec::load_file`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HfieldSpec {
    pub nrow: usize,
    pub ncol: usize,
    /// (sx, sy, sz, base): x/y half-extents, elevation scale, base thickness.
    pub size: [f64; 4],
    pub center: [f64; 2],
    pub z0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<String>,
}

impl HfieldSpec {
    fn to_height_field(&self) -> Result<HeightField> {
        let rows = self.rows.as_ref().ok_or_else(|| {
            Error::InvalidSpec(
                "hfield has no inline rows; resolve data_file via ChainSpec::load_file".into(),
            )
        })?;
        if rows.len() != self.nrow || rows.iter().any(|r| r.len() != self.ncol) {
            return Err(Error::InvalidHeightField(format!(
                "rows do not match declared {}x{} grid",
                self.nrow, self.ncol
            )));
        }
        HeightField::new(
            self.nrow,
            self.ncol,
            rows.iter().flatten().copied().collect(),
            self.size,
            self.center,
            self.z0,
        )
    }
}

/// Plain-data description of an articulated chain model.
///
/// Bodies are indexed 0..=K: body 0 is the base, body k (k >= 1) hangs from
/// body k-1 through revolute joint k-1. With `floating_base` the base owns
/// four dofs (world x, y, z and yaw), so `nq = nv = 4 + K`; otherwise
/// `nq = nv = K`. `nu = K` in both cases: one position actuator per joint.
///
/// Serializes to/from a TOML document; see `ChainSpec::to_toml_string`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub floating_base: bool,
    /// Integration timestep, seconds; must be positive.
    pub timestep: f64,
    pub gravity: [f64; 3],
    /// Per-dof armature inertia, length `nv`.
    pub dof_armature: Vec<f64>,
    /// Per-dof viscous damping, length `nv`.
    pub dof_damping: Vec<f64>,
    /// Per-dof Coulomb friction magnitude, length `nv`.
    pub dof_friction: Vec<f64>,
    /// Position-actuator gains, length `nu`.
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    /// Nominal configuration, length `nq`.
    pub qpos0: Vec<f64>,
    pub base_body: BodySpec,
    #[serde(default)]
    pub joints: Vec<JointSpec>,
    #[serde(default)]
    pub bodies: Vec<BodySpec>,
    #[serde(default)]
    pub sites: Vec<SiteSpec>,
    #[serde(default)]
    pub hfields: Vec<HfieldSpec>,
}

impl ChainSpec {
    pub fn njoint(&self) -> usize {
        self.joints.len()
    }

    /// Dofs owned by the base: 4 when floating (x, y, z, yaw), else 0.
    pub fn base_dofs(&self) -> usize {
        if self.floating_base {
            4
        } else {
            0
        }
    }

    pub fn nv(&self) -> usize {
        self.base_dofs() + self.njoint()
    }

    /// Serializes to a TOML document. The output is canonical: generating,
    /// loading, and generating again yields byte-identical text.
    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn from_toml_str(text: &str) -> Result<ChainSpec> {
        Ok(toml::from_str(text)?)
    }

    /// Loads a spec document from disk, resolving any hfield `data_file`
    /// references (plain text/CSV elevation matrices) relative to the
    /// document's directory.
    pub fn load_file(path: impl AsRef<std::path::Path>) -> Result<ChainSpec> {
        let path = path.as_ref();
        let mut spec = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or_else(|| std::path::Path::new("."));
        for hf in &mut spec.hfields {
            if hf.rows.is_none() {
                let file = hf.data_file.as_ref().ok_or_else(|| {
                    Error::InvalidSpec("hfield needs either rows or data_file".into())
                })?;
                let text = std::fs::read_to_string(dir.join(file))?;
                let (nrow, ncol, data) = crate::hfield::parse_elevation_grid(&text)?;
                if nrow != hf.nrow || ncol != hf.ncol {
                    return Err(Error::InvalidHeightField(format!(
                        "{file}: grid is {nrow}x{ncol}, spec declares {}x{}",
                        hf.nrow, hf.ncol
                    )));
                }
                hf.rows = Some(data.chunks(ncol).map(<[f64]>::to_vec).collect());
            }
        }
        Ok(spec)
    }
}

/// Compiled simulation model: sizes, kinematic tree, parameters, and derived
/// constants. All arrays are plain vectors, so `Clone` produces a deep,
/// independent copy.
#[derive(Clone, Debug, PartialEq)]
pub struct SimModel {
    // sizes
    pub nq: usize,
    pub nv: usize,
    pub nu: usize,
    pub nbody: usize,
    pub nsite: usize,
    pub nsensordata: usize,
    pub floating_base: bool,

    // kinematic tree
    /// Parent body index; entry 0 is unused (the base has no parent).
    pub body_parent: Vec<usize>,
    /// Per-joint rotation axis in the parent frame, unit norm.
    pub jnt_axis: Vec<Vector3<f64>>,
    /// Per-joint origin offset in the parent frame.
    pub jnt_offset: Vec<Vector3<f64>>,
    pub site_body: Vec<usize>,
    pub site_offset: Vec<Vector3<f64>>,

    // parameters
    pub body_mass: Vec<f64>,
    pub body_inertia: Vec<Vector3<f64>>,
    pub body_ipos: Vec<Vector3<f64>>,
    pub dof_armature: Vec<f64>,
    pub dof_damping: Vec<f64>,
    pub dof_friction: Vec<f64>,
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    pub gravity: Vector3<f64>,
    pub timestep: f64,
    pub qpos0: Vec<f64>,
    pub hfields: Vec<HeightField>,

    // derived (maintained by set_const)
    pub subtree_mass: Vec<f64>,
    pub total_mass: f64,
    /// Diagonal generalized inertia per dof, evaluated at `qpos0`.
    pub dof_inertia: Vec<f64>,
}

impl SimModel {
    /// Packed state length: `1 + nq + nv`.
    pub fn nstate(&self) -> usize {
        1 + self.nq + self.nv
    }

    /// Dofs owned by the base (4 when floating, else 0).
    pub fn base_dofs(&self) -> usize {
        if self.floating_base {
            4
        } else {
            0
        }
    }

    /// Pools and the rollout oracle accept mixed model lists as long as all
    /// sizes agree; parameter values may differ.
    pub fn compatible(&self, other: &SimModel) -> bool {
        self.nq == other.nq
            && self.nv == other.nv
            && self.nu == other.nu
            && self.nbody == other.nbody
            && self.nsite == other.nsite
            && self.nsensordata == other.nsensordata
            && self.hfields.len() == other.hfields.len()
    }

    /// Recomputes derived constants from the current parameters at the
    /// nominal configuration `qpos0`.
    ///
    /// `subtree_mass[b]` sums the masses of `b` and everything below it;
    /// `total_mass` is the whole chain. `dof_inertia` is a fixed diagonal
    /// generalized inertia: for base translational dofs it is
    /// `armature + total_mass`; for rotational dofs (base yaw and each
    /// revolute joint) it sums, over the dof's subtree, the point-mass term
    /// `m_b * ||a x (com_b - p)||^2` plus the rotated body inertia
    /// `a^T R diag(I_b) R^T a`, all evaluated at `qpos0`.
    pub fn set_const(&mut self) {
        let mut ws = Workspace::new(self);
        self.set_const_with(&mut ws);
    }

    // set_const reusing caller-owned scratch; the batched reset path calls
    // this once per selected environment with its worker's workspace.
    pub(crate) fn set_const_with(&mut self, ws: &mut Workspace) {
        self.subtree_mass.clone_from(&self.body_mass);
        for b in (1..self.nbody).rev() {
            let parent = self.body_parent[b];
            self.subtree_mass[parent] += self.subtree_mass[b];
        }
        self.total_mass = self.subtree_mass[0];

        {
            let m = &*self;
            kernel::kinematics(m, &m.qpos0, ws);
        }

        let base = self.base_dofs();
        for d in 0..self.nv {
            if self.floating_base && d < 3 {
                self.dof_inertia[d] = self.dof_armature[d] + self.total_mass;
                continue;
            }
            // base yaw sweeps every body; joint k sweeps bodies k+1..
            let first_body = if self.floating_base && d == 3 {
                0
            } else {
                d - base + 1
            };
            let axis = ws.dof_axis[d];
            let anchor = ws.dof_anchor[d];
            let mut sum = self.dof_armature[d];
            for b in first_body..self.nbody {
                let lever = axis.cross(&(ws.xcom[b] - anchor));
                let a_body = ws.xmat[b].transpose() * axis;
                let inertia = &self.body_inertia[b];
                sum += self.body_mass[b] * lever.norm_squared()
                    + a_body.x * a_body.x * inertia.x
                    + a_body.y * a_body.y * inertia.y
                    + a_body.z * a_body.z * inertia.z;
            }
            self.dof_inertia[d] = sum;
        }
    }

    /// Overwrites the parameter array behind a registered field name.
    ///
    /// Derived constants are not refreshed here; callers batch refreshes via
    /// [`SimModel::set_const`] when [`Field::requires_refresh`] says so.
    pub fn patch_field(&mut self, name: &str, values: &[f64]) -> Result<()> {
        let field = Field::from_name(name).ok_or_else(|| Error::UnknownField(name.into()))?;
        let expected = field.len(self);
        if values.len() != expected {
            return Err(Error::FieldShape {
                field: name.into(),
                expected,
                got: values.len(),
            });
        }
        match field {
            Field::BodyMass => self.body_mass.copy_from_slice(values),
            Field::BodyInertia => {
                for (b, chunk) in values.chunks_exact(3).enumerate() {
                    self.body_inertia[b] = Vector3::new(chunk[0], chunk[1], chunk[2]);
                }
            }
            Field::BodyIpos => {
                for (b, chunk) in values.chunks_exact(3).enumerate() {
                    self.body_ipos[b] = Vector3::new(chunk[0], chunk[1], chunk[2]);
                }
            }
            Field::DofArmature => self.dof_armature.copy_from_slice(values),
            Field::Gravity => self.gravity = Vector3::new(values[0], values[1], values[2]),
            Field::Kp => self.kp.copy_from_slice(values),
            Field::Kd => self.kd.copy_from_slice(values),
            Field::DofDamping => self.dof_damping.copy_from_slice(values),
            Field::DofFriction => self.dof_friction.copy_from_slice(values),
        }
        Ok(())
    }
}

/// Registered reset-lifecycle patch fields.
///
/// Fields whose derived constants depend on them carry the refresh flag;
/// gains, gravity, damping, and friction are written directly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    BodyMass,
    BodyInertia,
    BodyIpos,
    DofArmature,
    Gravity,
    Kp,
    Kd,
    DofDamping,
    DofFriction,
}

impl Field {
    pub const ALL: [Field; 9] = [
        Field::BodyMass,
        Field::BodyInertia,
        Field::BodyIpos,
        Field::DofArmature,
        Field::Gravity,
        Field::Kp,
        Field::Kd,
        Field::DofDamping,
        Field::DofFriction,
    ];

    pub fn from_name(name: &str) -> Option<Field> {
        Some(match name {
            "body_mass" => Field::BodyMass,
            "body_inertia" => Field::BodyInertia,
            "body_ipos" => Field::BodyIpos,
            "dof_armature" => Field::DofArmature,
            "gravity" => Field::Gravity,
            "kp" => Field::Kp,
            "kd" => Field::Kd,
            "dof_damping" => Field::DofDamping,
            "dof_friction" => Field::DofFriction,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::BodyMass => "body_mass",
            Field::BodyInertia => "body_inertia",
            Field::BodyIpos => "body_ipos",
            Field::DofArmature => "dof_armature",
            Field::Gravity => "gravity",
            Field::Kp => "kp",
            Field::Kd => "kd",
            Field::DofDamping => "dof_damping",
            Field::DofFriction => "dof_friction",
        }
    }

    /// Whether patching this field invalidates derived constants.
    pub fn requires_refresh(self) -> bool {
        matches!(
            self,
            Field::BodyMass | Field::BodyInertia | Field::BodyIpos | Field::DofArmature
        )
    }

    /// Flattened per-environment value count.
    pub fn len(self, m: &SimModel) -> usize {
        match self {
            Field::BodyMass => m.nbody,
            Field::BodyInertia | Field::BodyIpos => 3 * m.nbody,
            Field::DofArmature | Field::DofDamping | Field::DofFriction => m.nv,
            Field::Gravity => 3,
            Field::Kp | Field::Kd => m.nu,
        }
    }
}

/// Full-physics state: the minimal data from which stepping is
/// deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub time: f64,
    pub qpos: Vec<f64>,
    pub qvel: Vec<f64>,
}

impl StateVector {
    pub fn zeros(nq: usize, nv: usize) -> StateVector {
        StateVector {
            time: 0.0,
            qpos: vec![0.0; nq],
            qvel: vec![0.0; nv],
        }
    }

    /// Packs as `[time, qpos.., qvel..]`, length `1 + nq + nv`.
    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + self.qpos.len() + self.qvel.len());
        out.push(self.time);
        out.extend_from_slice(&self.qpos);
        out.extend_from_slice(&self.qvel);
        out
    }

    /// Packs into a preallocated slice of length `1 + nq + nv`.
    pub fn pack_into(&self, out: &mut [f64]) {
        let nq = self.qpos.len();
        out[0] = self.time;
        out[1..1 + nq].copy_from_slice(&self.qpos);
        out[1 + nq..].copy_from_slice(&self.qvel);
    }

    /// Inverse of [`StateVector::pack`]; errors on length mismatch.
    pub fn unpack(packed: &[f64], nq: usize, nv: usize) -> Result<StateVector> {
        if packed.len() != 1 + nq + nv {
            return Err(Error::LengthMismatch {
                what: "packed state",
                expected: 1 + nq + nv,
                got: packed.len(),
            });
        }
        Ok(StateVector {
            time: packed[0],
            qpos: packed[1..1 + nq].to_vec(),
            qvel: packed[1 + nq..].to_vec(),
        })
    }
}

/// Validates a [`ChainSpec`] and compiles it into a [`SimModel`] with
/// derived constants already computed.
pub fn build_chain_model(spec: &ChainSpec) -> Result<SimModel> {
    let njoint = spec.njoint();
    let nbody = 1 + njoint;
    let nv = spec.nv();
    let nq = nv;
    let nu = njoint;

    if spec.bodies.len() != njoint {
        return Err(Error::LengthMismatch {
            what: "bodies (one per joint)",
            expected: njoint,
            got: spec.bodies.len(),
        });
    }
    if !(spec.timestep > 0.0) {
        return Err(Error::NonPositiveTimestep(spec.timestep));
    }
    for (k, joint) in spec.joints.iter().enumerate() {
        let norm = Vector3::from(joint.axis).norm();
        if (norm - 1.0).abs() > UNIT_AXIS_TOL {
            return Err(Error::NonUnitAxis { joint: k, norm });
        }
    }
    let all_bodies = std::iter::once(&spec.base_body).chain(spec.bodies.iter());
    for (b, body) in all_bodies.enumerate() {
        if !(body.mass > 0.0) {
            return Err(Error::NonPositiveMass {
                body: b,
                mass: body.mass,
            });
        }
        if let Some(&value) = body.inertia_diag.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::NegativeInertia { body: b, value });
        }
    }
    for (s, site) in spec.sites.iter().enumerate() {
        if site.body >= nbody {
            return Err(Error::SiteBodyOutOfRange {
                site: s,
                body: site.body,
                nbody,
            });
        }
    }
    let check_len = |what: &'static str, got: usize, expected: usize| {
        if got != expected {
            Err(Error::LengthMismatch {
                what,
                expected,
                got,
            })
        } else {
            Ok(())
        }
    };
    check_len("dof_armature", spec.dof_armature.len(), nv)?;
    check_len("dof_damping", spec.dof_damping.len(), nv)?;
    check_len("dof_friction", spec.dof_friction.len(), nv)?;
    check_len("kp", spec.kp.len(), nu)?;
    check_len("kd", spec.kd.len(), nu)?;
    check_len("qpos0", spec.qpos0.len(), nq)?;

    let hfields = spec
        .hfields
        .iter()
        .map(HfieldSpec::to_height_field)
        .collect::<Result<Vec<_>>>()?;

    let bodies: Vec<&BodySpec> = std::iter::once(&spec.base_body)
        .chain(spec.bodies.iter())
        .collect();
    let nsite = spec.sites.len();
    let mut model = SimModel {
        nq,
        nv,
        nu,
        nbody,
        nsite,
        nsensordata: nq + nv + 3 * nsite,
        floating_base: spec.floating_base,
        body_parent: (0..nbody).map(|b| b.saturating_sub(1)).collect(),
        jnt_axis: spec.joints.iter().map(|j| Vector3::from(j.axis)).collect(),
        jnt_offset: spec
            .joints
            .iter()
            .map(|j| Vector3::from(j.offset))
            .collect(),
        site_body: spec.sites.iter().map(|s| s.body).collect(),
        site_offset: spec.sites.iter().map(|s| Vector3::from(s.offset)).collect(),
        body_mass: bodies.iter().map(|b| b.mass).collect(),
        body_inertia: bodies
            .iter()
            .map(|b| Vector3::from(b.inertia_diag))
            .collect(),
        body_ipos: bodies.iter().map(|b| Vector3::from(b.ipos)).collect(),
        dof_armature: spec.dof_armature.clone(),
        dof_damping: spec.dof_damping.clone(),
        dof_friction: spec.dof_friction.clone(),
        kp: spec.kp.clone(),
        kd: spec.kd.clone(),
        gravity: Vector3::from(spec.gravity),
        timestep: spec.timestep,
        qpos0: spec.qpos0.clone(),
        hfields,
        subtree_mass: vec![0.0; nbody],
        total_mass: 0.0,
        dof_inertia: vec![0.0; nv],
    };
    model.set_const();
    Ok(model)
}
