//! Shared helpers for integration tests: seeded random chains and states,
//! plus independent oracles kept deliberately separate from the library's
//! implementation paths.

use battenv_core::model::{BodySpec, ChainSpec, JointSpec, SiteSpec};
use battenv_core::SimModel;
use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Every float array of a model, flattened to bit patterns. Two models with
/// equal fingerprints are bitwise-identical in all parameters and derived
/// constants.
pub fn model_fingerprint(m: &SimModel) -> Vec<u64> {
    let mut out = Vec::new();
    let mut push = |v: &[f64]| out.extend(v.iter().map(|x| x.to_bits()));
    push(&m.body_mass);
    for v in &m.body_inertia {
        push(v.as_slice());
    }
    for v in &m.body_ipos {
        push(v.as_slice());
    }
    push(&m.dof_armature);
    push(&m.dof_damping);
    push(&m.dof_friction);
    push(&m.kp);
    push(&m.kd);
    push(m.gravity.as_slice());
    push(&m.qpos0);
    push(&m.subtree_mass);
    push(&[m.total_mass]);
    push(&m.dof_inertia);
    for hf in &m.hfields {
        push(&hf.data);
    }
    out
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.3 {
            let u: Vector3<f64> = v / n;
            return [u.x, u.y, u.z];
        }
    }
}

/// Seeded random serial chain with non-degenerate joints.
pub fn random_chain(rng: &mut ChaCha8Rng, njoint: usize, floating_base: bool) -> ChainSpec {
    let base_dofs = if floating_base { 4 } else { 0 };
    let nv = base_dofs + njoint;
    let joints = (0..njoint)
        .map(|_| JointSpec {
            axis: random_unit(rng),
            offset: [
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            ],
        })
        .collect();
    let bodies = (0..njoint)
        .map(|_| BodySpec {
            mass: rng.random_range(0.3..2.0),
            inertia_diag: [
                rng.random_range(0.0..0.01),
                rng.random_range(0.0..0.01),
                rng.random_range(0.0..0.01),
            ],
            ipos: [
                rng.random_range(-0.15..0.15),
                rng.random_range(-0.15..0.15),
                rng.random_range(-0.15..0.15),
            ],
        })
        .collect();
    let nsite = 1 + (njoint % 2);
    let sites = (0..nsite)
        .map(|s| SiteSpec {
            body: if s == 0 { njoint } else { rng.random_range(0..=njoint) },
            offset: [
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            ],
        })
        .collect();
    ChainSpec {
        floating_base,
        timestep: 0.01,
        gravity: [0.0, 0.0, -9.81],
        dof_armature: (0..nv).map(|_| rng.random_range(0.005..0.05)).collect(),
        dof_damping: (0..nv).map(|_| rng.random_range(0.0..0.3)).collect(),
        dof_friction: (0..nv).map(|_| rng.random_range(0.0..0.05)).collect(),
        kp: (0..njoint).map(|_| rng.random_range(0.0..25.0)).collect(),
        kd: (0..njoint).map(|_| rng.random_range(0.0..0.8)).collect(),
        qpos0: (0..nv).map(|_| rng.random_range(-0.3..0.3)).collect(),
        base_body: BodySpec {
            mass: rng.random_range(0.5..4.0),
            inertia_diag: [
                rng.random_range(0.0..0.02),
                rng.random_range(0.0..0.02),
                rng.random_range(0.0..0.02),
            ],
            ipos: [
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
            ],
        },
        joints,
        bodies,
        sites,
        hfields: vec![],
    }
}

/// Random packed state batch, `(n, nstate)`.
pub fn random_states(rng: &mut ChaCha8Rng, m: &SimModel, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * m.nstate());
    for _ in 0..n {
        out.push(rng.random_range(0.0..1.0)); // time
        for _ in 0..m.nq {
            out.push(rng.random_range(-1.0..1.0));
        }
        for _ in 0..m.nv {
            out.push(rng.random_range(-2.0..2.0));
        }
    }
    out
}

pub fn random_values(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Independent derived-constant oracle.
///
/// Recomputes the diagonal generalized inertia from scratch using isometry
/// composition (quaternion rotations) and explicit path-membership tests,
/// sharing no code with `SimModel::set_const`.
pub fn oracle_dof_inertia(m: &SimModel) -> Vec<f64> {
    let base = m.base_dofs();
    // world pose per body via isometries
    let mut pose = vec![Isometry3::identity(); m.nbody];
    if m.floating_base {
        pose[0] = Isometry3::from_parts(
            Translation3::new(m.qpos0[0], m.qpos0[1], m.qpos0[2]),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), m.qpos0[3]),
        );
    }
    for b in 1..m.nbody {
        let k = b - 1;
        let local = Isometry3::from_parts(
            Translation3::from(m.jnt_offset[k]),
            UnitQuaternion::from_axis_angle(
                &nalgebra::Unit::new_normalize(m.jnt_axis[k]),
                m.qpos0[base + k],
            ),
        );
        pose[b] = pose[m.body_parent[b]] * local;
    }
    // world axis and anchor per rotational dof
    let mut axis = vec![Vector3::zeros(); m.nv];
    let mut anchor = vec![Vector3::zeros(); m.nv];
    if m.floating_base {
        axis[3] = Vector3::z();
        anchor[3] = pose[0].translation.vector;
    }
    for k in 0..m.nu {
        let parent = m.body_parent[k + 1];
        axis[base + k] = pose[parent].rotation * m.jnt_axis[k];
        anchor[base + k] = (pose[parent] * nalgebra::Point3::from(m.jnt_offset[k])).coords;
    }
    // a rotational dof moves body b iff it lies on the path root -> b
    let on_path = |d: usize, b: usize| -> bool {
        if m.floating_base && d == 3 {
            return true;
        }
        let joint = d - base;
        let mut cur = b;
        while cur != 0 {
            if cur - 1 == joint {
                return true;
            }
            cur = m.body_parent[cur];
        }
        false
    };

    let total: f64 = m.body_mass.iter().sum();
    (0..m.nv)
        .map(|d| {
            if m.floating_base && d < 3 {
                return m.dof_armature[d] + total;
            }
            let mut sum = m.dof_armature[d];
            for b in 0..m.nbody {
                if !on_path(d, b) {
                    continue;
                }
                let com = (pose[b] * nalgebra::Point3::from(m.body_ipos[b])).coords;
                let lever = axis[d].cross(&(com - anchor[d]));
                let a_local = pose[b].rotation.inverse() * axis[d];
                let i = &m.body_inertia[b];
                sum += m.body_mass[b] * lever.norm_squared()
                    + a_local.x * a_local.x * i.x
                    + a_local.y * a_local.y * i.y
                    + a_local.z * a_local.z * i.z;
            }
            sum
        })
        .collect()
}
