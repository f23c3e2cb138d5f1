//! Named chain presets used by the CLI, benchmarks, and tests.
//!
//! The multi-joint presets match only the dof counts of well-known robots
//! (arm, hand, quadruped, humanoid); link geometry and inertial values are
//! synthetic. `pendulum` is the canonical single-dof fixture: unit point
//! mass at distance 1 from a revolute joint about +y.

use crate::model::{BodySpec, ChainSpec, HfieldSpec, JointSpec, SiteSpec};

/// All preset names accepted by [`by_name`].
pub const NAMES: [&str; 6] = [
    "pendulum",
    "franka9",
    "allegro16",
    "go1-18",
    "humanoid56",
    "terrain-walker",
];

pub fn by_name(name: &str) -> Option<ChainSpec> {
    Some(match name {
        "pendulum" => pendulum(),
        "franka9" => chain(9, false),
        "allegro16" => chain(16, false),
        "go1-18" => chain(14, true),
        "humanoid56" => chain(52, true),
        "terrain-walker" => terrain_walker(),
        _ => return None,
    })
}

/// Point-mass pendulum: fixed base, one revolute joint about (0, 1, 0),
/// unit mass with COM at (1, 0, 0), zero body inertia, one site at the COM.
pub fn pendulum() -> ChainSpec {
    ChainSpec {
        floating_base: false,
        timestep: 0.01,
        gravity: [0.0, 0.0, -9.81],
        dof_armature: vec![0.0],
        dof_damping: vec![0.0],
        dof_friction: vec![0.0],
        kp: vec![0.0],
        kd: vec![0.0],
        qpos0: vec![0.0],
        base_body: BodySpec {
            mass: 1.0,
            inertia_diag: [0.0; 3],
            ipos: [0.0; 3],
        },
        joints: vec![JointSpec {
            axis: [0.0, 1.0, 0.0],
            offset: [0.0, 0.0, 0.0],
        }],
        bodies: vec![BodySpec {
            mass: 1.0,
            inertia_diag: [0.0; 3],
            ipos: [1.0, 0.0, 0.0],
        }],
        sites: vec![SiteSpec {
            body: 1,
            offset: [1.0, 0.0, 0.0],
        }],
        hfields: vec![],
    }
}

/// Deterministic serial chain with `njoint` revolute joints and one site at
/// the tip. Axes cycle z/y/x and link parameters vary with a fixed pattern,
/// so consecutive joints are never collinear.
pub fn chain(njoint: usize, floating_base: bool) -> ChainSpec {
    let base_dofs = if floating_base { 4 } else { 0 };
    let nv = base_dofs + njoint;
    let joints = (0..njoint)
        .map(|k| JointSpec {
            axis: match k % 3 {
                0 => [0.0, 0.0, 1.0],
                1 => [0.0, 1.0, 0.0],
                _ => [1.0, 0.0, 0.0],
            },
            offset: [0.1, 0.02 * (k % 2) as f64, 0.03 * (k % 3) as f64],
        })
        .collect();
    let bodies = (0..njoint)
        .map(|k| BodySpec {
            mass: 0.8 + 0.1 * (k % 5) as f64,
            inertia_diag: [
                0.002 + 0.001 * (k % 3) as f64,
                0.003,
                0.001 + 0.0005 * (k % 2) as f64,
            ],
            ipos: [0.05, 0.0, 0.01 * (k % 2) as f64],
        })
        .collect();
    ChainSpec {
        floating_base,
        timestep: 0.01,
        gravity: [0.0, 0.0, -9.81],
        dof_armature: vec![0.02; nv],
        dof_damping: vec![0.1; nv],
        dof_friction: vec![0.0; nv],
        kp: vec![20.0; njoint],
        kd: vec![0.5; njoint],
        qpos0: vec![0.0; nv],
        base_body: BodySpec {
            mass: 3.0,
            inertia_diag: [0.02, 0.02, 0.02],
            ipos: [0.0; 3],
        },
        joints,
        bodies,
        sites: vec![SiteSpec {
            body: njoint,
            offset: [0.1, 0.0, 0.0],
        }],
        hfields: vec![],
    }
}

/// Floating 6-joint walker over a stairs height field: elevation rises in
/// monotone steps along +x.
pub fn terrain_walker() -> ChainSpec {
    let mut spec = chain(6, true);
    spec.qpos0[2] = 0.5;
    let (nrow, ncol) = (16, 16);
    let rows = (0..nrow)
        .map(|_| (0..ncol).map(|c| (c / 2) as f64 / 7.0).collect())
        .collect();
    spec.hfields.push(HfieldSpec {
        nrow,
        ncol,
        size: [2.0, 2.0, 0.4, 0.1],
        center: [0.0, 0.0],
        z0: 0.0,
        rows: Some(rows),
        data_file: None,
    });
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_chain_model;

    #[test]
    fn preset_sizes_match_names() {
        let sizes: Vec<(usize, usize)> = NAMES
            .iter()
            .map(|n| {
                let m = build_chain_model(&by_name(n).unwrap()).unwrap();
                (m.nq, m.nu)
            })
            .collect();
        assert_eq!(
            sizes,
            [(1, 1), (9, 9), (16, 16), (18, 14), (56, 52), (10, 6)]
        );
    }

    #[test]
    fn terrain_walker_stairs_are_monotone_along_x() {
        let m = build_chain_model(&terrain_walker()).unwrap();
        let hf = &m.hfields[0];
        for r in 0..hf.nrow {
            for c in 1..hf.ncol {
                assert!(hf.data[r * hf.ncol + c] >= hf.data[r * hf.ncol + c - 1]);
            }
        }
    }

    #[test]
    fn unknown_preset_is_none() {
        assert!(by_name("walker99").is_none());
    }
}
