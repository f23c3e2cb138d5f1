//! Articulated-chain physics kernel: forward kinematics, sensor evaluation,
//! one integration step, and analytic site Jacobians.
//!
//! The kernel is stateless: every call reads a [`SimModel`] and writes into a
//! caller-owned [`Workspace`]. Models are read-only during kernel calls and a
//! workspace must never be shared by two concurrent calls. Workspace contents
//! are transient between calls, except `sensordata`, which [`step`] leaves
//! holding the pre-integration sensors of its final evaluation (mirroring the
//! upstream convention that sensors are computed before integration).

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::model::{SimModel, StateVector};

/// Per-worker scratch sized to one model's dimensions.
#[derive(Clone, Debug)]
pub struct Workspace {
    /// Body world positions.
    pub xpos: Vec<Vector3<f64>>,
    /// Body world rotations.
    pub xmat: Vec<Matrix3<f64>>,
    /// Body world centers of mass.
    pub xcom: Vec<Vector3<f64>>,
    /// World rotation axis (or translation direction) per dof.
    pub dof_axis: Vec<Vector3<f64>>,
    /// World anchor point per dof; meaningful for rotational dofs.
    pub dof_anchor: Vec<Vector3<f64>>,
    /// Site world positions.
    pub site_xpos: Vec<Vector3<f64>>,
    /// Cached sensor vector from the latest forward evaluation.
    pub sensordata: Vec<f64>,
    /// Generalized force accumulator.
    pub qfrc: Vec<f64>,
}

impl Workspace {
    pub fn new(m: &SimModel) -> Workspace {
        Workspace {
            xpos: vec![Vector3::zeros(); m.nbody],
            xmat: vec![Matrix3::identity(); m.nbody],
            xcom: vec![Vector3::zeros(); m.nbody],
            dof_axis: vec![Vector3::zeros(); m.nv],
            dof_anchor: vec![Vector3::zeros(); m.nv],
            site_xpos: vec![Vector3::zeros(); m.nsite],
            sensordata: vec![0.0; m.nsensordata],
            qfrc: vec![0.0; m.nv],
        }
    }
}

fn rot_z(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Fills world poses, per-dof axes/anchors, body COMs, and site positions
/// for configuration `qpos`.
///
/// The base pose is `(qpos[0..3], Rz(qpos[3]))` when floating, identity
/// otherwise. Body `k` is placed at its joint origin in the parent frame and
/// rotated about the joint axis by its angle.
pub fn kinematics(m: &SimModel, qpos: &[f64], ws: &mut Workspace) {
    let base = m.base_dofs();
    if m.floating_base {
        ws.xpos[0] = Vector3::new(qpos[0], qpos[1], qpos[2]);
        ws.xmat[0] = rot_z(qpos[3]);
        ws.dof_axis[0] = Vector3::x();
        ws.dof_axis[1] = Vector3::y();
        ws.dof_axis[2] = Vector3::z();
        ws.dof_anchor[0] = Vector3::zeros();
        ws.dof_anchor[1] = Vector3::zeros();
        ws.dof_anchor[2] = Vector3::zeros();
        ws.dof_axis[3] = Vector3::z();
        ws.dof_anchor[3] = ws.xpos[0];
    } else {
        ws.xpos[0] = Vector3::zeros();
        ws.xmat[0] = Matrix3::identity();
    }
    for k in 0..m.nu {
        let body = k + 1;
        let parent = m.body_parent[body];
        let anchor = ws.xpos[parent] + ws.xmat[parent] * m.jnt_offset[k];
        let world_axis = ws.xmat[parent] * m.jnt_axis[k];
        let local = Rotation3::from_axis_angle(&Unit::new_unchecked(m.jnt_axis[k]), qpos[base + k]);
        ws.xmat[body] = ws.xmat[parent] * local.into_inner();
        ws.xpos[body] = anchor;
        ws.dof_axis[base + k] = world_axis;
        ws.dof_anchor[base + k] = anchor;
    }
    for b in 0..m.nbody {
        ws.xcom[b] = ws.xpos[b] + ws.xmat[b] * m.body_ipos[b];
    }
    for s in 0..m.nsite {
        let b = m.site_body[s];
        ws.site_xpos[s] = ws.xpos[b] + ws.xmat[b] * m.site_offset[s];
    }
}

/// Runs kinematics and assembles the sensor vector
/// `[qpos | qvel | site positions]`, caching it in the workspace.
///
/// Pure: the state is untouched and equal inputs give bitwise-equal output.
pub fn forward<'w>(m: &SimModel, state: &StateVector, ws: &'w mut Workspace) -> &'w [f64] {
    forward_slices(m, &state.qpos, &state.qvel, ws)
}

// Slice-level forward used by the batched paths to avoid unpacking states
// into owned vectors.
pub(crate) fn forward_slices<'w>(
    m: &SimModel,
    qpos: &[f64],
    qvel: &[f64],
    ws: &'w mut Workspace,
) -> &'w [f64] {
    kinematics(m, qpos, ws);
    let (nq, nv) = (m.nq, m.nv);
    ws.sensordata[..nq].copy_from_slice(qpos);
    ws.sensordata[nq..nq + nv].copy_from_slice(qvel);
    for (s, pos) in ws.site_xpos.iter().enumerate() {
        let at = nq + nv + 3 * s;
        ws.sensordata[at] = pos.x;
        ws.sensordata[at + 1] = pos.y;
        ws.sensordata[at + 2] = pos.z;
    }
    &ws.sensordata
}

// Adds a world-frame force applied at `point` (plus an optional torque) into
// the generalized force vector, walking only the dofs on the root->body path.
fn add_applied_wrench(
    qfrc: &mut [f64],
    dof_axis: &[Vector3<f64>],
    dof_anchor: &[Vector3<f64>],
    floating: bool,
    body: usize,
    point: &Vector3<f64>,
    force: &Vector3<f64>,
    torque: Option<&Vector3<f64>>,
) {
    let base = if floating { 4 } else { 0 };
    if floating {
        qfrc[0] += force.x;
        qfrc[1] += force.y;
        qfrc[2] += force.z;
        qfrc[3] += dof_axis[3].cross(&(point - dof_anchor[3])).dot(force);
        if let Some(t) = torque {
            qfrc[3] += dof_axis[3].dot(t);
        }
    }
    for k in 0..body {
        let d = base + k;
        qfrc[d] += dof_axis[d].cross(&(point - dof_anchor[d])).dot(force);
        if let Some(t) = torque {
            qfrc[d] += dof_axis[d].dot(t);
        }
    }
}

fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Advances the state by one semi-implicit Euler step.
///
/// Sensors for the pre-integration state are evaluated first and stay cached
/// in the workspace. Generalized forces collect gravity (exact Jacobians at
/// the current configuration), position-actuator terms
/// `kp (ctrl - qpos) - kd qvel` on each joint dof, per-dof damping and
/// Coulomb friction, and optional world-frame wrenches applied at body
/// origins (`applied` is `[force, torque]` per body, length `6 * nbody`).
/// Acceleration divides by the diagonal `dof_inertia`, then
/// `qvel += dt * qacc`, `qpos += dt * qvel`, `time += dt`.
pub fn step(
    m: &SimModel,
    state: &mut StateVector,
    ctrl: &[f64],
    applied: Option<&[f64]>,
    ws: &mut Workspace,
) {
    forward(m, state, ws);

    let Workspace {
        xpos,
        xcom,
        dof_axis,
        dof_anchor,
        qfrc,
        ..
    } = ws;
    qfrc.fill(0.0);

    for b in 0..m.nbody {
        let weight = m.body_mass[b] * m.gravity;
        add_applied_wrench(
            qfrc,
            dof_axis,
            dof_anchor,
            m.floating_base,
            b,
            &xcom[b],
            &weight,
            None,
        );
    }

    let base = m.base_dofs();
    for j in 0..m.nu {
        let d = base + j;
        qfrc[d] += m.kp[j] * (ctrl[j] - state.qpos[d]) - m.kd[j] * state.qvel[d];
    }

    for d in 0..m.nv {
        qfrc[d] -= m.dof_damping[d] * state.qvel[d];
        qfrc[d] -= m.dof_friction[d] * signum0(state.qvel[d]);
    }

    if let Some(wrench) = applied {
        for b in 0..m.nbody {
            let force = Vector3::new(wrench[6 * b], wrench[6 * b + 1], wrench[6 * b + 2]);
            let torque = Vector3::new(wrench[6 * b + 3], wrench[6 * b + 4], wrench[6 * b + 5]);
            add_applied_wrench(
                qfrc,
                dof_axis,
                dof_anchor,
                m.floating_base,
                b,
                &xpos[b],
                &force,
                Some(&torque),
            );
        }
    }

    for d in 0..m.nv {
        let qacc = qfrc[d] / m.dof_inertia[d];
        state.qvel[d] += m.timestep * qacc;
        state.qpos[d] += m.timestep * state.qvel[d];
    }
    state.time += m.timestep;
}

/// Geometric site Jacobians at the state's configuration.
///
/// Returns `(jacp, jacr)`, each row-major `3 x nv`. Columns of dofs off the
/// root-to-site path are zero; base translational dofs contribute unit
/// translation columns; rotational dofs contribute
/// `axis x (site - anchor)` and `axis`.
pub fn site_jacobian(
    m: &SimModel,
    state: &StateVector,
    site_id: usize,
    ws: &mut Workspace,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if site_id >= m.nsite {
        return Err(Error::SiteOutOfRange {
            site: site_id,
            nsite: m.nsite,
        });
    }
    kinematics(m, &state.qpos, ws);
    let nv = m.nv;
    let base = m.base_dofs();
    let mut jacp = vec![0.0; 3 * nv];
    let mut jacr = vec![0.0; 3 * nv];
    let site = ws.site_xpos[site_id];
    let body = m.site_body[site_id];

    if m.floating_base {
        for d in 0..3 {
            jacp[d * nv + d] = 1.0;
        }
        let col = ws.dof_axis[3].cross(&(site - ws.dof_anchor[3]));
        for r in 0..3 {
            jacp[r * nv + 3] = col[r];
            jacr[r * nv + 3] = ws.dof_axis[3][r];
        }
    }
    for k in 0..body {
        let d = base + k;
        let col = ws.dof_axis[d].cross(&(site - ws.dof_anchor[d]));
        for r in 0..3 {
            jacp[r * nv + d] = col[r];
            jacr[r * nv + d] = ws.dof_axis[d][r];
        }
    }
    Ok((jacp, jacr))
}
