//! Open-loop batched trajectory generation.
//!
//! [`rollout`] iterates the kernel step over a batch of initial states and
//! control sequences and records the full state and sensor trajectories. It
//! is the parity oracle for pool stepping: the last trajectory slice must
//! equal the pool's final state bitwise. The call is stateless and
//! single-threaded; it is a reference path, not a performance path.

use crate::error::{Error, Result};
use crate::kernel::{self, Workspace};
use crate::model::{SimModel, StateVector};
use crate::pool::Control;

/// Recorded trajectories: `states` is `(N, T, nstate)` with `states[e][t]`
/// the packed state after step `t + 1`; `sensordata` is `(N, T,
/// nsensordata)` holding each step's pre-integration sensor cache.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub nbatch: usize,
    pub nstep: usize,
    pub nstate: usize,
    pub nsensordata: usize,
    pub states: Vec<f64>,
    pub sensordata: Vec<f64>,
}

impl Trajectory {
    pub fn state(&self, env: usize, t: usize) -> &[f64] {
        let at = (env * self.nstep + t) * self.nstate;
        &self.states[at..at + self.nstate]
    }

    pub fn sensors(&self, env: usize, t: usize) -> &[f64] {
        let at = (env * self.nstep + t) * self.nsensordata;
        &self.sensordata[at..at + self.nsensordata]
    }

    /// Final packed states, `(N, nstate)`.
    pub fn last_states(&self) -> Vec<f64> {
        (0..self.nbatch)
            .flat_map(|e| self.state(e, self.nstep - 1).iter().copied())
            .collect()
    }

    /// Final-step sensordata, `(N, nsensordata)`.
    pub fn last_sensordata(&self) -> Vec<f64> {
        (0..self.nbatch)
            .flat_map(|e| self.sensors(e, self.nstep - 1).iter().copied())
            .collect()
    }
}

/// Generates open-loop trajectories from a batch of initial states
/// (`N x nstate`) and optional controls (`N x nstep x ncontrol`).
///
/// `models` has length 1 (shared by all environments) or `N` (one variant
/// per environment); all models must be compatible.
pub fn rollout(
    models: &[SimModel],
    initial_state: &[f64],
    nstep: usize,
    control: Option<Control<'_>>,
) -> Result<Trajectory> {
    let Some(proto) = models.first() else {
        return Err(Error::ModelListLength { got: 0, nbatch: 1 });
    };
    if models.iter().any(|m| !m.compatible(proto)) {
        return Err(Error::IncompatibleModels);
    }
    if nstep < 1 {
        return Err(Error::InvalidStepCount);
    }
    let nstate = proto.nstate();
    let nbatch = if models.len() > 1 {
        models.len()
    } else {
        initial_state.len() / nstate
    };
    if nbatch == 0 || initial_state.len() != nbatch * nstate {
        return Err(Error::LengthMismatch {
            what: "initial_state",
            expected: nbatch.max(1) * nstate,
            got: initial_state.len(),
        });
    }
    let ctrl = match control {
        Some(c) => {
            let nc = c.spec.ncontrol(proto);
            if c.data.len() != nbatch * nstep * nc {
                return Err(Error::LengthMismatch {
                    what: "control",
                    expected: nbatch * nstep * nc,
                    got: c.data.len(),
                });
            }
            if nc == 0 {
                None
            } else {
                Some((c.spec, c.data, nc))
            }
        }
        None => None,
    };

    let (nq, nv, nu, nbody, nsd) = (proto.nq, proto.nv, proto.nu, proto.nbody, proto.nsensordata);
    let mut states = vec![0.0; nbatch * nstep * nstate];
    let mut sensordata = vec![0.0; nbatch * nstep * nsd];
    let mut ws = Workspace::new(proto);
    let zero_ctrl = vec![0.0; nu];

    for e in 0..nbatch {
        let m = if models.len() > 1 { &models[e] } else { proto };
        let mut sv = StateVector::unpack(&initial_state[e * nstate..(e + 1) * nstate], nq, nv)?;
        for t in 0..nstep {
            let (c, applied) = match ctrl {
                Some((spec, data, nc)) => {
                    let row = &data[(e * nstep + t) * nc..(e * nstep + t + 1) * nc];
                    spec.split_row(row, nu, nbody)
                }
                None => (None, None),
            };
            kernel::step(m, &mut sv, c.unwrap_or(&zero_ctrl), applied, &mut ws);
            let at = (e * nstep + t) * nstate;
            sv.pack_into(&mut states[at..at + nstate]);
            let sd_at = (e * nstep + t) * nsd;
            sensordata[sd_at..sd_at + nsd].copy_from_slice(&ws.sensordata);
        }
    }

    Ok(Trajectory {
        nbatch,
        nstep,
        nstate,
        nsensordata: nsd,
        states,
        sensordata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_chain_model;
    use crate::pool::{BatchEnvPool, ControlSpec};
    use crate::presets;

    fn bits(v: &[f64]) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn single_step_matches_pool() {
        let m = build_chain_model(&presets::chain(3, true)).unwrap();
        let n = 4;
        let nstate = m.nstate();
        let state: Vec<f64> = (0..n * nstate).map(|i| (i % 9) as f64 * 0.02).collect();
        let spec = ControlSpec::ctrl();
        let ctrl: Vec<f64> = (0..n * m.nu).map(|i| (i % 3) as f64 * 0.4).collect();

        let traj = rollout(
            std::slice::from_ref(&m),
            &state,
            1,
            Some(Control { spec: &spec, data: &ctrl }),
        )
        .unwrap();
        let mut pool = BatchEnvPool::from_model(&m, n, Some(0)).unwrap();
        let stepped = pool
            .step(&state, 1, Some(Control { spec: &spec, data: &ctrl }))
            .unwrap();
        assert_eq!(bits(&traj.last_states()), bits(&stepped));
    }

    #[test]
    fn drift_model_follows_closed_form_exactly() {
        // power-of-two timestep and velocities make accumulation exact
        let mut spec = presets::chain(2, false);
        spec.timestep = 1.0 / 128.0;
        spec.gravity = [0.0; 3];
        spec.dof_damping = vec![0.0; 2];
        spec.kp = vec![0.0; 2];
        spec.kd = vec![0.0; 2];
        let m = build_chain_model(&spec).unwrap();

        let qvel = [0.5, -2.0];
        let state = StateVector {
            time: 0.0,
            qpos: vec![0.25, 1.5],
            qvel: qvel.to_vec(),
        }
        .pack();
        let traj = rollout(std::slice::from_ref(&m), &state, 20, None).unwrap();
        for t in 0..20 {
            let row = traj.state(0, t);
            for d in 0..2 {
                let expect = [0.25, 1.5][d] + (t + 1) as f64 * (1.0 / 128.0) * qvel[d];
                assert_eq!(row[1 + d].to_bits(), expect.to_bits(), "t {t} dof {d}");
            }
        }
    }

    #[test]
    fn identical_rows_give_identical_trajectories() {
        let m = build_chain_model(&presets::chain(5, false)).unwrap();
        let nstate = m.nstate();
        let row: Vec<f64> = (0..nstate).map(|i| (i % 4) as f64 * 0.1).collect();
        let mut state = row.clone();
        state.extend_from_slice(&row);
        let traj = rollout(std::slice::from_ref(&m), &state, 10, None).unwrap();
        for t in 0..10 {
            assert_eq!(bits(traj.state(0, t)), bits(traj.state(1, t)));
            assert_eq!(bits(traj.sensors(0, t)), bits(traj.sensors(1, t)));
        }
    }

    #[test]
    fn prefix_property() {
        let m = build_chain_model(&presets::chain(3, true)).unwrap();
        let nstate = m.nstate();
        let state: Vec<f64> = (0..2 * nstate).map(|i| (i % 6) as f64 * 0.05 - 0.1).collect();
        let long = rollout(std::slice::from_ref(&m), &state, 9, None).unwrap();
        let short = rollout(std::slice::from_ref(&m), &state, 4, None).unwrap();
        for e in 0..2 {
            for t in 0..4 {
                assert_eq!(bits(long.state(e, t)), bits(short.state(e, t)));
            }
        }
    }

    #[test]
    fn input_validation() {
        let m = build_chain_model(&presets::pendulum()).unwrap();
        let state = vec![0.0; 3];
        assert!(matches!(
            rollout(std::slice::from_ref(&m), &state, 0, None),
            Err(Error::InvalidStepCount)
        ));
        assert!(matches!(
            rollout(std::slice::from_ref(&m), &state[..2], 1, None),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            rollout(&[], &state, 1, None),
            Err(Error::ModelListLength { .. })
        ));

        let other = build_chain_model(&presets::chain(2, false)).unwrap();
        assert!(matches!(
            rollout(&[m.clone(), other], &vec![0.0; 6], 1, None),
            Err(Error::IncompatibleModels)
        ));
    }

    #[test]
    fn per_env_variants_apply() {
        let mut light = build_chain_model(&presets::pendulum()).unwrap();
        let mut heavy = light.clone();
        light.patch_field("kp", &[5.0]).unwrap();
        heavy.patch_field("kp", &[50.0]).unwrap();
        let state = vec![0.0; 6];
        let spec = ControlSpec::ctrl();
        let ctrl = vec![1.0; 2 * 3];
        let traj = rollout(
            &[light, heavy],
            &state,
            3,
            Some(Control { spec: &spec, data: &ctrl }),
        )
        .unwrap();
        // stiffer gains track the target faster
        assert!(traj.state(1, 2)[1] > traj.state(0, 2)[1]);
    }
}
