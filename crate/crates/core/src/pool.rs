//! The batched environment pool executor.
//!
//! A [`BatchEnvPool`] owns one [`SimModel`] copy per environment and one
//! [`Workspace`] per worker, plus an internal thread pool. Every call fans a
//! batch out over contiguous chunks of environment indices, one chunk per
//! worker, and returns only after all environments complete. With
//! `nthread = 0` all work runs on the calling thread.
//!
//! The pool itself holds no per-environment physics state: callers pass the
//! full packed state batch into every call and receive the result back. This
//! keeps per-environment work a pure function of `(model, state, control)`,
//! which is why outputs are bitwise identical for any thread count.
//!
//! Models are read-only during `step`/`forward`/query calls and mutated only
//! by [`BatchEnvPool::reset`], which patches exactly the selected
//! environments' own copies. The pool is driven by a single caller at a time
//! (`&mut self` on every operation enforces this at compile time).

use std::collections::BTreeMap;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::hfield::AlignMode;
use crate::kernel::{self, Workspace};
use crate::model::{Field, SimModel, StateVector};

/// Items a control trajectory can carry, in payload order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlField {
    /// Actuator targets, `nu` values per step.
    Ctrl,
    /// World-frame wrench per body (`[force, torque]` at the body origin),
    /// `6 * nbody` values per step.
    AppliedForce,
}

/// Ordered subset of control items; fixes the layout of each control row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlSpec {
    fields: Vec<ControlField>,
}

impl ControlSpec {
    pub fn new(fields: &[ControlField]) -> Result<ControlSpec> {
        if fields.is_empty() {
            return Err(Error::EmptyControlSpec);
        }
        let mut seen = [false; 2];
        for f in fields {
            let slot = match f {
                ControlField::Ctrl => 0,
                ControlField::AppliedForce => 1,
            };
            if seen[slot] {
                return Err(Error::DuplicateControlField);
            }
            seen[slot] = true;
        }
        Ok(ControlSpec {
            fields: fields.to_vec(),
        })
    }

    /// The common case: actuator targets only.
    pub fn ctrl() -> ControlSpec {
        ControlSpec {
            fields: vec![ControlField::Ctrl],
        }
    }

    pub fn fields(&self) -> &[ControlField] {
        &self.fields
    }

    /// Values per environment per step under this spec.
    pub fn ncontrol(&self, m: &SimModel) -> usize {
        self.fields
            .iter()
            .map(|f| match f {
                ControlField::Ctrl => m.nu,
                ControlField::AppliedForce => 6 * m.nbody,
            })
            .sum()
    }

    // Splits one control row into (ctrl, applied) slices per the field order.
    pub(crate) fn split_row<'c>(
        &self,
        row: &'c [f64],
        nu: usize,
        nbody: usize,
    ) -> (Option<&'c [f64]>, Option<&'c [f64]>) {
        let mut at = 0;
        let mut ctrl = None;
        let mut applied = None;
        for f in &self.fields {
            match f {
                ControlField::Ctrl => {
                    ctrl = Some(&row[at..at + nu]);
                    at += nu;
                }
                ControlField::AppliedForce => {
                    applied = Some(&row[at..at + 6 * nbody]);
                    at += 6 * nbody;
                }
            }
        }
        (ctrl, applied)
    }
}

/// A control trajectory paired with the spec describing its row layout.
/// `data` is `(N, nstep, ncontrol)` row-major.
#[derive(Clone, Copy, Debug)]
pub struct Control<'a> {
    pub spec: &'a ControlSpec,
    pub data: &'a [f64],
}

/// Reset-lifecycle randomization payload: registered field name to a batch
/// of per-environment replacement values (leading dimension = reset count).
#[derive(Clone, Debug, Default)]
pub struct ResetRandomization {
    entries: BTreeMap<String, Vec<f64>>,
}

impl ResetRandomization {
    pub fn new() -> ResetRandomization {
        ResetRandomization::default()
    }

    pub fn with(mut self, field: &str, values: Vec<f64>) -> ResetRandomization {
        self.insert(field, values);
        self
    }

    pub fn insert(&mut self, field: &str, values: Vec<f64>) {
        self.entries.insert(field.to_string(), values);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Batched translational/rotational site Jacobians, `(N, K, 3, nv)` flat.
/// The single-site variant returns the same layout with `K = 1`, which is
/// already the squeezed `(N, 3, nv)` array.
#[derive(Clone, Debug)]
pub struct SiteJacobians {
    pub jacp: Option<Vec<f64>>,
    pub jacr: Option<Vec<f64>>,
    pub nbatch: usize,
    pub nsite: usize,
    pub nv: usize,
}

impl SiteJacobians {
    fn block(data: &[f64], nv: usize, nsite: usize, env: usize, site: usize) -> &[f64] {
        let at = (env * nsite + site) * 3 * nv;
        &data[at..at + 3 * nv]
    }

    /// The `3 x nv` translational block for one (env, site) pair.
    pub fn jacp_block(&self, env: usize, site: usize) -> &[f64] {
        Self::block(self.jacp.as_ref().expect("jacp not requested"), self.nv, self.nsite, env, site)
    }

    /// The `3 x nv` rotational block for one (env, site) pair.
    pub fn jacr_block(&self, env: usize, site: usize) -> &[f64] {
        Self::block(self.jacr.as_ref().expect("jacr not requested"), self.nv, self.nsite, env, site)
    }
}

/// Stateful pool of `nbatch` environments behind one batched interface.
pub struct BatchEnvPool {
    nbatch: usize,
    nthread: usize,
    models: Vec<SimModel>,
    workspaces: Vec<Workspace>,
    threads: Option<rayon::ThreadPool>,
    nstate: usize,
    nsensordata: usize,
    disposed: bool,
}

// Static chunking: ceil(n / nworkers) items per worker, contiguous.
pub(crate) fn chunk_len(n_items: usize, nworkers: usize) -> usize {
    n_items.div_ceil(nworkers.max(1))
}

impl BatchEnvPool {
    /// Builds a pool of `nbatch` independent copies of one model.
    ///
    /// `nthread = None` uses the available hardware concurrency; `Some(0)`
    /// runs everything on the calling thread.
    pub fn from_model(
        model: &SimModel,
        nbatch: usize,
        nthread: Option<usize>,
    ) -> Result<BatchEnvPool> {
        Self::from_models(std::slice::from_ref(model), nbatch, nthread)
    }

    /// Builds a pool from a compatible model sequence of length 1 or
    /// `nbatch`. A single model is copied `nbatch` times; a full-length list
    /// is copied element-wise, so each environment keeps its own variant.
    pub fn from_models(
        models: &[SimModel],
        nbatch: usize,
        nthread: Option<usize>,
    ) -> Result<BatchEnvPool> {
        if nbatch < 1 {
            return Err(Error::InvalidBatchSize);
        }
        if models.is_empty() || (models.len() != 1 && models.len() != nbatch) {
            return Err(Error::ModelListLength {
                got: models.len(),
                nbatch,
            });
        }
        if models.iter().any(|m| !m.compatible(&models[0])) {
            return Err(Error::IncompatibleModels);
        }
        let copies: Vec<SimModel> = if models.len() == 1 {
            (0..nbatch).map(|_| models[0].clone()).collect()
        } else {
            models.to_vec()
        };
        let nthread = match nthread {
            Some(t) => t,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        let threads = if nthread > 0 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(nthread)
                    .build()
                    .map_err(|e| Error::WorkerPool(e.to_string()))?,
            )
        } else {
            None
        };
        let nworkers = nthread.max(1);
        let workspaces = (0..nworkers).map(|_| Workspace::new(&copies[0])).collect();
        Ok(BatchEnvPool {
            nbatch,
            nthread,
            nstate: copies[0].nstate(),
            nsensordata: copies[0].nsensordata,
            models: copies,
            workspaces,
            threads,
            disposed: false,
        })
    }

    pub fn nbatch(&self) -> usize {
        self.nbatch
    }

    pub fn nthread(&self) -> usize {
        self.nthread
    }

    pub fn nstate(&self) -> usize {
        self.nstate
    }

    pub fn nsensordata(&self) -> usize {
        self.nsensordata
    }

    /// Read-only view of environment `i`'s current model, including any
    /// reset-time patches.
    pub fn model(&self, i: usize) -> Result<&SimModel> {
        self.ensure_live()?;
        self.models.get(i).ok_or(Error::EnvIdOutOfRange {
            env: i,
            nbatch: self.nbatch,
        })
    }

    /// Read-only views of all environment models.
    pub fn all_models(&self) -> Result<&[SimModel]> {
        self.ensure_live()?;
        Ok(&self.models)
    }

    /// Releases models, workspaces, and the worker set. Every subsequent
    /// operation fails with [`Error::PoolDisposed`].
    pub fn dispose(&mut self) {
        self.disposed = true;
        self.models = Vec::new();
        self.workspaces = Vec::new();
        self.threads = None;
    }

    pub fn is_disposed(&self) -> bool {
        self.disposed
    }

    fn ensure_live(&self) -> Result<()> {
        if self.disposed {
            Err(Error::PoolDisposed)
        } else {
            Ok(())
        }
    }

    fn check_state(&self, state: &[f64], rows: usize, what: &'static str) -> Result<()> {
        if state.len() != rows * self.nstate {
            return Err(Error::LengthMismatch {
                what,
                expected: rows * self.nstate,
                got: state.len(),
            });
        }
        Ok(())
    }

    // Synchronous fan-out/fan-in: one task per chunk, each task owning its
    // disjoint slices. Tasks run on the worker set, or inline when nthread=0.
    fn run_tasks<T: Send>(threads: Option<&rayon::ThreadPool>, tasks: Vec<T>, work: impl Fn(T) + Send + Sync) {
        match threads {
            Some(tp) => tp.scope(|scope| {
                for task in tasks {
                    let work = &work;
                    scope.spawn(move |_| work(task));
                }
            }),
            None => tasks.into_iter().for_each(work),
        }
    }

    /// Advances every environment by `nstep` kernel steps from
    /// `initial_state` (`N x nstate`), returning only the final packed
    /// states. Absent control means zero actuator targets and no applied
    /// force on every step.
    pub fn step(
        &mut self,
        initial_state: &[f64],
        nstep: usize,
        control: Option<Control<'_>>,
    ) -> Result<Vec<f64>> {
        Ok(self.step_impl(initial_state, nstep, control, false, false)?.0)
    }

    /// Like [`BatchEnvPool::step`], additionally returning per-environment
    /// sensordata: the step-cached values (sensors of the state the last
    /// step integrated from) by default, or freshly recomputed on the final
    /// state when `post_step_forward_sensor` is set.
    pub fn step_with_sensors(
        &mut self,
        initial_state: &[f64],
        nstep: usize,
        control: Option<Control<'_>>,
        post_step_forward_sensor: bool,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let (state, sensors) =
            self.step_impl(initial_state, nstep, control, true, post_step_forward_sensor)?;
        Ok((state, sensors.expect("sensors requested")))
    }

    fn step_impl(
        &mut self,
        initial_state: &[f64],
        nstep: usize,
        control: Option<Control<'_>>,
        want_sensor: bool,
        post_forward: bool,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        self.ensure_live()?;
        if nstep < 1 {
            return Err(Error::InvalidStepCount);
        }
        let n = self.nbatch;
        self.check_state(initial_state, n, "initial_state")?;

        let proto = &self.models[0];
        let (nq, nv, nu, nbody) = (proto.nq, proto.nv, proto.nu, proto.nbody);
        let ctrl_data = match control {
            Some(c) => {
                let nc = c.spec.ncontrol(proto);
                if c.data.len() != n * nstep * nc {
                    return Err(Error::LengthMismatch {
                        what: "control",
                        expected: n * nstep * nc,
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

        let nstate = self.nstate;
        let nsd = self.nsensordata;
        let mut out_state = vec![0.0; n * nstate];
        let mut out_sensor = if want_sensor { vec![0.0; n * nsd] } else { Vec::new() };

        let per = chunk_len(n, self.workspaces.len());
        let nchunk = n.div_ceil(per);
        let sensor_chunks: Vec<Option<&mut [f64]>> = if want_sensor {
            out_sensor.chunks_mut(per * nsd).map(Some).collect()
        } else {
            (0..nchunk).map(|_| None).collect()
        };
        let ctrl_chunks: Vec<Option<&[f64]>> = match ctrl_data {
            Some((_, data, nc)) => data.chunks(per * nstep * nc).map(Some).collect(),
            None => (0..nchunk).map(|_| None).collect(),
        };

        let tasks: Vec<_> = self
            .models
            .chunks(per)
            .zip(initial_state.chunks(per * nstate))
            .zip(out_state.chunks_mut(per * nstate))
            .zip(sensor_chunks)
            .zip(ctrl_chunks)
            .zip(self.workspaces.iter_mut())
            .map(|(((((models, init), out), sd), ctrl), ws)| (models, init, out, sd, ctrl, ws))
            .collect();

        let spec_nc = ctrl_data.map(|(spec, _, nc)| (spec, nc));
        Self::run_tasks(
            self.threads.as_ref(),
            tasks,
            |(models, init, out, mut sd, ctrl, ws)| {
                let zero_ctrl = vec![0.0; nu];
                for (i, m) in models.iter().enumerate() {
                    let mut sv =
                        StateVector::unpack(&init[i * nstate..(i + 1) * nstate], nq, nv)
                            .expect("validated shape");
                    for t in 0..nstep {
                        let (c, applied) = match (spec_nc, ctrl) {
                            (Some((spec, nc)), Some(data)) => {
                                let row = &data[(i * nstep + t) * nc..(i * nstep + t + 1) * nc];
                                spec.split_row(row, nu, nbody)
                            }
                            _ => (None, None),
                        };
                        kernel::step(m, &mut sv, c.unwrap_or(&zero_ctrl), applied, ws);
                    }
                    sv.pack_into(&mut out[i * nstate..(i + 1) * nstate]);
                    if let Some(sd) = sd.as_deref_mut() {
                        if post_forward {
                            kernel::forward(m, &sv, ws);
                        }
                        sd[i * nsd..(i + 1) * nsd].copy_from_slice(&ws.sensordata);
                    }
                }
            },
        );

        Ok((out_state, want_sensor.then_some(out_sensor)))
    }

    /// Evaluates sensors for every environment at the given states without
    /// advancing dynamics. The pool keeps no state between calls.
    pub fn forward(&mut self, state: &[f64]) -> Result<Vec<f64>> {
        self.ensure_live()?;
        let n = self.nbatch;
        self.check_state(state, n, "state")?;
        let proto = &self.models[0];
        let (nq, nv) = (proto.nq, proto.nv);
        let (nstate, nsd) = (self.nstate, self.nsensordata);

        let mut out = vec![0.0; n * nsd];
        let per = chunk_len(n, self.workspaces.len());
        let tasks: Vec<_> = self
            .models
            .chunks(per)
            .zip(state.chunks(per * nstate))
            .zip(out.chunks_mut(per * nsd))
            .zip(self.workspaces.iter_mut())
            .map(|(((models, st), out), ws)| (models, st, out, ws))
            .collect();

        Self::run_tasks(self.threads.as_ref(), tasks, |(models, st, out, ws)| {
            for (i, m) in models.iter().enumerate() {
                let row = &st[i * nstate..(i + 1) * nstate];
                kernel::forward_slices(m, &row[1..1 + nq], &row[1 + nq..1 + nq + nv], ws);
                out[i * nsd..(i + 1) * nsd].copy_from_slice(&ws.sensordata);
            }
        });
        Ok(out)
    }

    /// Resets a subset of environments: applies randomization patches to the
    /// selected environments' models, refreshes derived constants once per
    /// environment if any patched field requires it, and evaluates sensors
    /// on the provided states. States come back unchanged alongside the
    /// fresh sensordata; unselected environments are untouched.
    pub fn reset(
        &mut self,
        env_ids: &[usize],
        initial_state: &[f64],
        randomization: Option<&ResetRandomization>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.ensure_live()?;
        let k = env_ids.len();
        let mut seen = HashSet::with_capacity(k);
        for &e in env_ids {
            if e >= self.nbatch {
                return Err(Error::EnvIdOutOfRange {
                    env: e,
                    nbatch: self.nbatch,
                });
            }
            if !seen.insert(e) {
                return Err(Error::DuplicateEnvId(e));
            }
        }
        self.check_state(initial_state, k, "reset initial_state")?;

        // validate payload shapes up front
        let mut patches: Vec<(Field, usize, &[f64])> = Vec::new();
        if let Some(rand) = randomization {
            for (name, values) in rand.iter() {
                let field =
                    Field::from_name(name).ok_or_else(|| Error::UnknownField(name.into()))?;
                let per_env = field.len(&self.models[0]);
                if values.len() != k * per_env {
                    return Err(Error::FieldShape {
                        field: name.into(),
                        expected: k * per_env,
                        got: values.len(),
                    });
                }
                patches.push((field, per_env, values));
            }
        }
        let needs_refresh = patches.iter().any(|(f, _, _)| f.requires_refresh());

        let (nstate, nsd) = (self.nstate, self.nsensordata);
        let mut out_sensor = vec![0.0; k * nsd];
        if k == 0 {
            return Ok((Vec::new(), out_sensor));
        }
        let (nq, nv) = (self.models[0].nq, self.models[0].nv);

        // Carve disjoint &mut references to the selected models (ascending
        // env order), then put them back into env_ids order so chunks align
        // with the state and output rows.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_unstable_by_key(|&p| env_ids[p]);
        let mut slots: Vec<Option<&mut SimModel>> = (0..k).map(|_| None).collect();
        let mut rest: &mut [SimModel] = &mut self.models;
        let mut carved = 0usize;
        for &p in &order {
            let local = env_ids[p] - carved;
            let (head, tail) = rest.split_at_mut(local + 1);
            slots[p] = Some(&mut head[local]);
            rest = tail;
            carved = env_ids[p] + 1;
        }
        let mut selected: Vec<&mut SimModel> = slots.into_iter().map(|s| s.expect("filled")).collect();

        let per = chunk_len(k, self.workspaces.len());
        // per-chunk slices of every patch payload
        let mut patch_chunks: Vec<Vec<(Field, usize, &[f64])>> = (0..k.div_ceil(per))
            .map(|c| {
                patches
                    .iter()
                    .map(|&(f, plen, vals)| {
                        let lo = c * per * plen;
                        let hi = ((c + 1) * per * plen).min(vals.len());
                        (f, plen, &vals[lo..hi])
                    })
                    .collect()
            })
            .collect();

        let tasks: Vec<_> = selected
            .chunks_mut(per)
            .zip(initial_state.chunks(per * nstate))
            .zip(out_sensor.chunks_mut(per * nsd))
            .zip(patch_chunks.drain(..))
            .zip(self.workspaces.iter_mut())
            .map(|((((models, st), out), patch), ws)| (models, st, out, patch, ws))
            .collect();

        Self::run_tasks(self.threads.as_ref(), tasks, |(models, st, out, patch, ws)| {
            for (i, m) in models.iter_mut().enumerate() {
                for &(field, plen, vals) in &patch {
                    m.patch_field(field.name(), &vals[i * plen..(i + 1) * plen])
                        .expect("validated shape");
                }
                if needs_refresh {
                    m.set_const_with(ws);
                }
                let row = &st[i * nstate..(i + 1) * nstate];
                kernel::forward_slices(m, &row[1..1 + nq], &row[1 + nq..1 + nq + nv], ws);
                out[i * nsd..(i + 1) * nsd].copy_from_slice(&ws.sensordata);
            }
        });

        Ok((initial_state.to_vec(), out_sensor))
    }

    /// Batched site Jacobians for `K` sites, `(N, K, 3, nv)` flat.
    pub fn site_jacobians(
        &mut self,
        state: &[f64],
        site_ids: &[usize],
        want_jacp: bool,
        want_jacr: bool,
    ) -> Result<SiteJacobians> {
        self.ensure_live()?;
        if !want_jacp && !want_jacr {
            return Err(Error::EmptyJacobianRequest);
        }
        let n = self.nbatch;
        self.check_state(state, n, "state")?;
        let proto = &self.models[0];
        let (nq, nv, nsite) = (proto.nq, proto.nv, proto.nsite);
        for &s in site_ids {
            if s >= nsite {
                return Err(Error::SiteOutOfRange { site: s, nsite });
            }
        }
        let nk = site_ids.len();
        let nstate = self.nstate;
        let block = 3 * nv;

        let mut jacp = if want_jacp { vec![0.0; n * nk * block] } else { Vec::new() };
        let mut jacr = if want_jacr { vec![0.0; n * nk * block] } else { Vec::new() };
        if nk == 0 {
            return Ok(SiteJacobians {
                jacp: want_jacp.then_some(jacp),
                jacr: want_jacr.then_some(jacr),
                nbatch: n,
                nsite: 0,
                nv,
            });
        }

        let per = chunk_len(n, self.workspaces.len());
        let nchunk = n.div_ceil(per);
        let jacp_chunks: Vec<Option<&mut [f64]>> = if want_jacp {
            jacp.chunks_mut(per * nk * block).map(Some).collect()
        } else {
            (0..nchunk).map(|_| None).collect()
        };
        let jacr_chunks: Vec<Option<&mut [f64]>> = if want_jacr {
            jacr.chunks_mut(per * nk * block).map(Some).collect()
        } else {
            (0..nchunk).map(|_| None).collect()
        };

        let tasks: Vec<_> = self
            .models
            .chunks(per)
            .zip(state.chunks(per * nstate))
            .zip(jacp_chunks)
            .zip(jacr_chunks)
            .zip(self.workspaces.iter_mut())
            .map(|((((models, st), jp), jr), ws)| (models, st, jp, jr, ws))
            .collect();

        Self::run_tasks(self.threads.as_ref(), tasks, |(models, st, mut jp, mut jr, ws)| {
            for (i, m) in models.iter().enumerate() {
                let sv = StateVector::unpack(&st[i * nstate..(i + 1) * nstate], nq, nv)
                    .expect("validated shape");
                for (j, &site) in site_ids.iter().enumerate() {
                    let (p, r) = kernel::site_jacobian(m, &sv, site, ws).expect("validated site");
                    let at = (i * nk + j) * block;
                    if let Some(jp) = jp.as_deref_mut() {
                        jp[at..at + block].copy_from_slice(&p);
                    }
                    if let Some(jr) = jr.as_deref_mut() {
                        jr[at..at + block].copy_from_slice(&r);
                    }
                }
            }
        });

        Ok(SiteJacobians {
            jacp: want_jacp.then_some(jacp),
            jacr: want_jacr.then_some(jacr),
            nbatch: n,
            nsite: nk,
            nv,
        })
    }

    /// Single-site convenience variant; the K dimension is squeezed, so the
    /// flat data is the `(N, 3, nv)` array.
    pub fn site_jacobian(
        &mut self,
        state: &[f64],
        site_id: usize,
        want_jacp: bool,
        want_jacr: bool,
    ) -> Result<SiteJacobians> {
        self.site_jacobians(state, &[site_id], want_jacp, want_jacr)
    }

    /// Samples a height field under XY offsets attached to `frame_body`,
    /// per environment: `(N, P)` heights, or clearances with
    /// `return_clearance`.
    pub fn sample_hfield(
        &mut self,
        state: &[f64],
        hfield_id: usize,
        offsets: &[[f64; 2]],
        frame_body: usize,
        mode: AlignMode,
        return_clearance: bool,
    ) -> Result<Vec<f64>> {
        self.ensure_live()?;
        let n = self.nbatch;
        self.check_state(state, n, "state")?;
        let proto = &self.models[0];
        let nhfield = proto.hfields.len();
        if hfield_id >= nhfield {
            return Err(Error::HfieldOutOfRange {
                hfield: hfield_id,
                nhfield,
            });
        }
        if frame_body >= proto.nbody {
            return Err(Error::BodyOutOfRange {
                body: frame_body,
                nbody: proto.nbody,
            });
        }
        let nq = proto.nq;
        let nstate = self.nstate;
        let np = offsets.len();

        let mut out = vec![0.0; n * np];
        if np == 0 {
            return Ok(out);
        }
        let per = chunk_len(n, self.workspaces.len());
        let tasks: Vec<_> = self
            .models
            .chunks(per)
            .zip(state.chunks(per * nstate))
            .zip(out.chunks_mut(per * np))
            .zip(self.workspaces.iter_mut())
            .map(|(((models, st), out), ws)| (models, st, out, ws))
            .collect();

        Self::run_tasks(self.threads.as_ref(), tasks, |(models, st, out, ws)| {
            for (i, m) in models.iter().enumerate() {
                let qpos = &st[i * nstate + 1..i * nstate + 1 + nq];
                kernel::kinematics(m, qpos, ws);
                let vals = m.hfields[hfield_id].sample_points(
                    &ws.xpos[frame_body],
                    &ws.xmat[frame_body],
                    offsets,
                    mode,
                    return_clearance,
                );
                out[i * np..(i + 1) * np].copy_from_slice(&vals);
            }
        });
        Ok(out)
    }
}
