//! Batched, stateful simulation-environment pool over a self-contained
//! articulated-chain physics kernel.
//!
//! The crate is organized around five pieces:
//!
//! - [`model`]: the [`SimModel`] record, the [`ChainSpec`] builder, state
//!   packing, and the patchable-field registry.
//! - [`kernel`]: forward kinematics, sensor evaluation, semi-implicit Euler
//!   stepping, and analytic site Jacobians over per-worker [`Workspace`]
//!   scratch.
//! - [`hfield`]: bilinear height-field terrain sampling.
//! - [`pool`]: the [`BatchEnvPool`] executor — persistent per-environment
//!   model copies, chunked parallel dispatch, and the batched step /
//!   forward / reset / Jacobian / terrain primitives.
//! - [`rollout`]: the open-loop trajectory oracle that pool stepping is
//!   checked against.

pub mod error;
pub mod hfield;
pub mod kernel;
pub mod model;
pub mod pool;
pub mod presets;
pub mod rollout;

pub use error::{Error, Result};
pub use hfield::{AlignMode, HeightField};
pub use kernel::Workspace;
pub use model::{build_chain_model, ChainSpec, Field, SimModel, StateVector};
pub use pool::{BatchEnvPool, Control, ControlField, ControlSpec, ResetRandomization};
pub use rollout::{rollout, Trajectory};
