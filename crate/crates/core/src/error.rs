//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by model construction, patching, and pool execution.
#[derive(Debug, Error)]
pub enum Error {
    #[error("joint {joint}: axis has norm {norm}, expected a unit vector")]
    NonUnitAxis { joint: usize, norm: f64 },

    #[error("body {body}: mass {mass} must be positive")]
    NonPositiveMass { body: usize, mass: f64 },

    #[error("body {body}: inertia component {value} must be non-negative")]
    NegativeInertia { body: usize, value: f64 },

    #[error("timestep {0} must be positive")]
    NonPositiveTimestep(f64),

    #[error("site {site}: body index {body} out of range (nbody = {nbody})")]
    SiteBodyOutOfRange {
        site: usize,
        body: usize,
        nbody: usize,
    },

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown patch field `{0}`")]
    UnknownField(String),

    #[error("field `{field}`: expected {expected} values per environment, got {got}")]
    FieldShape {
        field: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid height field: {0}")]
    InvalidHeightField(String),

    #[error("models in a pool must share identical sizes")]
    IncompatibleModels,

    #[error("model list has length {got}; expected 1 or nbatch ({nbatch})")]
    ModelListLength { got: usize, nbatch: usize },

    #[error("nbatch must be at least 1")]
    InvalidBatchSize,

    #[error("nstep must be at least 1")]
    InvalidStepCount,

    #[error("duplicate environment id {0}")]
    DuplicateEnvId(usize),

    #[error("environment id {env} out of range (nbatch = {nbatch})")]
    EnvIdOutOfRange { env: usize, nbatch: usize },

    #[error("pool has been disposed")]
    PoolDisposed,

    #[error("site id {site} out of range (nsite = {nsite})")]
    SiteOutOfRange { site: usize, nsite: usize },

    #[error("hfield id {hfield} out of range (nhfield = {nhfield})")]
    HfieldOutOfRange { hfield: usize, nhfield: usize },

    #[error("body id {body} out of range (nbody = {nbody})")]
    BodyOutOfRange { body: usize, nbody: usize },

    #[error("jacobian request must ask for jacp, jacr, or both")]
    EmptyJacobianRequest,

    #[error("control spec must be nonempty when control data is supplied")]
    EmptyControlSpec,

    #[error("control spec lists the same field twice")]
    DuplicateControlField,

    #[error("failed to build worker pool: {0}")]
    WorkerPool(String),

    #[error("chain spec: {0}")]
    InvalidSpec(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("toml parse: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("toml encode: {0}")]
    TomlEncode(#[from] toml::ser::Error),
}
