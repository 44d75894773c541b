//! Error type shared across the solver pipeline.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh vertex {index} is at the origin and cannot be projected onto the sphere")]
    DegenerateVertex { index: usize },

    #[error("mesh file parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("source point must lie on the unit sphere (got r = {r})")]
    QOffUnitSphere { r: f64 },

    #[error("kernel singularity: evaluation point collides with a quadrature point (gamma = {gamma:.3e} on the surface)")]
    SurfaceCollision { gamma: f64 },

    #[error("radius {r} is not in the exterior region (need r > 1)")]
    RadiusNotExterior { r: f64 },

    #[error("Gauss-Legendre order {n} out of the supported range 2..=64")]
    GaussOrderOutOfRange { n: usize },

    #[error("adaptive quadrature could not meet the requested tolerance (error estimate {error_estimate:.3e} after {evaluations} evaluations)")]
    ToleranceNotMet {
        value: Complex64,
        error_estimate: f64,
        evaluations: usize,
    },

    #[error("invalid surface-harmonic term (l = {l}, m = {m})")]
    BasisTermInvalid { l: u32, m: i32 },

    #[error("duplicate surface-harmonic term (l = {l}, m = {m})")]
    DuplicateBasisTerm { l: u32, m: i32 },

    #[error("basis degree {lmax} unsupported (expected 1..=4)")]
    BasisDegreeUnsupported { lmax: u32 },

    #[error("least-squares fit needs at least {terms} nodes, got {nodes}")]
    NotEnoughNodes { nodes: usize, terms: usize },

    #[error("rank-deficient design matrix (condition estimate {cond:.3e}); node set unsuitable for this basis")]
    RankDeficientFit { cond: f64 },

    #[error("perturbation order {order} requires expansions for all lower orders")]
    MissingExpansion { order: usize },

    #[error("perturbation order {order} out of the supported range 1..=6")]
    OrderOutOfRange { order: usize },

    #[error("gradient undefined this close to a pole (theta = {theta:.3e})")]
    PoleEvaluation { theta: f64 },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
