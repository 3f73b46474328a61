//! Compactly supported quasi-eigenfunctions of the Laplace-Beltrami operator
//! on triangle meshes, and the mesh partitioning pipeline built on them.
//!
//! The crate is organized around the stages of the pipeline:
//!
//! - [`mesh`]: triangle mesh loading, validation, connectivity and topology
//!   (Euler characteristic, boundary loops, genus, submesh extraction).
//! - [`operators`]: cotangent stiffness matrix and lumped mass matrix.
//! - [`sparse`]: symmetric sparse matrices and an LDL^T direct solver.
//! - [`solver`]: the ADMM iteration computing a D-orthonormal set of sparse
//!   modes for fixed (N, mu, p).
//! - [`basis`]: the two outer loops that grow N (fixed mu) or grow mu
//!   (fixed N) until every vertex is covered by some mode's support.
//! - [`segmentation`]: seed selection, region growing over triangles, and
//!   recursive refinement to genus-0 patches with at most two boundaries.
//! - [`spectral`]: the manifold-harmonics reference basis (generalized
//!   eigenproblem) and spectral reconstruction of vertex signals.
//! - [`synth`]: procedural meshes used by tests, benches and demos.

pub mod basis;
pub mod io;
pub mod mesh;
pub mod operators;
pub mod segmentation;
pub mod solver;
pub mod sparse;
pub mod spectral;
pub mod synth;

mod parallel;

pub use basis::{BasisResult, CoverageReport, GrowMuConfig, GrowNConfig};
pub use mesh::{TopologySummary, TriMesh};
pub use operators::{lumped_mass, weighted_lp_norm_p, MassDiag, MassLumping, Stiffness};
pub use segmentation::{Partition, PatchReport, RefineConfig};
pub use solver::{AdmmState, ModeSet, SolveContext, SolverConfig};
pub use sparse::SparseSymMatrix;
pub use spectral::EigenBasis;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error in {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("triangle {tri} references vertex {vertex}: index out of range (n = {n})")]
    IndexOutOfRange { tri: usize, vertex: usize, n: usize },
    #[error("triangle {tri} is degenerate (area = {area:.3e})")]
    DegenerateTriangle { tri: usize, area: f64 },
    #[error("non-manifold edge ({a}, {b}) shared by {count} triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("mesh is not orientable (conflict at triangle {tri})")]
    NonOrientable { tri: usize },
    #[error("boundary is not a set of simple loops (vertex {vertex})")]
    BrokenBoundary { vertex: usize },
    #[error("non-integer genus on component {component} (chi = {chi}, boundaries = {boundaries}); mesh is non-orientable or broken")]
    NonIntegerGenus {
        component: usize,
        chi: i64,
        boundaries: usize,
    },
    #[error("empty triangle selection")]
    EmptySelection,
    #[error("isolated vertex {0} has zero lumped mass")]
    IsolatedVertex(usize),
    #[error("cotangent overflow in near-degenerate triangle {0}")]
    CotangentOverflow(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Y^T D Y is rank deficient (min/max eigenvalue ratio {0:.3e}); reperturb the iterate")]
    RankDeficient(f64),
    #[error("sparse factorization failed at pivot {pivot} (value {value:.3e})")]
    FactorizationFailed { pivot: usize, value: f64 },
    #[error("linear solve residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    SolveResidual { residual: f64, tol: f64 },
    #[error("eigensolver did not converge: {achieved} of {requested} pairs")]
    EigenNonConvergence { achieved: usize, requested: usize },
    #[error("mode {0} is identically zero")]
    DegenerateMode(usize),
    #[error("mode set does not cover the mesh ({uncovered} uncovered vertices)")]
    IncompleteCoverage { uncovered: usize },
    #[error("mesh has {0} connected components; this stage requires a connected mesh")]
    NotConnected(usize),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
