//! Plane-strain elastic-plastic finite element solver built on cell-based
//! strain smoothing.
//!
//! Each four-node quadrilateral is subdivided into smoothing cells; strains
//! are constant per cell and computed from shape-function values on the
//! cell boundary alone, so no isoparametric mapping or domain quadrature is
//! needed and heavily distorted (even non-convex) quads remain usable.
//! A conventional 2x2-Gauss compatible kernel is included as a comparison
//! baseline behind the same cell abstraction.
//!
//! Crate layout:
//! - [`mesh`]: geometry, connectivity, smoothing-cell construction, mesh
//!   file I/O.
//! - [`quad4`]: bilinear element interpolation shared by all kernels.
//! - [`smoothing`]: smoothed strain-displacement operators, cell stiffness,
//!   the kernel-agnostic [`smoothing::CellOps`] table.
//! - [`constitutive`]: plane-strain elasticity and Mohr-Coulomb return
//!   mapping with main-plane/edge/apex regions.
//! - [`solver`]: assembly, boundary conditions, incremental Newton loop,
//!   element birth-death, geostatic initialization.
//! - [`generators`]: structured meshes for the shipped benchmarks.
//! - [`casefile`]: the analysis case format.
//! - [`drivers`]: benchmark drivers and analytical reference solutions.
//! - [`export`]: VTK legacy ASCII and CSV output.
//! - [`verify`]: the self-check battery behind `geosmooth verify`.

pub mod casefile;
pub mod constitutive;
pub mod drivers;
pub mod error;
pub mod export;
pub mod generators;
pub mod mesh;
pub mod quad4;
pub mod smoothing;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};

/// Forces single-threaded linear algebra so repeated runs of the same case
/// are bitwise identical. Called by every entry point (CLI, drivers,
/// tests); safe to call more than once.
pub fn configure_deterministic() {
    faer::set_global_parallelism(faer::Par::Seq);
}
