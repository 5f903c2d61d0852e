//! Relaxed two-phase optimal design of the first eigenvalue of
//! `-div(c(θ) ∇u) = λ ρ(θ) u` with homogeneous Dirichlet conditions.
//!
//! The crate covers the whole pipeline: structured triangulations of the
//! disk and of rectangles ([`mesh`]), P0/P1/P2 finite element assembly
//! ([`fem`]), a shift-invert eigensolver ([`eigensolve`]), the admissible
//! density set and the eigenvalue gradient ([`design`]), the projected
//! gradient loop ([`optimizer`]), and a finite-dimensional laboratory for
//! pseudo-concavity of the smallest generalized eigenvalue of affine
//! matrix pencils ([`pencil_lab`]). Results are written by [`io`] and runs
//! are configured through [`config`].

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod design;
pub mod eigensolve;
pub mod error;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod optimizer;
pub mod pencil_lab;

pub use config::{parse_config, RunConfig};
pub use design::{DensityField, GradientField, VolumeConstraint};
pub use eigensolve::{EigenOptions, EigenPair};
pub use error::{Error, Result};
pub use fem::{Assembler, CoefficientPair, DofMap, Element, SparseSymMatrix};
pub use mesh::{DomainKind, TriMesh};
pub use optimizer::{InitialDesign, Materials, ProblemSpec, RunHistory, Variant};
pub use pencil_lab::MatrixPencil;
