#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop)]

//! Computational local Morse theory on sampled potentials.
//!
//! The crate works on scalar potentials sampled over a regular box grid in
//! two or three dimensions. From a sample it derives finite-difference
//! gradient and Hessian fields, classifies the Hessian pointwise (index,
//! determinant, distortion, membership in the cone `|A|^n <= K det A`),
//! computes critical groups as relative cubical homology over the integers,
//! and integrates the normalized descent flow `x' = -X / |X|^2`.
//!
//! Everything here is `no_std` with `alloc`; file formats, reports and the
//! command-line front end live in the companion `critmorse` crate.
//!
//! Modules:
//! * [`symfield`] grids, sampled fields, stencils and the example gallery
//! * [`symlinalg`] small symmetric matrices
//! * [`cubhom`] cubical complexes, Smith normal form, relative homology
//! * [`critgroups`] critical points and critical groups
//! * [`pseudoflow`] pseudo-gradient flows, arrival times, retractions
//! * [`verify`] end-to-end checks with structured reports

extern crate alloc;

mod math;

pub mod critgroups;
pub mod cubhom;
pub mod pseudoflow;
pub mod symfield;
pub mod symlinalg;
pub mod verify;

pub use crate::critgroups::{CriticalGroups, CriticalPoint};
pub use crate::cubhom::{CubicalComplex, CubicalPair, HomologyResult};
pub use crate::pseudoflow::{FlowTrajectory, PseudoGradientField};
pub use crate::symfield::{GalleryEntry, GridDomain, ScalarField, SymMatrixField, VectorField};
pub use crate::symlinalg::{IndexValue, SymMatrix};

pub use crate::verify::{Verdict, VerificationReport};
