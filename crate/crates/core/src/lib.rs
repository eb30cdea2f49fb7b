//! Numerical toolkit for equilibrium states of full-branch expanding circle
//! maps via transfer operators.
//!
//! The crate provides, for a piecewise-monotone full-branch map of the circle
//! and a potential of small variation:
//!
//! * verification of the expansion/covering/potential hypotheses that make the
//!   transfer operator a projective-cone contraction ([`hypotheses`]),
//! * a collocation discretization of the transfer operator and its leading
//!   spectral data: eigenvalue, invariant density, conformal weights,
//!   equilibrium weights ([`operator`]),
//! * projective metrics on positive and locally-Hoelder cones, with cone
//!   invariance and contraction measurements ([`cones`]),
//! * decay of correlations, Green-Kubo variance and an empirical central
//!   limit test ([`statistics`]),
//! * deterministic and random perturbation experiments ([`stability`]).
//!
//! The crate is `no_std`-compatible (with `alloc`); all elementary functions
//! go through `libm` so results are bit-identical across builds.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod circle;
pub mod cones;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod hypotheses;
pub mod operator;
pub mod statistics;
pub mod stability;

pub use circle::{dist, wrap, CircleArc, DIAM};
pub use dynamics::{CircleMap, CoverSpec, PotentialSpec};
pub use error::Error;
pub use grid::GridFunction;
pub use operator::{SpectralSolution, TransferMatrix};

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
