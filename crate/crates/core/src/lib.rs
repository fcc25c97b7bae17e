//! Numerical laboratory for the Biot consolidation system of poro-elasticity.
//!
//! The crate provides finite-difference forward solvers for the coupled
//! displacement/temperature system and its scalar sub-problems, a verifier
//! that evaluates both sides of weighted (Carleman-type) inequalities on
//! ensembles of discrete fields, and linearized coefficient reconstructions
//! driven by synthetic twin experiments.

// Stencil and quadrature loops index several parallel arrays at once.
#![allow(clippy::needless_range_loop)]

pub mod carleman;
pub mod cli;
pub mod coeffs;
pub mod config;
pub mod error;
pub mod forward;
pub mod grid;
pub mod inverse;
pub mod weights;

pub use error::{Error, Result};
