//! Spectral shift functions for one-dimensional Schrödinger operators
//! `−ψ″ + Vψ` on a finite interval (0, R) and on the half-line (0, ∞) with
//! separated (Robin) boundary conditions.

pub mod convergence;
pub mod decomposition;
pub mod determinants;
pub mod error;
pub mod geometry;
pub mod greens;
pub mod numerics;
pub mod potential;
pub mod report;
pub mod solutions;
pub mod ssf;

pub use error::{Result, SsfError};
pub use potential::{Factorization, Interpolation, Potential, Shape};
