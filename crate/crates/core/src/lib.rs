//! Numerical laboratory for path-dependent Hamilton–Jacobi equations over
//! monotone evolution equations.
//!
//! The building blocks are a discrete Gelfand triple on an interval
//! ([`gelfand`]), gridded paths and trajectory bundles ([`pathspace`]), an
//! implicit Euler solver ([`evolution`]), Bellman/Isaacs Hamiltonians
//! ([`hamiltonian`]), exhaustive control and game trees ([`control`],
//! [`game`]), minimax inequality checkers ([`minimax`]) and functional
//! calculus checks ([`chainrule`]). Named presets, candidates and
//! verification suites are looked up in registries ([`presets`],
//! [`suites`]).

pub mod chainrule;
pub mod config;
pub mod control;
pub mod error;
pub mod evolution;
pub mod game;
pub mod gelfand;
pub mod hamiltonian;
pub mod minimax;
pub mod pathspace;
pub mod presets;
pub mod suites;

pub use error::{LabError, Result};
