//! Landau-Lifshitz-Gilbert dynamics on a 2-D grid, an MPI-style voltage
//! observation chain, and recovery of the LLG coefficients `(α̂₁, α̂₂)` from
//! voltage data by Landweber and Landweber-Kaczmarz iterations, in a reduced
//! (state eliminated) and an all-at-once (state kept as unknown) formulation.

pub mod aao;
pub mod config;
pub mod error;
pub mod grid;
pub mod llg;
pub mod observation;
pub mod reduced;
pub mod runner;
pub mod verify;
pub mod vec3;

pub use error::{Error, Result};
