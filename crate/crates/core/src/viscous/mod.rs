//! Faedo–Galerkin solver for the viscous body-frame system with Navier
//! slip conditions.
//!
//! The basis holds the rigid test fields `v₁..v₆` followed by exterior
//! modes; the coefficients obey `ℳ_N G' = 2ν𝒜_N G + ℬ_N(G, G)`.

mod basis;
mod initial;
mod solver;
mod system;

pub use basis::{build_basis, build_basis_with, mode_catalog, BasisOptions, GalerkinBasis, ModeLabel};
pub use initial::{moments, project, InitialData, VorticalProfile};
pub use solver::{energy_report, step, EnergyLedger, LedgerEntry, StepOptions, Trajectory, ViscousSolver, ViscousState};
pub use system::{assemble_system, assemble_tensors, GalerkinSystem, GalerkinTensors};

#[cfg(test)]
mod tests;
