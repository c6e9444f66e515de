//! Structured real radius of controllability for LTI descriptor and
//! higher-order systems.
//!
//! A system is reduced to descriptor form, its block-Toeplitz
//! controllability matrix is assembled, and the distance to the nearest
//! uncontrollable system is computed as a nearest structured low-rank
//! approximation of that matrix via the structured total least norm (STLN)
//! iteration. Entry masks restrict which system entries may be perturbed.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod radius;
pub mod stln;
pub mod systems;
pub mod toeplitz;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use radius::{
    compute_radius_descriptor, compute_radius_higher_order, oracle_r2_unstructured,
    HigherOrderMask, RadiusResult,
};
pub use stln::{PartitionChoice, StlnConfig};
pub use systems::{
    ControllabilityReport, DescriptorSystem, FailingMode, HigherOrderSystem, PerturbationMask,
};
