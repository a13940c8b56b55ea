//! Simulation and analysis of high-dimensional quantum state transfer on
//! XX-coupled spin networks.
//!
//! * [`topology`] builds coupling matrices for hypercubes of 2- and 3-site
//!   paths and for mirror-symmetric chains, or takes a user graph.
//! * [`spectral`] diagonalizes them, forms the single-magnon propagator
//!   e^{i2S₀Kt} and certifies perfect swaps at the closed-form times.
//! * [`qudit`] holds d-level states, Hurwitz coordinates and seeded uniform
//!   averaging over the state manifold.
//! * [`manybody`] evolves the untruncated spin-S₀ model sector by sector and
//!   measures the fidelity of the received qudit.
//! * [`bath`] covers dephasing by an antiferromagnetic spin bath.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod error;
pub mod manybody;
pub mod quad;
pub mod qudit;
pub mod spectral;
pub mod spin;
pub mod topology;

pub use bath::{
    average_fidelity_dephased, decoherence_factor, fidelity_dephased, BathParams, DecoherenceMatrix, DephasingMode,
    DephasingModel, Fig3Config, Lattice, Panel,
};
pub use error::{Error, Result};
pub use manybody::{average_fidelity_exact, ExactFidelity, ExactTransfer, SectorBasis, SectorSet};
pub use qudit::{HurwitzAngles, MonteCarloEstimate, QuditState};
pub use spectral::{certify_swap, diagonalize, propagator, CertifyTolerance, Propagator, SpectralForm, SwapCertificate};
pub use spin::Spin;
pub use topology::{CouplingMatrix, NetworkKind, NetworkSpec, PathBlock};
