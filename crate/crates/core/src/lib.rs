//! Unitarily extractable work (ergotropy) in quantum-chaotic Floquet models.
//!
//! The crate is organized bottom-up:
//!
//! - [`qcore`]: dense complex matrices, density matrices, partial traces,
//!   Hermitian eigendecomposition, Haar sampling and entropies.
//! - [`spinops`]: angular-momentum operators and the closed-form exponentials
//!   used to build Floquet operators.
//! - [`models`]: the kicked top (bipartite and tripartite) and the kicked
//!   Ising chain.
//! - [`workcore`]: passive states, ergotropy and measurement-assisted
//!   (daemonic) ergotropy.
//! - [`coarsegrain`]: coarse-grained measurements, reconstruction,
//!   observational entropy and the two unknown-state work protocols.
//! - [`chaosdiag`]: linear entropy, the random-state entanglement average
//!   and level-spacing ratios.
//! - [`harness`]: seeded ensemble sweeps and regressions.
//! - [`cli`]: configuration parsing and CSV/JSON emission for the `ergokit`
//!   binary.
//!
//! Tensor factors are always ordered system ⊗ ancilla (⊗ auxiliary), with the
//! first factor being the most significant index.

pub mod chaosdiag;
pub mod cli;
pub mod coarsegrain;
pub mod error;
pub mod harness;
pub mod models;
pub mod qcore;
pub mod spinops;
pub mod workcore;

pub use error::{Error, Result};
pub use qcore::{ComplexMatrix, DensityMatrix, PureState, C64};
