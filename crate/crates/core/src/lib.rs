//! Decentralized consensus optimization with an explicit l1 disagreement
//! penalty.
//!
//! The crate is organised bottom-up:
//!
//! - [`network`]: communication graphs, Metropolis mixing matrices and their
//!   spectral summary.
//! - [`objectives`]: ridge, logistic and elastic-net benchmark problems with
//!   per-agent data shards.
//! - [`disagreement`]: the neighbor-local consensus operator `Z = (I - W) ⊗ I`.
//! - [`dp2g`]: the two-layer primal-dual proximal-gradient solver with
//!   penalty continuation.
//! - [`baselines`]: DGD (fixed and diminishing), EXTRA and NIDS.
//! - [`diagnostics`]: evaluation metrics, stationarity certificates, the
//!   Lyapunov descent check and the centralized reference solver.

pub mod baselines;
pub mod diagnostics;
pub mod disagreement;
pub mod dp2g;
mod error;
pub mod network;
pub mod noise;
pub mod objectives;
pub mod record;
pub mod seed;
mod stacked;

pub use error::{Error, Result};
pub use stacked::{BlockSource, Stacked, StackedDual};
