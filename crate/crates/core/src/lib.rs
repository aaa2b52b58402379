//! Exact and asymptotic volumes of unit balls of self-adjoint Schatten
//! p-classes, the Ullman equilibrium distribution, and partition functions of
//! one-dimensional β-ensembles with potential `v_p |x|^p`.
//!
//! Everything that can overflow is computed in the log domain. The modules
//! build on each other bottom-up:
//!
//! * [`numerics`]: special functions, quadrature, random streams
//! * [`ullman`]: the equilibrium density `f_p` and its constants
//! * [`volumes`]: closed-form volumes (`p = 2`, `p = ∞`, ℓ_p balls)
//! * [`partition`]: partition functions and the two volume routes via Weyl integration
//! * [`equilibrium`]: discrete log-energy minimisation (weighted Fekete points)
//! * [`expansion`]: large-n asymptotic expansions and residual diagnostics
//! * [`validation`]: the self-check suite behind `schatten validate`

pub mod equilibrium;
pub mod error;
pub mod expansion;
pub mod numerics;
pub mod partition;
pub mod ullman;
pub mod validation;
pub mod volumes;

pub use equilibrium::{OptimizeResult, ParticleConfig};
pub use error::{Error, Result};
pub use expansion::{ExpansionValue, Order, ResidualSeries};
pub use numerics::{LogNumber, QuadratureSpec, RandomStream, Singularity};
pub use partition::{EnsembleParams, McEstimate};
pub use ullman::{UllmanConstants, UllmanDistribution};
pub use volumes::{Beta, MatrixClassParams};
