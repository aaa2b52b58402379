//! Special functions, log-domain arithmetic, adaptive quadrature and seeded
//! random streams shared by the rest of the crate.

mod lognum;
mod quadrature;
mod rng;
mod special;

pub use lognum::{log_mean_exp, log_sum_exp, LogNumber, Sign};
pub use quadrature::{
    integrate, integrate_with_offsets, Abscissa, QuadratureResult, QuadratureSpec, Singularity,
};
pub use rng::RandomStream;
pub use special::{ln_factorial, log_gamma};
