//! Random sampling, special functions and dense linear algebra shared by the
//! rest of the crate.

mod levinson;
mod linalg;
mod rng;
mod special;

pub use levinson::{levinson, levinson_visit, step_up, LevinsonResult};
pub use linalg::{solve_spd, SymmetricMatrix};
pub(crate) use linalg::solve_general;
pub use rng::{sample_beta, sample_std_normal, RngStream};
pub use special::{beta_cdf, chi2_1_quantile, chi2_1_tail};
