//! Distribution functions, monotone rearrangements and the energy problem
//! over a rearrangement class.

mod distribution;
mod minimize;
mod profile;
mod transplant;

pub use distribution::{distribution_function, DistributionFunction};
pub use minimize::{
    brute_force_min_energy, minimize_discrete, minimize_energy, DirichletProblem, DiscreteMinimum, MinimizeOptions,
    MinimizeResult, PolarProblem, GraphProblem, BRUTE_FORCE_LIMIT,
};
pub use profile::MonotoneProfile;
pub use transplant::{
    inverted_fraction, is_rearrangement, monotone_transplant, recover_profile, transplant_values, Direction,
};

use crate::elliptic::EllipticError;
use crate::fields::FieldError;

#[derive(Debug, thiserror::Error)]
pub enum RearrangeError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("omega is not a monotone function of u ({inverted_fraction:.3} of pairs inverted)")]
    NotMonotoneCoupling { inverted_fraction: f64 },
    #[error("brute force limited to 10 cells, got {0}")]
    TooLarge(usize),
    #[error("no convergence after {iterations} iterations")]
    MaxIters { iterations: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}
