//! Dirichlet solvers, logarithmic potentials and level-curve tools.

mod coarea;
mod contour;
mod poisson;
mod potential;

pub use coarea::{coarea_identity_check, CoareaOptions, CoareaReport};
pub use contour::{extract_level_curves, LevelCurve};
pub use poisson::{solve_poisson, solve_semilinear, PoissonSolver, SemilinearOptions, SemilinearSolution};
pub use potential::{fundamental_solution, newtonian_potential, segment_log_integral, single_layer};

use crate::fields::{FieldError, Grid, GridKind};

#[derive(Debug, thiserror::Error)]
pub enum EllipticError {
    #[error("boundary data does not fit the grid: {0}")]
    BoundaryMismatch(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("degenerate level {level}: {reason}")]
    DegenerateLevel { level: f64, reason: String },
    #[error("evaluation point lies on the curve (distance {distance:e})")]
    PointOnCurve { distance: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Dirichlet value along one boundary circle.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryValue {
    Constant(f64),
    /// One value per angular node.
    Sampled(Vec<f64>),
}

impl BoundaryValue {
    #[inline]
    pub fn at(&self, j: usize) -> f64 {
        match self {
            BoundaryValue::Constant(c) => *c,
            BoundaryValue::Sampled(v) => v[j],
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            BoundaryValue::Constant(c) => Some(*c),
            BoundaryValue::Sampled(_) => None,
        }
    }

    fn combine(a: f64, x: &BoundaryValue, b: f64, y: &BoundaryValue) -> BoundaryValue {
        match (x, y) {
            (BoundaryValue::Constant(p), BoundaryValue::Constant(q)) => BoundaryValue::Constant(a * p + b * q),
            _ => {
                let n = match (x, y) {
                    (BoundaryValue::Sampled(v), _) | (_, BoundaryValue::Sampled(v)) => v.len(),
                    _ => unreachable!(),
                };
                BoundaryValue::Sampled((0..n).map(|j| a * x.at(j) + b * y.at(j)).collect())
            }
        }
    }
}

/// Stream-function values on the boundary. `inner` is `None` on a disk.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub inner: Option<BoundaryValue>,
    pub outer: BoundaryValue,
}

impl BoundaryData {
    pub fn disk(outer: f64) -> Self {
        BoundaryData { inner: None, outer: BoundaryValue::Constant(outer) }
    }

    pub fn annulus(inner: f64, outer: f64) -> Self {
        BoundaryData { inner: Some(BoundaryValue::Constant(inner)), outer: BoundaryValue::Constant(outer) }
    }

    /// Homogeneous data matching the grid kind.
    pub fn zero(grid: &Grid) -> Self {
        match grid.kind() {
            GridKind::Disk => Self::disk(0.0),
            GridKind::Annulus => Self::annulus(0.0, 0.0),
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), EllipticError> {
        match (grid.kind(), &self.inner) {
            (GridKind::Disk, Some(_)) => {
                return Err(EllipticError::BoundaryMismatch("disk has no inner boundary".into()))
            }
            (GridKind::Annulus, None) => {
                return Err(EllipticError::BoundaryMismatch("annulus needs inner boundary data".into()))
            }
            _ => {}
        }
        for v in self.inner.iter().chain(std::iter::once(&self.outer)) {
            match v {
                BoundaryValue::Sampled(s) if s.len() != grid.n_theta() => {
                    return Err(EllipticError::BoundaryMismatch(format!(
                        "sampled profile has {} values, grid has {} angles",
                        s.len(),
                        grid.n_theta()
                    )))
                }
                BoundaryValue::Sampled(s) if s.iter().any(|x| !x.is_finite()) => {
                    return Err(EllipticError::BoundaryMismatch("non-finite boundary value".into()))
                }
                BoundaryValue::Constant(c) if !c.is_finite() => {
                    return Err(EllipticError::BoundaryMismatch("non-finite boundary value".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &BoundaryData, b: f64) -> BoundaryData {
        let inner = match (&self.inner, &other.inner) {
            (Some(x), Some(y)) => Some(BoundaryValue::combine(a, x, b, y)),
            _ => None,
        };
        BoundaryData { inner, outer: BoundaryValue::combine(a, &self.outer, b, &other.outer) }
    }

    /// Value prescribed on grid row `i` (a boundary row) at column `j`.
    pub(crate) fn row_value(&self, grid: &Grid, i: usize, j: usize) -> f64 {
        if i == 0 && grid.kind() == GridKind::Annulus {
            self.inner.as_ref().expect("validated").at(j)
        } else {
            self.outer.at(j)
        }
    }
}
