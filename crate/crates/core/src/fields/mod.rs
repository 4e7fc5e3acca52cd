//! Polar grids, sampled fields and the finite-difference operators on them.

mod dump;
mod grid;
mod interp;
mod ops;

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

pub use dump::{read_dump, write_dump};
pub use grid::{Grid, GridKind};
pub use interp::{CartesianSampler, Stencil};
pub(crate) use ops::{d_r, d_theta};
pub use ops::{
    curl, dirichlet_energy, divergence, gradient, integrate, laplacian, ring_flux, velocity_from_stream,
};

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dump parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Scalar values at grid nodes, row-major (`values[i * n_theta + j]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::WrongLength { expected: grid.len(), got: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = grid.row_col(k);
            return Err(FieldError::NonFinite { row, col });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        ScalarField { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    /// Samples `f(r, theta)` at every node.
    pub fn from_polar(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_r() {
            let r = grid.radius(i);
            for j in 0..grid.n_theta() {
                values.push(f(r, grid.theta(j)));
            }
        }
        ScalarField { grid: grid.clone(), values }
    }

    pub fn from_xy(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_polar(grid, |r, t| f(r * t.cos(), r * t.sin()))
    }

    /// Samples a function of radius only.
    pub fn radial(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_r() {
            let v = f(grid.radius(i));
            values.extend(std::iter::repeat_n(v, grid.n_theta()));
        }
        ScalarField { grid: grid.clone(), values }
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_theta();
        &self.values[i * n..(i + 1) * n]
    }

    /// Value at a possibly negative row index. Rows below zero on a disk
    /// are mirrored through the pole.
    #[inline]
    pub(crate) fn at_ext(&self, i: isize, j: usize) -> f64 {
        let n = self.grid.n_theta();
        if i >= 0 {
            self.values[i as usize * n + j % n]
        } else {
            let row = (-1 - i) as usize;
            self.values[row * n + (j + n / 2) % n]
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self, FieldError> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    pub fn check_grid(&self, other: &ScalarField) -> Result<(), FieldError> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(FieldError::GridMismatch)
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
    /// Largest spread of values across any single row.
    pub fn max_theta_variation(&self) -> f64 {
        (0..self.grid.n_r())
            .map(|i| {
                let row = self.row(i);
                let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
                hi - lo
            })
            .fold(0.0, f64::max)
    }
    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
    /// Max abs difference over interior rows only.
    pub fn max_abs_diff_interior(&self, other: &ScalarField) -> f64 {
        let mut m: f64 = 0.0;
        for i in self.grid.interior_rows() {
            for (a, b) in self.row(i).iter().zip(other.row(i)) {
                m = m.max((a - b).abs());
            }
        }
        m
    }

    /// Cubic interpolation at a Cartesian point.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        Stencil::at(&self.grid, x, y).apply(self)
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b).expect("grid mismatch in field addition")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b).expect("grid mismatch in field subtraction")
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.map(|a| a * rhs)
    }
}

/// Velocity in polar components at grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub v_r: ScalarField,
    pub v_theta: ScalarField,
}

impl VectorField {
    pub fn new(v_r: ScalarField, v_theta: ScalarField) -> Result<Self, FieldError> {
        v_r.check_grid(&v_theta)?;
        Ok(VectorField { v_r, v_theta })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        VectorField { v_r: ScalarField::zeros(grid), v_theta: ScalarField::zeros(grid) }
    }

    /// Builds a field from a Cartesian velocity function of `(x, y)`.
    pub fn from_cartesian(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let v_r = ScalarField::from_polar(grid, |r, t| {
            let (c, s) = (t.cos(), t.sin());
            let [vx, vy] = f(r * c, r * s);
            vx * c + vy * s
        });
        let v_theta = ScalarField::from_polar(grid, |r, t| {
            let (c, s) = (t.cos(), t.sin());
            let [vx, vy] = f(r * c, r * s);
            -vx * s + vy * c
        });
        VectorField { v_r, v_theta }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.v_r.grid()
    }

    /// Cartesian components `(v_x, v_y)` at the nodes.
    pub fn to_cartesian(&self) -> (ScalarField, ScalarField) {
        let g = self.grid();
        let mut vx = Vec::with_capacity(g.len());
        let mut vy = Vec::with_capacity(g.len());
        for i in 0..g.n_r() {
            for j in 0..g.n_theta() {
                let (c, s) = (g.theta(j).cos(), g.theta(j).sin());
                let (a, b) = (self.v_r.at(i, j), self.v_theta.at(i, j));
                vx.push(a * c - b * s);
                vy.push(a * s + b * c);
            }
        }
        (ScalarField::from_raw(g.clone(), vx), ScalarField::from_raw(g.clone(), vy))
    }

    /// Pointwise speed.
    pub fn magnitude(&self) -> ScalarField {
        self.v_r.zip_map(&self.v_theta, f64::hypot).expect("components share a grid")
    }

    pub fn max_speed(&self) -> f64 {
        self.magnitude().max()
    }

    pub fn sampler(&self) -> CartesianSampler {
        CartesianSampler::new(self)
    }
}
