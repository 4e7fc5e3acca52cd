use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::FieldError;

/// Shape of the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Annulus,
    Disk,
}

impl GridKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::Annulus => "annulus",
            GridKind::Disk => "disk",
        }
    }
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GridKind {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "annulus" => Ok(GridKind::Annulus),
            "disk" => Ok(GridKind::Disk),
            other => Err(FieldError::InvalidGrid(format!("unknown grid kind `{other}`"))),
        }
    }
}

/// Structured polar mesh with uniform spacing in `r` and `theta`.
///
/// Annulus nodes sit at `r_inner + i*dr` so both boundary circles are
/// stored rows. Disk nodes sit at `(i + 1/2)*dr` with `dr = R/(n_r - 1/2)`:
/// the pole is never stored and the last row lies exactly on `r = R`.
/// Values just across the pole are read from the opposite angle
/// (`f(-r, theta) = f(r, theta + pi)`), which is why `n_theta` must be even.
///
/// Cell areas are `weight[i] * dtheta`. Interior weights are `r_i * dr`
/// (the finite-volume cell), which makes the discrete Laplacian symmetric
/// in the area-weighted inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    kind: GridKind,
    r_inner: f64,
    r_outer: f64,
    n_r: usize,
    n_theta: usize,
    dr: f64,
    dtheta: f64,
    radii: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn annulus(r_inner: f64, r_outer: f64, n_r: usize, n_theta: usize) -> Result<Arc<Grid>, FieldError> {
        if !(r_inner > 0.0) || !r_inner.is_finite() {
            return Err(FieldError::InvalidGrid(format!("annulus needs r_inner > 0, got {r_inner}")));
        }
        Self::check_common(r_inner, r_outer, n_r, n_theta)?;
        let dr = (r_outer - r_inner) / (n_r - 1) as f64;
        let radii: Vec<f64> = (0..n_r).map(|i| r_inner + i as f64 * dr).collect();
        // Trapezoid rule in s = r^2: interior weights r_i*dr, and the total is
        // exactly (r_outer^2 - r_inner^2)/2.
        let mut weights = vec![0.0; n_r];
        for i in 0..n_r {
            let lo = if i == 0 { radii[0] } else { radii[i - 1] };
            let hi = if i + 1 == n_r { radii[n_r - 1] } else { radii[i + 1] };
            weights[i] = 0.25 * (hi * hi - lo * lo);
        }
        weights[1..n_r - 1]
            .iter_mut()
            .zip(&radii[1..n_r - 1])
            .for_each(|(w, r)| *w = r * dr);
        Ok(Arc::new(Grid {
            kind: GridKind::Annulus,
            r_inner,
            r_outer,
            n_r,
            n_theta,
            dr,
            dtheta: 2.0 * PI / n_theta as f64,
            radii,
            weights,
        }))
    }

    pub fn disk(radius: f64, n_r: usize, n_theta: usize) -> Result<Arc<Grid>, FieldError> {
        Self::check_common(0.0, radius, n_r, n_theta)?;
        let dr = radius / (n_r as f64 - 0.5);
        let mut radii: Vec<f64> = (0..n_r).map(|i| (i as f64 + 0.5) * dr).collect();
        radii[n_r - 1] = radius;
        let mut weights: Vec<f64> = radii.iter().map(|r| r * dr).collect();
        let last_face = radius - 0.5 * dr;
        weights[n_r - 1] = 0.5 * (radius * radius - last_face * last_face);
        Ok(Arc::new(Grid {
            kind: GridKind::Disk,
            r_inner: 0.0,
            r_outer: radius,
            n_r,
            n_theta,
            dr,
            dtheta: 2.0 * PI / n_theta as f64,
            radii,
            weights,
        }))
    }

    pub fn new(kind: GridKind, r_inner: f64, r_outer: f64, n_r: usize, n_theta: usize) -> Result<Arc<Grid>, FieldError> {
        match kind {
            GridKind::Annulus => Grid::annulus(r_inner, r_outer, n_r, n_theta),
            GridKind::Disk => {
                if r_inner != 0.0 {
                    return Err(FieldError::InvalidGrid(format!("disk grid needs r_inner = 0, got {r_inner}")));
                }
                Grid::disk(r_outer, n_r, n_theta)
            }
        }
    }

    fn check_common(r_inner: f64, r_outer: f64, n_r: usize, n_theta: usize) -> Result<(), FieldError> {
        if !(r_outer > r_inner) || !r_outer.is_finite() {
            return Err(FieldError::InvalidGrid(format!("need r_inner < r_outer, got {r_inner} >= {r_outer}")));
        }
        if n_r < 4 {
            return Err(FieldError::InvalidGrid(format!("n_r must be >= 4, got {n_r}")));
        }
        if n_theta < 8 || n_theta % 2 != 0 {
            return Err(FieldError::InvalidGrid(format!("n_theta must be even and >= 8, got {n_theta}")));
        }
        Ok(())
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }
    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }
    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }
    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn dr(&self) -> f64 {
        self.dr
    }
    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }
    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }
    /// Row and column of a flat index.
    #[inline]
    pub fn row_col(&self, k: usize) -> (usize, usize) {
        (k / self.n_theta, k % self.n_theta)
    }
    pub fn area(&self, i: usize) -> f64 {
        self.weights[i] * self.dtheta
    }
    /// Cell areas in flat (row-major) order.
    pub fn areas(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.area(k / self.n_theta)).collect()
    }
    pub fn total_area(&self) -> f64 {
        PI * (self.r_outer * self.r_outer - self.r_inner * self.r_inner)
    }
    /// Face radius between rows `i` and `i + 1`.
    pub fn face(&self, i: usize) -> f64 {
        match self.kind {
            GridKind::Annulus => self.radii[i] + 0.5 * self.dr,
            GridKind::Disk => (i as f64 + 1.0) * self.dr,
        }
    }
    /// Rows carrying Dirichlet data for the stream function.
    pub fn is_boundary_row(&self, i: usize) -> bool {
        match self.kind {
            GridKind::Annulus => i == 0 || i + 1 == self.n_r,
            GridKind::Disk => i + 1 == self.n_r,
        }
    }
    pub fn interior_rows(&self) -> std::ops::Range<usize> {
        match self.kind {
            GridKind::Annulus => 1..self.n_r - 1,
            GridKind::Disk => 0..self.n_r - 1,
        }
    }
    /// Smallest cell edge, used for CFL limits.
    pub fn min_spacing(&self) -> f64 {
        self.dr.min(self.radii[0].max(self.dr * 0.5) * self.dtheta)
    }
    pub fn node_xy(&self, i: usize, j: usize) -> [f64; 2] {
        let (r, t) = (self.radii[i], self.theta(j));
        [r * t.cos(), r * t.sin()]
    }
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let r = x.hypot(y);
        r >= self.r_inner && r <= self.r_outer
    }
    /// Fractional row coordinate of radius `r` (node `i` at `i`).
    pub fn row_coord(&self, r: f64) -> f64 {
        (r - self.radii[0]) / self.dr
    }
    pub fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn areas_sum_to_domain_area() {
        for g in [
            Grid::annulus(1.0, 2.0, 33, 64).unwrap(),
            Grid::annulus(0.3, 5.0, 7, 10).unwrap(),
            Grid::disk(1.0, 16, 32).unwrap(),
            Grid::disk(2.5, 5, 8).unwrap(),
        ] {
            let total: f64 = g.areas().iter().sum();
            let exact = g.total_area();
            assert!(((total - exact) / exact).abs() < 1e-12, "{total} vs {exact}");
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::annulus(2.0, 1.0, 8, 8).is_err());
        assert!(Grid::annulus(1.0, 2.0, 3, 8).is_err());
        assert!(Grid::annulus(1.0, 2.0, 8, 9).is_err());
        assert!(Grid::disk(1.0, 8, 6).is_err());
        assert!(Grid::new(GridKind::Disk, 0.5, 1.0, 8, 8).is_err());
    }

    #[test]
    fn disk_last_row_on_boundary() {
        let g = Grid::disk(1.0, 10, 16).unwrap();
        assert_eq!(g.radius(9), 1.0);
        assert!((g.radius(0) - 0.5 * g.dr()).abs() < 1e-15);
        assert!(g.is_boundary_row(9) && !g.is_boundary_row(0));
    }
}
