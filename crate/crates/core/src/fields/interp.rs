use std::f64::consts::PI;

use super::{Grid, GridKind, ScalarField, VectorField};

/// Tensor-product cubic Lagrange weights for one evaluation point.
///
/// Four radial rows (shifted inward at the annulus edges, mirrored through
/// the pole on a disk) times four periodic angular columns.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    rows: [isize; 4],
    wr: [f64; 4],
    cols: [usize; 4],
    wt: [f64; 4],
}

fn lagrange4(s: f64) -> [f64; 4] {
    // Nodes at -1, 0, 1, 2.
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}

impl Stencil {
    pub fn at(grid: &Grid, x: f64, y: f64) -> Stencil {
        let r = x.hypot(y);
        let theta = y.atan2(x).rem_euclid(2.0 * PI);
        Self::at_polar(grid, r, theta)
    }

    pub fn at_polar(grid: &Grid, r: f64, theta: f64) -> Stencil {
        let s = grid.row_coord(r);
        let mut base = s.floor() as isize - 1;
        let max_base = grid.n_r() as isize - 4;
        let min_base = match grid.kind() {
            GridKind::Annulus => 0,
            GridKind::Disk => -2,
        };
        base = base.clamp(min_base, max_base);
        let wr = lagrange4(s - (base + 1) as f64);
        let rows = [base, base + 1, base + 2, base + 3];

        let n = grid.n_theta();
        let t = theta.rem_euclid(2.0 * PI) / grid.dtheta();
        let tb = t.floor();
        let wt = lagrange4(t - tb);
        let tb = tb as isize;
        let cols = [0isize, 1, 2, 3].map(|k| (tb - 1 + k).rem_euclid(n as isize) as usize);
        Stencil { rows, wr, cols, wt }
    }

    pub fn apply(&self, f: &ScalarField) -> f64 {
        let mut acc = 0.0;
        for (a, &i) in self.rows.iter().enumerate() {
            let mut row = 0.0;
            for (b, &j) in self.cols.iter().enumerate() {
                row += self.wt[b] * f.at_ext(i, j);
            }
            acc += self.wr[a] * row;
        }
        acc
    }
}

/// Cached Cartesian components of a vector field for repeated point queries.
#[derive(Debug, Clone)]
pub struct CartesianSampler {
    vx: ScalarField,
    vy: ScalarField,
}

impl CartesianSampler {
    pub fn new(v: &VectorField) -> Self {
        let (vx, vy) = v.to_cartesian();
        CartesianSampler { vx, vy }
    }

    pub fn from_components(vx: ScalarField, vy: ScalarField) -> Self {
        CartesianSampler { vx, vy }
    }

    pub fn grid(&self) -> &Grid {
        self.vx.grid()
    }

    pub fn sample(&self, x: f64, y: f64) -> [f64; 2] {
        let st = Stencil::at(self.vx.grid(), x, y);
        [st.apply(&self.vx), st.apply(&self.vy)]
    }

    pub fn components(&self) -> (&ScalarField, &ScalarField) {
        (&self.vx, &self.vy)
    }
}
