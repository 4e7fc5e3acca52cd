use crate::fields::ScalarField;

/// Sublevel measure `m(t) = |{field < t}|` of a grid field.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionFunction {
    /// Sorted distinct values.
    values: Vec<f64>,
    /// `cumulative[k] = m(values[k])`, the area strictly below `values[k]`.
    cumulative: Vec<f64>,
    total: f64,
    /// Per-cell `(value, area)` sorted by value then cell index.
    cells: Vec<(f64, f64)>,
    /// Mass below each sorted cell plus half its own area.
    mids: Vec<f64>,
}

/// Cell indices sorted by value, ties broken by flat index.
pub(crate) fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

impl DistributionFunction {
    pub fn from_cells(values: &[f64], areas: &[f64]) -> Self {
        assert_eq!(values.len(), areas.len());
        let order = sorted_order(values);
        let cells: Vec<(f64, f64)> = order.iter().map(|&k| (values[k], areas[k])).collect();
        let mut uniq = Vec::new();
        let mut cumulative = Vec::new();
        let mut mids = Vec::with_capacity(cells.len());
        let mut acc = 0.0;
        for &(v, a) in &cells {
            if uniq.last() != Some(&v) {
                uniq.push(v);
                cumulative.push(acc);
            }
            mids.push(acc + 0.5 * a);
            acc += a;
        }
        DistributionFunction { values: uniq, cumulative, total: acc, cells, mids }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.values
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `|{field < t}|`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.values.partition_point(|&v| v < t);
        if k == self.values.len() {
            self.total
        } else {
            self.cumulative[k]
        }
    }

    /// Quantile function: piecewise linear through `(mass below + A/2, value)`
    /// of each cell, constant beyond the first and last cell.
    pub fn quantile(&self, s: f64) -> f64 {
        let n = self.cells.len();
        let mids = &self.mids;
        if s <= mids[0] {
            return self.cells[0].0;
        }
        if s >= mids[n - 1] {
            return self.cells[n - 1].0;
        }
        let k = mids.partition_point(|&m| m <= s);
        let w = (s - mids[k - 1]) / (mids[k] - mids[k - 1]);
        self.cells[k - 1].0 + w * (self.cells[k].0 - self.cells[k - 1].0)
    }

    /// `integral |m_a(t) - m_b(t)| dt`, exact for the two step functions.
    pub fn l1_distance(&self, other: &DistributionFunction) -> f64 {
        let mut ts: Vec<f64> = self.values.iter().chain(&other.values).copied().collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let mut acc = 0.0;
        for w in ts.windows(2) {
            // Both functions are constant on (w[0], w[1]].
            let t = w[1];
            acc += (self.eval(t) - other.eval(t)).abs() * (w[1] - w[0]);
        }
        acc
    }

    /// L1 distance divided by `|Omega| * (value range)`.
    pub fn relative_l1_distance(&self, other: &DistributionFunction) -> f64 {
        let lo = self.values[0].min(other.values[0]);
        let hi = self.values[self.values.len() - 1].max(other.values[other.values.len() - 1]);
        let scale = self.total.max(other.total) * (hi - lo);
        if scale > 0.0 {
            self.l1_distance(other) / scale
        } else {
            0.0
        }
    }
}

pub fn distribution_function(field: &ScalarField) -> DistributionFunction {
    DistributionFunction::from_cells(field.values(), &field.grid().areas())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use std::f64::consts::PI;

    #[test]
    fn r_squared_on_disk() {
        let g = Grid::disk(1.0, 64, 32).unwrap();
        let m = distribution_function(&ScalarField::radial(&g, |r| r * r));
        assert!((m.eval(0.5) - PI / 2.0).abs() < 2.0 * g.dr(), "{}", m.eval(0.5));
        assert!((m.eval(2.0) - PI).abs() < 1e-10);
        assert_eq!(m.eval(-1.0), 0.0);
    }

    #[test]
    fn constant_is_single_step() {
        let g = Grid::annulus(1.0, 2.0, 8, 8).unwrap();
        let m = distribution_function(&ScalarField::constant(&g, 2.5));
        assert_eq!(m.breakpoints(), &[2.5]);
        assert_eq!(m.eval(2.5), 0.0);
        assert!((m.eval(2.50001) - 3.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn l1_of_shift() {
        let m1 = DistributionFunction::from_cells(&[0.0, 1.0], &[1.0, 1.0]);
        let m2 = DistributionFunction::from_cells(&[0.5, 1.0], &[1.0, 1.0]);
        assert!((m1.l1_distance(&m2) - 0.5).abs() < 1e-15);
        assert_eq!(m1.l1_distance(&m1), 0.0);
        assert!((m1.quantile(1.0) - 0.5).abs() < 1e-15);
    }
}
