use crate::fields::ScalarField;

use super::distribution::{sorted_order, DistributionFunction};
use super::{MonotoneProfile, RearrangeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// Values non-decreasing in `u`; the energy-minimizing pairing.
    #[default]
    Min,
    /// Values non-increasing in `u`.
    Max,
}

/// Area-weighted mean, exact when all values agree.
fn weighted_mean(vals: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let first = vals.clone().next().map(|p| p.0).unwrap_or(0.0);
    if vals.clone().all(|(v, _)| v == first) {
        return first;
    }
    let (acc, area) = vals.fold((0.0, 0.0), |(s, a), (v, w)| (s + v * w, a + w));
    acc / area
}

fn equal_areas(areas: &[f64]) -> bool {
    let a0 = areas[0];
    areas.iter().all(|&a| (a - a0).abs() <= 1e-12 * a0.abs())
}

/// Cells with equal `u` (up to round-off) in sorted order.
fn tie_groups(u: &[f64], order: &[usize]) -> Vec<std::ops::Range<usize>> {
    let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eps = 1e-12 * (hi - lo).abs().max(hi.abs()).max(lo.abs());
    let mut groups = Vec::new();
    let mut start = 0;
    for k in 1..=order.len() {
        if k == order.len() || u[order[k]] - u[order[k - 1]] > eps {
            groups.push(start..k);
            start = k;
        }
    }
    groups
}

/// Rearranges the cell values of `h` to be monotone in `u`.
///
/// With equal cell areas the result is an exact permutation of `h`: the
/// k-th smallest value goes to the cell with the k-th smallest `u`, ties
/// by cell index. Otherwise each cell takes the quantile of `h` at the
/// midpoint of its mass interval in the `u` order, averaged over cells
/// tied in `u`.
pub fn transplant_values(h: &[f64], u: &[f64], areas: &[f64], dir: Direction) -> Vec<f64> {
    let n = h.len();
    let mut order = sorted_order(u);
    if dir == Direction::Max {
        // Largest u first, ties still by index.
        order.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
    }
    let mut out = vec![0.0; n];
    if equal_areas(areas) {
        let hs: Vec<f64> = sorted_order(h).into_iter().map(|k| h[k]).collect();
        for (rank, &cell) in order.iter().enumerate() {
            out[cell] = hs[rank];
        }
        return out;
    }
    let dist = DistributionFunction::from_cells(h, areas);
    let mut below = 0.0;
    let mut mid = vec![0.0; n];
    for &cell in &order {
        mid[cell] = dist.quantile(below + 0.5 * areas[cell]);
        below += areas[cell];
    }
    let groups = if dir == Direction::Max {
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        tie_groups(&neg, &order)
    } else {
        tie_groups(u, &order)
    };
    for g in groups {
        let cells = &order[g];
        let m = weighted_mean(cells.iter().map(|&c| (mid[c], areas[c])));
        for &c in cells {
            out[c] = m;
        }
    }
    out
}

pub fn monotone_transplant(h: &ScalarField, u: &ScalarField) -> Result<ScalarField, RearrangeError> {
    h.check_grid(u)?;
    let vals = transplant_values(h.values(), u.values(), &h.grid().areas(), Direction::Min);
    Ok(ScalarField::from_raw(h.grid().clone(), vals))
}

/// Fraction of cell pairs ordered oppositely by `a` and `b`.
pub fn inverted_fraction(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));
    let mut seq: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let mut buf = seq.clone();
    let inv = count_inversions(&mut seq, &mut buf);
    inv as f64 / (n as f64 * (n as f64 - 1.0) / 2.0)
}

/// Strict inversions by merge sort.
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let m = n / 2;
    let mut c = count_inversions(&mut v[..m], &mut buf[..m]) + count_inversions(&mut v[m..], &mut buf[m..]);
    let (mut i, mut j, mut k) = (0, m, 0);
    while i < m && j < n {
        if v[j] < v[i] {
            c += (m - i) as u64;
            buf[k] = v[j];
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + m - i].copy_from_slice(&v[i..m]);
    k += m - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    c
}

/// The non-decreasing `f` with `omega ~ f(u)`: area-weighted means of
/// `omega` over cells tied in `u`, made monotone by pool-adjacent-violators.
/// Exact at the sample points when `omega` is already a monotone function
/// of `u`.
pub fn recover_profile(omega: &ScalarField, u: &ScalarField) -> Result<MonotoneProfile, RearrangeError> {
    omega.check_grid(u)?;
    let frac = inverted_fraction(u.values(), omega.values());
    if frac >= 0.01 {
        return Err(RearrangeError::NotMonotoneCoupling { inverted_fraction: frac });
    }
    let areas = omega.grid().areas();
    let (uv, wv) = (u.values(), omega.values());
    let order = sorted_order(uv);
    let groups = tie_groups(uv, &order);
    let s: Vec<f64> = groups.iter().map(|g| uv[order[g.start]]).collect();
    // Blocks of (mean, weight, number of groups).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(groups.len());
    for g in &groups {
        let cells = &order[g.clone()];
        let w: f64 = cells.iter().map(|&c| areas[c]).sum();
        blocks.push((weighted_mean(cells.iter().map(|&c| (wv[c], areas[c]))), w, 1));
        while blocks.len() > 1 && blocks[blocks.len() - 1].0 < blocks[blocks.len() - 2].0 {
            let (m1, w1, n1) = blocks.pop().unwrap();
            let (m0, w0, n0) = blocks.pop().unwrap();
            blocks.push(((m0 * w0 + m1 * w1) / (w0 + w1), w0 + w1, n0 + n1));
        }
    }
    if s.len() == 1 {
        return Ok(MonotoneProfile::constant(blocks[0].0));
    }
    let f: Vec<f64> = blocks.iter().flat_map(|&(m, _, n)| std::iter::repeat_n(m, n)).collect();
    MonotoneProfile::new(s, f)
}

/// Same multiset of cell values (equal areas) or L1-matching distribution
/// functions (unequal areas).
pub fn is_rearrangement(a: &ScalarField, b: &ScalarField) -> bool {
    if a.check_grid(b).is_err() {
        return false;
    }
    let areas = a.grid().areas();
    if equal_areas(&areas) {
        let mut x = a.values().to_vec();
        let mut y = b.values().to_vec();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        return x == y;
    }
    let da = DistributionFunction::from_cells(a.values(), &areas);
    let db = DistributionFunction::from_cells(b.values(), &areas);
    da.relative_l1_distance(&db) < 1e-8
}
