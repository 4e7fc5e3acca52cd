use std::sync::Arc;

use nalgebra::DMatrix;

use crate::elliptic::{BoundaryData, PoissonSolver};
use crate::fields::{dirichlet_energy, Grid, ScalarField};

use super::{recover_profile, transplant_values, Direction, MonotoneProfile, RearrangeError};

/// A discrete Dirichlet problem: cells with areas, a linear solve from
/// cell vorticity to stream values, and the kinetic energy.
pub trait DirichletProblem {
    fn areas(&self) -> Vec<f64>;
    fn solve(&self, omega: &[f64]) -> Result<Vec<f64>, RearrangeError>;
    fn energy(&self, omega: &[f64], u: &[f64]) -> f64;
}

/// The polar-grid Poisson problem; every grid node is a cell.
pub struct PolarProblem {
    solver: PoissonSolver,
    bc: BoundaryData,
}

impl PolarProblem {
    pub fn new(grid: &Arc<Grid>, bc: &BoundaryData) -> Result<Self, RearrangeError> {
        bc.validate(grid)?;
        Ok(PolarProblem { solver: PoissonSolver::new(grid), bc: bc.clone() })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.solver.grid()
    }
}

impl DirichletProblem for PolarProblem {
    fn areas(&self) -> Vec<f64> {
        self.grid().areas()
    }
    fn solve(&self, omega: &[f64]) -> Result<Vec<f64>, RearrangeError> {
        let w = ScalarField::new(self.grid().clone(), omega.to_vec())?;
        Ok(self.solver.solve(&w, &self.bc)?.into_values())
    }
    fn energy(&self, _omega: &[f64], u: &[f64]) -> f64 {
        dirichlet_energy(&ScalarField::from_raw(self.grid().clone(), u.to_vec()))
    }
}

/// Equal-area cells joined by conductances, some also tied to a grounded
/// (`u = 0`) boundary: `sum_j c_ij (u_j - u_i) - g_i u_i = A omega_i`.
pub struct GraphProblem {
    area: f64,
    edges: Vec<(usize, usize, f64)>,
    ground: Vec<f64>,
    inverse: DMatrix<f64>,
}

impl GraphProblem {
    pub fn new(area: f64, edges: Vec<(usize, usize, f64)>, ground: Vec<f64>) -> Result<Self, RearrangeError> {
        let n = ground.len();
        let bad = |m: String| Err(RearrangeError::InvalidProfile(m));
        if n == 0 || !(area > 0.0) {
            return bad(format!("need cells and a positive area (got {n}, {area})"));
        }
        if edges.iter().any(|&(i, j, c)| i >= n || j >= n || i == j || !(c >= 0.0)) || ground.iter().any(|g| !(*g >= 0.0)) {
            return bad("edges must join distinct cells with non-negative conductance".into());
        }
        let mut m = DMatrix::<f64>::zeros(n, n);
        for &(i, j, c) in &edges {
            m[(i, i)] -= c;
            m[(j, j)] -= c;
            m[(i, j)] += c;
            m[(j, i)] += c;
        }
        for (i, g) in ground.iter().enumerate() {
            m[(i, i)] -= g;
        }
        let Some(inv) = m.try_inverse() else {
            return bad("operator is singular; some component is not grounded".into());
        };
        Ok(GraphProblem { area, edges, ground, inverse: inv * area })
    }

    /// `n` cells on a periodic ring:
    /// `kappa (u[k-1] - 2 u[k] + u[k+1]) - gamma u[k] = omega[k]`.
    pub fn ring(n: usize, kappa: f64, gamma: f64, area: f64) -> Result<Self, RearrangeError> {
        let edges = match n {
            0 | 1 => vec![],
            2 => vec![(0, 1, 2.0 * kappa * area)],
            _ => (0..n).map(|k| (k, (k + 1) % n, kappa * area)).collect(),
        };
        Self::new(area, edges, vec![gamma * area; n])
    }

    /// The single interior row of an annulus with Dirichlet rows on both
    /// sides, discretized like the grid Laplacian.
    pub fn annulus_row(r_inner: f64, r_outer: f64, n: usize) -> Result<Self, RearrangeError> {
        let h = 0.5 * (r_outer - r_inner);
        let r = r_inner + h;
        let dt = 2.0 * std::f64::consts::PI / n as f64;
        Self::ring(n, 1.0 / (r * dt).powi(2), 2.0 / (h * h), r * h * dt)
    }

    /// A disk of radius `radius` cut into `n` equal-area shells, for
    /// radially symmetric fields; `u = 0` on the rim.
    pub fn disk_shells(radius: f64, n: usize) -> Result<Self, RearrangeError> {
        let nf = n as f64;
        let mid = |k: usize| radius * ((k as f64 + 0.5) / nf).sqrt();
        let face = |k: usize| radius * (k as f64 / nf).sqrt();
        let two_pi = 2.0 * std::f64::consts::PI;
        let edges = (0..n.saturating_sub(1)).map(|k| (k, k + 1, two_pi * face(k + 1) / (mid(k + 1) - mid(k)))).collect();
        let mut ground = vec![0.0; n];
        if n > 0 {
            ground[n - 1] = two_pi * radius / (radius - mid(n - 1));
        }
        Self::new(std::f64::consts::PI * radius * radius / nf, edges, ground)
    }

    /// Centre radius of shell `k` in [`GraphProblem::disk_shells`].
    pub fn shell_radius(radius: f64, n: usize, k: usize) -> f64 {
        radius * ((k as f64 + 0.5) / n as f64).sqrt()
    }

    pub fn len(&self) -> usize {
        self.ground.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ground.is_empty()
    }
}

impl DirichletProblem for GraphProblem {
    fn areas(&self) -> Vec<f64> {
        vec![self.area; self.len()]
    }
    fn solve(&self, omega: &[f64]) -> Result<Vec<f64>, RearrangeError> {
        Ok((&self.inverse * nalgebra::DVector::from_column_slice(omega)).as_slice().to_vec())
    }
    fn energy(&self, _omega: &[f64], u: &[f64]) -> f64 {
        let mut e: f64 = self.edges.iter().map(|&(i, j, c)| c * (u[i] - u[j]).powi(2)).sum();
        e += self.ground.iter().zip(u).map(|(g, v)| g * v * v).sum::<f64>();
        0.5 * e
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Relative energy change that counts as converged.
    pub tol: f64,
    pub direction: Direction,
    /// Finish with exact pairwise-swap and 3-cycle descent on small
    /// equal-area problems (at most [`POLISH_LIMIT`] cells).
    pub polish: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { max_iters: 200, tol: 1e-14, direction: Direction::Min, polish: true }
    }
}

pub const POLISH_LIMIT: usize = 64;
/// Largest problem that also tries all rearrangements of four cells.
const SUBSET_LIMIT: usize = 16;

/// Greedy exact descent over swaps (best improvement), then 3-cycles and
/// rearrangements of four cells (first improvement) of cell values. Returns the number of accepted
/// moves.
fn polish(p: &dyn DirichletProblem, omega: &mut Vec<f64>, u: &mut Vec<f64>, e: &mut f64, dir: Direction) -> Result<usize, RearrangeError> {
    let n = omega.len();
    let gain = |t: f64, e: f64| match dir {
        Direction::Min => e - t,
        Direction::Max => t - e,
    };
    let eval = |w: &[f64]| -> Result<(f64, Vec<f64>), RearrangeError> {
        let u = p.solve(w)?;
        Ok((p.energy(w, &u), u))
    };
    let mut moves = 0;
    loop {
        let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        for i in 0..n {
            for j in i + 1..n {
                if omega[i] == omega[j] {
                    continue;
                }
                let mut w = omega.clone();
                w.swap(i, j);
                let (t, tu) = eval(&w)?;
                if gain(t, *e) > 0.0 && best.as_ref().is_none_or(|b| gain(t, b.0) > 0.0) {
                    best = Some((t, w, tu));
                }
            }
        }
        if best.is_none() {
            'search: for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if i == j || j == k || i == k || omega[i] == omega[j] || omega[j] == omega[k] || omega[i] == omega[k] {
                            continue;
                        }
                        let mut w = omega.clone();
                        w[i] = omega[j];
                        w[j] = omega[k];
                        w[k] = omega[i];
                        let (t, tu) = eval(&w)?;
                        if gain(t, *e) > 0.0 {
                            best = Some((t, w, tu));
                            break 'search;
                        }
                    }
                }
            }
        }
        if best.is_none() && n <= SUBSET_LIMIT {
            // Every rearrangement of the values on any four cells.
            'subsets: for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        for l in k + 1..n {
                            let idx = [i, j, k, l];
                            let vals = idx.map(|c| omega[c]);
                            let mut perm = [0.0, 1.0, 2.0, 3.0];
                            while next_permutation(&mut perm) {
                                let mut w = omega.clone();
                                for (c, &q) in idx.iter().zip(&perm) {
                                    w[*c] = vals[q as usize];
                                }
                                if w == *omega {
                                    continue;
                                }
                                let (t, tu) = eval(&w)?;
                                if gain(t, *e) > 0.0 {
                                    best = Some((t, w, tu));
                                    break 'subsets;
                                }
                            }
                        }
                    }
                }
            }
        }
        match best {
            Some((t, w, tu)) => {
                *e = t;
                *omega = w;
                *u = tu;
                moves += 1;
            }
            None => return Ok(moves),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteMinimum {
    pub omega: Vec<f64>,
    pub u: Vec<f64>,
    /// Energy before the first transplant, then after each iteration.
    pub energy: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Cycles of the position permutation taking `from` to `to`, when `to`
/// is a permutation of `from`.
fn cycles(from: &[f64], to: &[f64]) -> Option<Vec<Vec<(usize, usize)>>> {
    let n = from.len();
    let diff: Vec<usize> = (0..n).filter(|&i| from[i] != to[i]).collect();
    // sigma(i) = j with to[i] = from[j], matching equal values in index order.
    let mut src: Vec<usize> = diff.clone();
    src.sort_by(|&a, &b| from[a].total_cmp(&from[b]).then(a.cmp(&b)));
    let mut dst: Vec<usize> = diff.clone();
    dst.sort_by(|&a, &b| to[a].total_cmp(&to[b]).then(a.cmp(&b)));
    let mut sigma = vec![usize::MAX; n];
    for (&i, &j) in dst.iter().zip(&src) {
        if to[i] != from[j] {
            return None;
        }
        sigma[i] = j;
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for &start in &diff {
        if seen[start] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            cyc.push((i, sigma[i]));
            i = sigma[i];
        }
        out.push(cyc);
    }
    Some(out)
}

/// Transplant iteration: `omega <- T(h, u)`, `u <- solve(omega)`.
///
/// A step that would raise the energy (lower it, for `Max`) is replaced
/// by the individual cycles of its permutation that do improve it; when
/// none does, the iteration stops. Small equal-area problems are then
/// polished by exact local moves; see [`MinimizeOptions::polish`].
pub fn minimize_discrete(
    p: &dyn DirichletProblem,
    h: &[f64],
    opts: &MinimizeOptions,
) -> Result<DiscreteMinimum, RearrangeError> {
    let areas = p.areas();
    if areas.len() != h.len() {
        return Err(RearrangeError::InvalidProfile(format!("{} cells but {} values", areas.len(), h.len())));
    }
    let dir = opts.direction;
    let better = |new: f64, old: f64| match dir {
        Direction::Min => new <= old,
        Direction::Max => new >= old,
    };
    let mut omega = h.to_vec();
    let mut u = p.solve(&omega)?;
    let mut e = p.energy(&omega, &u);
    let mut energy = vec![e];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let cand = transplant_values(h, &u, &areas, dir);
        if cand == omega {
            converged = true;
            break;
        }
        let cu = p.solve(&cand)?;
        let ce = p.energy(&cand, &cu);
        if better(ce, e) {
            let prev = e;
            omega = cand;
            u = cu;
            e = ce;
            energy.push(e);
            if (e - prev).abs() < opts.tol * e.abs() {
                converged = true;
                break;
            }
            continue;
        }
        let Some(cs) = cycles(&omega, &cand) else { break };
        let mut moved = false;
        for cyc in cs {
            let mut trial = omega.clone();
            for &(i, j) in &cyc {
                trial[i] = omega[j];
            }
            let tu = p.solve(&trial)?;
            let te = p.energy(&trial, &tu);
            if better(te, e) && te != e {
                omega = trial;
                u = tu;
                e = te;
                moved = true;
            }
        }
        if !moved {
            converged = true;
            break;
        }
        energy.push(e);
    }
    let equal = areas.iter().all(|&a| a == areas[0]);
    if opts.polish && equal && h.len() <= POLISH_LIMIT && polish(p, &mut omega, &mut u, &mut e, dir)? > 0 {
        energy.push(e);
    }
    Ok(DiscreteMinimum { omega, u, energy, iterations, converged })
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub omega: ScalarField,
    pub u: ScalarField,
    /// `f*` with `omega* = f*(u*)`; only for the minimizing direction.
    pub profile: Option<MonotoneProfile>,
    pub energy: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub direction: Direction,
}

/// Energy extremization over rearrangements of `h` on its grid.
pub fn minimize_energy(
    h: &ScalarField,
    bc: &BoundaryData,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult, RearrangeError> {
    let grid = h.grid();
    let p = PolarProblem::new(grid, bc)?;
    let d = minimize_discrete(&p, h.values(), opts)?;
    let omega = ScalarField::from_raw(grid.clone(), d.omega);
    let u = ScalarField::from_raw(grid.clone(), d.u);
    let profile = match opts.direction {
        Direction::Min => Some(recover_profile(&omega, &u)?),
        Direction::Max => None,
    };
    Ok(MinimizeResult {
        omega,
        u,
        profile,
        energy: d.energy,
        iterations: d.iterations,
        converged: d.converged,
        direction: opts.direction,
    })
}

fn next_permutation(v: &mut [f64]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Exact minimum energy over all distinct assignments of `h`'s values to
/// the cells of `p`. Ties keep the lexicographically first assignment.
pub fn brute_force_min_energy(p: &dyn DirichletProblem, h: &[f64]) -> Result<(f64, Vec<f64>), RearrangeError> {
    if h.len() > BRUTE_FORCE_LIMIT {
        return Err(RearrangeError::TooLarge(h.len()));
    }
    let mut v = h.to_vec();
    v.sort_by(f64::total_cmp);
    let mut best = (f64::INFINITY, v.clone());
    loop {
        let u = p.solve(&v)?;
        let e = p.energy(&v, &u);
        if e < best.0 {
            best = (e, v.clone());
        }
        if !next_permutation(&mut v) {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_energy_identity() {
        let p = GraphProblem::annulus_row(1.0, 2.0, 6).unwrap();
        let w = [-6.0, -5.0, -4.0, -3.0, -2.0, -1.0];
        let u = p.solve(&w).unwrap();
        let direct: f64 = -0.5 * p.areas()[0] * u.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        assert!((p.energy(&w, &u) / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn six_cell_ring_matches_oracle() {
        let p = GraphProblem::annulus_row(1.0, 2.0, 6).unwrap();
        let h = [-6.0, -5.0, -4.0, -3.0, -2.0, -1.0];
        let m = minimize_discrete(&p, &h, &MinimizeOptions::default()).unwrap();
        let (best, _) = brute_force_min_energy(&p, &h).unwrap();
        assert!((m.energy.last().unwrap() - best).abs() < 1e-10, "{:?} vs {best}", m.energy);
        assert!(m.energy.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let mut a = m.omega.clone();
        a.sort_by(f64::total_cmp);
        assert_eq!(a, h.to_vec());
    }

    #[test]
    fn coarse_disk_shells_match_oracle() {
        let p = GraphProblem::disk_shells(1.0, 8).unwrap();
        let h: Vec<f64> = (0..8).map(|k| -(2.0 - GraphProblem::shell_radius(1.0, 8, k).powi(2))).collect();
        let m = minimize_discrete(&p, &h, &MinimizeOptions::default()).unwrap();
        let (best, _) = brute_force_min_energy(&p, &h).unwrap();
        assert!((m.energy.last().unwrap() - best).abs() < 1e-10, "{:?} vs {best}", m.energy);
        assert!(m.energy.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn brute_force_edges() {
        let p = GraphProblem::ring(1, 0.0, 1.0, 1.0).unwrap();
        let (e, a) = brute_force_min_energy(&p, &[2.0]).unwrap();
        assert_eq!(a, vec![2.0]);
        assert!((e - 2.0).abs() < 1e-14);
        let p = GraphProblem::annulus_row(1.0, 2.0, 5).unwrap();
        let (e, _) = brute_force_min_energy(&p, &[-1.0; 5]).unwrap();
        let u = p.solve(&[-1.0; 5]).unwrap();
        assert_eq!(e, p.energy(&[-1.0; 5], &u));
        let big = GraphProblem::annulus_row(1.0, 2.0, 11).unwrap();
        assert!(matches!(brute_force_min_energy(&big, &[0.0; 11]), Err(RearrangeError::TooLarge(11))));
    }

    #[test]
    fn constant_h_one_iteration() {
        let g = Grid::disk(1.0, 16, 32).unwrap();
        let h = ScalarField::constant(&g, -1.0);
        let r = minimize_energy(&h, &BoundaryData::disk(0.0), &MinimizeOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert_eq!(r.omega, h);
    }
}
