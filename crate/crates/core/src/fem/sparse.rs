//! Compressed sparse row storage and a banded direct solver.
//!
//! The solver reorders unknowns with reverse Cuthill–McKee, stores the
//! permuted matrix in a dense band and factors it without pivoting. Every
//! operator assembled here has a positive definite symmetric part (the
//! convection terms are skew), for which unpivoted elimination is stable.

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries. Columns within each row end up sorted.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols);
        DVector::from_iterator(
            self.nrows,
            (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()),
        )
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v)).collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|`
    pub fn asymmetry(&self) -> f64 {
        self.skew_deviation(-1.0)
    }

    /// `max |A + A^T|`
    pub fn symmetric_part_max(&self) -> f64 {
        self.skew_deviation(1.0)
    }

    fn skew_deviation(&self, sign: f64) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v + sign * self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Restricts rows and columns to the entries of `keep` (old index →
    /// new index, `None` drops it).
    pub fn restrict(&self, keep: &[Option<usize>], new_dim: usize) -> Self {
        let triplets = self
            .triplets()
            .filter_map(|(r, c, v)| Some((keep[r]?, keep[c]?, v)))
            .collect();
        Self::from_triplets(new_dim, new_dim, triplets)
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized sparsity graph.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(pattern: &CsrMatrix) -> Vec<usize> {
    let n = pattern.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, _) in pattern.triplets() {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree = |i: usize| adj[i].len();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree(i), i)).unwrap();
        let start = pseudo_peripheral(&adj, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree(w), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize) -> usize {
    let mut start = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(adj, start);
        let depth = *levels.iter().flatten().max().unwrap();
        if depth <= ecc {
            break;
        }
        ecc = depth;
        start = (0..adj.len())
            .filter(|&i| levels[i] == Some(depth))
            .min_by_key(|&i| (adj[i].len(), i))
            .unwrap();
    }
    start
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let l = level[v].unwrap();
        for &w in &adj[v] {
            if level[w].is_none() {
                level[w] = Some(l + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

/// Fill-reducing ordering shared by all operators on one mesh.
#[derive(Debug, Clone)]
pub struct BandLayout {
    perm: Vec<usize>,
    inv: Vec<usize>,
    half_bandwidth: usize,
}

impl BandLayout {
    pub fn from_pattern(pattern: &CsrMatrix) -> Self {
        let perm = reverse_cuthill_mckee(pattern);
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let half_bandwidth = pattern
            .triplets()
            .map(|(r, c, _)| inv[r].abs_diff(inv[c]))
            .max()
            .unwrap_or(0);
        Self {
            perm,
            inv,
            half_bandwidth,
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    /// Band storage of `sum_q weights[q] * terms[q]`.
    pub fn combine(&self, terms: &[&CsrMatrix], weights: &[f64]) -> BandMatrix {
        let mut band = BandMatrix::zeros(self.dim(), self.half_bandwidth);
        for (m, &w) in terms.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for (r, c, v) in m.triplets() {
                *band.entry_mut(self.inv[r], self.inv[c]) += w * v;
            }
        }
        band
    }
}

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    // row-major, row i holds columns i-bw ..= i+bw
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    fn entry_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        debug_assert!(r.abs_diff(c) <= self.bw);
        let w = 2 * self.bw + 1;
        &mut self.data[r * w + (c + self.bw - r)]
    }

    fn entry(&self, r: usize, c: usize) -> f64 {
        let w = 2 * self.bw + 1;
        self.data[r * w + (c + self.bw - r)]
    }

    /// In-place LU factorization without pivoting.
    fn factor(mut self) -> Result<Self> {
        let (n, bw) = (self.n, self.bw);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let pivot = self.entry(k, k);
            if pivot.abs() <= 1e-14 * scale || !pivot.is_finite() {
                return Err(Error::SingularPivot(k));
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let l = self.entry(i, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                *self.entry_mut(i, k) = l;
                for j in k + 1..=last {
                    let u = self.entry(k, j);
                    *self.entry_mut(i, j) -= l * u;
                }
            }
        }
        Ok(self)
    }

    fn lu_solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let mut s = b[i];
            for j in first..i {
                s -= self.entry(i, j) * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let last = (i + bw).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=last {
                s -= self.entry(i, j) * b[j];
            }
            b[i] = s / self.entry(i, i);
        }
    }
}

/// Factored operator `A = sum_q w_q A_q`, ready for repeated solves.
#[derive(Debug, Clone)]
pub struct Factorization {
    layout: BandLayout,
    lu: BandMatrix,
    matrix: CsrMatrix,
}

/// Relative residual every solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

impl Factorization {
    pub fn new(layout: &BandLayout, terms: &[&CsrMatrix], weights: &[f64]) -> Result<Self> {
        let lu = layout.combine(terms, weights).factor()?;
        let triplets = terms
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w != 0.0)
            .flat_map(|(m, &w)| m.triplets().map(move |(r, c, v)| (r, c, w * v)))
            .collect();
        let matrix = CsrMatrix::from_triplets(layout.dim(), layout.dim(), triplets);
        Ok(Self {
            layout: layout.clone(),
            lu,
            matrix,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn apply_inverse(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut b: Vec<f64> = self.layout.perm.iter().map(|&old| rhs[old]).collect();
        self.lu.lu_solve(&mut b);
        let mut x = DVector::zeros(rhs.len());
        for (new, &old) in self.layout.perm.iter().enumerate() {
            x[old] = b[new];
        }
        x
    }

    /// Solves `A x = rhs` with up to three steps of iterative refinement and
    /// fails if the relative residual stays above [`SOLVE_TOLERANCE`].
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let rhs_norm = rhs.norm();
        if rhs_norm == 0.0 {
            return Ok(DVector::zeros(rhs.len()));
        }
        let mut x = self.apply_inverse(rhs);
        for _ in 0..3 {
            let r = rhs - self.matrix.mul_vec(&x);
            let rel = r.norm() / rhs_norm;
            if !rel.is_finite() {
                return Err(Error::SolveFailed(rel));
            }
            if rel <= SOLVE_TOLERANCE * 1e-2 {
                return Ok(x);
            }
            x += self.apply_inverse(&r);
        }
        let rel = (rhs - self.matrix.mul_vec(&x)).norm() / rhs_norm;
        if rel <= SOLVE_TOLERANCE {
            Ok(x)
        } else {
            Err(Error::SolveFailed(rel))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn triplets_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn rcm_is_a_permutation() {
        let m = laplacian_1d(17);
        let mut p = reverse_cuthill_mckee(&m);
        p.sort_unstable();
        assert_eq!(p, (0..17).collect::<Vec<_>>());
        assert_eq!(BandLayout::from_pattern(&m).half_bandwidth(), 1);
    }

    #[test]
    fn solve_matches_dense() {
        let n = 12;
        let a = laplacian_1d(n);
        // add a skew part
        let skew = CsrMatrix::from_triplets(
            n,
            n,
            (0..n - 1).flat_map(|i| [(i, i + 1, 0.7), (i + 1, i, -0.7)]).collect(),
        );
        let layout = BandLayout::from_pattern(&a);
        let f = Factorization::new(&layout, &[&a, &skew], &[1.0, 3.0]).unwrap();
        let rhs = DVector::from_fn(n, |i, _| (i as f64).sin() + 1.0);
        let x = f.solve(&rhs).unwrap();
        let dense: DMatrix<f64> = a.to_dense() + skew.to_dense() * 3.0;
        let expected = dense.lu().solve(&rhs).unwrap();
        assert!((x - expected).norm() < 1e-12);
        assert_eq!(f.solve(&DVector::zeros(n)).unwrap(), DVector::zeros(n));
    }

    #[test]
    fn singular_is_reported() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        let layout = BandLayout::from_pattern(&a);
        assert!(matches!(
            Factorization::new(&layout, &[&a], &[1.0]),
            Err(Error::SingularPivot(_))
        ));
    }
}
