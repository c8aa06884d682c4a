//! Exact linear algebra over the rationals.
//!
//! Two styles are provided: a dense [`Mat`] type used by the
//! finite-dimensional obstruction tower (dimensions are small there), and a
//! sparse Gauss–Jordan solver [`SparseSystem`] used by the model layer to
//! decompose elements against a cohomology basis plus a `Q`-image, where the
//! ambient monomial slices can run to thousands of dimensions but every
//! column has only a handful of entries.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Zero};

use crate::scalar::Rat;

/// A dense matrix over `ℚ`, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    a: Vec<Rat>,
}

impl Mat {
    /// The `rows × cols` zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            a: vec![Rat::zero(); rows * cols],
        }
    }

    /// The `n × n` identity.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rat::one());
        }
        m
    }

    /// Builds from rows; all rows must have equal length.
    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat {
            rows: r,
            cols: c,
            a: rows.into_iter().flatten().collect(),
        }
    }

    /// Builds a single-column matrix from a vector.
    pub fn col_vec(v: Vec<Rat>) -> Self {
        let rows = v.len();
        Mat {
            rows,
            cols: 1,
            a: v,
        }
    }

    /// Number of rows.
    pub fn nrows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.a[i * self.cols + j]
    }

    /// Sets entry `(i, j)`.
    pub fn set(&mut self, i: usize, j: usize, v: Rat) {
        self.a[i * self.cols + j] = v;
    }

    /// Column `j` as a vector.
    pub fn col(&self, j: usize) -> Vec<Rat> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    /// True when all entries are zero.
    pub fn is_zero(&self) -> bool {
        self.a.iter().all(Zero::is_zero)
    }

    /// Matrix sum.
    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            a: self
                .a
                .iter()
                .zip(other.a.iter())
                .map(|(x, y)| x + y)
                .collect(),
        }
    }

    /// Matrix difference.
    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            a: self
                .a
                .iter()
                .zip(other.a.iter())
                .map(|(x, y)| x - y)
                .collect(),
        }
    }

    /// Negation.
    pub fn neg(&self) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            a: self.a.iter().map(|x| -x).collect(),
        }
    }

    /// Scalar multiple.
    pub fn scale(&self, r: &Rat) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            a: self.a.iter().map(|x| x * r).collect(),
        }
    }

    /// Matrix product.
    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let v = out.get(i, j) + &(aik * b);
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }

    /// Glues columns: `[self | other]`.
    pub fn hstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        let mut out = Mat::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j).clone());
            }
        }
        out
    }

    /// Transpose.
    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    /// Copy of the contiguous row block `start..start + len`.
    pub fn row_block(&self, start: usize, len: usize) -> Mat {
        assert!(start + len <= self.rows, "row block out of range");
        let mut out = Mat::zeros(len, self.cols);
        for i in 0..len {
            for j in 0..self.cols {
                out.set(i, j, self.get(start + i, j).clone());
            }
        }
        out
    }

    /// Glues rows: `[self; other]`.
    pub fn vstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "column mismatch in vstack");
        let mut out = Mat::zeros(self.rows + other.rows, self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.set(i, j, self.get(i, j).clone());
            }
            for i in 0..other.rows {
                out.set(self.rows + i, j, other.get(i, j).clone());
            }
        }
        out
    }

    /// Selects columns by index.
    pub fn select_cols(&self, idx: &[usize]) -> Mat {
        let mut out = Mat::zeros(self.rows, idx.len());
        for (jj, &j) in idx.iter().enumerate() {
            for i in 0..self.rows {
                out.set(i, jj, self.get(i, j).clone());
            }
        }
        out
    }

    /// Reduced row echelon form; returns the reduced matrix and the pivot
    /// column of each pivot row.
    pub fn rref(&self) -> (Mat, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&i| !m.get(i, col).is_zero()) else {
                continue;
            };
            if p != row {
                for j in 0..m.cols {
                    m.a.swap(row * m.cols + j, p * m.cols + j);
                }
            }
            let inv = {
                let piv = m.get(row, col).clone();
                Rat::one() / piv
            };
            for j in col..m.cols {
                let v = m.get(row, j) * &inv;
                m.set(row, j, v);
            }
            for i in 0..m.rows {
                if i == row || m.get(i, col).is_zero() {
                    continue;
                }
                let f = m.get(i, col).clone();
                for j in col..m.cols {
                    let v = m.get(i, j) - &(&f * m.get(row, j));
                    m.set(i, j, v);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    /// Rank.
    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Any solution `x` of `self · x = b` (columns of `b` solved
    /// independently), or `None` when inconsistent.
    pub fn solve(&self, b: &Mat) -> Option<Mat> {
        assert_eq!(self.rows, b.rows, "dimension mismatch in solve");
        let (r, pivots) = self.hstack(b).rref();
        // Inconsistent iff some pivot lies in the appended block.
        if pivots.iter().any(|&c| c >= self.cols) {
            return None;
        }
        let mut x = Mat::zeros(self.cols, b.cols);
        for (prow, &pcol) in pivots.iter().enumerate() {
            for j in 0..b.cols {
                x.set(pcol, j, r.get(prow, self.cols + j).clone());
            }
        }
        Some(x)
    }

    /// A basis for the kernel, as matrix columns (possibly zero columns → `ncols = 0`).
    pub fn kernel(&self) -> Mat {
        let (r, pivots) = self.rref();
        let pivot_set: BTreeSet<usize> = pivots.iter().copied().collect();
        let free: Vec<usize> = (0..self.cols).filter(|j| !pivot_set.contains(j)).collect();
        let mut out = Mat::zeros(self.cols, free.len());
        for (k, &fj) in free.iter().enumerate() {
            out.set(fj, k, Rat::one());
            for (prow, &pcol) in pivots.iter().enumerate() {
                out.set(pcol, k, -r.get(prow, fj));
            }
        }
        out
    }

    /// Inverse of a square matrix, or `None` when singular.
    pub fn inverse(&self) -> Option<Mat> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        let n = self.rows;
        let (r, pivots) = self.hstack(&Mat::identity(n)).rref();
        if pivots.len() < n || pivots.iter().take(n).enumerate().any(|(i, &c)| c != i) {
            return None;
        }
        let mut out = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, r.get(i, n + j).clone());
            }
        }
        Some(out)
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{} ", crate::scalar::rat_to_string(self.get(i, j)))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Incremental independence tracker: maintains a reduced row basis of the
/// vectors accepted so far and rejects anything inside their span. Used to
/// extend partial bases to full ones deterministically.
pub struct IndepTracker {
    dim: usize,
    /// Reduced rows together with their leading-entry column.
    rows: Vec<(usize, Vec<Rat>)>,
}

impl IndepTracker {
    /// Empty tracker in ambient dimension `dim`.
    pub fn new(dim: usize) -> Self {
        IndepTracker {
            dim,
            rows: Vec::new(),
        }
    }

    /// Number of accepted vectors.
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Attempts to add `v`; returns `true` when it enlarged the span.
    ///
    /// Stored rows are kept mutually reduced (each row vanishes at every
    /// other row's leading column), so a single reduction pass decides
    /// membership.
    pub fn try_add(&mut self, v: &[Rat]) -> bool {
        assert_eq!(v.len(), self.dim);
        let mut w = v.to_vec();
        for (lead, row) in &self.rows {
            if !w[*lead].is_zero() {
                let f = w[*lead].clone();
                for j in 0..self.dim {
                    let val = &w[j] - &(&f * &row[j]);
                    w[j] = val;
                }
            }
        }
        let Some(lead) = w.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = Rat::one() / w[lead].clone();
        for x in w.iter_mut() {
            *x = &*x * &inv;
        }
        for (_, row) in self.rows.iter_mut() {
            if !row[lead].is_zero() {
                let f = row[lead].clone();
                for j in 0..self.dim {
                    let val = &row[j] - &(&f * &w[j]);
                    row[j] = val;
                }
            }
        }
        self.rows.push((lead, w));
        true
    }

    /// True when `v` lies in the current span.
    pub fn contains(&self, v: &[Rat]) -> bool {
        let mut w = v.to_vec();
        for (lead, row) in &self.rows {
            if !w[*lead].is_zero() {
                let f = w[*lead].clone();
                for j in 0..self.dim {
                    let val = &w[j] - &(&f * &row[j]);
                    w[j] = val;
                }
            }
        }
        w.iter().all(Zero::is_zero)
    }
}

/// A sparse linear system `A x = b` over `ℚ`, solved by Gauss–Jordan
/// elimination with sparsity-guided pivoting.
pub struct SparseSystem {
    ncols: usize,
    rows: Vec<BTreeMap<usize, Rat>>,
    rhs: Vec<Rat>,
}

impl SparseSystem {
    /// New system with `ncols` unknowns and no equations.
    pub fn new(ncols: usize) -> Self {
        SparseSystem {
            ncols,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    /// Number of unknowns.
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Number of equations.
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// Adds one equation `Σ coeff · x_col = rhs`; duplicate columns merge.
    pub fn add_row(&mut self, entries: impl IntoIterator<Item = (usize, Rat)>, rhs: Rat) {
        let mut row = BTreeMap::new();
        for (c, v) in entries {
            assert!(c < self.ncols, "column index out of range");
            if v.is_zero() {
                continue;
            }
            match row.entry(c) {
                alloc::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(v);
                }
                alloc::collections::btree_map::Entry::Occupied(mut e) => {
                    *e.get_mut() += v;
                    if e.get().is_zero() {
                        e.remove();
                    }
                }
            }
        }
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    /// Solves the system. Returns any solution as a sparse column map
    /// (unlisted unknowns are zero), or `None` when inconsistent.
    pub fn solve(mut self) -> Option<BTreeMap<usize, Rat>> {
        let nrows = self.rows.len();
        // Column occupancy index for pivot selection.
        let mut col_rows: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &c in row.keys() {
                col_rows.entry(c).or_default().insert(i);
            }
        }
        let mut pivoted: Vec<Option<usize>> = vec![None; nrows]; // row -> pivot col
        let mut pivot_of_col: BTreeMap<usize, usize> = BTreeMap::new();

        loop {
            // Cheapest unpivoted nonempty row.
            let Some(r) = (0..nrows)
                .filter(|&i| pivoted[i].is_none() && !self.rows[i].is_empty())
                .min_by_key(|&i| self.rows[i].len())
            else {
                break;
            };
            // Pivot on its least-occupied column.
            let c = *self.rows[r]
                .keys()
                .min_by_key(|c| col_rows.get(c).map_or(0, BTreeSet::len))
                .expect("nonempty row");
            let inv = Rat::one() / self.rows[r][&c].clone();
            let pr: Vec<(usize, Rat)> = self.rows[r]
                .iter()
                .map(|(j, v)| (*j, v * &inv))
                .collect();
            self.rows[r] = pr.iter().cloned().collect();
            self.rhs[r] = &self.rhs[r] * &inv;

            let victims: Vec<usize> = col_rows
                .get(&c)
                .map(|s| s.iter().copied().filter(|&i| i != r).collect())
                .unwrap_or_default();
            for i in victims {
                let f = self.rows[i][&c].clone();
                for (j, v) in &pr {
                    let delta = &f * v;
                    let entry = self.rows[i].entry(*j).or_insert_with(Rat::zero);
                    *entry -= delta;
                    let now_zero = entry.is_zero();
                    if now_zero {
                        self.rows[i].remove(j);
                        if let Some(s) = col_rows.get_mut(j) {
                            s.remove(&i);
                        }
                    } else if *j != c {
                        col_rows.entry(*j).or_default().insert(i);
                    }
                }
                let delta = &f * &self.rhs[r];
                self.rhs[i] = &self.rhs[i] - &delta;
            }
            pivoted[r] = Some(c);
            pivot_of_col.insert(c, r);
        }

        // Consistency: empty rows must have zero right-hand side.
        for (i, row) in self.rows.iter().enumerate() {
            if pivoted[i].is_none() && row.is_empty() && !self.rhs[i].is_zero() {
                return None;
            }
        }
        // Free unknowns are zero; pivot unknowns read off the rhs.
        let mut x = BTreeMap::new();
        for (c, r) in pivot_of_col {
            if !self.rhs[r].is_zero() {
                x.insert(c, self.rhs[r].clone());
            }
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};

    fn m2(rows: [[i64; 2]; 2]) -> Mat {
        Mat::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| rat_int(x)).collect())
                .collect(),
        )
    }

    #[test]
    fn product_and_inverse() {
        let a = m2([[2, 1], [1, 1]]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv), Mat::identity(2));
        assert_eq!(inv.get(0, 0), &rat_int(1));
        assert_eq!(inv.get(0, 1), &rat_int(-1));
        let singular = m2([[1, 2], [2, 4]]);
        assert!(singular.inverse().is_none());
    }

    #[test]
    fn solve_and_kernel() {
        // x + 2y + z = 4, 2x + 4y = 6 — underdetermined.
        let a = Mat::from_rows(vec![
            vec![rat_int(1), rat_int(2), rat_int(1)],
            vec![rat_int(2), rat_int(4), rat_int(0)],
        ]);
        let b = Mat::col_vec(vec![rat_int(4), rat_int(6)]);
        let x = a.solve(&b).unwrap();
        assert_eq!(a.mul(&x), b);
        let k = a.kernel();
        assert_eq!(k.ncols(), 1);
        assert!(a.mul(&k).is_zero());
        // Inconsistent system.
        let bad = Mat::from_rows(vec![vec![rat_int(1)], vec![rat_int(1)]]);
        let rhs = Mat::col_vec(vec![rat_int(0), rat_int(1)]);
        assert!(bad.solve(&rhs).is_none());
    }

    #[test]
    fn rref_pivots() {
        let a = Mat::from_rows(vec![
            vec![rat_int(0), rat_int(2), rat_int(4)],
            vec![rat_int(0), rat_int(1), rat_int(2)],
        ]);
        let (r, pivots) = a.rref();
        assert_eq!(pivots, vec![1]);
        assert_eq!(r.get(0, 2), &rat_int(2));
        assert_eq!(a.rank(), 1);
    }

    #[test]
    fn independence_tracker() {
        let mut t = IndepTracker::new(3);
        assert!(t.try_add(&[rat_int(1), rat_int(1), rat_int(0)]));
        assert!(t.try_add(&[rat_int(0), rat_int(1), rat_int(1)]));
        assert!(!t.try_add(&[rat_int(1), rat_int(2), rat_int(1)])); // sum of the two
        assert!(t.contains(&[rat_int(2), rat_int(3), rat_int(1)]));
        assert!(!t.contains(&[rat_int(0), rat_int(0), rat_int(1)]));
        assert_eq!(t.rank(), 2);
    }

    #[test]
    fn sparse_solver_matches_dense() {
        // Random-ish fixed 5x6 sparse system with a known solution.
        let mut sys = SparseSystem::new(6);
        sys.add_row([(0, rat_int(2)), (3, rat_int(1))], rat_int(5));
        sys.add_row([(1, rat_int(1)), (3, rat_int(-1))], rat_int(-1));
        sys.add_row([(2, rat_int(4))], rat_int(2));
        // 2x₀+x₃=5, x₁−x₃=−1, 4x₂=2 force 2x₀+x₁+4x₂ = 6.
        sys.add_row([(0, rat_int(2)), (1, rat_int(1)), (2, rat_int(4))], rat_int(6));
        sys.add_row([(4, rat_int(1)), (5, rat_int(1))], rat_int(0));
        let x = sys.solve().unwrap();
        // Verify by substitution.
        let get = |c: usize| x.get(&c).cloned().unwrap_or_else(Rat::zero);
        assert_eq!(&get(0) * &rat_int(2) + get(3), rat_int(5));
        assert_eq!(get(1) - get(3), rat_int(-1));
        assert_eq!(&get(2) * &rat_int(4), rat_int(2));
        assert_eq!(get(2), rat(1, 2));
        assert_eq!(&get(0) * &rat_int(2) + get(1) + &get(2) * &rat_int(4), rat_int(6));
        assert_eq!(get(4) + get(5), rat_int(0));
    }

    #[test]
    fn sparse_inconsistency_detected() {
        let mut sys = SparseSystem::new(2);
        sys.add_row([(0, rat_int(1)), (1, rat_int(1))], rat_int(1));
        sys.add_row([(0, rat_int(2)), (1, rat_int(2))], rat_int(3));
        assert!(sys.solve().is_none());
    }

    #[test]
    fn sparse_duplicate_columns_merge() {
        let mut sys = SparseSystem::new(1);
        sys.add_row([(0, rat_int(1)), (0, rat_int(1))], rat_int(4));
        let x = sys.solve().unwrap();
        assert_eq!(x[&0], rat_int(2));
    }
}
