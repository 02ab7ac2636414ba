//! Exact integer linear algebra.
//!
//! Everything here runs over arbitrary-precision integers: Smith normal form
//! entries can blow up even on small inputs, and the homology computations
//! downstream need exact cokernel structure, not numerical rank.
//!
//! Determinism: the Smith normal form pivot is the smallest nonzero absolute
//! value, ties broken by lexicographic position, so transforms and derived
//! bases are reproducible across runs.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Dense matrix of exact integers, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zero(rows: usize, cols: usize) -> IntMatrix {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> IntMatrix {
        let mut m = IntMatrix::zero(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> IntMatrix {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = IntMatrix::zero(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, v.clone().into());
            }
        }
        m
    }

    /// Builds a matrix whose `j`-th column is `cols[j]`; `rows` fixes the
    /// height even when there are no columns.
    pub fn from_columns<T: Into<BigInt> + Clone>(rows: usize, cols: &[Vec<T>]) -> IntMatrix {
        let mut m = IntMatrix::zero(rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), rows, "column height mismatch");
            for (i, v) in col.iter().enumerate() {
                m.set(i, j, v.clone().into());
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<BigInt> {
        (0..self.cols).map(|j| self.get(i, j).clone()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut m = IntMatrix::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(j, i, self.get(i, j).clone());
            }
        }
        m
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut m = IntMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = m.get(i, j) + a * other.get(k, j);
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    /// `self − I` (square only).
    pub fn minus_identity(&self) -> IntMatrix {
        assert_eq!(self.rows, self.cols, "minus_identity needs a square matrix");
        let mut m = self.clone();
        for i in 0..self.rows {
            let v = m.get(i, i) - BigInt::one();
            m.set(i, i, v);
        }
        m
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && *self == IntMatrix::identity(self.rows)
    }

    /// Horizontal concatenation; all blocks must share the row count.
    pub fn hstack(blocks: &[&IntMatrix]) -> IntMatrix {
        let rows = blocks.first().map_or(0, |b| b.rows);
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut m = IntMatrix::zero(rows, cols);
        let mut off = 0;
        for b in blocks {
            assert_eq!(b.rows, rows, "row count mismatch in hstack");
            for i in 0..rows {
                for j in 0..b.cols {
                    m.set(i, off + j, b.get(i, j).clone());
                }
            }
            off += b.cols;
        }
        m
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row a += q * row b
    fn add_row(&mut self, a: usize, b: usize, q: &BigInt) {
        for j in 0..self.cols {
            let v = self.get(a, j) + q * self.get(b, j);
            self.set(a, j, v);
        }
    }

    /// col a += q * col b
    fn add_col(&mut self, a: usize, b: usize, q: &BigInt) {
        for i in 0..self.rows {
            let v = self.get(i, a) + q * self.get(i, b);
            self.set(i, a, v);
        }
    }

    fn negate_row(&mut self, a: usize) {
        for j in 0..self.cols {
            let v = -self.get(a, j);
            self.set(a, j, v);
        }
    }

    /// Smith normal form `U · A · V = D` with `U`, `V` unimodular and `D`
    /// diagonal, nonnegative, each entry dividing the next.
    pub fn snf(&self) -> Snf {
        let mut d = self.clone();
        let mut u = IntMatrix::identity(self.rows);
        let mut v = IntMatrix::identity(self.cols);
        let limit = self.rows.min(self.cols);

        for k in 0..limit {
            'pivot: loop {
                // Smallest nonzero absolute value, first position wins ties.
                let mut pivot: Option<(usize, usize)> = None;
                for i in k..d.rows {
                    for j in k..d.cols {
                        if d.get(i, j).is_zero() {
                            continue;
                        }
                        let better = match pivot {
                            None => true,
                            Some((pi, pj)) => d.get(i, j).abs() < d.get(pi, pj).abs(),
                        };
                        if better {
                            pivot = Some((i, j));
                        }
                    }
                }
                let Some((pi, pj)) = pivot else {
                    let snf = finish_snf(u, d, v, k);
                    debug_assert!(snf.verify(self), "smith normal form postcondition");
                    return snf;
                };
                d.swap_rows(k, pi);
                u.swap_rows(k, pi);
                d.swap_cols(k, pj);
                v.swap_cols(k, pj);

                let mut dirty = false;
                for i in k + 1..d.rows {
                    if !d.get(i, k).is_zero() {
                        let q = -(d.get(i, k) / d.get(k, k));
                        d.add_row(i, k, &q);
                        u.add_row(i, k, &q);
                        if !d.get(i, k).is_zero() {
                            dirty = true;
                        }
                    }
                }
                for j in k + 1..d.cols {
                    if !d.get(k, j).is_zero() {
                        let q = -(d.get(k, j) / d.get(k, k));
                        d.add_col(j, k, &q);
                        v.add_col(j, k, &q);
                        if !d.get(k, j).is_zero() {
                            dirty = true;
                        }
                    }
                }
                if dirty {
                    continue 'pivot;
                }
                // Row and column k are clear; force divisibility of the
                // remaining block by the pivot.
                let p = d.get(k, k).clone();
                for i in k + 1..d.rows {
                    for j in k + 1..d.cols {
                        if !(d.get(i, j) % &p).is_zero() {
                            d.add_row(k, i, &BigInt::one());
                            u.add_row(k, i, &BigInt::one());
                            continue 'pivot;
                        }
                    }
                }
                break;
            }
        }
        let snf = finish_snf(u, d, v, limit);
        debug_assert!(snf.verify(self), "smith normal form postcondition");
        snf
    }

    /// Rank over the rationals (count of nonzero invariant factors).
    pub fn rank(&self) -> usize {
        let snf = self.snf();
        (0..self.rows.min(self.cols)).filter(|&i| !snf.d.get(i, i).is_zero()).count()
    }

    /// Structure of `Z^rows / column-span(self)`.
    pub fn cokernel(&self) -> AbelianGroupShape {
        let snf = self.snf();
        let mut torsion = Vec::new();
        let mut rank = 0usize;
        for i in 0..self.rows.min(self.cols) {
            let d = snf.d.get(i, i);
            if d.is_zero() {
                continue;
            }
            rank += 1;
            if !d.is_one() {
                torsion.push(d.clone());
            }
        }
        AbelianGroupShape { free_rank: self.rows - rank, torsion }
    }

    /// Basis of primitive integer row vectors `v` with `v · self = 0`, in
    /// Hermite normal form (unique for the left-kernel lattice).
    pub fn left_annihilator(&self) -> Vec<Vec<BigInt>> {
        let snf = self.snf();
        let rank = (0..self.rows.min(self.cols)).filter(|&i| !snf.d.get(i, i).is_zero()).count();
        let rows: Vec<Vec<BigInt>> = (rank..self.rows).map(|i| snf.u.row(i)).collect();
        hermite_rows(rows, self.rows)
    }

    /// Does an integer solution of `self · x = target` exist?
    pub fn in_column_span(&self, target: &[BigInt]) -> bool {
        assert_eq!(target.len(), self.rows, "target length mismatch");
        let snf = self.snf();
        // U A V = D, so A x = t  ⟺  D y = U t with x = V y.
        let t = IntMatrix::from_columns(self.rows, &[target.to_vec()]);
        let w = snf.u.mul(&t);
        for i in 0..self.rows {
            let wi = w.get(i, 0);
            if i < self.rows.min(self.cols) && !snf.d.get(i, i).is_zero() {
                if !(wi % snf.d.get(i, i)).is_zero() {
                    return false;
                }
            } else if !wi.is_zero() {
                return false;
            }
        }
        true
    }

    /// Determinant by fraction-free elimination (square only).
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant needs a square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut m = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m.get(k, k).is_zero() {
                let Some(swap) = (k + 1..n).find(|&i| !m.get(i, k).is_zero()) else {
                    return BigInt::zero();
                };
                m.swap_rows(k, swap);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = m.get(k, k) * m.get(i, j) - m.get(i, k) * m.get(k, j);
                    m.set(i, j, &num / &prev);
                }
                m.set(i, k, BigInt::zero());
            }
            prev = m.get(k, k).clone();
        }
        sign * m.get(n - 1, n - 1).clone()
    }

    /// Inverse of a unimodular matrix, via the adjugate.
    pub fn inverse_unimodular(&self) -> Option<IntMatrix> {
        assert_eq!(self.rows, self.cols);
        let det = self.determinant();
        if !det.abs().is_one() {
            return None;
        }
        let n = self.rows;
        let mut adj = IntMatrix::zero(n, n);
        for i in 0..n {
            for j in 0..n {
                let minor = self.minor(i, j).determinant();
                let sign = if (i + j) % 2 == 0 { BigInt::one() } else { -BigInt::one() };
                adj.set(j, i, sign * minor / &det);
            }
        }
        Some(adj)
    }

    fn minor(&self, skip_row: usize, skip_col: usize) -> IntMatrix {
        let mut m = IntMatrix::zero(self.rows - 1, self.cols - 1);
        let mut r = 0;
        for i in 0..self.rows {
            if i == skip_row {
                continue;
            }
            let mut c = 0;
            for j in 0..self.cols {
                if j == skip_col {
                    continue;
                }
                m.set(r, c, self.get(i, j).clone());
                c += 1;
            }
            r += 1;
        }
        m
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
        }
        write!(f, "]")
    }
}

/// Smith normal form decomposition `U · A · V = D`.
#[derive(Clone, Debug)]
pub struct Snf {
    pub u: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
}

fn finish_snf(mut u: IntMatrix, mut d: IntMatrix, v: IntMatrix, processed: usize) -> Snf {
    for i in 0..processed.min(d.rows).min(d.cols) {
        if d.get(i, i).is_negative() {
            d.negate_row(i);
            u.negate_row(i);
        }
    }
    Snf { u, d, v }
}

impl Snf {
    /// Literal postcondition: `U·A·V = D`, unimodular transforms, diagonal
    /// nonnegative divisibility chain. Cheap at the scales this crate
    /// handles; called from tests and debug builds.
    pub fn verify(&self, a: &IntMatrix) -> bool {
        if self.u.mul(a).mul(&self.v) != self.d {
            return false;
        }
        if !self.u.determinant().abs().is_one() || !self.v.determinant().abs().is_one() {
            return false;
        }
        let limit = self.d.rows.min(self.d.cols);
        let mut prev: Option<BigInt> = None;
        for i in 0..limit {
            let cur = self.d.get(i, i).clone();
            if cur.is_negative() {
                return false;
            }
            if let Some(p) = &prev {
                if p.is_zero() && !cur.is_zero() {
                    return false;
                }
                if !p.is_zero() && !cur.is_zero() && !(&cur % p).is_zero() {
                    return false;
                }
            }
            for j in 0..self.d.cols {
                if j != i && !self.d.get(i, j).is_zero() {
                    return false;
                }
            }
            prev = Some(cur);
        }
        for i in limit..self.d.rows {
            for j in 0..self.d.cols {
                if !self.d.get(i, j).is_zero() {
                    return false;
                }
            }
        }
        true
    }

    /// Diagonal entries.
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.d.rows.min(self.d.cols)).map(|i| self.d.get(i, i).clone()).collect()
    }
}

/// Row-style Hermite normal form of a spanning set of lattice rows:
/// pivots positive, entries above each pivot reduced into `[0, pivot)`.
/// Zero rows are dropped, so the result is a canonical basis.
fn hermite_rows(mut rows: Vec<Vec<BigInt>>, width: usize) -> Vec<Vec<BigInt>> {
    let mut pivot_row = 0usize;
    for col in 0..width {
        // Euclidean elimination within this column, below pivot_row.
        loop {
            let mut best: Option<usize> = None;
            for r in pivot_row..rows.len() {
                if rows[r][col].is_zero() {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(b) => rows[r][col].abs() < rows[b][col].abs(),
                };
                if better {
                    best = Some(r);
                }
            }
            let Some(b) = best else { break };
            rows.swap(pivot_row, b);
            if rows[pivot_row][col].is_negative() {
                for v in rows[pivot_row].iter_mut() {
                    *v = -v.clone();
                }
            }
            let mut done = true;
            for r in pivot_row + 1..rows.len() {
                if rows[r][col].is_zero() {
                    continue;
                }
                let q = rows[r][col].div_floor(&rows[pivot_row][col]);
                for j in 0..width {
                    let v = &rows[r][j] - &q * &rows[pivot_row][j];
                    rows[r][j] = v;
                }
                if !rows[r][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if pivot_row < rows.len() && !rows[pivot_row][col].is_zero() {
            // Reduce entries above the pivot.
            for r in 0..pivot_row {
                let q = rows[r][col].div_floor(&rows[pivot_row][col]);
                if q.is_zero() {
                    continue;
                }
                for j in 0..width {
                    let v = &rows[r][j] - &q * &rows[pivot_row][j];
                    rows[r][j] = v;
                }
            }
            pivot_row += 1;
        }
    }
    rows.truncate(pivot_row);
    rows
}

/// Isomorphism type of a finitely generated abelian group:
/// `Z^free_rank ⊕ Z/t₁ ⊕ … ⊕ Z/tₙ` with `tᵢ ≥ 2` and `tᵢ | tᵢ₊₁`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AbelianGroupShape {
    pub free_rank: usize,
    pub torsion: Vec<BigInt>,
}

impl AbelianGroupShape {
    pub fn free(rank: usize) -> AbelianGroupShape {
        AbelianGroupShape { free_rank: rank, torsion: Vec::new() }
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }
}

impl fmt::Display for AbelianGroupShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        for t in &self.torsion {
            parts.push(format!("Z/{t}"));
        }
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_rows(rows)
    }

    #[test]
    fn snf_of_identity_is_identity() {
        let a = IntMatrix::identity(3);
        let snf = a.snf();
        assert!(snf.verify(&a));
        assert_eq!(snf.d, a);
    }

    #[test]
    fn snf_of_diag_2_3() {
        let a = m(&[vec![2, 0], vec![0, 3]]);
        let snf = a.snf();
        assert!(snf.verify(&a));
        assert_eq!(snf.diagonal(), vec![BigInt::from(1), BigInt::from(6)]);
    }

    #[test]
    fn snf_handles_empty_shapes() {
        let a = IntMatrix::zero(3, 0);
        let snf = a.snf();
        assert!(snf.verify(&a));
        assert_eq!(a.cokernel(), AbelianGroupShape::free(3));

        let b = IntMatrix::zero(0, 2);
        assert!(b.snf().verify(&b));
        assert_eq!(b.cokernel(), AbelianGroupShape::free(0));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(IntMatrix::zero(2, 2).rank(), 0);
        assert_eq!(IntMatrix::identity(4).rank(), 4);
        // Columns (0,1,0),(1,0,1),(1,1,1),(1,2,1) span a rank-2 lattice.
        let a = IntMatrix::from_columns(
            3,
            &[vec![0, 1, 0], vec![1, 0, 1], vec![1, 1, 1], vec![1, 2, 1]],
        );
        assert_eq!(a.rank(), 2);
    }

    #[test]
    fn cokernel_examples() {
        let a = IntMatrix::from_columns(3, &[vec![0, 1, 0], vec![1, 0, 1]]);
        assert_eq!(a.cokernel(), AbelianGroupShape::free(1));

        let b = IntMatrix::from_columns(2, &[vec![2, 0]]);
        assert_eq!(b.cokernel(), AbelianGroupShape { free_rank: 1, torsion: vec![BigInt::from(2)] });

        let c = IntMatrix::zero(3, 0);
        assert_eq!(c.cokernel(), AbelianGroupShape::free(3));
    }

    #[test]
    fn left_annihilator_examples() {
        let a = IntMatrix::from_columns(
            3,
            &[vec![0, 1, 0], vec![1, 0, 1], vec![1, 1, 1], vec![1, 2, 1]],
        );
        let ann = a.left_annihilator();
        assert_eq!(ann, vec![vec![BigInt::from(1), BigInt::from(0), BigInt::from(-1)]]);

        assert!(IntMatrix::identity(3).left_annihilator().is_empty());

        let z = IntMatrix::zero(2, 2);
        assert_eq!(
            z.left_annihilator(),
            vec![vec![BigInt::from(1), BigInt::from(0)], vec![BigInt::from(0), BigInt::from(1)]]
        );
    }

    #[test]
    fn annihilator_rows_annihilate() {
        let a = m(&[vec![2, 4, 1], vec![1, 2, 0], vec![3, 6, 1]]);
        for v in a.left_annihilator() {
            for j in 0..a.cols() {
                let dot: BigInt = (0..a.rows()).map(|i| &v[i] * a.get(i, j)).sum();
                assert!(dot.is_zero());
            }
        }
        assert_eq!(a.left_annihilator().len(), a.rows() - a.rank());
    }

    #[test]
    fn column_span_membership() {
        let a = IntMatrix::from_columns(3, &[vec![0, 1, 0], vec![1, 0, 1]]);
        assert!(a.in_column_span(&[BigInt::from(1), BigInt::from(1), BigInt::from(1)]));
        assert!(!a.in_column_span(&[BigInt::from(1), BigInt::from(0), BigInt::from(0)]));
        // (0,2,0) is in the span, (0,1,0) scaled.
        assert!(a.in_column_span(&[BigInt::from(0), BigInt::from(2), BigInt::from(0)]));
    }

    #[test]
    fn determinant_and_unimodular_inverse() {
        let a = m(&[vec![1, 2], vec![0, 1]]);
        assert_eq!(a.determinant(), BigInt::one());
        let inv = a.inverse_unimodular().unwrap();
        assert!(a.mul(&inv).is_identity());

        let b = m(&[vec![2, 0], vec![0, 1]]);
        assert_eq!(b.determinant(), BigInt::from(2));
        assert!(b.inverse_unimodular().is_none());
    }

    #[test]
    fn shape_display() {
        assert_eq!(AbelianGroupShape::free(0).to_string(), "0");
        assert_eq!(AbelianGroupShape::free(1).to_string(), "Z");
        assert_eq!(AbelianGroupShape::free(5).to_string(), "Z^5");
        let s = AbelianGroupShape { free_rank: 2, torsion: vec![BigInt::from(2)] };
        assert_eq!(s.to_string(), "Z^2 + Z/2");
    }

    #[test]
    fn cokernel_invariant_under_column_tweaks() {
        let a = IntMatrix::from_columns(3, &[vec![1, 2, 3], vec![0, 4, 2]]);
        // Permute columns and add one column to the other: same cokernel.
        let b = IntMatrix::from_columns(3, &[vec![0, 4, 2], vec![1, 6, 5]]);
        assert_eq!(a.cokernel(), b.cokernel());
    }
}
