//! Dense real matrices and the small amount of linear algebra the rest of the
//! crate needs: pivoted LU determinants, cofactor adjugates and a cyclic
//! Jacobi eigensolver for symmetric matrices.
//!
//! Every matrix handled here is at most a few hundred rows (Nyström grids) and
//! usually much smaller (m×m seeds, (2m)×(2m) covariance blocks), so plain
//! row-major `Vec<f64>` storage is all that is needed.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::error::{Error, Result};

/// Tolerance used by [`symmetric_eigenvalues`] to accept a matrix as symmetric,
/// relative to `max(1, max |entry|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A dense, row-major real matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix has no entries"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain {
                row: k / cols,
                col: k % cols,
                value: data[k],
                reason: "entries must be finite",
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::Dimension(format!(
                "ragged rows: expected {c} columns, found {}",
                bad.len()
            )));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    /// Builds a matrix by evaluating `f(i, j)` at every (0-based) position.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// The n×n matrix with every entry `1/n` (the orthogonal projection onto
    /// constants).
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "empty matrix");
        Self {
            rows: n,
            cols: n,
            data: vec![1.0 / n as f64; n * n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, x) in sums.iter_mut().zip(self.row(i)) {
                *s += x;
            }
        }
        sums
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest `|m_ij - m_ji|`; `None` for non-square input.
    pub fn asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        Some(worst)
    }

    /// The matrix with row `skip_row` and column `skip_col` removed.
    pub fn minor(&self, skip_row: usize, skip_col: usize) -> Result<Self> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::Dimension(
                "minor of a matrix with a single row or column".into(),
            ));
        }
        let mut data = Vec::with_capacity((self.rows - 1) * (self.cols - 1));
        for i in (0..self.rows).filter(|&i| i != skip_row) {
            for j in (0..self.cols).filter(|&j| j != skip_col) {
                data.push(self[(i, j)]);
            }
        }
        Self::new(self.rows - 1, self.cols - 1, data)
    }

    /// The leading `k`×`l` block.
    pub fn leading_block(&self, k: usize, l: usize) -> Result<Self> {
        if k == 0 || l == 0 || k > self.rows || l > self.cols {
            return Err(Error::Dimension(format!(
                "cannot take a {k}x{l} block of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Self::from_fn(k, l, |i, j| self[(i, j)])
    }

    fn check_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )))
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Serializes as a list of rows.
impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            seq.serialize_element(self.row(i))?;
        }
        seq.end()
    }
}

/// Determinant by LU elimination with partial pivoting. Returns exactly 0 when
/// a pivot column is identically zero.
pub fn lu_determinant(m: &DenseMatrix) -> Result<f64> {
    m.check_square("determinant")?;
    let n = m.rows;
    let mut a = m.data.clone();
    let mut det = 1.0;
    for k in 0..n {
        let (piv, piv_abs) =
            (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if piv_abs == 0.0 {
            return Ok(0.0);
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            det = -det;
        }
        let p = a[k * n + k];
        det *= p;
        for i in k + 1..n {
            let f = a[i * n + k] / p;
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                a[i * n + j] -= f * a[k * n + j];
            }
        }
    }
    Ok(det)
}

/// Adjugate from the cofactor definition: `adj(M)_{ij} = (-1)^{i+j} det(M with
/// row j and column i removed)`.
pub fn adjugate(m: &DenseMatrix) -> Result<DenseMatrix> {
    m.check_square("adjugate")?;
    let n = m.rows;
    if n == 1 {
        return Ok(DenseMatrix::identity(1));
    }
    let mut adj = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(i, j)] = sign * lu_determinant(&m.minor(j, i)?)?;
        }
    }
    Ok(adj)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DenseMatrix,
}

impl SymmetricEigen {
    /// `V diag(values) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        DenseMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * self.values[k] * v[(j, k)]).sum()
        })
        .expect("finite reconstruction")
    }
}

fn check_symmetric(m: &DenseMatrix) -> Result<()> {
    m.check_square("symmetric eigensolver")?;
    let asym = m.asymmetry().unwrap_or(0.0);
    if asym > SYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(Error::Asymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Cyclic Jacobi eigen-decomposition. The input is symmetrized as
/// `(M + Mᵀ)/2` after the symmetry check.
pub fn symmetric_eigen(m: &DenseMatrix) -> Result<SymmetricEigen> {
    check_symmetric(m)?;
    let n = m.rows;
    let mut a = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))?;
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm();

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-17 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, k| v[(i, order[k])])?;
    Ok(SymmetricEigen { values, vectors })
}

/// Eigenvalues of a symmetric matrix in descending order.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    symmetric_eigen(m).map(|e| e.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).unwrap()
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
        let a = random_matrix(rng, n);
        a.add_scaled(1.0, &a.transpose()).unwrap()
    }

    // Laplace expansion along the first row.
    fn cofactor_det(m: &DenseMatrix) -> f64 {
        let n = m.rows();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * cofactor_det(&m.minor(0, j).unwrap())
            })
            .sum()
    }

    // Roots of det(M - xI) located by sign changes on a fine grid and refined
    // by bisection; all roots are real for symmetric M.
    fn char_poly_roots(m: &DenseMatrix) -> Vec<f64> {
        let n = m.rows();
        let p =
            |x: f64| lu_determinant(&m.add_scaled(-x, &DenseMatrix::identity(n)).unwrap()).unwrap();
        let bound = (0..n)
            .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            + 1.0;
        let steps = 20_000;
        let h = 2.0 * bound / steps as f64;
        let mut roots = Vec::new();
        let mut x0 = -bound;
        let mut p0 = p(x0);
        for k in 1..=steps {
            let x1 = -bound + k as f64 * h;
            let p1 = p(x1);
            if p0 == 0.0 {
                roots.push(x0);
            } else if p0 * p1 < 0.0 {
                let (mut lo, mut hi, mut plo) = (x0, x1, p0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let pm = p(mid);
                    if pm * plo <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        plo = pm;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            x0 = x1;
            p0 = p1;
        }
        roots.sort_by(|a, b| b.total_cmp(a));
        roots
    }

    #[test]
    fn determinant_of_identity() {
        assert_eq!(lu_determinant(&DenseMatrix::identity(2)).unwrap(), 1.0);
    }

    #[test]
    fn determinant_of_fluctuation_matrix_for_half_delta() {
        let d2 = 0.25;
        let m = DenseMatrix::from_rows(vec![
            vec![1.0 - d2 / 2.0, d2 / 2.0],
            vec![d2 / 2.0, 1.0 - d2 / 2.0],
        ])
        .unwrap();
        assert!((lu_determinant(&m).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 5);
            let lu = lu_determinant(&a).unwrap();
            let cof = cofactor_det(&a);
            assert!(
                (lu - cof).abs() <= 1e-12 * cof.abs().max(1e-3),
                "{lu} vs {cof}"
            );
        }
    }

    #[test]
    fn determinant_rejects_rectangular() {
        let m = DenseMatrix::zeros(2, 3);
        assert!(matches!(lu_determinant(&m), Err(Error::Dimension(_))));
    }

    #[test]
    fn determinant_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 6);
            let b = random_matrix(&mut rng, 6);
            let lhs = lu_determinant(&a.matmul(&b).unwrap()).unwrap();
            let rhs = lu_determinant(&a).unwrap() * lu_determinant(&b).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs(), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn singular_matrix_has_zero_determinant() {
        let m = DenseMatrix::from_rows(vec![vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(lu_determinant(&m).unwrap(), 0.0);
    }

    #[test]
    fn eigenvalues_of_uniform_projection() {
        let ev = symmetric_eigenvalues(&DenseMatrix::uniform(2)).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-15 && ev[1].abs() < 1e-15, "{ev:?}");
    }

    #[test]
    fn eigenvalues_of_example_seed() {
        let b = DenseMatrix::from_rows(vec![vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        let ev = symmetric_eigenvalues(&b).unwrap();
        assert!(
            (ev[0] - 1.0).abs() < 1e-15 && (ev[1] - 0.5).abs() < 1e-15,
            "{ev:?}"
        );
    }

    #[test]
    fn eigenvalues_match_characteristic_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let m = random_symmetric(&mut rng, 6);
            let ev = symmetric_eigenvalues(&m).unwrap();
            let roots = char_poly_roots(&m);
            assert_eq!(roots.len(), 6, "roots {roots:?}");
            for (a, b) in ev.iter().zip(&roots) {
                assert!((a - b).abs() < 1e-9, "{ev:?} vs {roots:?}");
            }
        }
    }

    #[test]
    fn eigen_reconstruction_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=10 {
            let m = random_symmetric(&mut rng, n);
            let eig = symmetric_eigen(&m).unwrap();
            let resid = eig.reconstruct().max_abs_diff(&m);
            assert!(resid <= 1e-10 * m.max_abs().max(1.0), "n={n} resid {resid}");
            let sum: f64 = eig.values.iter().sum();
            assert!((sum - m.trace()).abs() <= 1e-10 * m.trace().abs().max(1.0));
            assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eigensolver_rejects_asymmetric_input() {
        let m = DenseMatrix::from_rows(vec![vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            symmetric_eigenvalues(&m),
            Err(Error::Asymmetric { .. })
        ));
    }

    #[test]
    fn adjugate_times_matrix_is_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 5);
        let det = lu_determinant(&a).unwrap();
        let prod = adjugate(&a).unwrap().matmul(&a).unwrap();
        assert!(prod.max_abs_diff(&DenseMatrix::identity(5).scale(det)) < 1e-12);
    }

    #[test]
    fn constructor_rejects_bad_shapes_and_values() {
        assert!(DenseMatrix::new(0, 1, vec![]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(DenseMatrix::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
