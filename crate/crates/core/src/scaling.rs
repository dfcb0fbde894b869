//! Matrix scaling: find positive `v`, `w` such that `diag(v) B diag(w)` is
//! doubly stochastic (the finite Schrödinger bridge).
//!
//! The pair `(v, w)` is only determined up to `(c v, w / c)`. Solutions
//! returned here are normalized so that `∏ v = ∏ w`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// A square matrix with strictly positive entries.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PositiveBlockMatrix(DenseMatrix);

impl PositiveBlockMatrix {
    pub fn new(b: DenseMatrix) -> Result<Self> {
        if !b.is_square() {
            return Err(Error::Dimension(format!(
                "block matrix must be square, got {}x{}",
                b.rows(),
                b.cols()
            )));
        }
        let m = b.rows();
        if let Some(k) = b.as_slice().iter().position(|&x| x <= 0.0) {
            return Err(Error::Domain {
                row: k / m,
                col: k % m,
                value: b.as_slice()[k],
                reason: "block entries must be strictly positive",
            });
        }
        Ok(Self(b))
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(rows)?)
    }

    /// The m×m matrix with every entry `1/m`.
    pub fn uniform(m: usize) -> Self {
        Self(DenseMatrix::uniform(m))
    }

    /// `½ [[1+δ, 1−δ], [1−δ, 1+δ]]` for `δ ∈ [0, 1)`.
    pub fn two_block(delta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in [0, 1), got {delta}"
            )));
        }
        let (hi, lo) = (0.5 * (1.0 + delta), 0.5 * (1.0 - delta));
        Self::from_rows(vec![vec![hi, lo], vec![lo, hi]])
    }

    pub fn m(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

impl std::ops::Index<(usize, usize)> for PositiveBlockMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Output of [`sinkhorn_scale`]: `t_{r,s} = b_{r,s} v_r w_s`.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingSolution {
    v: Vec<f64>,
    w: Vec<f64>,
    t: DenseMatrix,
    residual: f64,
    iterations: usize,
}

impl ScalingSolution {
    /// Assembles a solution from known scalings, e.g. for the degenerate
    /// `B = I` case that [`sinkhorn_scale`] refuses. `t` may contain zeros but
    /// must be doubly stochastic within `1e-8`.
    pub fn from_parts(v: Vec<f64>, w: Vec<f64>, t: DenseMatrix) -> Result<Self> {
        let m = t.rows();
        if !t.is_square() || v.len() != m || w.len() != m {
            return Err(Error::Dimension(format!(
                "scaling vectors of length {}, {} do not fit a {}x{} matrix",
                v.len(),
                w.len(),
                t.rows(),
                t.cols()
            )));
        }
        if let Some((k, &x)) = v.iter().chain(&w).enumerate().find(|(_, &x)| x <= 0.0) {
            return Err(Error::Domain {
                row: k % m,
                col: 0,
                value: x,
                reason: "scaling vectors must be positive",
            });
        }
        if let Some(k) = t.as_slice().iter().position(|&x| x < 0.0) {
            return Err(Error::Domain {
                row: k / m,
                col: k % m,
                value: t.as_slice()[k],
                reason: "doubly stochastic matrix must be nonnegative",
            });
        }
        let residual = doubly_stochastic_residual(&t);
        if residual > 1e-8 {
            return Err(Error::NotDoublyStochastic {
                residual,
                tolerance: 1e-8,
            });
        }
        Ok(Self {
            v,
            w,
            t,
            residual,
            iterations: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.v.len()
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn t(&self) -> &DenseMatrix {
        &self.t
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Potentials `α = −ln v`.
    pub fn alpha(&self) -> Vec<f64> {
        self.v.iter().map(|x| -x.ln()).collect()
    }

    /// Potentials `β = −ln w`.
    pub fn beta(&self) -> Vec<f64> {
        self.w.iter().map(|x| -x.ln()).collect()
    }

    /// The same solution in another gauge: `(c v, w / c)`.
    pub fn regauge(&self, c: f64) -> Self {
        assert!(c > 0.0 && c.is_finite());
        Self {
            v: self.v.iter().map(|x| c * x).collect(),
            w: self.w.iter().map(|x| x / c).collect(),
            ..self.clone()
        }
    }
}

/// Max over all rows and columns of `|sum − 1|`.
pub fn doubly_stochastic_residual(t: &DenseMatrix) -> f64 {
    t.row_sums()
        .into_iter()
        .chain(t.col_sums())
        .fold(0.0, |m, s| m.max((s - 1.0).abs()))
}

/// Alternating row/column normalization from `v = w = 1`, rows first, until
/// both row and column residuals are within `tol`; then the gauge is fixed
/// so that `∏ v = ∏ w`.
pub fn sinkhorn_scale(
    b: &PositiveBlockMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<ScalingSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let b = b.matrix();
    let m = b.rows();
    let mut v = vec![1.0; m];
    let mut w = vec![1.0; m];
    let mut col = vec![0.0; m];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        for (r, vr) in v.iter_mut().enumerate() {
            let s: f64 = b.row(r).iter().zip(&w).map(|(x, y)| x * y).sum();
            *vr = 1.0 / s;
        }
        col.iter_mut().for_each(|c| *c = 0.0);
        for (r, vr) in v.iter().enumerate() {
            for (c, x) in col.iter_mut().zip(b.row(r)) {
                *c += x * vr;
            }
        }
        for (ws, c) in w.iter_mut().zip(&col) {
            *ws = 1.0 / c;
        }
        residual = scaled_residual(b, &v, &w);
        if residual <= tol {
            break;
        }
    }
    if residual > tol {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }

    let t = DenseMatrix::from_fn(m, m, |r, s| b[(r, s)] * v[r] * w[s])?;
    let residual = doubly_stochastic_residual(&t);

    let log_gap: f64 =
        w.iter().map(|x| x.ln()).sum::<f64>() - v.iter().map(|x| x.ln()).sum::<f64>();
    let c = (log_gap / (2 * m) as f64).exp();
    v.iter_mut().for_each(|x| *x *= c);
    w.iter_mut().for_each(|x| *x /= c);

    Ok(ScalingSolution {
        v,
        w,
        t,
        residual,
        iterations,
    })
}

fn scaled_residual(b: &DenseMatrix, v: &[f64], w: &[f64]) -> f64 {
    let m = b.rows();
    let mut worst = 0.0f64;
    let mut col = vec![0.0; m];
    for (r, vr) in v.iter().enumerate() {
        let mut row = 0.0;
        for (s, x) in b.row(r).iter().enumerate() {
            let t = x * vr * w[s];
            row += t;
            col[s] += t;
        }
        worst = worst.max((row - 1.0).abs());
    }
    col.iter().fold(worst, |m, c| m.max((c - 1.0).abs()))
}
