//! Gaussian fluctuations around the scaled matrix `t` and the determinant
//! identities behind the prefactor `1/√det(I + J − tᵀt)`.
//!
//! Deviations `Z` of a table from `n·t` have zero margins, so they live in the
//! span of the (m−1)² matrices `F^{(ρ,σ)}`. The Gaussian weight is
//! `exp(−𝓖(Z)/2n)` with `𝓖(Z) = Σ z²/t`, whose Gram matrix in that basis is
//! `𝔊`. The chain of identities checked here is
//!
//! ```text
//! det 𝔊⁻¹ = ∏t / det 𝔥,    det 𝔥 = c = (1/m) ∏_{r≥2} (1 − λ_r),
//! ⟨χ, adj(𝔎) χ⟩ = 2 ∏_{r≥2} (1 − λ_r),
//! 1 / (√m √∏t √det 𝔊) = 1 / √det(I + J − tᵀt),
//! ```
//!
//! with `λ_1 = 1 ≥ λ_2 ≥ …` the eigenvalues of `t tᵀ`,
//! `𝔎 = [[I, −t], [−tᵀ, I]]` and `𝔥 = [[I_m, 𝒰], [𝒰ᵀ, I_{m−1}]]` where `𝒰` is
//! `t` without its last column.

use serde::Serialize;

use crate::asymptotics::{fluctuation_determinant, STOCHASTIC_TOL};
use crate::error::{Error, Result};
use crate::linalg::{adjugate, lu_determinant, symmetric_eigenvalues, DenseMatrix};
use crate::scaling::doubly_stochastic_residual;

/// Tolerance of [`spectrum_pairing_check`].
pub const SPECTRUM_TOL: f64 = 1e-8;

/// Small dense integer matrix, used for the basis `F^{(ρ,σ)}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntegerMatrix {
    m: usize,
    entries: Vec<i64>,
}

impl IntegerMatrix {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            entries: vec![0; m * m],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, r: usize, s: usize) -> i64 {
        self.entries[r * self.m + s]
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn row_sums(&self) -> Vec<i64> {
        self.entries
            .chunks(self.m)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<i64> {
        (0..self.m)
            .map(|s| (0..self.m).map(|r| self.get(r, s)).sum())
            .collect()
    }

    /// `self + k·other`.
    pub fn add_multiple(&self, k: i64, other: &Self) -> Self {
        Self {
            m: self.m,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + k * b)
                .collect(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::new(
            self.m,
            self.m,
            self.entries.iter().map(|&x| x as f64).collect(),
        )
        .expect("integer matrices are finite and nonempty")
    }
}

/// `F^{(ρ,σ)}` with 1-based `ρ, σ ∈ [1, m−1]`: `+1` at `(ρ,σ)` and `(m,m)`,
/// `−1` at `(ρ,m)` and `(m,σ)`.
pub fn basis_matrix(rho: usize, sigma: usize, m: usize) -> Result<IntegerMatrix> {
    if m < 2 || rho == 0 || sigma == 0 || rho >= m || sigma >= m {
        return Err(Error::IndexOutOfRange { rho, sigma, m });
    }
    let mut f = IntegerMatrix::zeros(m);
    let (r, s, last) = (rho - 1, sigma - 1, m - 1);
    f.entries[r * m + s] = 1;
    f.entries[last * m + last] = 1;
    f.entries[r * m + last] = -1;
    f.entries[last * m + s] = -1;
    Ok(f)
}

/// All basis matrices, `(ρ,σ)` in row-major order.
pub fn basis(m: usize) -> Vec<IntegerMatrix> {
    (1..m)
        .flat_map(|rho| {
            (1..m).map(move |sigma| basis_matrix(rho, sigma, m).expect("indices in range"))
        })
        .collect()
}

fn require_positive(t: &DenseMatrix) -> Result<()> {
    let m = t.cols();
    match t.as_slice().iter().position(|&x| !(x > 0.0)) {
        Some(k) => Err(Error::Domain {
            row: k / m,
            col: k % m,
            value: t.as_slice()[k],
            reason: "t must be strictly positive",
        }),
        None => Ok(()),
    }
}

fn require_doubly_stochastic(t: &DenseMatrix) -> Result<()> {
    if !t.is_square() {
        return Err(Error::Dimension(format!(
            "t must be square, got {}x{}",
            t.rows(),
            t.cols()
        )));
    }
    let residual = doubly_stochastic_residual(t);
    if !(residual <= STOCHASTIC_TOL) {
        return Err(Error::NotDoublyStochastic {
            residual,
            tolerance: STOCHASTIC_TOL,
        });
    }
    Ok(())
}

/// `𝓖(Z) = Σ z²_{r,s} / t_{r,s}`.
pub fn quadratic_form_g(t: &DenseMatrix, z: &DenseMatrix) -> Result<f64> {
    if t.rows() != z.rows() || t.cols() != z.cols() {
        return Err(Error::Dimension(format!(
            "t is {}x{}, Z is {}x{}",
            t.rows(),
            t.cols(),
            z.rows(),
            z.cols()
        )));
    }
    require_positive(t)?;
    Ok(z.as_slice()
        .iter()
        .zip(t.as_slice())
        .map(|(&zv, &tv)| zv * zv / tv)
        .sum())
}

/// `𝔊` by polarization of `𝓖` over the basis; requires `m ≥ 2`.
pub fn gram_matrix(t: &DenseMatrix) -> Result<DenseMatrix> {
    require_doubly_stochastic(t)?;
    require_positive(t)?;
    let m = t.rows();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "the fluctuation basis is empty for m = 1".into(),
        ));
    }
    let fs: Vec<DenseMatrix> = basis(m).iter().map(IntegerMatrix::to_dense).collect();
    let diag: Vec<f64> = fs
        .iter()
        .map(|f| quadratic_form_g(t, f))
        .collect::<Result<_>>()?;
    let k = fs.len();
    let mut g = DenseMatrix::zeros(k, k);
    for a in 0..k {
        g[(a, a)] = diag[a];
        for b in a + 1..k {
            let sum = fs[a].add_scaled(1.0, &fs[b])?;
            let value = 0.5 * (quadratic_form_g(t, &sum)? - diag[a] - diag[b]);
            g[(a, b)] = value;
            g[(b, a)] = value;
        }
    }
    Ok(g)
}

/// `𝓖̃(ξ) = ξᵀ 𝔊 ξ`.
pub fn reduced_quadratic_form(gram: &DenseMatrix, xi: &[f64]) -> Result<f64> {
    if gram.rows() != xi.len() {
        return Err(Error::Dimension(format!(
            "Gram matrix has order {}, ξ has {}",
            gram.rows(),
            xi.len()
        )));
    }
    Ok(gram.mul_vec(xi).iter().zip(xi).map(|(a, b)| a * b).sum())
}

/// `det 𝔊`, with the empty determinant 1 at `m = 1`.
fn gram_determinant(t: &DenseMatrix) -> Result<f64> {
    if t.rows() == 1 {
        require_positive(t)?;
        return Ok(1.0);
    }
    lu_determinant(&gram_matrix(t)?)
}

/// `𝔎 = [[I, −t], [−tᵀ, I]]`, of order 2m.
pub fn covariance_k(t: &DenseMatrix) -> Result<DenseMatrix> {
    require_doubly_stochastic(t)?;
    let m = t.rows();
    DenseMatrix::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
        (true, true) | (false, false) => (i == j) as u8 as f64,
        (true, false) => -t[(i, j - m)],
        (false, true) => -t[(j, i - m)],
    })
}

/// `𝔥 = [[I_m, 𝒰], [𝒰ᵀ, I_{m−1}]]`, of order 2m−1, with `𝒰` the first m−1
/// columns of `t`.
pub fn precision_block_h(t: &DenseMatrix) -> Result<DenseMatrix> {
    require_doubly_stochastic(t)?;
    let m = t.rows();
    DenseMatrix::from_fn(2 * m - 1, 2 * m - 1, |i, j| match (i < m, j < m) {
        (true, true) | (false, false) => (i == j) as u8 as f64,
        (true, false) => t[(i, j - m)],
        (false, true) => t[(j, i - m)],
    })
}

/// Eigenvalues of `t tᵀ`, descending, clamped at 0.
pub fn singular_spectrum(t: &DenseMatrix) -> Result<Vec<f64>> {
    require_doubly_stochastic(t)?;
    let mut lambda = symmetric_eigenvalues(&t.matmul(&t.transpose())?)?;
    for l in &mut lambda {
        *l = l.max(0.0);
    }
    Ok(lambda)
}

/// `c = (1/m) ∏_{r≥2} (1 − λ_r)`.
pub fn adjugate_constant_c(t: &DenseMatrix) -> Result<f64> {
    let lambda = singular_spectrum(t)?;
    Ok(lambda[1..].iter().map(|l| 1.0 - l).product::<f64>() / t.rows() as f64)
}

/// `χ`: the all-ones vector of length `len`, normalized.
pub fn chi(len: usize) -> Vec<f64> {
    vec![1.0 / (len as f64).sqrt(); len]
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    /// Eigenvalues of `𝔎`, descending.
    pub kernel_eigenvalues: Vec<f64>,
    /// `{1 ± √λ_r}`, descending.
    pub predicted: Vec<f64>,
    pub max_abs_diff: f64,
    pub pass: bool,
}

/// Compares the spectrum of `𝔎` with `{1 + √λ_r} ∪ {1 − √λ_r}` as sorted
/// multisets.
pub fn spectrum_pairing_check(t: &DenseMatrix) -> Result<SpectrumReport> {
    let kernel_eigenvalues = symmetric_eigenvalues(&covariance_k(t)?)?;
    let lambda = singular_spectrum(t)?;
    let mut predicted: Vec<f64> = lambda
        .iter()
        .flat_map(|l| [1.0 + l.sqrt(), 1.0 - l.sqrt()])
        .collect();
    predicted.sort_by(|a, b| b.total_cmp(a));
    let max_abs_diff = kernel_eigenvalues
        .iter()
        .zip(&predicted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(SpectrumReport {
        kernel_eigenvalues,
        predicted,
        max_abs_diff,
        pass: max_abs_diff <= SPECTRUM_TOL,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
    pub pass: bool,
}

impl IdentityCheck {
    fn new(name: &'static str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let rel_err = if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        };
        Self {
            name,
            lhs,
            rhs,
            rel_err,
            pass: rel_err <= tol,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub m: usize,
    pub tolerance: f64,
    pub identities: Vec<IdentityCheck>,
    pub max_rel_err: f64,
    pub pass: bool,
}

/// Evaluates both sides of the four determinant identities for positive
/// doubly stochastic `t`. Failures are reported, not raised; only malformed
/// input is an error.
pub fn verify_lemma_identity(t: &DenseMatrix, tol: f64) -> Result<IdentityReport> {
    require_doubly_stochastic(t)?;
    require_positive(t)?;
    let m = t.rows();
    let prod_t: f64 = t.as_slice().iter().product();
    let det_gram = gram_determinant(t)?;
    let det_h = lu_determinant(&precision_block_h(t)?)?;
    let lambda = singular_spectrum(t)?;
    let gap_product: f64 = lambda[1..].iter().map(|l| 1.0 - l).product();
    let c = gap_product / m as f64;

    let adj = adjugate(&covariance_k(t)?)?;
    let x = chi(2 * m);
    let chi_adj_chi: f64 = adj.mul_vec(&x).iter().zip(&x).map(|(a, b)| a * b).sum();

    let identities = vec![
        IdentityCheck::new(
            "gaussian_prefactor",
            1.0 / ((m as f64).sqrt() * prod_t.sqrt() * det_gram.sqrt()),
            1.0 / fluctuation_determinant(t)?.sqrt(),
            tol,
        ),
        IdentityCheck::new("schur_complement", 1.0 / det_gram, prod_t / det_h, tol),
        IdentityCheck::new("precision_block_determinant", det_h, c, tol),
        IdentityCheck::new("determinant_lemma", chi_adj_chi, 2.0 * gap_product, tol),
    ];
    let max_rel_err = identities.iter().map(|i| i.rel_err).fold(0.0, f64::max);
    Ok(IdentityReport {
        m,
        tolerance: tol,
        pass: identities.iter().all(|i| i.pass),
        identities,
        max_rel_err,
    })
}

/// Every object of the fluctuation analysis for one positive doubly
/// stochastic `t` with `m ≥ 2`.
#[derive(Clone, Debug, Serialize)]
pub struct FluctuationModel {
    pub m: usize,
    pub t: DenseMatrix,
    pub basis: Vec<IntegerMatrix>,
    pub gram: DenseMatrix,
    pub precision_block: DenseMatrix,
    pub covariance: DenseMatrix,
    pub lambdas: Vec<f64>,
    pub c: f64,
    pub chi: Vec<f64>,
}

impl FluctuationModel {
    pub fn new(t: &DenseMatrix) -> Result<Self> {
        let gram = gram_matrix(t)?;
        let m = t.rows();
        let lambdas = singular_spectrum(t)?;
        let c = lambdas[1..].iter().map(|l| 1.0 - l).product::<f64>() / m as f64;
        Ok(Self {
            m,
            t: t.clone(),
            basis: basis(m),
            gram,
            precision_block: precision_block_h(t)?,
            covariance: covariance_k(t)?,
            lambdas,
            c,
            chi: chi(2 * m),
        })
    }
}
