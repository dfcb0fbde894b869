//! Large-n prediction for the block permanent and exact-vs-predicted sweeps.
//!
//! With `diag(v)·B·diag(w) = t` doubly stochastic,
//!
//! ```text
//! perm(A^{(m,n)}) / (mn)!  ~  m^{−mn} (∏v)^{−n} (∏w)^{−n} / √det(I + J − tᵀt)
//! ```
//!
//! where `J` is the m×m matrix with every entry `1/m`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{lu_determinant, DenseMatrix};
use crate::logmath::{log_factorial, xlogy};
use crate::scaling::{
    doubly_stochastic_residual, sinkhorn_scale, PositiveBlockMatrix, ScalingSolution,
};
use crate::scaling::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::tables::{block_permanent_ratio_with, ContingencyTable, EnumerationOptions};

/// Largest row/column residual accepted from a "doubly stochastic" input.
pub const STOCHASTIC_TOL: f64 = 1e-8;
/// Fluctuation determinants at or below this are reported as degenerate.
pub const DEGENERATE_DET: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticPrediction {
    /// `−mn ln m − n Σ ln v − n Σ ln w`.
    pub log_leading: f64,
    /// `det(I + J − tᵀt)`.
    pub fluct_det: f64,
    /// `log_leading − ½ ln fluct_det`.
    pub log_predicted_ratio: f64,
}

/// `det(I + J − tᵀt)` for doubly stochastic `t`; lies in `[0, 1]`.
pub fn fluctuation_determinant(t: &DenseMatrix) -> Result<f64> {
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
    let m = t.rows();
    let tt = t.transpose().matmul(t)?;
    let k = DenseMatrix::from_fn(m, m, |i, j| {
        (if i == j { 1.0 } else { 0.0 }) + 1.0 / m as f64 - tt[(i, j)]
    })?;
    lu_determinant(&k)
}

/// Prediction from a scaling solution alone. Accepts solutions built with
/// [`ScalingSolution::from_parts`], so seeds with zero entries can be probed;
/// a vanishing determinant is a [`Error::Degenerate`] error.
pub fn predict_from_solution(n: u32, sol: &ScalingSolution) -> Result<AsymptoticPrediction> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "block size n must be at least 1".into(),
        ));
    }
    let m = sol.m() as f64;
    let n = n as f64;
    let sum_ln_v: f64 = sol.v().iter().map(|x| x.ln()).sum();
    let sum_ln_w: f64 = sol.w().iter().map(|x| x.ln()).sum();
    let log_leading = -m * n * m.ln() - n * sum_ln_v - n * sum_ln_w;
    let fluct_det = fluctuation_determinant(sol.t())?;
    if fluct_det <= DEGENERATE_DET {
        return Err(Error::Degenerate { det: fluct_det });
    }
    Ok(AsymptoticPrediction {
        log_leading,
        fluct_det,
        log_predicted_ratio: log_leading - 0.5 * fluct_det.ln(),
    })
}

/// Prediction for seed `b` at block size `n`, checking that `sol` scales `b`.
pub fn predict_ratio(
    b: &PositiveBlockMatrix,
    n: u32,
    sol: &ScalingSolution,
) -> Result<AsymptoticPrediction> {
    let m = b.m();
    if sol.m() != m {
        return Err(Error::Dimension(format!(
            "solution is {}x{}, seed is {m}x{m}",
            sol.m(),
            sol.m()
        )));
    }
    for r in 0..m {
        for s in 0..m {
            let rebuilt = sol.v()[r] * b[(r, s)] * sol.w()[s];
            let t = sol.t()[(r, s)];
            if (rebuilt - t).abs() > 1e-8 * t.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "scaling solution does not match the seed at ({r}, {s}): v·b·w = {rebuilt}, t = {t}"
                )));
            }
        }
    }
    predict_from_solution(n, sol)
}

fn require_positive(x: &DenseMatrix) -> Result<()> {
    let m = x.cols();
    match x.as_slice().iter().position(|&v| !(v > 0.0)) {
        Some(k) => Err(Error::Domain {
            row: k / m,
            col: k % m,
            value: x.as_slice()[k],
            reason: "entries must be strictly positive",
        }),
        None => Ok(()),
    }
}

/// `𝓛[X] = −m ln m − Σ x ln x`.
pub fn stirling_l(x: &DenseMatrix) -> Result<f64> {
    require_positive(x)?;
    let m = x.rows() as f64;
    Ok(-m * m.ln() - x.as_slice().iter().map(|&v| v * v.ln()).sum::<f64>())
}

/// `ln 𝓚[X] = −½ ln m − ½ Σ ln x`.
pub fn log_stirling_k(x: &DenseMatrix) -> Result<f64> {
    require_positive(x)?;
    let m = x.rows() as f64;
    Ok(-0.5 * m.ln() - 0.5 * x.as_slice().iter().map(|v| v.ln()).sum::<f64>())
}

/// `𝓚[X] = m^{−1/2} (∏x)^{−1/2}`.
pub fn stirling_k(x: &DenseMatrix) -> Result<f64> {
    log_stirling_k(x).map(f64::exp)
}

/// `𝒫_B[X] = Σ x_{r,s} ln b_{r,s}`.
pub fn cost_p(b: &PositiveBlockMatrix, x: &DenseMatrix) -> Result<f64> {
    if x.rows() != b.m() || x.cols() != b.m() {
        return Err(Error::Dimension(format!(
            "X is {}x{}, seed is {m}x{m}",
            x.rows(),
            x.cols(),
            m = b.m()
        )));
    }
    require_positive(x)?;
    Ok(x.as_slice()
        .iter()
        .zip(b.matrix().as_slice())
        .map(|(&xv, &bv)| xlogy(xv, bv))
        .sum())
}

/// Stirling approximation of `ln(|𝔖(Q)| / (mn)!)`:
/// `n 𝓛[Q/n] + ln 𝓚[Q/n] − ((m−1)²/2) ln(2πn)`. Diagnostic only.
pub fn pinsky_term_asymptotic(q: &ContingencyTable) -> Result<f64> {
    let m = q.m();
    let n = q.n() as f64;
    let x = DenseMatrix::new(m, m, q.entries().iter().map(|&v| v as f64 / n).collect())?;
    let spread = ((m - 1) * (m - 1)) as f64 / 2.0;
    Ok(n * stirling_l(&x)? + log_stirling_k(&x)? - spread * (2.0 * std::f64::consts::PI * n).ln())
}

/// Exact ln-ratio of a table's permutation count to `(mn)!`; the target of
/// [`pinsky_term_asymptotic`].
pub fn pinsky_term_exact(q: &ContingencyTable) -> f64 {
    crate::tables::pinsky_log_count(q) - log_factorial(q.m() as u64 * q.n() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u32,
    pub log_exact_ratio: f64,
    pub log_predicted_ratio: f64,
    /// `|exp(log_exact − log_predicted) − 1|`.
    pub scaled_error: f64,
    pub sqrt_n_times_error: f64,
}

impl SweepRow {
    pub fn new(n: u32, log_exact_ratio: f64, log_predicted_ratio: f64) -> Self {
        let scaled_error = (log_exact_ratio - log_predicted_ratio).exp_m1().abs();
        Self {
            n,
            log_exact_ratio,
            log_predicted_ratio,
            scaled_error,
            sqrt_n_times_error: (n as f64).sqrt() * scaled_error,
        }
    }
}

/// Exact-vs-predicted rows in strictly increasing `n`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: [&str; 5] = [
    "n",
    "log_exact_ratio",
    "log_predicted_ratio",
    "scaled_error",
    "sqrt_n_times_error",
];

impl SweepReport {
    pub fn new(rows: Vec<SweepRow>) -> Result<Self> {
        if rows.windows(2).any(|w| w[0].n >= w[1].n) {
            return Err(Error::InvalidArgument(
                "sweep rows must be strictly increasing in n".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn scaled_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.scaled_error).collect()
    }

    /// CSV with [`SWEEP_CSV_HEADER`]; reals carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let map = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(SWEEP_CSV_HEADER).map_err(map)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                format_real(r.log_exact_ratio),
                format_real(r.log_predicted_ratio),
                format_real(r.scaled_error),
                format_real(r.sqrt_n_times_error),
            ])
            .map_err(map)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is ascii"))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Round-trippable text for a real: 17 significant digits, `inf`/`NaN` as is.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SweepOptions {
    pub enumeration: EnumerationOptions,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            enumeration: EnumerationOptions::default(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Exact block sum against the prediction for each `n` in `ns`.
pub fn verify_sweep(
    b: &PositiveBlockMatrix,
    ns: &[u32],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "block sizes must be strictly increasing".into(),
        ));
    }
    let sol = sinkhorn_scale(b, opts.tol, opts.max_iter)?;
    let rows = ns
        .iter()
        .map(|&n| {
            let exact = block_permanent_ratio_with(b.matrix(), n, &opts.enumeration)?;
            let pred = predict_ratio(b, n, &sol)?;
            Ok(SweepRow::new(n, exact.log_ratio, pred.log_predicted_ratio))
        })
        .collect::<Result<Vec<_>>>()?;
    SweepReport::new(rows)
}

/// The two-block seed `½[[1+δ, 1−δ], [1−δ, 1+δ]]` swept with its closed-form
/// (n+1)-term exact sum; for `δ < 1` the seed is already doubly stochastic
/// up to the factor ½, so `v = w = √2`.
pub fn two_block_sweep(delta: f64, ns: &[u32]) -> Result<SweepReport> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "block sizes must be strictly increasing".into(),
        ));
    }
    let b = PositiveBlockMatrix::two_block(delta)?;
    let sol = sinkhorn_scale(&b, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let rows = ns
        .iter()
        .map(|&n| {
            let exact = crate::tables::example2_exact_ratio(delta, n)?;
            let pred = predict_ratio(&b, n, &sol)?;
            Ok(SweepRow::new(n, exact, pred.log_predicted_ratio))
        })
        .collect::<Result<Vec<_>>>()?;
    SweepReport::new(rows)
}
