//! Smooth cost kernels `𝒞(x, y)` on `[0,1]²`, their right-endpoint
//! discretization `a_{ij} = exp(−𝒞(i/N, j/N))`, the discrete bridge
//! potentials and the Nyström Fredholm determinant `det(I + J − TᵀT)`.
//!
//! The bridge solves `∫ exp(−𝒞 − α − β) dy = 1` (and in `x`) on the grid with
//! quadrature weight `1/N`; `Λ = mean α + mean β` is the exponential rate,
//! `perm(a) / N! ≈ exp(NΛ) / √det(I + J − TᵀT)`.

use std::io::Read;

use serde::Serialize;

use crate::asymptotics::{format_real, SweepReport, SweepRow};
use crate::error::{Error, Result};
use crate::linalg::{lu_determinant, DenseMatrix};
use crate::logmath::log_factorial;
use crate::permanent::{permanent_ryser_with, RyserOptions};
use crate::scaling::{sinkhorn_scale, PositiveBlockMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Largest matrix order accepted by [`conjecture_trend`].
pub const TREND_MAX_N: usize = 26;
/// Default grid for the refined `Λ` and Fredholm determinant.
pub const DEFAULT_REFINED_GRID: usize = 512;
/// Marginal residual required by [`fredholm_determinant`].
pub const BRIDGE_RESIDUAL_TOL: f64 = 1e-10;
const SYMMETRY_CHECK_TOL: f64 = 1e-12;
const SYMMETRY_CHECK_POINTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    Zero,
    /// `ε cos(2π(x − y))`.
    Cosine {
        eps: f64,
    },
    /// `ε (1 − exp(−(x − y)² / 2σ²))`.
    GaussianBump {
        eps: f64,
        sigma: f64,
    },
    /// `−ln b_{⌈xm⌉, ⌈ym⌉}`: the block-uniform seed as a kernel.
    Block {
        b: DenseMatrix,
    },
    /// Values at the nodes `(i/N, j/N)`, bilinear in between.
    Grid {
        values: DenseMatrix,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SymmetryFlags {
    /// `𝒞(x, y) = 𝒞(y, x)`.
    pub symmetric: bool,
    /// `𝒞(1 − x, 1 − y) = 𝒞(x, y)`.
    pub antipodal: bool,
    /// `𝒞(x, x) = 0`.
    pub zero_diagonal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub symmetry: SymmetryFlags,
}

impl KernelSpec {
    /// Validates parameters, derives the symmetry flags and checks them at
    /// quasi-random points.
    pub fn new(family: KernelFamily) -> Result<Self> {
        let symmetry = match &family {
            KernelFamily::Zero => SymmetryFlags {
                symmetric: true,
                antipodal: true,
                zero_diagonal: true,
            },
            KernelFamily::Cosine { eps } => {
                require_finite("eps", *eps)?;
                SymmetryFlags {
                    symmetric: true,
                    antipodal: true,
                    zero_diagonal: *eps == 0.0,
                }
            }
            KernelFamily::GaussianBump { eps, sigma } => {
                require_finite("eps", *eps)?;
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "sigma must be positive, got {sigma}"
                    )));
                }
                SymmetryFlags {
                    symmetric: true,
                    antipodal: true,
                    zero_diagonal: true,
                }
            }
            KernelFamily::Block { b } => {
                let b = PositiveBlockMatrix::new(b.clone())?;
                let m = b.m();
                let centro = (0..m).all(|r| (0..m).all(|s| b[(r, s)] == b[(m - 1 - r, m - 1 - s)]));
                SymmetryFlags {
                    symmetric: b.matrix().asymmetry() == Some(0.0),
                    antipodal: centro,
                    zero_diagonal: (0..m).all(|r| b[(r, r)] == 1.0),
                }
            }
            KernelFamily::Grid { values } => {
                if !values.is_square() {
                    return Err(Error::Dimension(format!(
                        "kernel grid must be square, got {}x{}",
                        values.rows(),
                        values.cols()
                    )));
                }
                SymmetryFlags {
                    symmetric: values.asymmetry() == Some(0.0),
                    antipodal: false,
                    zero_diagonal: false,
                }
            }
        };
        let kernel = Self { family, symmetry };
        kernel.check_symmetries()?;
        Ok(kernel)
    }

    pub fn zero() -> Self {
        Self::new(KernelFamily::Zero).expect("zero kernel is valid")
    }

    pub fn cosine(eps: f64) -> Result<Self> {
        Self::new(KernelFamily::Cosine { eps })
    }

    pub fn gaussian_bump(eps: f64, sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::GaussianBump { eps, sigma })
    }

    pub fn block(b: &PositiveBlockMatrix) -> Self {
        Self::new(KernelFamily::Block {
            b: b.matrix().clone(),
        })
        .expect("positive seeds give valid block kernels")
    }

    /// Reads a grid: first line `N`, then N rows of N comma-separated values.
    pub fn from_grid_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let parse_err = |e: csv::Error| Error::Parse(e.to_string());
        let first = records
            .next()
            .ok_or(Error::Empty("kernel grid file"))?
            .map_err(parse_err)?;
        if first.len() != 1 {
            return Err(Error::Parse(
                "first line of a kernel grid must hold only N".into(),
            ));
        }
        let n: usize = first[0].parse().map_err(|_| {
            Error::Parse(format!(
                "grid size {:?} is not a positive integer",
                &first[0]
            ))
        })?;
        if n == 0 {
            return Err(Error::Parse("grid size must be positive".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, rec) in records.enumerate() {
            let rec = rec.map_err(parse_err)?;
            if i >= n {
                return Err(Error::Parse(format!("expected {n} grid rows, found more")));
            }
            if rec.len() != n {
                return Err(Error::Parse(format!(
                    "grid row {} has {} values, expected {n}",
                    i + 1,
                    rec.len()
                )));
            }
            for field in rec.iter() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!("grid row {}: {field:?} is not a number", i + 1))
                })?;
                data.push(v);
            }
        }
        if data.len() != n * n {
            return Err(Error::Parse(format!(
                "expected {n} grid rows, found {}",
                data.len() / n
            )));
        }
        Self::new(KernelFamily::Grid {
            values: DenseMatrix::new(n, n, data).map_err(|e| Error::Parse(e.to_string()))?,
        })
    }

    /// `𝒞(x, y)` for `x, y ∈ [0, 1]`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match &self.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::Cosine { eps } => eps * (2.0 * std::f64::consts::PI * (x - y)).cos(),
            KernelFamily::GaussianBump { eps, sigma } => {
                eps * -(-(x - y) * (x - y) / (2.0 * sigma * sigma)).exp_m1()
            }
            KernelFamily::Block { b } => {
                let m = b.rows();
                -b[(block_index(x, m), block_index(y, m))].ln()
            }
            KernelFamily::Grid { values } => bilinear(values, x, y),
        }
    }

    fn check_symmetries(&self) -> Result<()> {
        let (phi, sqrt2) = ((5f64.sqrt() - 1.0) / 2.0, 2f64.sqrt() - 1.0);
        for k in 1..=SYMMETRY_CHECK_POINTS {
            let x = (k as f64 * phi).fract();
            let y = (k as f64 * sqrt2).fract();
            let c = self.eval(x, y);
            if !c.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "kernel is not finite at ({x}, {y})"
                )));
            }
            let checks = [
                (self.symmetry.symmetric, "symmetric", self.eval(y, x)),
                (
                    self.symmetry.antipodal,
                    "antipodal",
                    self.eval(1.0 - x, 1.0 - y),
                ),
            ];
            for (declared, name, other) in checks {
                if declared && (c - other).abs() > SYMMETRY_CHECK_TOL * c.abs().max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "kernel declared {name} fails at ({x}, {y})"
                    )));
                }
            }
            if self.symmetry.zero_diagonal && self.eval(x, x).abs() > SYMMETRY_CHECK_TOL {
                return Err(Error::InvalidArgument(format!(
                    "kernel declared zero on the diagonal fails at {x}"
                )));
            }
        }
        Ok(())
    }
}

fn require_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

/// Zero-based block of `x` among `m` equal blocks, with `x = k/m` assigned to
/// block `k` (one-based), so that grid point `i/(mn)` lands in block `⌈i/n⌉`.
fn block_index(x: f64, m: usize) -> usize {
    let k = (x * m as f64 - 1e-9).ceil();
    (k.clamp(1.0, m as f64) as usize) - 1
}

/// Bilinear interpolation on nodes `(i/N, j/N)`, `i, j ∈ [N]`, constant
/// below the first node.
fn bilinear(values: &DenseMatrix, x: f64, y: f64) -> f64 {
    let n = values.rows();
    let locate = |u: f64| -> (usize, usize, f64) {
        let pos = (u * n as f64).clamp(1.0, n as f64) - 1.0;
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 {
            let k = nearest as usize;
            return (k, k, 0.0);
        }
        let lo = pos.floor() as usize;
        (lo, (lo + 1).min(n - 1), pos - lo as f64)
    };
    let (i0, i1, fx) = locate(x);
    let (j0, j1, fy) = locate(y);
    let top = values[(i0, j0)] * (1.0 - fy) + values[(i0, j1)] * fy;
    let bottom = values[(i1, j0)] * (1.0 - fy) + values[(i1, j1)] * fy;
    top * (1.0 - fx) + bottom * fx
}

/// `𝒞(i/N, j/N)` for `i, j ∈ [N]`.
pub fn discretize_cost(c: &KernelSpec, n: usize) -> Result<DenseMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "grid size must be at least 1".into(),
        ));
    }
    let h = 1.0 / n as f64;
    DenseMatrix::from_fn(n, n, |i, j| c.eval((i + 1) as f64 * h, (j + 1) as f64 * h))
}

/// `a_{ij} = exp(−𝒞(i/N, j/N))` for `i, j ∈ [N]`.
pub fn discretize_kernel(c: &KernelSpec, n: usize) -> Result<DenseMatrix> {
    let cost = discretize_cost(c, n)?;
    DenseMatrix::new(n, n, cost.as_slice().iter().map(|v| (-v).exp()).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct BridgeSolution {
    pub n: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `ρ_{ij} = exp(−𝒞(i/N, j/N) − α_i − β_j)`.
    #[serde(skip)]
    pub rho: DenseMatrix,
    /// `Λ_N = mean α + mean β`.
    pub lambda_rate: f64,
    /// Largest deviation of `(1/N) Σ ρ` from 1 over rows and columns.
    pub residual: f64,
    #[serde(skip)]
    cost: DenseMatrix,
}

impl BridgeSolution {
    fn from_potentials(cost: DenseMatrix, alpha: Vec<f64>, beta: Vec<f64>) -> Self {
        let n = alpha.len();
        let rho = DenseMatrix::from_fn(n, n, |i, j| (-cost[(i, j)] - alpha[i] - beta[j]).exp())
            .expect("finite potentials give a finite bridge");
        let scale = 1.0 / n as f64;
        let rows = rho.row_sums().into_iter();
        let cols = rho.col_sums().into_iter();
        let residual = rows
            .chain(cols)
            .map(|s| (s * scale - 1.0).abs())
            .fold(0.0, f64::max);
        let lambda_rate = (alpha.iter().sum::<f64>() + beta.iter().sum::<f64>()) * scale;
        Self {
            n,
            alpha,
            beta,
            rho,
            lambda_rate,
            residual,
            cost,
        }
    }

    /// `(α, β) → (α + c, β − c)`; `ρ` is unchanged up to rounding.
    pub fn gauge_shift(&self, c: f64) -> Self {
        Self::from_potentials(
            self.cost.clone(),
            self.alpha.iter().map(|a| a + c).collect(),
            self.beta.iter().map(|b| b - c).collect(),
        )
    }
}

/// Sinkhorn on `a / N` with `α = −ln v`, `β = −ln w` and the `Σα = Σβ` gauge.
pub fn bridge_potentials(
    c: &KernelSpec,
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<BridgeSolution> {
    let cost = discretize_cost(c, n)?;
    let a = DenseMatrix::new(
        n,
        n,
        cost.as_slice()
            .iter()
            .map(|v| (-v).exp() / n as f64)
            .collect(),
    )?;
    let sol = sinkhorn_scale(&PositiveBlockMatrix::new(a)?, tol, max_iter)?;
    Ok(BridgeSolution::from_potentials(
        cost,
        sol.alpha(),
        sol.beta(),
    ))
}

/// Nyström `det(I + J − TᵀT)`: the N×N determinant of
/// `δ_{ij} + 1/N − (1/N²) Σ_k ρ_{ki} ρ_{kj}`.
pub fn fredholm_determinant(sol: &BridgeSolution) -> Result<f64> {
    if !(sol.residual <= BRIDGE_RESIDUAL_TOL) {
        return Err(Error::NotDoublyStochastic {
            residual: sol.residual,
            tolerance: BRIDGE_RESIDUAL_TOL,
        });
    }
    let n = sol.n;
    let h = 1.0 / n as f64;
    let gram = sol.rho.transpose().matmul(&sol.rho)?;
    let op = DenseMatrix::from_fn(n, n, |i, j| {
        (i == j) as u8 as f64 + h - h * h * gram[(i, j)]
    })?;
    let det = lu_determinant(&op)?;
    if det <= crate::asymptotics::DEGENERATE_DET {
        return Err(Error::Degenerate { det });
    }
    Ok(det)
}

#[derive(Clone, Copy, Debug)]
pub struct TrendOptions {
    /// Grid for the refined `Λ` and the Fredholm determinant in the prediction.
    pub refined_grid: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub ryser: RyserOptions,
}

impl Default for TrendOptions {
    fn default() -> Self {
        Self {
            refined_grid: DEFAULT_REFINED_GRID,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            ryser: RyserOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrendRow {
    pub n: u32,
    /// `ln[perm(a) / n!]` with `a` the n-grid discretization.
    pub log_exact_ratio: f64,
    /// `nΛ_n − ½ ln 𝒟`, `Λ_n` from the n-grid bridge, `𝒟` on the refined grid.
    pub log_predicted_ratio: f64,
    /// `|ratio·√𝒟 − 1|` with `ratio = perm(a) / (n! e^{nΛ_n})`.
    pub scaled_error: f64,
    pub sqrt_n_times_error: f64,
    pub lambda_n: f64,
    pub lambda_refined: f64,
    pub fredholm_n: f64,
    pub fredholm_refined: f64,
    /// `nΛ − ½ ln 𝒟`, both on the refined grid.
    pub log_predicted_continuum: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrendReport {
    pub refined_grid: usize,
    pub rows: Vec<TrendRow>,
}

pub const TREND_CSV_HEADER: [&str; 10] = [
    "n",
    "log_exact_ratio",
    "log_predicted_ratio",
    "scaled_error",
    "sqrt_n_times_error",
    "lambda_n",
    "lambda_refined",
    "fredholm_n",
    "fredholm_refined",
    "log_predicted_continuum",
];

impl TrendReport {
    /// The five sweep columns only.
    pub fn as_sweep(&self) -> SweepReport {
        SweepReport {
            rows: self
                .rows
                .iter()
                .map(|r| SweepRow::new(r.n, r.log_exact_ratio, r.log_predicted_ratio))
                .collect(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let map = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(TREND_CSV_HEADER).map_err(map)?;
        for r in &self.rows {
            let mut rec = vec![r.n.to_string()];
            rec.extend(
                [
                    r.log_exact_ratio,
                    r.log_predicted_ratio,
                    r.scaled_error,
                    r.sqrt_n_times_error,
                    r.lambda_n,
                    r.lambda_refined,
                    r.fredholm_n,
                    r.fredholm_refined,
                    r.log_predicted_continuum,
                ]
                .map(format_real),
            );
            w.write_record(rec).map_err(map)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact `perm(a)/n!` (Ryser) against the bridge prediction for each `n`.
/// Reports only; no tolerance is asserted here.
pub fn conjecture_trend(c: &KernelSpec, ns: &[u32], opts: &TrendOptions) -> Result<TrendReport> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "matrix sizes must be strictly increasing".into(),
        ));
    }
    if let Some(&n) = ns.iter().find(|&&n| n as usize > TREND_MAX_N || n == 0) {
        return Err(Error::SizeGuard {
            method: "ryser",
            dim: n as usize,
            max: TREND_MAX_N,
        });
    }
    let refined = bridge_potentials(c, opts.refined_grid, opts.tol, opts.max_iter)?;
    let fredholm_refined = fredholm_determinant(&refined)?;
    let rows = ns
        .iter()
        .map(|&n| {
            let nn = n as usize;
            let exact = permanent_ryser_with(&discretize_kernel(c, nn)?, &opts.ryser)?.ln()
                - log_factorial(n as u64);
            let bridge = bridge_potentials(c, nn, opts.tol, opts.max_iter)?;
            let fredholm_n = fredholm_determinant(&bridge)?;
            let nf = n as f64;
            let predicted = nf * bridge.lambda_rate - 0.5 * fredholm_refined.ln();
            let base = SweepRow::new(n, exact, predicted);
            Ok(TrendRow {
                n,
                log_exact_ratio: exact,
                log_predicted_ratio: predicted,
                scaled_error: base.scaled_error,
                sqrt_n_times_error: base.sqrt_n_times_error,
                lambda_n: bridge.lambda_rate,
                lambda_refined: refined.lambda_rate,
                fredholm_n,
                fredholm_refined,
                log_predicted_continuum: nf * refined.lambda_rate - 0.5 * fredholm_refined.ln(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrendReport {
        refined_grid: opts.refined_grid,
        rows,
    })
}
