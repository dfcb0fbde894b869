//! Exact permanents of small matrices and the block expansion `A^{(m,n)}`.
//!
//! Two independent routes are provided: [`permanent_naive`] sums over every
//! permutation and is the reference for tiny inputs; [`permanent_ryser`] uses
//! Ryser's inclusion–exclusion formula in the Nijenhuis–Wilf form (the row
//! sums are shifted by half the row total, which halves the number of subsets
//! and keeps the signed terms small for positive matrices), walked in Gray
//! code order.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::logmath::{CompensatedSum, LogNonneg};
use crate::parallel::map_partitions;
use crate::scaling::PositiveBlockMatrix;

/// Largest dimension accepted by [`permanent_naive`].
pub const NAIVE_MAX_DIM: usize = 12;
/// Default largest dimension accepted by [`permanent_ryser`].
pub const RYSER_MAX_DIM: usize = 30;
const RYSER_HARD_MAX_DIM: usize = 48;
const RYSER_CHUNKS_LOG2: u32 = 8;

/// `A^{(m,n)}`: the (mn)×(mn) matrix with `a_{i,j} = b_{⌈i/n⌉,⌈j/n⌉}`.
#[derive(Clone, Debug, Serialize)]
pub struct BlockExpandedMatrix {
    m: usize,
    n: usize,
    matrix: DenseMatrix,
}

impl BlockExpandedMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.matrix
    }
}

pub fn build_block_matrix(b: &PositiveBlockMatrix, n: usize) -> Result<BlockExpandedMatrix> {
    expand_blocks(b.matrix(), n)
}

/// Block expansion of an arbitrary square seed (zeros allowed).
pub fn expand_blocks(b: &DenseMatrix, n: usize) -> Result<BlockExpandedMatrix> {
    if !b.is_square() {
        return Err(Error::Dimension(format!(
            "seed must be square, got {}x{}",
            b.rows(),
            b.cols()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "block size must be at least 1".into(),
        ));
    }
    let m = b.rows();
    let matrix = DenseMatrix::from_fn(m * n, m * n, |i, j| b[(i / n, j / n)])?;
    Ok(BlockExpandedMatrix { m, n, matrix })
}

#[derive(Clone, Copy, Debug)]
pub struct RyserOptions {
    pub max_dim: usize,
    pub workers: usize,
}

impl Default for RyserOptions {
    fn default() -> Self {
        Self {
            max_dim: RYSER_MAX_DIM,
            workers: 1,
        }
    }
}

fn check_nonnegative_square(a: &DenseMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "permanent needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.cols();
    if let Some(k) = a.as_slice().iter().position(|&x| x < 0.0) {
        return Err(Error::Domain {
            row: k / n,
            col: k % n,
            value: a.as_slice()[k],
            reason: "permanent entries must be nonnegative",
        });
    }
    Ok(())
}

/// Divides each row by its largest entry. Returns the scaled matrix and
/// `Σ ln(row max)`, or `None` if some row is identically zero.
fn normalize_rows(a: &DenseMatrix) -> Option<(DenseMatrix, f64)> {
    let n = a.rows();
    let mut log_scale = 0.0;
    let mut scaled = a.clone();
    for i in 0..n {
        let d = a.row(i).iter().copied().fold(0.0, f64::max);
        if d == 0.0 {
            return None;
        }
        log_scale += d.ln();
        for j in 0..n {
            scaled[(i, j)] /= d;
        }
    }
    Some((scaled, log_scale))
}

/// Sum over all `n!` permutations of `∏ a_{i,π(i)}`, by depth-first
/// expansion along rows.
pub fn permanent_naive(a: &DenseMatrix) -> Result<LogNonneg> {
    check_nonnegative_square(a)?;
    let n = a.rows();
    if n > NAIVE_MAX_DIM {
        return Err(Error::SizeGuard {
            method: "naive permanent",
            dim: n,
            max: NAIVE_MAX_DIM,
        });
    }
    let Some((scaled, log_scale)) = normalize_rows(a) else {
        return Ok(LogNonneg::ZERO);
    };

    fn expand(a: &DenseMatrix, row: usize, used: u32) -> f64 {
        let n = a.rows();
        if row == n {
            return 1.0;
        }
        let mut total = 0.0;
        for j in 0..n {
            if used & (1 << j) == 0 {
                let x = a[(row, j)];
                if x != 0.0 {
                    total += x * expand(a, row + 1, used | (1 << j));
                }
            }
        }
        total
    }

    let value = expand(&scaled, 0, 0);
    if value == 0.0 {
        return Ok(LogNonneg::ZERO);
    }
    Ok(LogNonneg::from_ln(value.ln() + log_scale))
}

/// Ryser's formula with the default guard of [`RYSER_MAX_DIM`] and one worker.
pub fn permanent_ryser(a: &DenseMatrix) -> Result<LogNonneg> {
    permanent_ryser_with(a, &RyserOptions::default())
}

/// Ryser's formula, Nijenhuis–Wilf form:
///
/// `perm(A) = (−1)^{n−1} · 2 · Σ_{S ⊆ [n−1]} (−1)^{|S|} ∏_i (x_i + Σ_{j∈S} a_ij)`
/// with `x_i = a_{i,n} − ½ Σ_j a_ij`.
///
/// The `2^{n−1}` subsets are split into a fixed number of contiguous Gray-code
/// ranges independent of `workers`, each summed with compensation; the range
/// sums are combined in order, so the result is bit-identical for any worker
/// count.
pub fn permanent_ryser_with(a: &DenseMatrix, opts: &RyserOptions) -> Result<LogNonneg> {
    check_nonnegative_square(a)?;
    let n = a.rows();
    let max = opts.max_dim.min(RYSER_HARD_MAX_DIM);
    if n > max {
        return Err(Error::SizeGuard {
            method: "Ryser permanent",
            dim: n,
            max,
        });
    }
    if !has_perfect_matching(a) {
        return Ok(LogNonneg::ZERO);
    }
    let Some((scaled, log_scale)) = normalize_rows(a) else {
        return Ok(LogNonneg::ZERO);
    };
    if n == 1 {
        return Ok(LogNonneg::from_ln(log_scale));
    }

    // Column-major copy of the first n−1 columns for the Gray-code updates.
    let cols: Vec<Vec<f64>> = (0..n - 1)
        .map(|j| (0..n).map(|i| scaled[(i, j)]).collect())
        .collect();
    let shift: Vec<f64> = (0..n)
        .map(|i| scaled[(i, n - 1)] - 0.5 * scaled.row(i).iter().sum::<f64>())
        .collect();

    let subsets: u64 = 1 << (n - 1);
    let chunk_bits = RYSER_CHUNKS_LOG2.min((n - 1) as u32);
    let chunks = 1usize << chunk_bits;
    let per_chunk = subsets >> chunk_bits;

    let partials = map_partitions(chunks, opts.workers, |c| {
        let start = c as u64 * per_chunk;
        ryser_range(&cols, &shift, start, start + per_chunk)
    });
    let mut total = CompensatedSum::default();
    for p in partials {
        total.add(p);
    }
    let sign = if (n - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let value = sign * 2.0 * total.value();
    if !(value > 0.0) {
        return Err(Error::Cancellation { value });
    }
    Ok(LogNonneg::from_ln(value.ln() + log_scale))
}

/// Signed sum over Gray-code indices `start..end`.
fn ryser_range(cols: &[Vec<f64>], shift: &[f64], start: u64, end: u64) -> f64 {
    let n = shift.len();
    let mut gray = start ^ (start >> 1);
    let mut sums = shift.to_vec();
    for (j, col) in cols.iter().enumerate() {
        if gray & (1 << j) != 0 {
            for (s, x) in sums.iter_mut().zip(col) {
                *s += x;
            }
        }
    }
    let mut sign = if gray.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let mut acc = CompensatedSum::default();
    acc.add(sign * sums.iter().product::<f64>());

    for k in start + 1..end {
        let j = k.trailing_zeros() as usize;
        let bit = 1u64 << j;
        gray ^= bit;
        let delta = if gray & bit != 0 { 1.0 } else { -1.0 };
        let col = &cols[j];
        let mut prod = 1.0;
        for i in 0..n {
            sums[i] += delta * col[i];
            prod *= sums[i];
        }
        sign = -sign;
        acc.add(sign * prod);
    }
    acc.value()
}

/// Whether the support of `a` admits a perfect matching (Kuhn's augmenting
/// paths); exactly the condition for a nonnegative matrix to have a positive
/// permanent.
fn has_perfect_matching(a: &DenseMatrix) -> bool {
    let n = a.rows();
    let mut match_col: Vec<Option<usize>> = vec![None; n];

    fn augment(
        a: &DenseMatrix,
        row: usize,
        seen: &mut [bool],
        match_col: &mut [Option<usize>],
    ) -> bool {
        for j in 0..a.cols() {
            if a[(row, j)] > 0.0 && !seen[j] {
                seen[j] = true;
                if match_col[j].is_none_or(|r| augment(a, r, seen, match_col)) {
                    match_col[j] = Some(row);
                    return true;
                }
            }
        }
        false
    }

    (0..n).all(|row| {
        let mut seen = vec![false; n];
        augment(a, row, &mut seen, &mut match_col)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logmath::log_factorial;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_positive(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(0.05..2.0)).unwrap()
    }

    fn rel(a: LogNonneg, b: LogNonneg) -> f64 {
        (a.ln() - b.ln()).exp_m1().abs()
    }

    #[test]
    fn identity_and_ones() {
        let id = DenseMatrix::identity(3);
        assert_eq!(permanent_naive(&id).unwrap().ln(), 0.0);
        assert!(permanent_ryser(&id).unwrap().ln().abs() < 1e-15);
        let ones = DenseMatrix::from_fn(3, 3, |_, _| 1.0).unwrap();
        assert!((permanent_naive(&ones).unwrap().ln() - 6f64.ln()).abs() < 1e-15);
        assert!((permanent_ryser(&ones).unwrap().ln() - 6f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn half_matrix_of_size_four() {
        let half = DenseMatrix::from_fn(4, 4, |_, _| 0.5).unwrap();
        assert!((permanent_naive(&half).unwrap().ln() - 1.5f64.ln()).abs() < 1e-15);
        assert!((permanent_ryser(&half).unwrap().ln() - 1.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn ryser_matches_naive_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for n in 1..=8 {
            let a = random_positive(&mut rng, n);
            let naive = permanent_naive(&a).unwrap();
            let ryser = permanent_ryser(&a).unwrap();
            assert!(rel(naive, ryser) <= 1e-10, "n={n}: {naive:?} vs {ryser:?}");
        }
    }

    #[test]
    fn zero_permanent() {
        // rows 0 and 1 can only use column 0
        let a = DenseMatrix::from_rows(vec![
            vec![1.0, 0.0, 0.0],
            vec![2.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        assert!(permanent_naive(&a).unwrap().is_zero());
        assert!(permanent_ryser(&a).unwrap().is_zero());
        let zero_row = DenseMatrix::from_rows(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(permanent_ryser(&zero_row).unwrap().is_zero());
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_positive(&mut rng, 7);
        let base = permanent_ryser(&a).unwrap();
        for _ in 0..5 {
            let mut rp: Vec<usize> = (0..7).collect();
            let mut cp: Vec<usize> = (0..7).collect();
            rp.shuffle(&mut rng);
            cp.shuffle(&mut rng);
            let b = DenseMatrix::from_fn(7, 7, |i, j| a[(rp[i], cp[j])]).unwrap();
            assert!(rel(base, permanent_ryser(&b).unwrap()) <= 1e-10);
            assert!(rel(base, permanent_naive(&b).unwrap()) <= 1e-10);
        }
    }

    #[test]
    fn row_scaling_multiplies_permanent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_positive(&mut rng, 6);
        let s = 3.7;
        let mut b = a.clone();
        for j in 0..6 {
            b[(2, j)] *= s;
        }
        let lhs = permanent_ryser(&b).unwrap().ln();
        let rhs = permanent_ryser(&a).unwrap().ln() + s.ln();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn uniform_block_matrix_closed_form() {
        for m in 1..=4 {
            for n in 1..=3 {
                let a = build_block_matrix(&PositiveBlockMatrix::uniform(m), n).unwrap();
                let mn = (m * n) as u64;
                let want = log_factorial(mn) - mn as f64 * (m as f64).ln();
                let got = permanent_ryser(a.matrix()).unwrap().ln();
                assert!(
                    (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                    "m={m} n={n}"
                );
                if m * n <= 10 {
                    let naive = permanent_naive(a.matrix()).unwrap().ln();
                    assert!((naive - want).abs() <= 1e-10 * want.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn block_expansion_layout() {
        let a = build_block_matrix(&PositiveBlockMatrix::uniform(2), 2).unwrap();
        assert!(a.matrix().as_slice().iter().all(|&x| x == 0.5));
        let three =
            build_block_matrix(&PositiveBlockMatrix::from_rows(vec![vec![3.0]]).unwrap(), 4)
                .unwrap();
        assert_eq!(three.matrix().rows(), 4);
        assert!(three.matrix().as_slice().iter().all(|&x| x == 3.0));

        let b = PositiveBlockMatrix::two_block(0.5).unwrap();
        let a = build_block_matrix(&b, 2).unwrap();
        let expect = [
            [0.75, 0.75, 0.25, 0.25],
            [0.75, 0.75, 0.25, 0.25],
            [0.25, 0.25, 0.75, 0.75],
            [0.25, 0.25, 0.75, 0.75],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a.matrix()[(i, j)], expect[i][j]);
                assert_eq!(a.matrix()[(i, j)], b[((i / 2), (j / 2))]);
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_positive(&mut rng, 16);
        let one = permanent_ryser_with(
            &a,
            &RyserOptions {
                workers: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let four = permanent_ryser_with(
            &a,
            &RyserOptions {
                workers: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(one.ln(), four.ln());
    }

    #[test]
    fn guards_and_domain_errors() {
        let big = DenseMatrix::from_fn(13, 13, |_, _| 1.0).unwrap();
        assert!(matches!(
            permanent_naive(&big),
            Err(Error::SizeGuard { .. })
        ));
        let huge = DenseMatrix::from_fn(31, 31, |_, _| 1.0).unwrap();
        assert!(matches!(
            permanent_ryser(&huge),
            Err(Error::SizeGuard { max: 30, .. })
        ));
        let neg = DenseMatrix::from_rows(vec![vec![1.0, -1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(permanent_ryser(&neg), Err(Error::Domain { .. })));
        assert!(permanent_naive(&DenseMatrix::zeros(2, 3)).is_err());
        assert!(expand_blocks(&DenseMatrix::identity(2), 0).is_err());
    }
}
