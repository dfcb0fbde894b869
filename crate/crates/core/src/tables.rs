//! Exact `perm(A^{(m,n)}) / (mn)!` by summing over contingency tables.
//!
//! A permutation of `[mn]` sends `q_{r,s}` elements of row block `r` into
//! column block `s`; the matrix `Q = (q_{r,s})` has every row and column sum
//! equal to `n`, and exactly `(n!)^{2m} / ∏ q_{r,s}!` permutations share the
//! same `Q`. Since `A^{(m,n)}` is constant on blocks,
//!
//! ```text
//! perm(A^{(m,n)}) / (mn)! = Σ_Q (n!)^{2m} / (∏ q_{r,s}! · (mn)!) · ∏ b_{r,s}^{q_{r,s}}
//! ```
//!
//! which is evaluated here term by term in the log domain.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::logmath::{log_factorial, log_sum_exp, xlogy, LogSumExp};
use crate::parallel::map_partitions;
use crate::scaling::PositiveBlockMatrix;

/// Default cap on the estimated number of tables visited by one block sum.
pub const DEFAULT_TABLE_BUDGET: f64 = 5e8;

/// An m×m nonnegative integer matrix with every row and column sum `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    m: usize,
    n: u32,
    q: Vec<u32>,
}

impl ContingencyTable {
    pub fn new(m: usize, n: u32, q: Vec<u32>) -> Result<Self> {
        if m == 0 || q.len() != m * m {
            return Err(Error::Dimension(format!(
                "a {m}x{m} table needs {} entries, got {}",
                m * m,
                q.len()
            )));
        }
        for r in 0..m {
            let row: u32 = q[r * m..(r + 1) * m].iter().sum();
            let col: u32 = (0..m).map(|s| q[s * m + r]).sum();
            if row != n || col != n {
                return Err(Error::InvalidArgument(format!(
                    "row/column {r} sums to {row}/{col}, expected {n}"
                )));
            }
        }
        Ok(Self { m, n, q })
    }

    pub fn from_rows(n: u32, rows: &[&[u32]]) -> Result<Self> {
        Self::new(
            rows.len(),
            n,
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        )
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn entries(&self) -> &[u32] {
        &self.q
    }

    pub fn get(&self, r: usize, s: usize) -> u32 {
        self.q[r * self.m + s]
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        self.q.chunks(self.m).map(<[u32]>::to_vec).collect()
    }
}

impl Serialize for ContingencyTable {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

/// Depth-first odometer over the (m−1)² free entries in row-major order. The
/// last column and last row are forced by the margins. Each free entry is
/// restricted to `[lo, hi]`, where `hi` keeps the partial row and column sums
/// at most `n` and `lo` keeps the forced last-column entries summing to at
/// most `n`; with both bounds every prefix extends to a table, so the walk
/// never backtracks out of a dead end.
struct TableWalker {
    m: usize,
    k: usize,
    n: i64,
    free: Vec<i64>,
    row_sum: Vec<i64>,
    col_sum: Vec<i64>,
    last_col_sum: i64,
    fixed_prefix: usize,
    started: bool,
    done: bool,
}

impl TableWalker {
    /// Walks all tables, or only those whose first free entry is `first`.
    fn new(m: usize, n: u32, first: Option<u32>) -> Self {
        assert!(m >= 1, "tables need m >= 1");
        let k = (m - 1) * (m - 1);
        let mut w = Self {
            m,
            k,
            n: n as i64,
            free: vec![0; k],
            row_sum: vec![0; m.saturating_sub(1)],
            col_sum: vec![0; m.saturating_sub(1)],
            last_col_sum: 0,
            fixed_prefix: 0,
            started: false,
            done: false,
        };
        if let (Some(v), true) = (first, k > 0) {
            let (lo, hi) = w.bounds(0);
            if (v as i64) < lo || (v as i64) > hi {
                w.done = true;
                return w;
            }
            w.set(0, v as i64);
            w.fixed_prefix = 1;
        }
        let from = w.fixed_prefix;
        w.fill(from);
        w
    }

    #[inline]
    fn cell(&self, j: usize) -> (usize, usize) {
        (j / (self.m - 1), j % (self.m - 1))
    }

    #[inline]
    fn bounds(&self, j: usize) -> (i64, i64) {
        let (r, s) = self.cell(j);
        let hi = (self.n - self.row_sum[r]).min(self.n - self.col_sum[s]);
        let cap_after: i64 = (s + 1..self.m - 1).map(|t| self.n - self.col_sum[t]).sum();
        let lo = (self.last_col_sum - self.row_sum[r] - cap_after).max(0);
        (lo, hi)
    }

    #[inline]
    fn set(&mut self, j: usize, v: i64) {
        let (r, s) = self.cell(j);
        self.free[j] = v;
        self.row_sum[r] += v;
        self.col_sum[s] += v;
        if s == self.m - 2 {
            self.last_col_sum += self.n - self.row_sum[r];
        }
    }

    #[inline]
    fn unset(&mut self, j: usize) {
        let (r, s) = self.cell(j);
        if s == self.m - 2 {
            self.last_col_sum -= self.n - self.row_sum[r];
        }
        self.row_sum[r] -= self.free[j];
        self.col_sum[s] -= self.free[j];
    }

    fn fill(&mut self, from: usize) {
        for j in from..self.k {
            let (lo, hi) = self.bounds(j);
            debug_assert!(lo <= hi, "dead end at cell {j}");
            self.set(j, lo);
        }
    }

    /// Moves to the next table; false once exhausted.
    fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        if !self.started {
            self.started = true;
            return true;
        }
        let mut j = self.k;
        while j > self.fixed_prefix {
            j -= 1;
            let v = self.free[j];
            self.unset(j);
            let (_, hi) = self.bounds(j);
            if v < hi {
                self.set(j, v + 1);
                self.fill(j + 1);
                return true;
            }
        }
        self.done = true;
        false
    }

    /// Writes the full m×m table (row-major) into `out`.
    fn write_table(&self, out: &mut [u32]) {
        let m = self.m;
        let n = self.n;
        if m == 1 {
            out[0] = n as u32;
            return;
        }
        let mut last_col_total = 0;
        for r in 0..m - 1 {
            for s in 0..m - 1 {
                out[r * m + s] = self.free[r * (m - 1) + s] as u32;
            }
            let tail = n - self.row_sum[r];
            out[r * m + m - 1] = tail as u32;
            last_col_total += tail;
        }
        for s in 0..m - 1 {
            out[(m - 1) * m + s] = (n - self.col_sum[s]) as u32;
        }
        out[m * m - 1] = (n - last_col_total) as u32;
    }
}

/// Iterator over `𝓜(m, n)` in lexicographic order of the row-major reading.
pub struct ContingencyTables {
    walker: TableWalker,
    n: u32,
}

impl Iterator for ContingencyTables {
    type Item = ContingencyTable;

    fn next(&mut self) -> Option<ContingencyTable> {
        if !self.walker.advance() {
            return None;
        }
        let m = self.walker.m;
        let mut q = vec![0; m * m];
        self.walker.write_table(&mut q);
        Some(ContingencyTable { m, n: self.n, q })
    }
}

/// Every m×m table with all margins `n`, each exactly once. Panics if `m == 0`.
pub fn enumerate_contingency_tables(m: usize, n: u32) -> ContingencyTables {
    ContingencyTables {
        walker: TableWalker::new(m, n, None),
        n,
    }
}

/// Number of partitions used by the parallel block sum: one per value of the
/// first free entry.
fn partition_count(m: usize, n: u32) -> usize {
    if m == 1 {
        1
    } else {
        n as usize + 1
    }
}

/// Calls `f` with every table (row-major slice) whose first free entry equals
/// `part`; for `m == 1` the single partition holds the single table.
fn for_each_in_partition(m: usize, n: u32, part: usize, mut f: impl FnMut(&[u32])) {
    let first = if m == 1 { None } else { Some(part as u32) };
    let mut walker = TableWalker::new(m, n, first);
    let mut buf = vec![0u32; m * m];
    while walker.advance() {
        walker.write_table(&mut buf);
        f(&buf);
    }
}

/// `|𝓜(m, n)|` by enumeration.
pub fn count_contingency_tables(m: usize, n: u32) -> u64 {
    (0..partition_count(m, n))
        .map(|p| {
            let mut c = 0u64;
            for_each_in_partition(m, n, p, |_| c += 1);
            c
        })
        .sum()
}

/// Estimate of `|𝓜(m, n)|` used by the budget guard: exact closed forms for
/// `m ≤ 3`, the Canfield–McKay asymptotic
/// `C(n+m−1, m−1)^{2m} / C(mn+m²−1, m²−1) · e^{1/2}` beyond.
pub fn estimate_table_count(m: usize, n: u32) -> f64 {
    let nf = n as f64;
    match m {
        0 => 0.0,
        1 => 1.0,
        2 => nf + 1.0,
        3 => (nf + 1.0) * (nf + 2.0) * (nf * nf + 3.0 * nf + 4.0) / 8.0,
        _ => {
            let (m64, n64) = (m as u64, n as u64);
            let ln_choose =
                |a: u64, b: u64| log_factorial(a) - log_factorial(b) - log_factorial(a - b);
            let ln = 2.0 * m as f64 * ln_choose(n64 + m64 - 1, m64 - 1)
                - ln_choose(m64 * n64 + m64 * m64 - 1, m64 * m64 - 1)
                + 0.5;
            ln.exp()
        }
    }
}

/// `ln |𝔖_{mn}(Q)| = 2m ln n! − Σ ln q_{r,s}!`.
pub fn pinsky_log_count(q: &ContingencyTable) -> f64 {
    let m = q.m() as f64;
    2.0 * m * log_factorial(q.n() as u64)
        - q.entries()
            .iter()
            .map(|&x| log_factorial(x as u64))
            .sum::<f64>()
}

/// Outcome of [`block_permanent_ratio`].
#[derive(Clone, Debug, Serialize)]
pub struct BlockPermanentResult {
    /// `ln[perm(A^{(m,n)}) / (mn)!]`.
    pub log_ratio: f64,
    pub table_count: u64,
    /// The table carrying the largest term (first in enumeration order on ties).
    pub argmax_table: ContingencyTable,
    /// Log of that largest term.
    pub log_max_term: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct EnumerationOptions {
    pub budget: f64,
    pub workers: usize,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_TABLE_BUDGET,
            workers: 1,
        }
    }
}

/// Exact `ln[perm(A^{(m,n)}) / (mn)!]` for a strictly positive seed.
pub fn block_permanent_ratio(b: &PositiveBlockMatrix, n: u32) -> Result<BlockPermanentResult> {
    block_permanent_ratio_with(b.matrix(), n, &EnumerationOptions::default())
}

/// As [`block_permanent_ratio`], for any nonnegative square seed; tables
/// placing mass on a zero entry contribute nothing.
pub fn block_permanent_ratio_with(
    b: &DenseMatrix,
    n: u32,
    opts: &EnumerationOptions,
) -> Result<BlockPermanentResult> {
    if !b.is_square() {
        return Err(Error::Dimension(format!(
            "seed must be square, got {}x{}",
            b.rows(),
            b.cols()
        )));
    }
    let m = b.rows();
    if let Some(k) = b.as_slice().iter().position(|&x| x < 0.0) {
        return Err(Error::Domain {
            row: k / m,
            col: k % m,
            value: b.as_slice()[k],
            reason: "block entries must be nonnegative",
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "block size n must be at least 1".into(),
        ));
    }
    let estimate = estimate_table_count(m, n);
    if estimate > opts.budget {
        return Err(Error::Budget {
            estimate,
            budget: opts.budget,
        });
    }

    // weights[c][q] = q ln b_c − ln q!
    let weights: Vec<Vec<f64>> = b
        .as_slice()
        .iter()
        .map(|&bc| {
            (0..=n)
                .map(|q| xlogy(q as f64, bc) - log_factorial(q as u64))
                .collect()
        })
        .collect();
    let constant = 2.0 * m as f64 * log_factorial(n as u64) - log_factorial(m as u64 * n as u64);

    struct Partial {
        lse: LogSumExp,
        count: u64,
        best: f64,
        best_table: Option<Vec<u32>>,
    }

    let partials = map_partitions(partition_count(m, n), opts.workers, |part| {
        let mut p = Partial {
            lse: LogSumExp::new(),
            count: 0,
            best: f64::NEG_INFINITY,
            best_table: None,
        };
        for_each_in_partition(m, n, part, |q| {
            let term: f64 = constant
                + q.iter()
                    .zip(&weights)
                    .map(|(&x, w)| w[x as usize])
                    .sum::<f64>();
            p.lse.add(term);
            p.count += 1;
            if term > p.best || p.best_table.is_none() {
                p.best = term;
                p.best_table = Some(q.to_vec());
            }
        });
        p
    });

    let mut lse = LogSumExp::new();
    let mut count = 0;
    let mut best = f64::NEG_INFINITY;
    let mut best_table: Option<Vec<u32>> = None;
    for p in partials {
        lse.merge(&p.lse);
        count += p.count;
        if let Some(t) = p.best_table {
            if p.best > best || best_table.is_none() {
                best = p.best;
                best_table = Some(t);
            }
        }
    }
    let q = best_table.expect("every m, n has at least one table");
    Ok(BlockPermanentResult {
        log_ratio: lse.ln(),
        table_count: count,
        argmax_table: ContingencyTable { m, n, q },
        log_max_term: best,
    })
}

/// `ln[perm(A^{(2,n)}) / (2n)!]` for `B = ½[[1+δ, 1−δ], [1−δ, 1+δ]]` as the
/// (n+1)-term sum over the number `ν` of upper-left block hits.
pub fn example2_exact_ratio(delta: f64, n: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in [0, 1], got {delta}"
        )));
    }
    let n64 = n as u64;
    let base =
        4.0 * log_factorial(n64) - 2.0 * n as f64 * std::f64::consts::LN_2 - log_factorial(2 * n64);
    let terms: Vec<f64> = (0..=n64)
        .map(|nu| {
            let diag = 2.0 * nu as f64;
            let off = 2.0 * (n64 - nu) as f64;
            base - 2.0 * log_factorial(nu) - 2.0 * log_factorial(n64 - nu)
                + xlogy(diag, 1.0 + delta)
                + xlogy(off, 1.0 - delta)
        })
        .collect();
    log_sum_exp(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permanent::{expand_blocks, permanent_naive, permanent_ryser};
    use crate::scaling::{sinkhorn_scale, DEFAULT_MAX_ITER, DEFAULT_TOL};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    // All m×m grids with entries in 0..=n, filtered by margins.
    fn brute_force_tables(m: usize, n: u32) -> Vec<Vec<u32>> {
        let cells = m * m;
        let base = n as u64 + 1;
        let mut out = Vec::new();
        for code in 0..base.pow(cells as u32) {
            let mut c = code;
            let mut q = vec![0u32; cells];
            for x in q.iter_mut().rev() {
                *x = (c % base) as u32;
                c /= base;
            }
            let ok = (0..m).all(|r| q[r * m..(r + 1) * m].iter().sum::<u32>() == n)
                && (0..m).all(|s| (0..m).map(|r| q[r * m + s]).sum::<u32>() == n);
            if ok {
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn two_by_two_tables() {
        let tables: Vec<_> = enumerate_contingency_tables(2, 3)
            .map(|t| t.to_rows())
            .collect();
        let want: Vec<Vec<Vec<u32>>> = (0..=3)
            .map(|v| vec![vec![v, 3 - v], vec![3 - v, v]])
            .collect();
        assert_eq!(tables, want);
    }

    #[test]
    fn unit_margins_give_permutation_matrices() {
        let tables: Vec<_> = enumerate_contingency_tables(3, 1).collect();
        assert_eq!(tables.len(), 6);
        for t in &tables {
            assert_eq!(t.entries().iter().filter(|&&x| x == 1).count(), 3);
        }
    }

    #[test]
    fn enumeration_matches_brute_force_in_lexicographic_order() {
        for (m, n) in [
            (1, 3),
            (2, 4),
            (3, 0),
            (3, 1),
            (3, 2),
            (3, 3),
            (3, 4),
            (4, 1),
            (4, 2),
        ] {
            let got: Vec<Vec<u32>> = enumerate_contingency_tables(m, n)
                .map(|t| t.entries().to_vec())
                .collect();
            let want = brute_force_tables(m, n);
            assert_eq!(got, want, "m={m} n={n}");
        }
        assert_eq!(enumerate_contingency_tables(3, 2).count(), 21);
    }

    #[test]
    fn counts_match_closed_forms() {
        for n in 0..=12 {
            assert_eq!(
                count_contingency_tables(3, n) as f64,
                estimate_table_count(3, n)
            );
            assert_eq!(
                count_contingency_tables(2, n) as f64,
                estimate_table_count(2, n)
            );
        }
        // m = 4: Ehrhart values 1, 24, 282, 2008 for n = 0..3
        let counts: Vec<u64> = (0..=3).map(|n| count_contingency_tables(4, n)).collect();
        assert_eq!(counts, vec![1, 24, 282, 2008]);
        let rough = estimate_table_count(4, 10) / count_contingency_tables(4, 10) as f64;
        assert!(rough > 0.5 && rough < 2.0, "estimate ratio {rough}");
    }

    #[test]
    fn pinsky_examples() {
        let q = ContingencyTable::from_rows(2, &[&[1, 1], &[1, 1]]).unwrap();
        assert!((pinsky_log_count(&q) - 16f64.ln()).abs() < 1e-14);
        let id = ContingencyTable::from_rows(1, &[&[1, 0], &[0, 1]]).unwrap();
        assert_eq!(pinsky_log_count(&id), 0.0);
        let diag = ContingencyTable::from_rows(2, &[&[2, 0], &[0, 2]]).unwrap();
        assert!((pinsky_log_count(&diag) - 4f64.ln()).abs() < 1e-14);
    }

    // Count permutations of [mn] by their block-occupancy table.
    fn occupancy_histogram(m: usize, n: usize) -> std::collections::HashMap<Vec<u32>, u64> {
        fn rec(
            i: usize,
            used: u32,
            q: &mut Vec<u32>,
            m: usize,
            n: usize,
            out: &mut std::collections::HashMap<Vec<u32>, u64>,
        ) {
            let size = m * n;
            if i == size {
                *out.entry(q.clone()).or_default() += 1;
                return;
            }
            for j in 0..size {
                if used & (1 << j) == 0 {
                    q[(i / n) * m + j / n] += 1;
                    rec(i + 1, used | (1 << j), q, m, n, out);
                    q[(i / n) * m + j / n] -= 1;
                }
            }
        }
        let mut out = std::collections::HashMap::new();
        rec(0, 0, &mut vec![0; m * m], m, n, &mut out);
        out
    }

    #[test]
    fn pinsky_count_matches_exhaustive_permutation_census() {
        for (m, n) in [(2, 2), (2, 3), (3, 2), (2, 4)] {
            let hist = occupancy_histogram(m, n);
            let tables: Vec<_> = enumerate_contingency_tables(m, n as u32).collect();
            assert_eq!(hist.len(), tables.len());
            for t in tables {
                let exact = hist[t.entries()] as f64;
                assert!((pinsky_log_count(&t) - exact.ln()).abs() < 1e-12, "{t:?}");
            }
        }
    }

    #[test]
    fn tables_partition_all_permutations() {
        for m in 1..=4usize {
            for n in 0..=6u32 {
                let total = log_sum_exp(
                    &enumerate_contingency_tables(m, n)
                        .map(|t| pinsky_log_count(&t))
                        .collect::<Vec<_>>(),
                )
                .unwrap();
                let want = log_factorial(m as u64 * n as u64);
                assert!((total - want).abs() <= 1e-10 * want.max(1.0), "m={m} n={n}");
            }
        }
    }

    #[test]
    fn uniform_seed_ratio() {
        let r = block_permanent_ratio(&PositiveBlockMatrix::uniform(2), 3).unwrap();
        assert!((r.log_ratio + 6.0 * LN_2).abs() < 1e-13);
        assert_eq!(r.table_count, 4);
    }

    #[test]
    fn degenerate_identity_seed() {
        let r = block_permanent_ratio_with(
            &DenseMatrix::identity(2),
            3,
            &EnumerationOptions::default(),
        )
        .unwrap();
        assert!((r.log_ratio - (1.0f64 / 20.0).ln()).abs() < 1e-13);
        assert_eq!(r.argmax_table.to_rows(), vec![vec![3, 0], vec![0, 3]]);
    }

    #[test]
    fn random_seed_matches_ryser() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..5 {
            let b = DenseMatrix::from_fn(2, 2, |_, _| rng.gen_range(0.1..3.0)).unwrap();
            let exact = block_permanent_ratio_with(&b, 3, &EnumerationOptions::default()).unwrap();
            let ryser = permanent_ryser(expand_blocks(&b, 3).unwrap().matrix())
                .unwrap()
                .ln()
                - log_factorial(6);
            assert!((exact.log_ratio - ryser).exp_m1().abs() <= 1e-10);
        }
    }

    #[test]
    fn small_cases_match_naive_permanent() {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        for m in 1..=3usize {
            for n in 1..=(10 / m) as u32 {
                let b = DenseMatrix::from_fn(m, m, |_, _| rng.gen_range(0.1..3.0)).unwrap();
                let exact =
                    block_permanent_ratio_with(&b, n, &EnumerationOptions::default()).unwrap();
                let naive = permanent_naive(expand_blocks(&b, n as usize).unwrap().matrix())
                    .unwrap()
                    .ln()
                    - log_factorial(m as u64 * n as u64);
                assert!(
                    (exact.log_ratio - naive).exp_m1().abs() <= 1e-10,
                    "m={m} n={n}"
                );
            }
        }
    }

    #[test]
    fn transpose_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let b = DenseMatrix::from_fn(3, 3, |_, _| rng.gen_range(0.1..3.0)).unwrap();
        let r1 = block_permanent_ratio_with(&b, 12, &EnumerationOptions::default()).unwrap();
        let r2 =
            block_permanent_ratio_with(&b.transpose(), 12, &EnumerationOptions::default()).unwrap();
        assert!((r1.log_ratio - r2.log_ratio).abs() <= 1e-12 * r1.log_ratio.abs().max(1.0));
    }

    #[test]
    fn dominant_table_tracks_scaled_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(58);
        let b = PositiveBlockMatrix::new(
            DenseMatrix::from_fn(2, 2, |_, _| rng.gen_range(0.2..3.0)).unwrap(),
        )
        .unwrap();
        let n = 400;
        let r = block_permanent_ratio(&b, n).unwrap();
        let sol = sinkhorn_scale(&b, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let mut dist = 0.0f64;
        for rr in 0..2 {
            for s in 0..2 {
                dist = dist
                    .max((r.argmax_table.get(rr, s) as f64 / n as f64 - sol.t()[(rr, s)]).abs());
            }
        }
        assert!(dist <= 2.0 / (n as f64).sqrt(), "distance {dist}");
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let b = DenseMatrix::from_fn(3, 3, |_, _| rng.gen_range(0.1..3.0)).unwrap();
        let one = block_permanent_ratio_with(
            &b,
            30,
            &EnumerationOptions {
                workers: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let four = block_permanent_ratio_with(
            &b,
            30,
            &EnumerationOptions {
                workers: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(one.log_ratio, four.log_ratio);
        assert_eq!(one.table_count, four.table_count);
        assert_eq!(one.argmax_table, four.argmax_table);
    }

    #[test]
    fn budget_guard() {
        let b = DenseMatrix::uniform(5);
        match block_permanent_ratio_with(&b, 100, &EnumerationOptions::default()) {
            Err(Error::Budget { estimate, .. }) => assert!(estimate > DEFAULT_TABLE_BUDGET),
            other => panic!("expected budget error, got {other:?}"),
        }
        let tight = EnumerationOptions {
            budget: 10.0,
            workers: 1,
        };
        assert!(block_permanent_ratio_with(&DenseMatrix::uniform(2), 20, &tight).is_err());
    }

    #[test]
    fn example2_closed_sum() {
        for n in [1u32, 5, 40] {
            assert!((example2_exact_ratio(0.0, n).unwrap() + 2.0 * n as f64 * LN_2).abs() < 1e-10);
        }
        assert!((example2_exact_ratio(1.0, 3).unwrap() - (1.0f64 / 20.0).ln()).abs() < 1e-13);
        let b = PositiveBlockMatrix::two_block(0.5).unwrap();
        let ryser = permanent_ryser(expand_blocks(b.matrix(), 4).unwrap().matrix())
            .unwrap()
            .ln()
            - log_factorial(8);
        assert!(
            (example2_exact_ratio(0.5, 4).unwrap() - ryser)
                .exp_m1()
                .abs()
                <= 1e-10
        );
        for n in [3u32, 17, 60] {
            let general = block_permanent_ratio(&b, n).unwrap().log_ratio;
            assert!(
                (example2_exact_ratio(0.5, n).unwrap() - general).abs() <= 1e-12 * general.abs()
            );
        }
        assert!(example2_exact_ratio(1.5, 3).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(ContingencyTable::from_rows(2, &[&[1, 1], &[2, 0]]).is_err());
        assert!(ContingencyTable::new(2, 1, vec![1, 0, 0]).is_err());
    }
}
