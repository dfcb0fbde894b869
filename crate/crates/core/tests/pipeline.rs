//! End-to-end checks across modules through the public API.

use permlab_core::asymptotics::{fluctuation_determinant, predict_ratio};
use permlab_core::fluctuations::{adjugate_constant_c, verify_lemma_identity};
use permlab_core::kernel::{bridge_potentials, fredholm_determinant, KernelSpec};
use permlab_core::logmath::log_factorial;
use permlab_core::permanent::{build_block_matrix, permanent_ryser};
use permlab_core::scaling::{sinkhorn_scale, DEFAULT_MAX_ITER, DEFAULT_TOL};
use permlab_core::tables::{block_permanent_ratio, example2_exact_ratio};
use permlab_core::{DenseMatrix, PositiveBlockMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn ryser_on_block_expansions_matches_table_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    for (m, n) in [(2, 3), (3, 2), (2, 8), (4, 4), (3, 7)] {
        let b = PositiveBlockMatrix::new(
            DenseMatrix::from_fn(m, m, |_, _| rng.gen_range(0.1..2.0)).unwrap(),
        )
        .unwrap();
        let ryser = permanent_ryser(build_block_matrix(&b, n).unwrap().matrix())
            .unwrap()
            .ln()
            - log_factorial((m * n) as u64);
        let tables = block_permanent_ratio(&b, n as u32).unwrap().log_ratio;
        assert!((ryser - tables).exp_m1().abs() <= 1e-10, "m={m} n={n}");
    }
    let b = PositiveBlockMatrix::two_block(0.5).unwrap();
    let ryser = permanent_ryser(build_block_matrix(&b, 4).unwrap().matrix())
        .unwrap()
        .ln()
        - log_factorial(8);
    assert!(
        (ryser - example2_exact_ratio(0.5, 4).unwrap())
            .exp_m1()
            .abs()
            <= 1e-10
    );
}

#[test]
fn scaled_seed_feeds_every_module_consistently() {
    let mut rng = ChaCha8Rng::seed_from_u64(302);
    let b = PositiveBlockMatrix::new(
        DenseMatrix::from_fn(3, 3, |_, _| rng.gen_range(0.2..3.0)).unwrap(),
    )
    .unwrap();
    let sol = sinkhorn_scale(&b, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let det = fluctuation_determinant(sol.t()).unwrap();

    // m·c is the fluctuation determinant
    let c = adjugate_constant_c(sol.t()).unwrap();
    assert!((3.0 * c - det).abs() < 1e-10);
    assert!(verify_lemma_identity(sol.t(), 1e-9).unwrap().pass);

    // the block kernel on N = 3n reproduces the same determinant and rate
    let kernel = KernelSpec::block(&b);
    for n in [2usize, 5] {
        let bridge = bridge_potentials(&kernel, 3 * n, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((fredholm_determinant(&bridge).unwrap() - det).abs() < 1e-10);
        let pred = predict_ratio(&b, n as u32, &sol).unwrap();
        assert!(
            ((3 * n) as f64 * bridge.lambda_rate - pred.log_leading).abs()
                <= 1e-10 * pred.log_leading.abs()
        );
    }

    // and the prediction tracks the exact sum
    let exact = block_permanent_ratio(&b, 60).unwrap().log_ratio;
    let pred = predict_ratio(&b, 60, &sol).unwrap().log_predicted_ratio;
    assert!((exact - pred).exp_m1().abs() < 0.02);
}
