//! Sequential and parallel execution must agree bit for bit.

use hhgnn_core::nn::{matmul_with, sparse_dense_matmul_with, Tensor2};
use hhgnn_core::{Exec, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, seed: u64) -> Tensor2<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor2::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn dense_policies_agree() {
    let a = random(300, 120, 1);
    let b = random(120, 90, 2);
    let s = matmul_with(&a, &b, Exec::Sequential).unwrap();
    assert_eq!(s, matmul_with(&a, &b, Exec::Parallel).unwrap());
    assert_eq!(s, matmul_with(&a, &b, Exec::Auto).unwrap());
}

#[test]
fn sparse_policies_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 2000;
    let triplets: Vec<(usize, usize, f64)> = (0..20_000)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0.0..1.0)))
        .collect();
    let m = SparseMatrix::from_triplets(n, n, triplets).unwrap();
    let d = random(n, 32, 4);
    let s = sparse_dense_matmul_with(&m, &d, Exec::Sequential).unwrap();
    assert_eq!(s, sparse_dense_matmul_with(&m, &d, Exec::Parallel).unwrap());
}
