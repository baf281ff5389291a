mod common;

use ashbm::analysis::theoretical_bound;
use ashbm::matrix::Matrix;
use ashbm::sampling::{lambda_max_sup, SampleOp, SamplingScheme, Scale};
use ashbm::spectral::{largest_eigenvalue, spectral_quantities};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(m: usize, n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..m * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Matrix::from_row_major(m, n, values).unwrap()
}

fn dense_s_gradient(sample: &SampleOp, a: &Matrix, r: &[f64]) -> Vec<f64> {
    let s = sample.to_dense(a.rows());
    let at = a.to_nalgebra().transpose();
    let g = at * &s * s.transpose() * DVector::from_column_slice(r);
    g.iter().copied().collect()
}

#[test]
fn pullback_matches_dense_sketch_oracle() {
    let a = random_matrix(15, 8, 1);
    let r: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).sin()).collect();
    for spec in ["uniform:3", "partition:3", "row", "identity"] {
        let scheme = SamplingScheme::from_spec(spec.parse().unwrap(), &a, 2).unwrap();
        let mut sampler = scheme.sampler(3);
        for _ in 0..20 {
            let sample = sampler.draw();
            let w = sample.apply_transpose(&r);
            let fast = sample.pullback(&a, &w);
            let oracle = dense_s_gradient(&sample, &a, &r);
            for (f, o) in fast.iter().zip(&oracle) {
                assert!((f - o).abs() <= 1e-12 * (1.0 + o.abs()), "{spec}: {f} vs {o}");
            }
        }
    }
}

#[test]
fn partition_block_frequencies_follow_frobenius_weights() {
    let a = random_matrix(60, 10, 4);
    let scheme = SamplingScheme::from_spec("partition:7".parse().unwrap(), &a, 4).unwrap();
    let blocks = scheme.partition().unwrap().blocks().to_vec();
    let total = a.fro_norm_sq();
    let draws = 100_000;
    let mut counts = vec![0usize; blocks.len()];
    let mut sampler = scheme.sampler(5);
    for _ in 0..draws {
        let SampleOp::Rows { rows, .. } = sampler.draw() else { panic!("partition draws rows") };
        let idx = blocks.iter().position(|b| *b == rows).expect("drawn block is a partition block");
        counts[idx] += 1;
    }
    for (block, &count) in blocks.iter().zip(&counts) {
        let p: f64 = block.iter().map(|&i| a.row_norms_sq()[i]).sum::<f64>() / total;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        let dev = (count as f64 - draws as f64 * p).abs();
        assert!(dev <= 4.0 * sd, "block {block:?}: {count} vs {}", draws as f64 * p);
    }
}

#[test]
fn single_row_frequencies_follow_row_norms() {
    let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0], [1.0, 1.0], [3.0, 0.0]]).unwrap();
    let scheme = SamplingScheme::single_row(&a).unwrap();
    let mut sampler = scheme.sampler(1);
    let draws = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        let SampleOp::Rows { rows, scale } = sampler.draw() else { panic!() };
        let i = rows[0];
        let Scale::Uniform(s) = scale else { panic!() };
        assert!((s * s * a.row_norms_sq()[i] - 1.0).abs() < 1e-15);
        counts[i] += 1;
    }
    for i in 0..4 {
        let p = a.row_norms_sq()[i] / a.fro_norm_sq();
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((counts[i] as f64 - draws as f64 * p).abs() <= 4.0 * sd);
    }
}

#[test]
fn uniform_block_expected_gram_is_scaled_identity() {
    // Normalised so that ||A||_F = 1 and E[S S^T] = I.
    let raw = random_matrix(12, 5, 6);
    let scale = 1.0 / raw.fro_norm_sq().sqrt();
    let a = Matrix::from_row_major(12, 5, raw.to_dense_values().iter().map(|v| v * scale).collect()).unwrap();
    let scheme = SamplingScheme::uniform_block(&a, 4).unwrap();
    let draws = 4_000_000;
    let mut diag = vec![0.0; 12];
    let mut sampler = scheme.sampler(7);
    for _ in 0..draws {
        let SampleOp::Rows { rows, scale } = sampler.draw() else { panic!() };
        let Scale::Uniform(s) = scale else { panic!() };
        for i in rows {
            diag[i] += s * s;
        }
    }
    let target = 1.0 / a.fro_norm_sq();
    for (i, d) in diag.iter().enumerate() {
        let est = d / draws as f64;
        assert!((est - target).abs() <= 3e-3, "E[SS^T]_{i}{i} = {est}");
    }
    // Off-diagonal entries of S S^T are identically zero for row selections.
    let sample = sampler.draw();
    let s = sample.to_dense(12);
    let g = &s * s.transpose();
    for i in 0..12 {
        for j in 0..12 {
            if i != j {
                assert_eq!(g[(i, j)], 0.0);
            }
        }
    }
}

#[test]
fn uniform_lambda_max_matches_subset_enumeration() {
    let a = random_matrix(5, 3, 8);
    let scheme = SamplingScheme::uniform_block(&a, 2).unwrap();
    let dense = a.to_nalgebra();
    let fro = a.fro_norm_sq();
    let mut best: f64 = 0.0;
    for i in 0..5 {
        for j in (i + 1)..5 {
            let s = {
                let mut s = DMatrix::zeros(5, 2);
                s[(i, 0)] = (5.0f64 / 2.0).sqrt() / fro.sqrt();
                s[(j, 1)] = (5.0f64 / 2.0).sqrt() / fro.sqrt();
                s
            };
            let m = dense.transpose() * &s * s.transpose() * &dense;
            best = best.max(largest_eigenvalue(&m));
        }
    }
    let lambda = lambda_max_sup(&scheme, &a);
    assert!(!lambda.estimate);
    assert!((lambda.value - best).abs() <= 1e-12 * best);

    let sigma = spectral_quantities(&a).unwrap();
    let report = theoretical_bound(&scheme, &a, 1.0).unwrap();
    let expected = 1.0 - sigma.sigma_min_nonzero.powi(2) / fro / best;
    assert!((report.per_iter_factor - expected).abs() <= 1e-12);
}

#[test]
fn partition_lambda_max_matches_block_spectra() {
    let a = random_matrix(20, 6, 9);
    let scheme = SamplingScheme::from_spec("partition:6".parse().unwrap(), &a, 9).unwrap();
    let dense = a.to_nalgebra();
    let mut best: f64 = 0.0;
    for block in scheme.partition().unwrap().blocks() {
        let rows = dense.select_rows(block.iter());
        let fro: f64 = rows.iter().map(|v| v * v).sum();
        let top = rows.singular_values().max();
        best = best.max(top * top / fro);
    }
    let lambda = lambda_max_sup(&scheme, &a).value;
    assert!((lambda - best).abs() <= 1e-12 * best);
}

#[test]
fn sparse_and_dense_products_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut triplets = Vec::new();
    for i in 0..20 {
        for j in 0..15 {
            if rng.gen_bool(0.3) {
                triplets.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let sparse = Matrix::from_triplets(20, 15, &triplets).unwrap();
    let dense = sparse.to_dense();
    assert!(sparse.is_sparse() && !dense.is_sparse());
    let x: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (s, d) = (sparse.matvec(&x).unwrap(), dense.matvec(&x).unwrap());
    assert!(s.iter().zip(&d).all(|(a, b)| (a - b).abs() <= 1e-13));
    let (s, d) = (sparse.matvec_transpose(&y).unwrap(), dense.matvec_transpose(&y).unwrap());
    assert!(s.iter().zip(&d).all(|(a, b)| (a - b).abs() <= 1e-13));
    assert!((sparse.fro_norm_sq() - dense.fro_norm_sq()).abs() <= 1e-13);
}
