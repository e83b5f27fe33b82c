//! Cross-checks of the SVD against an independent brute-force route:
//! eigenvalues of the Gram matrix AᵀA computed by a locally written cyclic
//! Jacobi eigensolver (no code shared with the production path).

use mcuq_core::matrix::{norm_fro, DenseMatrix};
use mcuq_core::rng::RngStream;
use mcuq_core::svd::truncated_svd;

/// Brute-force symmetric eigenvalues via classical two-sided Jacobi on a
/// plain `Vec<Vec<f64>>`, returned in descending order.
fn gram_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.cols();
    let mut g = vec![vec![0.0f64; n]; n];
    for p in 0..n {
        for q in 0..n {
            let mut acc = 0.0;
            for i in 0..a.rows() {
                acc += a.get(i, p) * a.get(i, q);
            }
            g[p][q] = acc;
        }
    }
    for _sweep in 0..200 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(g[p][q].abs());
            }
        }
        let scale = (0..n).map(|i| g[i][i].abs()).fold(1e-300f64, f64::max);
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if g[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = 0.5 * f64::atan2(2.0 * g[p][q], g[q][q] - g[p][p]);
                let (s, c) = theta.sin_cos();
                for k in 0..n {
                    let gkp = g[k][p];
                    let gkq = g[k][q];
                    g[k][p] = c * gkp - s * gkq;
                    g[k][q] = s * gkp + c * gkq;
                }
                for k in 0..n {
                    let gpk = g[p][k];
                    let gqk = g[q][k];
                    g[p][k] = c * gpk - s * gqk;
                    g[q][k] = s * gpk + c * gqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| g[i][i].max(0.0)).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eig
}

fn random_matrix(m: usize, n: usize, seed: u64, scale: f64) -> DenseMatrix {
    let mut rng = RngStream::new(seed, 0);
    DenseMatrix::from_vec(
        m,
        n,
        (0..m * n).map(|_| (rng.next_f64() * 2.0 - 1.0) * scale).collect(),
    )
    .unwrap()
}

#[test]
fn singular_values_match_gram_eigenvalues() {
    for seed in 0..12u64 {
        let m = 3 + (seed as usize * 7) % 10; // up to 12
        let n = 2 + (seed as usize * 5) % 10;
        let a = random_matrix(m, n, seed + 100, 2.0);
        let r = m.min(n);
        let t = truncated_svd(&a, r).unwrap();
        // Work with the smaller Gram matrix.
        let eig = if n <= m { gram_eigenvalues(&a) } else { gram_eigenvalues(&a.transpose()) };
        for k in 0..r {
            let oracle = eig[k].sqrt();
            assert!(
                (t.sigma[k] - oracle).abs() <= 1e-8,
                "seed {seed} sigma[{k}]: {} vs oracle {oracle}",
                t.sigma[k]
            );
        }
    }
}

#[test]
fn reconstruction_error_matches_tail_energy() {
    // The best rank-r error in Frobenius norm is √(Σ_{k>r} σ_k²); the
    // Gram-eigenvalue oracle supplies the σ_k² independently.
    for seed in 0..8u64 {
        let a = random_matrix(8, 6, seed + 500, 1.5);
        let eig = gram_eigenvalues(&a);
        for r in 1..=3usize {
            let t = truncated_svd(&a, r).unwrap();
            let err = norm_fro(&t.reconstruct().sub(&a));
            let tail: f64 = eig[r..].iter().sum::<f64>().max(0.0);
            let best = tail.sqrt();
            assert!(
                (err - best).abs() <= 1e-10 * norm_fro(&a).max(1.0),
                "rank {r}: err {err} vs oracle best {best}"
            );
        }
    }
}

#[test]
fn full_rank_truncation_reconstructs() {
    for seed in 0..6u64 {
        let m = 4 + (seed as usize) % 5;
        let n = 3 + (seed as usize * 3) % 6;
        let a = random_matrix(m, n, seed + 900, 3.0);
        let t = truncated_svd(&a, m.min(n)).unwrap();
        let err = norm_fro(&t.reconstruct().sub(&a));
        assert!(err <= 1e-8 * norm_fro(&a));
    }
}
