//! Property tests for the structural invariants: SVD correctness against the
//! Gram-matrix route, determinism, exact 1/p variance scaling, and coverage
//! invariance under affine rescaling.

use proptest::prelude::*;

use mcuq_core::matrix::{norm_fro, DenseMatrix};
use mcuq_core::svd::truncated_svd;
use mcuq_core::uq::{coverage_rate, intervals, oracle_variance, NoiseKind, VarianceField};

/// Eigenvalues of AᵀA by classical Jacobi, descending — independent of the
/// production one-sided path.
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
    for _ in 0..200 {
        let mut off: f64 = 0.0;
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
                    let (gkp, gkq) = (g[k][p], g[k][q]);
                    g[k][p] = c * gkp - s * gkq;
                    g[k][q] = s * gkp + c * gkq;
                }
                for k in 0..n {
                    let (gpk, gqk) = (g[p][k], g[q][k]);
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

fn matrix_strategy(max_dim: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(m, n)| {
        proptest::collection::vec(-10.0f64..10.0, m * n)
            .prop_map(move |data| DenseMatrix::from_vec(m, n, data).unwrap())
    })
}

fn orthonormal(m: usize, r: usize, seed: u64) -> DenseMatrix {
    let mut rng = mcuq_core::rng::RngStream::new(seed, 5);
    let a = DenseMatrix::from_vec(
        m,
        r,
        (0..m * r).map(|_| rng.next_f64() * 2.0 - 1.0).collect(),
    )
    .unwrap();
    truncated_svd(&a, r).unwrap().u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_sigma_matches_gram_oracle(a in matrix_strategy(12)) {
        let r = a.rows().min(a.cols());
        let t = truncated_svd(&a, r).unwrap();
        let eig = if a.cols() <= a.rows() {
            gram_eigenvalues(&a)
        } else {
            gram_eigenvalues(&a.transpose())
        };
        for k in 0..r {
            let oracle = eig[k].sqrt();
            prop_assert!((t.sigma[k] - oracle).abs() <= 1e-8 * oracle.max(1.0) + 1e-8);
        }
        // Full-rank truncation reconstructs the input.
        let err = norm_fro(&t.reconstruct().sub(&a));
        prop_assert!(err <= 1e-8 * norm_fro(&a).max(1e-12));
    }

    #[test]
    fn svd_bitwise_deterministic(a in matrix_strategy(9)) {
        let r = a.rows().min(a.cols());
        let t1 = truncated_svd(&a, r).unwrap();
        let t2 = truncated_svd(&a, r).unwrap();
        prop_assert_eq!(t1, t2);
    }

    #[test]
    fn variance_scales_exactly_with_inverse_p(
        seed in 0u64..1000,
        p in 0.05f64..1.0,
        vals in proptest::collection::vec(0.0f64..5.0, 20),
    ) {
        let u = orthonormal(5, 2, seed);
        let v = orthonormal(4, 2, seed + 1);
        let sig = DenseMatrix::from_vec(5, 4, vals).unwrap();
        let full = oracle_variance(&u, &v, &sig, 1.0).unwrap();
        let part = oracle_variance(&u, &v, &sig, p).unwrap();
        for (a, b) in full.s.data().iter().zip(part.s.data()) {
            // s² at rate p equals s² at rate 1 divided by p.
            prop_assert!((b * b * p - a * a).abs() <= 1e-12 * (a * a).max(1.0));
        }
    }

    #[test]
    fn coverage_invariant_under_affine_maps(
        md in proptest::collection::vec(-5.0f64..5.0, 9),
        truth in proptest::collection::vec(-5.0f64..5.0, 9),
        spread in proptest::collection::vec(0.01f64..2.0, 9),
        a in 0.1f64..4.0,
        b in -10.0f64..10.0,
    ) {
        let md = DenseMatrix::from_vec(3, 3, md).unwrap();
        let truth = DenseMatrix::from_vec(3, 3, truth).unwrap();
        let s = DenseMatrix::from_vec(3, 3, spread).unwrap();
        let field = VarianceField { s: s.clone(), model: NoiseKind::Gaussian, p: 1.0 };
        let iv = intervals(&md, &field, 0.9).unwrap();
        let base = coverage_rate(&iv, &truth, None).unwrap();

        let shift = DenseMatrix::from_vec(3, 3, vec![b; 9]).unwrap();
        let md2 = md.scale(a).add(&shift);
        let truth2 = truth.scale(a).add(&shift);
        let field2 = VarianceField { s: s.scale(a), model: NoiseKind::Gaussian, p: 1.0 };
        let iv2 = intervals(&md2, &field2, 0.9).unwrap();
        prop_assert_eq!(base, coverage_rate(&iv2, &truth2, None).unwrap());
    }
}
