use nalgebra::{DMatrix, DVector};
use phasefrac::linsolve::{
    ldlt_factorize, lu_solve, CscMatrix, Inertia, LdltSolver, LinsolveError, LuSolver, SparseSymmetric,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense_of(a: &SparseSymmetric) -> DMatrix<f64> {
    let d = a.to_dense();
    DMatrix::from_fn(a.dim(), a.dim(), |i, j| d[i][j])
}

fn oracle_inertia(m: &DMatrix<f64>) -> Inertia {
    let eig = m.clone().symmetric_eigen();
    let mut out = Inertia::default();
    for &l in eig.eigenvalues.iter() {
        if l.abs() < 1e-10 {
            out.n_zero += 1;
        } else if l > 0.0 {
            out.n_pos += 1;
        } else {
            out.n_neg += 1;
        }
    }
    out
}

fn random_sparse_symmetric(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseSymmetric {
    let mut t = Vec::new();
    for j in 0..n {
        if rng.gen_bool(0.8) {
            t.push((j, j, rng.gen_range(-2.0..2.0)));
        }
        for i in j + 1..n {
            if rng.gen_bool(density) {
                t.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    SparseSymmetric::from_triplets(n, &t).unwrap()
}

fn residual_ok(a: &SparseSymmetric, tau: f64, x: &[f64], b: &[f64]) -> bool {
    let ax = a.mul_vec_shifted(x, tau);
    let r = ax.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bn = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    r <= 1e-8 * (a.norm_inf_shifted(tau) * xn + bn)
}

/// Saddle-point matrix of a 2D grid: Laplacian block coupled to a negative
/// mass-like block, resembling a coupled field problem.
fn grid_saddle(nx: usize, ny: usize) -> SparseSymmetric {
    let m = nx * ny;
    let id = |i: usize, j: usize| i + nx * j;
    let mut t = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let a = id(i, j);
            t.push((a, a, 4.0));
            t.push((m + a, m + a, -1.0));
            t.push((m + a, a, 0.5));
            if i + 1 < nx {
                t.push((id(i + 1, j), a, -1.0));
                t.push((m + id(i + 1, j), m + a, 0.1));
            }
            if j + 1 < ny {
                t.push((id(i, j + 1), a, -1.0));
                t.push((m + id(i, j + 1), m + a, 0.1));
            }
        }
    }
    SparseSymmetric::from_triplets(2 * m, &t).unwrap()
}

#[test]
fn diagonal_inertia() {
    let a = SparseSymmetric::from_diagonal(&[2.0, -3.0, 5.0]);
    assert_eq!(ldlt_factorize(&a, 0.0).unwrap().inertia(), Inertia { n_pos: 2, n_neg: 1, n_zero: 0 });
    assert_eq!(ldlt_factorize(&a, 3.5).unwrap().inertia(), Inertia { n_pos: 3, n_neg: 0, n_zero: 0 });
}

#[test]
fn shifted_to_exact_zero() {
    let a = SparseSymmetric::from_diagonal(&[1.0, -1.0]);
    let f = ldlt_factorize(&a, 1.0).unwrap();
    assert_eq!(f.inertia(), Inertia { n_pos: 1, n_neg: 0, n_zero: 1 });
    assert_eq!(f.solve(&[1.0, 1.0]), Err(LinsolveError::Singular { n_zero: 1 }));
}

#[test]
fn identity_solve() {
    let a = SparseSymmetric::identity(7);
    let b: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
    assert_eq!(ldlt_factorize(&a, 0.0).unwrap().solve(&b).unwrap(), b);
}

#[test]
fn spd_against_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
    let spd = &g * g.transpose() + DMatrix::identity(5, 5);
    let mut t = Vec::new();
    for j in 0..5 {
        for i in j..5 {
            t.push((i, j, spd[(i, j)]));
        }
    }
    let a = SparseSymmetric::from_triplets(5, &t).unwrap();
    let b = [1.0, -2.0, 0.5, 3.0, -1.0];
    let x = ldlt_factorize(&a, 0.0).unwrap().solve(&b).unwrap();
    let oracle = spd.lu().solve(&DVector::from_column_slice(&b)).unwrap();
    for i in 0..5 {
        assert!((x[i] - oracle[i]).abs() < 1e-10);
    }
}

#[test]
fn random_inertia_matches_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut delayed = 0;
    for case in 0..200 {
        let n = rng.gen_range(1..=60);
        let density = rng.gen_range(0.02..0.3);
        let a = random_sparse_symmetric(&mut rng, n, density);
        let f = ldlt_factorize(&a, 0.0).unwrap();
        delayed += f.n_delayed();
        assert_eq!(f.inertia(), oracle_inertia(&dense_of(&a)), "case {case}, n {n}");
        if f.inertia().n_zero == 0 {
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = f.solve(&b).unwrap();
            assert!(residual_ok(&a, 0.0, &x, &b), "case {case}");
        }
    }
    // the sample must exercise pivots passed up the tree
    assert!(delayed > 0);
}

#[test]
fn clustered_small_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..20 {
        let n = 30;
        let q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let lambdas: Vec<f64> = (0..n)
            .map(|k| {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                if k < 6 {
                    sign * 1e-6 * (1.0 + 1e-3 * k as f64)
                } else {
                    sign * rng.gen_range(0.5..5.0)
                }
            })
            .collect();
        let m = &q * DMatrix::from_diagonal(&DVector::from_vec(lambdas)) * q.transpose();
        let mut t = Vec::new();
        for j in 0..n {
            for i in j..n {
                t.push((i, j, 0.5 * (m[(i, j)] + m[(j, i)])));
            }
        }
        let a = SparseSymmetric::from_triplets(n, &t).unwrap();
        assert_eq!(ldlt_factorize(&a, 0.0).unwrap().inertia(), oracle_inertia(&dense_of(&a)), "case {case}");
    }
}

#[test]
fn saddle_grid_with_delays() {
    let a = grid_saddle(12, 9);
    let f = ldlt_factorize(&a, 0.0).unwrap();
    assert_eq!(f.inertia(), oracle_inertia(&dense_of(&a)));
    let b: Vec<f64> = (0..a.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
    let x = f.solve(&b).unwrap();
    assert!(residual_ok(&a, 0.0, &x, &b));
}

#[test]
fn zero_diagonal_block_pattern() {
    // Off-diagonal couplings only inside the second block forces 2x2 pivots
    // and delays through the tree.
    let n = 40;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, if i < n / 2 { 1.0 } else { 0.0 }));
        if i >= n / 2 {
            t.push((i, i - n / 2, 1.0));
        }
        if i + 1 < n / 2 {
            t.push((i + 1, i, 0.3));
        }
    }
    let a = SparseSymmetric::from_triplets(n, &t).unwrap();
    let f = ldlt_factorize(&a, 0.0).unwrap();
    assert_eq!(f.inertia(), oracle_inertia(&dense_of(&a)));
    let b = vec![1.0; n];
    assert!(residual_ok(&a, 0.0, &f.solve(&b).unwrap(), &b));
}

#[test]
fn shift_reuse_matches_fresh_analysis() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = random_sparse_symmetric(&mut rng, 80, 0.05);
    let solver = LdltSolver::analyze(&a).unwrap();
    let b: Vec<f64> = (0..80).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for tau in [0.0, 1e-4, 1e-2, 1.0, 100.0] {
        let reused = solver.factorize(&a, tau).unwrap();
        let fresh = ldlt_factorize(&a, tau).unwrap();
        assert_eq!(reused.inertia(), fresh.inertia());
        if reused.inertia().n_zero == 0 {
            let x1 = reused.solve(&b).unwrap();
            let x2 = fresh.solve(&b).unwrap();
            assert!(residual_ok(&a, tau, &x1, &b));
            assert!(residual_ok(&a, tau, &x2, &b));
        }
    }
}

#[test]
fn pattern_mismatch_rejected() {
    let a = SparseSymmetric::from_diagonal(&[1.0, 2.0]);
    let b = SparseSymmetric::from_triplets(2, &[(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
    let solver = LdltSolver::analyze(&a).unwrap();
    assert_eq!(solver.factorize(&b, 0.0).unwrap_err(), LinsolveError::PatternMismatch);
}

#[test]
fn non_finite_entry_is_breakdown() {
    let a = SparseSymmetric::from_diagonal(&[1.0, f64::NAN]);
    assert!(matches!(ldlt_factorize(&a, 0.0), Err(LinsolveError::Breakdown(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positive_count_monotone_in_shift(seed in any::<u64>(), n in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_sparse_symmetric(&mut rng, n, 0.15);
        let solver = LdltSolver::analyze(&a).unwrap();
        let mut last = 0;
        for k in 0..12 {
            let tau = if k == 0 { 0.0 } else { 1e-4 * 4f64.powi(k) };
            let inertia = solver.factorize(&a, tau).unwrap().inertia();
            prop_assert_eq!(inertia.dim(), n);
            prop_assert!(inertia.n_pos >= last);
            last = inertia.n_pos;
        }
    }
}

fn dense_csc(a: &CscMatrix) -> DMatrix<f64> {
    let d = a.to_dense();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| d[i][j])
}

#[test]
fn lu_identity_and_permutation() {
    let b = [1.0, 2.0, 3.0];
    assert_eq!(lu_solve(&CscMatrix::identity(3), &b).unwrap(), b.to_vec());
    let p = CscMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
    assert_eq!(lu_solve(&p, &[5.0, 7.0]).unwrap(), vec![7.0, 5.0]);
}

#[test]
fn lu_random_against_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..20 {
        let n = 100;
        let mut t = Vec::new();
        for j in 0..n {
            t.push((j, j, rng.gen_range(-3.0..3.0)));
            for _ in 0..4 {
                t.push((rng.gen_range(0..n), j, rng.gen_range(-1.0..1.0)));
            }
        }
        let a = CscMatrix::from_triplets(n, n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = lu_solve(&a, &b).unwrap();
        let oracle = dense_csc(&a).lu().solve(&DVector::from_column_slice(&b)).unwrap();
        let scale = oracle.amax().max(1.0);
        for i in 0..n {
            assert!((x[i] - oracle[i]).abs() < 1e-9 * scale, "case {case} i {i}");
        }
    }
}

#[test]
fn lu_block_lower_triangular() {
    // [[K, 0], [C, M]] with symmetric K, M
    let m = 30;
    let mut t = Vec::new();
    for i in 0..m {
        t.push((i, i, 3.0));
        t.push((m + i, m + i, 2.0));
        t.push((m + i, i, -1.5));
        if i + 1 < m {
            t.push((i + 1, i, -1.0));
            t.push((i, i + 1, -1.0));
            t.push((m + i + 1, m + i, 0.5));
            t.push((m + i, m + i + 1, 0.5));
        }
    }
    let a = CscMatrix::from_triplets(2 * m, 2 * m, &t).unwrap();
    let b: Vec<f64> = (0..2 * m).map(|i| i as f64).collect();
    let f = LuSolver::analyze(&a).unwrap().factorize(&a).unwrap();
    let x = f.solve(&b).unwrap();
    let r = a.mul_vec(&x);
    for i in 0..2 * m {
        assert!((r[i] - b[i]).abs() < 1e-9 * (1.0 + b[i].abs()));
    }
}
