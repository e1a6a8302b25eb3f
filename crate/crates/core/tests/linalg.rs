use bidi_zsl_core::linalg::{
    center_rows, cholesky, l2_normalize_columns, pairwise_distances, solve_gsep, symmetric_eigen, Metric,
};
use bidi_zsl_core::matrix::{dot, norm};
use bidi_zsl_core::{RealMatrix, ZslError};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_pencil(rng: &mut impl Rng, n: usize) -> (RealMatrix, RealMatrix) {
    let g = random_matrix(rng, n, n);
    let mut a = g.add(&g.transpose()).unwrap();
    a.symmetrize();
    let h = random_matrix(rng, n, n);
    let mut b = h.t_matmul(&h).unwrap();
    b.add_diagonal(n as f64 * 0.1 + 0.5);
    b.symmetrize();
    (a, b)
}

fn to_na(m: &RealMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.as_slice())
}

/// Eigenvalues of `L⁻¹ A L⁻ᵀ` via nalgebra, descending.
fn oracle_values(a: &RealMatrix, b: &RealMatrix) -> Vec<f64> {
    let l = to_na(b).cholesky().expect("SPD").l();
    let linv = l.clone().try_inverse().unwrap();
    let c = &linv * to_na(a) * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut v: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

fn residual(a: &RealMatrix, b: &RealMatrix, lambda: f64, v: &[f64]) -> f64 {
    let av = a.mul_vec(v);
    let bv = b.mul_vec(v);
    norm(&av.iter().zip(&bv).map(|(x, y)| x - lambda * y).collect::<Vec<_>>())
}

#[test]
fn diagonal_pencil() {
    let a = RealMatrix::from_diagonal(&[2.0, 1.0]);
    let e = solve_gsep(&a, &RealMatrix::identity(2), 1).unwrap();
    assert_eq!(e.values, vec![2.0]);
    assert_eq!(e.vectors.col(0), &[1.0, 0.0]);
}

#[test]
fn identity_pencil_has_unit_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (_, b) = random_pencil(&mut rng, 7);
    let e = solve_gsep(&b, &b, 7).unwrap();
    for l in e.values {
        assert!((l - 1.0).abs() < 1e-10, "{l}");
    }
}

#[test]
fn random_pencils_match_oracle_and_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..100 {
        let n = 1 + trial % 50;
        let (a, b) = random_pencil(&mut rng, n);
        let k = 1 + trial % n;
        let e = solve_gsep(&a, &b, k).unwrap();
        let oracle = oracle_values(&a, &b);
        let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let (fa, fb) = (a.frobenius_norm(), b.frobenius_norm());
        for j in 0..k {
            let v = e.vectors.col(j);
            assert!(residual(&a, &b, e.values[j], v) <= 1e-8 * (fa + e.values[j].abs() * fb));
            assert!((e.values[j] - oracle[j]).abs() <= 1e-9 * scale);
            let bnorm = dot(v, &b.mul_vec(v));
            assert!((bnorm - 1.0).abs() < 1e-9);
            let first = v.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn gsep_errors() {
    let a = RealMatrix::identity(2);
    let b = RealMatrix::from_diagonal(&[1.0, -1.0]);
    assert!(matches!(solve_gsep(&a, &b, 1), Err(ZslError::NotPositiveDefinite { pivot: 1, .. })));
    assert!(matches!(solve_gsep(&a, &a, 3), Err(ZslError::Bounds(_))));
    assert!(matches!(solve_gsep(&a, &a, 0), Err(ZslError::Bounds(_))));
    let asym = RealMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
    assert!(matches!(solve_gsep(&asym, &a, 1), Err(ZslError::InvalidInput(_))));
    let nan = RealMatrix::from_rows(&[&[1.0]]).unwrap().map(|_| f64::NAN);
    assert!(matches!(solve_gsep(&nan, &RealMatrix::identity(1), 1), Err(ZslError::InvalidInput(_))));
}

#[test]
fn cholesky_reproduces_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (_, b) = random_pencil(&mut rng, 9);
    let l = cholesky(&b, 1e-14).unwrap();
    let llt = l.matmul(&l.transpose()).unwrap();
    assert!(llt.sub(&b).unwrap().max_abs() < 1e-12);
}

#[test]
fn symmetric_eigen_is_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (a, _) = random_pencil(&mut rng, 12);
    let (vals, vecs) = symmetric_eigen(&a).unwrap();
    let gram = vecs.t_matmul(&vecs).unwrap();
    assert!(gram.sub(&RealMatrix::identity(12)).unwrap().max_abs() < 1e-12);
    for (j, &l) in vals.iter().enumerate() {
        assert!(residual(&a, &RealMatrix::identity(12), l, vecs.col(j)) < 1e-10);
    }
}

#[test]
fn distance_examples() {
    let x = RealMatrix::from_columns(&[&[0.0, 0.0]]).unwrap();
    let y = RealMatrix::from_columns(&[&[3.0, 4.0]]).unwrap();
    assert_eq!(pairwise_distances(&x, &y, Metric::Euclidean).unwrap()[(0, 0)], 5.0);
    let e = RealMatrix::identity(2);
    let d = pairwise_distances(&e, &e, Metric::Cosine).unwrap();
    assert_eq!(d[(0, 1)], 1.0);
    assert!(matches!(
        pairwise_distances(&x, &y, Metric::Cosine),
        Err(ZslError::DegenerateVector { column: 0, .. })
    ));
    assert!(matches!(
        pairwise_distances(&x, &RealMatrix::identity(3), Metric::Euclidean),
        Err(ZslError::Shape(_))
    ));
}

#[test]
fn centering_examples() {
    let x = RealMatrix::from_columns(&[&[1.0, 1.0], &[3.0, 3.0]]).unwrap();
    let (c, mean) = center_rows(&x).unwrap();
    assert_eq!(mean, vec![2.0, 2.0]);
    assert_eq!(c, RealMatrix::from_columns(&[&[-1.0, -1.0], &[1.0, 1.0]]).unwrap());
    let (again, zero) = center_rows(&c).unwrap();
    assert_eq!(again, c);
    assert_eq!(zero, vec![0.0, 0.0]);
}

fn matrix_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = RealMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |data| RealMatrix::from_col_major(r, c, data).unwrap())
    })
}

proptest! {
    #[test]
    fn euclidean_self_distances(x in matrix_strategy(5, 8)) {
        let d = pairwise_distances(&x, &x, Metric::Euclidean).unwrap();
        let n = x.cols();
        for i in 0..n {
            prop_assert_eq!(d[(i, i)], 0.0);
            for j in 0..n {
                prop_assert_eq!(d[(i, j)], d[(j, i)]);
                for k in 0..n {
                    prop_assert!(d[(i, k)] <= d[(i, j)] + d[(j, k)] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn cosine_is_nonnegative(x in matrix_strategy(4, 6)) {
        prop_assume!(x.columns().all(|c| norm(c) > 1e-6));
        let d = pairwise_distances(&x, &x, Metric::Cosine).unwrap();
        prop_assert!(d.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn centering_and_normalising(x in matrix_strategy(6, 9)) {
        let (c, mean) = center_rows(&x).unwrap();
        for i in 0..c.rows() {
            let m: f64 = c.row(i).iter().sum::<f64>() / c.cols() as f64;
            prop_assert!(m.abs() <= 1e-12 * (1.0 + mean[i].abs()));
            for j in 0..c.cols() {
                prop_assert!((c[(i, j)] + mean[i] - x[(i, j)]).abs() <= 1e-12 * 10.0);
            }
        }
        prop_assume!(c.columns().all(|col| norm(col) > 1e-6));
        let once = l2_normalize_columns(&c).unwrap();
        for col in once.columns() {
            prop_assert!((norm(col) - 1.0).abs() <= 1e-12);
        }
        let twice = l2_normalize_columns(&once).unwrap();
        prop_assert!(twice.sub(&once).unwrap().max_abs() <= 1e-15);
    }

    #[test]
    fn small_pencils_satisfy_residual(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = random_pencil(&mut rng, n);
        let e = solve_gsep(&a, &b, n).unwrap();
        let (fa, fb) = (a.frobenius_norm(), b.frobenius_norm());
        for j in 0..n {
            prop_assert!(residual(&a, &b, e.values[j], e.vectors.col(j)) <= 1e-8 * (fa + e.values[j].abs() * fb));
        }
    }
}

#[test]
fn normalising_zero_column_names_it() {
    let x = RealMatrix::from_columns(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
    assert!(matches!(
        l2_normalize_columns(&x),
        Err(ZslError::DegenerateVector { column: 1, .. })
    ));
    assert_eq!(
        l2_normalize_columns(&RealMatrix::from_columns(&[&[3.0, 4.0]]).unwrap())
            .unwrap()
            .col(0),
        &[0.6, 0.8]
    );
}
