//! Dense linear-algebra primitives: distances, normalisation and a
//! symmetric-definite generalized eigensolver.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Result, ZslError};
use crate::matrix::{dot, euclidean, norm, RealMatrix};

/// Distance used between columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Metric {
    #[default]
    Euclidean,
    /// `1 − xᵀy / (‖x‖‖y‖)`.
    Cosine,
}

/// Tolerances for [`solve_gsep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsepOptions {
    /// Maximum tolerated `|a_ij − a_ji|`, relative to `max(1, max|a|)`.
    pub symmetry_tol: f64,
    /// Cholesky pivots at or below `pivot_tol · max(diag B)` are rejected.
    pub pivot_tol: f64,
}

impl Default for GsepOptions {
    fn default() -> Self {
        Self {
            symmetry_tol: 1e-10,
            pivot_tol: 1e-14,
        }
    }
}

/// Eigenvalues in descending order and the matching eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: RealMatrix,
}

/// Solves `A v = λ B v` for the `k` largest eigenvalues.
///
/// `B` is reduced by Cholesky, `B = L Lᵀ`, and the standard symmetric
/// problem `L⁻¹ A L⁻ᵀ y = λ y` is solved; `v = L⁻ᵀ y` then has unit
/// `B`-norm. Each vector's first component with magnitude above `1e-12`
/// is made positive.
pub fn solve_gsep(a: &RealMatrix, b: &RealMatrix, k: usize) -> Result<EigenPairs> {
    solve_gsep_with(a, b, k, &GsepOptions::default())
}

pub fn solve_gsep_with(
    a: &RealMatrix,
    b: &RealMatrix,
    k: usize,
    opts: &GsepOptions,
) -> Result<EigenPairs> {
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(ZslError::Shape(format!(
            "pencil of {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    a.check_finite()?;
    b.check_finite()?;
    let n = a.rows();
    if k == 0 || k > n {
        return Err(ZslError::Bounds(format!("k = {k} outside 1..={n}")));
    }
    check_symmetric(a, "A", opts.symmetry_tol)?;
    check_symmetric(b, "B", opts.symmetry_tol)?;

    let l = cholesky(b, opts.pivot_tol)?;
    // C = L⁻¹ A L⁻ᵀ = L⁻¹ (L⁻¹ A)ᵀ
    let mut y = a.clone();
    for j in 0..n {
        forward_substitute(&l, y.col_mut(j));
    }
    let mut c = y.transpose();
    for j in 0..n {
        forward_substitute(&l, c.col_mut(j));
    }
    c.symmetrize();

    let (values, vecs) = symmetric_eigen(&c)?;
    let mut vectors = vecs.leading_columns(k);
    for j in 0..k {
        let col = vectors.col_mut(j);
        backward_substitute_transposed(&l, col);
        fix_sign(col);
    }
    Ok(EigenPairs {
        values: values[..k].to_vec(),
        vectors,
    })
}

fn check_symmetric(m: &RealMatrix, name: &str, tol: f64) -> Result<()> {
    let asym = m.max_asymmetry();
    if asym > tol * m.max_abs().max(1.0) {
        return Err(ZslError::InvalidInput(format!(
            "{name} is not symmetric (max |a_ij - a_ji| = {asym:e})"
        )));
    }
    Ok(())
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(b: &RealMatrix, pivot_tol: f64) -> Result<RealMatrix> {
    let n = b.rows();
    let scale = (0..n).fold(0.0f64, |m, i| m.max(b[(i, i)].abs()));
    let floor = pivot_tol * scale;
    let mut l = RealMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = b[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) {
            return Err(ZslError::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = libm::sqrt(d);
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L x = v` in place.
fn forward_substitute(l: &RealMatrix, v: &mut [f64]) {
    let n = v.len();
    for i in 0..n {
        let mut s = v[i];
        for k in 0..i {
            s -= l[(i, k)] * v[k];
        }
        v[i] = s / l[(i, i)];
    }
}

/// Solves `Lᵀ x = v` in place.
fn backward_substitute_transposed(l: &RealMatrix, v: &mut [f64]) {
    let n = v.len();
    for i in (0..n).rev() {
        let mut s = v[i];
        for k in i + 1..n {
            s -= l[(k, i)] * v[k];
        }
        v[i] = s / l[(i, i)];
    }
}

/// Makes the first component with magnitude above `1e-12` positive.
pub fn fix_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Householder reduction to tridiagonal form followed by implicit QL with
/// Wilkinson shifts. Eigenvalues come back in descending order; ties keep
/// the order produced by the QL sweep. Eigenvectors are orthonormal columns
/// and carry no sign normalisation.
pub fn symmetric_eigen(a: &RealMatrix) -> Result<(Vec<f64>, RealMatrix)> {
    if !a.is_square() {
        return Err(ZslError::Shape(format!("{}x{} is not square", a.rows(), a.cols())));
    }
    let n = a.rows();
    // column-major working copy: v[c * n + r]
    let mut v = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    tridiagonal_ql(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = RealMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors
            .col_mut(dst)
            .copy_from_slice(&v[src * n..(src + 1) * n]);
    }
    Ok((values, vectors))
}

fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |r: usize, c: usize| c * n + r;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    // accumulate transformations
    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    if n > 0 {
        v[at(n - 1, n - 1)] = 1.0;
        e[0] = 0.0;
    }
}

fn tridiagonal_ql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    let at = |r: usize, c: usize| c * n + r;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    let max_sweeps = 60 * n.max(1);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(ZslError::NoConvergence { index: l });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Distances between every column of `x` and every column of `y`;
/// entry `(i, j)` compares `x[:, i]` with `y[:, j]`.
pub fn pairwise_distances(x: &RealMatrix, y: &RealMatrix, metric: Metric) -> Result<RealMatrix> {
    if x.rows() != y.rows() {
        return Err(ZslError::Shape(format!(
            "column length {} vs {}",
            x.rows(),
            y.rows()
        )));
    }
    match metric {
        Metric::Euclidean => Ok(RealMatrix::from_fn(x.cols(), y.cols(), |i, j| {
            euclidean(x.col(i), y.col(j))
        })),
        Metric::Cosine => {
            let xn = column_norms_nonzero(x, "cosine distance")?;
            let yn = column_norms_nonzero(y, "cosine distance")?;
            Ok(RealMatrix::from_fn(x.cols(), y.cols(), |i, j| {
                if x.col(i) == y.col(j) {
                    return 0.0;
                }
                let cos = dot(x.col(i), y.col(j)) / (xn[i] * yn[j]);
                (1.0 - cos).max(0.0)
            }))
        }
    }
}

fn column_norms_nonzero(x: &RealMatrix, context: &'static str) -> Result<Vec<f64>> {
    x.columns()
        .enumerate()
        .map(|(j, c)| {
            let n = norm(c);
            if n > 0.0 {
                Ok(n)
            } else {
                Err(ZslError::DegenerateVector { column: j, context })
            }
        })
        .collect()
}

/// Subtracts each row's mean; returns the centred matrix and the means.
pub fn center_rows(x: &RealMatrix) -> Result<(RealMatrix, Vec<f64>)> {
    x.check_finite()?;
    let mean = row_means(x);
    Ok((subtract_from_columns(x, &mean), mean))
}

pub fn row_means(x: &RealMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.rows()];
    for c in x.columns() {
        for (m, &v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    let n = x.cols() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// `x[:, j] − v` for every column `j`.
pub fn subtract_from_columns(x: &RealMatrix, v: &[f64]) -> RealMatrix {
    let mut out = x.clone();
    for j in 0..out.cols() {
        for (a, &m) in out.col_mut(j).iter_mut().zip(v) {
            *a -= m;
        }
    }
    out
}

/// Scales every column to unit Euclidean norm.
pub fn l2_normalize_columns(x: &RealMatrix) -> Result<RealMatrix> {
    let norms = column_norms_nonzero(x, "l2 normalisation")?;
    let mut out = x.clone();
    for (j, n) in norms.into_iter().enumerate() {
        out.col_mut(j).iter_mut().for_each(|v| *v /= n);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_pencil() {
        let a = RealMatrix::from_diagonal(&[2.0, 1.0]);
        let b = RealMatrix::identity(2);
        let pairs = solve_gsep(&a, &b, 1).unwrap();
        assert_abs_diff_eq!(pairs.values[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pairs.vectors[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pairs.vectors[(1, 0)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn identity_pencil_has_unit_eigenvalues() {
        let b = RealMatrix::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]])
            .unwrap();
        let pairs = solve_gsep(&b, &b, 3).unwrap();
        for v in pairs.values {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gsep_errors() {
        let a = RealMatrix::identity(2);
        let not_pd = RealMatrix::from_diagonal(&[1.0, -1.0]);
        assert_eq!(
            solve_gsep(&a, &not_pd, 1).unwrap_err(),
            ZslError::NotPositiveDefinite { pivot: 1, value: -1.0 }
        );
        assert!(matches!(solve_gsep(&a, &a, 3), Err(ZslError::Bounds(_))));
        assert!(matches!(solve_gsep(&a, &a, 0), Err(ZslError::Bounds(_))));
        let asym = RealMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(solve_gsep(&asym, &a, 1), Err(ZslError::InvalidInput(_))));
        let mut nan = RealMatrix::identity(2);
        nan[(0, 1)] = f64::NAN;
        assert!(matches!(solve_gsep(&nan, &a, 1), Err(ZslError::InvalidInput(_))));
    }

    #[test]
    fn sign_convention() {
        let a = RealMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let pairs = solve_gsep(&a, &RealMatrix::identity(2), 2).unwrap();
        for j in 0..2 {
            assert!(pairs.vectors[(0, j)] > 0.0);
        }
        assert_abs_diff_eq!(pairs.values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pairs.values[1], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigen_of_one_by_one_and_zero() {
        let (vals, vecs) = symmetric_eigen(&RealMatrix::from_diagonal(&[3.0])).unwrap();
        assert_eq!(vals, vec![3.0]);
        assert_eq!(vecs[(0, 0)].abs(), 1.0);
        let (vals, _) = symmetric_eigen(&RealMatrix::zeros(3, 3)).unwrap();
        assert_eq!(vals, vec![0.0; 3]);
    }

    #[test]
    fn distances() {
        let x = RealMatrix::from_columns(&[&[0.0, 0.0]]).unwrap();
        let y = RealMatrix::from_columns(&[&[3.0, 4.0]]).unwrap();
        assert_eq!(pairwise_distances(&x, &y, Metric::Euclidean).unwrap()[(0, 0)], 5.0);

        let e = RealMatrix::from_columns(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let d = pairwise_distances(&e, &e, Metric::Cosine).unwrap();
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(d[(0, 0)], 0.0);

        assert_eq!(
            pairwise_distances(&x, &e, Metric::Cosine).unwrap_err(),
            ZslError::DegenerateVector { column: 0, context: "cosine distance" }
        );
        let z = RealMatrix::zeros(3, 1);
        assert!(matches!(
            pairwise_distances(&x, &z, Metric::Euclidean),
            Err(ZslError::Shape(_))
        ));
    }

    #[test]
    fn centring_and_normalising() {
        let x = RealMatrix::from_columns(&[&[1.0, 1.0], &[3.0, 3.0]]).unwrap();
        let (c, mean) = center_rows(&x).unwrap();
        assert_eq!(mean, vec![2.0, 2.0]);
        assert_eq!(c, RealMatrix::from_columns(&[&[-1.0, -1.0], &[1.0, 1.0]]).unwrap());
        let (again, zero) = center_rows(&c).unwrap();
        assert_eq!(again, c);
        assert_eq!(zero, vec![0.0, 0.0]);

        let y = RealMatrix::from_columns(&[&[3.0, 4.0]]).unwrap();
        let n = l2_normalize_columns(&y).unwrap();
        assert_abs_diff_eq!(n[(0, 0)], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(n[(1, 0)], 0.8, epsilon = 1e-15);

        let bad = RealMatrix::from_columns(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        assert_eq!(
            l2_normalize_columns(&bad).unwrap_err(),
            ZslError::DegenerateVector { column: 1, context: "l2 normalisation" }
        );
    }
}
