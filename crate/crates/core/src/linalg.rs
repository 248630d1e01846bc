//! Small dense linear-algebra kernels over [`Scalar`].
//!
//! Matrices in this crate are at most a few hundred rows on a side, so a
//! cyclic Jacobi eigensolver is both accurate and fast enough. Everything
//! else (inverse square roots, pseudo-inverses, condition numbers) is built
//! on top of it.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigen-decomposition of a symmetric matrix, eigenvalues in descending
/// order. Column `i` of `vectors` pairs with `values[i]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Each eigenvector is sign-normalized so that its largest-magnitude entry is
/// positive (first such entry on ties), which makes whiteners reproducible.
pub fn symmetric_eigen<T: Scalar>(matrix: ArrayView2<'_, T>) -> Result<SymmetricEigen<T>> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::Input(format!(
            "eigen-decomposition needs a square matrix, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("matrix contains non-finite entries".into()));
    }
    let mut a = matrix.to_owned();
    // Symmetrize to remove round-off asymmetry from A·Aᵀ style products.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = (a[[i, j]] + a[[j, i]]) * T::of(0.5);
            a[[i, j]] = m;
            a[[j, i]] = m;
        }
    }
    let mut v = Array2::<T>::eye(n);
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += a[[i, i]] * a[[i, i]];
            for j in (i + 1)..n {
                off += a[[i, j]] * a[[i, j]];
            }
        }
        if off <= eps * eps * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                if apq.abs() <= eps * T::of(0.01) * (app.abs() + aqq.abs()).max(T::min_positive_value()) {
                    a[[p, q]] = T::zero();
                    a[[q, p]] = T::zero();
                    continue;
                }
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                a[[p, q]] = T::zero();
                a[[q, p]] = T::zero();
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[[j, j]]
            .partial_cmp(&a[[i, i]])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vectors = Array2::<T>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).to_owned();
        let mut pivot = 0;
        for k in 1..n {
            if col[k].abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        if col[pivot] < T::zero() {
            col.mapv_inplace(|x| -x);
        }
        vectors.column_mut(dst).assign(&col);
    }
    Ok(SymmetricEigen { values, vectors })
}

/// `(M)^(-1/2)` for a symmetric positive-definite matrix.
///
/// Fails with a rank error when the smallest eigenvalue is below
/// `min_eigenvalue`.
pub fn inverse_sqrt_spd<T: Scalar>(matrix: ArrayView2<'_, T>, min_eigenvalue: T) -> Result<Array2<T>> {
    let eig = symmetric_eigen(matrix)?;
    let n = eig.values.len();
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let smallest = eig.values[n - 1];
    if !(smallest > min_eigenvalue) {
        return Err(Error::Rank(format!(
            "matrix is numerically singular (smallest eigenvalue {smallest})"
        )));
    }
    let scaled = &eig.vectors * &eig.values.mapv(|l| T::one() / l.sqrt()).insert_axis(Axis(0));
    Ok(scaled.dot(&eig.vectors.t()))
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn inverse<T: Scalar>(matrix: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::Input(format!(
            "inverse needs a square matrix, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    let mut a = matrix.to_owned();
    let mut inv = Array2::<T>::eye(n);
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return Err(Error::Rank("zero matrix is not invertible".into()));
    }
    let tiny = scale * T::epsilon() * T::of_usize(n.max(1));
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[[row, col]].abs() > a[[pivot, col]].abs() {
                pivot = row;
            }
        }
        if a[[pivot, col]].abs() <= tiny {
            return Err(Error::Rank(format!("matrix is singular at column {col}")));
        }
        if pivot != col {
            for k in 0..n {
                a.swap([pivot, k], [col, k]);
                inv.swap([pivot, k], [col, k]);
            }
        }
        let d = a[[col, col]];
        for k in 0..n {
            a[[col, k]] /= d;
            inv[[col, k]] /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[[row, col]];
            if f == T::zero() {
                continue;
            }
            for k in 0..n {
                let ak = a[[col, k]];
                let ik = inv[[col, k]];
                a[[row, k]] -= f * ak;
                inv[[row, k]] -= f * ik;
            }
        }
    }
    Ok(inv)
}

/// Moore–Penrose pseudo-inverse of a full-row-rank `k×p` matrix (`k ≤ p`),
/// computed as `Mᵀ (M Mᵀ)⁻¹`.
pub fn pseudo_inverse_full_row_rank<T: Scalar>(matrix: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let (k, p) = matrix.dim();
    if k > p {
        return Err(Error::Input(format!(
            "pseudo-inverse expects at most as many rows as columns, got {k}x{p}"
        )));
    }
    let gram = matrix.dot(&matrix.t());
    let eig = symmetric_eigen(gram.view())?;
    let largest = eig.values.iter().fold(T::zero(), |m, v| m.max(*v));
    let smallest = eig.values.iter().fold(T::infinity(), |m, v| m.min(*v));
    if !(smallest > largest * T::epsilon() * T::of(1e3)) {
        return Err(Error::Rank(format!(
            "matrix is rank deficient (singular values^2 span {smallest}..{largest})"
        )));
    }
    let inv_gram = &eig.vectors * &eig.values.mapv(|l| T::one() / l).insert_axis(Axis(0));
    let inv_gram = inv_gram.dot(&eig.vectors.t());
    Ok(matrix.t().dot(&inv_gram))
}

/// 2-norm condition number `σ_max / σ_min`; infinite for singular input.
pub fn condition_number<T: Scalar>(matrix: ArrayView2<'_, T>) -> Result<T> {
    let gram = matrix.t().dot(&matrix);
    let eig = symmetric_eigen(gram.view())?;
    let n = eig.values.len();
    if n == 0 {
        return Ok(T::one());
    }
    let largest = eig.values[0].max(T::zero());
    let smallest = eig.values[n - 1].max(T::zero());
    if smallest == T::zero() {
        return Ok(T::infinity());
    }
    Ok((largest / smallest).sqrt())
}

pub fn frobenius_norm<T: Scalar>(matrix: ArrayView2<'_, T>) -> T {
    matrix.iter().map(|v| *v * *v).sum::<T>().sqrt()
}

/// Row-wise sample covariance with 1/T normalization, after centering each
/// row by its mean.
pub fn row_covariance<T: Scalar>(data: ArrayView2<'_, T>) -> (Array1<T>, Array2<T>) {
    let t = data.ncols();
    let n = T::of_usize(t.max(1));
    let mean = data.sum_axis(Axis(1)).mapv(|s| s / n);
    let centered = &data - &mean.view().insert_axis(Axis(1));
    let cov = centered.dot(&centered.t()).mapv(|v| v / n);
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_reconstructs_symmetric_matrix() {
        let m = array![[4.0f64, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]];
        let eig = symmetric_eigen(m.view()).unwrap();
        let d = Array2::from_diag(&eig.values);
        let back = eig.vectors.dot(&d).dot(&eig.vectors.t());
        for (a, b) in back.iter().zip(m.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(eig.values[0] >= eig.values[1] && eig.values[1] >= eig.values[2]);
        let vtv = eig.vectors.t().dot(&eig.vectors);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[[i, j]] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenvector_sign_convention() {
        let m = array![[2.0f64, -1.0], [-1.0, 2.0]];
        let eig = symmetric_eigen(m.view()).unwrap();
        for c in 0..2 {
            let col = eig.vectors.column(c);
            let pivot = col.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(pivot > 0.0);
        }
        assert!((eig.values[0] - 3.0).abs() < 1e-12);
        assert!((eig.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_and_condition() {
        let m = array![[2.0f64, 1.0], [1.0, 3.0]];
        let inv = inverse(m.view()).unwrap();
        let id = m.dot(&inv);
        assert!((id[[0, 0]] - 1.0).abs() < 1e-14 && id[[0, 1]].abs() < 1e-14);
        assert!(inverse(array![[1.0, 2.0], [2.0, 4.0]].view()).is_err());
        let c = condition_number(array![[3.0f64, 0.0], [0.0, 1.5]].view()).unwrap();
        assert!((c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_sqrt_whitens() {
        let m = array![[4.0f32, 1.0], [1.0, 2.0]];
        let s = inverse_sqrt_spd(m.view(), 1e-6).unwrap();
        let id = s.dot(&m).dot(&s);
        assert!((id[[0, 0]] - 1.0).abs() < 1e-5 && id[[0, 1]].abs() < 1e-5);
    }

    #[test]
    fn pseudo_inverse_of_wide_matrix() {
        let m = array![[1.0f64, 0.0, 2.0], [0.0, 1.0, 1.0]];
        let pinv = pseudo_inverse_full_row_rank(m.view()).unwrap();
        let id = m.dot(&pinv);
        assert!((id[[0, 0]] - 1.0).abs() < 1e-12 && id[[1, 0]].abs() < 1e-12);
        assert!(pseudo_inverse_full_row_rank(array![[1.0, 2.0], [2.0, 4.0]].view()).is_err());
    }
}
