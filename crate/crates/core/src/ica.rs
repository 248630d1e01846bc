//! PCA whitening, symmetric FastICA with the cubic nonlinearity, and the
//! permutation/scale-invariant unmixing error.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assignment::solve_min_cost;
use crate::error::{Error, Result};
use crate::linalg::{row_covariance, symmetric_eigen};
use crate::scalar::Scalar;
use crate::seeding::stream_rng;

pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Largest tolerated deviation of the input covariance from identity before
/// FastICA refuses to run.
pub const WHITENESS_TOL: f64 = 1e-3;

/// Smallest eigenvalue of `WWᵀ` accepted by symmetric orthogonalization.
const MIN_GRAM_EIGENVALUE: f64 = 1e-12;
const MAX_RESTARTS: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningResult<T> {
    /// `k×T` whitened data.
    #[serde(skip)]
    pub whitened: Array2<T>,
    /// `k×p` map from centered data to whitened coordinates.
    pub whitener: Array2<T>,
    /// Row means removed before whitening.
    pub mean: Array1<T>,
    /// Leading `k` covariance eigenvalues, descending.
    pub eigenvalues: Array1<T>,
    /// `p×k` leading eigenvectors.
    pub eigenvectors: Array2<T>,
}

impl<T: Scalar> WhiteningResult<T> {
    /// `p×k` right inverse of the whitener, `E_k D_k^{1/2}`.
    pub fn dewhitener(&self) -> Array2<T> {
        &self.eigenvectors * &self.eigenvalues.mapv(|l| l.sqrt()).insert_axis(Axis(0))
    }

    /// Apply the stored centering and whitening to new data.
    pub fn transform(&self, data: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if data.nrows() != self.mean.len() {
            return Err(Error::Input(format!(
                "data has {} rows, whitener expects {}",
                data.nrows(),
                self.mean.len()
            )));
        }
        let centered = &data - &self.mean.view().insert_axis(Axis(1));
        Ok(self.whitener.dot(&centered))
    }
}

/// Center `X` (rows are variables) and project onto the top-`k` principal
/// directions scaled to unit variance.
pub fn whiten<T: Scalar>(data: ArrayView2<'_, T>, k: usize) -> Result<WhiteningResult<T>> {
    let (p, t) = data.dim();
    if k < 1 || k > p {
        return Err(Error::Input(format!("need 1 ≤ k ≤ p, got k = {k}, p = {p}")));
    }
    if t <= p {
        return Err(Error::Input(format!("need more samples than variables, got T = {t}, p = {p}")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("data contains non-finite values".into()));
    }
    let (mean, cov) = row_covariance(data);
    let eig = symmetric_eigen(cov.view())?;
    let largest = eig.values[0];
    let floor = largest * T::epsilon() * T::of_usize(p) * T::of(100.0);
    if !(largest > T::zero()) || !(eig.values[k - 1] > floor) {
        let rank = eig.values.iter().filter(|&&l| l > floor && largest > T::zero()).count();
        return Err(Error::Rank(format!("covariance rank {rank} is below requested k = {k}")));
    }
    let eigenvalues = eig.values.slice(ndarray::s![..k]).to_owned();
    let eigenvectors = eig.vectors.slice(ndarray::s![.., ..k]).to_owned();
    let inv_sqrt = eigenvalues.mapv(|l| T::one() / l.sqrt());
    let whitener = &eigenvectors.t() * &inv_sqrt.view().insert_axis(Axis(1));
    let centered = &data - &mean.view().insert_axis(Axis(1));
    let whitened = whitener.dot(&centered);
    Ok(WhiteningResult { whitened, whitener, mean, eigenvalues, eigenvectors })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaResult<T> {
    /// `k×k` orthogonal unmixing matrix acting on whitened data.
    pub unmixing: Array2<T>,
    #[serde(skip)]
    pub components: Array2<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// `(WWᵀ)^(-1/2) W`, or `None` if `WWᵀ` is numerically singular.
fn symmetric_orthogonalize<T: Scalar>(w: &Array2<T>) -> Result<Option<Array2<T>>> {
    let gram = w.dot(&w.t());
    let eig = symmetric_eigen(gram.view())?;
    let n = eig.values.len();
    if !(eig.values[n - 1] >= T::of(MIN_GRAM_EIGENVALUE)) {
        return Ok(None);
    }
    let scaled = &eig.vectors * &eig.values.mapv(|l| T::one() / l.sqrt()).insert_axis(Axis(0));
    Ok(Some(scaled.dot(&eig.vectors.t()).dot(w)))
}

fn check_whitened<T: Scalar>(z: ArrayView2<'_, T>) -> Result<()> {
    let (k, t) = z.dim();
    let n = T::of_usize(t);
    let second = z.dot(&z.t()).mapv(|v| v / n);
    let mut worst = T::zero();
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((second[[i, j]] - target).abs());
        }
    }
    if !(worst <= T::of(WHITENESS_TOL)) {
        return Err(Error::Precondition(format!(
            "input is not whitened: second moment deviates from identity by {worst}"
        )));
    }
    Ok(())
}

/// Symmetric FastICA with `g(y) = y³` on whitened data `Z` (`k×T`).
///
/// Each sweep applies `w ← E[z (wᵀz)³] − 3w` to every row, then
/// `W ← (WWᵀ)^(-1/2) W`. Iteration stops once every row is within `tol` of
/// its previous direction, i.e. `min_i |⟨w_i, w_i'⟩| ≥ 1 − tol`. The initial
/// `W` is an orthonormalized Gaussian draw from stream 0 of `seed`; a run that
/// hits a singular `WWᵀ` restarts on the next stream.
pub fn fastica_symmetric_cubic<T: Scalar>(
    z: ArrayView2<'_, T>,
    max_iter: usize,
    tol: T,
    seed: u64,
) -> Result<IcaResult<T>> {
    let (k, t) = z.dim();
    if k == 0 || t < 2 {
        return Err(Error::Input(format!("FastICA needs a nonempty k×T matrix, got {k}x{t}")));
    }
    if max_iter < 1 {
        return Err(Error::Input("max_iter must be at least 1".into()));
    }
    if !(tol > T::zero()) {
        return Err(Error::Input(format!("tol must be positive, got {tol}")));
    }
    check_whitened(z)?;
    let n = T::of_usize(t);
    let three = T::of(3.0);

    'restart: for stream in 0..MAX_RESTARTS {
        let mut rng = stream_rng(seed, stream);
        let init = Array2::from_shape_fn((k, k), |_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            T::of(v)
        });
        let Some(mut w) = symmetric_orthogonalize(&init)? else {
            continue 'restart;
        };
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=max_iter {
            iterations = it;
            let y = w.dot(&z);
            let cubed = y.mapv(|v| v * v * v);
            let target = cubed.dot(&z.t()).mapv(|v| v / n) - &w.mapv(|v| v * three);
            let Some(next) = symmetric_orthogonalize(&target)? else {
                continue 'restart;
            };
            let agreement = (0..k)
                .map(|i| next.row(i).dot(&w.row(i)).abs())
                .fold(T::infinity(), |m, v| m.min(v));
            w = next;
            if agreement >= T::one() - tol {
                converged = true;
                break;
            }
        }
        let components = w.dot(&z);
        return Ok(IcaResult { unmixing: w, components, iterations, converged });
    }
    Err(Error::Rank(format!(
        "symmetric orthogonalization was singular in {MAX_RESTARTS} restarts"
    )))
}

/// `min_{P,Λ} ‖W A − P Λ‖_F / √k` over permutations `P` and nonsingular
/// diagonal `Λ`.
///
/// For a fixed pairing of column `j` with row `π(j)`, the best diagonal entry
/// is `G[π(j), j]`, leaving every other entry of the column as residual. The
/// pairing maximizing the kept energy `Σ_j G[π(j),j]²` is a linear assignment.
pub fn unmixing_error<T: Scalar>(w: ArrayView2<'_, T>, a: ArrayView2<'_, T>) -> Result<T> {
    let k = w.nrows();
    if w.ncols() != a.nrows() || a.ncols() != k {
        return Err(Error::Input(format!(
            "W is {}x{} and A is {}x{}; W·A must be square",
            k,
            w.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    if k == 0 {
        return Err(Error::Input("empty matrices".into()));
    }
    let g = w.dot(&a);
    let cost = g.mapv(|v| -(v * v));
    let assignment = solve_min_cost(cost.view())?;
    // Sum the unassigned entries directly; ‖G‖² − kept cancels badly near zero.
    let residual: T = g
        .indexed_iter()
        .filter(|((row, col), _)| assignment[*row] != *col)
        .map(|(_, &v)| v * v)
        .sum();
    Ok((residual / T::of_usize(k)).sqrt())
}
