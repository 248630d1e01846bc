//! Mixing matrices, normalized projection weights, and exact propagation of
//! population kurtosis through a linear projection.

use ndarray::{Array1, Array2, ArrayView1};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::condition_number;
use crate::scalar::Scalar;
use crate::seeding::{child_seed, stream_rng};

/// Default relative threshold below which `|a_jᵀu|` counts as inactive.
pub const DEFAULT_ACTIVE_TOL: f64 = 1e-12;

/// Square invertible mixing matrix `A` (columns are source loadings).
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix<T> {
    pub entries: Array2<T>,
    pub condition: T,
}

impl<T: Scalar> MixingMatrix<T> {
    /// Wraps `entries`, rejecting non-square or ill-conditioned input.
    pub fn new(entries: Array2<T>, max_condition: T) -> Result<Self> {
        let (p, k) = entries.dim();
        if p != k || p == 0 {
            return Err(Error::Input(format!("mixing matrix must be square and nonempty, got {p}x{k}")));
        }
        let condition = condition_number(entries.view())?;
        if !(condition.is_finite() && condition <= max_condition) {
            return Err(Error::Rank(format!(
                "mixing matrix condition {condition} exceeds ceiling {max_condition}"
            )));
        }
        Ok(MixingMatrix { entries, condition })
    }

    pub fn identity(k: usize) -> Self {
        MixingMatrix { entries: Array2::eye(k), condition: T::one() }
    }

    /// Gaussian random matrix, redrawn until its condition number is at most
    /// `max_condition`. Draw `n` uses stream 0 of `child_seed(seed, n)`.
    pub fn random_well_conditioned(k: usize, max_condition: f64, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Input("mixing dimension must be positive".into()));
        }
        if !(max_condition >= 1.0) {
            return Err(Error::Input(format!("condition ceiling must be ≥ 1, got {max_condition}")));
        }
        for attempt in 0..10_000u64 {
            let mut rng = stream_rng(child_seed(seed, attempt), 0);
            let entries = Array2::from_shape_fn((k, k), |_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::of(z)
            });
            if let Ok(m) = Self::new(entries, T::of(max_condition)) {
                return Ok(m);
            }
        }
        Err(Error::Rank(format!(
            "no {k}x{k} Gaussian draw met condition ceiling {max_condition}"
        )))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Normalized projection coefficients over the active set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionWeights<T> {
    pub weights: Vec<T>,
    pub active_set: Vec<usize>,
    pub r: usize,
    pub r_eff: T,
    pub c_b: T,
}

impl<T: Scalar> ProjectionWeights<T> {
    /// Normalize raw coefficients, keeping every index whose magnitude
    /// exceeds `active_tol · max|coef|`. Signs are preserved.
    pub fn from_coefficients(coefficients: &[T], active_tol: T) -> Result<Self> {
        if active_tol < T::zero() {
            return Err(Error::Input(format!("active_tol must be ≥ 0, got {active_tol}")));
        }
        let peak = coefficients.iter().fold(T::zero(), |m, c| m.max(c.abs()));
        if !(peak > T::zero()) || !peak.is_finite() {
            return Err(Error::DegenerateDirection("projection has no active source".into()));
        }
        let threshold = active_tol * peak;
        let active_set: Vec<usize> = coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > threshold)
            .map(|(i, _)| i)
            .collect();
        let raw: Vec<T> = active_set.iter().map(|&i| coefficients[i]).collect();
        Self::normalized(raw, active_set)
    }

    /// Normalize `raw` (already restricted to `active_set`).
    pub fn normalized(raw: Vec<T>, active_set: Vec<usize>) -> Result<Self> {
        if raw.is_empty() || raw.len() != active_set.len() {
            return Err(Error::DegenerateDirection("empty active set".into()));
        }
        // Scale by the peak first so very small or large inputs don't underflow.
        let peak = raw.iter().fold(T::zero(), |m, c| m.max(c.abs()));
        if !(peak > T::zero()) {
            return Err(Error::DegenerateDirection("all weights are zero".into()));
        }
        let norm = raw.iter().map(|&c| (c / peak) * (c / peak)).sum::<T>().sqrt() * peak;
        let weights: Vec<T> = raw.iter().map(|&c| c / norm).collect();
        let r = weights.len();
        let fourth = weights.iter().map(|&w| w * w * w * w).sum::<T>();
        let max_sq = weights.iter().fold(T::zero(), |m, &w| m.max(w * w));
        Ok(ProjectionWeights {
            weights,
            active_set,
            r,
            r_eff: T::one() / fourth,
            c_b: T::of_usize(r) * max_sq,
        })
    }

    pub fn sum_of_squares(&self) -> T {
        self.weights.iter().map(|&w| w * w).sum()
    }

    /// Weights as a one-column CSV with header `w_j`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("w_j\n");
        for w in &self.weights {
            out.push_str(&format!("{:.16e}\n", w.as_f64()));
        }
        out
    }
}

/// Weights of the standardized projection `uᵀA s` onto the sources.
pub fn projection_weights<T: Scalar>(
    mixing: &MixingMatrix<T>,
    direction: ArrayView1<'_, T>,
    active_tol: T,
) -> Result<ProjectionWeights<T>> {
    if direction.len() != mixing.entries.nrows() {
        return Err(Error::Input(format!(
            "direction has length {} but mixing matrix has {} rows",
            direction.len(),
            mixing.entries.nrows()
        )));
    }
    if direction.iter().all(|v| *v == T::zero()) {
        return Err(Error::DegenerateDirection("direction u is zero".into()));
    }
    // a_jᵀu for every column j.
    let coefficients: Array1<T> = mixing.entries.t().dot(&direction);
    ProjectionWeights::from_coefficients(coefficients.as_slice().expect("contiguous"), active_tol)
}

/// Participation ratio `1 / Σ w_j⁴`.
pub fn effective_width<T: Scalar>(weights: &ProjectionWeights<T>) -> T {
    T::one() / weights.weights.iter().map(|&w| w * w * w * w).sum::<T>()
}

/// Smallest `c_b` with `max_j w_j² ≤ c_b / R`.
pub fn balance_constant<T: Scalar>(weights: &ProjectionWeights<T>) -> T {
    let max_sq = weights.weights.iter().fold(T::zero(), |m, &w| m.max(w * w));
    T::of_usize(weights.r) * max_sq
}

/// Exact `Σ_j w_j⁴ κ(s_j)`; cross-cumulants of independent sources vanish.
pub fn population_projection_kurtosis<T: Scalar>(weights: &ProjectionWeights<T>, source_kurtoses: &[T]) -> Result<T> {
    if source_kurtoses.len() != weights.weights.len() {
        return Err(Error::Input(format!(
            "{} kurtoses for {} active weights",
            source_kurtoses.len(),
            weights.weights.len()
        )));
    }
    Ok(weights
        .weights
        .iter()
        .zip(source_kurtoses)
        .map(|(&w, &k)| w * w * w * w * k)
        .sum())
}

/// Excess kurtosis after adding independent Gaussian noise at projected
/// signal-to-noise amplitude ratio `snr`.
pub fn noisy_projection_kurtosis<T: Scalar>(signal_kurtosis: T, snr: T) -> Result<T> {
    if !(snr >= T::zero()) {
        return Err(Error::Input(format!("snr must be ≥ 0, got {snr}")));
    }
    let s2 = snr * snr;
    if s2.is_infinite() {
        return Ok(signal_kurtosis);
    }
    // snr⁴/(snr²+1)² written as a square of a ratio to stay finite for large snr.
    let ratio = s2 / (s2 + T::one());
    Ok(ratio * ratio * signal_kurtosis)
}

/// Equal weights `1/√R`.
pub fn make_balanced_weights<T: Scalar>(r: usize) -> Result<ProjectionWeights<T>> {
    if r < 1 {
        return Err(Error::Input("R must be at least 1".into()));
    }
    ProjectionWeights::normalized(vec![T::one(); r], (0..r).collect())
}

/// Weights with `w_j² ∝ j^(−alpha)`, `j = 1..R`.
pub fn make_powerlaw_weights<T: Scalar>(r: usize, alpha: T) -> Result<ProjectionWeights<T>> {
    if r < 1 {
        return Err(Error::Input("R must be at least 1".into()));
    }
    if !(alpha > T::zero()) {
        return Err(Error::Input(format!("alpha must be positive, got {alpha}")));
    }
    let half = alpha * T::of(0.5);
    let raw = (1..=r).map(|j| T::of_usize(j).powf(-half)).collect();
    ProjectionWeights::normalized(raw, (0..r).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBalanceProbe {
    pub fraction_within_log_bound: f64,
    pub max_weight_squares: Vec<f64>,
}

/// Log-factor constant used by [`block_balance_probe`]: the bound checked is
/// `max_j w_j² ≤ 4 ln R / R`.
pub const BLOCK_BALANCE_LOG_CONSTANT: f64 = 4.0;

fn max_weight_square(normals: &[f64]) -> f64 {
    let total: f64 = normals.iter().map(|z| z * z).sum();
    normals.iter().fold(0.0f64, |m, z| m.max(z * z)) / total
}

/// Uniform directions on the unit sphere of `R^R`; draw `n` uses stream `n`
/// of `seed`.
pub fn block_balance_probe(r: usize, num_draws: usize, seed: u64) -> Result<BlockBalanceProbe> {
    if r < 2 {
        return Err(Error::Input(format!("block balance probe needs R ≥ 2, got {r}")));
    }
    if num_draws < 1 {
        return Err(Error::Input("need at least one draw".into()));
    }
    let bound = BLOCK_BALANCE_LOG_CONSTANT * (r as f64).ln() / r as f64;
    let max_weight_squares: Vec<f64> = (0..num_draws as u64)
        .map(|draw| {
            let mut rng = stream_rng(seed, draw);
            let z: Vec<f64> = (0..r).map(|_| StandardNormal.sample(&mut rng)).collect();
            max_weight_square(&z)
        })
        .collect();
    let within = max_weight_squares.iter().filter(|&&m| m <= bound).count();
    Ok(BlockBalanceProbe {
        fraction_within_log_bound: within as f64 / num_draws as f64,
        max_weight_squares,
    })
}
