//! Population bounds on projection kurtosis and the computable model-order
//! screen.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ica::whiten;
use crate::scalar::Scalar;
use crate::seeding::child_seed;
use crate::stats::{bootstrap_sigma0, excess_kurtosis};

/// `c_b · κ_max / R`, the worst-case contrast of a balanced projection.
pub fn redundancy_bound<T: Scalar>(kappa_max: T, c_b: T, r: usize) -> T {
    c_b * kappa_max / T::of_usize(r)
}

/// `κ_max / R_eff`, valid for any weight vector.
pub fn reff_bound<T: Scalar>(kappa_max: T, r_eff: T) -> T {
    kappa_max / r_eff
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viability<T> {
    pub finite_sample_ok: bool,
    pub population_ok: Option<bool>,
    /// The tighter of the finite-sample and (if requested) population ceilings.
    pub ceiling: T,
}

/// Necessary width condition for a balanced projection to clear the
/// `σ0/√T` noise floor, and optionally a minimum population contrast
/// `kappa_star`.
pub fn viability_check<T: Scalar>(
    r: usize,
    kappa_max: T,
    sigma0: T,
    t: usize,
    c_b: T,
    kappa_star: Option<T>,
) -> Viability<T> {
    let rf = T::of_usize(r);
    let finite_ceiling = c_b * kappa_max * T::of_usize(t).sqrt() / sigma0;
    let population_ceiling = kappa_star.map(|ks| c_b * kappa_max / ks);
    Viability {
        finite_sample_ok: rf < finite_ceiling,
        population_ok: population_ceiling.map(|c| rf <= c),
        ceiling: population_ceiling.map_or(finite_ceiling, |c| c.min(finite_ceiling)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Viable,
    CollapseExpected,
}

pub const PROXY_DISCLAIMER: &str = "principal-component directions are a coarse proxy for ICA-active width; \
the screen detects hopeless regimes and does not predict contrast";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport<T> {
    pub k: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub kappa_max_hat: T,
    pub sigma0_hat: T,
    pub c_b_policy: T,
    pub k_max_screen: T,
    pub per_direction_kurtoses: Vec<T>,
    pub verdict: Verdict,
    pub proxy_disclaimer: String,
}

/// `max(1, 4 ln k)`; a balance constant below one is impossible.
pub fn default_c_b_policy<T: Scalar>(k: usize) -> T {
    (T::of(4.0) * T::of_usize(k).ln()).max(T::one())
}

/// Screen candidate model order `k` for `X` (`p×T`, rows are variables).
///
/// 1. whiten onto the top-`k` principal components;
/// 2. sample kurtosis of each whitened direction;
/// 3. `κ̂_max = max|κ̂_i|` and `σ̂0` = largest per-direction bootstrap estimate
///    (`resamples` resamples each);
/// 4. `c_b` from `c_b_policy`, defaulting to [`default_c_b_policy`];
/// 5. `k_max = c_b κ̂_max √T / σ̂0`; collapse is expected when `k > k_max`.
pub fn screen_model_order<T: Scalar>(
    data: ArrayView2<'_, T>,
    k: usize,
    resamples: usize,
    seed: u64,
    c_b_policy: Option<T>,
) -> Result<ScreeningReport<T>> {
    let white = whiten(data, k)?;
    let t = data.ncols();
    let rows: Vec<Vec<T>> = white.whitened.rows().into_iter().map(|r| r.to_vec()).collect();
    let per_direction_kurtoses: Vec<T> = rows.iter().map(|r| excess_kurtosis(r)).collect::<Result<_>>()?;
    let kappa_max_hat = per_direction_kurtoses.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let sigmas: Vec<T> = rows
        .par_iter()
        .enumerate()
        .map(|(i, r)| bootstrap_sigma0(r, resamples, child_seed(seed, i as u64)))
        .collect::<Result<_>>()?;
    let sigma0_hat = sigmas.iter().fold(T::zero(), |m, v| m.max(*v));
    let c_b_policy = c_b_policy.unwrap_or_else(|| default_c_b_policy(k));
    let k_max_screen = c_b_policy * kappa_max_hat * T::of_usize(t).sqrt() / sigma0_hat;
    let verdict = if T::of_usize(k) > k_max_screen { Verdict::CollapseExpected } else { Verdict::Viable };
    Ok(ScreeningReport {
        k,
        t,
        kappa_max_hat,
        sigma0_hat,
        c_b_policy,
        k_max_screen,
        per_direction_kurtoses,
        verdict,
        proxy_disclaimer: PROXY_DISCLAIMER.to_string(),
    })
}
