//! Sign-consistent subset selection ("purification").
//!
//! Restricting a projection to `m` sources that share a kurtosis sign and
//! renormalizing leaves effective width at most `m`, so the contrast is at
//! least `κ_min / m` regardless of how wide the original mixture was. The
//! oracle path uses population kurtoses; the sample path works from
//! preliminary ICA components only.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ica::{fastica_symmetric_cubic, whiten, IcaResult, WhiteningResult, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::linalg::pseudo_inverse_full_row_rank;
use crate::mixing::ProjectionWeights;
use crate::scalar::Scalar;
use crate::stats::{bootstrap_sigma0, excess_kurtosis};

pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurificationMode {
    Oracle,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurificationPlan<T> {
    /// Selected indices, strongest `|κ|` first.
    pub selected: Vec<usize>,
    pub m: usize,
    /// The `m` asked for; larger than `m` when too few indices had the sign.
    pub requested_m: usize,
    pub consensus_sign: i8,
    pub tau: T,
    pub mode: PurificationMode,
}

/// Outcome of the sample-based sign rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignSelection<T> {
    /// `|Σ κ̂| ≥ τ`: the sign of the sum decides.
    Decided(PurificationPlan<T>),
    /// `|Σ κ̂| < τ`: one candidate per sign with at least one matching index,
    /// positive first. Pick with [`SignSelection::resolve`].
    Ambiguous(Vec<PurificationPlan<T>>),
}

impl<T: Scalar> SignSelection<T> {
    pub fn candidates(&self) -> Vec<&PurificationPlan<T>> {
        match self {
            SignSelection::Decided(p) => vec![p],
            SignSelection::Ambiguous(ps) => ps.iter().collect(),
        }
    }

    pub fn is_ambiguous(&self) -> bool {
        matches!(self, SignSelection::Ambiguous(_))
    }

    /// Keep the candidate with the largest `score` (a contrast magnitude).
    /// Ties go to the positive sign.
    pub fn resolve<F>(self, mut score: F) -> Result<PurificationPlan<T>>
    where
        F: FnMut(&PurificationPlan<T>) -> Result<T>,
    {
        match self {
            SignSelection::Decided(p) => Ok(p),
            SignSelection::Ambiguous(candidates) => {
                let mut best: Option<(T, PurificationPlan<T>)> = None;
                for plan in candidates {
                    let s = score(&plan)?;
                    let better = match &best {
                        None => true,
                        Some((b, bp)) => s > *b || (s == *b && plan.consensus_sign > bp.consensus_sign),
                    };
                    if better {
                        best = Some((s, plan));
                    }
                }
                best.map(|(_, p)| p)
                    .ok_or_else(|| Error::Selection("no sign candidate to resolve".into()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurifiedProjection<T> {
    /// Renormalized weights; `active_set` holds the original source indices.
    pub weights: ProjectionWeights<T>,
    pub population_kurtosis: Option<T>,
    /// `κ_min,M / m`.
    pub lower_bound: T,
}

fn sign_of<T: Scalar>(v: T) -> i8 {
    if v > T::zero() {
        1
    } else if v < T::zero() {
        -1
    } else {
        0
    }
}

/// Indices with the given kurtosis sign, strongest `|κ|` first, ties by
/// lower index.
fn ranked_with_sign<T: Scalar>(kappas: &[T], sign: i8) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..kappas.len()).filter(|&i| sign_of(kappas[i]) == sign).collect();
    idx.sort_by(|&a, &b| {
        kappas[b]
            .abs()
            .partial_cmp(&kappas[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// `κ_min,M / m`.
pub fn purified_lower_bound<T: Scalar>(kappa_min_m: T, m: usize) -> T {
    kappa_min_m / T::of_usize(m.max(1))
}

/// Restrict `w` to `positions` (indices into `w.weights`) and renormalize.
pub fn restrict_weights<T: Scalar>(w: &ProjectionWeights<T>, positions: &[usize]) -> Result<ProjectionWeights<T>> {
    if positions.iter().any(|&p| p >= w.weights.len()) {
        return Err(Error::Input("restriction index out of range".into()));
    }
    let raw: Vec<T> = positions.iter().map(|&p| w.weights[p]).collect();
    if raw.iter().all(|v| *v == T::zero()) {
        return Err(Error::Selection("selected subset has zero weight mass".into()));
    }
    let active: Vec<usize> = positions.iter().map(|&p| w.active_set[p]).collect();
    ProjectionWeights::normalized(raw, active)
}

/// Oracle purification: the `m` largest-`|κ|` sources of the majority
/// kurtosis sign, with the original weights restricted and renormalized.
///
/// `source_kurtoses` is aligned with `w.weights`. A majority tie goes to the
/// positive sign; if the majority sign has fewer than `m` members the other
/// sign is tried.
pub fn oracle_purify<T: Scalar>(
    w: &ProjectionWeights<T>,
    source_kurtoses: &[T],
    m: usize,
) -> Result<PurifiedProjection<T>> {
    if source_kurtoses.len() != w.weights.len() {
        return Err(Error::Input(format!(
            "{} kurtoses for {} weights",
            source_kurtoses.len(),
            w.weights.len()
        )));
    }
    if m < 1 {
        return Err(Error::Input("m must be at least 1".into()));
    }
    let positive = ranked_with_sign(source_kurtoses, 1);
    let negative = ranked_with_sign(source_kurtoses, -1);
    let order: [&Vec<usize>; 2] =
        if negative.len() > positive.len() { [&negative, &positive] } else { [&positive, &negative] };
    let pool = order
        .into_iter()
        .find(|c| c.len() >= m)
        .ok_or_else(|| Error::Selection(format!("no sign-consistent subset of size {m}")))?;
    let positions = &pool[..m];
    let weights = restrict_weights(w, positions)?;
    let kappas: Vec<T> = positions.iter().map(|&p| source_kurtoses[p]).collect();
    let population = weights
        .weights
        .iter()
        .zip(&kappas)
        .map(|(&x, &k)| x * x * x * x * k)
        .sum();
    let kappa_min = kappas.iter().fold(T::infinity(), |acc, k| acc.min(k.abs()));
    Ok(PurifiedProjection {
        weights,
        population_kurtosis: Some(population),
        lower_bound: purified_lower_bound(kappa_min, m),
    })
}

fn plan_for_sign<T: Scalar>(kappa_hats: &[T], m: usize, tau: T, sign: i8) -> Option<PurificationPlan<T>> {
    let ranked = ranked_with_sign(kappa_hats, sign);
    if ranked.is_empty() {
        return None;
    }
    let selected: Vec<usize> = ranked.into_iter().take(m).collect();
    Some(PurificationPlan {
        m: selected.len(),
        selected,
        requested_m: m,
        consensus_sign: sign,
        tau,
        mode: PurificationMode::Sample,
    })
}

/// Data-driven selection from sample kurtoses of candidate components.
///
/// `sign* = sign(Σ κ̂_j)` and the top-`m` matching indices by `|κ̂_j|` are
/// kept. When `|Σ κ̂_j| < tau` both signs are returned for downstream
/// comparison.
pub fn select_sign_consistent<T: Scalar>(kappa_hats: &[T], m: usize, tau: T) -> Result<SignSelection<T>> {
    if m < 1 || kappa_hats.len() < m {
        return Err(Error::Input(format!(
            "need 1 ≤ m ≤ {} candidates, got m = {m}",
            kappa_hats.len()
        )));
    }
    if !(tau > T::zero()) {
        return Err(Error::Input(format!("tau must be positive, got {tau}")));
    }
    if kappa_hats.iter().any(|k| !k.is_finite()) {
        return Err(Error::Input("sample kurtoses must be finite".into()));
    }
    if kappa_hats.iter().all(|k| *k == T::zero()) {
        return Err(Error::DegenerateSign("every sample kurtosis is exactly zero".into()));
    }
    let total: T = kappa_hats.iter().copied().sum();
    if total.abs() >= tau {
        let plan = plan_for_sign(kappa_hats, m, tau, sign_of(total)).expect("sum sign has members");
        Ok(SignSelection::Decided(plan))
    } else {
        let candidates: Vec<_> = [1i8, -1]
            .into_iter()
            .filter_map(|s| plan_for_sign(kappa_hats, m, tau, s))
            .collect();
        Ok(SignSelection::Ambiguous(candidates))
    }
}

/// `Σ_{j∈M} ŝ_j / √m`, the equal-weight purified series over rows of
/// `components`.
pub fn purified_series<T: Scalar>(components: ArrayView2<'_, T>, selected: &[usize]) -> Result<Vec<T>> {
    if selected.is_empty() {
        return Err(Error::Selection("empty selection".into()));
    }
    if selected.iter().any(|&i| i >= components.nrows()) {
        return Err(Error::Input(format!(
            "selection index out of range for {} components",
            components.nrows()
        )));
    }
    let scale = T::one() / T::of_usize(selected.len()).sqrt();
    let mut out = vec![T::zero(); components.ncols()];
    for &i in selected {
        for (o, &v) in out.iter_mut().zip(components.row(i)) {
            *o += v * scale;
        }
    }
    Ok(out)
}

/// `|κ̂|` of the equal-weight purified series.
pub fn purified_contrast<T: Scalar>(components: ArrayView2<'_, T>, selected: &[usize]) -> Result<T> {
    Ok(excess_kurtosis(&purified_series(components, selected)?)?.abs())
}

/// Bootstrap standard deviation of `κ̂(y_pur)`; a large value relative to the
/// contrast itself flags an unstable selection.
pub fn purified_contrast_stability<T: Scalar>(
    components: ArrayView2<'_, T>,
    selected: &[usize],
    resamples: usize,
    seed: u64,
) -> Result<T> {
    let y = purified_series(components, selected)?;
    let sigma0 = bootstrap_sigma0(&y, resamples, seed)?;
    Ok(sigma0 / T::of_usize(y.len()).sqrt())
}

/// Largest `|κ̂|` over the rows of `components`.
pub fn max_abs_kurtosis<T: Scalar>(components: ArrayView2<'_, T>) -> Result<T> {
    components
        .rows()
        .into_iter()
        .map(|r| excess_kurtosis(&r.to_vec()).map(|k| k.abs()))
        .try_fold(T::zero(), |m, k| k.map(|k| m.max(k)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerunResult<T> {
    #[serde(skip)]
    pub reduced_data: Array2<T>,
    pub reresult: IcaResult<T>,
    /// Largest `|κ̂|` over preliminary components.
    pub contrast_before: T,
    /// Largest `|κ̂|` over re-run components.
    pub contrast_after: T,
    /// `|κ̂|` of the equal-weight sum of the selected preliminary components.
    pub purified_contrast: T,
    /// Set when `contrast_after` does not exceed the Gaussian estimation
    /// floor `√(24/T)`.
    pub low_contrast: bool,
}

/// Project `data` onto the span of the selected estimated mixing vectors and
/// re-run FastICA there.
///
/// Mixing vectors are the selected columns of the pseudo-inverse of the
/// composite preliminary unmixing map (ICA unmixing after the whitener).
pub fn purify_and_rerun<T: Scalar>(
    data: ArrayView2<'_, T>,
    whitening: &WhiteningResult<T>,
    preliminary: &IcaResult<T>,
    plan: &PurificationPlan<T>,
    seed: u64,
) -> Result<RerunResult<T>> {
    let k = preliminary.unmixing.nrows();
    if plan.selected.is_empty() || plan.selected.iter().any(|&i| i >= k) {
        return Err(Error::Input(format!(
            "plan indices must lie in 0..{k}, got {:?}",
            plan.selected
        )));
    }
    if whitening.whitener.nrows() != k || data.nrows() != whitening.whitener.ncols() {
        return Err(Error::Input("whitener, unmixing and data dimensions disagree".into()));
    }
    let composite = preliminary.unmixing.dot(&whitening.whitener);
    let mixing_estimate = pseudo_inverse_full_row_rank(composite.view())?;
    let selected_columns = mixing_estimate.select(Axis(1), &plan.selected);
    // Least-squares coordinates in the selected basis: pinv(Â_M) = pinv(Â_Mᵀ)ᵀ.
    let coords = pseudo_inverse_full_row_rank(selected_columns.t())?.reversed_axes();
    let centered = &data - &whitening.mean.view().insert_axis(Axis(1));
    let reduced_data = coords.dot(&centered);

    let m = plan.selected.len();
    let white = whiten(reduced_data.view(), m)?;
    let reresult = fastica_symmetric_cubic(white.whitened.view(), DEFAULT_MAX_ITER, T::of(DEFAULT_TOL), seed)?;

    let preliminary_components = if preliminary.components.nrows() == k && preliminary.components.ncols() == data.ncols() {
        preliminary.components.clone()
    } else {
        preliminary.unmixing.dot(&whitening.whitener.dot(&centered))
    };
    let contrast_before = max_abs_kurtosis(preliminary_components.view())?;
    let contrast_after = max_abs_kurtosis(reresult.components.view())?;
    let purified = purified_contrast(preliminary_components.view(), &plan.selected)?;
    let floor = (T::of(24.0) / T::of_usize(data.ncols())).sqrt();
    Ok(RerunResult {
        reduced_data,
        reresult,
        contrast_before,
        contrast_after,
        purified_contrast: purified,
        low_contrast: !(contrast_after > floor),
    })
}

/// Preliminary decomposition that `purify` starts from; serializable so a
/// run can be resumed from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de> + Default"))]
pub struct Preliminary<T> {
    pub whitening: WhiteningResult<T>,
    pub ica: IcaResult<T>,
}

impl<T: Scalar> Preliminary<T> {
    /// Whiten `data` to `k` dimensions and run FastICA.
    pub fn fit(data: ArrayView2<'_, T>, k: usize, seed: u64) -> Result<Self> {
        let whitening = whiten(data, k)?;
        let ica = fastica_symmetric_cubic(whitening.whitened.view(), DEFAULT_MAX_ITER, T::of(DEFAULT_TOL), seed)?;
        Ok(Preliminary { whitening, ica })
    }

    /// Components of `data` under the stored whitener and unmixing matrix.
    pub fn components(&self, data: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if self.ica.unmixing.ncols() != self.whitening.whitener.nrows() {
            return Err(Error::Input("preliminary unmixing and whitener dimensions disagree".into()));
        }
        Ok(self.ica.unmixing.dot(&self.whitening.transform(data)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurifyReport<T> {
    pub plan: PurificationPlan<T>,
    pub ambiguous: bool,
    /// Sample kurtoses of the preliminary components.
    pub candidate_kurtoses: Vec<T>,
    pub contrast_before: T,
    pub contrast_after: T,
    pub purified_contrast: T,
    pub low_contrast: bool,
    pub rerun_iterations: usize,
    pub rerun_converged: bool,
}

/// Sample-mode purification end to end: preliminary ICA (or the supplied
/// one), sign-consistent selection of `m` components, ambiguity resolved by
/// purified contrast, then a re-run on the selected subspace.
pub fn purify_data<T: Scalar>(
    data: ArrayView2<'_, T>,
    preliminary: &Preliminary<T>,
    m: usize,
    tau: T,
    seed: u64,
) -> Result<PurifyReport<T>> {
    let mut ica = preliminary.ica.clone();
    ica.components = preliminary.components(data)?;
    let candidate_kurtoses: Vec<T> = ica
        .components
        .rows()
        .into_iter()
        .map(|r| excess_kurtosis(&r.to_vec()))
        .collect::<Result<_>>()?;
    let selection = select_sign_consistent(&candidate_kurtoses, m, tau)?;
    let ambiguous = selection.is_ambiguous();
    let plan = selection.resolve(|p| purified_contrast(ica.components.view(), &p.selected))?;
    let rerun = purify_and_rerun(data, &preliminary.whitening, &ica, &plan, seed)?;
    Ok(PurifyReport {
        plan,
        ambiguous,
        candidate_kurtoses,
        contrast_before: rerun.contrast_before,
        contrast_after: rerun.contrast_after,
        purified_contrast: rerun.purified_contrast,
        low_contrast: rerun.low_contrast,
        rerun_iterations: rerun.reresult.iterations,
        rerun_converged: rerun.reresult.converged,
    })
}
