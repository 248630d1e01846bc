//! FastICA unmixing error as the source kurtoses crowd together.
//!
//! Grid `inv_delta_kappa` holds `x = 1/Δκ`. At each point the `k` sources
//! are Student-t with kurtoses `κ_0 + jΔκ`, `j = 0..k`, where the weakest
//! kurtosis `κ_0 = 1 / (kappa_base_intercept + kappa_base_slope · x)` also
//! shrinks as the gap closes.

use rayon::prelude::*;
use serde::Serialize;

use super::{grid_point, mean_sem, ExperimentConfig, ExperimentName, TrialRecord};
use crate::error::{Error, Result};
use crate::ica::{fastica_symmetric_cubic, unmixing_error, whiten, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::mixing::MixingMatrix;
use crate::seeding::child_seed;
use crate::sources::{sample_sources, SourceSpec};
use crate::stats::{linear_fit, min_pairwise_gap, LinearFit};

pub(super) fn validate(config: &ExperimentConfig) -> Result<()> {
    let k = config.count_param("sources")?;
    if k < 2 {
        return Err(Error::Input("fig1a needs at least two sources".into()));
    }
    if config.t <= k {
        return Err(Error::Input("fig1a needs T > sources".into()));
    }
    if !(config.param("max_condition")? >= 1.0) {
        return Err(Error::Input("max_condition must be at least 1".into()));
    }
    for x in config.grid("inv_delta_kappa")? {
        source_kurtoses(config, *x)?;
    }
    Ok(())
}

/// Population kurtoses of the sources at grid value `x = 1/Δκ`.
pub fn source_kurtoses(config: &ExperimentConfig, x: f64) -> Result<Vec<f64>> {
    if !(x > 0.0) {
        return Err(Error::Input(format!("inv_delta_kappa must be positive, got {x}")));
    }
    let k = config.count_param("sources")?;
    let base = 1.0 / (config.param("kappa_base_intercept")? + config.param("kappa_base_slope")? * x);
    if !(base > 0.0 && base.is_finite()) {
        return Err(Error::Input(format!("weakest kurtosis must be positive, got {base}")));
    }
    Ok((0..k).map(|j| base + j as f64 / x).collect())
}

fn run_trial(config: &ExperimentConfig, x: f64, trial: usize) -> Result<TrialRecord> {
    let mut rec = TrialRecord::new(config, grid_point([("inv_delta_kappa", x.into())]), trial);
    let seed = rec.seed_used;
    let kappas = source_kurtoses(config, x)?;
    let specs: Vec<SourceSpec> = kappas.iter().map(|&k| SourceSpec::student_t_with_kurtosis(k)).collect::<Result<_>>()?;
    let k = specs.len();
    let sources = sample_sources::<f64>(&specs, config.t, child_seed(seed, 0))?;
    let mixing = MixingMatrix::<f64>::random_well_conditioned(k, config.param("max_condition")?, child_seed(seed, 1))?;
    let mut x_data = mixing.entries.dot(&sources.data);
    if let Some(snr) = config.noise_snr {
        for (i, mut row) in x_data.rows_mut().into_iter().enumerate() {
            let mut v = row.to_vec();
            super::add_noise(&mut v, snr, child_seed(seed, 100 + i as u64));
            row.assign(&ndarray::Array1::from(v));
        }
    }
    let white = whiten(x_data.view(), k)?;
    let ica = fastica_symmetric_cubic(white.whitened.view(), DEFAULT_MAX_ITER, DEFAULT_TOL, child_seed(seed, 2))?;
    let composite = ica.unmixing.dot(&white.whitener);
    let err = unmixing_error(composite.view(), mixing.entries.view())?;
    rec.set("err", err)
        .set("delta_kappa", min_pairwise_gap(&kappas)?)
        .set("kappa_min", kappas.iter().cloned().fold(f64::INFINITY, f64::min))
        .set("kappa_max", kappas.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .set("condition", mixing.condition)
        .set("iterations", ica.iterations as f64)
        .set("converged", if ica.converged { 1.0 } else { 0.0 });
    Ok(rec)
}

pub fn run_fig1a(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    if config.name != ExperimentName::Fig1a {
        return Err(Error::Precondition(format!("run_fig1a called with {} config", config.name)));
    }
    validate(config)?;
    let units: Vec<(f64, usize)> = config
        .grid("inv_delta_kappa")?
        .iter()
        .flat_map(|&x| (0..config.trials).map(move |t| (x, t)))
        .collect();
    units.par_iter().map(|&(x, t)| run_trial(config, x, t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1aPoint {
    pub inv_delta_kappa: f64,
    pub mean_err: f64,
    pub sem_err: f64,
    pub converged_fraction: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1aSummary {
    pub points: Vec<Fig1aPoint>,
    /// Mean error against `1/Δκ`.
    pub fit: LinearFit<f64>,
    /// Mean error at the largest `1/Δκ` over that at the smallest.
    pub ratio_largest_to_smallest: f64,
}

pub fn summarize_fig1a(config: &ExperimentConfig, records: &[TrialRecord]) -> Result<Fig1aSummary> {
    let mut xs: Vec<f64> = config.grid("inv_delta_kappa")?.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let points: Vec<Fig1aPoint> = xs
        .iter()
        .map(|&x| {
            let at = |r: &TrialRecord| r.grid_f64("inv_delta_kappa") == Some(x);
            let (mean_err, sem_err, trials) = mean_sem(records, "err", at);
            let (converged_fraction, _, _) = mean_sem(records, "converged", at);
            Fig1aPoint { inv_delta_kappa: x, mean_err, sem_err, converged_fraction, trials }
        })
        .collect();
    let means: Vec<f64> = points.iter().map(|p| p.mean_err).collect();
    let fit = if points.len() >= 2 {
        linear_fit(&xs, &means)?
    } else {
        LinearFit { slope: f64::NAN, intercept: f64::NAN, r_squared: f64::NAN }
    };
    let ratio_largest_to_smallest = means.last().copied().unwrap_or(f64::NAN) / means.first().copied().unwrap_or(f64::NAN);
    Ok(Fig1aSummary { points, fit, ratio_largest_to_smallest })
}
