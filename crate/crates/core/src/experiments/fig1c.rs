//! Contrast restoration by sign-consistent purification.
//!
//! For each `R` in grid `R`, sources are Student-t with `df` linearly spaced
//! on `[df_min, df_max]`. Each trial measures the full balanced projection
//! and, for every `m` in grid `m`:
//!
//! - oracle mode: the balanced weights restricted to the `m` largest
//!   population kurtoses;
//! - sample mode: the top-`m` sample kurtoses of the sign chosen by
//!   [`select_sign_consistent`], recombined with equal weights.
//!
//! Sample mode treats the source rows as perfectly separated preliminary
//! components, so it isolates the selection step. One record per trial keeps
//! every `m` on the same draw; measured keys carry an `_m{m}` suffix.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use super::{grid_point, mean_sem, ExperimentConfig, ExperimentName, TrialRecord};
use crate::error::{Error, Result};
use crate::mixing::{make_balanced_weights, noisy_projection_kurtosis};
use crate::purification::{oracle_purify, purified_contrast, purified_series, select_sign_consistent};
use crate::seeding::child_seed;
use crate::sources::{sample_sources, SourceSpec};
use crate::stats::excess_kurtosis;

pub(super) fn validate(config: &ExperimentConfig) -> Result<()> {
    let (lo, hi) = (config.param("df_min")?, config.param("df_max")?);
    if !(lo > 4.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::Input(format!("fig1c needs 4 < df_min ≤ df_max, got [{lo}, {hi}]")));
    }
    if !(config.param("tau")? > 0.0) {
        return Err(Error::Input("tau must be positive".into()));
    }
    let ms = config.count_grid("m")?;
    for r in config.count_grid("R")? {
        if let Some(m) = ms.iter().find(|&&m| m > r) {
            return Err(Error::Input(format!("m = {m} exceeds R = {r}")));
        }
    }
    Ok(())
}

/// Source laws for width `r`: df linearly spaced on `[df_min, df_max]`.
pub fn source_specs(config: &ExperimentConfig, r: usize) -> Result<Vec<SourceSpec>> {
    let (lo, hi) = (config.param("df_min")?, config.param("df_max")?);
    Ok((0..r)
        .map(|j| {
            let df = if r == 1 { lo } else { lo + (hi - lo) * j as f64 / (r - 1) as f64 };
            SourceSpec::student_t(df)
        })
        .collect())
}

fn measured_contrast(series: &mut [f64], snr: Option<f64>, noise_seed: u64) -> Result<f64> {
    if let Some(snr) = snr {
        super::add_noise(series, snr, noise_seed);
    }
    Ok(excess_kurtosis(series)?.abs())
}

fn run_trial(config: &ExperimentConfig, r: usize, trial: usize) -> Result<TrialRecord> {
    let mut rec = TrialRecord::new(config, grid_point([("R", r.into())]), trial);
    let seed = rec.seed_used;
    let specs = source_specs(config, r)?;
    let sources = sample_sources::<f64>(&specs, config.t, child_seed(seed, 0))?;
    let kappas = sources.population_kurtoses();
    let rows: &Array2<f64> = &sources.data;
    let kappa_hats: Vec<f64> = rows.rows().into_iter().map(|row| excess_kurtosis(&row.to_vec())).collect::<Result<_>>()?;
    let adjust = |k: f64| config.noise_snr.map_or(Ok(k), |snr| noisy_projection_kurtosis(k, snr));

    let w = make_balanced_weights::<f64>(r)?;
    let all: Vec<usize> = (0..r).collect();
    let mut baseline = purified_series(rows.view(), &all)?;
    rec.set("baseline_abs_kappa", measured_contrast(&mut baseline, config.noise_snr, child_seed(seed, 1))?);
    rec.set("baseline_population", adjust(kappas.iter().sum::<f64>() / (r * r) as f64)?);

    let tau = config.param("tau")?;
    for (i, m) in config.count_grid("m")?.into_iter().enumerate() {
        let oracle = oracle_purify(&w, &kappas, m)?;
        let mut y = vec![0.0; config.t];
        for (&wj, &j) in oracle.weights.weights.iter().zip(&oracle.weights.active_set) {
            for (o, v) in y.iter_mut().zip(rows.row(j)) {
                *o += wj * v;
            }
        }
        let noise_base = child_seed(seed, 1000 + 2 * i as u64);
        rec.set(&format!("oracle_abs_kappa_m{m}"), measured_contrast(&mut y, config.noise_snr, noise_base)?);
        rec.set(&format!("oracle_population_m{m}"), adjust(oracle.population_kurtosis.expect("oracle mode"))?);
        rec.set(&format!("lower_bound_m{m}"), adjust(oracle.lower_bound)?);

        let selection = select_sign_consistent(&kappa_hats, m, tau)?;
        let ambiguous = selection.is_ambiguous();
        let plan = selection.resolve(|p| purified_contrast(rows.view(), &p.selected))?;
        let mut ys = purified_series(rows.view(), &plan.selected)?;
        rec.set(&format!("sample_abs_kappa_m{m}"), measured_contrast(&mut ys, config.noise_snr, child_seed(noise_base, 1))?);
        rec.set(&format!("sample_selected_m{m}"), plan.m as f64);
        rec.set(&format!("sample_ambiguous_m{m}"), if ambiguous { 1.0 } else { 0.0 });
    }
    Ok(rec)
}

pub fn run_fig1c(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    if config.name != ExperimentName::Fig1c {
        return Err(Error::Precondition(format!("run_fig1c called with {} config", config.name)));
    }
    validate(config)?;
    let units: Vec<(usize, usize)> = config
        .count_grid("R")?
        .into_iter()
        .flat_map(|r| (0..config.trials).map(move |t| (r, t)))
        .collect();
    units.par_iter().map(|&(r, t)| run_trial(config, r, t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1cPoint {
    pub m: usize,
    pub oracle_population: f64,
    pub lower_bound: f64,
    pub oracle_mean_abs_kappa: f64,
    pub oracle_sem_abs_kappa: f64,
    pub sample_mean_abs_kappa: f64,
    pub sample_sem_abs_kappa: f64,
    /// Oracle mean contrast over baseline mean contrast.
    pub oracle_gain: f64,
    pub sample_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1cPanel {
    #[serde(rename = "R")]
    pub r: usize,
    pub baseline_mean_abs_kappa: f64,
    pub baseline_sem_abs_kappa: f64,
    pub baseline_population: f64,
    pub points: Vec<Fig1cPoint>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1cSummary {
    pub panels: Vec<Fig1cPanel>,
}

pub fn summarize_fig1c(config: &ExperimentConfig, records: &[TrialRecord]) -> Result<Fig1cSummary> {
    let mut rs = config.count_grid("R")?;
    rs.sort_unstable();
    rs.dedup();
    let mut ms = config.count_grid("m")?;
    ms.sort_unstable();
    ms.dedup();
    let panels = rs
        .into_iter()
        .map(|r| {
            let at = |rec: &TrialRecord| rec.grid_f64("R") == Some(r as f64);
            let (baseline_mean_abs_kappa, baseline_sem_abs_kappa, trials) = mean_sem(records, "baseline_abs_kappa", at);
            let (baseline_population, _, _) = mean_sem(records, "baseline_population", at);
            let points = ms
                .iter()
                .map(|&m| {
                    let (oracle_population, _, _) = mean_sem(records, &format!("oracle_population_m{m}"), at);
                    let (lower_bound, _, _) = mean_sem(records, &format!("lower_bound_m{m}"), at);
                    let (om, os, _) = mean_sem(records, &format!("oracle_abs_kappa_m{m}"), at);
                    let (sm, ss, _) = mean_sem(records, &format!("sample_abs_kappa_m{m}"), at);
                    Fig1cPoint {
                        m,
                        oracle_population,
                        lower_bound,
                        oracle_mean_abs_kappa: om,
                        oracle_sem_abs_kappa: os,
                        sample_mean_abs_kappa: sm,
                        sample_sem_abs_kappa: ss,
                        oracle_gain: om / baseline_mean_abs_kappa,
                        sample_gain: sm / baseline_mean_abs_kappa,
                    }
                })
                .collect();
            Fig1cPanel { r, baseline_mean_abs_kappa, baseline_sem_abs_kappa, baseline_population, points, trials }
        })
        .collect();
    Ok(Fig1cSummary { panels })
}
