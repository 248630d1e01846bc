//! Redundancy decay of projection kurtosis and the estimation floor.
//!
//! Three curves share one record layout, told apart by the `curve` grid key:
//!
//! - `balanced`: `y = R^{-1/2} Σ s_j` for each `R` in grid `R`;
//! - `powerlaw`: `w_j² ∝ j^{-alpha}` for each `R` in grid `R_powerlaw`;
//! - `inset`: the balanced projection at `R = inset_R` for each `T` in grid
//!   `T_inset`, replicated `inset_reps` times.
//!
//! Sources are i.i.d. unit-variance Student-t with `df` degrees of freedom.

use rayon::prelude::*;
use serde::Serialize;

use super::{grid_point, mean_sem, ExperimentConfig, ExperimentName, GridPoint, TrialRecord};
use crate::error::{Error, Result};
use crate::mixing::{make_balanced_weights, make_powerlaw_weights, noisy_projection_kurtosis, ProjectionWeights};
use crate::seeding::child_seed;
use crate::sources::{population_excess_kurtosis, sample_projection, SourceSpec};
use crate::stats::{excess_kurtosis, fit_inverse_law, loglog_slope, std_dev, FitResult};

pub(super) fn validate(config: &ExperimentConfig) -> Result<()> {
    SourceSpec::student_t(config.param("df")?).validate()?;
    config.count_grid("R")?;
    config.count_grid("R_powerlaw")?;
    if config.count_grid("T_inset")?.iter().any(|&t| t < 4) {
        return Err(Error::Input("T_inset values must be at least 4".into()));
    }
    config.count_param("inset_R")?;
    config.count_param("inset_reps")?;
    let alpha = config.param("alpha")?;
    if !alpha.is_finite() {
        return Err(Error::Input("alpha must be finite".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum Curve {
    Balanced,
    PowerLaw,
    Inset,
}

impl Curve {
    fn label(&self) -> &'static str {
        match self {
            Curve::Balanced => "balanced",
            Curve::PowerLaw => "powerlaw",
            Curve::Inset => "inset",
        }
    }
}

struct Unit {
    curve: Curve,
    r: usize,
    t: usize,
    trial: usize,
}

impl Unit {
    fn grid_point(&self) -> GridPoint {
        match self.curve {
            Curve::Inset => grid_point([("curve", self.curve.label().into()), ("R", self.r.into()), ("T", self.t.into())]),
            _ => grid_point([("curve", self.curve.label().into()), ("R", self.r.into())]),
        }
    }
}

fn weights_for(config: &ExperimentConfig, curve: Curve, r: usize) -> Result<ProjectionWeights<f64>> {
    match curve {
        Curve::PowerLaw => make_powerlaw_weights(r, config.param("alpha")?),
        _ => make_balanced_weights(r),
    }
}

fn run_unit(config: &ExperimentConfig, unit: &Unit) -> Result<TrialRecord> {
    let mut rec = TrialRecord::new(config, unit.grid_point(), unit.trial);
    let seed = rec.seed_used;
    let spec = SourceSpec::student_t(config.param("df")?);
    let kappa0 = population_excess_kurtosis(&spec)?;
    let w = weights_for(config, unit.curve, unit.r)?;
    let specs = vec![spec; unit.r];
    let mut y = sample_projection(&specs, &w.weights, unit.t, child_seed(seed, 0))?;
    let mut population = kappa0 / w.r_eff;
    if let Some(snr) = config.noise_snr {
        super::add_noise(&mut y, snr, seed);
        population = noisy_projection_kurtosis(population, snr)?;
    }
    let kappa_hat = excess_kurtosis(&y)?;
    rec.set("kappa_hat", kappa_hat)
        .set("abs_kappa_hat", kappa_hat.abs())
        .set("population_kurtosis", population)
        .set("r_eff", w.r_eff)
        .set("c_b", w.c_b);
    Ok(rec)
}

pub fn run_fig1b(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    if config.name != ExperimentName::Fig1b {
        return Err(Error::Precondition(format!("run_fig1b called with {} config", config.name)));
    }
    validate(config)?;
    let mut units = Vec::new();
    for (curve, key) in [(Curve::Balanced, "R"), (Curve::PowerLaw, "R_powerlaw")] {
        for r in config.count_grid(key)? {
            units.extend((0..config.trials).map(|trial| Unit { curve, r, t: config.t, trial }));
        }
    }
    let inset_r = config.count_param("inset_R")?;
    let reps = config.count_param("inset_reps")?;
    for t in config.count_grid("T_inset")? {
        units.extend((0..reps).map(|trial| Unit { curve: Curve::Inset, r: inset_r, t, trial }));
    }
    units.par_iter().map(|u| run_unit(config, u)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    #[serde(rename = "R")]
    pub r: usize,
    pub r_eff: f64,
    pub mean_abs_kappa: f64,
    pub sem_abs_kappa: f64,
    pub std_kappa: f64,
    /// `√T · std(κ̂)` over the trials at this point.
    pub sigma0_hat: f64,
    pub population_kurtosis: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InsetPoint {
    #[serde(rename = "T")]
    pub t: usize,
    pub mean_abs_kappa: f64,
    pub std_kappa: f64,
    pub sigma0_hat: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1bSummary {
    pub balanced: Vec<CurvePoint>,
    pub powerlaw: Vec<CurvePoint>,
    /// `c / R` fitted to the balanced means.
    pub inverse_fit: FitResult<f64>,
    pub inset: Vec<InsetPoint>,
    /// Slope of `log std(κ̂)` against `log T`.
    pub inset_slope: f64,
    /// Mean of the per-`T` inset `σ̂0` values.
    pub sigma0_pooled: f64,
    /// Smallest inset `T` at which mean `|κ̂|` exceeds `std(κ̂)`.
    pub crossover_t: Option<usize>,
}

fn values(records: &[TrialRecord], key: &str, filter: impl Fn(&TrialRecord) -> bool) -> Vec<f64> {
    records.iter().filter(|r| filter(r)).filter_map(|r| r.get(key)).collect()
}

fn curve_points(config: &ExperimentConfig, records: &[TrialRecord], curve: Curve, key: &str) -> Result<Vec<CurvePoint>> {
    let mut rs = config.count_grid(key)?;
    rs.sort_unstable();
    rs.dedup();
    rs.into_iter()
        .map(|r| {
            let at = |rec: &TrialRecord| rec.grid_text("curve") == Some(curve.label()) && rec.grid_f64("R") == Some(r as f64);
            let (mean_abs_kappa, sem_abs_kappa, trials) = mean_sem(records, "abs_kappa_hat", at);
            let std_kappa = std_dev(&values(records, "kappa_hat", at));
            let w = weights_for(config, curve, r)?;
            let (population_kurtosis, _, _) = mean_sem(records, "population_kurtosis", at);
            Ok(CurvePoint {
                r,
                r_eff: w.r_eff,
                mean_abs_kappa,
                sem_abs_kappa,
                std_kappa,
                sigma0_hat: std_kappa * (config.t as f64).sqrt(),
                population_kurtosis,
                trials,
            })
        })
        .collect()
}

pub fn summarize_fig1b(config: &ExperimentConfig, records: &[TrialRecord]) -> Result<Fig1bSummary> {
    let balanced = curve_points(config, records, Curve::Balanced, "R")?;
    let powerlaw = curve_points(config, records, Curve::PowerLaw, "R_powerlaw")?;
    let rs: Vec<usize> = balanced.iter().map(|p| p.r).collect();
    let means: Vec<f64> = balanced.iter().map(|p| p.mean_abs_kappa).collect();
    let inverse_fit = fit_inverse_law(&rs, &means)?;

    let mut ts = config.count_grid("T_inset")?;
    ts.sort_unstable();
    ts.dedup();
    let inset: Vec<InsetPoint> = ts
        .iter()
        .map(|&t| {
            let at = |rec: &TrialRecord| rec.grid_text("curve") == Some("inset") && rec.grid_f64("T") == Some(t as f64);
            let (mean_abs_kappa, _, replications) = mean_sem(records, "abs_kappa_hat", at);
            let std_kappa = std_dev(&values(records, "kappa_hat", at));
            InsetPoint { t, mean_abs_kappa, std_kappa, sigma0_hat: std_kappa * (t as f64).sqrt(), replications }
        })
        .collect();
    let inset_slope = if inset.len() >= 2 {
        let x: Vec<f64> = inset.iter().map(|p| p.t as f64).collect();
        let y: Vec<f64> = inset.iter().map(|p| p.std_kappa).collect();
        loglog_slope(&x, &y)?
    } else {
        f64::NAN
    };
    let sigma0_pooled = inset.iter().map(|p| p.sigma0_hat).sum::<f64>() / inset.len().max(1) as f64;
    let crossover_t = inset.iter().find(|p| p.mean_abs_kappa > p.std_kappa).map(|p| p.t);
    Ok(Fig1bSummary { balanced, powerlaw, inverse_fit, inset, inset_slope, sigma0_pooled, crossover_t })
}
