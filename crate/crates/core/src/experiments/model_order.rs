//! Synthetic kurtosis-gap comparison between a narrow and a wide model order.
//!
//! Each subject (trial) owns `pool` latent Student-t sources with df drawn
//! uniformly on `[df_min, df_max]`. An arm extracts `components` candidate
//! components, each an equal-weight random-sign sum of `width` distinct pool
//! sources. Wider components mix more sources, so their contrast decays and
//! the gap statistic `G = mean(top_m |κ̂|) − median(|κ̂|)` shrinks. Both arms
//! draw the same number of components so `G`'s order statistics are
//! comparable.
//!
//! Grids `width_low` and `width_high` are zipped pairwise; each pair is one
//! comparison with `trials` subjects.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{grid_point, mean_sem, ExperimentConfig, ExperimentName, TrialRecord};
use crate::error::{Error, Result};
use crate::seeding::{child_seed, stream_rng};
use crate::sources::{sample_sources, SourceMatrix, SourceSpec};
use crate::stats::{excess_kurtosis, kurtosis_gap_statistic, wilcoxon_signed_rank_one_sided, RankTestResult};

pub(super) fn validate(config: &ExperimentConfig) -> Result<()> {
    let pool = config.count_param("pool")?;
    let components = config.count_param("components")?;
    let top_m = config.count_param("top_m")?;
    if top_m > components {
        return Err(Error::Input(format!("top_m = {top_m} exceeds components = {components}")));
    }
    let (lo, hi) = (config.param("df_min")?, config.param("df_max")?);
    if !(lo > 4.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::Input(format!("model_order_G needs 4 < df_min ≤ df_max, got [{lo}, {hi}]")));
    }
    let low = config.count_grid("width_low")?;
    let high = config.count_grid("width_high")?;
    if low.len() != high.len() {
        return Err(Error::Input("width_low and width_high grids must have equal length".into()));
    }
    if let Some(w) = low.iter().chain(&high).find(|&&w| w > pool) {
        return Err(Error::Input(format!("width {w} exceeds pool size {pool}")));
    }
    Ok(())
}

fn width_pairs(config: &ExperimentConfig) -> Result<Vec<(usize, usize)>> {
    Ok(config.count_grid("width_low")?.into_iter().zip(config.count_grid("width_high")?).collect())
}

fn subject_sources(config: &ExperimentConfig, seed: u64) -> Result<SourceMatrix<f64>> {
    let (lo, hi) = (config.param("df_min")?, config.param("df_max")?);
    let mut rng = stream_rng(seed, 0);
    let specs: Vec<SourceSpec> = (0..config.count_param("pool")?)
        .map(|_| SourceSpec::student_t(if hi > lo { rng.random_range(lo..=hi) } else { lo }))
        .collect();
    sample_sources(&specs, config.t, child_seed(seed, 1))
}

/// Absolute sample kurtoses of one arm's components.
fn arm_kurtoses(config: &ExperimentConfig, sources: &SourceMatrix<f64>, width: usize, seed: u64, arm: u64) -> Result<Vec<f64>> {
    let mut rng = stream_rng(seed, 2 + arm);
    let scale = 1.0 / (width as f64).sqrt();
    (0..config.count_param("components")?)
        .map(|c| {
            let mut y = vec![0.0; config.t];
            for j in sample_indices(&mut rng, sources.num_sources(), width) {
                let w = if rng.random::<bool>() { scale } else { -scale };
                for (o, v) in y.iter_mut().zip(sources.data.row(j)) {
                    *o += w * v;
                }
            }
            if let Some(snr) = config.noise_snr {
                super::add_noise(&mut y, snr, child_seed(seed, 1000 * (arm + 1) + c as u64));
            }
            Ok(excess_kurtosis(&y)?.abs())
        })
        .collect()
}

fn run_subject(config: &ExperimentConfig, low: usize, high: usize, subject: usize) -> Result<TrialRecord> {
    let mut rec = TrialRecord::new(config, grid_point([("width_low", low.into()), ("width_high", high.into())]), subject);
    let seed = rec.seed_used;
    let sources = subject_sources(config, seed)?;
    let top_m = config.count_param("top_m")?;
    for (label, width, arm) in [("low", low, 0), ("high", high, 1)] {
        let kappas = arm_kurtoses(config, &sources, width, seed, arm)?;
        rec.set(&format!("G_{label}"), kurtosis_gap_statistic(&kappas, top_m)?);
        rec.set(&format!("mean_abs_kappa_{label}"), kappas.iter().sum::<f64>() / kappas.len() as f64);
    }
    Ok(rec)
}

pub fn run_model_order_g(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    if config.name != ExperimentName::ModelOrderG {
        return Err(Error::Precondition(format!("run_model_order_g called with {} config", config.name)));
    }
    validate(config)?;
    let units: Vec<(usize, usize, usize)> = width_pairs(config)?
        .into_iter()
        .flat_map(|(lo, hi)| (0..config.trials).map(move |s| (lo, hi, s)))
        .collect();
    units.par_iter().map(|&(lo, hi, s)| run_subject(config, lo, hi, s)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub width_low: usize,
    pub width_high: usize,
    pub subjects: usize,
    pub mean_g_low: f64,
    pub mean_g_high: f64,
    /// One-sided test of `G_low > G_high`; `None` when every pair ties.
    pub test: Option<RankTestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelOrderSummary {
    pub comparisons: Vec<Comparison>,
}

pub fn summarize_model_order_g(config: &ExperimentConfig, records: &[TrialRecord]) -> Result<ModelOrderSummary> {
    let comparisons = width_pairs(config)?
        .into_iter()
        .map(|(lo, hi)| {
            let at = |r: &TrialRecord| r.grid_f64("width_low") == Some(lo as f64) && r.grid_f64("width_high") == Some(hi as f64);
            let subset: Vec<&TrialRecord> = records.iter().filter(|r| at(r)).collect();
            let g_low: Vec<f64> = subset.iter().filter_map(|r| r.get("G_low")).collect();
            let g_high: Vec<f64> = subset.iter().filter_map(|r| r.get("G_high")).collect();
            let test = match wilcoxon_signed_rank_one_sided(&g_low, &g_high) {
                Ok(t) => Some(t),
                Err(Error::DegenerateTest(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(Comparison {
                width_low: lo,
                width_high: hi,
                subjects: subset.len(),
                mean_g_low: mean_sem(records, "G_low", at).0,
                mean_g_high: mean_sem(records, "G_high", at).0,
                test,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ModelOrderSummary { comparisons })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, widths: (f64, f64)) -> ExperimentConfig {
        let mut c = ExperimentConfig::default_for(ExperimentName::ModelOrderG);
        c.trials = n;
        c.t = 2000;
        c.params.insert("pool".into(), 30.0);
        c.params.insert("components".into(), 10.0);
        c.grids.insert("width_low".into(), vec![widths.0]);
        c.grids.insert("width_high".into(), vec![widths.1]);
        c
    }

    #[test]
    fn single_subject() {
        let c = small(1, (3.0, 30.0));
        let recs = run_model_order_g(&c).unwrap();
        assert_eq!(recs.len(), 1);
        let s = summarize_model_order_g(&c, &recs).unwrap();
        let t = s.comparisons[0].test.unwrap();
        assert_eq!(t.n_effective, 1);
        assert!(t.p_value == 0.5 || t.p_value == 1.0);
    }

    #[test]
    fn validation() {
        let mut c = small(2, (3.0, 31.0));
        assert!(run_model_order_g(&c).is_err());
        c.grids.insert("width_high".into(), vec![10.0, 20.0]);
        assert!(c.validate().is_err());
        let mut c = small(2, (3.0, 10.0));
        c.params.insert("top_m".into(), 11.0);
        assert!(c.validate().is_err());
    }
}
