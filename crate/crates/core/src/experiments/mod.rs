//! Monte-Carlo harness for the redundancy, conditioning and purification
//! experiments plus a synthetic kurtosis-gap comparison.
//!
//! Every row of output is a [`TrialRecord`] whose seed is a pure function of
//! `(base_seed, experiment, grid point, trial)`. Work units run in parallel
//! but are collected in generation order, so output bytes do not depend on
//! the number of worker threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{child_seed, derive_trial_seed, stream_rng};

pub mod fig1a;
pub mod fig1b;
pub mod fig1c;
pub mod model_order;

pub use fig1a::{run_fig1a, summarize_fig1a, Fig1aSummary};
pub use fig1b::{run_fig1b, summarize_fig1b, Fig1bSummary};
pub use fig1c::{run_fig1c, summarize_fig1c, Fig1cSummary};
pub use model_order::{run_model_order_g, summarize_model_order_g, ModelOrderSummary};

/// Environment variable holding the default worker cap for the CLI.
pub const THREADS_ENV: &str = "KCONTRAST_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentName {
    #[serde(rename = "fig1a")]
    Fig1a,
    #[serde(rename = "fig1b")]
    Fig1b,
    #[serde(rename = "fig1c")]
    Fig1c,
    #[serde(rename = "model_order_G")]
    ModelOrderG,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 4] =
        [ExperimentName::Fig1a, ExperimentName::Fig1b, ExperimentName::Fig1c, ExperimentName::ModelOrderG];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Fig1a => "fig1a",
            ExperimentName::Fig1b => "fig1b",
            ExperimentName::Fig1c => "fig1c",
            ExperimentName::ModelOrderG => "model_order_G",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown experiment {s:?}")))
    }
}

/// One sweep. Grids and scalar parameters are interpreted per experiment; see
/// [`ExperimentConfig::default_for`] for the keys each one reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub base_seed: u64,
    pub trials: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub grids: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub noise_snr: Option<f64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

fn map<const N: usize>(entries: [(&str, Vec<f64>); N]) -> BTreeMap<String, Vec<f64>> {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn params<const N: usize>(entries: [(&str, f64); N]) -> BTreeMap<String, f64> {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

impl ExperimentConfig {
    pub fn default_for(name: ExperimentName) -> Self {
        let base_seed = 20_240_601;
        match name {
            ExperimentName::Fig1a => ExperimentConfig {
                name,
                base_seed,
                trials: 30,
                t: 5000,
                grids: map([("inv_delta_kappa", vec![0.5, 6.0, 11.5, 17.0, 22.5, 28.0, 33.0])]),
                noise_snr: None,
                params: params([
                    ("sources", 5.0),
                    ("max_condition", 10.0),
                    ("kappa_base_intercept", 0.4),
                    ("kappa_base_slope", 0.05),
                ]),
            },
            ExperimentName::Fig1b => ExperimentConfig {
                name,
                base_seed,
                trials: 20,
                t: 20_000,
                grids: map([
                    ("R", (2..=50).map(f64::from).collect()),
                    ("R_powerlaw", vec![2.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0]),
                    ("T_inset", vec![1e3, 3e3, 1e4, 3e4]),
                ]),
                noise_snr: None,
                params: params([("df", 8.0), ("alpha", 1.0), ("inset_R", 50.0), ("inset_reps", 200.0)]),
            },
            ExperimentName::Fig1c => ExperimentConfig {
                name,
                base_seed,
                trials: 50,
                t: 15_000,
                grids: map([("R", vec![50.0]), ("m", vec![1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 30.0, 50.0])]),
                noise_snr: None,
                params: params([("df_min", 6.0), ("df_max", 30.0), ("tau", 0.1)]),
            },
            ExperimentName::ModelOrderG => ExperimentConfig {
                name,
                base_seed,
                trials: 40,
                t: 20_000,
                grids: map([("width_low", vec![10.0]), ("width_high", vec![50.0])]),
                noise_snr: None,
                params: params([
                    ("pool", 100.0),
                    ("components", 20.0),
                    ("df_min", 5.0),
                    ("df_max", 30.0),
                    ("top_m", 5.0),
                ]),
            },
        }
    }

    /// Parse a JSON config. Missing top-level fields fall back to
    /// [`ExperimentConfig::default_for`]; `grids` and `params` are merged key
    /// by key.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let name: ExperimentName = serde_json::from_value(
            value
                .get("name")
                .cloned()
                .ok_or_else(|| Error::Input("config needs a \"name\" field".into()))?,
        )?;
        let mut merged = serde_json::to_value(ExperimentConfig::default_for(name))?;
        let (Some(dst), Some(src)) = (merged.as_object_mut(), value.as_object()) else {
            return Err(Error::Input("config must be a JSON object".into()));
        };
        for (key, v) in src {
            match (key.as_str(), dst.get_mut(key)) {
                ("grids" | "params", Some(serde_json::Value::Object(existing))) => {
                    let serde_json::Value::Object(new) = v else {
                        return Err(Error::Input(format!("{key} must be an object")));
                    };
                    for (k, inner) in new {
                        existing.insert(k.clone(), inner.clone());
                    }
                }
                _ => {
                    dst.insert(key.clone(), v.clone());
                }
            }
        }
        let config: ExperimentConfig = serde_json::from_value(merged)?;
        config.validate()?;
        Ok(config)
    }

    pub fn grid(&self, key: &str) -> Result<&[f64]> {
        self.grids
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Input(format!("{} config is missing grid {key:?}", self.name)))
    }

    /// A grid whose entries must be positive integers.
    pub fn count_grid(&self, key: &str) -> Result<Vec<usize>> {
        self.grid(key)?
            .iter()
            .map(|&v| {
                if v >= 1.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
                    Ok(v as usize)
                } else {
                    Err(Error::Input(format!("grid {key:?} needs positive integers, got {v}")))
                }
            })
            .collect()
    }

    pub fn param(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .copied()
            .ok_or_else(|| Error::Input(format!("{} config is missing param {key:?}", self.name)))
    }

    pub fn count_param(&self, key: &str) -> Result<usize> {
        let v = self.param(key)?;
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Input(format!("param {key:?} must be a positive integer, got {v}")))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Input("trials must be at least 1".into()));
        }
        if self.t < 4 {
            return Err(Error::Input(format!("T must be at least 4, got {}", self.t)));
        }
        if let Some(snr) = self.noise_snr {
            if !(snr > 0.0 && snr.is_finite()) {
                return Err(Error::Input(format!("noise_snr must be positive and finite, got {snr}")));
            }
        }
        for (k, g) in &self.grids {
            if g.is_empty() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("grid {k:?} must be a non-empty list of finite numbers")));
            }
        }
        match self.name {
            ExperimentName::Fig1a => fig1a::validate(self),
            ExperimentName::Fig1b => fig1b::validate(self),
            ExperimentName::Fig1c => fig1c::validate(self),
            ExperimentName::ModelOrderG => model_order::validate(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl GridValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            GridValue::Int(v) => Some(*v as f64),
            GridValue::Real(v) => Some(*v),
            GridValue::Text(_) => None,
        }
    }
}

impl fmt::Display for GridValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridValue::Int(v) => write!(f, "{v}"),
            GridValue::Real(v) => write!(f, "{v:?}"),
            GridValue::Text(v) => f.write_str(v),
        }
    }
}

impl From<usize> for GridValue {
    fn from(v: usize) -> Self {
        GridValue::Int(v as i64)
    }
}

impl From<f64> for GridValue {
    fn from(v: f64) -> Self {
        GridValue::Real(v)
    }
}

impl From<&str> for GridValue {
    fn from(v: &str) -> Self {
        GridValue::Text(v.to_string())
    }
}

pub type GridPoint = BTreeMap<String, GridValue>;

pub fn grid_point<const N: usize>(entries: [(&str, GridValue); N]) -> GridPoint {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// `key=value` pairs joined by `;` in key order.
pub fn canonical_grid_point(point: &GridPoint) -> String {
    point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: ExperimentName,
    pub trial_index: usize,
    pub grid_point: GridPoint,
    pub measured: BTreeMap<String, f64>,
    pub seed_used: u64,
}

impl TrialRecord {
    pub fn new(config: &ExperimentConfig, grid_point: GridPoint, trial_index: usize) -> Self {
        let seed_used = trial_seed(config, &grid_point, trial_index);
        TrialRecord { experiment: config.name, trial_index, grid_point, measured: BTreeMap::new(), seed_used }
    }

    pub fn set(&mut self, key: &str, value: f64) -> &mut Self {
        self.measured.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.measured.get(key).copied()
    }

    pub fn grid_f64(&self, key: &str) -> Option<f64> {
        self.grid_point.get(key).and_then(GridValue::as_f64)
    }

    pub fn grid_text(&self, key: &str) -> Option<&str> {
        match self.grid_point.get(key) {
            Some(GridValue::Text(s)) => Some(s),
            _ => None,
        }
    }
}

pub fn trial_seed(config: &ExperimentConfig, grid_point: &GridPoint, trial_index: usize) -> u64 {
    derive_trial_seed(config.base_seed, config.name.as_str(), &canonical_grid_point(grid_point), trial_index as u64)
}

const NOISE_DISCRIMINATOR: u64 = 0x006e_6f69_7365;

/// Add independent Gaussian noise so that the signal-to-noise amplitude
/// ratio of a unit-variance `series` is `snr`. Noise comes from a child of
/// `seed` reserved for this purpose.
pub fn add_noise(series: &mut [f64], snr: f64, seed: u64) {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = stream_rng(child_seed(seed, NOISE_DISCRIMINATOR), 0);
    let scale = 1.0 / snr;
    for v in series.iter_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *v += scale * n;
    }
}

/// Run `f` on a pool capped at `threads` workers (`None` for rayon's
/// default). Results never depend on the cap.
pub fn with_thread_cap<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Input("thread cap must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Input(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    match config.name {
        ExperimentName::Fig1a => run_fig1a(config),
        ExperimentName::Fig1b => run_fig1b(config),
        ExperimentName::Fig1c => run_fig1c(config),
        ExperimentName::ModelOrderG => run_model_order_g(config),
    }
}

pub fn summarize(config: &ExperimentConfig, records: &[TrialRecord]) -> Result<serde_json::Value> {
    Ok(match config.name {
        ExperimentName::Fig1a => serde_json::to_value(summarize_fig1a(config, records)?)?,
        ExperimentName::Fig1b => serde_json::to_value(summarize_fig1b(config, records)?)?,
        ExperimentName::Fig1c => serde_json::to_value(summarize_fig1c(config, records)?)?,
        ExperimentName::ModelOrderG => serde_json::to_value(summarize_model_order_g(config, records)?)?,
    })
}

fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// CSV with columns `experiment, trial_index, seed_used`, then every grid
/// key, then every measured key, each group in sorted order. Cells a record
/// does not define are left empty.
pub fn records_to_csv(records: &[TrialRecord]) -> Result<String> {
    let grid_keys: BTreeSet<&str> = records.iter().flat_map(|r| r.grid_point.keys().map(String::as_str)).collect();
    let measured_keys: BTreeSet<&str> = records.iter().flat_map(|r| r.measured.keys().map(String::as_str)).collect();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["experiment".to_string(), "trial_index".into(), "seed_used".into()];
    header.extend(grid_keys.iter().map(|k| k.to_string()));
    header.extend(measured_keys.iter().map(|k| k.to_string()));
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![r.experiment.to_string(), r.trial_index.to_string(), r.seed_used.to_string()];
        for k in &grid_keys {
            row.push(match r.grid_point.get(*k) {
                Some(GridValue::Real(v)) => format_float(*v),
                Some(other) => other.to_string(),
                None => String::new(),
            });
        }
        for k in &measured_keys {
            row.push(r.measured.get(*k).map(|v| format_float(*v)).unwrap_or_default());
        }
        wtr.write_record(&row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    pub records: usize,
}

/// Run `config` and write `<name>.csv` and `<name>.json` (resolved config and
/// summary) into `out_dir`.
pub fn run_and_write(config: &ExperimentConfig, out_dir: &Path, threads: Option<usize>) -> Result<ExperimentOutput> {
    let records = with_thread_cap(threads, || run_experiment(config))??;
    write_outputs(config, &records, out_dir)
}

pub fn write_outputs(config: &ExperimentConfig, records: &[TrialRecord], out_dir: &Path) -> Result<ExperimentOutput> {
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let csv_path = out_dir.join(format!("{}.csv", config.name));
    let json_path = out_dir.join(format!("{}.json", config.name));
    fs::write(&csv_path, records_to_csv(records)?).map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?;
    let sidecar = serde_json::json!({ "config": config, "summary": summarize(config, records)? });
    fs::write(&json_path, serde_json::to_string_pretty(&sidecar)? + "\n")
        .map_err(|e| Error::Io(format!("{}: {e}", json_path.display())))?;
    Ok(ExperimentOutput { csv_path, json_path, records: records.len() })
}

/// Mean, and standard error of the mean, of `key` over records matching
/// `filter`.
pub(crate) fn mean_sem(records: &[TrialRecord], key: &str, filter: impl Fn(&TrialRecord) -> bool) -> (f64, f64, usize) {
    let vals: Vec<f64> = records.iter().filter(|r| filter(r)).filter_map(|r| r.get(key)).collect();
    let n = vals.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = vals.iter().sum::<f64>() / n as f64;
    let sem = if n > 1 {
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        f64::NAN
    };
    (mean, sem, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in ExperimentName::ALL {
            assert_eq!(n.as_str().parse::<ExperimentName>().unwrap(), n);
            assert_eq!(serde_json::to_value(n).unwrap(), n.as_str());
        }
        assert!("fig9".parse::<ExperimentName>().is_err());
    }

    #[test]
    fn defaults_validate() {
        for n in ExperimentName::ALL {
            ExperimentConfig::default_for(n).validate().unwrap();
        }
    }

    #[test]
    fn json_overlay() {
        let c = ExperimentConfig::from_json_str(r#"{"name":"fig1b","trials":3,"grids":{"R":[2,4]},"params":{"df":10}}"#)
            .unwrap();
        assert_eq!(c.trials, 3);
        assert_eq!(c.grids["R"], vec![2.0, 4.0]);
        assert_eq!(c.grids["T_inset"], vec![1e3, 3e3, 1e4, 3e4]);
        assert_eq!(c.params["df"], 10.0);
        assert_eq!(c.params["alpha"], 1.0);
        assert_eq!(c.t, 20_000);
        assert!(ExperimentConfig::from_json_str(r#"{"trials":3}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"name":"fig1b","trials":0}"#).is_err());
        let full = ExperimentConfig::default_for(ExperimentName::Fig1c);
        let back = ExperimentConfig::from_json_str(&serde_json::to_string(&full).unwrap()).unwrap();
        assert_eq!(back, full);
    }

    #[test]
    fn canonical_point_sorts_keys() {
        let p = grid_point([("b", 3usize.into()), ("a", 0.5.into()), ("c", "x".into())]);
        assert_eq!(canonical_grid_point(&p), "a=0.5;b=3;c=x");
    }

    #[test]
    fn seeds_ignore_other_grid_points() {
        let c = ExperimentConfig::default_for(ExperimentName::Fig1b);
        let p = grid_point([("R", 7usize.into()), ("curve", "balanced".into())]);
        let r = TrialRecord::new(&c, p.clone(), 4);
        assert_eq!(r.seed_used, derive_trial_seed(c.base_seed, "fig1b", "R=7;curve=balanced", 4));
        let mut c2 = c.clone();
        c2.grids.insert("R".into(), vec![7.0]);
        assert_eq!(TrialRecord::new(&c2, p, 4).seed_used, r.seed_used);
    }

    #[test]
    fn csv_layout() {
        let c = ExperimentConfig::default_for(ExperimentName::Fig1b);
        let mut a = TrialRecord::new(&c, grid_point([("R", 2usize.into())]), 0);
        a.set("kappa_hat", 0.1);
        let mut b = TrialRecord::new(&c, grid_point([("R", 3usize.into()), ("T", 1000usize.into())]), 1);
        b.set("std", 1.0 / 3.0);
        let text = records_to_csv(&[a.clone(), b.clone()]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "experiment,trial_index,seed_used,R,T,kappa_hat,std");
        assert_eq!(lines.next().unwrap(), format!("fig1b,0,{},2,,1.0000000000000001e-1,", a.seed_used));
        let last = lines.next().unwrap();
        let v: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(v, 1.0 / 3.0);
    }

    #[test]
    fn noise_is_seeded() {
        let mut a = vec![0.0; 5];
        let mut b = vec![0.0; 5];
        add_noise(&mut a, 2.0, 9);
        add_noise(&mut b, 2.0, 9);
        assert_eq!(a, b);
        assert!(a.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn thread_cap_rejects_zero() {
        assert!(with_thread_cap(Some(0), || 1).is_err());
        assert_eq!(with_thread_cap(Some(2), || 5).unwrap(), 5);
    }
}
