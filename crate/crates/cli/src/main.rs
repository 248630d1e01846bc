//! `kcontrast`: model-order screening, purification and experiment
//! reproduction from the command line.
//!
//! Input matrices are headerless CSV with one row per variable and one
//! column per sample (`p×T`). A file with `T` rows and `p` columns is read as
//! `T` variables, which is almost never what you want.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kurtosis_contrast::experiments::{self, ExperimentConfig, ExperimentName, THREADS_ENV};
use kurtosis_contrast::io::read_matrix;
use kurtosis_contrast::purification::{purify_data, Preliminary, DEFAULT_TAU};
use kurtosis_contrast::stats::{bootstrap_sigma0, sample_excess_kurtosis};
use kurtosis_contrast::{screen_model_order, Error, KurtosisEstimate};

#[derive(Debug, Parser)]
#[command(name = "kcontrast", version, about = "Kurtosis contrast diagnostics for linear mixtures")]
struct Cli {
    /// Seed for every random draw; for `experiment` it overrides the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap on worker threads. Results do not depend on it.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Screen a candidate model order against the √T contrast ceiling.
    Screen {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        /// Bootstrap resamples per direction for σ̂0.
        #[arg(long, default_value_t = 200)]
        resamples: usize,
        /// Balance constant; defaults to max(1, 4 ln k).
        #[arg(long)]
        c_b: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sign-consistent purification of a preliminary ICA decomposition.
    Purify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        /// Preliminary model order; defaults to the number of rows.
        #[arg(long)]
        k: Option<usize>,
        /// Reuse a preliminary decomposition saved with --save-preliminary.
        #[arg(long, conflicts_with = "k")]
        preliminary: Option<PathBuf>,
        #[arg(long)]
        save_preliminary: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample excess kurtosis of each row (a single row or column is one series).
    Kurtosis {
        #[arg(long)]
        input: PathBuf,
        /// Bootstrap resamples for σ̂0; 0 skips the bootstrap.
        #[arg(long, default_value_t = 0)]
        resamples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment and write `<name>.csv` plus a `<name>.json` sidecar.
    Experiment {
        #[arg(long)]
        name: Option<String>,
        /// JSON config; missing fields fall back to the experiment defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Records as CSV.
    Csv,
    /// Records as a JSON array.
    Json,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

fn emit(value: &impl serde::Serialize, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)? + "\n";
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn series_of(matrix: ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    if matrix.nrows() == 1 || matrix.ncols() == 1 {
        vec![matrix.iter().copied().collect()]
    } else {
        matrix.rows().into_iter().map(|r| r.to_vec()).collect()
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = cli.seed.unwrap_or(0);
    let threads = cli.threads;
    match cli.command {
        Command::Screen { input, k, resamples, c_b, out } => {
            let x = read_matrix::<f64>(&input)?;
            let report = experiments::with_thread_cap(threads, || screen_model_order(x.view(), k, resamples, seed, c_b))??;
            emit(&report, out.as_deref())
        }
        Command::Purify { input, m, tau, k, preliminary, save_preliminary, out } => {
            let x = read_matrix::<f64>(&input)?;
            let pre = match preliminary {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<Preliminary<f64>>(&text).map_err(Error::from)?
                }
                None => Preliminary::fit(x.view(), k.unwrap_or(x.nrows()), seed)?,
            };
            if let Some(path) = save_preliminary {
                emit(&pre, Some(&path))?;
            }
            let report = experiments::with_thread_cap(threads, || {
                purify_data(x.view(), &pre, m, tau, kurtosis_contrast::seeding::child_seed(seed, 1))
            })??;
            emit(&report, out.as_deref())
        }
        Command::Kurtosis { input, resamples, out } => {
            let series = series_of(read_matrix::<f64>(&input)?);
            let estimates: Vec<KurtosisEstimate<f64>> = series
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let mut e = sample_excess_kurtosis(v)?;
                    if resamples > 0 {
                        e.sigma0_hat = Some(bootstrap_sigma0(v, resamples, kurtosis_contrast::seeding::child_seed(seed, i as u64))?);
                    }
                    Ok(e)
                })
                .collect::<Result<_, Error>>()?;
            if estimates.len() == 1 {
                emit(&estimates[0], out.as_deref())
            } else {
                emit(&estimates, out.as_deref())
            }
        }
        Command::Experiment { name, config, out, format } => {
            let mut cfg = match (name, config) {
                (_, Some(path)) => {
                    let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    ExperimentConfig::from_json_str(&text)?
                }
                (Some(name), None) => ExperimentConfig::default_for(
                    name.parse::<ExperimentName>().map_err(|e| Failure::Usage(e.to_string()))?,
                ),
                (None, None) => return Err(Failure::Usage("experiment needs --name or --config".into())),
            };
            if let Some(s) = cli.seed {
                cfg.base_seed = s;
            }
            cfg.validate()?;
            let records = experiments::with_thread_cap(threads, || experiments::run_experiment(&cfg))??;
            let written = experiments::write_outputs(&cfg, &records, &out)?;
            if format == Format::Json {
                let path = out.join(format!("{}.records.json", cfg.name));
                emit(&records, Some(&path))?;
            }
            eprintln!("wrote {} records to {}", written.records, written.csv_path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("usage: kcontrast <screen|purify|kurtosis|experiment> [OPTIONS]; see --help");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
