//! The `gmil` command line: `train`, `predict`, `cv`, `synth`, `verify`, `bench`.
//!
//! Training flags may also come from a TOML file given with `--config`; flags
//! on the command line win. Exit codes: 0 success, 1 usage error, 2 data
//! error, 3 verification failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::classifier::{classify_batch, Prediction};
use crate::clustering::LloydConfig;
use crate::codebook::{train, Codebook, TauMode, TrainParams};
use crate::data::{load_csv, write_csv, CsvSchema, Dataset, NormalizationMode};
use crate::error::{GmilError, Result};
use crate::evaluation::{bench_scaling, cross_validate};
use crate::oracle::{compare_histogram_to_parzen, grid_points, verify_theorem1, BoundChainSuite, ParzenConfig};
use crate::synth::{generate, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "gmil", version, about = "Multiple-instance learning with learned codebooks")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a codebook and save it as JSON.
    Train {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Label bags with a saved codebook; writes `bag_id,label,d_pos,d_neg,margin`.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: DataArgs,
        /// Output CSV (standard output when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation.
    Cv {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        k_folds: Option<usize>,
        /// JSON report file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write zeros for wall-clock fields in the JSON report.
        #[arg(long)]
        omit_timings: bool,
    },
    /// Generate a synthetic dataset and its ground-truth sidecar.
    Synth {
        #[arg(long, default_value_t = 2)]
        dimension: usize,
        #[arg(long, default_value_t = 50)]
        n_pos: usize,
        #[arg(long, default_value_t = 50)]
        n_neg: usize,
        #[arg(long, default_value_t = 0.02)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset CSV; the ground truth goes to `<out>.truth.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a numerical check and report violations.
    Verify {
        #[arg(long, value_enum)]
        check: Check,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        /// Synthetic datasets for the bound-chain check.
        #[arg(long, default_value_t = 20)]
        datasets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON report file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Training time against dataset size on synthetic data.
    Bench {
        /// Instance counts, ascending.
        #[arg(long, value_delimiter = ',', default_values_t = [10_000usize, 20_000, 40_000, 80_000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        clusters: usize,
        #[arg(long, default_value_t = 8)]
        dimension: usize,
        /// Fixed Lloyd iteration count per run.
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        sample_cap: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV file (standard output when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Theorem1,
    BoundChain,
    ApproxEq5,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Bag CSV (`bag_id,label,f1,...,fd`).
    #[arg(long)]
    pub data: PathBuf,
    /// Read the MUSK distribution layout instead.
    #[arg(long)]
    pub from_c45: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let schema = if self.from_c45 {
            CsvSchema::c45()
        } else {
            CsvSchema::default()
        };
        load_csv(&self.data, &schema)
    }
}

#[derive(Debug, Args, Default)]
pub struct ParamArgs {
    /// TOML file with any of the options below (snake_case keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub pos_centers: Option<usize>,
    #[arg(long)]
    pub neg_centers: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Threshold = mean bag distance to the targets (the default).
    #[arg(long, conflicts_with_all = ["tau", "tau_positive"])]
    pub tau_auto: bool,
    /// Threshold = mean distance of positive bags only.
    #[arg(long, conflicts_with = "tau")]
    pub tau_positive: bool,
    /// Fixed threshold.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub normalize: Option<NormalizationMode>,
    #[arg(long)]
    pub pca: Option<usize>,
    #[arg(long)]
    pub sample_cap: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Options accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub clusters: Option<usize>,
    pub pos_centers: Option<usize>,
    pub neg_centers: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    /// `"all-bags"`, `"positive-bags"`, or a number.
    pub tau: Option<toml::Value>,
    pub normalize: Option<NormalizationMode>,
    pub pca: Option<usize>,
    pub sample_cap: Option<usize>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub k_folds: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GmilError::io(path, e))?;
        toml::from_str(&text).map_err(|e| GmilError::param(format!("{}: {e}", path.display())))
    }

    fn tau_mode(&self) -> Result<Option<TauMode>> {
        match &self.tau {
            None => Ok(None),
            Some(toml::Value::String(s)) if s == "all-bags" || s == "auto" => Ok(Some(TauMode::AllBags)),
            Some(toml::Value::String(s)) if s == "positive-bags" => Ok(Some(TauMode::PositiveBags)),
            Some(toml::Value::Float(t)) => Ok(Some(TauMode::Fixed(*t))),
            Some(toml::Value::Integer(t)) => Ok(Some(TauMode::Fixed(*t as f64))),
            Some(other) => Err(GmilError::param(format!("unrecognized tau `{other}`"))),
        }
    }
}

impl ParamArgs {
    fn file(&self) -> Result<FileConfig> {
        match &self.config {
            Some(p) => FileConfig::load(p),
            None => Ok(FileConfig::default()),
        }
    }

    /// Defaults, then the config file, then flags. Validated before returning.
    pub fn resolve(&self) -> Result<TrainParams> {
        let file = self.file()?;
        let d = TrainParams::default();
        let tau = if self.tau_auto {
            TauMode::AllBags
        } else if self.tau_positive {
            TauMode::PositiveBags
        } else if let Some(t) = self.tau {
            TauMode::Fixed(t)
        } else {
            file.tau_mode()?.unwrap_or(d.tau)
        };
        let params = TrainParams {
            clusters: self.clusters.or(file.clusters).unwrap_or(d.clusters),
            epsilon: self.epsilon.or(file.epsilon).unwrap_or(d.epsilon),
            pos_centers: self.pos_centers.or(file.pos_centers).unwrap_or(d.pos_centers),
            neg_centers: self.neg_centers.or(file.neg_centers).unwrap_or(d.neg_centers),
            seed: self.seed.or(file.seed).unwrap_or(d.seed),
            sample_cap: self.sample_cap.or(file.sample_cap),
            normalization: self.normalize.or(file.normalize).unwrap_or(d.normalization),
            pca: self.pca.or(file.pca),
            tau,
            lloyd: LloydConfig {
                max_iter: self.max_iter.or(file.max_iter).unwrap_or(d.lloyd.max_iter),
                tol: self.tol.or(file.tol).unwrap_or(d.lloyd.tol),
            },
        };
        params.validate()?;
        Ok(params)
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool.install(|| execute(&cli.command)),
        Err(e) => Err(GmilError::param(format!("thread pool: {e}"))),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| GmilError::io(path, e))?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| GmilError::io(path, e))
}

fn io_err(path: Option<&Path>) -> impl Fn(std::io::Error) -> GmilError + '_ {
    move |e| GmilError::io(path.unwrap_or(Path::new("<stdout>")), e)
}

/// Writes predictions as `bag_id,label,d_pos,d_neg,margin`; `d_neg` is empty
/// in the threshold regime.
pub fn write_predictions<W: Write>(ds: &Dataset, preds: &[Prediction], mut out: W) -> std::io::Result<()> {
    writeln!(out, "bag_id,label,d_pos,d_neg,margin")?;
    for (bag, p) in ds.bags.iter().zip(preds) {
        let d_neg = p.d_neg.map(|d| d.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", bag.id, p.label, p.d_pos, d_neg, p.margin)?;
    }
    out.flush()
}

fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Train { input, params, out } => {
            let params = params.resolve()?;
            let ds = input.load()?;
            let cb = train(&ds, &params)?;
            cb.save(out)?;
            println!(
                "trained on {} bags ({} instances): K={} p={} q={} tau={}",
                ds.len(),
                ds.n_instances(),
                cb.params.clusters,
                cb.p(),
                cb.q(),
                cb.tau.map(|t| t.to_string()).unwrap_or_else(|| "-".into())
            );
            println!("model written to {}", out.display());
            Ok(())
        }
        Command::Predict { model, input, out } => {
            let cb = Codebook::load(model)?;
            let ds = input.load()?;
            let preds = classify_batch(&ds.bags, &cb)?;
            match out {
                Some(path) => write_predictions(&ds, &preds, create(path)?).map_err(io_err(Some(path))),
                None => write_predictions(&ds, &preds, std::io::stdout().lock()).map_err(io_err(None)),
            }
        }
        Command::Cv {
            input,
            params: args,
            k_folds,
            out,
            omit_timings,
        } => {
            let params = args.resolve()?;
            let k = k_folds.or(args.file()?.k_folds).unwrap_or(10);
            let ds = input.load()?;
            let report = cross_validate(&ds, &params, k, params.seed)?;
            print!("{}", report.summary());
            if let Some(path) = out {
                let report = if *omit_timings {
                    report.without_timings()
                } else {
                    report
                };
                write_text(path, &(report.to_json()? + "\n"))?;
            }
            Ok(())
        }
        Command::Synth {
            dimension,
            n_pos,
            n_neg,
            sigma,
            seed,
            out,
        } => {
            let spec = SynthSpec::planted(*dimension, *n_pos, *n_neg, *sigma, *seed)?;
            let (ds, truth) = generate(&spec)?;
            write_csv(&ds, create(out)?).map_err(io_err(Some(out)))?;
            let truth_path = PathBuf::from(format!("{}.truth.json", out.display()));
            write_text(&truth_path, &(serde_json::to_string_pretty(&truth)? + "\n"))?;
            println!(
                "wrote {} bags ({} instances) to {} and ground truth to {}",
                ds.len(),
                ds.n_instances(),
                out.display(),
                truth_path.display()
            );
            Ok(())
        }
        Command::Verify {
            check,
            trials,
            datasets,
            seed,
            out,
        } => verify(*check, *trials, *datasets, *seed, out.as_deref()),
        Command::Bench {
            sizes,
            clusters,
            dimension,
            iterations,
            repeats,
            sample_cap,
            seed,
            out,
        } => {
            let mut template = SynthSpec::planted(*dimension, 1, 1, 0.02, *seed)?;
            template.instances_per_bag = (10, 10);
            let params = TrainParams {
                clusters: *clusters,
                sample_cap: *sample_cap,
                seed: *seed,
                lloyd: LloydConfig {
                    max_iter: *iterations,
                    tol: 0.0,
                },
                ..TrainParams::default()
            };
            let report = bench_scaling(&template, sizes, &params, *repeats)?;
            match out {
                Some(path) => report.write_csv(create(path)?).map_err(io_err(Some(path)))?,
                None => report.write_csv(std::io::stdout().lock()).map_err(io_err(None))?,
            }
            match report.slope {
                Some(s) => eprintln!("log-log slope {s:.3}"),
                None => eprintln!("single size, no slope"),
            }
            Ok(())
        }
    }
}

fn verify(check: Check, trials: usize, datasets: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let (json, passed) = match check {
        Check::Theorem1 => {
            let r = verify_theorem1(trials, &(2..=10).collect::<Vec<_>>(), seed)?;
            println!(
                "theorem1: {} trials ({} near equality), {} violations, worst log slack {:.3e}",
                r.trials, r.near_equality_trials, r.violations, r.worst_log_slack
            );
            (serde_json::to_string_pretty(&r)?, r.passed())
        }
        Check::BoundChain => {
            let suite = BoundChainSuite {
                datasets,
                seed,
                ..BoundChainSuite::default()
            };
            let reports = suite.run()?;
            let qualifying: usize = reports.iter().map(|r| r.qualifying).sum();
            let violations: usize = reports.iter().map(|r| r.violations).sum();
            let hits = reports.iter().filter(|r| r.argmaxes_hit_target() == Some(true)).count();
            let worst = reports.iter().map(|r| r.worst_log_slack).fold(f64::INFINITY, f64::min);
            println!(
                "bound-chain: {} datasets, {qualifying} qualifying candidates, {violations} violations, \
                 worst log slack {worst:.3e}, both maxima on target in {hits}/{}",
                reports.len(),
                reports.len()
            );
            (serde_json::to_string_pretty(&reports)?, violations == 0)
        }
        Check::ApproxEq5 => {
            let suite = BoundChainSuite::default();
            let parzen = ParzenConfig {
                h: 1.0 / suite.grid_steps as f64,
            };
            let grid = grid_points(2, 0.0, 1.0, suite.grid_steps);
            let params = TrainParams {
                clusters: 16,
                normalization: NormalizationMode::None,
                seed,
                ..TrainParams::default()
            };
            let reports = (0..datasets)
                .map(|i| {
                    let (ds, _) = BoundChainSuite { seed, ..suite }.dataset(i)?;
                    compare_histogram_to_parzen(&ds, &params, &grid, &parzen)
                })
                .collect::<Result<Vec<_>>>()?;
            let agree = reports.iter().filter(|r| r.agree).count();
            println!(
                "approx-eq5: top bin inside the density-ratio maximum's window in {agree}/{} datasets (reported only)",
                reports.len()
            );
            (serde_json::to_string_pretty(&reports)?, true)
        }
    };
    if let Some(path) = out {
        write_text(path, &(json + "\n"))?;
    }
    if passed {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(GmilError::ContractViolation(format!(
            "{check:?} check found violations"
        )))
    }
}
