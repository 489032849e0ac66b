//! `vcam`: simulate datasets, fit varying-coefficient additive models,
//! identify their structure, and run Monte Carlo studies.

mod config;

use std::error::Error;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use config::{
    merge_estimation, merge_penalty, parse_bool, parse_u64, parse_usize, ConfigError,
    EstimationArgs, FileConfig, PenaltyArgs,
};
use vcam_core::estimation::{fit_three_step, select_by_bic, EstimationConfig};
use vcam_core::identification::identify;
use vcam_core::io;
use vcam_core::numerics::RngStream;
use vcam_core::simulation::{run_monte_carlo, Example, ScenarioSpec};

#[derive(Parser)]
#[command(
    name = "vcam",
    version,
    about = "Varying-coefficient additive models: three-step spline estimation \
             and SCAD-penalized structure identification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum ExampleArg {
    Ex1,
    Ex2,
}

impl ExampleArg {
    fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "ex1" => Ok(Self::Ex1),
            "ex2" => Ok(Self::Ex2),
            _ => Err(ConfigError(format!("`{s}` is not an example (ex1/ex2)"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Ex1 => "ex1",
            Self::Ex2 => "ex2",
        }
    }
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Flat dotted-key config file; flags override file values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (falls back to VCAM_THREADS, then all cores)
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from one of the built-in simulation designs
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Simulation design
        #[arg(long, value_enum)]
        example: Option<ExampleArg>,
        /// Sample size
        #[arg(long, value_name = "N")]
        t: Option<usize>,
        /// Base RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// Stream index under the base seed
        #[arg(long)]
        stream: Option<u64>,
        /// Output dataset CSV
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Optional truth sidecar (structural flags and generation metadata)
        #[arg(long, value_name = "FILE")]
        truth_out: Option<PathBuf>,
    },
    /// Fit the three-step spline estimator to a dataset CSV
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// Input dataset CSV
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Fixed segment length (with --k; otherwise BIC selects both)
        #[arg(long, value_name = "I", requires = "k")]
        i: Option<usize>,
        /// Fixed interior-knot count (with --i)
        #[arg(long, value_name = "K", requires = "i")]
        k: Option<usize>,
        #[command(flatten)]
        estimation: EstimationArgs,
        /// Output fit artifact
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write per-function grid CSVs into this directory
        #[arg(long, value_name = "DIR")]
        grid_dir: Option<PathBuf>,
        /// Points per function grid
        #[arg(long, default_value_t = 201)]
        grid_points: usize,
    },
    /// Run the two-stage penalized structure identification on a fit
    Identify {
        #[command(flatten)]
        common: CommonArgs,
        /// Input dataset CSV
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Fit artifact produced by `vcam fit`
        #[arg(long, value_name = "FILE")]
        fit: PathBuf,
        #[command(flatten)]
        penalty: PenaltyArgs,
        /// Output identification report
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Monte Carlo study over one of the simulation designs
    Mc {
        #[command(flatten)]
        common: CommonArgs,
        /// Simulation design (also sets the design's operating defaults)
        #[arg(long, value_enum)]
        example: Option<ExampleArg>,
        /// Sample size
        #[arg(long, value_name = "N")]
        t: Option<usize>,
        /// Replications
        #[arg(long, value_name = "N")]
        q: Option<usize>,
        /// Base RNG seed; replicate r uses stream r
        #[arg(long)]
        seed: Option<u64>,
        /// Fixed segment length (0 = select by BIC)
        #[arg(long, value_name = "I")]
        fixed_i: Option<usize>,
        /// Fixed interior-knot count (0 = select by BIC)
        #[arg(long, value_name = "K")]
        fixed_k: Option<usize>,
        /// Run the two-stage identification on every replicate
        #[arg(long)]
        identification: Option<bool>,
        /// Fit the oracle and misspecified comparison estimators
        #[arg(long)]
        comparisons: Option<bool>,
        #[command(flatten)]
        estimation: EstimationArgs,
        #[command(flatten)]
        penalty: PenaltyArgs,
        /// Machine-readable report CSV
        #[arg(long, value_name = "FILE")]
        out_csv: Option<PathBuf>,
        /// Human-readable table (stdout when omitted)
        #[arg(long, value_name = "FILE")]
        out_table: Option<PathBuf>,
    },
    /// Emit function-grid CSVs from a fit artifact
    Grids {
        #[command(flatten)]
        common: CommonArgs,
        /// Fit artifact produced by `vcam fit`
        #[arg(long, value_name = "FILE")]
        fit: PathBuf,
        /// Output directory
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Points per function grid
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn setup_threads(common: &CommonArgs) -> Result<(), Box<dyn Error>> {
    let threads = match common.threads {
        Some(n) => Some(n),
        None => match std::env::var("VCAM_THREADS") {
            Ok(v) => Some(
                v.parse()
                    .map_err(|_| ConfigError(format!("VCAM_THREADS=`{v}` is not an integer")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Box::new(ConfigError("thread count must be positive".into())));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Box<dyn Error>> {
    match cli.command {
        Command::Simulate {
            common,
            example,
            t,
            seed,
            stream,
            out,
            truth_out,
        } => {
            setup_threads(&common)?;
            let mut file = FileConfig::load(common.config.as_deref())?;
            let example = file
                .resolve("example", example, ExampleArg::parse)?
                .ok_or(ConfigError("`example` is required (ex1/ex2)".into()))?;
            let t = file
                .resolve("t", t, parse_usize)?
                .ok_or(ConfigError("`t` is required".into()))?;
            let seed = file.resolve("seed", seed, parse_u64)?.unwrap_or(0);
            let stream = file.resolve("stream", stream, parse_u64)?.unwrap_or(1);
            file.finish()?;

            let gen = match example {
                ExampleArg::Ex1 => Example::One,
                ExampleArg::Ex2 => Example::Two,
            };
            let mut rng = RngStream::new(seed, stream);
            let (data, truth) = gen.generate(t, &mut rng)?;
            io::write_dataset_csv(&out, &data)?;
            if let Some(path) = truth_out {
                io::write_atomic(&path, &io::truth_to_text(&truth, example.name(), t, seed, stream))?;
            }
            Ok(())
        }

        Command::Fit {
            common,
            data,
            i,
            k,
            estimation,
            out,
            grid_dir,
            grid_points,
        } => {
            setup_threads(&common)?;
            let mut file = FileConfig::load(common.config.as_deref())?;
            let cfg = merge_estimation(EstimationConfig::default(), &estimation, &mut file)?;
            let i = file.resolve("fit.i", i, parse_usize)?;
            let k = file.resolve("fit.k", k, parse_usize)?;
            file.finish()?;

            let dataset = io::read_dataset_csv(&data)?;
            let fit = match (i, k) {
                (Some(i), Some(k)) => fit_three_step(&dataset, &cfg, i, k)?,
                (None, None) => select_by_bic(&dataset, &cfg)?.2,
                _ => {
                    return Err(Box::new(ConfigError(
                        "fit.i and fit.k must be given together".into(),
                    )))
                }
            };
            io::write_fit(&out, &fit)?;
            if let Some(dir) = grid_dir {
                write_grids(&dir, &fit, grid_points)?;
            }
            Ok(())
        }

        Command::Identify {
            common,
            data,
            fit,
            penalty,
            out,
        } => {
            setup_threads(&common)?;
            let mut file = FileConfig::load(common.config.as_deref())?;
            let cfg = merge_penalty(Default::default(), &penalty, &mut file)?;
            file.finish()?;

            let dataset = io::read_dataset_csv(&data)?;
            let fitted = io::read_fit(&fit)?;
            let order_step2 = fitted.alpha[0].basis.order();
            let order_step3 = fitted
                .beta
                .first()
                .map(|b| b.basis.order())
                .unwrap_or(order_step2);
            let result = identify(&dataset, &fitted, order_step2, order_step3, &cfg)?;
            let alpha_norms: Vec<f64> = result.alpha_p[1..]
                .iter()
                .map(|f| f.l2_norm(1))
                .collect::<vcam_core::Result<_>>()?;
            let beta_norms: Vec<f64> = result
                .beta_p
                .iter()
                .map(|f| f.l2_norm(2))
                .collect::<vcam_core::Result<_>>()?;
            io::write_atomic(
                &out,
                &io::identification_to_text(&result, &alpha_norms, &beta_norms),
            )?;
            Ok(())
        }

        Command::Mc {
            common,
            example,
            t,
            q,
            seed,
            fixed_i,
            fixed_k,
            identification,
            comparisons,
            estimation,
            penalty,
            out_csv,
            out_table,
        } => {
            setup_threads(&common)?;
            let mut file = FileConfig::load(common.config.as_deref())?;
            let example = file
                .resolve("example", example, ExampleArg::parse)?
                .ok_or(ConfigError("`example` is required (ex1/ex2)".into()))?;
            // the design's operating defaults, overridable key by key
            let mut spec = match example {
                ExampleArg::Ex1 => ScenarioSpec::example1(300, 100, 0),
                ExampleArg::Ex2 => ScenarioSpec::example2_identification(900, 100, 0),
            };
            if let Some(v) = file.resolve("t", t, parse_usize)? {
                spec.t = v;
            }
            if let Some(v) = file.resolve("q", q, parse_usize)? {
                spec.replications = v;
            }
            if let Some(v) = file.resolve("seed", seed, parse_u64)? {
                spec.base_seed = v;
            }
            let fi = file.resolve("mc.fixed_i", fixed_i, parse_usize)?;
            let fk = file.resolve("mc.fixed_k", fixed_k, parse_usize)?;
            match (fi, fk) {
                (None, None) => {}
                (Some(0), Some(0)) => spec.fixed_i_k = None,
                (Some(i), Some(k)) if i > 0 && k > 0 => spec.fixed_i_k = Some((i, k)),
                _ => {
                    return Err(Box::new(ConfigError(
                        "mc.fixed_i and mc.fixed_k must be given together \
                         (both 0 to select by BIC)"
                            .into(),
                    )))
                }
            }
            if let Some(v) = file.resolve("mc.identification", identification, parse_bool)? {
                spec.run_identification = v;
            }
            if let Some(v) = file.resolve("mc.comparisons", comparisons, parse_bool)? {
                spec.run_comparisons = v;
            }
            spec.estimation = merge_estimation(spec.estimation, &estimation, &mut file)?;
            spec.penalty = merge_penalty(spec.penalty, &penalty, &mut file)?;
            file.finish()?;

            let report = run_monte_carlo(&spec)?;
            if let Some(path) = out_csv {
                io::write_atomic(&path, &io::mc_report_to_csv(&report))?;
            }
            let table = io::mc_report_to_table(&report);
            match out_table {
                Some(path) => io::write_atomic(&path, &table)?,
                None => print!("{table}"),
            }
            Ok(())
        }

        Command::Grids {
            common,
            fit,
            out_dir,
            points,
        } => {
            setup_threads(&common)?;
            FileConfig::load(common.config.as_deref())?.finish()?;
            let fitted = io::read_fit(&fit)?;
            write_grids(&out_dir, &fitted, points)?;
            Ok(())
        }
    }
}

fn write_grids(
    dir: &std::path::Path,
    fit: &vcam_core::VcamFit,
    points: usize,
) -> Result<(), Box<dyn Error>> {
    if points < 2 {
        return Err(Box::new(ConfigError("grid needs at least 2 points".into())));
    }
    std::fs::create_dir_all(dir)?;
    for (k, f) in fit.alpha.iter().enumerate() {
        io::write_grid_csv(&dir.join(format!("alpha{k}.csv")), &f.grid(points)?)?;
    }
    for (k, f) in fit.beta.iter().enumerate() {
        io::write_grid_csv(&dir.join(format!("beta{}.csv", k + 1)), &f.grid(points)?)?;
    }
    Ok(())
}
