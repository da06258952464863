//! `qvs` command-line front end: scoring, selection, campaigns and synthetic data.

pub mod calc;
pub mod config;
pub mod dataset;
pub mod error;
pub mod generate;
pub mod runner;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use qvs::vendi::parse_order_list;
use qvs::Order;

use config::{kernel_spec, Overrides, Plan, RunConfig};
use dataset::Dataset;
use error::{CliError, CliResult};
use generate::{Generator, GeneratorParams};

#[derive(Debug, Parser)]
#[command(
    name = "qvs",
    version,
    about = "Quality-weighted Vendi scores and diverse batch search"
)]
pub struct Cli {
    /// Base seed; overrides `execution.base_seed` and seeds `gen`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum repeats run at once.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Where `run` and `bench` write their files.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Vendi score (and qVS when a `value` column exists) of every row.
    Score {
        dataset: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Comma-separated orders; `inf` allowed.
        #[arg(long, default_value = "1")]
        q: String,
        /// Also write the table to this CSV file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Greedy qVS selection of a batch of rows.
    Select {
        dataset: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        batch: usize,
        #[arg(long, default_value = "1")]
        q: String,
    },
    /// Run the campaigns described by a config file.
    Run(RunArgs),
    /// Run the full policy × order grid and write plot-ready tables.
    Bench(RunArgs),
    /// Write a synthetic dataset.
    Gen {
        /// two-cluster-binary, ring-of-clusters-binary, multi-peak-continuous or two-group-discrete-pool
        generator: String,
        /// Generator parameter as key=value (TOML value syntax), repeatable.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// gaussian, cosine or distance-derived
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    #[arg(long)]
    pub lengthscale: Option<f64>,
    #[arg(long)]
    pub max_distance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Override a config key, e.g. `--set policy.budget=20`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
}

/// Parses arguments and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) | Err(CliError::Closed) => 0,
        Err(e) => {
            eprintln!("qvs: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let stdout = std::io::stdout();
    match cli.command {
        Command::Score {
            dataset,
            kernel,
            q,
            output,
        } => {
            let data = Dataset::read(&dataset)?;
            let spec = kernel_spec(&kernel.kernel, kernel.lengthscale, kernel.max_distance)?;
            let rows = calc::score(&data, &spec, &parse_order_list(&q)?)?;
            calc::write_scores(&rows, stdout.lock())?;
            if let Some(path) = output {
                calc::write_scores(&rows, std::fs::File::create(path)?)?;
            }
        }
        Command::Select {
            dataset,
            kernel,
            batch,
            q,
        } => {
            let data = Dataset::read(&dataset)?;
            let spec = kernel_spec(&kernel.kernel, kernel.lengthscale, kernel.max_distance)?;
            let order: Order = q.parse()?;
            let s = calc::select(&data, &spec, order, batch)?;
            let indices: Vec<String> = s.indices.iter().map(usize::to_string).collect();
            let mut out = stdout.lock();
            writeln!(out, "indices: {}", indices.join(","))?;
            writeln!(out, "qvs: {}", dataset::real(s.qvs))?;
        }
        Command::Run(args) => campaigns(
            &args,
            &cli_overrides(&args, cli.seed, cli.jobs, cli.output_dir),
            false,
        )?,
        Command::Bench(args) => campaigns(
            &args,
            &cli_overrides(&args, cli.seed, cli.jobs, cli.output_dir),
            true,
        )?,
        Command::Gen {
            generator,
            params,
            output,
        } => {
            let generator: Generator = generator.parse()?;
            let params = parse_params(&params)?;
            let seed = cli.seed.unwrap_or(0);
            let problem = generate::build(generator, &params, seed)?;
            let data = generate::to_dataset(&problem, &params, seed);
            match output {
                Some(path) => data.write(&path)?,
                None => data.to_writer(stdout.lock())?,
            }
        }
    }
    Ok(())
}

fn cli_overrides(
    args: &RunArgs,
    seed: Option<u64>,
    jobs: Option<usize>,
    output_dir: Option<PathBuf>,
) -> Overrides {
    Overrides {
        set: args.set.clone(),
        seed,
        jobs,
        output_dir,
    }
}

fn campaigns(args: &RunArgs, overrides: &Overrides, bench: bool) -> CliResult<()> {
    let plan = Plan::new(RunConfig::load(&args.config, overrides)?)?;
    let summary = runner::execute(&plan, bench)?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "wrote {} logs to {}",
        summary.log_count,
        summary.output_dir.join("logs").display()
    )?;
    for r in summary.report.rows.iter().filter(|r| r.best) {
        let q_eval = r.q_eval.map(|q| format!(" q={q}")).unwrap_or_default();
        let q_policy = r.q_policy.map(|q| format!(" (q={q})")).unwrap_or_default();
        writeln!(
            out,
            "best {}{q_eval}: {}{q_policy} {:.6} ± {:.6}",
            r.metric, r.policy, r.summary.mean, r.summary.stderr
        )?;
    }
    Ok(())
}

/// Generator parameters from `key=value` pairs in TOML value syntax.
fn parse_params(pairs: &[String]) -> CliResult<GeneratorParams> {
    let mut text = String::new();
    for p in pairs {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("parameter `{p}` is not key=value")))?;
        text.push_str(&format!("{} = {}\n", k.trim(), v.trim()));
    }
    toml::from_str(&text).map_err(|e: toml::de::Error| CliError::config(e.to_string()))
}
