use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use seqtest::engine::{run_batch, run_sequential, Sidedness};
use seqtest::increments::KernelSpec;
use seqtest::sim::rng::trial_rng;
use seqtest::sim::{run_experiment, write_output, ExperimentConfig, GeneratorSpec};
use seqtest::stream_io::{read_increments, StreamFormat};
use seqtest::{Error, Family, Increment, Result, ThresholdPolicy};

#[derive(Parser)]
#[command(name = "seqtest", version, about = "Sequential LIL-boundary hypothesis tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sequential test and print the verdict as JSON.
    Run {
        #[command(flatten)]
        source: SourceArgs,
        /// Step cap.
        #[arg(long)]
        nmax: u64,
    },
    /// Run a fixed-N batch test and print the verdict as JSON.
    Batch {
        #[command(flatten)]
        source: SourceArgs,
        /// Number of increments.
        #[arg(long = "n")]
        n: u64,
    },
    /// Run a Monte Carlo experiment and write CSV plus a JSON summary.
    Experiment {
        /// Experiment config (JSON file).
        #[arg(long)]
        config: PathBuf,
        /// CSV output path; defaults to the config's output_path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the full published trial counts and horizons.
        #[arg(long)]
        paper_scale: bool,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct SourceArgs {
    #[arg(long, value_parser = parse_json_str::<Family>)]
    family: Family,
    /// Threshold policy, inline JSON or a path to a JSON file.
    #[arg(long)]
    policy: String,
    /// Read observations from standard input.
    #[arg(long, conflicts_with = "gen")]
    stdin: bool,
    /// Generator spec (inline JSON or path), e.g. {"kind":"coin","rho":0.6}.
    #[arg(long)]
    gen: Option<String>,
    /// Seed for --gen.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// one_sided_upper or two_sided; defaults by family.
    #[arg(long, value_parser = parse_json_str::<Sidedness>)]
    sided: Option<Sidedness>,
    /// Kernel for the mmd family (inline JSON); linear when absent.
    #[arg(long)]
    kernel: Option<String>,
    /// Declared norm bound B; observations are scaled by 1/(2B).
    #[arg(long)]
    bound: Option<f64>,
    /// Distance bound for dcov increments.
    #[arg(long)]
    distance_bound: Option<f64>,
}

fn parse_json_str<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Inline JSON if it looks like an object, otherwise a file path.
fn load_json<T: DeserializeOwned>(arg: &str) -> Result<T> {
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { std::fs::read_to_string(arg)? };
    Ok(serde_json::from_str(&text)?)
}

type Source = Box<dyn Iterator<Item = Result<Increment>>>;

impl SourceArgs {
    fn kernel(&self) -> Result<KernelSpec> {
        match &self.kernel {
            Some(k) => load_json(k),
            None => Ok(KernelSpec::Linear),
        }
    }

    fn source(&self) -> Result<Source> {
        match (&self.gen, self.stdin) {
            (Some(g), _) => {
                let mut spec: GeneratorSpec = load_json(g)?;
                if let GeneratorSpec::Gaussian { bound, kernel, .. } = &mut spec {
                    if bound.is_none() {
                        *bound = self.bound;
                    }
                    if self.family == Family::Mmd && kernel.is_none() {
                        *kernel = Some(self.kernel()?);
                    }
                }
                if spec.family() != self.family {
                    return Err(Error::Config(format!(
                        "generator produces {} increments but --family is {}",
                        spec.family(),
                        self.family
                    )));
                }
                Ok(Box::new(spec.build(trial_rng(self.seed, 0))?.map(Ok)))
            }
            (None, true) => {
                let format = StreamFormat {
                    family: self.family,
                    bound: self.bound,
                    kernel: self.kernel()?,
                    distance_bound: self.distance_bound,
                };
                Ok(Box::new(read_increments(BufReader::new(io::stdin()), format)))
            }
            (None, false) => Err(Error::Config("one of --stdin or --gen is required".into())),
        }
    }

    fn sidedness(&self) -> Sidedness {
        self.sided.unwrap_or_else(|| Sidedness::default_for(self.family))
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { source, nmax } => {
            let policy: ThresholdPolicy = load_json(&source.policy)?;
            let verdict = run_sequential(source.source()?, policy, nmax, source.sidedness())?;
            print_json(&verdict)
        }
        Command::Batch { source, n } => {
            let policy: ThresholdPolicy = load_json(&source.policy)?;
            let verdict = run_batch(source.source()?, n, policy, source.sidedness())?;
            print_json(&verdict)
        }
        Command::Experiment { config, out, paper_scale, seed } => {
            let mut cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(&config)?)?;
            if paper_scale {
                cfg = cfg.paper_scale();
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let path = out
                .or_else(|| cfg.output_path.clone().map(PathBuf::from))
                .ok_or_else(|| Error::Config("no --out given and config has no output_path".into()))?;
            let output = run_experiment(&cfg)?;
            let summary = write_output(&output, &path)?;
            eprintln!("wrote {} and {}", path.display(), summary.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
