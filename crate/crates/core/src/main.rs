use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use trading_prophets::cli::{
    cmd_simulate, cmd_thresholds, cmd_verify, resolve_distribution, ExperimentConfig,
    OutputFormat, OutputSpec, ProcessSpec, VerifyRequest, SCHEMA_VERSION,
};
use trading_prophets::{
    analysis::LowerBoundFamily,
    error::{Error, Result},
    market::CostModel,
};

/// Trading simulator and verifier: online policies against a clairvoyant
/// benchmark, with bid-ask spreads and transaction fees.
#[derive(Parser)]
#[command(name = "prophets", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run a seeded Monte Carlo batch (or a ratio fit over a horizon grid).
    Simulate(SimulateArgs),
    /// Run a named verification suite; exits 1 if any bound fails.
    Verify {
        #[command(subcommand)]
        what: VerifyWhat,
    },
    /// Solve and print the buy/sell thresholds for a distribution.
    Thresholds(ThresholdArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment config; exclusive with the instance/trader flags.
    #[arg(long)]
    config: Option<String>,
    /// Instance generator: prop-adv | prop-iid | appendix-fail | phase.
    #[arg(long)]
    instance: Option<String>,
    /// I.i.d. instance from a distribution: built-in name or spec file.
    #[arg(long)]
    dist: Option<String>,
    /// Full process spec file (JSON).
    #[arg(long = "process-file")]
    process_file: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    phases: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// blsh | bbsa | eps-margin | lookahead:<k>
    #[arg(long)]
    trader: Option<String>,
    /// Margin for eps-margin (defaults to the instance eps).
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long = "eps-pi", default_value_t = 0.0)]
    eps_pi: f64,
    #[arg(long = "eps-sigma", default_value_t = 0.0)]
    eps_sigma: f64,
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed; required (there is no implicit time-based seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Fit the competitive line over these horizons instead of one batch.
    #[arg(long = "t-grid", value_delimiter = ',')]
    t_grid: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum VerifyWhat {
    /// Prophet <= 3x online on random instances (2x under equal means).
    Theorem1 {
        #[arg(long = "random-instances", default_value_t = 1000)]
        random_instances: usize,
        #[arg(long = "max-T", default_value_t = 50)]
        max_t: usize,
        #[arg(long = "max-atoms", default_value_t = 4)]
        max_atoms: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<String>,
    },
    /// The transaction-cost chain on an i.i.d. instance.
    Theorem2 {
        #[arg(long)]
        dist: String,
        #[arg(long = "eps-pi", default_value_t = 0.0)]
        eps_pi: f64,
        #[arg(long = "eps-sigma", default_value_t = 0.0)]
        eps_sigma: f64,
        #[arg(long = "T")]
        t: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Closed-form prophet/online gap on a lower-bound family.
    Lowerbound {
        #[arg(long, value_enum)]
        which: WhichBound,
        #[arg(long)]
        eps: f64,
        #[arg(long = "T")]
        t: usize,
        /// Optional Monte Carlo confirmation.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<String>,
    },
    /// The adaptive phase adversary and the margin-trader failure.
    Appendix {
        #[arg(long)]
        eps: f64,
        #[arg(long = "T", default_value_t = 10_000)]
        t: usize,
        #[arg(long, default_value_t = 1000)]
        phases: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichBound {
    Adversarial,
    Iid,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Built-in name (uniform01) or distribution spec file.
    #[arg(long)]
    dist: String,
    #[arg(long = "eps-pi", default_value_t = 0.0)]
    eps_pi: f64,
    #[arg(long = "eps-sigma", default_value_t = 0.0)]
    eps_sigma: f64,
    #[arg(long)]
    out: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::BoundViolated(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => {
            let config = simulate_config(&args)?;
            let report = cmd_simulate(&config)?;
            print!("{}", report.render_text());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { what } => {
            let (request, out) = verify_request(what)?;
            let report = cmd_verify(&request)?;
            print!("{}", report.render_text());
            if let Some(path) = out {
                report.write_json(&path)?;
            }
            if report.pass() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Thresholds(args) => {
            let dist = resolve_distribution(&args.dist)?;
            let cm = CostModel::new(args.eps_pi, args.eps_sigma)
                .map_err(|e| Error::config("cost", e.to_string()))?;
            let report = cmd_thresholds(&dist, &cm)?;
            print!("{}", report.render_text());
            if let Some(path) = &args.out {
                let text =
                    serde_json::to_string_pretty(&report).expect("report serialization");
                std::fs::write(path, text + "\n").map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn simulate_config(args: &SimulateArgs) -> Result<ExperimentConfig> {
    if let Some(path) = &args.config {
        if args.instance.is_some() || args.dist.is_some() || args.trader.is_some() {
            return Err(Error::config(
                "config",
                "a config file is exclusive with the instance/trader flags",
            ));
        }
        return ExperimentConfig::load(path);
    }

    let need = |field: &str| Error::config(field, "required (or pass --config)");
    let instance = match (&args.instance, &args.dist, &args.process_file) {
        (Some(name), None, None) => {
            let eps = args.eps.ok_or_else(|| need("eps"))?;
            let mut spec = ProcessSpec::generator(name, eps, args.horizon.unwrap_or(0));
            spec.horizon = args.horizon;
            spec.phases = args.phases;
            spec.k = args.k;
            spec
        }
        (None, Some(dist), None) => {
            let dist = resolve_distribution(dist)?;
            let horizon = args.horizon.ok_or_else(|| need("T"))?;
            ProcessSpec::iid(&dist, horizon)
        }
        (None, None, Some(path)) => ProcessSpec::load(path)?,
        _ => {
            return Err(Error::config(
                "instance",
                "pass exactly one of --instance, --dist, or --process-file",
            ))
        }
    };
    let trader = args.trader.clone().ok_or_else(|| need("trader"))?;
    let trials = args.trials.ok_or_else(|| need("trials"))?;
    let seed = args.seed.ok_or_else(|| {
        Error::config("seed", "required; there is no implicit time-based seed")
    })?;
    let cost = CostModel {
        eps_pi: args.eps_pi,
        eps_sigma: args.eps_sigma,
    };
    let output = args.out.as_ref().map(|path| OutputSpec {
        path: path.clone(),
        format: args.format.into(),
    });
    Ok(ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        instance,
        trader,
        margin: args.margin,
        cost,
        trials,
        master_seed: seed,
        t_grid: args.t_grid.clone(),
        output,
    })
}

fn verify_request(what: VerifyWhat) -> Result<(VerifyRequest, Option<String>)> {
    Ok(match what {
        VerifyWhat::Theorem1 {
            random_instances,
            max_t,
            max_atoms,
            seed,
            out,
        } => (
            VerifyRequest::Theorem1 {
                instances: random_instances,
                max_t,
                max_atoms,
                seed,
            },
            out,
        ),
        VerifyWhat::Theorem2 {
            dist,
            eps_pi,
            eps_sigma,
            t,
            trials,
            seed,
            out,
        } => (
            VerifyRequest::Theorem2 {
                dist: resolve_distribution(&dist)?,
                cost: CostModel::new(eps_pi, eps_sigma)
                    .map_err(|e| Error::config("cost", e.to_string()))?,
                t,
                trials,
                seed,
            },
            out,
        ),
        VerifyWhat::Lowerbound {
            which,
            eps,
            t,
            trials,
            seed,
            out,
        } => {
            let mc = match (trials, seed) {
                (None, _) => None,
                (Some(trials), Some(seed)) => Some((trials, seed)),
                (Some(_), None) => {
                    return Err(Error::config(
                        "seed",
                        "required when --trials requests a Monte Carlo confirmation",
                    ))
                }
            };
            (
                VerifyRequest::LowerBound {
                    family: match which {
                        WhichBound::Adversarial => LowerBoundFamily::Adversarial,
                        WhichBound::Iid => LowerBoundFamily::Iid,
                    },
                    eps,
                    t,
                    mc,
                },
                out,
            )
        }
        VerifyWhat::Appendix {
            eps,
            t,
            phases,
            k,
            trials,
            seed,
            out,
        } => (
            VerifyRequest::Appendix {
                eps,
                t,
                phases,
                k,
                trials,
                seed,
            },
            out,
        ),
    })
}
