use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lifeyears_cli::commands::{self, AxiomArgs, CliError, Format, TableArgs, ThresholdArgs};
use lifeyears_core::sensitivity::{FreeParameter, DEFAULT_GRID_N, DEFAULT_TOL};
use lifeyears_core::FamilyId;

#[derive(Parser)]
#[command(
    name = "lifeyears",
    version,
    about = "Evaluate populations by health and productivity over their lifetimes"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value = "text", global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Value a distribution.
    Evaluate {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Rank two distributions.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Check an evaluator against all axioms; exits 1 if a required axiom fails.
    Axioms {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Find parameter values at which the ranking of two distributions flips.
    Thresholds {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_parser = parse_family)]
        family: FamilyId,
        /// alpha, delta, sigma, gamma, q:<state>, r:<state> or none.
        #[arg(long, value_parser = parse_param)]
        param: Param,
        /// Parameter range as lo,hi.
        #[arg(long, value_parser = parse_range, default_value = "0,1")]
        range: (f64, f64),
        /// Base spec; defaults to every weight at 0.5.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "a*")]
        full_health: String,
        #[arg(long, default_value_t = DEFAULT_GRID_N)]
        grid_n: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Also write an SVG plot of the difference curve.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Print the worked example's tables at the given parameters.
    Tables {
        #[arg(long, default_value_t = 0.5)]
        qa: f64,
        #[arg(long, default_value_t = 0.5)]
        ra: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        v0: f64,
        #[arg(long, default_value_t = 0.5)]
        v05: f64,
    },
    /// Person trade-off elicitation.
    Elicit {
        #[command(subcommand)]
        command: ElicitCommand,
    },
}

#[derive(Subcommand)]
enum ElicitCommand {
    /// Serve the session API.
    Serve {
        #[arg(long, default_value_t = 8080, value_parser = clap::value_parser!(u16).range(1..))]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        cors: Option<String>,
    },
    /// Run simulated respondents against a QALY/PALY truth.
    Simulate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(short, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value = "a")]
        state: String,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Clone)]
struct Param(Option<FreeParameter>);

fn parse_family(s: &str) -> Result<FamilyId, String> {
    s.parse()
}

fn parse_param(s: &str) -> Result<Param, String> {
    if s == "none" {
        Ok(Param(None))
    } else {
        s.parse().map(|p| Param(Some(p)))
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn run(cli: Cli) -> Result<commands::Output, CliError> {
    let f = cli.format;
    match cli.command {
        Command::Evaluate {
            dist,
            spec,
            registry,
        } => commands::cmd_evaluate(&dist, &spec, registry.as_deref(), f),
        Command::Compare {
            a,
            b,
            spec,
            registry,
            tol,
        } => commands::cmd_compare(&a, &b, &spec, registry.as_deref(), tol, f),
        Command::Axioms {
            spec,
            registry,
            trials,
            seed,
            tol,
        } => commands::cmd_axioms(
            AxiomArgs {
                spec: &spec,
                registry: registry.as_deref(),
                trials,
                seed,
                tol,
            },
            f,
        ),
        Command::Thresholds {
            a,
            b,
            family,
            param,
            range,
            spec,
            full_health,
            grid_n,
            tol,
            svg,
        } => commands::cmd_thresholds(
            ThresholdArgs {
                a: &a,
                b: &b,
                family,
                param: param.0,
                range,
                spec: spec.as_deref(),
                full_health: &full_health,
                grid_n,
                tol,
                svg,
            },
            f,
        ),
        Command::Tables {
            qa,
            ra,
            alpha,
            delta,
            sigma,
            v0,
            v05,
        } => commands::cmd_tables(
            TableArgs {
                qa,
                ra,
                alpha,
                delta,
                sigma,
                v0,
                v05,
            },
            f,
        ),
        Command::Elicit {
            command:
                ElicitCommand::Simulate {
                    truth,
                    k,
                    state,
                    tol,
                    seed,
                },
        } => commands::cmd_simulate(&truth, k, &state, tol, seed, f),
        Command::Elicit {
            command:
                ElicitCommand::Serve {
                    port,
                    host,
                    snapshot,
                    cors,
                },
        } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(lifeyears_cli::server::serve(
                port,
                &host,
                snapshot,
                cors.as_deref(),
            ))
            .map_err(CliError)?;
            Ok(commands::Output {
                text: String::new(),
                exit_code: 0,
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
