use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use splitmpc::scenario::{Scenario, SeedPolicy};
use splitmpc_cli::{
    certify_command, compare_command, exit_code, parse_scenario, run_command, CliError,
};

/// Split-horizon MPC benchmark harness.
#[derive(Parser)]
#[command(name = "splitmpc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scenario file (JSON); omitted means the built-in benchmark.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override the scenario's simulation length.
    #[arg(long)]
    steps: Option<usize>,
    /// Warm-start policy: `warm` or `warm+reflect`.
    #[arg(long = "seed-policy")]
    seed_policy: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scheme and write its trace and summary.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Scheme: standard[-N[@dt]], granular, nush, or proposed.
        #[arg(long)]
        scheme: String,
        /// Output directory for the CSV trace and JSON summary.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run several schemes and produce the comparison table.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Schemes to run (repeatable); defaults to the scenario's list.
        #[arg(long = "scheme")]
        schemes: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check recursive feasibility of the shifted candidate step by step.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        scheme: String,
    },
    /// Print the built-in scenario as JSON.
    PrintDefaults,
}

fn load_scenario(common: &CommonArgs) -> Result<Scenario, CliError> {
    let mut scenario = match &common.scenario {
        Some(path) => parse_scenario(path)?,
        None => Scenario::default(),
    };
    if let Some(steps) = common.steps {
        if steps == 0 {
            return Err(CliError::usage("--steps must be at least 1"));
        }
        scenario.steps = steps;
    }
    if let Some(policy) = &common.seed_policy {
        scenario.seed_policy = policy
            .parse::<SeedPolicy>()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    Ok(scenario)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            common,
            scheme,
            out,
        } => {
            let scenario = load_scenario(&common)?;
            let output = run_command(&scenario, &scheme, &out)?;
            let s = &output.summary;
            println!(
                "{}: V* = {:.1}, median solve {:.2} ms, {} decision variables, \
                 {:.1} s horizon, {:.0}% converged",
                s.scheme,
                s.v_star,
                s.median_solve_ms,
                s.n_decision_vars,
                s.horizon_span_s,
                s.converged_fraction * 100.0
            );
            Ok(())
        }
        Command::Compare {
            common,
            schemes,
            out,
        } => {
            let scenario = load_scenario(&common)?;
            let schemes = if schemes.is_empty() {
                scenario.schemes.clone()
            } else {
                schemes
            };
            let report = compare_command(&scenario, &schemes, &out)?;
            print!("{}", report.table());
            Ok(())
        }
        Command::Certify { common, scheme } => {
            let scenario = load_scenario(&common)?;
            let steps = scenario.steps;
            let report = certify_command(&scenario, &scheme, steps)?;
            for record in &report.records {
                println!(
                    "step {:3}: {} (violation {:.3e})",
                    record.step,
                    if record.valid { "valid" } else { "INVALID" },
                    record.max_violation
                );
            }
            match report.first_invalid() {
                None => {
                    println!(
                        "{}: all {} certificates valid",
                        report.scheme,
                        report.records.len()
                    );
                    Ok(())
                }
                Some(step) => Err(CliError {
                    code: exit_code::CERTIFICATION,
                    message: format!("first invalid certificate at step {step}"),
                }),
            }
        }
        Command::PrintDefaults => {
            println!(
                "{}",
                serde_json::to_string_pretty(&Scenario::default()).expect("defaults serialize")
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not failures
            let code = if e.use_stderr() { exit_code::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::from(exit_code::SUCCESS),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
