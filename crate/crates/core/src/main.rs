use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tool_innovation::config::{parse_config, RunConfig};
use tool_innovation::env::{optimal_action_sequences, oracle_optimal_steps, RewardLocation};
use tool_innovation::io::emit_outputs;

#[derive(Parser)]
#[command(
    name = "toolgrid",
    version,
    about = "Active-inference agents on the tool grid"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write its CSVs.
    Run(RunArgs),
    /// Print the shortest solving action count for every reward location.
    Oracle,
    /// Parse and validate a config file without running it.
    Validate(ConfigArg),
}

#[derive(Args)]
struct ConfigArg {
    /// Config file (flat `key = value` lines).
    #[arg(value_name = "CONFIG", required_unless_present = "config")]
    path: Option<PathBuf>,
    #[arg(long = "config", value_name = "PATH", conflicts_with = "path")]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn path(&self) -> &Path {
        self.path
            .as_deref()
            .or(self.config.as_deref())
            .expect("clap enforces one of the two")
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Output directory (overrides `output_dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base seed (overrides `base_seed`).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Number of trials (overrides `num_trials`).
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Plan on utility alone in the final block (experiment 3).
    #[arg(long)]
    utility_only: bool,
}

fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => format!("file not found: {}", path.display()),
        _ => format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text).map_err(|e| format!("{}:\n{e}", path.display()))
}

fn run(args: &RunArgs) -> Result<(), String> {
    let mut cfg = load(args.config.path())?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.num_trials = trials;
    }
    if args.utility_only {
        cfg.utility_only = true;
    }
    let errs = cfg.validate();
    if !errs.is_empty() {
        let lines: Vec<String> = errs.iter().map(ToString::to_string).collect();
        return Err(lines.join("\n"));
    }

    let report = cfg.run().map_err(|e| e.to_string())?;
    let manifest = emit_outputs(&report, &cfg, &cfg.output_dir).map_err(|e| e.to_string())?;
    for arm in &report.arms {
        let curves = arm.curves();
        let steps: Vec<String> = curves
            .steps
            .iter()
            .map(|m| format!("{:.2}", m.mean))
            .collect();
        println!("{} mean steps per run: {}", arm.name, steps.join(" "));
    }
    println!(
        "wrote {} files and manifest.json to {}",
        manifest.files.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn oracle() {
    for loc in RewardLocation::ALL {
        let seqs: Vec<String> = optimal_action_sequences(loc)
            .iter()
            .map(|s| s.iter().map(|a| a.name()).collect::<Vec<_>>().join(", "))
            .collect();
        println!(
            "{}\t{}\t{}",
            loc,
            oracle_optimal_steps(loc),
            seqs.join(" / ")
        );
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Oracle => {
            oracle();
            Ok(())
        }
        Command::Validate(arg) => load(arg.path()).map(|cfg| {
            println!("ok: experiment {}", cfg.experiment);
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
