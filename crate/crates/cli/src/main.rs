use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use sbatch_cli::commands::{
    self, parse_gantt_format, parse_propagation, parse_solver, BenchArgs, GanttFormat, SolveArgs,
};
use sbatch_cli::Outcome;
use sbatch_core::bench::SolverId;
use sbatch_core::solver::Propagation;

/// Serial-batch scheduling with family setups and block-size windows.
#[derive(Parser)]
#[command(name = "sbatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instance files from a TOML sweep configuration.
    Gen {
        config: PathBuf,
        #[arg(long, short, default_value = ".")]
        out: PathBuf,
    },
    /// Solve one instance and write a solution file.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "exact", value_parser = parse_solver)]
        solver: SolverId,
        /// Time budget in seconds.
        #[arg(long, env = "SBATCH_BUDGET", default_value_t = 60.0)]
        budget: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "strong", value_parser = parse_propagation)]
        propagation: Propagation,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Omit wall-clock time so repeated runs give identical files.
        #[arg(long)]
        reproducible: bool,
        /// Output path; standard output when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check an instance, and optionally a solution against it.
    Validate {
        instance: PathBuf,
        solution: Option<PathBuf>,
    },
    /// Run several solvers over a set of instances.
    Bench {
        /// Glob pattern for instance files.
        instances: String,
        #[arg(long, value_delimiter = ',', default_value = "exact,heuristic", value_parser = parse_solver)]
        solvers: Vec<SolverId>,
        #[arg(long, env = "SBATCH_BUDGET", default_value_t = 60.0)]
        budget: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "SBATCH_WORKERS", default_value_t = 1)]
        workers: usize,
        /// Line-delimited records; the summary is written next to it.
        #[arg(long, short, default_value = "records.jsonl")]
        out: PathBuf,
    },
    /// Render a solution as a Gantt chart.
    Gantt {
        instance: PathBuf,
        solution: PathBuf,
        #[arg(long, default_value = "svg", value_parser = parse_gantt_format)]
        format: GanttFormat,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Render even if the schedule violates constraints.
        #[arg(long)]
        force: bool,
    },
}

fn budget(seconds: f64) -> Result<Duration, String> {
    Duration::try_from_secs_f64(seconds).map_err(|e| format!("invalid budget {seconds}: {e}"))
}

fn run(cli: Cli) -> Outcome {
    let bad_budget = |msg: String| Outcome {
        exit: sbatch_cli::Exit::Input,
        stdout: Vec::new(),
        stderr: vec![format!("error: {msg}")],
    };
    match cli.command {
        Command::Gen { config, out } => commands::cmd_gen(&config, &out),
        Command::Solve {
            instance,
            solver,
            budget: secs,
            seed,
            propagation,
            threads,
            reproducible,
            out,
        } => match budget(secs) {
            Ok(budget) => commands::cmd_solve(&SolveArgs {
                instance,
                solver,
                budget,
                seed,
                propagation,
                threads,
                reproducible,
                out,
            }),
            Err(msg) => bad_budget(msg),
        },
        Command::Validate { instance, solution } => {
            commands::cmd_validate(&instance, solution.as_deref())
        }
        Command::Bench {
            instances,
            solvers,
            budget: secs,
            seed,
            workers,
            out,
        } => match budget(secs) {
            Ok(budget) => commands::cmd_bench(&BenchArgs {
                pattern: instances,
                solvers,
                budget,
                seed,
                workers,
                out,
            }),
            Err(msg) => bad_budget(msg),
        },
        Command::Gantt {
            instance,
            solution,
            format,
            out,
            force,
        } => commands::cmd_gantt(&instance, &solution, format, out.as_deref(), force),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = run(cli);
    for line in &outcome.stdout {
        println!("{line}");
    }
    for line in &outcome.stderr {
        eprintln!("{line}");
    }
    ExitCode::from(outcome.code() as u8)
}
