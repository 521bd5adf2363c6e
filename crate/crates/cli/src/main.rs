use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use ssp_dirk::search::SearchConfig;
use ssp_dirk_cli::{
    cmd_analyze, cmd_integrate, cmd_make_optimal, cmd_search, cmd_verify, CommandOutcome, IntegrateArgs,
    MethodSource, ProblemKind, SearchArgs,
};

#[derive(Parser)]
#[command(name = "ssp-dirk", version, about = "SSP radius analysis for diagonally implicit Runge–Kutta methods")]
struct Cli {
    /// Write the command's JSON or CSV report here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Suppress the summary line.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Order conditions, SSP radius and the certificate at that radius.
    Analyze { method_file: PathBuf },
    /// Emit the s-stage iterated implicit midpoint method.
    MakeOptimal {
        #[arg(long)]
        s: usize,
    },
    /// Run the numeric checks of the r ≤ 2s argument.
    Verify {
        /// Perturb the optimal family; the run must then fail.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Multi-start search for the largest radius at each stage count.
    Search {
        #[arg(long = "s", required = true, value_delimiter = ',')]
        s_values: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = SearchConfig::new(1).max_iters)]
        max_iters: usize,
    },
    /// Track total variation of a DIRK method on a test problem.
    #[command(group(ArgGroup::new("method").required(true).args(["method_file", "optimal_s"])))]
    Integrate {
        #[arg(long)]
        method_file: Option<PathBuf>,
        #[arg(long)]
        optimal_s: Option<usize>,
        #[arg(long, value_enum)]
        problem: Problem,
        #[arg(long, default_value_t = 100)]
        m: usize,
        /// τ as a fraction of R·τ₀.
        #[arg(long, default_value_t = 1.0)]
        tau_ratio: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Advection,
    Burgers,
}

fn run(cli: Cli) -> CommandOutcome {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Analyze { method_file } => cmd_analyze(&method_file, out),
        Command::MakeOptimal { s } => cmd_make_optimal(s, out),
        Command::Verify { inject_fault } => cmd_verify(cli.seed, inject_fault, out),
        Command::Search {
            s_values,
            restarts,
            max_iters,
        } => cmd_search(
            &SearchArgs {
                s_values,
                restarts,
                max_iters,
                seed: cli.seed,
            },
            out,
        ),
        Command::Integrate {
            method_file,
            optimal_s,
            problem,
            m,
            tau_ratio,
            steps,
        } => {
            let method = match (method_file, optimal_s) {
                (Some(path), _) => MethodSource::File(path),
                (None, Some(s)) => MethodSource::Optimal(s),
                (None, None) => unreachable!("clap requires one method source"),
            };
            let problem = match problem {
                Problem::Advection => ProblemKind::Advection,
                Problem::Burgers => ProblemKind::Burgers,
            };
            cmd_integrate(
                &IntegrateArgs {
                    method,
                    problem,
                    m,
                    tau_ratio,
                    steps,
                },
                out,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    let outcome = run(cli);
    if !outcome.output.is_empty() {
        let mut stdout = std::io::stdout().lock();
        // a closed pipe is not worth a panic
        let _ = stdout.write_all(outcome.output.as_bytes());
    }
    if !quiet || outcome.exit_code != 0 {
        eprintln!("{}", outcome.summary);
    }
    ExitCode::from(outcome.exit_code as u8)
}
