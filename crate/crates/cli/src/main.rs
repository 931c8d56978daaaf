use clap::{Parser, Subcommand};
use ekman_core::exec::{with_threads, Execution};
use ekman_core::harness::{run_command, Command, ExperimentSpec, RunSummary};
use std::path::PathBuf;
use std::process::ExitCode;

/// Boundary layers and Ekman pumping in a fast-rotating strip: experiment runner.
#[derive(Parser)]
#[command(name = "ekman", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Experiment spec: JSON object or key = value lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 1 runs sequentially, 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    parallel: usize,
    /// Assert the run consumes no randomness.
    #[arg(long, global = true)]
    seedless: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Eigenvalue, damping and pumping tables plus the eigenbasis quadrature suite.
    Modes,
    /// Build boundary layers for one wall trace pair and evaluate them.
    Bl,
    /// Envelope amplitudes c_k(t) and their trace bounds.
    Envelope,
    /// Per-mode direct solve.
    Direct,
    /// Direct solve against the assembled approximate solution.
    Compare,
    /// Parameter sweep of the configured experiment kind.
    Sweep,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Modes => Command::Modes,
            Cmd::Bl => Command::Bl,
            Cmd::Envelope => Command::Envelope,
            Cmd::Direct => Command::Direct,
            Cmd::Compare => Command::Compare,
            Cmd::Sweep => Command::Sweep,
        }
    }
}

fn report(s: &RunSummary) {
    for c in &s.checks {
        println!("{} {} value={:.6e} tol={:.3e} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance, c.rule);
    }
    for (name, r) in &s.regressions {
        println!("regression {name}: slope={:.5} r2={:.6}", r.slope, r.r_squared);
    }
    println!("{}: {}", s.command, if s.passed { "all checks passed" } else { "some checks failed" });
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let spec = match cli.config.as_deref().map(ExperimentSpec::load).unwrap_or_else(|| Ok(ExperimentSpec::default())) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    // the library draws no random numbers; the flag records that the run relies on it
    if cli.seedless {
        println!("seedless: no random number generator is used by any command");
    }
    let exec = if cli.parallel == 1 { Execution::Sequential } else { Execution::default() };
    let cmd: Command = cli.cmd.into();
    let out = cli.out.clone();
    match with_threads(cli.parallel, move || run_command(cmd, &spec, &out, exec)) {
        Ok(s) => {
            report(&s);
            if s.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
