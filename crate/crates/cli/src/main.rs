use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmotflow_cli::{run, CliError, Config};

#[derive(Parser)]
#[command(name = "mmotflow", version, about = "Multi-marginal entropic transport by continuation in epsilon")]
struct Cli {
    /// Worker threads for the parallel sums.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, overriding [output] dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot start {k} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Validate { config } => Config::load(config).map(|c| {
            println!("ok: experiment {} (n = {}, m = {}, eta = {})", c.experiment.name(), c.n, c.m, c.eta);
        }),
        Command::Run { config } => Config::load(config).and_then(|c| {
            let out = cli.out.clone().unwrap_or_else(|| c.out_dir.clone());
            let summary = run(&c, &out)?;
            println!("{}", summary.line);
            Ok::<_, CliError>(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
