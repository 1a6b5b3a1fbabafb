use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use wavecrest_cli::{
    cmd_certify, cmd_profile, cmd_reduce_advection, cmd_speeds, cmd_sweep, threads_from_env, CliError, RunConfig,
};

/// Traveling-wave speeds, profiles and wavefront certificates for delayed
/// nonlocal reaction-diffusion equations.
#[derive(Parser)]
#[command(name = "wavecrest", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical parameters and minimal speeds -> speeds.json
    Speeds(Common),
    /// Solve for the wave profile -> profile.csv, diagnostics.json
    Profile(Common),
    /// Wavefront certificate -> certificate.json
    Certify(Common),
    /// Parameter sweep -> sweep.csv
    Sweep(Common),
    /// Print the advective scaling eps = D_m/(c - B)^2
    ReduceAdvection(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `[output] dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::Speeds(c)
    | Command::Profile(c)
    | Command::Certify(c)
    | Command::Sweep(c)
    | Command::ReduceAdvection(c)) = &cli.command;
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(dir) = &c.output_dir {
        cfg.output.dir = dir.clone();
    }
    let files = match cli.command {
        Command::Speeds(_) => cmd_speeds(&cfg),
        Command::Profile(_) => cmd_profile(&cfg),
        Command::Certify(_) => cmd_certify(&cfg),
        Command::Sweep(_) => cmd_sweep(&cfg, threads_from_env()?),
        Command::ReduceAdvection(_) => {
            print!("{}", cmd_reduce_advection(&cfg)?);
            Ok(Vec::new())
        }
    }?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            return ExitCode::from(if ok { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wavecrest: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
