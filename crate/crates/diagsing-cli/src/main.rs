use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use diagsing_cli::{configure_threads, load_config, run, verify};

#[derive(Parser)]
#[command(name = "diagsing", version, about = "Evolution, final states and spectral decompositions for a rank-one scattering model")]
struct Cli {
    /// Directory for CSV tables and resolved_config.json.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads; overrides the config's `threads` hint.
    #[arg(long, global = true, env = "DIAGSING_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the runs listed in the config.
    Run { config: PathBuf },
    /// Execute the verification suite and write verify.csv.
    Verify { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let path = match &cli.command {
        Command::Run { config } | Command::Verify { config } => config,
    };
    let result = load_config(path).and_then(|cfg| {
        configure_threads(cli.threads.or(cfg.threads));
        match cli.command {
            Command::Run { .. } => run(cfg, &cli.out_dir),
            Command::Verify { .. } => verify(cfg, &cli.out_dir),
        }
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("diagsing: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
