use auctionlab::{dispatch, load_config, write_tables, Command};
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Entry-fee auction experiments.
#[derive(Parser)]
#[command(name = "auctionlab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV output.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replace the config's seed.
    #[arg(long)]
    seed_override: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = || -> anyhow::Result<bool> {
        let mut cfg = load_config(&cli.config)?;
        if let Some(s) = cli.seed_override {
            cfg.seed = s;
        }
        let out = dispatch(cli.command, &cfg)?;
        print!("{}", out.report);
        for p in write_tables(&out, &cfg.name, &cli.out)? {
            println!("wrote {}", p.display());
        }
        Ok(out.pass)
    };
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
