use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use couette_cli::config::{parse_config, Format};
use couette_cli::{execute, Command};

#[derive(Debug, Parser)]
#[command(name = "couette", version, about = "Resolvent, decay and stability verification runs for Couette flow")]
struct Cli {
    /// Configuration file (TOML); defaults apply to absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker pool size.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for randomized test points.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output formats (repeatable).
    #[arg(long = "format", global = true, value_enum)]
    formats: Vec<Format>,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: reading {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => String::new(),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        cfg.run.jobs = j;
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if !cli.formats.is_empty() {
        cfg.run.formats = cli.formats.clone();
    }
    match execute(cli.command, &cfg, &cli.out) {
        Ok(run) => {
            for (c, d) in &run.timings {
                eprintln!("{:>2} {:<22} {:>9.2} s", c.number(), c.key(), d.as_secs_f64());
            }
            for (key, v) in &run.document.verdicts {
                println!("{} {key}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
            }
            for f in &run.document.emitted_files {
                println!("wrote {}", cli.out.join(f).display());
            }
            if run.document.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
