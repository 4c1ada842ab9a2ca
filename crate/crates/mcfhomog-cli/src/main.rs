use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use mcfhomog_cli::{error_kind, error_line, exit_code, explain, output_dir, prepare, run, Options, RunConfig, Scenario};

#[derive(Parser, Debug)]
#[command(name = "mcfhomog", version, about = "Forced mean curvature flow in periodic media: scenario runner")]
struct Cli {
    scenario: Scenario,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to MCFHOMOG_WORKERS, then the config, then all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Validate and print the resource plan without running.
    #[arg(long, visible_alias = "explain")]
    dry_run: bool,
    /// `laminar`: verify the two-bump fingering certificate.
    #[arg(long)]
    corollary: bool,
}

fn workers(cli: Option<usize>, config: &RunConfig) -> Result<Option<usize>> {
    if let Some(k) = cli {
        return Ok(Some(k));
    }
    if let Ok(v) = std::env::var("MCFHOMOG_WORKERS") {
        let k = v.trim().parse::<usize>().map_err(|_| mcfhomog_cli::ConfigError(format!("MCFHOMOG_WORKERS = {v:?} is not a positive integer")))?;
        return Ok(Some(k));
    }
    Ok(config.workers)
}

fn main_inner(cli: Cli) -> Result<()> {
    let config = RunConfig::load(&cli.config)?;
    let base_dir = cli.config.parent().map(PathBuf::from).unwrap_or_default();
    let opts = Options { out: output_dir(cli.out.as_deref(), &config, cli.scenario), base_dir, corollary: cli.corollary };
    if let Some(k) = workers(cli.workers, &config)? {
        if k == 0 {
            return Err(mcfhomog_cli::ConfigError("workers must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().context("thread pool")?;
    }
    let prepared = prepare(cli.scenario, &config, &opts)?;
    if cli.dry_run {
        print!("{}", explain(&prepared));
        return Ok(());
    }
    let m = run(&prepared, &opts)?;
    println!("wrote {} files to {} in {:.2} s", m.outputs.len() + 1, opts.out.display(), m.wall_time_s);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(exit_code(error_kind(&e)) as u8)
        }
    }
}
