use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mci_prognosis::pipeline::{cmd_generate, cmd_report, cmd_run, cmd_sweep, format_summary, ExperimentConfig};
use mci_prognosis::{Error, Result};

#[derive(Parser)]
#[command(version, about = "MCI-to-dementia prognosis from longitudinal cognitive measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort (visits.csv, outcomes.csv)
    Generate(Common),
    /// Train the autoencoder, fit and evaluate every model, write report.csv
    Run(Common),
    /// Evaluate the longitudinal+imaging model across latent sizes, write sweep.csv
    Sweep(Common),
    /// Write fig3_data.csv / fig4_data.csv from an output directory
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of autoencoder training iterations
    #[arg(long)]
    max_iters: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(m) = self.max_iters {
            cfg.max_iters = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = c.config()?;
            let summary = cmd_generate(&cfg)?;
            print!("{}", format_summary(&summary));
            println!("wrote {} and {}", cfg.visits_path().display(), cfg.outcomes_path().display());
        }
        Command::Run(c) => {
            let cfg = c.config()?;
            let (art, written) = cmd_run(&cfg)?;
            println!("{:<26} {:>7} {:>8}", "model", "horizon", "C-index");
            for m in art.fitted.iter() {
                println!("{:<26} {:>7} {:>8.4}", m.kind().name(), m.horizon().to_string(), m.c_index);
            }
            for cmp in &art.comparisons {
                let r = &cmp.result;
                println!(
                    "{} {} vs {}: dC = {:+.4}, p = {:.4}",
                    cmp.horizon, cmp.model_a, cmp.model_b, r.delta, r.p_value
                );
            }
            println!("wrote {} files under {}", written.len(), cfg.out.display());
        }
        Command::Sweep(c) => {
            let cfg = c.config()?;
            let (rows, _) = cmd_sweep(&cfg)?;
            for r in rows {
                println!("hidden_dim {:>2}  {:>3}  C = {:.4}", r.hidden_dim, r.horizon.to_string(), r.c_index);
            }
        }
        Command::Report(c) => {
            let cfg = c.config()?;
            for p in cmd_report(&cfg.out)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Error::exit_code(&e) as u8)
        }
    }
}
