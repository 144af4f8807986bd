//! Test-set C-index of the longitudinal + imaging model as the autoencoder
//! hidden size varies.
//!
//! cargo run --release --example hidden_size_sweep -- [max_iters]

use mci_prognosis::cohort::generate_cohort;
use mci_prognosis::pipeline::{run_sweep, ExperimentConfig};

fn main() -> mci_prognosis::Result<()> {
    let max_iters = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let cfg = ExperimentConfig { max_iters, ..ExperimentConfig::default() };
    let rows = run_sweep(&generate_cohort(&cfg.gen_config())?, &cfg)?;
    println!("hidden_dim horizon c_index");
    for r in rows {
        println!("{:>10} {:>6}m {:.4}", r.hidden_dim, r.horizon.months(), r.c_index);
    }
    Ok(())
}
