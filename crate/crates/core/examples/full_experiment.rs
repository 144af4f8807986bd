//! Runs the whole model family on one synthetic cohort: autoencoder, Cox
//! fits at both horizons, test-set C-index and bootstrap comparisons.
//!
//! cargo run --release --example full_experiment -- [seed] [max_iters]

use mci_prognosis::cohort::generate_cohort;
use mci_prognosis::pipeline::{run_experiment, ExperimentConfig};

fn main() -> mci_prognosis::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let cfg = ExperimentConfig {
        seed: args.first().copied().unwrap_or(1),
        max_iters: args.get(1).copied().unwrap_or(2000) as usize,
        n_boot: 500,
        ..ExperimentConfig::default()
    };
    let art = run_experiment(&generate_cohort(&cfg.gen_config())?, &cfg)?;
    println!("train {} / test {}", art.prepared.train.len(), art.prepared.test.len());
    for f in &art.fitted {
        println!("{:<28} {:>3}m  C = {:.4}", f.design.kind.name(), f.design.horizon.months(), f.c_index);
    }
    for c in &art.comparisons {
        println!(
            "{}m {} vs {}: delta {:+.4}, p = {:.4}",
            c.horizon.months(),
            c.model_a.name(),
            c.model_b.name(),
            c.result.delta,
            c.result.p_value
        );
    }
    Ok(())
}
