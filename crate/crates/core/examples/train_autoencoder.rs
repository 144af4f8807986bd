//! Trains the sequence autoencoder on a synthetic cohort and prints the
//! windowed loss curve and a few latent codes.
//!
//! cargo run --release --example train_autoencoder -- [max_iters]

use mci_prognosis::autoencoder::extract_features;
use mci_prognosis::cohort::{generate_cohort, Horizon};
use mci_prognosis::pipeline::{prepare, train_autoencoder, ExperimentConfig};

fn main() -> mci_prognosis::Result<()> {
    let max_iters = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let cfg = ExperimentConfig { max_iters, ..ExperimentConfig::default() };
    let cohort = generate_cohort(&cfg.gen_config())?;
    let prepared = prepare(&cohort, &cfg)?;
    let (model, history) = train_autoencoder(&prepared, &cfg, cfg.hidden_dim)?;
    for r in history.iter().step_by((history.len() / 10).max(1)) {
        println!("iter {:>6}  lr {:.0e}  loss {:.5}", r.iteration, r.lr, r.loss);
    }
    let last = history.last().expect("at least one window");
    println!("final window loss {:.5} (ratio to first {:.3})", last.loss, last.loss / history[0].loss);

    let features = extract_features(&model, &prepared.test, Horizon::Twelve)?;
    for f in features.features.iter().take(5) {
        let z: Vec<String> = f.z.iter().map(|v| format!("{v:+.3}")).collect();
        println!("{}  z = [{}]", f.subject_id, z.join(", "));
    }
    Ok(())
}
