//! Harrell's C for two risk scores and a paired bootstrap test of their
//! difference.
//!
//! cargo run --release --example concordance_bootstrap

use mci_prognosis::rng::rng_from;
use mci_prognosis::survival::{bootstrap_cindex_diff, concordance_counts};
use rand::Rng;

fn main() -> mci_prognosis::Result<()> {
    let mut rng = rng_from(8);
    let n = 300;
    let signal: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let times: Vec<f64> = signal.iter().map(|s| ((1.0 - s) * 60.0 + rng.random_range(0.0..30.0)).round()).collect();
    let events: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.5).collect();
    let good: Vec<f64> = signal.iter().map(|s| s + rng.random_range(-0.2..0.2)).collect();
    let weak: Vec<f64> = signal.iter().map(|s| s + rng.random_range(-1.0..1.0)).collect();

    let counts = concordance_counts(&good, &times, &events)?;
    println!(
        "informative score: {} concordant, {} tied, {} permissible pairs, C = {:.4}",
        counts.concordant,
        counts.tied,
        counts.permissible,
        counts.c_index()?
    );
    let cmp = bootstrap_cindex_diff(&good, &weak, &times, &events, 2000, 99)?;
    println!(
        "C(a) = {:.4}, C(b) = {:.4}, delta = {:+.4}, p = {:.4} over {} replicates",
        cmp.c_a, cmp.c_b, cmp.delta, cmp.p_value, cmp.n_boot
    );
    Ok(())
}
