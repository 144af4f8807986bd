//! Runs the full model family on several synthetic cohorts and tabulates
//! how often the longitudinal models beat their baselines.
//!
//! cargo run --release --example seed_scan -- [n_seeds] [max_iters]

use mci_prognosis::cohort::{generate_cohort, Horizon};
use mci_prognosis::pipeline::{run_experiment, ExperimentConfig, ModelKind};

fn main() -> mci_prognosis::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n_seeds = args.first().copied().unwrap_or(10) as u64;
    let max_iters = args.get(1).copied().unwrap_or(2000);
    let mut wins = [0usize; 3];
    println!("seed  base6  single6 long6  limg6 | base12 single12 long12 limg12");
    for seed in 1..=n_seeds {
        let cfg = ExperimentConfig {
            seed,
            max_iters,
            n_boot: 200,
            ..ExperimentConfig::default()
        };
        let cohort = generate_cohort(&cfg.gen_config())?;
        let art = run_experiment(&cohort, &cfg)?;
        let c = |k, h| art.c_index(k, h).unwrap();
        let mut line = format!("{seed:>4}");
        for h in Horizon::ALL {
            for k in ModelKind::REPORTED {
                line += &format!(" {:.4}", c(k, h));
            }
            line += " |";
        }
        println!("{line}");
        let t = Horizon::Twelve;
        wins[0] += usize::from(c(ModelKind::Longitudinal, t) >= c(ModelKind::BaselineCognitive, t));
        wins[1] += usize::from(c(ModelKind::LongitudinalImaging, t) >= c(ModelKind::Longitudinal, t));
        wins[2] += usize::from(c(ModelKind::SingleVisit, t) >= c(ModelKind::SingleVisit, Horizon::Six));
    }
    println!("longitudinal >= baseline (12m):         {}/{n_seeds}", wins[0]);
    println!("longitudinal+imaging >= longitudinal:   {}/{n_seeds}", wins[1]);
    println!("single visit 12m >= 6m:                 {}/{n_seeds}", wins[2]);
    Ok(())
}
