//! Fits a Cox model by Newton-Raphson on simulated exponential survival data
//! and compares the estimate with the true coefficients.
//!
//! cargo run --release --example cox_fit

use mci_prognosis::rng::rng_from;
use mci_prognosis::survival::{fit_cox, CovariateSpec, FitOptions, SurvivalRecord};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> mci_prognosis::Result<()> {
    let truth = [0.8, -0.4, 0.0];
    let mut rng = rng_from(3);
    let records: Vec<SurvivalRecord> = (0..1500)
        .map(|i| {
            let x: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            let eta: f64 = x.iter().zip(truth).map(|(a, b)| a * b).sum();
            let t = -(1.0 - rng.random::<f64>()).ln() / eta.exp();
            let c = rng.random_range(0.0..3.0);
            // Rounding to a coarse grid creates tied event times.
            SurvivalRecord {
                subject_id: format!("S{i}"),
                time_months: (t.min(c) * 10.0).ceil() / 10.0,
                event: t <= c,
                x,
            }
        })
        .collect();
    let names = vec!["x1".into(), "x2".into(), "x3".into()];
    let model = fit_cox(&records, CovariateSpec::identity(names), FitOptions::default())?;
    println!(
        "converged {} in {} iterations, log partial likelihood {:.3}",
        model.converged, model.iterations, model.log_partial_likelihood
    );
    for (k, (b, t)) in model.beta.iter().zip(truth).enumerate() {
        println!("beta[{k}] = {b:+.4}  (true {t:+.1})");
    }
    Ok(())
}
