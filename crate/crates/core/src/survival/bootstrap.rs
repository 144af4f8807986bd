use rand::Rng;
use rayon::prelude::*;

use super::concordance::{concordance_counts, concordance_index};
use crate::rng::stream;
use crate::{Error, Result};

/// Paired bootstrap comparison of two risk scores on the same subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapComparison {
    pub c_a: f64,
    pub c_b: f64,
    /// `c_a - c_b` on the full sample.
    pub delta: f64,
    /// Twice the fraction of resamples whose difference does not share the
    /// sign of `delta`, clipped to 1.
    pub p_value: f64,
    pub n_boot: usize,
}

/// Attempts allowed per replicate to draw a resample with a permissible pair.
const MAX_ATTEMPTS: usize = 10;

/// Resamples subjects with replacement. Replicate `k` draws from stream `k`
/// of `seed`, so the result does not depend on thread scheduling.
pub fn bootstrap_cindex_diff(
    risks_a: &[f64],
    risks_b: &[f64],
    times: &[f64],
    events: &[bool],
    n_boot: usize,
    seed: u64,
) -> Result<BootstrapComparison> {
    if n_boot < 100 {
        return Err(Error::InvalidArgument(format!("n_boot must be at least 100, got {n_boot}")));
    }
    let n = times.len();
    if risks_a.len() != n || risks_b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "bootstrap inputs",
            expected: n,
            actual: risks_a.len().min(risks_b.len()),
        });
    }
    let c_a = concordance_index(risks_a, times, events)?;
    let c_b = concordance_index(risks_b, times, events)?;
    let delta = c_a - c_b;

    let deltas: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut rng = stream(seed, k as u64);
            for _ in 0..MAX_ATTEMPTS {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
                let (t, e): (Vec<f64>, Vec<bool>) = (pick(times), idx.iter().map(|&i| events[i]).collect());
                let ca = concordance_counts(&pick(risks_a), &t, &e)?;
                if ca.permissible == 0 {
                    continue;
                }
                let cb = concordance_counts(&pick(risks_b), &t, &e)?;
                return Ok(ca.c_index()? - cb.c_index()?);
            }
            Err(Error::Data(format!(
                "bootstrap replicate {k} found no permissible pairs in {MAX_ATTEMPTS} draws"
            )))
        })
        .collect::<Result<_>>()?;

    let flips = deltas
        .iter()
        .filter(|&&d| if delta >= 0.0 { d <= 0.0 } else { d >= 0.0 })
        .count();
    let p_value = (2.0 * flips as f64 / n_boot as f64).min(1.0);
    Ok(BootstrapComparison {
        c_a,
        c_b,
        delta,
        p_value,
        n_boot,
    })
}
