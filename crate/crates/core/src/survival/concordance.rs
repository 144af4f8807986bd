use crate::{Error, Result};

/// Pair counts behind Harrell's C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConcordanceCounts {
    pub concordant: u64,
    pub tied: u64,
    pub permissible: u64,
}

impl ConcordanceCounts {
    pub fn c_index(&self) -> Result<f64> {
        if self.permissible == 0 {
            return Err(Error::NoPermissiblePairs);
        }
        Ok((2 * self.concordant + self.tied) as f64 / (2 * self.permissible) as f64)
    }
}

/// Fenwick tree over risk ranks.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn add(&mut self, mut i: usize) {
        i += 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `< i`.
    fn below(&self, mut i: usize) -> u64 {
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Counts pairs `(i, j)` where `i` has an event and `j` outlived it: either
/// `time_j > time_i`, or equal times with `j` censored. A pair is concordant
/// when `risk_i > risk_j` and tied when the risks are equal.
pub fn concordance_counts(risks: &[f64], times: &[f64], events: &[bool]) -> Result<ConcordanceCounts> {
    let n = risks.len();
    if times.len() != n || events.len() != n {
        return Err(Error::DimensionMismatch {
            context: "concordance inputs",
            expected: n,
            actual: if times.len() != n { times.len() } else { events.len() },
        });
    }
    if risks.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("concordance inputs".into()));
    }

    // Dense ranks of risk values.
    let mut by_risk: Vec<usize> = (0..n).collect();
    by_risk.sort_by(|&a, &b| risks[a].total_cmp(&risks[b]));
    let mut rank = vec![0usize; n];
    let mut r = 0;
    for k in 0..n {
        if k > 0 && risks[by_risk[k]] != risks[by_risk[k - 1]] {
            r += 1;
        }
        rank[by_risk[k]] = r;
    }

    let mut by_time: Vec<usize> = (0..n).collect();
    by_time.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let mut tree = Fenwick(vec![0; r + 2]);
    let mut counts = ConcordanceCounts::default();
    let mut inserted = 0u64;
    let mut start = 0;
    while start < n {
        let t = times[by_time[start]];
        let mut end = start;
        while end < n && times[by_time[end]] == t {
            end += 1;
        }
        let group = &by_time[start..end];
        // Censored subjects at this time outlive the events at this time.
        for &j in group.iter().filter(|&&j| !events[j]) {
            tree.add(rank[j]);
            inserted += 1;
        }
        for &i in group.iter().filter(|&&i| events[i]) {
            let below = tree.below(rank[i]);
            let at_or_below = tree.below(rank[i] + 1);
            counts.permissible += inserted;
            counts.concordant += below;
            counts.tied += at_or_below - below;
        }
        for &i in group.iter().filter(|&&i| events[i]) {
            tree.add(rank[i]);
            inserted += 1;
        }
        start = end;
    }
    Ok(counts)
}

/// Harrell's concordance index; higher risk should mean earlier events.
pub fn concordance_index(risks: &[f64], times: &[f64], events: &[bool]) -> Result<f64> {
    concordance_counts(risks, times, events)?.c_index()
}
