use mci_prognosis::rng::rng_from;
use mci_prognosis::survival::{
    bootstrap_cindex_diff, concordance_counts, concordance_index, cox_grad_hess, cox_nll, fit_cox, CovariateSpec,
    FitOptions, SurvivalRecord,
};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn rec(t: f64, e: bool, x: Vec<f64>) -> SurvivalRecord {
    SurvivalRecord {
        subject_id: String::new(),
        time_months: t,
        event: e,
        x,
    }
}

/// Random records with times on a coarse grid (heavy ties) or continuous.
fn dataset(rng: &mut ChaCha8Rng, n: usize, p: usize, tied: bool) -> Vec<SurvivalRecord> {
    let mut out: Vec<SurvivalRecord> = (0..n)
        .map(|_| {
            let t = if tied { f64::from(rng.random_range(1..=6u32)) * 6.0 } else { rng.random_range(0.1..100.0) };
            rec(t, rng.random::<f64>() < 0.7, (0..p).map(|_| normal(rng)).collect())
        })
        .collect();
    out[0].event = true;
    out
}

/// Breslow partial likelihood by direct summation over risk sets.
fn breslow_nll(beta: &[f64], r: &[SurvivalRecord]) -> f64 {
    let eta = |x: &[f64]| x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    let mut nll = 0.0;
    for i in r.iter().filter(|i| i.event) {
        let denom: f64 = r.iter().filter(|j| j.time_months >= i.time_months).map(|j| eta(&j.x).exp()).sum();
        nll += denom.ln() - eta(&i.x);
    }
    nll
}

/// Efron partial likelihood by direct summation over distinct event times.
fn efron_nll(beta: &[f64], r: &[SurvivalRecord]) -> f64 {
    let eta = |x: &[f64]| x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    let mut times: Vec<f64> = r.iter().filter(|i| i.event).map(|i| i.time_months).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut nll = 0.0;
    for t in times {
        let dead: Vec<&SurvivalRecord> = r.iter().filter(|i| i.event && i.time_months == t).collect();
        let risk: f64 = r.iter().filter(|j| j.time_months >= t).map(|j| eta(&j.x).exp()).sum();
        let tied: f64 = dead.iter().map(|i| eta(&i.x).exp()).sum();
        let d = dead.len() as f64;
        for l in 0..dead.len() {
            nll += (risk - l as f64 / d * tied).ln();
        }
        nll -= dead.iter().map(|i| eta(&i.x)).sum::<f64>();
    }
    nll
}

fn brute_force_c(risk: &[f64], time: &[f64], event: &[bool]) -> (u64, u64, u64) {
    let (mut conc, mut tied, mut perm) = (0, 0, 0);
    for i in 0..risk.len() {
        for j in 0..risk.len() {
            if i == j || !event[i] {
                continue;
            }
            if time[i] < time[j] || (time[i] == time[j] && !event[j]) {
                perm += 1;
                if risk[i] > risk[j] {
                    conc += 1;
                } else if risk[i] == risk[j] {
                    tied += 1;
                }
            }
        }
    }
    (conc, tied, perm)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn gradient_and_hessian_match_finite_differences() {
    let mut rng = rng_from(11);
    let h = 1e-4;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let r = dataset(&mut rng, 60, 3, true);
        let beta: Vec<f64> = (0..3).map(|_| 0.5 * normal(&mut rng)).collect();
        let (g, hess) = cox_grad_hess(&beta, &r).unwrap();
        for k in 0..3 {
            let at = |o: f64| {
                let mut b = beta.clone();
                b[k] += o;
                b
            };
            let fd = (8.0 * (cox_nll(&at(h), &r).unwrap() - cox_nll(&at(-h), &r).unwrap())
                - (cox_nll(&at(2.0 * h), &r).unwrap() - cox_nll(&at(-2.0 * h), &r).unwrap()))
                / (12.0 * h);
            worst = worst.max(rel(g[k], fd));
            let gp = cox_grad_hess(&at(h), &r).unwrap().0;
            let gm = cox_grad_hess(&at(-h), &r).unwrap().0;
            let gp2 = cox_grad_hess(&at(2.0 * h), &r).unwrap().0;
            let gm2 = cox_grad_hess(&at(-2.0 * h), &r).unwrap().0;
            for j in 0..3 {
                let fd = (8.0 * (gp[j] - gm[j]) - (gp2[j] - gm2[j])) / (12.0 * h);
                worst = worst.max(rel(hess[(j, k)], fd));
            }
        }
        assert_eq!(hess, hess.transpose());
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn hessian_psd_at_random_points() {
    let mut rng = rng_from(12);
    for _ in 0..100 {
        let p = rng.random_range(1..=4);
        let (n, tied) = (rng.random_range(5..80), rng.random());
        let r = dataset(&mut rng, n, p, tied);
        let beta: Vec<f64> = (0..p).map(|_| 2.0 * normal(&mut rng)).collect();
        let (_, hess) = cox_grad_hess(&beta, &r).unwrap();
        let min = SymmetricEigen::new(hess).eigenvalues.min();
        assert!(min >= -1e-10, "{min}");
    }
}

#[test]
fn efron_equals_breslow_without_ties() {
    let mut rng = rng_from(13);
    for _ in 0..20 {
        let r = dataset(&mut rng, 50, 2, false);
        let beta = [normal(&mut rng), normal(&mut rng)];
        let (a, b) = (cox_nll(&beta, &r).unwrap(), breslow_nll(&beta, &r));
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} {b}");
    }
}

#[test]
fn efron_matches_direct_summation_with_a_tie() {
    let mut rng = rng_from(14);
    for _ in 0..20 {
        let mut r = dataset(&mut rng, 10, 2, false);
        r[3].time_months = r[0].time_months;
        r[3].event = true;
        let beta = [normal(&mut rng), normal(&mut rng)];
        let (a, b) = (cox_nll(&beta, &r).unwrap(), efron_nll(&beta, &r));
        assert!((a - b).abs() < 1e-12, "{a} {b}");
    }
}

/// Exponential proportional hazards with independent exponential censoring.
fn ph_data(seed: u64, n: usize, beta: &[f64], censor_rate: f64) -> Vec<SurvivalRecord> {
    let mut rng = rng_from(seed);
    (0..n)
        .map(|_| {
            let x: Vec<f64> = beta.iter().map(|_| normal(&mut rng)).collect();
            let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            let t = -(1.0 - rng.random::<f64>()).ln() / eta.exp();
            let c = -(1.0 - rng.random::<f64>()).ln() / censor_rate;
            rec(t.min(c), t <= c, x)
        })
        .collect()
}

#[test]
fn recovers_true_coefficients() {
    let truth = [1.0, -0.5];
    let mut mean = [0.0; 2];
    let mut censored = 0.0;
    for seed in 0..5 {
        let r = ph_data(seed, 2000, &truth, 0.25);
        censored += r.iter().filter(|x| !x.event).count() as f64 / 2000.0 / 5.0;
        let m = fit_cox(&r, CovariateSpec::identity(vec!["a".into(), "b".into()]), FitOptions::default()).unwrap();
        assert!(m.converged && m.gradient_norm < 1e-8);
        for j in 0..2 {
            mean[j] += m.beta[j] / 5.0;
        }
    }
    assert!((0.1..0.35).contains(&censored), "censoring {censored}");
    for j in 0..2 {
        assert!((mean[j] - truth[j]).abs() < 0.1, "{mean:?}");
    }
}

#[test]
fn null_coefficients_recovered_near_zero() {
    let mut mean = [0.0; 2];
    for seed in 10..15 {
        let r = ph_data(seed, 2000, &[0.0, 0.0], 0.25);
        let m = fit_cox(&r, CovariateSpec::identity(vec!["a".into(), "b".into()]), FitOptions::default()).unwrap();
        for j in 0..2 {
            mean[j] += m.beta[j] / 5.0;
        }
    }
    assert!(mean.iter().all(|b| b.abs() < 0.08), "{mean:?}");
}

#[test]
fn affine_rescaling_preserves_ranking() {
    let r = ph_data(3, 300, &[0.8, -0.3], 0.5);
    let spec = || CovariateSpec::identity(vec!["a".into(), "b".into()]);
    let m = fit_cox(&r, spec(), FitOptions::default()).unwrap();
    let scaled: Vec<SurvivalRecord> = r.iter().map(|s| rec(s.time_months, s.event, vec![3.0 * s.x[0] - 7.0, s.x[1]])).collect();
    let ms = fit_cox(&scaled, spec(), FitOptions::default()).unwrap();
    assert!((ms.beta[0] * 3.0 - m.beta[0]).abs() < 1e-6);
    let (t, e): (Vec<f64>, Vec<bool>) = r.iter().map(|s| (s.time_months, s.event)).unzip();
    let c = |m: &mci_prognosis::survival::CoxModel, d: &[SurvivalRecord]| {
        let risk: Vec<f64> = d.iter().map(|s| m.risk_score(&s.x).unwrap()).collect();
        concordance_index(&risk, &t, &e).unwrap()
    };
    assert!((c(&m, &r) - c(&ms, &scaled)).abs() < 1e-10);
}

#[test]
fn risk_score_is_a_dot_product() {
    let r = ph_data(4, 100, &[0.5, 0.5, -0.2], 0.5);
    let m = fit_cox(&r, CovariateSpec::identity(vec!["a".into(), "b".into(), "c".into()]), FitOptions::default()).unwrap();
    let x = [0.3, -1.2, 2.0];
    let oracle: f64 = (0..3).map(|j| m.beta[j] * x[j]).sum();
    assert!((m.risk_score(&x).unwrap() - oracle).abs() < 1e-15);
}

#[test]
fn concordance_matches_brute_force_on_50_datasets() {
    let mut rng = rng_from(15);
    for _ in 0..50 {
        let n = rng.random_range(2..=200);
        let risk: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..15u32))).collect();
        let time: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(1..=20u32))).collect();
        let mut event: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.6).collect();
        event[0] = true;
        let (conc, tied, perm) = brute_force_c(&risk, &time, &event);
        let got = concordance_counts(&risk, &time, &event).unwrap();
        assert_eq!((got.concordant, got.tied, got.permissible), (conc, tied, perm));
        if perm > 0 {
            let want = (2 * conc + tied) as f64 / (2 * perm) as f64;
            assert_eq!(concordance_index(&risk, &time, &event).unwrap(), want);
        }
    }
}

#[test]
fn worked_example_is_one_third() {
    assert_eq!(concordance_index(&[2.0, 1.0, 3.0], &[1.0, 2.0, 3.0], &[true, true, false]).unwrap(), 1.0 / 3.0);
}

#[test]
fn bootstrap_detects_informative_model() {
    let mut significant = 0;
    for seed in 0..5u64 {
        let mut rng = rng_from(100 + seed);
        let mut risk_a = Vec::new();
        let mut risk_b = Vec::new();
        let mut times = Vec::new();
        let mut events = Vec::new();
        for _ in 0..400 {
            let x = normal(&mut rng);
            let t = -(1.0 - rng.random::<f64>()).ln() / x.exp();
            let c = -(1.0 - rng.random::<f64>()).ln() / 0.3;
            risk_a.push(x);
            risk_b.push(normal(&mut rng));
            times.push(t.min(c));
            events.push(t <= c);
        }
        let r = bootstrap_cindex_diff(&risk_a, &risk_b, &times, &events, 500, seed).unwrap();
        assert!(r.delta > 0.0);
        significant += usize::from(r.p_value < 0.05);
    }
    assert!(significant >= 3, "{significant}/5");
}

proptest! {
    #[test]
    fn concordance_invariant_under_increasing_maps(
        data in proptest::collection::vec((-5.0f64..5.0, 1u32..30, any::<bool>()), 2..120),
    ) {
        let risk: Vec<f64> = data.iter().map(|d| d.0).collect();
        let time: Vec<f64> = data.iter().map(|d| f64::from(d.1)).collect();
        let mut event: Vec<bool> = data.iter().map(|d| d.2).collect();
        event[0] = true;
        let Ok(c) = concordance_index(&risk, &time, &event) else { return Ok(()); };
        let exp: Vec<f64> = risk.iter().map(|r| r.exp()).collect();
        let affine: Vec<f64> = risk.iter().map(|r| 2.5 * r + 4.0).collect();
        prop_assert_eq!(concordance_index(&exp, &time, &event).unwrap(), c);
        prop_assert_eq!(concordance_index(&affine, &time, &event).unwrap(), c);
        let mut sorted = risk.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).all(|w| w[0] != w[1]) {
            let neg: Vec<f64> = risk.iter().map(|r| -r).collect();
            prop_assert!((concordance_index(&neg, &time, &event).unwrap() - (1.0 - c)).abs() < 1e-15);
        }
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn hessian_is_symmetric_and_psd(seed in 0u64..5000, p in 1usize..4, tied in any::<bool>()) {
        let mut rng = rng_from(seed);
        let r = dataset(&mut rng, 30, p, tied);
        let beta: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
        let (_, h) = cox_grad_hess(&beta, &r).unwrap();
        prop_assert_eq!(&h, &h.transpose());
        prop_assert!(SymmetricEigen::new(h).eigenvalues.min() >= -1e-10);
    }
}
