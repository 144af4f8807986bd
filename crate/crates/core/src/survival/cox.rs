use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use super::{validate_records, CovariateSpec, Scaling, SurvivalRecord};
use crate::{Error, Result};

/// Coefficients beyond this magnitude signal monotone likelihood.
const SEPARATION_LIMIT: f64 = 50.0;
const RIDGE: f64 = 1e-8;

struct Derivs {
    nll: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

/// Efron-tied negative log partial likelihood, optionally with derivatives.
fn efron(beta: &[f64], records: &[SurvivalRecord], derivs: bool) -> Result<Derivs> {
    let p = validate_records(records, Some(beta.len()))?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("cox coefficients".into()));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].time_months.total_cmp(&records[a].time_months));

    let eta: Vec<f64> = records
        .iter()
        .map(|r| r.x.iter().zip(beta).map(|(x, b)| x * b).sum())
        .collect();
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

    let mut nll = 0.0;
    let mut grad = DVector::zeros(p);
    let mut hess = DMatrix::zeros(p, p);
    // Risk-set sums of w, w x and w x x^T (upper triangle).
    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let add_outer = |m: &mut DMatrix<f64>, x: &[f64], wt: f64| {
        for a in 0..p {
            let wa = wt * x[a];
            for b in a..p {
                m[(a, b)] += wa * x[b];
            }
        }
    };

    let mut start = 0;
    while start < order.len() {
        let t = records[order[start]].time_months;
        let mut end = start;
        while end < order.len() && records[order[end]].time_months == t {
            end += 1;
        }
        let group = &order[start..end];
        for &i in group {
            s0 += w[i];
            if derivs {
                s1.axpy(w[i], &DVector::from_column_slice(&records[i].x), 1.0);
                add_outer(&mut s2, &records[i].x, w[i]);
            }
        }
        let dead: Vec<usize> = group.iter().copied().filter(|&i| records[i].event).collect();
        if !dead.is_empty() {
            let d = dead.len() as f64;
            let mut d0 = 0.0;
            let mut d1 = DVector::zeros(p);
            let mut d2 = DMatrix::zeros(p, p);
            for &i in &dead {
                nll -= eta[i];
                d0 += w[i];
                if derivs {
                    let xi = DVector::from_column_slice(&records[i].x);
                    grad -= &xi;
                    d1.axpy(w[i], &xi, 1.0);
                    add_outer(&mut d2, &records[i].x, w[i]);
                }
            }
            for l in 0..dead.len() {
                let frac = l as f64 / d;
                let phi = s0 - frac * d0;
                nll += phi.ln() + shift;
                if derivs {
                    let a = &s1 - &d1 * frac;
                    grad.axpy(1.0 / phi, &a, 1.0);
                    for r in 0..p {
                        for c in r..p {
                            hess[(r, c)] += (s2[(r, c)] - frac * d2[(r, c)]) / phi - a[r] * a[c] / (phi * phi);
                        }
                    }
                }
            }
        }
        start = end;
    }
    for r in 0..p {
        for c in 0..r {
            hess[(r, c)] = hess[(c, r)];
        }
    }
    if !nll.is_finite() {
        return Err(Error::NonFinite("cox partial likelihood".into()));
    }
    Ok(Derivs { nll, grad, hess })
}

/// Negative log partial likelihood with Efron's tie correction.
pub fn cox_nll(beta: &[f64], records: &[SurvivalRecord]) -> Result<f64> {
    Ok(efron(beta, records, false)?.nll)
}

/// Gradient and Hessian of [`cox_nll`].
pub fn cox_grad_hess(beta: &[f64], records: &[SurvivalRecord]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = efron(beta, records, true)?;
    Ok((d.grad, d.hess))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// A fitted Cox model. Coefficients act on covariates after `spec` scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxModel {
    pub beta: Vec<f64>,
    pub converged: bool,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub log_partial_likelihood: f64,
    /// Set when the Hessian needed a ridge to be factorized.
    pub rank_deficient: bool,
    pub spec: CovariateSpec,
}

impl CoxModel {
    /// Log relative hazard `beta . x` for an already scaled covariate row.
    pub fn risk_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() {
            return Err(Error::DimensionMismatch {
                context: "risk_score",
                expected: self.beta.len(),
                actual: x.len(),
            });
        }
        Ok(self.beta.iter().zip(x).map(|(b, v)| b * v).sum())
    }

    /// Risk score for a raw row, applying the model's covariate scaling.
    pub fn risk_score_raw(&self, raw: &[f64]) -> Result<f64> {
        self.risk_score(&self.spec.apply(raw)?)
    }
}

fn solve_newton(hess: &DMatrix<f64>, grad: &DVector<f64>, ridge_used: &mut bool) -> Option<DVector<f64>> {
    let max_diag = hess.diagonal().iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    if let Some(ch) = hess.clone().cholesky() {
        let min_pivot = ch.l_dirty().diagonal().iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
        if min_pivot > 1e-10 * max_diag {
            return Some(ch.solve(grad));
        }
    }
    *ridge_used = true;
    let mut ridge = RIDGE;
    while ridge <= 1.0 {
        let shifted = hess + DMatrix::identity(hess.nrows(), hess.ncols()) * ridge;
        if let Some(ch) = shifted.cholesky() {
            return Some(ch.solve(grad));
        }
        ridge *= 100.0;
    }
    None
}

/// Newton-Raphson from `beta = 0` with step halving. `records` carry
/// covariates already transformed by `spec`.
pub fn fit_cox(records: &[SurvivalRecord], spec: CovariateSpec, opts: FitOptions) -> Result<CoxModel> {
    let p = validate_records(records, Some(spec.len()))?;
    let events = records.iter().filter(|r| r.event).count();
    if events < 2 {
        return Err(Error::Data(format!("Cox fit needs at least 2 events, found {events}")));
    }
    for j in 0..p {
        let first = records[0].x[j];
        if records.iter().all(|r| r.x[j] == first) {
            return Err(Error::ConstantCovariate(spec.names[j].clone()));
        }
    }

    let mut beta = vec![0.0; p];
    let mut cur = efron(&beta, records, true)?;
    let mut rank_deficient = false;
    let mut iterations = 0;
    let mut converged = cur.grad.norm() < opts.tol;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let Some(step) = solve_newton(&cur.hess, &cur.grad, &mut rank_deficient) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = None;
        // Near the optimum the NLL change drops below its rounding error.
        let slack = 1e-12 * cur.nll.abs().max(1.0);
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b - t * s).collect();
            if let Ok(nll) = cox_nll(&trial, records) {
                if nll <= cur.nll + slack {
                    accepted = Some(trial);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            break;
        };
        if let Some(j) = next.iter().position(|b| b.abs() > SEPARATION_LIMIT) {
            return Err(Error::Separation {
                covariate: spec.names[j].clone(),
                value: next[j],
            });
        }
        beta = next;
        cur = efron(&beta, records, true)?;
        converged = cur.grad.norm() < opts.tol;
    }

    Ok(CoxModel {
        beta,
        converged,
        gradient_norm: cur.grad.norm(),
        iterations,
        log_partial_likelihood: -cur.nll,
        rank_deficient,
        spec,
    })
}

const COX_MAGIC: &str = "mci-prognosis-cox 1";

/// Text table of covariates, coefficients, scaling and fit diagnostics.
pub fn write_cox_model<W: Write>(model: &CoxModel, mut out: W) -> Result<()> {
    let io = |e| Error::io("<cox model>", e);
    writeln!(out, "{COX_MAGIC}").map_err(io)?;
    writeln!(out, "converged {}", model.converged).map_err(io)?;
    writeln!(out, "iterations {}", model.iterations).map_err(io)?;
    writeln!(out, "gradient_norm {:e}", model.gradient_norm).map_err(io)?;
    writeln!(out, "log_partial_likelihood {:e}", model.log_partial_likelihood).map_err(io)?;
    writeln!(out, "rank_deficient {}", model.rank_deficient).map_err(io)?;
    writeln!(out, "covariate coefficient center scale").map_err(io)?;
    for ((name, b), s) in model.spec.names.iter().zip(&model.beta).zip(&model.spec.scaling) {
        let (center, scale) = match s {
            Scaling::Identity => ("-".to_string(), "-".to_string()),
            Scaling::Standardize { center, scale } => (format!("{center:e}"), format!("{scale:e}")),
        };
        writeln!(out, "{name} {b:e} {center} {scale}").map_err(io)?;
    }
    Ok(())
}

pub fn read_cox_model<R: BufRead>(input: R) -> Result<CoxModel> {
    let lines: Vec<String> = input
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io("<cox model>", e))?;
    let err = |line: usize, msg: &str| Error::ModelFormat {
        line: line + 1,
        msg: msg.to_string(),
    };
    if lines.first().map(String::as_str) != Some(COX_MAGIC) {
        return Err(err(0, "bad header"));
    }
    let field = |k: usize, key: &str| -> Result<&str> {
        lines
            .get(k)
            .and_then(|l| l.strip_prefix(key))
            .and_then(|v| v.strip_prefix(' '))
            .ok_or_else(|| err(k, &format!("expected `{key}`")))
    };
    let parse_f = |k: usize, v: &str| v.parse::<f64>().map_err(|_| err(k, "bad number"));
    let parse_b = |k: usize, v: &str| v.parse::<bool>().map_err(|_| err(k, "bad boolean"));
    let converged = parse_b(1, field(1, "converged")?)?;
    let iterations = field(2, "iterations")?.parse().map_err(|_| err(2, "bad count"))?;
    let gradient_norm = parse_f(3, field(3, "gradient_norm")?)?;
    let log_partial_likelihood = parse_f(4, field(4, "log_partial_likelihood")?)?;
    let rank_deficient = parse_b(5, field(5, "rank_deficient")?)?;
    if lines.get(6).map(String::as_str) != Some("covariate coefficient center scale") {
        return Err(err(6, "missing coefficient table header"));
    }
    let (mut names, mut beta, mut scaling) = (Vec::new(), Vec::new(), Vec::new());
    for (k, line) in lines.iter().enumerate().skip(7) {
        let cols: Vec<&str> = line.split(' ').collect();
        if cols.len() != 4 {
            return Err(err(k, "expected 4 columns"));
        }
        names.push(cols[0].to_string());
        beta.push(parse_f(k, cols[1])?);
        scaling.push(match (cols[2], cols[3]) {
            ("-", "-") => Scaling::Identity,
            (c, s) => Scaling::Standardize {
                center: parse_f(k, c)?,
                scale: parse_f(k, s)?,
            },
        });
    }
    Ok(CoxModel {
        beta,
        converged,
        gradient_norm,
        iterations,
        log_partial_likelihood,
        rank_deficient,
        spec: CovariateSpec { names, scaling },
    })
}
