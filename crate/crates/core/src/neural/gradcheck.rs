use super::{check_congruent, ParamSet};
use crate::{Error, Result};

/// Largest relative disagreement between `analytic` and a central-difference
/// gradient of `loss` at `params`:
/// `max_k |a_k - fd_k| / max(|a_k|, |fd_k|, 1e-6)`. Components smaller than the floor are
/// compared absolutely, since roundoff dominates their difference quotient.
///
/// `fd_k` uses the five-point central stencil with step `fd_step`, whose
/// truncation error is `O(fd_step^4)`; 1e-3 is a good step for smooth losses
/// of order one.
pub fn grad_check<P, F>(loss: F, params: &P, analytic: &P, fd_step: f64) -> Result<f64>
where
    P: ParamSet + Clone,
    F: Fn(&P) -> Result<f64>,
{
    check_congruent(params, analytic, "grad_check")?;
    if !(fd_step > 0.0) {
        return Err(Error::InvalidArgument(format!("fd_step must be positive, got {fd_step}")));
    }
    let base = params.flatten();
    let grad = analytic.flatten();
    let mut probe = params.clone();
    let mut eval = |flat: &[f64]| -> Result<f64> {
        probe.assign_flat(flat)?;
        let v = loss(&probe)?;
        if !v.is_finite() {
            return Err(Error::NonFinite("grad_check loss".into()));
        }
        Ok(v)
    };

    let mut worst = 0.0f64;
    let mut flat = base.clone();
    for k in 0..base.len() {
        let mut at = |offset: f64| {
            flat[k] = base[k] + offset;
            eval(&flat)
        };
        let (up2, up1, down1, down2) = (at(2.0 * fd_step)?, at(fd_step)?, at(-fd_step)?, at(-2.0 * fd_step)?);
        flat[k] = base[k];
        let fd = (8.0 * (up1 - down1) - (up2 - down2)) / (12.0 * fd_step);
        let err = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-6);
        worst = worst.max(err);
    }
    Ok(worst)
}
