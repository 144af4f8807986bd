use super::{check_congruent, ParamSet};
use crate::{Error, Result};

/// `base_lr * factor^floor(iter / every)`.
pub fn step_decay(base_lr: f64, iter: usize, every: usize, factor: f64) -> f64 {
    let drops = (iter / every.max(1)) as i32;
    base_lr * factor.powi(drops)
}

/// Learning rate with a tenfold drop every 20000 iterations.
pub fn lr_schedule(base_lr: f64, iter: usize) -> f64 {
    step_decay(base_lr, iter, 20_000, 0.1)
}

/// First/second moment accumulators for Adam, congruent to a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new<P: ParamSet>(params: &P) -> Self {
        Self::with_hyper(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper<P: ParamSet>(params: &P, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// One bias-corrected Adam step applied in place. Parameters are left
    /// untouched when the gradient is rejected.
    pub fn update<P: ParamSet>(&mut self, params: &mut P, grads: &P, lr: f64) -> Result<()> {
        check_congruent(params, grads, "adam_update")?;
        if self.m.len() != grads.tensors().len()
            || self.m.iter().zip(grads.tensors()).any(|(m, g)| m.len() != g.len())
        {
            return Err(Error::DimensionMismatch {
                context: "adam state",
                expected: grads.num_params(),
                actual: self.m.iter().map(Vec::len).sum(),
            });
        }
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
        }
        if !grads.all_finite() {
            return Err(Error::NonFinite("adam gradient".into()));
        }

        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct Scalar(Vec<f64>);

    impl ParamSet for Scalar {
        fn tensors(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn schedule_values() {
        assert_eq!(lr_schedule(0.01, 0), 0.01);
        assert_eq!(lr_schedule(0.01, 19_999), 0.01);
        assert!((lr_schedule(0.01, 20_000) - 0.001).abs() < 1e-15);
        assert!((lr_schedule(0.01, 40_000) - 0.0001).abs() < 1e-16);
    }

    #[test]
    fn schedule_is_non_increasing() {
        let mut prev = f64::INFINITY;
        for it in (0..200_000).step_by(997) {
            let lr = lr_schedule(0.01, it);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        let mut p = Scalar(vec![1.0, -2.0, 0.5]);
        let g = Scalar(vec![3.0, -0.2, 1e-3]);
        let mut st = AdamState::new(&p);
        st.update(&mut p, &g, 0.01).unwrap();
        assert!((p.0[0] - (1.0 - 0.01)).abs() < 1e-9);
        assert!((p.0[1] - (-2.0 + 0.01)).abs() < 1e-9);
        assert!((p.0[2] - (0.5 - 0.01)).abs() < 1e-7);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = Scalar(vec![0.3, -0.7]);
        let g = Scalar(vec![0.0, 0.0]);
        let mut st = AdamState::new(&p);
        for _ in 0..10 {
            st.update(&mut p, &g, 0.01).unwrap();
        }
        assert_eq!(p.0, vec![0.3, -0.7]);
        assert!(st.v.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(st.t, 10);
    }

    #[test]
    fn quadratic_descent() {
        // f(w) = w^2, gradient 2w
        let mut p = Scalar(vec![1.0]);
        let mut st = AdamState::new(&p);
        let mut trace = vec![p.0[0].abs()];
        for _ in 0..200 {
            let g = Scalar(vec![2.0 * p.0[0]]);
            st.update(&mut p, &g, 0.01).unwrap();
            trace.push(p.0[0].abs());
        }
        assert!(p.0[0].abs() < 0.5);
        let windows: Vec<f64> = trace[1..]
            .chunks(50)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        assert!(windows.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_gradients() {
        let mut p = Scalar(vec![1.0]);
        let mut st = AdamState::new(&p);
        assert!(matches!(
            st.update(&mut p, &Scalar(vec![f64::NAN]), 0.01),
            Err(Error::NonFinite(_))
        ));
        assert!(st.update(&mut p, &Scalar(vec![1.0, 2.0]), 0.01).is_err());
        assert!(st.update(&mut p, &Scalar(vec![1.0]), 0.0).is_err());
        assert_eq!(p.0, vec![1.0]);
        assert_eq!(st.t, 0);
    }
}
