use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::ParamSet;
use crate::{Error, Result};

/// Logistic function, branched so `exp` never overflows.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Hidden and cell state of one LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: DVector<f64>,
    pub c: DVector<f64>,
}

impl CellState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: DVector::zeros(hidden_dim),
            c: DVector::zeros(hidden_dim),
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Parameters of one LSTM layer. Every gate matrix acts on the concatenation
/// `[h_prev, x]`, so its shape is `hidden_dim x (hidden_dim + input_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub w_f: DMatrix<f64>,
    pub w_i: DMatrix<f64>,
    pub w_c: DMatrix<f64>,
    pub w_o: DMatrix<f64>,
    pub b_f: DVector<f64>,
    pub b_i: DVector<f64>,
    pub b_c: DVector<f64>,
    pub b_o: DVector<f64>,
}

/// Intermediate values of one forward step, enough for exact backprop.
#[derive(Debug, Clone)]
pub struct StepCache {
    /// `[h_prev, x]`
    pub input: DVector<f64>,
    pub c_prev: DVector<f64>,
    pub f: DVector<f64>,
    pub i: DVector<f64>,
    pub g: DVector<f64>,
    pub o: DVector<f64>,
    pub c: DVector<f64>,
    pub tanh_c: DVector<f64>,
    pub h: DVector<f64>,
}

impl StepCache {
    pub fn state(&self) -> CellState {
        CellState {
            h: self.h.clone(),
            c: self.c.clone(),
        }
    }
}

impl LstmLayerParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let cols = input_dim + hidden_dim;
        Self {
            w_f: DMatrix::zeros(hidden_dim, cols),
            w_i: DMatrix::zeros(hidden_dim, cols),
            w_c: DMatrix::zeros(hidden_dim, cols),
            w_o: DMatrix::zeros(hidden_dim, cols),
            b_f: DVector::zeros(hidden_dim),
            b_i: DVector::zeros(hidden_dim),
            b_c: DVector::zeros(hidden_dim),
            b_o: DVector::zeros(hidden_dim),
        }
    }

    /// Uniform(-r, r) weights with r = 1/sqrt(input_dim + hidden_dim),
    /// forget bias 1, remaining biases 0.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let cols = input_dim + hidden_dim;
        let r = 1.0 / (cols as f64).sqrt();
        let mut draw = || DMatrix::from_fn(hidden_dim, cols, |_, _| rng.random_range(-r..r));
        let (w_f, w_i, w_c, w_o) = (draw(), draw(), draw(), draw());
        Self {
            w_f,
            w_i,
            w_c,
            w_o,
            b_f: DVector::from_element(hidden_dim, 1.0),
            b_i: DVector::zeros(hidden_dim),
            b_c: DVector::zeros(hidden_dim),
            b_o: DVector::zeros(hidden_dim),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_f.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_f.ncols() - self.hidden_dim()
    }

    /// Checks that all four gates share one shape.
    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = self.w_f.shape();
        if cols < rows || rows == 0 {
            return Err(Error::InvalidArgument(format!(
                "gate matrix shape {rows}x{cols} cannot hold [h, x]"
            )));
        }
        for w in [&self.w_i, &self.w_c, &self.w_o] {
            if w.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch {
                    context: "lstm gate weights",
                    expected: rows * cols,
                    actual: w.len(),
                });
            }
        }
        for b in [&self.b_f, &self.b_i, &self.b_c, &self.b_o] {
            if b.len() != rows {
                return Err(Error::DimensionMismatch {
                    context: "lstm gate bias",
                    expected: rows,
                    actual: b.len(),
                });
            }
        }
        Ok(())
    }

    fn check_inputs(&self, x: &DVector<f64>, prev: &CellState) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "lstm_step input",
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        for v in [&prev.h, &prev.c] {
            if v.len() != self.hidden_dim() {
                return Err(Error::DimensionMismatch {
                    context: "lstm_step state",
                    expected: self.hidden_dim(),
                    actual: v.len(),
                });
            }
        }
        Ok(())
    }

    /// One LSTM time step.
    pub fn step(&self, x: &DVector<f64>, prev: &CellState) -> Result<CellState> {
        Ok(self.step_cached(x, prev)?.state())
    }

    pub fn step_cached(&self, x: &DVector<f64>, prev: &CellState) -> Result<StepCache> {
        self.check_inputs(x, prev)?;
        let hd = self.hidden_dim();
        let mut input = DVector::zeros(hd + x.len());
        input.rows_mut(0, hd).copy_from(&prev.h);
        input.rows_mut(hd, x.len()).copy_from(x);

        let f = (&self.w_f * &input + &self.b_f).map(sigmoid);
        let i = (&self.w_i * &input + &self.b_i).map(sigmoid);
        let g = (&self.w_c * &input + &self.b_c).map(f64::tanh);
        let o = (&self.w_o * &input + &self.b_o).map(sigmoid);
        let c = f.component_mul(&prev.c) + i.component_mul(&g);
        let tanh_c = c.map(f64::tanh);
        let h = o.component_mul(&tanh_c);
        if !h.iter().chain(c.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("lstm_step output".into()));
        }
        Ok(StepCache {
            input,
            c_prev: prev.c.clone(),
            f,
            i,
            g,
            o,
            c,
            tanh_c,
            h,
        })
    }

    /// Backpropagates one step. `dh` and `dc` are the total gradients on the
    /// step's outputs; gradients accumulate into `grad`. Returns
    /// `(dx, dh_prev, dc_prev)`.
    pub fn step_backward(
        &self,
        cache: &StepCache,
        dh: &DVector<f64>,
        dc: &DVector<f64>,
        grad: &mut LstmLayerParams,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let hd = self.hidden_dim();
        let d_o = dh.component_mul(&cache.tanh_c);
        let dc_total = dc + dh.component_mul(&cache.o).component_mul(&cache.tanh_c.map(|t| 1.0 - t * t));

        let dz_f = dc_total
            .component_mul(&cache.c_prev)
            .component_mul(&cache.f.map(|s| s * (1.0 - s)));
        let dz_i = dc_total
            .component_mul(&cache.g)
            .component_mul(&cache.i.map(|s| s * (1.0 - s)));
        let dz_g = dc_total
            .component_mul(&cache.i)
            .component_mul(&cache.g.map(|t| 1.0 - t * t));
        let dz_o = d_o.component_mul(&cache.o.map(|s| s * (1.0 - s)));
        let dc_prev = dc_total.component_mul(&cache.f);

        let mut d_input = DVector::zeros(cache.input.len());
        for (w, gw, gb, dz) in [
            (&self.w_f, &mut grad.w_f, &mut grad.b_f, &dz_f),
            (&self.w_i, &mut grad.w_i, &mut grad.b_i, &dz_i),
            (&self.w_c, &mut grad.w_c, &mut grad.b_c, &dz_g),
            (&self.w_o, &mut grad.w_o, &mut grad.b_o, &dz_o),
        ] {
            gw.ger(1.0, dz, &cache.input, 1.0);
            *gb += dz;
            d_input.gemv_tr(1.0, w, dz, 1.0);
        }
        let dh_prev = d_input.rows(0, hd).into_owned();
        let dx = d_input.rows(hd, d_input.len() - hd).into_owned();
        (dx, dh_prev, dc_prev)
    }
}

impl ParamSet for LstmLayerParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w_f.as_slice(),
            self.w_i.as_slice(),
            self.w_c.as_slice(),
            self.w_o.as_slice(),
            self.b_f.as_slice(),
            self.b_i.as_slice(),
            self.b_c.as_slice(),
            self.b_o.as_slice(),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_f.as_mut_slice(),
            self.w_i.as_mut_slice(),
            self.w_c.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.b_f.as_mut_slice(),
            self.b_i.as_mut_slice(),
            self.b_c.as_mut_slice(),
            self.b_o.as_mut_slice(),
        ]
    }
}

/// A multi-layer LSTM; layer `k + 1` consumes the hidden state of layer `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack {
    layers: Vec<LstmLayerParams>,
}

/// Everything cached by [`LstmStack::forward_sequence`], indexed `[t][layer]`.
#[derive(Debug, Clone)]
pub struct SequenceTrace {
    steps: Vec<Vec<StepCache>>,
}

impl SequenceTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn num_layers(&self) -> usize {
        self.steps.first().map_or(0, Vec::len)
    }

    pub fn step(&self, t: usize) -> &[StepCache] {
        &self.steps[t]
    }

    pub fn hidden(&self, layer: usize, t: usize) -> &DVector<f64> {
        &self.steps[t][layer].h
    }

    /// Hidden states of every layer at every step, `[layer][t]`.
    pub fn hidden_states(&self) -> Vec<Vec<DVector<f64>>> {
        (0..self.num_layers())
            .map(|l| self.steps.iter().map(|s| s[l].h.clone()).collect())
            .collect()
    }

    pub fn final_states(&self) -> Vec<CellState> {
        self.steps.last().map_or_else(Vec::new, |s| s.iter().map(StepCache::state).collect())
    }
}

/// Result of [`LstmStack::backward_sequence`].
#[derive(Debug, Clone)]
pub struct StackGradients {
    pub params: LstmStack,
    pub d_inputs: Vec<DVector<f64>>,
    pub d_init: Vec<CellState>,
}

impl LstmStack {
    pub fn new(layers: Vec<LstmLayerParams>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("an LSTM stack needs at least one layer".into()));
        }
        for l in &layers {
            l.validate()?;
        }
        for pair in layers.windows(2) {
            if pair[1].input_dim() != pair[0].hidden_dim() {
                return Err(Error::DimensionMismatch {
                    context: "lstm stack chaining",
                    expected: pair[0].hidden_dim(),
                    actual: pair[1].input_dim(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, num_layers: usize, rng: &mut R) -> Self {
        let layers = (0..num_layers)
            .map(|k| LstmLayerParams::init(if k == 0 { input_dim } else { hidden_dim }, hidden_dim, rng))
            .collect();
        Self { layers }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, num_layers: usize) -> Self {
        let layers = (0..num_layers)
            .map(|k| LstmLayerParams::zeros(if k == 0 { input_dim } else { hidden_dim }, hidden_dim))
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| LstmLayerParams::zeros(l.input_dim(), l.hidden_dim()))
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[LstmLayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LstmLayerParams] {
        &mut self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].hidden_dim()
    }

    pub fn zero_states(&self) -> Vec<CellState> {
        self.layers.iter().map(|l| CellState::zeros(l.hidden_dim())).collect()
    }

    /// Advances every layer by one time step.
    pub fn step_cached(&self, x: &DVector<f64>, states: &[CellState]) -> Result<Vec<StepCache>> {
        if states.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                context: "lstm stack states",
                expected: self.layers.len(),
                actual: states.len(),
            });
        }
        let mut caches: Vec<StepCache> = Vec::with_capacity(self.layers.len());
        for (k, (layer, state)) in self.layers.iter().zip(states).enumerate() {
            let input = if k == 0 { x } else { &caches[k - 1].h };
            let cache = layer.step_cached(input, state)?;
            caches.push(cache);
        }
        Ok(caches)
    }

    pub fn forward_sequence(&self, seq: &[DVector<f64>], init: &[CellState]) -> Result<SequenceTrace> {
        if seq.is_empty() {
            return Err(Error::EmptySequence("forward_sequence"));
        }
        let mut steps = Vec::with_capacity(seq.len());
        let mut states = init.to_vec();
        for x in seq {
            let caches = self.step_cached(x, &states)?;
            states = caches.iter().map(StepCache::state).collect();
            steps.push(caches);
        }
        Ok(SequenceTrace { steps })
    }

    /// Backpropagates one stacked time step. On entry `dh[l]`/`dc[l]` hold the
    /// gradient on layer `l`'s outputs at this step; on exit they hold the
    /// gradient on the previous step's states. Returns the gradient on `x`.
    pub fn step_backward(
        &self,
        caches: &[StepCache],
        dh: &mut [DVector<f64>],
        dc: &mut [DVector<f64>],
        grads: &mut LstmStack,
    ) -> DVector<f64> {
        let mut k = self.layers.len();
        loop {
            k -= 1;
            let (dx, dh_prev, dc_prev) =
                self.layers[k].step_backward(&caches[k], &dh[k], &dc[k], &mut grads.layers[k]);
            dh[k] = dh_prev;
            dc[k] = dc_prev;
            if k == 0 {
                return dx;
            }
            dh[k - 1] += dx;
        }
    }

    /// Exact gradient through an unrolled sequence.
    ///
    /// `d_hidden[layer][t]` is the loss gradient on each emitted hidden state
    /// and `d_final` the gradient on the final `(h, c)` of every layer; both
    /// are optional and add together.
    pub fn backward_sequence(
        &self,
        trace: &SequenceTrace,
        d_hidden: Option<&[Vec<DVector<f64>>]>,
        d_final: Option<&[CellState]>,
    ) -> Result<StackGradients> {
        if trace.num_layers() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                context: "backward_sequence trace layers",
                expected: self.layers.len(),
                actual: trace.num_layers(),
            });
        }
        for (layer, cache) in self.layers.iter().zip(trace.step(0)) {
            if cache.input.len() != layer.w_f.ncols() {
                return Err(Error::DimensionMismatch {
                    context: "backward_sequence trace width",
                    expected: layer.w_f.ncols(),
                    actual: cache.input.len(),
                });
            }
        }
        if let Some(dh) = d_hidden {
            if dh.len() != self.layers.len() || dh.iter().any(|l| l.len() != trace.len()) {
                return Err(Error::DimensionMismatch {
                    context: "backward_sequence d_hidden",
                    expected: self.layers.len() * trace.len(),
                    actual: dh.iter().map(Vec::len).sum(),
                });
            }
        }
        let mut dh: Vec<DVector<f64>> = self.layers.iter().map(|l| DVector::zeros(l.hidden_dim())).collect();
        let mut dc = dh.clone();
        if let Some(fin) = d_final {
            if fin.len() != self.layers.len() {
                return Err(Error::DimensionMismatch {
                    context: "backward_sequence d_final",
                    expected: self.layers.len(),
                    actual: fin.len(),
                });
            }
            for (k, s) in fin.iter().enumerate() {
                dh[k] += &s.h;
                dc[k] += &s.c;
            }
        }

        let mut grads = self.zeros_like();
        let mut d_inputs = vec![DVector::zeros(0); trace.len()];
        for t in (0..trace.len()).rev() {
            if let Some(ext) = d_hidden {
                for (k, per_layer) in ext.iter().enumerate() {
                    dh[k] += &per_layer[t];
                }
            }
            d_inputs[t] = self.step_backward(trace.step(t), &mut dh, &mut dc, &mut grads);
        }
        let d_init = dh.into_iter().zip(dc).map(|(h, c)| CellState { h, c }).collect();
        Ok(StackGradients {
            params: grads,
            d_inputs,
            d_init,
        })
    }
}

impl ParamSet for LstmStack {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn zero_params_give_zero_state() {
        let p = LstmLayerParams::zeros(3, 4);
        let s = p.step(&DVector::from_vec(vec![1.0, -2.0, 0.5]), &CellState::zeros(4)).unwrap();
        assert!(s.h.iter().all(|&v| v == 0.0));
        assert!(s.c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_gates() {
        let mut p = LstmLayerParams::zeros(1, 1);
        p.b_f[0] = -20.0;
        p.b_i[0] = 20.0;
        p.b_o[0] = 20.0;
        p.b_c[0] = 0.5f64.atanh();
        let s = p.step(&DVector::from_vec(vec![0.3]), &CellState::zeros(1)).unwrap();
        assert!((s.c[0] - 0.5).abs() < 1e-6);
        assert!((s.h[0] - 0.5f64.tanh()).abs() < 1e-6);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0).is_finite());
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn shape_errors() {
        let p = LstmLayerParams::zeros(2, 3);
        assert!(matches!(
            p.step(&DVector::zeros(3), &CellState::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            p.step(&DVector::zeros(2), &CellState::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        let stack = LstmStack::zeros(2, 3, 2);
        assert!(matches!(
            stack.forward_sequence(&[], &stack.zero_states()),
            Err(Error::EmptySequence(_))
        ));
        let bad = LstmStack::new(vec![LstmLayerParams::zeros(2, 3), LstmLayerParams::zeros(4, 3)]);
        assert!(bad.is_err());
        assert!(LstmStack::new(vec![]).is_err());
    }

    #[test]
    fn single_step_sequence_matches_step() {
        let stack = LstmStack::init(2, 3, 2, &mut rng_from(42));
        let x = DVector::from_vec(vec![0.4, -0.7]);
        let trace = stack.forward_sequence(std::slice::from_ref(&x), &stack.zero_states()).unwrap();
        let s0 = stack.layers()[0].step(&x, &CellState::zeros(3)).unwrap();
        let s1 = stack.layers()[1].step(&s0.h, &CellState::zeros(3)).unwrap();
        assert_eq!(trace.final_states(), vec![s0, s1]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let stack = LstmStack::init(2, 3, 2, &mut rng_from(1));
        let seq = vec![DVector::from_vec(vec![0.1, 0.2]); 3];
        let trace = stack.forward_sequence(&seq, &stack.zero_states()).unwrap();
        let g = stack.backward_sequence(&trace, None, None).unwrap();
        assert!(g.params.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_trace_rejected() {
        let a = LstmStack::init(2, 3, 2, &mut rng_from(1));
        let b = LstmStack::init(2, 3, 1, &mut rng_from(1));
        let trace = a.forward_sequence(&[DVector::zeros(2)], &a.zero_states()).unwrap();
        assert!(b.backward_sequence(&trace, None, None).is_err());
    }

    #[test]
    fn init_biases() {
        let l = LstmLayerParams::init(5, 5, &mut rng_from(3));
        assert!(l.b_f.iter().all(|&b| b == 1.0));
        assert!(l.b_i.iter().chain(l.b_c.iter()).chain(l.b_o.iter()).all(|&b| b == 0.0));
        let r = 1.0 / 10f64.sqrt();
        assert!(l.w_c.iter().all(|w| w.abs() < r));
    }
}
