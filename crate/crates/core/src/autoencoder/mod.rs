//! Sequence-to-sequence LSTM autoencoder for short longitudinal trajectories.
//!
//! A two-layer encoder consumes the visits in time order; the final hidden
//! state of its top layer is the latent vector. A two-layer decoder starts
//! from that vector and emits reconstructions in reverse time order through
//! an affine output projection.

mod features;
mod io;
mod train;

pub use features::{extract_features, FeatureSet, LatentFeatures};
pub use io::{read_model, write_loss_history, write_model};
pub use train::{train, LossRecord, TrainConfig};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::neural::{CellState, LstmStack, ParamSet, StepCache};
use crate::rng::rng_from;
use crate::{Error, Result};

/// Layers in each of the encoder and decoder.
pub const NUM_LAYERS: usize = 2;

/// What the decoder consumes at steps after the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Conditioning {
    /// Its own previous reconstruction.
    #[default]
    Unconditioned,
    /// The previous ground-truth target during training.
    Conditioned,
}

impl fmt::Display for Conditioning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Conditioning::Unconditioned => "unconditioned",
            Conditioning::Conditioned => "conditioned",
        })
    }
}

impl FromStr for Conditioning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unconditioned" => Ok(Conditioning::Unconditioned),
            "conditioned" => Ok(Conditioning::Conditioned),
            other => Err(Error::InvalidArgument(format!("unknown decoder conditioning `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub encoder: LstmStack,
    pub decoder: LstmStack,
    /// `input_dim x hidden_dim`, maps the decoder's top hidden state to a
    /// reconstructed measure vector.
    pub projection: DMatrix<f64>,
    pub projection_bias: DVector<f64>,
    pub seed: u64,
    pub conditioning: Conditioning,
}

impl AutoencoderModel {
    /// Assembles a model, checking layer counts and dimension agreement.
    pub fn new(
        encoder: LstmStack,
        decoder: LstmStack,
        projection: DMatrix<f64>,
        projection_bias: DVector<f64>,
        seed: u64,
        conditioning: Conditioning,
    ) -> Result<Self> {
        if encoder.num_layers() != NUM_LAYERS || decoder.num_layers() != NUM_LAYERS {
            return Err(Error::InvalidArgument(format!(
                "encoder and decoder need {NUM_LAYERS} layers each"
            )));
        }
        let (input_dim, hidden_dim) = (encoder.input_dim(), encoder.hidden_dim());
        let mismatch = |context, expected, actual| Error::DimensionMismatch {
            context,
            expected,
            actual,
        };
        if decoder.input_dim() != input_dim {
            return Err(mismatch("decoder input", input_dim, decoder.input_dim()));
        }
        if decoder.layers().iter().any(|l| l.hidden_dim() != hidden_dim) {
            return Err(mismatch("decoder hidden", hidden_dim, decoder.layers()[0].hidden_dim()));
        }
        if projection.shape() != (input_dim, hidden_dim) {
            return Err(mismatch("projection", input_dim * hidden_dim, projection.len()));
        }
        if projection_bias.len() != input_dim {
            return Err(mismatch("projection bias", input_dim, projection_bias.len()));
        }
        Ok(Self {
            encoder,
            decoder,
            projection,
            projection_bias,
            seed,
            conditioning,
        })
    }

    /// Randomly initialized model; identical `(dims, seed)` give identical bits.
    pub fn init(input_dim: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::InvalidArgument("autoencoder dimensions must be positive".into()));
        }
        let mut rng = rng_from(seed);
        let encoder = LstmStack::init(input_dim, hidden_dim, NUM_LAYERS, &mut rng);
        let decoder = LstmStack::init(input_dim, hidden_dim, NUM_LAYERS, &mut rng);
        let r = 1.0 / (hidden_dim as f64).sqrt();
        let projection = DMatrix::from_fn(input_dim, hidden_dim, |_, _| rng.random_range(-r..r));
        Self::new(
            encoder,
            decoder,
            projection,
            DVector::zeros(input_dim),
            seed,
            Conditioning::default(),
        )
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            encoder: LstmStack::zeros(input_dim, hidden_dim, NUM_LAYERS),
            decoder: LstmStack::zeros(input_dim, hidden_dim, NUM_LAYERS),
            projection: DMatrix::zeros(input_dim, hidden_dim),
            projection_bias: DVector::zeros(input_dim),
            seed: 0,
            conditioning: Conditioning::default(),
        }
    }

    pub fn with_conditioning(mut self, conditioning: Conditioning) -> Self {
        self.conditioning = conditioning;
        self
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(self.input_dim(), self.hidden_dim());
        z.seed = self.seed;
        z.conditioning = self.conditioning;
        z
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Also the latent dimension.
    pub fn hidden_dim(&self) -> usize {
        self.encoder.hidden_dim()
    }

    fn check_sequence(&self, seq: &[DVector<f64>], op: &'static str) -> Result<()> {
        if seq.is_empty() {
            return Err(Error::EmptySequence(op));
        }
        for x in seq {
            if x.len() != self.input_dim() {
                return Err(Error::DimensionMismatch {
                    context: op,
                    expected: self.input_dim(),
                    actual: x.len(),
                });
            }
        }
        Ok(())
    }

    /// Final top-layer encoder hidden state after the whole sequence.
    pub fn encode(&self, seq: &[DVector<f64>]) -> Result<DVector<f64>> {
        self.check_sequence(seq, "encode")?;
        let mut states = self.encoder.zero_states();
        for x in seq {
            let caches = self.encoder.step_cached(x, &states)?;
            states = caches.iter().map(StepCache::state).collect();
        }
        Ok(states.pop().expect("encoder has layers").h)
    }

    fn decoder_init(&self, z: &DVector<f64>) -> Vec<CellState> {
        (0..self.decoder.num_layers())
            .map(|_| CellState {
                h: z.clone(),
                c: DVector::zeros(z.len()),
            })
            .collect()
    }

    /// Runs the decoder for `len` steps. Output `k` reconstructs input time
    /// point `len - 1 - k`. With `teacher`, step `k > 0` consumes
    /// `teacher[k - 1]` instead of the previous reconstruction.
    fn decoder_forward(
        &self,
        z: &DVector<f64>,
        len: usize,
        teacher: Option<&[&DVector<f64>]>,
    ) -> Result<(Vec<DVector<f64>>, Vec<Vec<StepCache>>)> {
        if len == 0 {
            return Err(Error::InvalidArgument("decode length must be at least 1".into()));
        }
        if z.len() != self.hidden_dim() {
            return Err(Error::DimensionMismatch {
                context: "decode latent",
                expected: self.hidden_dim(),
                actual: z.len(),
            });
        }
        let mut states = self.decoder_init(z);
        let mut x = DVector::zeros(self.input_dim());
        let mut outputs = Vec::with_capacity(len);
        let mut caches = Vec::with_capacity(len);
        for k in 0..len {
            let step = self.decoder.step_cached(&x, &states)?;
            states = step.iter().map(StepCache::state).collect();
            let y = &self.projection * &step[step.len() - 1].h + &self.projection_bias;
            x = match teacher {
                Some(t) if k + 1 < len => t[k].clone(),
                _ => y.clone(),
            };
            outputs.push(y);
            caches.push(step);
        }
        Ok((outputs, caches))
    }

    /// Reconstructs `len` measure vectors from a latent vector, newest first.
    pub fn decode(&self, z: &DVector<f64>, len: usize) -> Result<Vec<DVector<f64>>> {
        Ok(self.decoder_forward(z, len, None)?.0)
    }

    fn subject_loss(&self, seq: &[DVector<f64>]) -> Result<f64> {
        let z = self.encode(seq)?;
        let targets: Vec<&DVector<f64>> = seq.iter().rev().collect();
        let teacher = (self.conditioning == Conditioning::Conditioned).then_some(targets.as_slice());
        let (outputs, _) = self.decoder_forward(&z, seq.len(), teacher)?;
        Ok(outputs
            .iter()
            .zip(&targets)
            .map(|(y, t)| (y - *t).norm_squared())
            .sum())
    }

    /// Mean over subjects of the summed squared Euclidean reconstruction
    /// error, targets aligned in reverse time order.
    pub fn reconstruction_loss(&self, batch: &[Vec<DVector<f64>>]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut total = 0.0;
        for seq in batch {
            total += self.subject_loss(seq)?;
        }
        Ok(total / batch.len() as f64)
    }

    /// Reconstruction loss together with its exact gradient.
    pub fn loss_and_grad(&self, batch: &[Vec<DVector<f64>>]) -> Result<(f64, AutoencoderModel)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut grad = self.zeros_like();
        let mut total = 0.0;
        for seq in batch {
            total += self.accumulate_subject(seq, scale, &mut grad)?;
        }
        Ok((total * scale, grad))
    }

    fn accumulate_subject(&self, seq: &[DVector<f64>], scale: f64, grad: &mut AutoencoderModel) -> Result<f64> {
        self.check_sequence(seq, "reconstruction_loss")?;
        let enc = self.encoder.forward_sequence(seq, &self.encoder.zero_states())?;
        let top = self.encoder.num_layers() - 1;
        let z = enc.hidden(top, seq.len() - 1).clone();

        let targets: Vec<&DVector<f64>> = seq.iter().rev().collect();
        let conditioned = self.conditioning == Conditioning::Conditioned;
        let teacher = conditioned.then_some(targets.as_slice());
        let (outputs, caches) = self.decoder_forward(&z, seq.len(), teacher)?;

        let mut loss = 0.0;
        let hd = self.hidden_dim();
        let mut dh: Vec<DVector<f64>> = vec![DVector::zeros(hd); self.decoder.num_layers()];
        let mut dc = dh.clone();
        let mut carry = DVector::zeros(self.input_dim());
        for k in (0..outputs.len()).rev() {
            let resid = &outputs[k] - targets[k];
            loss += resid.norm_squared();
            let dy = resid * (2.0 * scale) + &carry;
            let h_top = &caches[k][caches[k].len() - 1].h;
            grad.projection.ger(1.0, &dy, h_top, 1.0);
            grad.projection_bias += &dy;
            let dec_top = dh.len() - 1;
            dh[dec_top].gemv_tr(1.0, &self.projection, &dy, 1.0);
            let dx = self.decoder.step_backward(&caches[k], &mut dh, &mut dc, &mut grad.decoder);
            carry = if conditioned { DVector::zeros(self.input_dim()) } else { dx };
        }

        let dz = dh.iter().fold(DVector::zeros(hd), |acc, d| acc + d);
        let mut d_final = self.encoder.zero_states();
        d_final[top].h = dz;
        let enc_grad = self.encoder.backward_sequence(&enc, None, Some(&d_final))?;
        for (g, e) in grad.encoder.tensors_mut().into_iter().zip(enc_grad.params.tensors()) {
            for (a, b) in g.iter_mut().zip(e) {
                *a += b;
            }
        }
        Ok(loss)
    }
}

impl ParamSet for AutoencoderModel {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.encoder.tensors();
        t.extend(self.decoder.tensors());
        t.push(self.projection.as_slice());
        t.push(self.projection_bias.as_slice());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.decoder.tensors_mut());
        t.push(self.projection.as_mut_slice());
        t.push(self.projection_bias.as_mut_slice());
        t
    }
}

/// Names of the tensors yielded by [`ParamSet::tensors`], in the same order.
pub fn tensor_names(model: &AutoencoderModel) -> Vec<String> {
    const GATES: [&str; 8] = ["w_f", "w_i", "w_c", "w_o", "b_f", "b_i", "b_c", "b_o"];
    let mut names = Vec::new();
    for (part, stack) in [("encoder", &model.encoder), ("decoder", &model.decoder)] {
        for k in 0..stack.num_layers() {
            names.extend(GATES.iter().map(|g| format!("{part}.{k}.{g}")));
        }
    }
    names.push("projection.weight".into());
    names.push("projection.bias".into());
    names
}
