//! Compares analytic BPTT gradients of the reconstruction loss with finite
//! differences for both decoder variants.
//!
//! cargo run --release --example gradient_check

use mci_prognosis::autoencoder::{AutoencoderModel, Conditioning};
use mci_prognosis::neural::grad_check;
use nalgebra::DVector;

fn main() -> mci_prognosis::Result<()> {
    let batch: Vec<Vec<DVector<f64>>> = vec![
        (0..3).map(|t| DVector::from_fn(5, |i, _| ((i + 2 * t) as f64 * 0.7).sin())).collect(),
        (0..2).map(|t| DVector::from_fn(5, |i, _| ((i * t) as f64 * 0.3).cos())).collect(),
    ];
    for cond in [Conditioning::Unconditioned, Conditioning::Conditioned] {
        let model = AutoencoderModel::init(5, 4, 11)?.with_conditioning(cond);
        let (loss, grads) = model.loss_and_grad(&batch)?;
        let err = grad_check(|m: &AutoencoderModel| m.reconstruction_loss(&batch), &model, &grads, 1e-3)?;
        println!("{cond:?}: loss {loss:.6}, max relative gradient error {err:.2e}");
    }
    Ok(())
}
