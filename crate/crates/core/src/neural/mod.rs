//! Minimal differentiable LSTM machinery: cell step, stacked sequence
//! forward pass, backpropagation through time, Adam and a gradient checker.

mod adam;
mod gradcheck;
mod lstm;

pub use adam::{lr_schedule, step_decay, AdamState};
pub use gradcheck::grad_check;
pub use lstm::{sigmoid, CellState, LstmLayerParams, LstmStack, SequenceTrace, StackGradients, StepCache};

/// A collection of parameter tensors visited in a fixed declared order.
///
/// Gradients are represented by the same type as the parameters, so two
/// values of one `ParamSet` are congruent when their tensor lengths agree.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Overwrite every parameter from a flat vector in declared order.
    fn assign_flat(&mut self, flat: &[f64]) -> crate::Result<()> {
        let total = self.num_params();
        if flat.len() != total {
            return Err(crate::Error::DimensionMismatch {
                context: "assign_flat",
                expected: total,
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

pub(crate) fn check_congruent<P: ParamSet>(a: &P, b: &P, context: &'static str) -> crate::Result<()> {
    let (ta, tb) = (a.tensors(), b.tensors());
    if ta.len() != tb.len() {
        return Err(crate::Error::DimensionMismatch {
            context,
            expected: ta.len(),
            actual: tb.len(),
        });
    }
    for (x, y) in ta.iter().zip(&tb) {
        if x.len() != y.len() {
            return Err(crate::Error::DimensionMismatch {
                context,
                expected: x.len(),
                actual: y.len(),
            });
        }
    }
    Ok(())
}
