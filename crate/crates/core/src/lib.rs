//! Survival prognosis from longitudinal cognitive trajectories: an LSTM
//! sequence autoencoder compresses each subject's visits to a latent vector
//! that feeds a Cox proportional-hazards model scored by Harrell's C.

pub mod autoencoder;
pub mod cohort;
mod error;
pub mod neural;
pub mod pipeline;
pub mod rng;
pub mod survival;

pub use error::{Error, Result};
