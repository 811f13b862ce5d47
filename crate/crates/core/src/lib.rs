//! Simulation and training core for ANN-trained spiking networks of
//! leaky integrate-and-fire neurons using the Noisy Softplus activation.
//!
//! - [`lif`]: clock-driven LIF neurons with exponential synapses
//! - [`stimulus`]: noisy current sources, Poisson trains, current statistics
//! - [`response`]: closed-form and Siegert response, tuning curves, (k, S) calibration
//! - [`activation`]: Noisy Softplus, ReLU, Softplus and their SNN-scaled forms
//! - [`annet`]: bias-free ConvNet with the dual (mean, variance) forward pass
//! - [`snn`]: spiking network built from trained weights, inference, energy
//! - [`dataset`]: in-memory digit datasets, label encoding, stratified sampling
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod activation;
pub mod annet;
pub mod dataset;
pub mod error;
pub mod lif;
pub mod quad;
pub mod response;
pub mod seed;
pub mod snn;
pub mod special;
pub mod stimulus;

pub use activation::{
    combined_forward, combined_grad, noisy_softplus, noisy_softplus_grad, predict_rate, ActivationKind, CombinedScale,
};
pub use error::{Error, Result};
pub use lif::{lif_step, simulate_neuron, CurrentTrace, Drive, LifParams, NeuronState, SpikeTrain};
pub use response::{calibrate, rate_constant_current, siegert_rate, Calibration, DiffusionStats, TuningSample};
