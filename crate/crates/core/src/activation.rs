//! Noisy Softplus, ReLU and fixed-noise Softplus, with the SNN-scaled
//! ("combined") forms used for training.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::response::Calibration;
use crate::special::{logistic, softplus};

/// `kσ·ln(1 + exp(x/(kσ)))`; the σ = 0 limit is `max(0, x)`.
#[inline]
pub fn noisy_softplus(x: f64, sigma: f64, k: f64) -> f64 {
    let scale = k * sigma;
    if scale > 0.0 {
        scale * softplus(x / scale)
    } else {
        x.max(0.0)
    }
}

/// Derivative of [`noisy_softplus`] in `x`: the logistic function of `x/(kσ)`.
/// At σ = 0 this is the step function with value ½ at the origin.
#[inline]
pub fn noisy_softplus_grad(x: f64, sigma: f64, k: f64) -> f64 {
    let scale = k * sigma;
    if scale > 0.0 {
        logistic(x / scale)
    } else if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Activation family of a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ActivationKind {
    /// Noise level taken from each unit's input variance.
    NoisySoftplus { k: f64 },
    Relu,
    /// Noisy Softplus at a fixed noise level.
    Softplus { k: f64, fixed_sigma: f64 },
}

impl ActivationKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::NoisySoftplus { .. } => "noisy-softplus",
            ActivationKind::Relu => "relu",
            ActivationKind::Softplus { .. } => "softplus",
        }
    }

    /// Whether the forward pass needs the variance channel.
    pub fn uses_noise(&self) -> bool {
        matches!(self, ActivationKind::NoisySoftplus { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::NoisySoftplus { k } if !(k > 0.0) => Err(Error::InvalidParameter("k must be positive".into())),
            ActivationKind::Softplus { k, fixed_sigma } if !(k > 0.0 && fixed_sigma > 0.0) => {
                Err(Error::InvalidParameter("softplus needs k > 0 and fixed_sigma > 0".into()))
            }
            _ => Ok(()),
        }
    }

    fn sigma(&self, sigma: Option<f64>) -> Result<f64> {
        match *self {
            ActivationKind::NoisySoftplus { .. } => {
                sigma.ok_or(Error::Missing("noisy-softplus requires a noise level sigma"))
            }
            ActivationKind::Relu => Ok(0.0),
            ActivationKind::Softplus { fixed_sigma, .. } => Ok(fixed_sigma),
        }
    }

    fn k(&self) -> f64 {
        match *self {
            ActivationKind::NoisySoftplus { k } | ActivationKind::Softplus { k, .. } => k,
            ActivationKind::Relu => 1.0,
        }
    }

    /// Unscaled activation `f(x[, σ])`.
    pub fn value(&self, x: f64, sigma: Option<f64>) -> Result<f64> {
        Ok(noisy_softplus(x, self.sigma(sigma)?, self.k()))
    }

    /// Unscaled derivative `f′(x[, σ])`.
    pub fn grad(&self, x: f64, sigma: Option<f64>) -> Result<f64> {
        Ok(noisy_softplus_grad(x, self.sigma(sigma)?, self.k()))
    }
}

/// End-to-end gain `S·τ_syn` linking an activation value to `rate × τ_syn`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedScale {
    /// Rate scale S (Hz per nA).
    pub s: f64,
    /// Synaptic time constant (ms).
    pub tau_syn: f64,
}

impl CombinedScale {
    pub fn new(s: f64, tau_syn: f64) -> Result<Self> {
        if !(s > 0.0 && tau_syn > 0.0) {
            return Err(Error::InvalidParameter("S and tau_syn must be positive".into()));
        }
        Ok(Self { s, tau_syn })
    }

    /// `S·τ_syn` with τ_syn in seconds.
    #[inline]
    pub fn gain(&self) -> f64 {
        self.s * self.tau_syn / 1000.0
    }

    /// τ_syn in seconds: `rate = y / tau_syn_s()`.
    #[inline]
    pub fn tau_syn_s(&self) -> f64 {
        self.tau_syn / 1000.0
    }
}

impl From<Calibration> for CombinedScale {
    fn from(c: Calibration) -> Self {
        Self { s: c.s, tau_syn: c.tau_syn }
    }
}

/// `y = f(x[, σ])·S·τ_syn`.
pub fn combined_forward(kind: &ActivationKind, x: f64, sigma: Option<f64>, scale: &CombinedScale) -> Result<f64> {
    Ok(kind.value(x, sigma)? * scale.gain())
}

/// `dy/dx = f′(x[, σ])·S·τ_syn`.
pub fn combined_grad(kind: &ActivationKind, x: f64, sigma: Option<f64>, scale: &CombinedScale) -> Result<f64> {
    Ok(kind.grad(x, sigma)? * scale.gain())
}

/// Predicted LIF output rate `f(x[, σ])·S` (Hz).
pub fn predict_rate(kind: &ActivationKind, x: f64, sigma: Option<f64>, calib: &Calibration) -> Result<f64> {
    Ok(kind.value(x, sigma)? * calib.s)
}
