use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noise precision `gamma` and prior scale `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub gamma: f64,
    pub delta: f64,
}

impl Hyper {
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        let h = Self { gamma, delta };
        if h.is_valid() {
            Ok(h)
        } else {
            Err(Error::Domain(format!(
                "hyperparameters must be positive and finite, got gamma={gamma}, delta={delta}"
            )))
        }
    }

    /// From the polar view `gamma = r cos(phi)`, `delta = r sin(phi)`.
    pub fn from_polar(r: f64, phi: f64) -> Result<Self> {
        Self::new(r * phi.cos(), r * phi.sin())
    }

    pub fn is_valid(&self) -> bool {
        self.gamma > 0.0 && self.delta > 0.0 && self.gamma.is_finite() && self.delta.is_finite()
    }

    /// `delta / gamma`
    pub fn lambda(&self) -> f64 {
        self.delta / self.gamma
    }

    pub fn radius(&self) -> f64 {
        self.gamma.hypot(self.delta)
    }

    /// `atan(delta / gamma)`, in `(0, pi/2)`.
    pub fn angle(&self) -> f64 {
        self.delta.atan2(self.gamma)
    }
}

/// A log-density over the positive quadrant, up to an additive constant.
pub trait HyperPrior {
    fn log_density(&self, hyper: Hyper) -> f64;

    /// The conjugate form, when the prior has one. Gibbs-type updates need it.
    fn as_gamma(&self) -> Option<&GammaPrior> {
        None
    }
}

/// Independent Gamma priors (shape/rate) on `gamma` and `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub alpha_gamma: f64,
    pub beta_gamma: f64,
    pub alpha_delta: f64,
    pub beta_delta: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        Self {
            alpha_gamma: 1.0,
            beta_gamma: 1e-4,
            alpha_delta: 1.0,
            beta_delta: 1e-4,
        }
    }
}

impl GammaPrior {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha_gamma, self.beta_gamma, self.alpha_delta, self.beta_delta];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "Gamma prior constants must be positive: {self:?}"
            )))
        }
    }
}

impl HyperPrior for GammaPrior {
    fn log_density(&self, h: Hyper) -> f64 {
        (self.alpha_gamma - 1.0) * h.gamma.ln() - self.beta_gamma * h.gamma + (self.alpha_delta - 1.0) * h.delta.ln()
            - self.beta_delta * h.delta
    }

    fn as_gamma(&self) -> Option<&GammaPrior> {
        Some(self)
    }
}

impl<F: Fn(Hyper) -> f64> HyperPrior for F {
    fn log_density(&self, hyper: Hyper) -> f64 {
        self(hyper)
    }
}
