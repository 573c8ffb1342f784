//! Impedance evolution for one agent.
//!
//! The continuous model drives each impedance channel (damping `b`, stiffness
//! `k`) with a first-order law `dZ/dt = alpha Z + beta Gamma`. The discrete
//! update uses `alpha_tilde = (I - ts alpha)^-1` and
//! `beta_tilde = alpha_tilde ts beta`, with the action taken at the *new*
//! sample: `Z(k+1) = alpha_tilde Z(k) + beta_tilde Gamma(k+1)`.
//!
//! Nothing here enforces non-negativity; clamping is the controller's job.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Damping/stiffness pair of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImpedanceState {
    /// Damping, N·m·s/rad.
    pub b: f64,
    /// Stiffness, N·m/rad.
    pub k: f64,
}

impl ImpedanceState {
    pub const ZERO: Self = Self { b: 0.0, k: 0.0 };

    pub fn new(b: f64, k: f64) -> Self {
        Self { b, k }
    }

    pub fn is_non_negative(&self) -> bool {
        self.b >= 0.0 && self.k >= 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.k.is_finite()
    }
}

/// Impedance modulation input for one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlAction {
    pub gamma_b: f64,
    pub gamma_k: f64,
}

impl ControlAction {
    pub const ZERO: Self = Self {
        gamma_b: 0.0,
        gamma_k: 0.0,
    };

    pub fn new(gamma_b: f64, gamma_k: f64) -> Self {
        Self { gamma_b, gamma_k }
    }
}

/// A diagonal 2x2 matrix acting on the (damping, stiffness) channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diag2 {
    pub b: f64,
    pub k: f64,
}

impl Diag2 {
    pub const IDENTITY: Self = Self { b: 1.0, k: 1.0 };
    pub const ZERO: Self = Self { b: 0.0, k: 0.0 };

    pub fn new(b: f64, k: f64) -> Self {
        Self { b, k }
    }

    pub fn powi(self, n: i32) -> Self {
        Self {
            b: self.b.powi(n),
            k: self.k.powi(n),
        }
    }
}

/// Continuous and discretised coefficients of the impedance dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpedanceDynamicsParams {
    pub alpha: Diag2,
    pub beta: Diag2,
    pub alpha_tilde: Diag2,
    pub beta_tilde: Diag2,
    pub ts: f64,
}

impl ImpedanceDynamicsParams {
    pub fn new(alpha: Diag2, beta: Diag2, ts: f64) -> Result<Self> {
        discretize(alpha, beta, ts)
    }
}

/// Builds `alpha_tilde = (I - ts alpha)^-1` and `beta_tilde = alpha_tilde ts beta`.
pub fn discretize(alpha: Diag2, beta: Diag2, ts: f64) -> Result<ImpedanceDynamicsParams> {
    if !ts.is_finite() || ts <= 0.0 {
        return Err(Error::Validation(format!("sampling time must be positive, got {ts}")));
    }
    let denom_b = 1.0 - ts * alpha.b;
    let denom_k = 1.0 - ts * alpha.k;
    if denom_b == 0.0 {
        return Err(Error::SingularDiscretization { channel: "b" });
    }
    if denom_k == 0.0 {
        return Err(Error::SingularDiscretization { channel: "k" });
    }
    let alpha_tilde = Diag2::new(1.0 / denom_b, 1.0 / denom_k);
    let beta_tilde = Diag2::new(alpha_tilde.b * ts * beta.b, alpha_tilde.k * ts * beta.k);
    Ok(ImpedanceDynamicsParams {
        alpha,
        beta,
        alpha_tilde,
        beta_tilde,
        ts,
    })
}

/// `Z(k+1) = alpha_tilde Z(k) + beta_tilde Gamma(k+1)`, channelwise.
pub fn step_impedance(z: ImpedanceState, gamma_next: ControlAction, p: &ImpedanceDynamicsParams) -> ImpedanceState {
    ImpedanceState {
        b: p.alpha_tilde.b * z.b + p.beta_tilde.b * gamma_next.gamma_b,
        k: p.alpha_tilde.k * z.k + p.beta_tilde.k * gamma_next.gamma_k,
    }
}

/// `dZ/dt = alpha Z + beta Gamma`.
pub fn continuous_derivative(z: ImpedanceState, gamma: ControlAction, alpha: Diag2, beta: Diag2) -> ImpedanceState {
    ImpedanceState {
        b: alpha.b * z.b + beta.b * gamma.gamma_b,
        k: alpha.k * z.k + beta.k * gamma.gamma_k,
    }
}

/// Inverse of [`step_impedance`]: the action that moves `z` to `z_target` in one step.
pub fn gamma_for_target(
    z: ImpedanceState,
    z_target: ImpedanceState,
    p: &ImpedanceDynamicsParams,
) -> Result<ControlAction> {
    if p.beta_tilde.b == 0.0 {
        return Err(Error::DegenerateBeta { channel: "b" });
    }
    if p.beta_tilde.k == 0.0 {
        return Err(Error::DegenerateBeta { channel: "k" });
    }
    Ok(ControlAction {
        gamma_b: (z_target.b - p.alpha_tilde.b * z.b) / p.beta_tilde.b,
        gamma_k: (z_target.k - p.alpha_tilde.k * z.k) / p.beta_tilde.k,
    })
}
