//! Predicted automation torque over the control horizon.
//!
//! An agent's intent torque is `B (theta(k) - theta(k-1)) / ts + K theta(k)`,
//! i.e. a row `[B/ts + K, -B/ts]` dotted with the pair `[theta(k); theta(k-1)]`.
//! Rows are kept split by channel (the damping part and the stiffness part) so
//! that the diagonal `alpha_tilde` / `beta_tilde` act on their own channel.
//!
//! Propagating `n` steps ahead:
//!
//! ```text
//! tau(k+n) = (alpha_tilde^n Delta(k) + sum_{j=1..n} alpha_tilde^(n-j) Psi(k+j)) . pair
//! ```
//!
//! with `Delta(k) = Phi(k) + Psi(k)`. Each `Psi(k+j)` is linear in the action
//! `Gamma(k+j)`, so the whole horizon is an affine map of the stacked actions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impedance::{ControlAction, Diag2, ImpedanceDynamicsParams, ImpedanceState};
use crate::linalg::DenseMatrix;

/// Current and previous intent angle of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentSample {
    pub theta: f64,
    pub theta_prev: f64,
    pub ts: f64,
}

impl IntentSample {
    pub fn new(theta: f64, theta_prev: f64, ts: f64) -> Self {
        Self { theta, theta_prev, ts }
    }

    /// Sample of a signal that has been constant for two ticks.
    pub fn steady(theta: f64, ts: f64) -> Self {
        Self::new(theta, theta, ts)
    }

    pub fn pair(&self) -> ThetaPair {
        ThetaPair::new(self.theta, self.theta_prev)
    }
}

/// `[theta(k); theta(k-1)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaPair {
    pub current: f64,
    pub previous: f64,
}

impl ThetaPair {
    pub fn new(current: f64, previous: f64) -> Self {
        Self { current, previous }
    }
}

/// Backward-difference rate and angle, `((theta - theta_prev) / ts, theta)`.
pub fn theta_vector(sample: &IntentSample) -> (f64, f64) {
    ((sample.theta - sample.theta_prev) / sample.ts, sample.theta)
}

pub fn intent_torque(z: ImpedanceState, sample: &IntentSample) -> f64 {
    let (rate, angle) = theta_vector(sample);
    z.b * rate + z.k * angle
}

/// Torque row generated by a damping part and a stiffness part.
///
/// As a row vector it reads `[b/ts + k, -b/ts]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TorqueRow {
    pub b: f64,
    pub k: f64,
    pub ts: f64,
}

pub type PhiRow = TorqueRow;
pub type PsiRow = TorqueRow;

impl TorqueRow {
    /// Coefficient on `theta(k)`.
    pub fn c0(&self) -> f64 {
        self.b / self.ts + self.k
    }

    /// Coefficient on `theta(k-1)`.
    pub fn c1(&self) -> f64 {
        -self.b / self.ts
    }

    pub fn dot(&self, pair: ThetaPair) -> f64 {
        self.b * (pair.current - pair.previous) / self.ts + self.k * pair.current
    }

    fn scaled(self, d: Diag2) -> Self {
        Self {
            b: d.b * self.b,
            k: d.k * self.k,
            ts: self.ts,
        }
    }
}

impl std::ops::Add for TorqueRow {
    type Output = TorqueRow;
    fn add(self, rhs: TorqueRow) -> TorqueRow {
        TorqueRow {
            b: self.b + rhs.b,
            k: self.k + rhs.k,
            ts: self.ts,
        }
    }
}

/// Impedance carried over from the previous sample: `alpha_tilde [B/ts + K, -B/ts]`.
pub fn phi_row(z_prev: ImpedanceState, p: &ImpedanceDynamicsParams) -> PhiRow {
    TorqueRow {
        b: p.alpha_tilde.b * z_prev.b,
        k: p.alpha_tilde.k * z_prev.k,
        ts: p.ts,
    }
}

/// Contribution of one action: `beta_tilde [Gamma_b/ts + Gamma_k, -Gamma_b/ts]`.
pub fn psi_row(gamma: ControlAction, p: &ImpedanceDynamicsParams) -> PsiRow {
    TorqueRow {
        b: p.beta_tilde.b * gamma.gamma_b,
        k: p.beta_tilde.k * gamma.gamma_k,
        ts: p.ts,
    }
}

/// Torque `psis.len()` steps after `delta`'s sample, evaluated on a fixed pair.
pub fn propagate_torque(delta: TorqueRow, psis: &[PsiRow], p: &ImpedanceDynamicsParams, pair: ThetaPair) -> f64 {
    let mut row = delta;
    for psi in psis {
        row = row.scaled(p.alpha_tilde) + *psi;
    }
    row.dot(pair)
}

/// Predicted torques for steps `k+1 ..= k+np` as `a_matrix * g + offset`, where
/// `g = [Gamma_b(k+1), Gamma_k(k+1), ..., Gamma_b(k+np), Gamma_k(k+np)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSystem {
    pub a_matrix: DenseMatrix,
    pub offset: Vec<f64>,
    /// Evaluation pair for each predicted step.
    pub theta_pairs: Vec<ThetaPair>,
}

impl PredictionSystem {
    pub fn horizon(&self) -> usize {
        self.offset.len()
    }

    pub fn predict(&self, g: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.a_matrix.mul_vec(g)?;
        for (o, c) in out.iter_mut().zip(&self.offset) {
            *o += c;
        }
        Ok(out)
    }
}

/// Assembles the horizon map from `z_prev = Z_A(k-1)` and `gamma_k = Gamma_A(k)`.
///
/// `theta_pairs` holds either one pair (held over the horizon) or one per step.
pub fn build_prediction_system(
    z_prev: ImpedanceState,
    gamma_k: ControlAction,
    theta_pairs: &[ThetaPair],
    p: &ImpedanceDynamicsParams,
    np: usize,
) -> Result<PredictionSystem> {
    if np < 1 {
        return Err(Error::HorizonZero);
    }
    let pairs: Vec<ThetaPair> = match theta_pairs.len() {
        1 => vec![theta_pairs[0]; np],
        n if n == np => theta_pairs.to_vec(),
        n => return Err(Error::ShapeMismatch(format!("expected 1 or {np} theta pairs, got {n}"))),
    };
    let delta = phi_row(z_prev, p) + psi_row(gamma_k, p);
    let mut a = DenseMatrix::zeros(np, 2 * np);
    let mut offset = Vec::with_capacity(np);
    for (row, pair) in pairs.iter().enumerate() {
        let n = row as i32 + 1;
        offset.push(delta.scaled(p.alpha_tilde.powi(n)).dot(*pair));
        let rate = (pair.current - pair.previous) / p.ts;
        for j in 0..=row {
            let decay = p.alpha_tilde.powi((row - j) as i32);
            a[(row, 2 * j)] = decay.b * p.beta_tilde.b * rate;
            a[(row, 2 * j + 1)] = decay.k * p.beta_tilde.k * pair.current;
        }
    }
    Ok(PredictionSystem {
        a_matrix: a,
        offset,
        theta_pairs: pairs,
    })
}
