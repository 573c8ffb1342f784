//! Steering-wheel plant.
//!
//! Each agent pulls the wheel towards its intent through its own impedance:
//! `tau = K (theta_intent - theta_s) + B (dtheta_intent - dtheta_s)`. With the
//! road torque `tau_v` the wheel obeys
//! `J_eq theta_s'' + B_sw theta_s' = tau_h + tau_a + tau_v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impedance::ImpedanceState;

/// Steering-wheel angle (rad) and rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    pub theta_s: f64,
    pub dtheta_s: f64,
}

impl PlantState {
    pub fn new(theta_s: f64, dtheta_s: f64) -> Self {
        Self { theta_s, dtheta_s }
    }

    pub fn is_finite(&self) -> bool {
        self.theta_s.is_finite() && self.dtheta_s.is_finite()
    }
}

/// Inertias and wheel damping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    pub j_sw: f64,
    pub j_h: f64,
    pub j_a: f64,
    pub b_sw: f64,
}

impl PlantParams {
    /// Wheel 0.1, hand 0.001, motor equal to the hand, wheel damping 0.01.
    pub const REFERENCE: Self = Self {
        j_sw: 0.1,
        j_h: 0.001,
        j_a: 0.001,
        b_sw: 0.01,
    };

    pub fn validate(&self) -> Result<()> {
        let all = [self.j_sw, self.j_h, self.j_a, self.b_sw];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("plant parameters must be finite".into()));
        }
        if equivalent_inertia(self) <= 0.0 {
            return Err(Error::Validation("j_sw + j_h + j_a must be positive".into()));
        }
        if self.b_sw < 0.0 {
            return Err(Error::Validation("b_sw must be non-negative".into()));
        }
        Ok(())
    }
}

/// One agent's pull on the wheel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentInput {
    pub z: ImpedanceState,
    pub theta: f64,
    pub dtheta: f64,
}

impl AgentInput {
    pub fn new(z: ImpedanceState, theta: f64, dtheta: f64) -> Self {
        Self { z, theta, dtheta }
    }
}

/// Everything held constant over one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInputs {
    pub human: AgentInput,
    pub automation: AgentInput,
    pub tau_v: f64,
}

pub fn equivalent_inertia(params: &PlantParams) -> f64 {
    params.j_sw + params.j_h + params.j_a
}

pub fn coupling_torque(z: ImpedanceState, theta_intent: f64, dtheta_intent: f64, state: PlantState) -> f64 {
    z.k * (theta_intent - state.theta_s) + z.b * (dtheta_intent - state.dtheta_s)
}

fn agent_torque(agent: &AgentInput, state: PlantState) -> f64 {
    coupling_torque(agent.z, agent.theta, agent.dtheta, state)
}

/// Returns `(dtheta_s, ddtheta_s)` packed in a [`PlantState`].
pub fn plant_derivative(state: PlantState, inputs: &PlantInputs, params: &PlantParams) -> Result<PlantState> {
    let j_eq = equivalent_inertia(params);
    if j_eq == 0.0 {
        return Err(Error::ZeroInertia);
    }
    let torque = agent_torque(&inputs.human, state) + agent_torque(&inputs.automation, state) + inputs.tau_v
        - params.b_sw * state.dtheta_s;
    Ok(PlantState {
        theta_s: state.dtheta_s,
        dtheta_s: torque / j_eq,
    })
}

/// Classical fourth-order Runge-Kutta step with inputs held over `dt`.
pub fn rk4_step(state: PlantState, inputs: &PlantInputs, params: &PlantParams, dt: f64) -> Result<PlantState> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::Validation(format!(
            "integration step must be positive, got {dt}"
        )));
    }
    let f = |s: PlantState| plant_derivative(s, inputs, params);
    let shift = |s: PlantState, d: PlantState, h: f64| PlantState {
        theta_s: s.theta_s + h * d.theta_s,
        dtheta_s: s.dtheta_s + h * d.dtheta_s,
    };
    let k1 = f(state)?;
    let k2 = f(shift(state, k1, dt / 2.0))?;
    let k3 = f(shift(state, k2, dt / 2.0))?;
    let k4 = f(shift(state, k3, dt))?;
    let next = PlantState {
        theta_s: state.theta_s + dt / 6.0 * (k1.theta_s + 2.0 * k2.theta_s + 2.0 * k3.theta_s + k4.theta_s),
        dtheta_s: state.dtheta_s + dt / 6.0 * (k1.dtheta_s + 2.0 * k2.dtheta_s + 2.0 * k3.dtheta_s + k4.dtheta_s),
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFiniteState)
    }
}

/// Advances `n` RK4 steps of size `dt` with frozen inputs.
pub fn integrate(
    mut state: PlantState,
    inputs: &PlantInputs,
    params: &PlantParams,
    dt: f64,
    n: usize,
) -> Result<PlantState> {
    for _ in 0..n {
        state = rk4_step(state, inputs, params, dt)?;
    }
    Ok(state)
}

/// Resting angle where the two stiffness pulls and the road torque balance.
pub fn static_equilibrium(inputs: &PlantInputs) -> Result<f64> {
    let kh = inputs.human.z.k;
    let ka = inputs.automation.z.k;
    let total = kh + ka;
    if total == 0.0 {
        return Err(Error::NoStiffness);
    }
    Ok((kh * inputs.human.theta + ka * inputs.automation.theta + inputs.tau_v) / total)
}
