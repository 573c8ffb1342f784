//! Adaptive haptic shared control of a steering wheel.
//!
//! A scripted driver and an automation system each pull a motorized steering
//! wheel towards their own intent angle through a damping/stiffness
//! impedance. The automation modulates its impedance with a receding-horizon
//! least-squares controller that trades a minimum combined torque against the
//! disagreement between the two agents, and never lets its impedance go
//! negative.
//!
//! Module map:
//!
//! - [`plant`]: wheel dynamics and RK4 integration
//! - [`impedance`]: impedance dynamics and their discretisation
//! - [`prediction`]: intent torques and the stacked horizon prediction
//! - [`controller`]: cost, targets, the adaptive plan and the fixed baseline
//! - [`linalg`]: dense least squares
//! - [`schedule`], [`scenario`]: experiment descriptions and built-ins
//! - [`sim`], [`export`]: closed-loop runs, metrics and log files

pub mod controller;
pub mod error;
pub mod export;
pub mod impedance;
pub mod linalg;
pub mod plant;
pub mod prediction;
pub mod scenario;
pub mod schedule;
pub mod sim;

pub use controller::{
    horizon_cost, plan, plan_fixed, pointwise_target, stage_cost, ControllerConfig, ControllerState, CostNorm,
    CostTerms, HorizonInputs, HorizonTheta, HumanObservation, PlanOutput,
};
pub use error::{Error, Result};
pub use impedance::{
    continuous_derivative, discretize, gamma_for_target, step_impedance, ControlAction, Diag2, ImpedanceDynamicsParams,
    ImpedanceState,
};
pub use linalg::{lstsq, modified_lstsq, residual, DenseMatrix};
pub use plant::{
    coupling_torque, equivalent_inertia, plant_derivative, rk4_step, static_equilibrium, AgentInput, PlantInputs,
    PlantParams, PlantState,
};
pub use prediction::{
    build_prediction_system, intent_torque, phi_row, propagate_torque, psi_row, theta_vector, IntentSample,
    PredictionSystem, ThetaPair,
};
pub use scenario::{builtin, builtin_names, builtin_scenarios, parse_scenario, serialize_scenario, ScenarioConfig};
pub use schedule::{sample_schedule, Schedule};
pub use sim::{compare_runs, compute_metrics, run_simulation, run_sweep, ComparisonReport, LogRow, Metrics, SimLog};
