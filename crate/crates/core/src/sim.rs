//! Closed-loop simulation.
//!
//! The controller ticks every `ts`; between ticks the wheel is integrated with
//! RK4 at `dt = 1 ms` with both impedances and intents held. One log row is
//! written per tick, before the tick's plan is applied.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::controller::{
    plan, plan_fixed, stage_terms, ControllerState, HorizonInputs, HorizonTheta, HumanObservation,
};
use crate::error::{Error, Result};
use crate::impedance::ImpedanceState;
use crate::plant::{coupling_torque, integrate, AgentInput, PlantInputs, PlantState};
use crate::prediction::{intent_torque, IntentSample};
use crate::scenario::{human_state, ScenarioConfig};

/// Plant integration step, s.
pub const PLANT_DT: f64 = 1e-3;

pub const COLUMNS: [&str; 19] = [
    "t",
    "theta_s",
    "dtheta_s",
    "theta_h",
    "theta_a",
    "b_h",
    "k_h",
    "b_a",
    "k_a",
    "tau_h_intent",
    "tau_a_intent",
    "tau_h_coupling",
    "tau_a_coupling",
    "tau_total_intent",
    "tau_diff",
    "epsilon",
    "stage_cost",
    "safety_term",
    "disagreement_term",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub theta_s: f64,
    pub dtheta_s: f64,
    pub theta_h: f64,
    pub theta_a: f64,
    pub b_h: f64,
    pub k_h: f64,
    pub b_a: f64,
    pub k_a: f64,
    pub tau_h_intent: f64,
    pub tau_a_intent: f64,
    pub tau_h_coupling: f64,
    pub tau_a_coupling: f64,
    pub tau_total_intent: f64,
    pub tau_diff: f64,
    pub epsilon: f64,
    pub stage_cost: f64,
    pub safety_term: f64,
    pub disagreement_term: f64,
}

impl LogRow {
    /// Values in [`COLUMNS`] order.
    pub fn values(&self) -> [f64; 19] {
        [
            self.t,
            self.theta_s,
            self.dtheta_s,
            self.theta_h,
            self.theta_a,
            self.b_h,
            self.k_h,
            self.b_a,
            self.k_a,
            self.tau_h_intent,
            self.tau_a_intent,
            self.tau_h_coupling,
            self.tau_a_coupling,
            self.tau_total_intent,
            self.tau_diff,
            self.epsilon,
            self.stage_cost,
            self.safety_term,
            self.disagreement_term,
        ]
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        COLUMNS.iter().position(|c| *c == column).map(|i| self.values()[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub scenario: String,
    pub adaptive: bool,
    pub ts: f64,
    pub rows: Vec<LogRow>,
}

impl SimLog {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = COLUMNS
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r.values()[idx]).collect())
    }
}

fn tick_time(k: usize, ts: f64) -> f64 {
    k as f64 * ts
}

/// Runs one scenario from rest.
pub fn run_simulation(cfg: &ScenarioConfig) -> Result<SimLog> {
    cfg.validate()?;
    let ctrl = cfg.controller_config()?;
    let ts = ctrl.ts;
    let ticks = cfg.tick_count();
    let inner = (ts / PLANT_DT).round().max(1.0) as usize;
    let dt = ts / inner as f64;
    let mut noise = (cfg.measurement_noise > 0.0).then(|| {
        (
            ChaCha8Rng::seed_from_u64(cfg.seed),
            Normal::new(0.0, cfg.measurement_noise).expect("validated noise level"),
        )
    });

    let theta_a0 = cfg.automation.theta_a.sample(0.0)?;
    let mut state = ControllerState::new(cfg.initial_automation_impedance(), theta_a0, &ctrl.dynamics)?;
    let mut plant = PlantState::default();
    let mut theta_h_prev = cfg.human.theta_h.sample(0.0)?;
    let mut rows = Vec::with_capacity(ticks + 1);

    for k in 0..=ticks {
        let t = tick_time(k, ts);
        let at_step = |e: Error| Error::Step {
            step: k,
            source: Box::new(e),
        };
        let human = human_state(cfg, t).map_err(at_step)?;
        let theta_a = cfg.automation.theta_a.sample(t).map_err(at_step)?;
        if k > 0 {
            state.push_theta_a(theta_a);
        }
        let theta_a_sample = state.theta_a_sample(ts).map_err(at_step)?;
        let theta_h_sample = IntentSample::new(human.theta_h, theta_h_prev, ts);
        let epsilon = cfg.controller.epsilon.sample(t).map_err(at_step)?;
        let tau_v = cfg.tau_v.sample(t).map_err(at_step)?;
        let z_a = state.z_a;

        let tau_h = intent_torque(human.z_h, &theta_h_sample);
        let tau_a = intent_torque(z_a, &theta_a_sample);
        let terms = stage_terms(tau_h, tau_a, epsilon, ctrl.cost_norm);
        let dtheta_a = (theta_a_sample.theta - theta_a_sample.theta_prev) / ts;
        rows.push(LogRow {
            t,
            theta_s: plant.theta_s,
            dtheta_s: plant.dtheta_s,
            theta_h: human.theta_h,
            theta_a,
            b_h: human.z_h.b,
            k_h: human.z_h.k,
            b_a: z_a.b,
            k_a: z_a.k,
            tau_h_intent: tau_h,
            tau_a_intent: tau_a,
            tau_h_coupling: coupling_torque(human.z_h, human.theta_h, human.dtheta_h, plant),
            tau_a_coupling: coupling_torque(z_a, theta_a, dtheta_a, plant),
            tau_total_intent: tau_h + tau_a,
            tau_diff: tau_h - tau_a,
            epsilon,
            stage_cost: terms.total(),
            safety_term: terms.safety,
            disagreement_term: terms.disagreement,
        });
        theta_h_prev = human.theta_h;
        if k == ticks {
            break;
        }

        if ctrl.adaptive {
            let measured_theta = match noise.as_mut() {
                Some((rng, dist)) => human.theta_h + dist.sample(rng),
                None => human.theta_h,
            };
            let obs = HumanObservation {
                z_h: human.z_h,
                theta_h: IntentSample::new(measured_theta, theta_h_sample.theta_prev, ts),
            };
            let horizon = horizon_inputs(cfg, t, ctrl.np, ctrl.horizon_theta).map_err(at_step)?;
            let out = plan(&state, &obs, &horizon, &ctrl).map_err(at_step)?;
            state.cost_breakdown = out.diagnostics.predicted_cost;
            state.apply(out.action, out.z_a);
        } else {
            let (gamma, z) = plan_fixed(&state, &ctrl).map_err(at_step)?;
            state.apply(gamma, z);
        }

        let inputs = PlantInputs {
            human: AgentInput::new(human.z_h, human.theta_h, human.dtheta_h),
            automation: AgentInput::new(z_a, theta_a, dtheta_a),
            tau_v,
        };
        plant = integrate(plant, &inputs, &cfg.plant, dt, inner).map_err(at_step)?;
    }

    Ok(SimLog {
        scenario: cfg.name().to_string(),
        adaptive: ctrl.adaptive,
        ts,
        rows,
    })
}

fn horizon_inputs(cfg: &ScenarioConfig, t: f64, np: usize, mode: HorizonTheta) -> Result<HorizonInputs> {
    let ts = cfg.controller.ts;
    let future =
        |s: &crate::schedule::Schedule| -> Result<Vec<f64>> { (1..=np).map(|j| s.sample(t + j as f64 * ts)).collect() };
    Ok(HorizonInputs {
        epsilon: future(&cfg.controller.epsilon)?,
        theta_a: match mode {
            HorizonTheta::Frozen => None,
            HorizonTheta::Scheduled => Some(future(&cfg.automation.theta_a)?),
        },
    })
}

/// Time for `|K_A - K_H|` to enter and stay inside the tolerance after a human
/// stiffness change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettleTime {
    pub breakpoint: f64,
    /// `None` when the gap never settles before the next change.
    pub settle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean `|tau_diff|` over the final 20 % of the run.
    pub steady_state_tau_diff: f64,
    /// Mean `|tau_total_intent|` over the final 20 % of the run.
    pub steady_state_tau_total: f64,
    /// Mean `epsilon` over the final 20 % of the run.
    pub steady_state_epsilon: f64,
    pub settle_times: Vec<SettleTime>,
    pub max_abs_theta_s: f64,
    pub final_abs_theta_s: f64,
    /// Mean `|tau_diff|` over the whole run.
    pub mean_disagreement: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn compute_metrics(log: &SimLog, tolerance: f64) -> Result<Metrics> {
    let rows = &log.rows;
    if rows.is_empty() {
        return Err(Error::EmptyLog);
    }
    let n = rows.len();
    let tail_len = ((0.2 * n as f64).round() as usize).clamp(1, n);
    let tail = &rows[n - tail_len..];

    let mut starts = vec![0usize];
    starts.extend((1..n).filter(|&i| rows[i].k_h != rows[i - 1].k_h));
    let settle_times = starts
        .iter()
        .enumerate()
        .map(|(s, &start)| {
            let end = starts.get(s + 1).copied().unwrap_or(n);
            let segment = &rows[start..end];
            let mut first_ok = None;
            for (i, r) in segment.iter().enumerate().rev() {
                if (r.k_a - r.k_h).abs() < tolerance {
                    first_ok = Some(i);
                } else {
                    break;
                }
            }
            SettleTime {
                breakpoint: rows[start].t,
                settle: first_ok.map(|i| segment[i].t - rows[start].t),
            }
        })
        .collect();

    Ok(Metrics {
        steady_state_tau_diff: mean(tail.iter().map(|r| r.tau_diff.abs())),
        steady_state_tau_total: mean(tail.iter().map(|r| r.tau_total_intent.abs())),
        steady_state_epsilon: mean(tail.iter().map(|r| r.epsilon)),
        settle_times,
        max_abs_theta_s: rows.iter().map(|r| r.theta_s.abs()).fold(0.0, f64::max),
        final_abs_theta_s: rows[n - 1].theta_s.abs(),
        mean_disagreement: mean(rows.iter().map(|r| r.tau_diff.abs())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub adaptive: Metrics,
    pub fixed: Metrics,
    /// adaptive / fixed mean disagreement (`None` if the fixed run has none).
    pub disagreement_ratio: Option<f64>,
    pub steady_state_tau_diff_ratio: Option<f64>,
    pub max_abs_theta_s_ratio: Option<f64>,
    pub adaptive_lower_disagreement: bool,
    /// Steady-state `|tau_h + tau_a|` of the adaptive run within 10 % of eps.
    pub adaptive_tracks_epsilon: bool,
    /// Both logs came from the same controller mode.
    pub identical_modes: bool,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den != 0.0 {
        Some(num / den)
    } else if num == 0.0 {
        Some(1.0)
    } else {
        None
    }
}

/// Tolerance on `|K_A - K_H|` used for settle times in reports.
pub const SETTLE_TOLERANCE: f64 = 0.05;

pub fn compare_runs(adaptive: &SimLog, fixed: &SimLog) -> Result<ComparisonReport> {
    if adaptive.ts != fixed.ts {
        return Err(Error::TimingMismatch(format!("ts {} vs {}", adaptive.ts, fixed.ts)));
    }
    if adaptive.rows.len() != fixed.rows.len() {
        return Err(Error::TimingMismatch(format!(
            "{} vs {} rows",
            adaptive.rows.len(),
            fixed.rows.len()
        )));
    }
    if adaptive.rows.iter().zip(&fixed.rows).any(|(a, f)| a.t != f.t) {
        return Err(Error::TimingMismatch("timestamps differ".into()));
    }
    let a = compute_metrics(adaptive, SETTLE_TOLERANCE)?;
    let f = compute_metrics(fixed, SETTLE_TOLERANCE)?;
    let tracks = (a.steady_state_tau_total - a.steady_state_epsilon).abs() <= 0.1 * a.steady_state_epsilon;
    Ok(ComparisonReport {
        disagreement_ratio: ratio(a.mean_disagreement, f.mean_disagreement),
        steady_state_tau_diff_ratio: ratio(a.steady_state_tau_diff, f.steady_state_tau_diff),
        max_abs_theta_s_ratio: ratio(a.max_abs_theta_s, f.max_abs_theta_s),
        adaptive_lower_disagreement: a.mean_disagreement < f.mean_disagreement,
        adaptive_tracks_epsilon: tracks,
        identical_modes: adaptive.adaptive == fixed.adaptive,
        adaptive: a,
        fixed: f,
    })
}

/// Runs the scenario once per override value, concurrently. Results are in
/// ascending order of value.
pub fn run_sweep(base: &ScenarioConfig, key: &str, values: &[f64]) -> Result<Vec<(f64, ScenarioConfig, SimLog)>> {
    if values.is_empty() {
        return Err(Error::Validation("sweep needs at least one value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let configs = sorted
        .iter()
        .map(|v| base.with_override(key, &format!("{v:?}")))
        .collect::<Result<Vec<_>>>()?;
    let logs: Vec<Result<SimLog>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || run_simulation(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    sorted
        .into_iter()
        .zip(configs)
        .zip(logs)
        .map(|((v, c), log)| Ok((v, c, log?)))
        .collect()
}

/// Automation impedance range seen in a log.
pub fn automation_impedance_bounds(log: &SimLog) -> (ImpedanceState, ImpedanceState) {
    let mut lo = ImpedanceState::new(f64::INFINITY, f64::INFINITY);
    let mut hi = ImpedanceState::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in &log.rows {
        lo.b = lo.b.min(r.b_a);
        lo.k = lo.k.min(r.k_a);
        hi.b = hi.b.max(r.b_a);
        hi.k = hi.k.max(r.k_a);
    }
    (lo, hi)
}
