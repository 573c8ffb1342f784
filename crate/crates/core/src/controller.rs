//! Receding-horizon impedance modulation.
//!
//! Each tick the controller
//!
//! 1. holds the measured human impedance and intent over the horizon and
//!    evaluates the human intent torque `tau_h`;
//! 2. picks a target automation torque per step that minimises the stage cost
//!    `| |tau_h + tau_a| - eps | + |tau_h - tau_a|`;
//! 3. solves the stacked prediction system for the actions in least squares;
//! 4. applies only the first action, overwriting any negative impedance
//!    component with zero.
//!
//! The actions are solved as increments on top of the action that would hold
//! the impedance constant, so channels the torque cannot see (damping while
//! the automation intent is constant) stay put instead of following the
//! open-loop `alpha_tilde` growth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impedance::{gamma_for_target, step_impedance, ControlAction, ImpedanceDynamicsParams, ImpedanceState};
use crate::linalg::{lstsq, DenseMatrix};
use crate::prediction::{build_prediction_system, intent_torque, IntentSample, PredictionSystem, ThetaPair};

/// How the two cost terms are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostNorm {
    /// Absolute values summed over the horizon.
    #[default]
    L1,
    /// Squared values summed over the horizon.
    SquaredL2,
}

/// Which automation intent the horizon torques are evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonTheta {
    /// The pair `[theta_a(k); theta_a(k-1)]` for every predicted step.
    #[default]
    Frozen,
    /// The automation's own scheduled intent at each predicted step.
    Scheduled,
}

/// Safety and disagreement parts of a cost.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostTerms {
    pub safety: f64,
    pub disagreement: f64,
}

impl CostTerms {
    pub fn total(&self) -> f64 {
        self.safety + self.disagreement
    }
}

impl std::ops::Add for CostTerms {
    type Output = CostTerms;
    fn add(self, rhs: CostTerms) -> CostTerms {
        CostTerms {
            safety: self.safety + rhs.safety,
            disagreement: self.disagreement + rhs.disagreement,
        }
    }
}

pub fn stage_terms(tau_h: f64, tau_a: f64, epsilon: f64, norm: CostNorm) -> CostTerms {
    let safety = ((tau_h + tau_a).abs() - epsilon).abs();
    let disagreement = (tau_h - tau_a).abs();
    match norm {
        CostNorm::L1 => CostTerms { safety, disagreement },
        CostNorm::SquaredL2 => CostTerms {
            safety: safety * safety,
            disagreement: disagreement * disagreement,
        },
    }
}

/// `| |tau_h + tau_a| - eps | + |tau_h - tau_a|`.
pub fn stage_cost(tau_h: f64, tau_a: f64, epsilon: f64) -> f64 {
    stage_terms(tau_h, tau_a, epsilon, CostNorm::L1).total()
}

pub fn horizon_terms(tau_h: &[f64], tau_a: &[f64], epsilon: &[f64], norm: CostNorm) -> Result<CostTerms> {
    if tau_h.len() != tau_a.len() {
        return Err(Error::LengthMismatch {
            left: tau_h.len(),
            right: tau_a.len(),
        });
    }
    if tau_h.len() != epsilon.len() {
        return Err(Error::LengthMismatch {
            left: tau_h.len(),
            right: epsilon.len(),
        });
    }
    Ok(tau_h
        .iter()
        .zip(tau_a)
        .zip(epsilon)
        .fold(CostTerms::default(), |acc, ((&h, &a), &e)| {
            acc + stage_terms(h, a, e, norm)
        }))
}

pub fn horizon_cost(tau_h: &[f64], tau_a: &[f64], epsilon: &[f64]) -> Result<f64> {
    Ok(horizon_terms(tau_h, tau_a, epsilon, CostNorm::L1)?.total())
}

/// Safety-exact torque closest to the human's: `sgn(tau_h) eps - tau_h`.
///
/// Attains the pointwise minimum `|eps - 2|tau_h||` of [`stage_cost`].
pub fn pointwise_target(tau_h: f64, epsilon: f64) -> f64 {
    if tau_h > 0.0 {
        epsilon - tau_h
    } else if tau_h < 0.0 {
        -epsilon - tau_h
    } else {
        0.0
    }
}

/// Minimiser of the squared stage cost.
pub fn pointwise_target_squared(tau_h: f64, epsilon: f64) -> f64 {
    let cost = |a: f64| stage_terms(tau_h, a, epsilon, CostNorm::SquaredL2).total();
    let mut best = -tau_h;
    for cand in [epsilon / 2.0, -epsilon / 2.0] {
        if cost(cand) < cost(best) {
            best = cand;
        }
    }
    best
}

/// True when `tau` can be produced by non-negative `(B, K)` on this pair.
pub fn torque_reachable(tau: f64, pair: ThetaPair, ts: f64) -> bool {
    let rate = (pair.current - pair.previous) / ts;
    tau == 0.0 || tau * rate > 0.0 || tau * pair.current > 0.0
}

/// Per-step target used by [`plan`].
///
/// Under the L1 cost, `tau_a = tau_h` is always one of the minimisers; it is
/// used whenever non-negative impedance can produce it. Otherwise the
/// safety-exact [`pointwise_target`] is used.
pub fn horizon_target(tau_h: f64, epsilon: f64, pair: ThetaPair, ts: f64, norm: CostNorm) -> f64 {
    match norm {
        CostNorm::L1 if torque_reachable(tau_h, pair, ts) => tau_h,
        CostNorm::L1 => pointwise_target(tau_h, epsilon),
        CostNorm::SquaredL2 => pointwise_target_squared(tau_h, epsilon),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub ts: f64,
    pub np: usize,
    pub dynamics: ImpedanceDynamicsParams,
    pub adaptive: bool,
    pub horizon_theta: HorizonTheta,
    pub cost_norm: CostNorm,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ts.is_nan() || self.ts <= 0.0 {
            return Err(Error::Validation("controller ts must be positive".into()));
        }
        if self.np < 1 {
            return Err(Error::Validation("controller np must be at least 1".into()));
        }
        if (self.dynamics.ts - self.ts).abs() > 1e-15 {
            return Err(Error::Validation(
                "impedance dynamics discretised with a different ts".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub z_a: ImpedanceState,
    /// `Z_A(k-1)`, needed for the carried-over row of the prediction.
    pub z_a_prev: ImpedanceState,
    pub gamma_prev: ControlAction,
    /// Most recent automation intents, oldest first (at most two).
    pub theta_a_hist: Vec<f64>,
    pub cost_breakdown: CostTerms,
}

impl ControllerState {
    /// Starts at rest: `z_a` held by the previous action, intent history seeded twice.
    pub fn new(z_a: ImpedanceState, theta_a: f64, p: &ImpedanceDynamicsParams) -> Result<Self> {
        if !z_a.is_non_negative() || !z_a.is_finite() {
            return Err(Error::Validation(
                "initial automation impedance must be non-negative".into(),
            ));
        }
        Ok(Self {
            z_a,
            z_a_prev: z_a,
            gamma_prev: gamma_for_target(z_a, z_a, p)?,
            theta_a_hist: vec![theta_a, theta_a],
            cost_breakdown: CostTerms::default(),
        })
    }

    pub fn push_theta_a(&mut self, theta: f64) {
        self.theta_a_hist.push(theta);
        if self.theta_a_hist.len() > 2 {
            self.theta_a_hist.remove(0);
        }
    }

    pub fn theta_a_sample(&self, ts: f64) -> Result<IntentSample> {
        match self.theta_a_hist.as_slice() {
            [prev, cur] => Ok(IntentSample::new(*cur, *prev, ts)),
            _ => Err(Error::HistoryMissing("automation intent needs two samples")),
        }
    }

    pub fn apply(&mut self, action: ControlAction, z_next: ImpedanceState) {
        self.z_a_prev = self.z_a;
        self.z_a = z_next;
        self.gamma_prev = action;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanObservation {
    pub z_h: ImpedanceState,
    pub theta_h: IntentSample,
}

/// Exogenous values over the horizon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HorizonInputs {
    /// Safety torque floor per step; a single entry is held over the horizon.
    pub epsilon: Vec<f64>,
    /// Automation intent at `k+1 ..= k+np`; required for [`HorizonTheta::Scheduled`].
    pub theta_a: Option<Vec<f64>>,
}

impl HorizonInputs {
    pub fn constant(epsilon: f64) -> Self {
        Self {
            epsilon: vec![epsilon],
            theta_a: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanDiagnostics {
    pub tau_h: f64,
    pub targets: Vec<f64>,
    /// Predicted automation torques with the applied first action.
    pub predicted: Vec<f64>,
    pub predicted_cost: CostTerms,
    /// First-step impedance before the non-negativity overwrite.
    pub unconstrained: ImpedanceState,
    pub clamped_b: bool,
    pub clamped_k: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub action: ControlAction,
    pub z_a: ImpedanceState,
    pub diagnostics: PlanDiagnostics,
}

fn horizon_pairs(state: &ControllerState, horizon: &HorizonInputs, cfg: &ControllerConfig) -> Result<Vec<ThetaPair>> {
    let now = state.theta_a_sample(cfg.ts)?.pair();
    match cfg.horizon_theta {
        HorizonTheta::Frozen => Ok(vec![now]),
        HorizonTheta::Scheduled => {
            let future = horizon.theta_a.as_ref().ok_or(Error::HistoryMissing(
                "scheduled horizon needs future automation intent",
            ))?;
            if future.len() != cfg.np {
                return Err(Error::LengthMismatch {
                    left: future.len(),
                    right: cfg.np,
                });
            }
            let mut prev = now.current;
            Ok(future
                .iter()
                .map(|&cur| {
                    let pair = ThetaPair::new(cur, prev);
                    prev = cur;
                    pair
                })
                .collect())
        }
    }
}

fn horizon_epsilon(horizon: &HorizonInputs, np: usize) -> Result<Vec<f64>> {
    let eps = match horizon.epsilon.len() {
        1 => vec![horizon.epsilon[0]; np],
        n if n == np => horizon.epsilon.clone(),
        n => return Err(Error::LengthMismatch { left: n, right: np }),
    };
    if eps.iter().any(|e| e.is_nan() || *e < 0.0) {
        return Err(Error::Validation("epsilon must be non-negative".into()));
    }
    Ok(eps)
}

/// `g = T u + h`: `u` are increments over the impedance-holding action.
fn hold_reparameterisation(
    z: ImpedanceState,
    p: &ImpedanceDynamicsParams,
    np: usize,
) -> Result<(DenseMatrix, Vec<f64>)> {
    if p.beta_tilde.b == 0.0 {
        return Err(Error::DegenerateBeta { channel: "b" });
    }
    if p.beta_tilde.k == 0.0 {
        return Err(Error::DegenerateBeta { channel: "k" });
    }
    let channels = [
        (p.alpha_tilde.b, p.beta_tilde.b, z.b),
        (p.alpha_tilde.k, p.beta_tilde.k, z.k),
    ];
    let n = 2 * np;
    let mut t = DenseMatrix::zeros(n, n);
    let mut h = vec![0.0; n];
    for j in 0..np {
        for (c, &(at, bt, zc)) in channels.iter().enumerate() {
            let row = 2 * j + c;
            t[(row, row)] = 1.0;
            for i in 0..j {
                t[(row, 2 * i + c)] = -(at - 1.0);
            }
            h[row] = -(at - 1.0) / bt * zc;
        }
    }
    Ok((t, h))
}

/// Least squares in `u` with some entries pinned to given values.
fn solve_pinned(a: &DenseMatrix, rhs: &[f64], pinned: &[(usize, f64)]) -> Result<Vec<f64>> {
    let idx: Vec<usize> = pinned.iter().map(|p| p.0).collect();
    let mut adjusted = rhs.to_vec();
    for &(col, val) in pinned {
        for (i, r) in adjusted.iter_mut().enumerate() {
            *r -= a[(i, col)] * val;
        }
    }
    let free = lstsq(&a.drop_columns(&idx), &adjusted)?;
    let mut u = Vec::with_capacity(a.cols());
    let mut it = free.into_iter();
    for col in 0..a.cols() {
        match pinned.iter().find(|p| p.0 == col) {
            Some(&(_, v)) => u.push(v),
            None => u.push(it.next().expect("free count matches")),
        }
    }
    Ok(u)
}

struct Candidate {
    action: ControlAction,
    z: ImpedanceState,
    unconstrained: ImpedanceState,
    predicted: Vec<f64>,
    cost: CostTerms,
}

/// One adaptive planning step. See the module docs for the procedure.
pub fn plan(
    state: &ControllerState,
    obs: &HumanObservation,
    horizon: &HorizonInputs,
    cfg: &ControllerConfig,
) -> Result<PlanOutput> {
    if !cfg.adaptive {
        return Err(Error::Validation(
            "plan called with a fixed-impedance configuration".into(),
        ));
    }
    let p = &cfg.dynamics;
    let np = cfg.np;
    let pairs = horizon_pairs(state, horizon, cfg)?;
    let eps = horizon_epsilon(horizon, np)?;
    let tau_h = intent_torque(obs.z_h, &obs.theta_h);
    let tau_h_seq = vec![tau_h; np];

    let sys: PredictionSystem = build_prediction_system(state.z_a_prev, state.gamma_prev, &pairs, p, np)?;
    let targets: Vec<f64> = (0..np)
        .map(|j| horizon_target(tau_h, eps[j], sys.theta_pairs[j], cfg.ts, cfg.cost_norm))
        .collect();

    let (t, h) = hold_reparameterisation(state.z_a, p, np)?;
    let a_u = sys.a_matrix.mul(&t)?;
    let base = sys.predict(&h)?;
    let rhs: Vec<f64> = targets.iter().zip(&base).map(|(tg, b)| tg - b).collect();

    let evaluate = |u: &[f64]| -> Result<Candidate> {
        let mut g = t.mul_vec(u)?;
        for (gi, hi) in g.iter_mut().zip(&h) {
            *gi += hi;
        }
        let first = ControlAction::new(g[0], g[1]);
        let unconstrained = step_impedance(state.z_a, first, p);
        let z = ImpedanceState::new(unconstrained.b.max(0.0), unconstrained.k.max(0.0));
        let action = if z == unconstrained {
            first
        } else {
            gamma_for_target(state.z_a, z, p)?
        };
        g[0] = action.gamma_b;
        g[1] = action.gamma_k;
        let predicted = sys.predict(&g)?;
        let cost = horizon_terms(&tau_h_seq, &predicted, &eps, cfg.cost_norm)?;
        if !(z.is_finite() && cost.total().is_finite()) {
            return Err(Error::SingularSystem("non-finite impedance solution".into()));
        }
        Ok(Candidate {
            action,
            z,
            unconstrained,
            predicted,
            cost,
        })
    };

    let mut best = evaluate(&lstsq(&a_u, &rhs)?)?;
    let unconstrained = best.unconstrained;
    if best.z != best.unconstrained {
        // Re-solve with the overwritten channels pinned at zero impedance and
        // keep whichever candidate predicts the lowest horizon cost.
        let pin_b = (0, -state.z_a.b / p.beta_tilde.b);
        let pin_k = (1, -state.z_a.k / p.beta_tilde.k);
        for pins in [vec![pin_b], vec![pin_k], vec![pin_b, pin_k]] {
            let cand = evaluate(&solve_pinned(&a_u, &rhs, &pins)?)?;
            if cand.cost.total() < best.cost.total() - 1e-12 {
                best = cand;
            }
        }
    }

    Ok(PlanOutput {
        action: best.action,
        z_a: best.z,
        diagnostics: PlanDiagnostics {
            tau_h,
            targets,
            predicted: best.predicted,
            predicted_cost: best.cost,
            unconstrained,
            clamped_b: unconstrained.b < 0.0,
            clamped_k: unconstrained.k < 0.0,
        },
    })
}

/// Fixed-impedance baseline: the action that keeps `z_a` where it is.
pub fn plan_fixed(state: &ControllerState, cfg: &ControllerConfig) -> Result<(ControlAction, ImpedanceState)> {
    let gamma = gamma_for_target(state.z_a, state.z_a, &cfg.dynamics)?;
    Ok((gamma, state.z_a))
}
