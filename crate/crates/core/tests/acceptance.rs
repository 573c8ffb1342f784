//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use hsc_core::export::to_csv;
use hsc_core::plant::integrate;
use hsc_core::{
    build_prediction_system, builtin, builtin_scenarios, compute_metrics, discretize, gamma_for_target, intent_torque,
    plan, pointwise_target, run_simulation, run_sweep, stage_cost, step_impedance, AgentInput, ControlAction,
    ControllerConfig, ControllerState, CostNorm, Diag2, HorizonInputs, HorizonTheta, HumanObservation, ImpedanceState,
    IntentSample, PlantInputs, PlantParams, PlantState, ScenarioConfig, SimLog, ThetaPair,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run_builtin(name: &str) -> SimLog {
    run_simulation(&builtin(name).expect("built-in")).expect("built-in run")
}

fn fixed(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.controller.adaptive = false;
    cfg
}

/// Closed-form step response of `j x'' + c x' + k x = f` from rest (underdamped).
fn closed_form(j: f64, c: f64, k: f64, f: f64, t: f64) -> f64 {
    let x_ss = f / k;
    let sigma = c / (2.0 * j);
    let wd = (k / j - sigma * sigma).sqrt();
    let a = -x_ss;
    let b = sigma * a / wd;
    x_ss + (-sigma * t).exp() * (a * (wd * t).cos() + b * (wd * t).sin())
}

fn frozen_inputs() -> (PlantInputs, f64, f64, f64) {
    let human = AgentInput::new(ImpedanceState::new(0.02, 1.3), 0.4, 0.0);
    let automation = AgentInput::new(ImpedanceState::new(0.05, 0.7), -0.2, 0.0);
    let p = PlantParams::REFERENCE;
    let c = p.b_sw + human.z.b + automation.z.b;
    let k = human.z.k + automation.z.k;
    let f = human.z.k * human.theta + automation.z.k * automation.theta;
    (
        PlantInputs {
            human,
            automation,
            tau_v: 0.0,
        },
        c,
        k,
        f,
    )
}

fn max_rel_error(dt: f64, horizon: f64) -> f64 {
    let (inputs, c, k, f) = frozen_inputs();
    let p = PlantParams::REFERENCE;
    let j = p.j_sw + p.j_h + p.j_a;
    let steps = (horizon / dt).round() as usize;
    let mut state = PlantState::default();
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for n in 1..=steps {
        state = integrate(state, &inputs, &p, dt, 1).unwrap();
        let exact = closed_form(j, c, k, f, n as f64 * dt);
        err = err.max((state.theta_s - exact).abs());
        scale = scale.max(exact.abs());
    }
    err / scale
}

fn c1_plant() -> Outcome {
    let start = Instant::now();
    let rel = max_rel_error(1e-3, 10.0);
    let elapsed = start.elapsed();
    let ratio = max_rel_error(0.02, 10.0) / max_rel_error(0.01, 10.0);
    let pass = rel < 1e-6 && (12.0..=20.0).contains(&ratio) && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!("max rel error {rel:.2e}, halving ratio {ratio:.2}, {elapsed:.2?}"),
    )
}

fn c2_static_gain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let base = fixed(builtin("fig6_adaptive_vs_fixed").unwrap());
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let k_h: f64 = rng.gen_range(0.5..3.0);
        let k_a: f64 = rng.gen_range(0.5..3.0);
        let b_h: f64 = rng.gen_range(0.2..1.0);
        let b_a: f64 = rng.gen_range(0.2..1.0);
        let th_h: f64 = rng.gen_range(-1.0..1.0);
        let th_a: f64 = rng.gen_range(-1.0..1.0);
        let mut cfg = base.clone();
        cfg.duration = 20.0;
        cfg.human.k_h = hsc_core::Schedule::Constant(k_h);
        cfg.human.b_h = hsc_core::Schedule::Constant(b_h);
        cfg.human.theta_h = hsc_core::Schedule::Constant(th_h);
        cfg.automation.theta_a = hsc_core::Schedule::Constant(th_a);
        cfg.automation.k_a0 = k_a;
        cfg.automation.b_a0 = b_a;
        let log = run_simulation(&cfg).unwrap();
        let expected = (k_h * th_h + k_a * th_a) / (k_h + k_a);
        worst = worst.max((log.rows.last().unwrap().theta_s - expected).abs());
    }
    outcome(
        worst < 1e-3,
        format!("worst settle error {worst:.2e} rad over 20 configs"),
    )
}

fn c3_discretization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut beta_exact = true;
    for _ in 0..1000 {
        let alpha = Diag2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let beta = Diag2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let ts: f64 = rng.gen_range(0.001..0.15);
        let p = discretize(alpha, beta, ts).unwrap();
        worst = worst
            .max((p.alpha_tilde.b * (1.0 - ts * alpha.b) - 1.0).abs())
            .max((p.alpha_tilde.k * (1.0 - ts * alpha.k) - 1.0).abs());
        beta_exact &= p.beta_tilde.b == p.alpha_tilde.b * ts * beta.b;
        beta_exact &= p.beta_tilde.k == p.alpha_tilde.k * ts * beta.k;
    }
    let p = discretize(Diag2::IDENTITY, Diag2::IDENTITY, 0.1).unwrap();
    let ref_ok = [p.alpha_tilde.b, p.alpha_tilde.k]
        .iter()
        .all(|a| (a - 10.0 / 9.0).abs() < 1e-12)
        && [p.beta_tilde.b, p.beta_tilde.k]
            .iter()
            .all(|b| (b - 1.0 / 9.0).abs() < 1e-12);
    outcome(
        worst < 1e-12 && beta_exact && ref_ok,
        format!(
            "identity residual {worst:.1e}, beta identity exact {beta_exact}, alpha~ {:.15}, beta~ {:.15}",
            p.alpha_tilde.b, p.beta_tilde.b
        ),
    )
}

fn c4_prediction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let alpha = Diag2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let beta = Diag2::new(rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0));
        let p = discretize(alpha, beta, 0.1).unwrap();
        let np = rng.gen_range(1..=20);
        let z_prev = ImpedanceState::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        let gamma_k = ControlAction::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let pair = ThetaPair::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let g: Vec<f64> = (0..2 * np).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sys = build_prediction_system(z_prev, gamma_k, &[pair], &p, np).unwrap();
        let predicted = sys.predict(&g).unwrap();

        let sample = IntentSample::new(pair.current, pair.previous, 0.1);
        let mut z = step_impedance(z_prev, gamma_k, &p);
        for (n, pred) in predicted.iter().enumerate() {
            z = step_impedance(z, ControlAction::new(g[2 * n], g[2 * n + 1]), &p);
            let direct = intent_torque(z, &sample);
            worst = worst.max((direct - pred).abs());
        }
    }
    outcome(worst < 1e-10, format!("worst deviation from recursion {worst:.2e}"))
}

fn c5_pointwise() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cases: Vec<(f64, f64)> = (0..10_000)
        .map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(0.0..1.0)))
        .collect();
    let (worst_identity, worst_beat) = cases
        .par_iter()
        .map(|&(tau_h, eps)| {
            let achieved = stage_cost(tau_h, pointwise_target(tau_h, eps), eps);
            let identity = (achieved - (eps - 2.0 * tau_h.abs()).abs()).abs();
            let reach = tau_h.abs() + eps + 1.0;
            let n = (2.0 * reach / 1e-4).ceil() as i64;
            let grid_min = (0..=n)
                .map(|i| stage_cost(tau_h, -reach + i as f64 * 1e-4, eps))
                .fold(f64::INFINITY, f64::min);
            (identity, achieved - grid_min)
        })
        .reduce(|| (0.0, f64::NEG_INFINITY), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    outcome(
        worst_identity < 1e-12 && worst_beat <= 2e-4,
        format!("identity error {worst_identity:.1e}, max grid advantage {worst_beat:.1e}"),
    )
}

struct Np1Case {
    state: ControllerState,
    obs: HumanObservation,
    eps: f64,
}

fn np1_config() -> ControllerConfig {
    ControllerConfig {
        ts: 0.1,
        np: 1,
        dynamics: discretize(Diag2::IDENTITY, Diag2::IDENTITY, 0.1).unwrap(),
        adaptive: true,
        horizon_theta: HorizonTheta::Frozen,
        cost_norm: CostNorm::L1,
    }
}

fn random_np1_case(rng: &mut ChaCha8Rng, cfg: &ControllerConfig) -> Np1Case {
    let z_prev = ImpedanceState::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0));
    let z_a = ImpedanceState::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0));
    let theta_a: f64 = rng.gen_range(-1.0..1.0);
    let theta_a_prev = theta_a + rng.gen_range(-0.05..0.05);
    let theta_h: f64 = rng.gen_range(-1.0..1.0);
    let state = ControllerState {
        z_a,
        z_a_prev: z_prev,
        gamma_prev: gamma_for_target(z_prev, z_a, &cfg.dynamics).unwrap(),
        theta_a_hist: vec![theta_a_prev, theta_a],
        cost_breakdown: Default::default(),
    };
    let obs = HumanObservation {
        z_h: ImpedanceState::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0)),
        theta_h: IntentSample::new(theta_h, theta_h + rng.gen_range(-0.05..0.05), 0.1),
    };
    Np1Case {
        state,
        obs,
        eps: rng.gen_range(0.0..0.5),
    }
}

const GRID_HALF_WIDTH: f64 = 1000.0;
const GRID_STEP: f64 = 0.01;

/// Minimum of the one-step cost over the 0.01 grid of actions in
/// `[-1000, 1000]^2`, with negative impedances overwritten by zero.
///
/// Every damping grid value is visited. Along the stiffness axis the torque is
/// an arithmetic sequence (after the clamped prefix, which collapses to
/// `K = 0`) and the cost is piecewise linear in torque, so the row minimum lies
/// at an end of the sequence or at a grid point next to one of the four kinks.
fn np1_brute_force(case: &Np1Case, cfg: &ControllerConfig) -> f64 {
    let p = &cfg.dynamics;
    let sample = case.state.theta_a_sample(cfg.ts).unwrap();
    let rate = (sample.theta - sample.theta_prev) / cfg.ts;
    let theta = sample.theta;
    let tau_h = intent_torque(case.obs.z_h, &case.obs.theta_h);
    let eps = case.eps;
    let cost = |tau_a: f64| ((tau_h + tau_a).abs() - eps).abs() + (tau_h - tau_a).abs();
    let n = (2.0 * GRID_HALF_WIDTH / GRID_STEP).round() as i64;
    let gamma = |i: i64| -GRID_HALF_WIDTH + i as f64 * GRID_STEP;
    let z_k = |i: i64| (p.alpha_tilde.k * case.state.z_a.k + p.beta_tilde.k * gamma(i)).max(0.0);
    let first_positive = (0..=n).find(|&i| z_k(i) > 0.0);
    let kinks = [-tau_h, -tau_h - eps, -tau_h + eps, tau_h];
    (0..=n)
        .into_par_iter()
        .map(|ib| {
            let tb = (p.alpha_tilde.b * case.state.z_a.b + p.beta_tilde.b * gamma(ib)).max(0.0) * rate;
            let mut best = cost(tb + z_k(0) * theta);
            let Some(i0) = first_positive else { return best };
            best = best.min(cost(tb + z_k(n) * theta));
            let step = p.beta_tilde.k * GRID_STEP * theta;
            if step == 0.0 {
                return best.min(cost(tb + z_k(i0) * theta));
            }
            let base = tb + z_k(i0) * theta;
            for kink in kinks {
                let pos = i0 as f64 + (kink - base) / step;
                for i in [
                    pos.floor() as i64 - 1,
                    pos.floor() as i64,
                    pos.ceil() as i64,
                    pos.ceil() as i64 + 1,
                ] {
                    let i = i.clamp(i0, n);
                    best = best.min(cost(tb + z_k(i) * theta));
                }
            }
            best.min(cost(base))
        })
        .reduce(|| f64::INFINITY, f64::min)
}

fn c6_np1_oracle() -> Outcome {
    let cfg = np1_config();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut clamped = 0;
    for _ in 0..100 {
        let case = random_np1_case(&mut rng, &cfg);
        let out = plan(&case.state, &case.obs, &HorizonInputs::constant(case.eps), &cfg).unwrap();
        clamped += (out.diagnostics.clamped_b || out.diagnostics.clamped_k) as usize;
        let tau_h = intent_torque(case.obs.z_h, &case.obs.theta_h);
        let tau_a = intent_torque(out.z_a, &case.state.theta_a_sample(cfg.ts).unwrap());
        let achieved = stage_cost(tau_h, tau_a, case.eps);
        worst = worst.max((achieved - np1_brute_force(&case, &cfg)).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-4 && elapsed < Duration::from_secs(30),
        format!("worst |plan - grid| {worst:.2e}, {clamped} clamped states, {elapsed:.2?}"),
    )
}

fn c7_fig3() -> Outcome {
    let log = run_builtin("fig3_cooperative");
    let rows = &log.rows;
    let mut starts = vec![0usize];
    starts.extend((1..rows.len()).filter(|&i| rows[i].k_h != rows[i - 1].k_h));
    let mut ok = true;
    let mut report = Vec::new();
    for (s, &start) in starts.iter().enumerate() {
        let end = starts.get(s + 1).copied().unwrap_or(rows.len());
        let settled_from = (start..end)
            .find(|&i| (i..end).all(|m| (rows[m].k_a - rows[m].k_h).abs() < 0.05))
            .map(|i| rows[i].t - rows[start].t);
        match settled_from {
            Some(dt) if dt <= 5.0 + 1e-9 => report.push(format!("t={:.1}: {dt:.1}s", rows[start].t)),
            other => {
                ok = false;
                report.push(format!("t={:.1}: {other:?}", rows[start].t));
            }
        }
    }
    outcome(ok, format!("settle after each K_H change: {}", report.join(", ")))
}

fn c8_fig5() -> Outcome {
    let cfg = builtin("fig5_epsilon_sweep").unwrap();
    let runs = run_sweep(&cfg, "controller.epsilon", &[0.05, 0.1, 0.2, 0.4]).unwrap();
    let mut diffs = Vec::new();
    let mut tracking = true;
    let mut report = Vec::new();
    for (eps, _, log) in &runs {
        let m = compute_metrics(log, 0.05).unwrap();
        let within = (m.steady_state_tau_total - eps).abs() <= 0.1 * eps;
        tracking &= within;
        diffs.push(m.steady_state_tau_diff);
        report.push(format!(
            "eps {eps}: |tau_diff| {:.4}, |tau_sum| {:.4}",
            m.steady_state_tau_diff, m.steady_state_tau_total
        ));
    }
    let monotone = diffs.windows(2).all(|w| w[1] >= w[0]);
    outcome(
        monotone && tracking,
        format!(
            "non-decreasing {monotone}, tracks eps {tracking}; {}",
            report.join("; ")
        ),
    )
}

fn c9_fig6() -> Outcome {
    let cfg = builtin("fig6_adaptive_vs_fixed").unwrap();
    let adaptive = run_simulation(&cfg).unwrap();
    let baseline = run_simulation(&fixed(cfg)).unwrap();
    let a = compute_metrics(&adaptive, 0.05).unwrap();
    let f = compute_metrics(&baseline, 0.05).unwrap();
    let pass = f.max_abs_theta_s < 0.02 && a.mean_disagreement < f.mean_disagreement && a.final_abs_theta_s > 0.05;
    outcome(
        pass,
        format!(
            "fixed max|theta_s| {:.2e}; mean |tau_diff| adaptive {:.4} vs fixed {:.4}; adaptive final |theta_s| {:.4}",
            f.max_abs_theta_s, a.mean_disagreement, f.mean_disagreement, a.final_abs_theta_s
        ),
    )
}

fn all_builtin_runs() -> Vec<ScenarioConfig> {
    let mut cfgs = Vec::new();
    for cfg in builtin_scenarios() {
        if let Some(sweep) = &cfg.sweep {
            for v in &sweep.values {
                cfgs.push(cfg.with_override(&sweep.key, &format!("{v:?}")).unwrap());
            }
        }
        cfgs.push(fixed(cfg.clone()));
        cfgs.push(cfg);
    }
    cfgs
}

fn c10_safety() -> Outcome {
    let cfgs = all_builtin_runs();
    let mut min_b = f64::INFINITY;
    let mut min_k = f64::INFINITY;
    let mut finite = true;
    for cfg in &cfgs {
        let log = run_simulation(cfg).unwrap();
        for r in &log.rows {
            min_b = min_b.min(r.b_a);
            min_k = min_k.min(r.k_a);
            finite &= r.theta_s.is_finite();
        }
    }
    outcome(
        min_b >= 0.0 && min_k >= 0.0 && finite,
        format!("{} runs, min B_A {min_b:.3e}, min K_A {min_k:.3e}", cfgs.len()),
    )
}

fn c11_performance() -> Outcome {
    let mut slowest = Duration::ZERO;
    for cfg in builtin_scenarios() {
        let start = Instant::now();
        let log = run_simulation(&cfg).unwrap();
        slowest = slowest.max(start.elapsed());
        assert_eq!(log.rows.len(), 301);
    }
    outcome(
        slowest < Duration::from_secs(1),
        format!("slowest 30 s built-in {slowest:.2?}"),
    )
}

fn c12_determinism() -> Outcome {
    let cfgs = all_builtin_runs();
    let identical = cfgs
        .iter()
        .all(|cfg| to_csv(&run_simulation(cfg).unwrap()) == to_csv(&run_simulation(cfg).unwrap()));
    outcome(
        identical,
        format!("{} runs re-run byte-identically: {identical}", cfgs.len()),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("plant correctness", c1_plant),
        ("static gain", c2_static_gain),
        ("discretization identities", c3_discretization),
        ("prediction oracle", c4_prediction),
        ("pointwise target optimality", c5_pointwise),
        ("Np = 1 controller oracle", c6_np1_oracle),
        ("cooperative impedance matching", c7_fig3),
        ("epsilon sweep", c8_fig5),
        ("adaptive vs fixed", c9_fig6),
        ("non-negative impedance", c10_safety),
        ("performance", c11_performance),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += (!result.pass) as usize;
        println!(
            "criterion {:>2} {:<32} {}  {}",
            i + 1,
            name,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
