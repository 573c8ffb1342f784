//! Scenario descriptions and the built-in studies.
//!
//! Scenarios are TOML documents; see `scenarios/README.md` in this crate for
//! the grammar. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, CostNorm, HorizonTheta};
use crate::error::{Error, Result};
use crate::impedance::{discretize, Diag2, ImpedanceState};
use crate::plant::PlantParams;
use crate::schedule::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeLabel {
    Cooperative,
    NonCooperative,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub ts: f64,
    pub np: usize,
    pub epsilon: Schedule,
    pub adaptive: bool,
    pub alpha_b: f64,
    pub alpha_k: f64,
    pub beta_b: f64,
    pub beta_k: f64,
    #[serde(default)]
    pub horizon_theta: HorizonTheta,
    #[serde(default)]
    pub cost_norm: CostNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanSection {
    pub k_h: Schedule,
    pub b_h: Schedule,
    pub theta_h: Schedule,
}

fn default_b_a0() -> f64 {
    0.01
}

fn default_k_a0() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutomationSection {
    pub theta_a: Schedule,
    /// Initial automation damping.
    #[serde(default = "default_b_a0")]
    pub b_a0: f64,
    /// Initial automation stiffness.
    #[serde(default = "default_k_a0")]
    pub k_a0: f64,
}

/// Parameter sweep attached to a scenario (`sweep` command default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub key: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub duration: f64,
    pub mode_label: ModeLabel,
    pub seed: u64,
    /// Standard deviation of additive noise on the measured human intent, rad.
    #[serde(default)]
    pub measurement_noise: f64,
    pub tau_v: Schedule,
    pub plant: PlantParams,
    pub controller: ControllerSection,
    pub human: HumanSection,
    pub automation: AutomationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl ScenarioConfig {
    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("custom")
    }

    pub fn initial_automation_impedance(&self) -> ImpedanceState {
        ImpedanceState::new(self.automation.b_a0, self.automation.k_a0)
    }

    pub fn controller_config(&self) -> Result<ControllerConfig> {
        let c = &self.controller;
        let dynamics = discretize(Diag2::new(c.alpha_b, c.alpha_k), Diag2::new(c.beta_b, c.beta_k), c.ts)
            .map_err(|e| Error::Validation(e.to_string()))?;
        let cfg = ControllerConfig {
            ts: c.ts,
            np: c.np,
            dynamics,
            adaptive: c.adaptive,
            horizon_theta: c.horizon_theta,
            cost_norm: c.cost_norm,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of controller ticks after `t = 0`.
    pub fn tick_count(&self) -> usize {
        (self.duration / self.controller.ts + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::Validation(m.to_string()));
        if !self.duration.is_finite() || self.duration <= 0.0 {
            return invalid("duration must be positive");
        }
        self.plant.validate()?;
        let c = &self.controller;
        if !c.ts.is_finite() || c.ts <= 0.0 {
            return invalid("controller.ts must be positive");
        }
        if c.np < 1 {
            return invalid("controller.np must be at least 1");
        }
        if self.duration < c.ts {
            return invalid("duration must cover at least one controller tick");
        }
        let cfg = self.controller_config()?;
        if cfg.dynamics.beta_tilde.b == 0.0 || cfg.dynamics.beta_tilde.k == 0.0 {
            return invalid("controller.beta_b and controller.beta_k must be non-zero");
        }
        for (what, s) in [
            ("controller.epsilon", &c.epsilon),
            ("human.k_h", &self.human.k_h),
            ("human.b_h", &self.human.b_h),
            ("human.theta_h", &self.human.theta_h),
            ("automation.theta_a", &self.automation.theta_a),
            ("tau_v", &self.tau_v),
        ] {
            s.validate(what)?;
        }
        for (what, s) in [
            ("controller.epsilon", &c.epsilon),
            ("human.k_h", &self.human.k_h),
            ("human.b_h", &self.human.b_h),
        ] {
            if s.lower_bound() < 0.0 {
                return Err(Error::Validation(format!("{what} must be non-negative")));
            }
        }
        let z0 = self.initial_automation_impedance();
        if !z0.is_finite() || !z0.is_non_negative() {
            return invalid("automation.b_a0 and automation.k_a0 must be non-negative");
        }
        if self.measurement_noise.is_nan() || self.measurement_noise < 0.0 {
            return invalid("measurement_noise must be non-negative");
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return invalid("sweep.values must not be empty");
            }
            if sweep.values.iter().any(|v| !v.is_finite()) {
                return invalid("sweep.values must be finite");
            }
        }
        Ok(())
    }

    /// Applies a `dotted.key=value` override and re-validates.
    pub fn with_override(&self, key: &str, raw: &str) -> Result<ScenarioConfig> {
        let mut tree = toml::Value::try_from(self).map_err(|e| Error::Validation(e.to_string()))?;
        let value = parse_literal(raw);
        let mut node = &mut tree;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Validation(format!("`{key}` does not name a table entry")))?;
            if i + 1 == parts.len() {
                if !table.contains_key(*part) && !OPTIONAL_KEYS.contains(&key) {
                    return Err(Error::Validation(format!("unknown key `{key}`")));
                }
                table.insert(part.to_string(), value);
                break;
            }
            node = table
                .get_mut(*part)
                .ok_or_else(|| Error::Validation(format!("unknown key `{key}`")))?;
        }
        let cfg: ScenarioConfig = tree
            .try_into()
            .map_err(|e: toml::de::Error| Error::Validation(format!("override `{key}={raw}`: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical serialisation.
    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serialize_scenario(self);
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

const OPTIONAL_KEYS: &[&str] = &["name"];

fn parse_literal(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Probe {
        v: toml::Value,
    }
    toml::from_str::<Probe>(&format!("v = {raw}"))
        .map(|p| p.v)
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()))
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let location = e.span().map_or_else(
            || "document".to_string(),
            |s| {
                let (l, c) = line_col(text, s.start);
                format!("line {l}, column {c}")
            },
        );
        Error::Parse {
            location,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn serialize_scenario(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("scenario config always serialises")
}

const BUILTIN_SOURCES: &[(&str, &str)] = &[
    ("fig3_cooperative", include_str!("../scenarios/fig3_cooperative.toml")),
    (
        "fig4_noncooperative",
        include_str!("../scenarios/fig4_noncooperative.toml"),
    ),
    (
        "fig5_epsilon_sweep",
        include_str!("../scenarios/fig5_epsilon_sweep.toml"),
    ),
    (
        "fig6_adaptive_vs_fixed",
        include_str!("../scenarios/fig6_adaptive_vs_fixed.toml"),
    ),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN_SOURCES.iter().map(|(n, _)| *n).collect()
}

/// Source text of a built-in scenario.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN_SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    builtin_source(name).map(|s| parse_scenario(s).expect("built-in scenarios are valid"))
}

pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    builtin_names().into_iter().filter_map(builtin).collect()
}

/// Intent angles and impedance of the scripted human at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanState {
    pub theta_h: f64,
    pub dtheta_h: f64,
    pub z_h: ImpedanceState,
}

pub fn human_state(cfg: &ScenarioConfig, t: f64) -> Result<HumanState> {
    if t > cfg.duration + 1e-9 {
        return Err(Error::OutOfDomain { t });
    }
    let h = &cfg.human;
    Ok(HumanState {
        theta_h: h.theta_h.sample(t)?,
        dtheta_h: h.theta_h.rate(t, cfg.controller.ts)?,
        z_h: ImpedanceState::new(h.b_h.sample(t)?, h.k_h.sample(t)?),
    })
}
