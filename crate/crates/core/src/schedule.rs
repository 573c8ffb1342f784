//! Time-indexed signals used by scenarios.
//!
//! In a scenario file a schedule is either a bare number (constant) or a table
//! `{ kind = "step-sequence", points = [[t, v], ...] }` /
//! `{ kind = "sinusoid", amplitude, omega, phase, offset }`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Breakpoints closer than this to `t` count as reached.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub enum Schedule {
    Constant(f64),
    /// Piecewise constant; each value holds from its time (inclusive) to the next.
    Steps(Vec<(f64, f64)>),
    /// `offset + amplitude * sin(omega t + phase)`.
    Sinusoid {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScheduleRepr {
    Number(f64),
    Table(ScheduleTable),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleTable {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<f64>,
}

impl TryFrom<ScheduleRepr> for Schedule {
    type Error = String;

    fn try_from(repr: ScheduleRepr) -> Result<Self, String> {
        match repr {
            ScheduleRepr::Number(v) => Ok(Schedule::Constant(v)),
            ScheduleRepr::Table(t) => match t.kind.as_str() {
                "constant" => match t.points.as_deref() {
                    Some([[_, v]]) => Ok(Schedule::Constant(*v)),
                    _ => Err("constant schedule needs exactly one point".into()),
                },
                "step-sequence" => {
                    let points = t.points.ok_or("step-sequence schedule needs `points`")?;
                    Ok(Schedule::Steps(points.into_iter().map(|[a, b]| (a, b)).collect()))
                }
                "sinusoid" => Ok(Schedule::Sinusoid {
                    offset: t.offset.unwrap_or(0.0),
                    amplitude: t.amplitude.ok_or("sinusoid schedule needs `amplitude`")?,
                    omega: t.omega.ok_or("sinusoid schedule needs `omega`")?,
                    phase: t.phase.unwrap_or(0.0),
                }),
                other => Err(format!(
                    "unknown schedule kind `{other}` (expected constant, step-sequence or sinusoid)"
                )),
            },
        }
    }
}

impl From<Schedule> for ScheduleRepr {
    fn from(s: Schedule) -> Self {
        let empty = ScheduleTable {
            kind: String::new(),
            points: None,
            amplitude: None,
            omega: None,
            phase: None,
            offset: None,
        };
        match s {
            Schedule::Constant(v) => ScheduleRepr::Number(v),
            Schedule::Steps(points) => ScheduleRepr::Table(ScheduleTable {
                kind: "step-sequence".into(),
                points: Some(points.into_iter().map(|(a, b)| [a, b]).collect()),
                ..empty
            }),
            Schedule::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => ScheduleRepr::Table(ScheduleTable {
                kind: "sinusoid".into(),
                amplitude: Some(amplitude),
                omega: Some(omega),
                phase: Some(phase),
                offset: Some(offset),
                ..empty
            }),
        }
    }
}

impl Schedule {
    pub fn validate(&self, what: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(format!("{what}: {msg}")));
        match self {
            Schedule::Constant(v) if !v.is_finite() => bad("value must be finite".into()),
            Schedule::Constant(_) => Ok(()),
            Schedule::Steps(points) => {
                let Some(first) = points.first() else {
                    return bad("step-sequence needs at least one point".into());
                };
                if first.0 != 0.0 {
                    return bad(format!("first breakpoint must be at t=0, got {}", first.0));
                }
                if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return bad("breakpoints must be finite".into());
                }
                if let Some(w) = points.windows(2).find(|w| w[1].0 <= w[0].0) {
                    return bad(format!(
                        "breakpoint times must strictly increase ({} then {})",
                        w[0].0, w[1].0
                    ));
                }
                Ok(())
            }
            Schedule::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => {
                if [offset, amplitude, omega, phase].iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    bad("sinusoid parameters must be finite".into())
                }
            }
        }
    }

    /// Lowest value the schedule can take.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Steps(points) => points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
            Schedule::Sinusoid { offset, amplitude, .. } => offset - amplitude.abs(),
        }
    }

    /// Times at which a step-sequence changes value (including `t = 0`).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Schedule::Steps(points) => points.iter().map(|p| p.0).collect(),
            _ => vec![0.0],
        }
    }

    pub fn sample(&self, t: f64) -> Result<f64> {
        sample_schedule(self, t)
    }

    /// Rate of change at `t` seen over the interval `(t - ts, t]`.
    ///
    /// Zero on constant stretches, analytic for sinusoids, and a backward
    /// difference over one sample when a step lands inside the interval.
    pub fn rate(&self, t: f64, ts: f64) -> Result<f64> {
        match self {
            Schedule::Constant(_) => Ok(0.0),
            Schedule::Sinusoid {
                amplitude,
                omega,
                phase,
                ..
            } => {
                sample_schedule(self, t)?;
                Ok(amplitude * omega * (omega * t + phase).cos())
            }
            Schedule::Steps(points) => {
                let now = sample_schedule(self, t)?;
                let crossed = points
                    .iter()
                    .skip(1)
                    .any(|&(bp, _)| bp <= t + TIME_SLACK && bp > t - ts + TIME_SLACK);
                if !crossed {
                    return Ok(0.0);
                }
                let before = sample_schedule(self, (t - ts).max(0.0))?;
                Ok((now - before) / ts)
            }
        }
    }
}

/// Evaluates a schedule; steps take effect exactly at their breakpoint.
pub fn sample_schedule(s: &Schedule, t: f64) -> Result<f64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::OutOfDomain { t });
    }
    Ok(match s {
        Schedule::Constant(v) => *v,
        Schedule::Steps(points) => points
            .iter()
            .take_while(|(bp, _)| *bp <= t + TIME_SLACK)
            .last()
            .map(|p| p.1)
            .ok_or(Error::OutOfDomain { t })?,
        Schedule::Sinusoid {
            offset,
            amplitude,
            omega,
            phase,
        } => offset + amplitude * (omega * t + phase).sin(),
    })
}
