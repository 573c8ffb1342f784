use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use hsc_core::export::{format_sig9, parse_csv, to_csv, to_json, LogMeta};
use hsc_core::sim::SETTLE_TOLERANCE;
use hsc_core::{
    builtin, builtin_names, compare_runs, compute_metrics, parse_scenario, run_simulation, run_sweep, Error,
    ScenarioConfig, SimLog,
};

use crate::svg::{render, Panel};

pub struct Context {
    pub out: PathBuf,
    pub overrides: Vec<String>,
    pub quiet: bool,
}

/// Error category carrying the process exit code.
#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Validation(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Parse(m) | Failure::Validation(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

impl Failure {
    /// 1 for unreadable or malformed input, 2 for invalid values, 3 otherwise.
    pub fn classify(err: &anyhow::Error) -> u8 {
        for cause in err.chain() {
            if let Some(f) = cause.downcast_ref::<Failure>() {
                return match f {
                    Failure::Parse(_) => 1,
                    Failure::Validation(_) => 2,
                };
            }
            if let Some(e) = cause.downcast_ref::<Error>() {
                return match e {
                    Error::Parse { .. } | Error::UnknownColumn(_) => 1,
                    Error::Validation(_) | Error::EmptyLog => 2,
                    _ => 3,
                };
            }
        }
        3
    }
}

impl Context {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Resolves a built-in name or a scenario file and applies `--set` overrides.
fn load(source: &str, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut cfg = match builtin(source) {
        Some(cfg) => cfg,
        None => {
            let path = Path::new(source);
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::Parse(format!(
                    "`{source}` is neither a built-in scenario ({}) nor a readable file: {e}",
                    builtin_names().join(", ")
                ))
            })?;
            let mut cfg = parse_scenario(&text).with_context(|| format!("in {}", path.display()))?;
            if cfg.name.is_none() {
                cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            }
            cfg
        }
    };
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::Parse(format!("override `{item}` is not of the form key=value")))?;
        cfg = cfg.with_override(key.trim(), value.trim())?;
    }
    Ok(cfg)
}

/// Writes the CSV, JSON and metrics files of one run under `stem`.
fn write_run(ctx: &Context, stem: &str, cfg: &ScenarioConfig, log: &SimLog, overrides: &[String]) -> Result<()> {
    let metrics = compute_metrics(log, SETTLE_TOLERANCE)?;
    ctx.write(&format!("{stem}.csv"), &to_csv(log))?;
    ctx.write(&format!("{stem}.json"), &to_json(log, &LogMeta::new(cfg, overrides)))?;
    ctx.write(
        &format!("{stem}.metrics.json"),
        &(serde_json::to_string_pretty(&metrics)? + "\n"),
    )?;
    ctx.say(format!(
        "{stem}: {} steps, steady |tau_diff| {}, max |theta_s| {}",
        log.rows.len(),
        format_sig9(metrics.steady_state_tau_diff),
        format_sig9(metrics.max_abs_theta_s)
    ));
    Ok(())
}

pub fn run(ctx: &Context, scenario: &str) -> Result<()> {
    let cfg = load(scenario, &ctx.overrides)?;
    let log = run_simulation(&cfg)?;
    write_run(ctx, cfg.name(), &cfg, &log, &ctx.overrides)
}

fn parse_values(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Failure::Parse(format!("sweep value `{s}` is not a number")).into())
        })
        .collect()
}

pub fn sweep(ctx: &Context, scenario: &str, key: &str, values: Option<&str>) -> Result<()> {
    let cfg = load(scenario, &ctx.overrides)?;
    let values = match values {
        Some(raw) => parse_values(raw)?,
        None => cfg
            .sweep
            .as_ref()
            .filter(|s| s.key == key)
            .map(|s| s.values.clone())
            .unwrap_or_default(),
    };
    if values.is_empty() {
        return Err(Failure::Validation(format!("no values to sweep `{key}` over")).into());
    }
    let runs = run_sweep(&cfg, key, &values)?;
    let label = key.rsplit('.').next().unwrap_or(key);
    let mut summary = String::from("value,steady_state_tau_diff,max_abs_theta_s\n");
    for (value, run_cfg, log) in &runs {
        let mut overrides = ctx.overrides.clone();
        overrides.push(format!("{key}={value:?}"));
        write_run(
            ctx,
            &format!("{}_{label}_{value:?}", cfg.name()),
            run_cfg,
            log,
            &overrides,
        )?;
        let m = compute_metrics(log, SETTLE_TOLERANCE)?;
        summary.push_str(&format!(
            "{},{},{}\n",
            format_sig9(*value),
            format_sig9(m.steady_state_tau_diff),
            format_sig9(m.max_abs_theta_s)
        ));
    }
    let path = ctx.write(&format!("{}_sweep.csv", cfg.name()), &summary)?;
    ctx.say(format!("summary: {}", path.display()));
    Ok(())
}

pub fn compare(ctx: &Context, scenario: &str, baseline: Option<&str>) -> Result<()> {
    let base = load(scenario, &ctx.overrides)?;
    let mut adaptive = base.clone();
    adaptive.controller.adaptive = true;
    let other = match baseline {
        Some(source) => load(source, &ctx.overrides)?,
        None => {
            let mut fixed = base.clone();
            fixed.controller.adaptive = false;
            fixed
        }
    };
    let a_log = run_simulation(&adaptive)?;
    let f_log = run_simulation(&other)?;
    let report = compare_runs(&a_log, &f_log)?;
    write_run(
        ctx,
        &format!("{}_adaptive", base.name()),
        &adaptive,
        &a_log,
        &ctx.overrides,
    )?;
    let second = match baseline {
        Some(_) => format!("{}_baseline", other.name()),
        None => format!("{}_fixed", base.name()),
    };
    write_run(ctx, &second, &other, &f_log, &ctx.overrides)?;
    ctx.write("comparison.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    if report.identical_modes {
        eprintln!("warning: both runs use the same controller mode");
    }
    ctx.say(format!(
        "disagreement ratio (adaptive / baseline): {}",
        report
            .disagreement_ratio
            .map_or_else(|| "undefined".to_string(), format_sig9)
    ));
    Ok(())
}

pub fn plot(ctx: &Context, log: &Path, panels: &[String], output: Option<&str>, title: Option<&str>) -> Result<()> {
    let text =
        fs::read_to_string(log).map_err(|e| Failure::Parse(format!("cannot read log {}: {e}", log.display())))?;
    let table = parse_csv(&text).with_context(|| format!("in {}", log.display()))?;
    let t = table.column("t")?;
    let panels = panels
        .iter()
        .map(|source| {
            let columns: Vec<String> = source
                .split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect();
            let series = columns
                .iter()
                .map(|c| table.column(c).map(|v| (c.clone(), v)))
                .collect::<hsc_core::Result<Vec<_>>>()?;
            Ok(Panel { series })
        })
        .collect::<Result<Vec<_>>>()?;
    if t.is_empty() {
        return Err(Error::EmptyLog.into());
    }
    let stem = log
        .file_stem()
        .map_or("plot".into(), |s| s.to_string_lossy().into_owned());
    let name = output.map_or_else(|| format!("{stem}.svg"), str::to_string);
    let title = title.map_or_else(|| stem.clone(), str::to_string);
    let path = ctx.write(&name, &render(&title, &t, &panels))?;
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

pub fn list(ctx: &Context) -> Result<()> {
    for name in builtin_names() {
        let cfg = builtin(name).expect("listed built-in exists");
        let mode = serde_json::to_value(cfg.mode_label)?;
        ctx.say(format!(
            "{name}  ({}, {} s, adaptive = {})",
            mode.as_str().unwrap_or_default(),
            cfg.duration,
            cfg.controller.adaptive
        ));
    }
    Ok(())
}
