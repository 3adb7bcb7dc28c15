//! Experiment runner behind the `blab` binary.
//!
//! A run reads one JSON config, applies flag overrides, computes one row per
//! `N` and writes `<experiment>.csv`, `<experiment>.json` and optionally
//! `<experiment>.svg` into the output directory.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;

pub use config::ExperimentConfig;
pub use experiments::{run, Experiment, Outcome, EXPERIMENTS};

/// Overrides collected from the command line.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub ns: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub degrees: Option<Vec<i32>>,
    pub svg: bool,
    /// Generic `path=value` pairs, applied last.
    pub set: Vec<(String, Value)>,
}

pub fn load_config(path: &Path, ov: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut raw: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(out) = &ov.out {
        config::set_path(&mut raw, "out", Value::String(out.display().to_string()))?;
    }
    if let Some(ns) = &ov.ns {
        config::set_path(&mut raw, "Ns", serde_json::to_value(ns)?)?;
    }
    if let Some(seed) = ov.seed {
        config::set_path(&mut raw, "seed", seed.into())?;
    }
    if let Some(d) = &ov.degrees {
        config::set_path(&mut raw, "bundle.degrees", serde_json::to_value(d)?)?;
        // A stale label or potential would describe a different bundle.
        if let Some(Value::Object(b)) = raw.get_mut("bundle") {
            b.remove("label");
            b.remove("potential");
        }
    }
    if ov.svg {
        config::set_path(&mut raw, "svg", true.into())?;
    }
    for (k, v) in &ov.set {
        config::set_path(&mut raw, k, v.clone())?;
    }
    let cfg: ExperimentConfig = serde_json::from_value(raw).context("invalid config")?;
    cfg.validate()?;
    Ok(cfg)
}

/// Run one config and write its artifacts. Returns the outcome and the JSON summary.
pub fn execute(cfg: &ExperimentConfig) -> Result<(Outcome, Value, output::Artifacts)> {
    let o = run(cfg)?;
    let summary = experiments::summary(cfg, &o);
    let name = experiments::descriptor(cfg.experiment).name;
    let artifacts = output::write_all(&cfg.out, name, &o, &summary, cfg.svg)?;
    Ok((o, summary, artifacts))
}

/// Column documentation for `--help`.
pub fn columns_help() -> String {
    let mut s = String::from("Experiments and their CSV columns (every CSV starts with N):\n");
    for d in EXPERIMENTS {
        s.push_str(&format!("\n  {}: {}\n", d.name, d.about));
        for (c, doc) in d.columns {
            s.push_str(&format!("      {c:<20} {doc}\n"));
        }
    }
    s
}
