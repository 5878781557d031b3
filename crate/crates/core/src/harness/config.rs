//! Experiment configuration: one flat record shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::RegionSpec;
use crate::sampler::SamplerSpec;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Oracle,
    Sample,
    Estimate,
    Sweep,
    Surface,
    Unique,
    Usequence,
    Renorm,
    Mixing,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Oracle => "oracle",
            Command::Sample => "sample",
            Command::Estimate => "estimate",
            Command::Sweep => "sweep",
            Command::Surface => "surface",
            Command::Unique => "unique",
            Command::Usequence => "usequence",
            Command::Renorm => "renorm",
            Command::Mixing => "mixing",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Subcommand run at each value.
    pub command: Command,
    /// Numeric field to vary, e.g. `p`, `K`, `L`.
    pub axis: String,
    pub values: Vec<f64>,
}

/// Names accepted as sweep axes.
pub const SWEEP_AXES: &[&str] = &["p", "q", "eps", "beta", "s", "h", "delta", "C", "c0", "d", "L", "N", "M", "K", "ell"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    /// Explicit region for `oracle`, `sample` and `estimate`; otherwise a box
    /// `Λ_L` in dimension `d`.
    pub region: Option<RegionSpec>,
    pub d: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<i32>,
    #[serde(rename = "N")]
    pub n: Option<i32>,
    #[serde(rename = "M")]
    pub m: Option<i32>,
    #[serde(rename = "K")]
    pub k: Option<i32>,
    pub delta: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub ell: Option<i32>,
    pub c0: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub eps: Option<Vec<f64>>,
    pub beta: Option<f64>,
    /// Finite-difference step for the exact derivative check.
    pub h: Option<f64>,
    /// Intensity multiplier on the bottom bonds of `H(K)`.
    pub s: Option<f64>,
    /// `free` or `wired`.
    pub bc: Option<String>,
    /// Which observable a subcommand computes; see the README per command.
    pub event: Option<String>,
    pub targets: Option<Vec<Vec<i32>>>,
    pub sampler: SamplerSpec,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub dump_samples: bool,
    pub sweep: Option<SweepSpec>,
    /// Reference 2D site-percolation threshold printed next to `η` densities.
    pub site_threshold: Option<f64>,
    /// Run directory read by `report`.
    pub run_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Read JSON or TOML, chosen by file extension (`.toml`, anything else is JSON).
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| HarnessError::Config(vec![e.to_string()]))
        } else {
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(vec![e.to_string()]))
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn bc_wired(&self) -> Result<bool, HarnessError> {
        match self.bc.as_deref() {
            None | Some("free") => Ok(false),
            Some("wired") => Ok(true),
            Some(other) => Err(HarnessError::Config(vec![format!("bc: expected free or wired, got {other:?}")])),
        }
    }

    /// Set a numeric field by name; used by `sweep`.
    pub fn set_axis(&mut self, axis: &str, v: f64) -> Result<(), HarnessError> {
        let int = |v: f64| -> Result<i32, HarnessError> {
            if v.fract() == 0.0 {
                Ok(v as i32)
            } else {
                Err(HarnessError::Config(vec![format!("sweep: axis {axis} needs integer values, got {v}")]))
            }
        };
        match axis {
            "p" => self.p = Some(v),
            "q" => self.q = Some(v),
            "eps" => self.eps = Some(vec![v]),
            "beta" => self.beta = Some(v),
            "s" => self.s = Some(v),
            "h" => self.h = Some(v),
            "delta" => self.delta = Some(v),
            "C" => self.c = Some(v),
            "c0" => self.c0 = Some(v),
            "d" => self.d = Some(int(v)? as usize),
            "L" => self.l = Some(int(v)?),
            "N" => self.n = Some(int(v)?),
            "M" => self.m = Some(int(v)?),
            "K" => self.k = Some(int(v)?),
            "ell" => self.ell = Some(int(v)?),
            _ => {
                return Err(HarnessError::Config(vec![format!(
                    "sweep: axis {axis:?} is not numeric; choose one of {SWEEP_AXES:?}"
                )]))
            }
        }
        Ok(())
    }

    /// Offending fields, all at once.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut bad = Vec::new();
        if self.command.is_none() {
            bad.push("command: missing".to_string());
        }
        let prob = |name: &str, v: Option<f64>, bad: &mut Vec<String>| {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    bad.push(format!("{name}: {v} outside [0,1]"));
                }
            }
        };
        prob("p", self.p, &mut bad);
        prob("s", self.s, &mut bad);
        for e in self.eps.iter().flatten() {
            prob("eps", Some(*e), &mut bad);
        }
        if let Some(q) = self.q {
            if !(q >= 1.0 && q.is_finite()) {
                bad.push(format!("q: {q} must be a finite real >= 1"));
            }
        }
        if let Some(d) = self.d {
            if !(2..=crate::geometry::MAX_DIM).contains(&d) {
                bad.push(format!("d: {d} outside 2..={}", crate::geometry::MAX_DIM));
            }
        }
        for (name, v) in [("L", self.l), ("N", self.n), ("M", self.m), ("K", self.k), ("ell", self.ell)] {
            if let Some(v) = v {
                if v < 1 {
                    bad.push(format!("{name}: {v} must be >= 1"));
                }
            }
        }
        for (name, v) in [("delta", self.delta), ("C", self.c), ("c0", self.c0), ("h", self.h)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    bad.push(format!("{name}: {v} must be positive"));
                }
            }
        }
        if let Err(HarnessError::Config(mut e)) = self.bc_wired() {
            bad.append(&mut e);
        }
        if self.sampler.thinning == 0 {
            bad.push("sampler.thinning: must be positive".into());
        }
        if self.sampler.samples == 0 {
            bad.push("sampler.samples: must be positive".into());
        }
        if self.sampler.chains == 0 {
            bad.push("sampler.chains: must be positive".into());
        }
        if self.command == Some(Command::Sweep) {
            match &self.sweep {
                None => bad.push("sweep: missing {command, axis, values}".into()),
                Some(s) => {
                    if !SWEEP_AXES.contains(&s.axis.as_str()) {
                        bad.push(format!("sweep.axis: {:?} is not numeric", s.axis));
                    }
                    if s.values.is_empty() {
                        bad.push("sweep.values: empty".into());
                    }
                    if matches!(s.command, Command::Sweep | Command::Report) {
                        bad.push(format!("sweep.command: cannot sweep {}", s.command.name()));
                    }
                }
            }
        }
        if self.command == Some(Command::Report) && self.run_dir.is_none() {
            bad.push("run_dir: report needs a run directory".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(bad))
        }
    }
}
