//! Experiment orchestration behind the `fklab` binary.
//!
//! [`execute`] runs a config in memory; [`run`] also writes a run directory:
//!
//! ```text
//! <out_dir>/<command>-<timestamp>-<hash8>/
//!     MANIFEST       status line, then "<sha256>  <file>" per artifact
//!     config.json    the exact config, seed resolved
//!     results.csv    fixed schema, see output::CSV_COLUMNS
//!     samples.jsonl  oracle records, or sample dumps when dump_samples is set
//!     plot.svg
//!     run.json       RunRecord
//! ```

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

pub use config::{Command, ExperimentConfig, SweepSpec};
use output::Point;

use crate::bonds::{label_clusters, BoundarySpec};
use crate::events::{self, default_ell};
use crate::geometry::{Region, RegionSpec};
use crate::oracle::{self, FkParams};
use crate::renorm;
use crate::sampler::run_chains;
use crate::stats::{EstimatorResult, ParamRecord};
use crate::{ising, Error};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for an exceeded enumeration cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(Error::CapExceeded { .. }) => 3,
            HarnessError::Config(_) | HarnessError::Core(_) => 2,
            HarnessError::Io(_) => 1,
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_BOUND: i32 = 4;

/// What a command produced, before persistence.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<EstimatorResult>,
    pub samples: Vec<serde_json::Value>,
    pub plot: Option<String>,
    /// Human-readable lines printed after the table.
    pub notes: Vec<String>,
}

impl RunOutput {
    pub fn csv(&self) -> String {
        output::results_csv(&self.rows)
    }

    pub fn has_bound(&self) -> bool {
        self.rows.iter().any(EstimatorResult::is_bound)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub started: String,
    pub finished: String,
    pub version: String,
    pub seed: u64,
    pub rows: Vec<EstimatorResult>,
    pub run_dir: Option<PathBuf>,
}

fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn sha_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Run and persist. The run directory exists before the computation starts so
/// a crash leaves a MANIFEST marked incomplete.
pub fn run(config: &ExperimentConfig) -> Result<(RunRecord, RunOutput), HarnessError> {
    let mut cfg = config.clone();
    cfg.seed = Some(cfg.seed());
    cfg.validate()?;
    let hash = config_hash(&cfg);
    let started = chrono::Utc::now();
    let dir = match &cfg.out_dir {
        Some(base) => {
            let name = format!(
                "{}-{}-{}",
                cfg.command.expect("validated").name(),
                started.format("%Y%m%dT%H%M%S%.3f"),
                &hash[..8]
            );
            let dir = base.join(name);
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("MANIFEST"), "status: incomplete\n")?;
            std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&cfg).expect("serializes") + "\n")?;
            Some(dir)
        }
        None => None,
    };
    let out = execute(&cfg)?;
    let record = RunRecord {
        config_hash: hash,
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed(),
        rows: out.rows.clone(),
        run_dir: dir.clone(),
    };
    if let Some(dir) = &dir {
        let mut files = vec!["config.json", "results.csv"];
        std::fs::write(dir.join("results.csv"), out.csv())?;
        let always = cfg.command == Some(Command::Oracle);
        if (cfg.dump_samples || always) && !out.samples.is_empty() {
            std::fs::write(dir.join("samples.jsonl"), output::jsonl(&out.samples))?;
            files.push("samples.jsonl");
        }
        if let Some(svg) = &out.plot {
            std::fs::write(dir.join("plot.svg"), svg)?;
            files.push("plot.svg");
        }
        std::fs::write(dir.join("run.json"), serde_json::to_string_pretty(&record).expect("serializes") + "\n")?;
        files.push("run.json");
        let mut manifest = String::from("status: complete\n");
        for f in files {
            manifest.push_str(&format!("{}  {f}\n", sha_file(&dir.join(f))?));
        }
        std::fs::write(dir.join("MANIFEST"), manifest)?;
    }
    Ok((record, out))
}

/// Run a validated config in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let mut out = match cfg.command.expect("validated") {
        Command::Oracle => cmd_oracle(cfg)?,
        Command::Sample => cmd_sample(cfg)?,
        Command::Estimate => cmd_estimate(cfg)?,
        Command::Sweep => cmd_sweep(cfg)?,
        Command::Surface => cmd_surface(cfg)?,
        Command::Unique => cmd_unique(cfg, false)?,
        Command::Usequence => cmd_unique(cfg, true)?,
        Command::Renorm => cmd_renorm(cfg)?,
        Command::Mixing => cmd_mixing(cfg)?,
        Command::Report => {
            let dir = cfg.run_dir.as_ref().expect("validated");
            return report(dir);
        }
    };
    if out.plot.is_none() && !out.rows.is_empty() {
        let pts: Vec<Point> =
            out.rows.iter().enumerate().map(|(i, r)| Point { x: i as f64, y: r.estimate, se: r.stderr }).collect();
        out.plot = Some(output::svg_curve(cfg.command.expect("validated").name(), "row", "estimate", &pts));
    }
    Ok(out)
}

fn need<T: Copy>(v: Option<T>, default: T) -> T {
    v.unwrap_or(default)
}

fn fk_params(cfg: &ExperimentConfig, p: f64, q: f64) -> Result<FkParams, HarnessError> {
    Ok(FkParams::new(need(cfg.p, p), need(cfg.q, q))?)
}

/// Explicit `region`, else `Λ_L` in dimension `d`.
fn region_of(cfg: &ExperimentConfig, d: usize, l: i32) -> Result<Region, HarnessError> {
    let spec = match &cfg.region {
        Some(r) => r.clone(),
        None => RegionSpec::boxed(need(cfg.d, d), need(cfg.l, l)),
    };
    Ok(spec.build()?)
}

fn bc_of(cfg: &ExperimentConfig, region: &Region) -> Result<BoundarySpec, HarnessError> {
    Ok(if cfg.bc_wired()? { BoundarySpec::wired(region) } else { BoundarySpec::free() })
}

fn base_record(cfg: &ExperimentConfig, region: &Region, params: &FkParams) -> ParamRecord {
    ParamRecord {
        d: Some(region.dim()),
        q: Some(params.q),
        p: Some(params.p),
        bc: cfg.bc.clone().or(Some("free".into())),
        seed: Some(cfg.seed()),
        ..Default::default()
    }
}

fn vertices(region: &Region, pts: &[Vec<i32>]) -> Result<Vec<u32>, HarnessError> {
    pts.iter()
        .map(|x| {
            region.vertex_at(x).ok_or_else(|| HarnessError::Config(vec![format!("targets: {x:?} is not a region vertex")]))
        })
        .collect()
}

/// `targets` as a pair of vertices, defaulting to the origin and the corner
/// `(L,…,L)` of a box.
fn target_pair(cfg: &ExperimentConfig, region: &Region) -> Result<(u32, u32), HarnessError> {
    let pts = match &cfg.targets {
        Some(t) if t.len() == 2 => t.clone(),
        Some(t) => return Err(HarnessError::Config(vec![format!("targets: need two points, got {}", t.len())])),
        None => {
            let (lo, hi) = match region.bounds() {
                Some(b) => (b.iter().map(|&(l, h)| (l + h) / 2).collect(), b.iter().map(|&(_, h)| h).collect()),
                None => {
                    let first = region.coords(0).to_vec();
                    let last = region.coords(region.n_vertices() as u32 - 1).to_vec();
                    (first, last)
                }
            };
            vec![lo, hi]
        }
    };
    let v = vertices(region, &pts)?;
    Ok((v[0], v[1]))
}

fn cmd_oracle(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let region = match &cfg.region {
        Some(r) => r.build()?,
        None if cfg.l.is_some() => region_of(cfg, 2, 1)?,
        None => RegionSpec::single_edge().build()?,
    };
    let params = fk_params(cfg, 0.5, 2.0)?;
    let bc = bc_of(cfg, &region)?;
    let rec = base_record(cfg, &region, &params);
    let exact = |name: String, v: f64| EstimatorResult::new(name, rec.clone(), 0, v, 0.0);
    let mut rows = Vec::new();
    let event = cfg.event.as_deref().unwrap_or("edges");
    match event {
        "edges" => {
            let res = oracle::fk_enumerate(&region, &bc, &params, None, &[])?;
            for (e, m) in res.edge.iter().enumerate() {
                rows.push(exact(format!("edge_marginal_{e}"), *m));
            }
            rows.push(exact("partition_function".into(), res.z));
        }
        "connection" => {
            let (a, b) = target_pair(cfg, &region)?;
            rows.push(exact("connection".into(), oracle::fk_connection_prob(&region, &bc, &params, &[a], &[b])?));
        }
        "derivative" => {
            let rep = ising::surface_tension_derivative_check(
                need(cfg.d, 2),
                need(cfg.l, 1),
                need(cfg.m, 1),
                need(cfg.beta, 0.4),
                need(cfg.h, 1e-4),
            )?;
            let r = ParamRecord { d: Some(need(cfg.d, 2)), l: cfg.l.or(Some(1)).map(i64::from), m: cfg.m.or(Some(1)).map(i64::from), ..Default::default() };
            rows.push(EstimatorResult::new("tau_derivative_fd", r.clone(), 0, rep.finite_difference, 0.0));
            rows.push(EstimatorResult::new("tau_derivative_corr", r.clone(), 0, rep.correlation_sum, 0.0));
            rows.push(EstimatorResult::new("min_summand", r, 0, rep.min_summand, 0.0));
        }
        other => return Err(unknown_event("oracle", other, &["edges", "connection", "derivative"])),
    }
    let samples = rows
        .iter()
        .map(|r| {
            json!({
                "region": region.spec(),
                "bc": rec.bc,
                "params": {"p": params.p, "q": params.q},
                "observable": r.observable,
                "value": r.estimate,
            })
        })
        .collect();
    Ok(RunOutput { rows, samples, ..Default::default() })
}

fn unknown_event(cmd: &str, got: &str, known: &[&str]) -> HarnessError {
    HarnessError::Config(vec![format!("event: {cmd} knows {known:?}, got {got:?}")])
}

fn cmd_sample(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let region = region_of(cfg, 2, 4)?;
    let params = fk_params(cfg, 0.5, 2.0)?;
    let bc = bc_of(cfg, &region)?;
    let dump = cfg.dump_samples;
    let chains = run_chains(&region, &bc, &params, &cfg.sampler, cfg.seed(), |w, ctx| {
        let k = label_clusters(&region, w, &bc).expect("own region").k();
        let line = dump.then(|| json!({"chain": ctx.chain, "index": ctx.index, "sweep": ctx.sweep, "omega": w.to_hex()}));
        (w.count_open() as f64 / region.n_edges() as f64, k as f64, line)
    })?;
    let mut rec = base_record(cfg, &region, &params);
    rec.chains = Some(cfg.sampler.chains);
    let col = |f: fn(&(f64, f64, Option<serde_json::Value>)) -> f64| -> Vec<Vec<f64>> {
        chains.iter().map(|c| c.iter().map(f).collect()).collect()
    };
    let rows = vec![
        EstimatorResult::from_chains("open_fraction", rec.clone(), &col(|s| s.0)),
        EstimatorResult::from_chains("clusters", rec, &col(|s| s.1)),
    ];
    let samples = chains.into_iter().flatten().filter_map(|s| s.2).collect();
    Ok(RunOutput { rows, samples, ..Default::default() })
}

fn cmd_estimate(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let spec = &cfg.sampler;
    let seed = cfg.seed();
    let d = need(cfg.d, 3);
    let delta = need(cfg.delta, 0.5);
    let mut rows = Vec::new();
    match cfg.event.as_deref().unwrap_or("connection") {
        "connection" => {
            let region = region_of(cfg, 2, 4)?;
            let params = fk_params(cfg, 0.5, 2.0)?;
            let bc = bc_of(cfg, &region)?;
            let (a, b) = target_pair(cfg, &region)?;
            let ev = oracle::EventPredicate::connected(vec![a], vec![b]);
            let mut r = events::estimate(&region, &bc, &params, &ev, spec, seed)?;
            r.params.l = cfg.l.map(i64::from);
            rows.push(r);
        }
        "edges" => {
            let region = region_of(cfg, 2, 1)?;
            let params = fk_params(cfg, 0.5, 2.0)?;
            let bc = bc_of(cfg, &region)?;
            let ne = region.n_edges();
            let chains = run_chains(&region, &bc, &params, spec, seed, |w, _| {
                (0..ne as u32).map(|e| f64::from(u8::from(w.get(e)))).collect::<Vec<f64>>()
            })?;
            let mut rec = base_record(cfg, &region, &params);
            rec.chains = Some(spec.chains);
            rec.l = cfg.l.map(i64::from);
            for e in 0..ne {
                let per: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|v| v[e]).collect()).collect();
                rows.push(EstimatorResult::from_chains(format!("edge_marginal_{e}"), rec.clone(), &per));
            }
        }
        "density" => {
            let l = need(cfg.l, 8);
            let ell = cfg.ell.unwrap_or_else(|| default_ell(l as u32, d, need(cfg.c0, 1.0)));
            rows.push(events::density_estimate(d, l, delta, ell, &fk_params(cfg, 0.65, 2.0)?, spec, seed)?);
        }
        "box_connection" => {
            let l = need(cfg.l, 8);
            let ell = cfg.ell.unwrap_or_else(|| default_ell(l as u32, d, need(cfg.c0, 1.0)));
            rows.push(events::box_connection_estimate(d, l, delta, ell, &fk_params(cfg, 0.65, 2.0)?, spec, seed)?);
        }
        "disconnection" => {
            let l = need(cfg.l, 4);
            rows.push(events::disconnection_free(d, l, delta, need(cfg.c, 1.0), &fk_params(cfg, 0.55, 2.0)?, spec, seed)?);
        }
        "slab_connection" => {
            let l = need(cfg.l, 2);
            let n = need(cfg.n, 8);
            let targets = cfg.targets.clone().unwrap_or_else(|| events::slab_far_targets(d, n));
            let eps = cfg.eps.as_ref().and_then(|e| e.first().copied()).unwrap_or(0.0);
            rows.extend(events::slab_connection(d, l, n, &fk_params(cfg, 0.65, 2.0)?, eps, &targets, spec, seed)?);
        }
        other => {
            return Err(unknown_event(
                "estimate",
                other,
                &["connection", "edges", "density", "box_connection", "disconnection", "slab_connection"],
            ))
        }
    }
    Ok(RunOutput { rows, ..Default::default() })
}

fn cmd_surface(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let d = need(cfg.d, 3);
    let l = need(cfg.l, 4);
    let delta = need(cfg.delta, 0.5);
    let p = need(cfg.p, 0.65);
    let mut rows = Vec::new();
    match cfg.event.as_deref().unwrap_or("wired") {
        "wired" => {
            let m = cfg.m.unwrap_or_else(|| ((delta * l as f64).floor() as i32).max(1));
            rows.push(ising::wired_surface_tension_estimate(d, l, m, p, &cfg.sampler, cfg.seed())?);
        }
        "free" => {
            let params = FkParams::new(p, need(cfg.q, 2.0))?;
            rows.push(events::disconnection_free(d, l, delta, need(cfg.c, 1.0), &params, &cfg.sampler, cfg.seed())?);
        }
        other => return Err(unknown_event("surface", other, &["wired", "free"])),
    }
    Ok(RunOutput { rows, ..Default::default() })
}

fn cmd_unique(cfg: &ExperimentConfig, sequence: bool) -> Result<RunOutput, HarnessError> {
    let d = need(cfg.d, 3);
    let l = need(cfg.l, 32);
    let delta = need(cfg.delta, 0.5);
    let params = fk_params(cfg, 0.65, 2.0)?;
    let eps = cfg.eps.clone().unwrap_or_else(|| vec![0.0, 0.01, 0.05]);
    let rep = events::sprinkling_study(d, l, delta, &params, cfg.bc_wired()?, &eps, &cfg.sampler, cfg.seed())?;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    if sequence {
        let rec = rep.unique[0].params.clone();
        for (j, &e) in eps.iter().enumerate() {
            for (i, &m) in rep.u_mean[j].iter().enumerate() {
                let mut r = rec.clone();
                r.eps = Some(e);
                rows.push(
                    EstimatorResult::new(format!("U_{i}"), r, rep.total_samples / eps.len() as u64, m, f64::NAN)
                        .with_derived("radius", rep.radii[i] as f64, 0.0),
                );
            }
            for (i, &h) in rep.halving[j].iter().enumerate() {
                let mut r = rec.clone();
                r.eps = Some(e);
                rows.push(EstimatorResult::new(format!("halving_fail_{i}"), r, rep.total_samples / eps.len() as u64, h, 0.0));
            }
        }
        let frac = rep.monotone_samples as f64 / rep.total_samples.max(1) as f64;
        rows.push(EstimatorResult::new("u_monotone_fraction", rec, rep.total_samples, frac, 0.0));
        if rep.halving.iter().all(Vec::is_empty) {
            notes.push(format!("halving diagnostic needs more than 8 annuli; this run has {}", rep.radii.len()));
        }
        rows.iter_mut().for_each(|r| {
            if r.stderr.is_nan() {
                r.stderr = 0.0;
            }
        });
    } else {
        rows.extend(rep.unique.iter().cloned());
        rows.extend(rep.final_u_one.iter().cloned());
    }
    Ok(RunOutput { rows, notes, ..Default::default() })
}

fn cmd_renorm(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let d = need(cfg.d, 3);
    let l = need(cfg.l, 8);
    let n = need(cfg.n, 32);
    let delta = need(cfg.delta, 1.0);
    let eps = cfg.eps.as_ref().and_then(|e| e.first().copied()).unwrap_or(0.05);
    let params = fk_params(cfg, 0.65, 2.0)?;
    let targets = cfg.targets.clone().unwrap_or_else(|| events::slab_far_targets(d, n));
    let rep = renorm::renorm_pipeline(d, l, n, &params, eps, delta, &targets, &cfg.sampler, cfg.seed())?;
    let rec = rep.eta_density.params.clone();
    let total = rep.eta_density.samples;
    let mut rows = vec![rep.eta_density.clone()];
    if let (Some(a), Some(se)) = (rep.stats.alpha_hat, rep.stats.alpha_stderr) {
        rows.push(EstimatorResult::new("alpha_hat", rec.clone(), total, a, se).with_derived(
            "site_threshold",
            need(cfg.site_threshold, 0.593),
            0.0,
        ));
    }
    let far = [rep.sites.n, rep.sites.n];
    let i = rep.sites.index(far).expect("corner site");
    rows.push(EstimatorResult::new(format!("eta_connection_{:?}", far), rec.clone(), total, rep.eta_connection[i], 0.0));
    rows.extend(rep.direct.iter().cloned());
    rows.push(EstimatorResult::new("witness_violations", rec.clone(), rep.witness.checked, rep.witness.violations as f64, 0.0));
    rows.push(EstimatorResult::new("flip_violations", rec.clone(), rep.flips.flips, rep.flips.violations as f64, 0.0));
    rows.push(EstimatorResult::new("full_box_gamma", rec, total, rep.full_box_gamma, 0.0));
    let samples = if cfg.dump_samples {
        rep.fields.iter().map(|f| json!({"sample": f.sample, "n": f.n, "rows": f.rle_rows()})).collect()
    } else {
        Vec::new()
    };
    let notes = vec![format!(
        "conditioning classes kept {}, skipped {} (fewer than {} observations)",
        rep.stats.classes.len(),
        rep.stats.skipped_classes,
        renorm::MIN_CLASS_COUNT
    )];
    Ok(RunOutput { rows, samples, notes, ..Default::default() })
}

fn cmd_mixing(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let r = ising::weak_mixing_gap(
        need(cfg.d, 3),
        need(cfg.k, 4),
        need(cfg.s, 0.5),
        need(cfg.p, 0.65),
        &cfg.sampler,
        cfg.seed(),
    )?;
    Ok(RunOutput { rows: vec![r], ..Default::default() })
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let sw = cfg.sweep.as_ref().expect("validated");
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    let mut pts = Vec::new();
    for &v in &sw.values {
        let mut inner = cfg.clone();
        inner.command = Some(sw.command);
        inner.sweep = None;
        inner.out_dir = None;
        inner.set_axis(&sw.axis, v)?;
        let out = execute(&inner)?;
        if let Some(first) = out.rows.first() {
            pts.push(Point { x: v, y: first.estimate, se: first.stderr });
        }
        notes.extend(out.notes);
        rows.extend(out.rows);
    }
    let label = rows.first().map(|r| r.observable.clone()).unwrap_or_default();
    let plot = output::svg_curve(&format!("{} vs {}", label, sw.axis), &sw.axis, &label, &pts);
    Ok(RunOutput { rows, plot: Some(plot), notes, ..Default::default() })
}

/// Summarize an existing run directory and redraw its plot.
pub fn report(dir: &Path) -> Result<RunOutput, HarnessError> {
    let text = std::fs::read_to_string(dir.join("results.csv"))?;
    let rows = output::parse_results_csv(&text).map_err(|e| HarnessError::Config(vec![format!("results.csv: {e}")]))?;
    let manifest = std::fs::read_to_string(dir.join("MANIFEST")).unwrap_or_default();
    let mut notes = vec![manifest.lines().next().unwrap_or("status: missing MANIFEST").to_string()];
    for line in manifest.lines().skip(1) {
        if let Some((sum, file)) = line.split_once("  ") {
            let ok = sha_file(&dir.join(file)).map(|s| s == sum).unwrap_or(false);
            if !ok && file != "plot.svg" {
                notes.push(format!("checksum mismatch: {file}"));
            }
        }
    }
    let pts: Vec<Point> = rows.iter().enumerate().map(|(i, r)| Point { x: i as f64, y: r.estimate, se: r.stderr }).collect();
    let plot = output::svg_curve("report", "row", "estimate", &pts);
    Ok(RunOutput { rows, plot: Some(plot), notes, ..Default::default() })
}

/// Aligned text table of `experiment, estimate, stderr, derived, flag`.
pub fn format_table(rows: &[EstimatorResult]) -> String {
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.observable.clone(),
                format!("{:.6}", r.estimate),
                format!("{:.2e}", r.stderr),
                r.derived.as_ref().map(|d| format!("{}={:.6}", d.name, d.value)).unwrap_or_default(),
                r.flag.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let head = ["experiment", "estimate", "stderr", "derived", "flag"].map(str::to_string);
    let mut w = [0usize; 5];
    for c in std::iter::once(&head).chain(&cells) {
        for (k, s) in c.iter().enumerate() {
            w[k] = w[k].max(s.chars().count());
        }
    }
    let mut s = String::new();
    for c in std::iter::once(&head).chain(&cells) {
        let line: Vec<String> = c.iter().enumerate().map(|(k, x)| format!("{x:<width$}", width = w[k])).collect();
        s.push_str(line.join("  ").trim_end());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(cmd: Command) -> ExperimentConfig {
        ExperimentConfig { command: Some(cmd), ..Default::default() }
    }

    #[test]
    fn oracle_single_edge_row() {
        let mut c = cfg(Command::Oracle);
        c.p = Some(0.5);
        c.q = Some(2.0);
        let out = execute(&c).unwrap();
        assert!((out.rows[0].estimate - 1.0 / 3.0).abs() < 1e-15);
        assert!(out.csv().lines().nth(1).unwrap().starts_with("edge_marginal_0,"));
    }

    #[test]
    fn validation_lists_every_field() {
        let mut c = cfg(Command::Estimate);
        c.p = Some(1.5);
        c.l = Some(0);
        c.bc = Some("periodic".into());
        let HarnessError::Config(fields) = execute(&c).unwrap_err() else { panic!() };
        assert_eq!(fields.len(), 3, "{fields:?}");
        assert_eq!(HarnessError::Config(fields).exit_code(), 2);
    }

    #[test]
    fn cap_exceeded_maps_to_three() {
        let mut c = cfg(Command::Oracle);
        c.region = Some(RegionSpec::boxed(2, 2));
        assert_eq!(execute(&c).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn worker_count_does_not_change_csv() {
        let mut c = cfg(Command::Estimate);
        c.d = Some(2);
        c.l = Some(2);
        c.sampler.samples = 200;
        c.sampler.burn_in = 10;
        c.sampler.thinning = 1;
        c.sampler.chains = 4;
        c.sampler.threads = 1;
        let a = execute(&c).unwrap().csv();
        c.sampler.threads = 4;
        assert_eq!(a, execute(&c).unwrap().csv());
    }

    #[test]
    fn sweep_over_p_is_identity_for_q1() {
        let mut c = cfg(Command::Sweep);
        c.q = Some(1.0);
        c.sweep = Some(SweepSpec { command: Command::Oracle, axis: "p".into(), values: vec![0.1, 0.4, 0.9] });
        let out = execute(&c).unwrap();
        let est: Vec<f64> = out.rows.iter().filter(|r| r.observable == "edge_marginal_0").map(|r| r.estimate).collect();
        assert_eq!(est.len(), 3);
        for (e, p) in est.iter().zip([0.1, 0.4, 0.9]) {
            assert!((e - p).abs() < 1e-12);
        }
        assert!(out.plot.unwrap().contains("<polyline"));
        let mut bad = c.clone();
        bad.sweep.as_mut().unwrap().axis = "bc".into();
        assert!(matches!(execute(&bad), Err(HarnessError::Config(_))));
    }

    #[test]
    fn run_directory_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let mut c = cfg(Command::Sample);
        c.d = Some(2);
        c.l = Some(1);
        c.sampler.samples = 5;
        c.sampler.chains = 1;
        c.sampler.burn_in = 1;
        c.dump_samples = true;
        c.out_dir = Some(tmp.path().to_path_buf());
        let (rec, _) = run(&c).unwrap();
        let dir = rec.run_dir.unwrap();
        for f in ["MANIFEST", "config.json", "results.csv", "samples.jsonl", "plot.svg", "run.json"] {
            assert!(dir.join(f).exists(), "{f}");
        }
        let m = std::fs::read_to_string(dir.join("MANIFEST")).unwrap();
        assert!(m.starts_with("status: complete"));
        assert_eq!(std::fs::read_to_string(dir.join("samples.jsonl")).unwrap().lines().count(), 5);
        let again: ExperimentConfig =
            serde_json::from_str(&std::fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
        assert_eq!(again.seed, Some(config::DEFAULT_SEED));
        let rep = report(&dir).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.notes, vec!["status: complete".to_string()]);
    }

    #[test]
    fn schema_covers_every_field() {
        let schema: serde_json::Value =
            serde_json::from_str(include_str!("../../config.schema.json")).unwrap();
        let props = schema["properties"].as_object().unwrap();
        let v = serde_json::to_value(ExperimentConfig::default()).unwrap();
        for key in v.as_object().unwrap().keys() {
            assert!(props.contains_key(key), "schema lacks {key}");
        }
        for key in props.keys() {
            assert!(v.as_object().unwrap().contains_key(key), "schema has stray {key}");
        }
    }
}
