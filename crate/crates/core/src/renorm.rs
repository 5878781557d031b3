//! Static renormalization of a slab to a 2D site field.
//!
//! Sites `u ∈ B_n = {−n..n}²` sit at `x(u) = (0,…,0, round(δL/8 · u))` and
//! `η_u = 1` when `Unique(⌊δL⌋)` holds around `x(u)`.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bonds::{BondConfig, BoundarySpec};
use crate::error::{Error, Result};
use crate::events::UniqueEvaluator;
use crate::geometry::{round_half_up, sup_dist, EdgeId, NodeId, Region, RegionSpec};
use crate::oracle::FkParams;
use crate::sampler::{run_chains, SamplerSpec, SprinkleField};
use crate::stats::{EstimatorResult, ParamRecord};
use crate::unionfind::UnionFind;

/// `n = ⌊8(N−L)/(δL)⌋`.
pub fn renorm_n(l: i32, n_slab: i32, delta: f64) -> Result<i32> {
    if l < 1 || n_slab < l || !(delta > 0.0) {
        return Err(Error::invalid(format!("need 1 <= L <= N and δ > 0, got L={l}, N={n_slab}, δ={delta}")));
    }
    let n = (8.0 * (n_slab - l) as f64 / (delta * l as f64)).floor() as i32;
    if n < 1 {
        return Err(Error::invalid(format!("renormalized box is empty (n = {n})")));
    }
    Ok(n)
}

/// Site centers of the renormalized lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormSites {
    pub d: usize,
    pub l: i32,
    pub n_slab: i32,
    pub delta: f64,
    pub n: i32,
    /// `x(u)` for `u` in row-major order over `B_n`.
    pub centers: Vec<Vec<i32>>,
}

impl RenormSites {
    pub fn side(&self) -> usize {
        (2 * self.n + 1) as usize
    }

    pub fn index(&self, u: [i32; 2]) -> Option<usize> {
        let n = self.n;
        if u[0].abs() > n || u[1].abs() > n {
            return None;
        }
        Some((u[0] + n) as usize * self.side() + (u[1] + n) as usize)
    }

    pub fn site(&self, i: usize) -> [i32; 2] {
        let s = self.side();
        [(i / s) as i32 - self.n, (i % s) as i32 - self.n]
    }

    pub fn center(&self, u: [i32; 2]) -> Option<&[i32]> {
        self.index(u).map(|i| self.centers[i].as_slice())
    }
}

pub fn renorm_sites(d: usize, l: i32, n_slab: i32, delta: f64) -> Result<RenormSites> {
    if d < 3 {
        return Err(Error::invalid("the renormalized field lives on slabs, d >= 3"));
    }
    let n = renorm_n(l, n_slab, delta)?;
    let step = delta * l as f64 / 8.0;
    let side = (2 * n + 1) as usize;
    let mut centers = Vec::with_capacity(side * side);
    for a in -n..=n {
        for b in -n..=n {
            let mut x = vec![0; d];
            x[d - 2] = round_half_up(step * a as f64) as i32;
            x[d - 1] = round_half_up(step * b as f64) as i32;
            // Λ_L(x(u)) ⊂ 𝒮(L,N).
            if x[d - 2].abs() + l > n_slab || x[d - 1].abs() + l > n_slab {
                return Err(Error::invalid(format!(
                    "Λ_L(x(u)) leaves the slab at u = ({a},{b}), x = {x:?}"
                )));
            }
            centers.push(x);
        }
    }
    Ok(RenormSites { d, l, n_slab, delta, n, centers })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenormField {
    pub n: i32,
    pub values: Vec<bool>,
    /// Sample index within the run, when the field came from a run.
    pub sample: Option<u64>,
}

impl RenormField {
    pub fn filled(n: i32, v: bool) -> Self {
        let s = (2 * n + 1) as usize;
        RenormField { n, values: vec![v; s * s], sample: None }
    }

    fn side(&self) -> usize {
        (2 * self.n + 1) as usize
    }

    fn index(&self, u: [i32; 2]) -> Option<usize> {
        if u[0].abs() > self.n || u[1].abs() > self.n {
            return None;
        }
        Some((u[0] + self.n) as usize * self.side() + (u[1] + self.n) as usize)
    }

    pub fn get(&self, u: [i32; 2]) -> bool {
        self.index(u).map(|i| self.values[i]).unwrap_or(false)
    }

    pub fn set(&mut self, u: [i32; 2], v: bool) {
        let i = self.index(u).expect("site inside B_n");
        self.values[i] = v;
    }

    pub fn density(&self) -> f64 {
        self.values.iter().filter(|&&v| v).count() as f64 / self.values.len() as f64
    }

    /// Run-length encoding of each row, `"3:1,5:0,..."`, for sample dumps.
    pub fn rle_rows(&self) -> Vec<String> {
        self.values
            .chunks(self.side())
            .map(|row| {
                let mut out = Vec::new();
                let mut cur = row[0];
                let mut len = 0;
                for &v in row {
                    if v == cur {
                        len += 1;
                    } else {
                        out.push(format!("{len}:{}", u8::from(cur)));
                        cur = v;
                        len = 1;
                    }
                }
                out.push(format!("{len}:{}", u8::from(cur)));
                out.join(",")
            })
            .collect()
    }

    /// Open sites reachable from `u` by nearest-neighbor steps.
    pub fn cluster_of(&self, u: [i32; 2]) -> Vec<bool> {
        let mut seen = vec![false; self.values.len()];
        let Some(start) = self.index(u) else { return seen };
        if !self.values[start] {
            return seen;
        }
        let s = self.side();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            let (a, b) = (i / s, i % s);
            let mut push = |j: usize| {
                if self.values[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if a > 0 {
                push(i - s);
            }
            if a + 1 < s {
                push(i + s);
            }
            if b > 0 {
                push(i - 1);
            }
            if b + 1 < s {
                push(i + 1);
            }
        }
        seen
    }
}

/// Nearest-neighbor site-percolation connectivity on `{η = 1}`.
pub fn site_connectivity(field: &RenormField, u: [i32; 2], v: [i32; 2]) -> Result<bool> {
    let iv = field
        .index(v)
        .ok_or_else(|| Error::invalid(format!("{v:?} outside B_{}", field.n)))?;
    if field.index(u).is_none() {
        return Err(Error::invalid(format!("{u:?} outside B_{}", field.n)));
    }
    Ok(field.cluster_of(u)[iv])
}

/// Builds `η` fields on one slab and recomputes single sites after flips.
#[derive(Clone, Debug)]
pub struct EtaBuilder {
    pub sites: RenormSites,
    eval: UniqueEvaluator,
    radius: i32,
}

impl EtaBuilder {
    pub fn new(region: &Region, sites: RenormSites) -> Result<Self> {
        let radius = (sites.delta * sites.l as f64).floor() as i32;
        let eval = UniqueEvaluator::new(region, radius)?;
        for c in &sites.centers {
            if !region.contains_box(c, radius) {
                return Err(Error::invalid(format!("Λ_{radius}({c:?}) is not inside the region")));
            }
        }
        Ok(EtaBuilder { sites, eval, radius })
    }

    /// `⌊δL⌋`, the radius of the Unique event at each site.
    pub fn radius(&self) -> i32 {
        self.radius
    }

    pub fn site_value(&mut self, region: &Region, omega: &BondConfig, gamma: &BondConfig, i: usize) -> Result<bool> {
        self.eval.eval(region, omega, gamma, &self.sites.centers[i])
    }

    pub fn field(&mut self, region: &Region, omega: &BondConfig, gamma: &BondConfig) -> Result<RenormField> {
        omega.check_region(region)?;
        gamma.check_region(region)?;
        let mut f = RenormField::filled(self.sites.n, false);
        for i in 0..self.sites.centers.len() {
            f.values[i] = self.site_value(region, omega, gamma, i)?;
        }
        Ok(f)
    }

    /// Sites whose value can depend on `γ_e`: both endpoints of `e` within
    /// `⌊R/2⌋` of the center.
    pub fn sites_reading_gamma(&self, region: &Region, e: EdgeId) -> Vec<usize> {
        let [a, b] = region.edge(e);
        if !(region.is_vertex(a) && region.is_vertex(b)) {
            return Vec::new();
        }
        let r2 = self.radius / 2;
        self.sites
            .centers
            .iter()
            .enumerate()
            .filter(|(_, c)| sup_dist(region.coords(a), c) <= r2 && sup_dist(region.coords(b), c) <= r2)
            .map(|(i, _)| i)
            .collect()
    }
}

/// `η` from `(ω, γ)` on a slab region.
pub fn eta_field(region: &Region, omega: &BondConfig, gamma: &BondConfig, l: i32, n_slab: i32, delta: f64) -> Result<RenormField> {
    let sites = renorm_sites(region.dim(), l, n_slab, delta)?;
    EtaBuilder::new(region, sites)?.field(region, omega, gamma)
}

/// Conditional density of `η_u` given the four probe sites `u ± k e_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalClass {
    /// Probe values in the order `+e_1, −e_1, +e_2, −e_2`.
    pub pattern: [bool; 4],
    pub count: u64,
    pub density: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaStatistics {
    pub k: i32,
    /// Marginal density per site, row-major over `B_n`.
    pub density: Vec<f64>,
    pub mean_density: f64,
    pub classes: Vec<ConditionalClass>,
    /// Classes left out for having fewer than `min_count` observations.
    pub skipped_classes: usize,
    /// Minimum conditional density over the retained classes.
    pub alpha_hat: Option<f64>,
    pub alpha_stderr: Option<f64>,
}

pub const MIN_CLASS_COUNT: u64 = 30;

/// Default conditioning distance `⌈16/δ⌉`.
pub fn default_k(delta: f64) -> i32 {
    (16.0 / delta).ceil() as i32
}

/// Empirical marginals and conditional densities of `η`.
///
/// Conditioning uses the four sites at distance exactly `k` along the axes,
/// pooled over every `u` whose probes all lie in `B_n`.
pub fn eta_statistics(fields: &[RenormField], k: i32) -> Result<EtaStatistics> {
    let first = fields.first().ok_or(Error::EmptySet)?;
    let n = first.n;
    if fields.iter().any(|f| f.n != n) {
        return Err(Error::invalid("fields of different sizes"));
    }
    if k < 1 {
        return Err(Error::invalid("conditioning distance k must be >= 1"));
    }
    let cells = first.values.len();
    let mut density = vec![0.0; cells];
    for f in fields {
        for (d, &v) in density.iter_mut().zip(&f.values) {
            *d += f64::from(u8::from(v));
        }
    }
    density.iter_mut().for_each(|d| *d /= fields.len() as f64);
    let mean_density = density.iter().sum::<f64>() / cells as f64;
    let mut tally: BTreeMap<[bool; 4], (u64, u64)> = BTreeMap::new();
    if k <= n {
        for f in fields {
            for a in -n + k..=n - k {
                for b in -n + k..=n - k {
                    let pattern = [f.get([a + k, b]), f.get([a - k, b]), f.get([a, b + k]), f.get([a, b - k])];
                    let t = tally.entry(pattern).or_default();
                    t.0 += 1;
                    t.1 += u64::from(f.get([a, b]));
                }
            }
        }
    }
    let mut classes = Vec::new();
    let mut skipped = 0;
    for (pattern, (count, ones)) in tally {
        if count < MIN_CLASS_COUNT {
            skipped += 1;
            continue;
        }
        let p = ones as f64 / count as f64;
        classes.push(ConditionalClass { pattern, count, density: p, stderr: (p * (1.0 - p) / count as f64).sqrt() });
    }
    let min = classes.iter().min_by(|a, b| a.density.total_cmp(&b.density));
    Ok(EtaStatistics {
        k,
        density,
        mean_density,
        alpha_hat: min.map(|c| c.density),
        alpha_stderr: min.map(|c| c.stderr),
        classes,
        skipped_classes: skipped,
    })
}

/// Union-find over the vertices of `region` using the open edges of `η`
/// with both endpoints inside.
fn vertex_components(region: &Region, eta: &BondConfig) -> UnionFind {
    let mut uf = UnionFind::new(region.n_vertices());
    for e in eta.open_edges() {
        let [a, b] = region.edge(e);
        if region.is_vertex(a) && region.is_vertex(b) {
            uf.union(a, b);
        }
    }
    uf
}

fn box_roots(region: &Region, uf: &mut UnionFind, center: &[i32], r: i32) -> Vec<NodeId> {
    let d = center.len();
    let mut out = Vec::new();
    let mut x: Vec<i32> = center.iter().map(|c| c - r).collect();
    loop {
        if let Some(v) = region.vertex_at(&x) {
            out.push(uf.find(v));
        }
        let mut k = d;
        loop {
            if k == 0 {
                out.sort_unstable();
                out.dedup();
                return out;
            }
            k -= 1;
            x[k] += 1;
            if x[k] <= center[k] + r {
                break;
            }
            x[k] = center[k] - r;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WitnessCount {
    /// `(sample, u)` pairs with `0 ↔ u` in `η`.
    pub checked: u64,
    /// Pairs where `Λ_{R/8}(x(0)) ↮ Λ_{R/8}(x(u))` in `ω ∪ γ`.
    pub violations: u64,
}

/// Check the induced-path claim on one sample.
pub fn witness_check(builder: &EtaBuilder, region: &Region, eta_bonds: &BondConfig, field: &RenormField) -> WitnessCount {
    let mut out = WitnessCount::default();
    let reach = field.cluster_of([0, 0]);
    if !reach.iter().any(|&r| r) {
        return out;
    }
    let mut uf = vertex_components(region, eta_bonds);
    let r8 = builder.radius / 8;
    let origin = builder.sites.center([0, 0]).expect("origin site");
    let home = box_roots(region, &mut uf, origin, r8);
    for (i, &ok) in reach.iter().enumerate() {
        if ok {
            out.checked += 1;
            let there = box_roots(region, &mut uf, &builder.sites.centers[i], r8);
            if !there.iter().any(|r| home.binary_search(r).is_ok()) {
                out.violations += 1;
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlipCount {
    pub flips: u64,
    /// Flips that turned some `η_u` from 0 to 1.
    pub raised: u64,
    /// Flips that turned some `η_u` from 1 to 0.
    pub violations: u64,
}

/// Open one closed `γ`-edge chosen uniformly among those read by some site
/// and compare the affected sites before and after.
pub fn gamma_flip_check(
    builder: &mut EtaBuilder,
    region: &Region,
    omega: &BondConfig,
    gamma: &BondConfig,
    field: &RenormField,
    rng: &mut crate::rng::Rng,
) -> Result<FlipCount> {
    let mut out = FlipCount::default();
    // Rejection-sample an edge inside the union of the Λ_{R/2}(x(u)).
    for _ in 0..10_000 {
        let e = rng.gen_range(0..region.n_edges()) as EdgeId;
        if gamma.get(e) {
            continue;
        }
        let affected = builder.sites_reading_gamma(region, e);
        if affected.is_empty() {
            continue;
        }
        let mut g = gamma.clone();
        g.set(e, true);
        out.flips = 1;
        for i in affected {
            let after = builder.site_value(region, omega, &g, i)?;
            match (field.values[i], after) {
                (true, false) => out.violations = 1,
                (false, true) => out.raised = 1,
                _ => {}
            }
        }
        return Ok(out);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct RenormReport {
    pub sites: RenormSites,
    pub stats: EtaStatistics,
    /// `0 ↔ u` in `η`, per site, row-major.
    pub eta_connection: Vec<f64>,
    /// `0 ↔ x` in `ω ∪ γ` for far targets `x`.
    pub direct: Vec<EstimatorResult>,
    pub eta_density: EstimatorResult,
    /// Frequency of `Λ_L` fully open in `γ`.
    pub full_box_gamma: f64,
    pub witness: WitnessCount,
    pub flips: FlipCount,
    pub fields: Vec<RenormField>,
}

struct PipelineSample {
    field: RenormField,
    witness: WitnessCount,
    flips: FlipCount,
    reach: Vec<bool>,
    direct: Vec<bool>,
    full_box: bool,
}

/// Sample `(ω, γ)` on `𝒮(L,N)` under free bc, build `η`, and collect the
/// field statistics, the `η` connectivity profile, direct `ω ∪ γ`
/// connections to `targets`, the witness check and one `γ` flip per sample.
#[allow(clippy::too_many_arguments)]
pub fn renorm_pipeline(
    d: usize,
    l: i32,
    n_slab: i32,
    params: &FkParams,
    eps: f64,
    delta: f64,
    targets: &[Vec<i32>],
    spec: &SamplerSpec,
    seed: u64,
) -> Result<RenormReport> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("eps = {eps} outside [0,1]")));
    }
    let region = RegionSpec::slab(d, l, n_slab).build()?;
    let sites = renorm_sites(d, l, n_slab, delta)?;
    let builder = EtaBuilder::new(&region, sites.clone())?;
    let origin = region.vertex_at(&vec![0; d]).expect("origin");
    let target_ids: Vec<NodeId> = targets
        .iter()
        .map(|x| region.vertex_at(x).ok_or_else(|| Error::invalid(format!("target {x:?} outside the slab"))))
        .collect::<Result<_>>()?;
    let box_edges: Vec<EdgeId> = (0..region.n_edges() as EdgeId)
        .filter(|&e| {
            let [a, b] = region.edge(e);
            region.is_vertex(a)
                && region.is_vertex(b)
                && region.coords(a).iter().chain(region.coords(b)).all(|c| c.abs() <= l)
        })
        .collect();
    let bc = BoundarySpec::free();
    let chains = run_chains(&region, &bc, params, spec, seed, |w, ctx| {
        let mut b = builder.clone();
        let gamma = SprinkleField::draw(&region, ctx.aux).gamma(&region, eps);
        let mut field = b.field(&region, w, &gamma).expect("validated");
        field.sample = Some(ctx.index + ((ctx.chain as u64) << 32));
        let eta = w.union(&gamma).expect("same region");
        let witness = witness_check(&b, &region, &eta, &field);
        let flips = gamma_flip_check(&mut b, &region, w, &gamma, &field, ctx.aux).expect("validated");
        let mut uf = vertex_components(&region, &eta);
        let home = uf.find(origin);
        let direct = target_ids.iter().map(|&t| uf.find(t) == home).collect();
        let reach = field.cluster_of([0, 0]);
        let full_box = box_edges.iter().all(|&e| gamma.get(e));
        PipelineSample { field, witness, flips, reach, direct, full_box }
    })?;
    let all: Vec<&PipelineSample> = chains.iter().flatten().collect();
    let fields: Vec<RenormField> = all.iter().map(|s| s.field.clone()).collect();
    let stats = eta_statistics(&fields, default_k(delta))?;
    let mut eta_connection = vec![0.0; sites.centers.len()];
    for s in &all {
        for (c, &r) in eta_connection.iter_mut().zip(&s.reach) {
            *c += f64::from(u8::from(r));
        }
    }
    eta_connection.iter_mut().for_each(|c| *c /= all.len() as f64);
    let mut witness = WitnessCount::default();
    let mut flips = FlipCount::default();
    for s in &all {
        witness.checked += s.witness.checked;
        witness.violations += s.witness.violations;
        flips.flips += s.flips.flips;
        flips.raised += s.flips.raised;
        flips.violations += s.flips.violations;
    }
    let rec = ParamRecord {
        d: Some(d),
        q: Some(params.q),
        p: Some(params.p),
        eps: Some(eps),
        l: Some(l as i64),
        n: Some(n_slab as i64),
        delta: Some(delta),
        bc: Some("free".into()),
        seed: Some(seed),
        chains: Some(spec.chains),
        ..Default::default()
    };
    let direct = (0..targets.len())
        .map(|t| {
            let per: Vec<Vec<f64>> =
                chains.iter().map(|c| c.iter().map(|s| f64::from(u8::from(s.direct[t]))).collect()).collect();
            EstimatorResult::from_chains(format!("connection_to_{:?}", targets[t]), rec.clone(), &per)
        })
        .collect();
    let dens: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|s| s.field.density()).collect()).collect();
    let eta_density = EstimatorResult::from_chains("eta_density", rec, &dens);
    let full_box_gamma = all.iter().filter(|s| s.full_box).count() as f64 / all.len() as f64;
    Ok(RenormReport { sites, stats, eta_connection, direct, eta_density, full_box_gamma, witness, flips, fields })
}
