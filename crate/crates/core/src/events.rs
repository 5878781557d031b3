//! Block events and their Monte Carlo estimators.
//!
//! Radii follow one convention throughout: `⌊R/2⌋`, `⌊R/4⌋`, `⌊R/8⌋`, and
//! `∂Λ_r(c)` is the set of vertices at sup-distance exactly `r` from `c`.
//! Clusters "of `ω ∩ Λ_R`" use only edges with both endpoints in `Λ_R`.

use serde::{Deserialize, Serialize};

use crate::bonds::{label_clusters, BondConfig, BoundarySpec};
use crate::error::{Error, Result};
use crate::geometry::{annulus_sequence, grid_boxes, sup_dist, EdgeId, NodeId, Region, RegionSpec};
use crate::oracle::{EventPredicate, FkParams};
use crate::sampler::{run_chains, SamplerSpec, SprinkleField};
use crate::stats::{EstimatorResult, ParamRecord};
use crate::unionfind::UnionFind;

/// Local indexing of a box `Λ_R(c)` lying inside a box-shaped region.
///
/// The frame depends only on `R` and the region's strides, so one frame
/// serves every center.
#[derive(Clone, Debug)]
pub struct BoxFrame {
    radius: i32,
    dim: usize,
    /// Global node offset of each local site relative to the center.
    offset: Vec<i64>,
    /// Sup-distance of each local site to the center.
    dist: Vec<i32>,
    /// `(local a, local a + e_k, axis k)` for every edge inside the box.
    edges: Vec<(u32, u32, u8)>,
}

impl BoxFrame {
    pub fn new(region: &Region, radius: i32) -> Result<Self> {
        if radius < 0 {
            return Err(Error::invalid("negative radius"));
        }
        let bounds = region
            .bounds()
            .ok_or_else(|| Error::Unsupported("local boxes need a box-shaped region".into()))?;
        let d = region.dim();
        // Global strides from the region's lexicographic numbering.
        let mut gstride = vec![0i64; d];
        let lo: Vec<i32> = bounds.iter().map(|b| b.0).collect();
        let base = region.node_at(&lo).expect("corner is a vertex") as i64;
        for (k, s) in gstride.iter_mut().enumerate() {
            let mut x = lo.clone();
            x[k] += 1;
            *s = match region.node_at(&x) {
                Some(n) if region.is_vertex(n) => n as i64 - base,
                _ => 0,
            };
        }
        let side = (2 * radius + 1) as usize;
        let n = side.pow(d as u32);
        let mut offset = Vec::with_capacity(n);
        let mut dist = Vec::with_capacity(n);
        let mut edges = Vec::new();
        let mut lstride = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            lstride[k] = lstride[k + 1] * side;
        }
        let mut rel = vec![-radius; d];
        for i in 0..n {
            offset.push(rel.iter().zip(&gstride).map(|(&r, &s)| r as i64 * s).sum());
            dist.push(rel.iter().map(|r| r.abs()).max().unwrap_or(0));
            for k in 0..d {
                if rel[k] < radius {
                    edges.push((i as u32, (i + lstride[k]) as u32, k as u8));
                }
            }
            for k in (0..d).rev() {
                rel[k] += 1;
                if rel[k] <= radius {
                    break;
                }
                rel[k] = -radius;
            }
        }
        Ok(BoxFrame { radius, dim: d, offset, dist, edges })
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.offset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offset.is_empty()
    }

    pub fn dist(&self, local: usize) -> i32 {
        self.dist[local]
    }

    fn check(&self, region: &Region, center: &[i32]) -> Result<i64> {
        if center.len() != self.dim || !region.contains_box(center, self.radius) {
            return Err(Error::invalid(format!(
                "box of radius {} at {:?} is not inside the region",
                self.radius, center
            )));
        }
        Ok(region.node_at(center).expect("center inside") as i64)
    }

    #[inline]
    fn global(&self, base: i64, local: u32) -> NodeId {
        (base + self.offset[local as usize]) as NodeId
    }

    /// Edge id of local edge `j` for the box centered at `base`.
    #[inline]
    fn edge_id(&self, region: &Region, base: i64, j: usize) -> EdgeId {
        let (a, _, k) = self.edges[j];
        region.edge_up(self.global(base, a), k as usize)
    }

    /// Union-find of `ω ∩ Λ_R(center)` over local indices.
    pub(crate) fn label(&self, region: &Region, omega: &BondConfig, center: &[i32], uf: &mut UnionFind) -> Result<()> {
        let base = self.check(region, center)?;
        uf.reset(self.len());
        for j in 0..self.edges.len() {
            if omega.get(self.edge_id(region, base, j)) {
                let (a, b, _) = self.edges[j];
                uf.union(a, b);
            }
        }
        Ok(())
    }
}

/// `Λ_ℓ(x) ↔ ∂Λ_{R_outer}(c)` in `ω ∩ Λ_{R_outer}(c)` for every
/// `x ∈ ℓZ^d ∩ Λ_{R_inner}(c)`.
pub fn density_event(
    region: &Region,
    omega: &BondConfig,
    center: &[i32],
    ell: i32,
    r_inner: i32,
    r_outer: i32,
) -> Result<bool> {
    if !(1 <= ell && ell <= r_inner && r_inner < r_outer) {
        return Err(Error::invalid(format!(
            "need 1 <= ell <= R_inner < R_outer, got {ell}, {r_inner}, {r_outer}"
        )));
    }
    omega.check_region(region)?;
    let frame = BoxFrame::new(region, r_outer)?;
    let mut uf = UnionFind::new(frame.len());
    frame.label(region, omega, center, &mut uf)?;
    let mut touches = vec![false; frame.len()];
    for i in 0..frame.len() {
        if frame.dist[i] == r_outer {
            touches[uf.find(i as u32) as usize] = true;
        }
    }
    let d = region.dim();
    let side = (2 * r_outer + 1) as usize;
    let local_of = |x: &[i32]| -> Option<usize> {
        let mut idx = 0usize;
        for k in 0..d {
            let r = x[k] - center[k];
            if r.abs() > r_outer {
                return None;
            }
            idx = idx * side + (r + r_outer) as usize;
        }
        Some(idx)
    };
    for x in grid_boxes(r_inner, ell, center)? {
        let mut hit = false;
        let mut y = vec![0i32; d];
        for j in 0..frame.len() {
            // Walk the frame and keep the sites of Λ_ℓ(x).
            let mut rem = j;
            for k in (0..d).rev() {
                y[k] = center[k] + (rem % side) as i32 - r_outer;
                rem /= side;
            }
            if sup_dist(&y, &x) <= ell {
                let l = local_of(&y).expect("inside frame");
                if touches[uf.find(l as u32) as usize] {
                    hit = true;
                    break;
                }
            }
        }
        if !hit {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Evaluates `Unique(R)` at arbitrary centers with reusable buffers.
#[derive(Clone, Debug)]
pub struct UniqueEvaluator {
    frame: BoxFrame,
    /// Local sites on `∂Λ_R`, `∂Λ_{R/8}`, `∂Λ_{R/2}`, `∂Λ_{R/4}` with flag bits 1, 2, 4, 8.
    shell: Vec<(u32, u8)>,
    /// Local edges with both endpoints in `Λ_{R/2}`.
    inner_edges: Vec<usize>,
    uf: UnionFind,
    uf2: UnionFind,
    flags: Vec<u8>,
    roots: Vec<u32>,
}

/// The two parts of `Unique(R)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniqueParts {
    /// A cluster of `ω ∩ Λ_R` touches `∂Λ_{R/8}` and `∂Λ_R`.
    pub crossing: bool,
    /// The clusters of `ω ∩ Λ_R` touching `∂Λ_{R/4}` and `∂Λ_{R/2}` are all
    /// joined inside `Λ_{R/2}` once `γ` is added there.
    pub merged: bool,
}

impl UniqueParts {
    pub fn holds(&self) -> bool {
        self.crossing && self.merged
    }
}

impl UniqueEvaluator {
    pub fn new(region: &Region, r: i32) -> Result<Self> {
        if r < 8 {
            return Err(Error::invalid(format!("Unique(R) needs R >= 8, got {r}")));
        }
        let frame = BoxFrame::new(region, r)?;
        let n = frame.len();
        let (r2, r4, r8) = (r / 2, r / 4, r / 8);
        let shell = (0..n)
            .filter_map(|i| {
                let bit = match frame.dist[i] {
                    x if x == r => 1,
                    x if x == r8 => 2,
                    x if x == r2 => 4,
                    x if x == r4 => 8,
                    _ => 0,
                };
                (bit != 0).then_some((i as u32, bit))
            })
            .collect();
        let inner_edges = (0..frame.edges.len())
            .filter(|&j| {
                let (a, b, _) = frame.edges[j];
                frame.dist[a as usize] <= r2 && frame.dist[b as usize] <= r2
            })
            .collect();
        Ok(UniqueEvaluator {
            frame,
            shell,
            inner_edges,
            uf: UnionFind::new(n),
            uf2: UnionFind::new(n),
            flags: vec![0; n],
            roots: Vec::new(),
        })
    }

    pub fn radius(&self) -> i32 {
        self.frame.radius
    }

    pub fn eval(&mut self, region: &Region, omega: &BondConfig, gamma: &BondConfig, center: &[i32]) -> Result<bool> {
        Ok(self.parts(region, omega, gamma, center)?.holds())
    }

    pub fn parts(&mut self, region: &Region, omega: &BondConfig, gamma: &BondConfig, center: &[i32]) -> Result<UniqueParts> {
        self.frame.label(region, omega, center, &mut self.uf)?;
        self.roots.clear();
        for &(i, bit) in &self.shell {
            let root = self.uf.find(i);
            if self.flags[root as usize] == 0 {
                self.roots.push(root);
            }
            self.flags[root as usize] |= bit;
        }
        let mut crossing = false;
        let mut middle = Vec::new();
        for &root in &self.roots {
            let f = std::mem::take(&mut self.flags[root as usize]);
            crossing |= f & 3 == 3;
            if f & 12 == 12 {
                middle.push(root);
            }
        }
        let mut merged = true;
        if middle.len() > 1 {
            self.uf2.clone_from(&self.uf);
            let base = region.node_at(center).expect("checked by label") as i64;
            for &j in &self.inner_edges {
                if gamma.get(self.frame.edge_id(region, base, j)) {
                    let (a, b, _) = self.frame.edges[j];
                    self.uf2.union(a, b);
                }
            }
            let first = self.uf2.find(middle[0]);
            merged = middle[1..].iter().all(|&c| self.uf2.find(c) == first);
        }
        Ok(UniqueParts { crossing, merged })
    }
}

/// `Unique(R)` centered at `center`.
pub fn unique_event(region: &Region, omega: &BondConfig, gamma: &BondConfig, center: &[i32], r: i32) -> Result<bool> {
    omega.check_region(region)?;
    gamma.check_region(region)?;
    UniqueEvaluator::new(region, r)?.eval(region, omega, gamma, center)
}

/// `(i, U_i)` pairs for one `(ω, γ)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct USequence {
    pub radii: Vec<i32>,
    pub values: Vec<(usize, usize)>,
}

impl USequence {
    pub fn last(&self) -> usize {
        self.values.last().map(|v| v.1).unwrap_or(0)
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

/// Reusable evaluator for the `U_i` trajectory.
#[derive(Clone, Debug)]
pub struct USequenceEvaluator {
    frame: BoxFrame,
    radii: Vec<i32>,
    uf: UnionFind,
    uf2: UnionFind,
    in_c: Vec<bool>,
}

impl USequenceEvaluator {
    /// Box `Λ_{⌊δL⌋}`, annuli from [`annulus_sequence`]. `𝒞` are the clusters
    /// of `ω ∩ Λ_{⌊δL⌋}` meeting `∂V_0`.
    pub fn new(region: &Region, l: u32, delta: f64) -> Result<Self> {
        let center = vec![0; region.dim()];
        let ann = annulus_sequence(l, delta, &center)?;
        let radii: Vec<i32> = ann.iter().map(|a| a.outer).collect();
        let big = (delta * l as f64).floor() as i32;
        if big <= radii[0] {
            return Err(Error::invalid(format!("need ⌊δL⌋ = {big} > radius of V_0 = {}", radii[0])));
        }
        let frame = BoxFrame::new(region, big)?;
        let n = frame.len();
        Ok(USequenceEvaluator { frame, radii, uf: UnionFind::new(n), uf2: UnionFind::new(n), in_c: vec![false; n] })
    }

    pub fn radii(&self) -> &[i32] {
        &self.radii
    }

    pub fn eval(&mut self, region: &Region, omega: &BondConfig, gamma: &BondConfig, center: &[i32]) -> Result<USequence> {
        let r0 = self.radii[0];
        self.frame.label(region, omega, center, &mut self.uf)?;
        self.in_c.iter_mut().for_each(|f| *f = false);
        for i in 0..self.frame.len() {
            if self.frame.dist[i] == r0 {
                let root = self.uf.find(i as u32) as usize;
                self.in_c[root] = true;
            }
        }
        // Smallest distance to the center reached by each cluster of 𝒞.
        let mut reach = vec![i32::MAX; self.frame.len()];
        for i in 0..self.frame.len() {
            let root = self.uf.find(i as u32) as usize;
            if self.in_c[root] {
                reach[root] = reach[root].min(self.frame.dist[i]);
            }
        }
        let roots: Vec<u32> = (0..self.frame.len() as u32).filter(|&i| self.in_c[i as usize]).collect();
        self.uf2.clone_from(&self.uf);
        let base = region.node_at(center).expect("checked by label") as i64;
        let mut values = Vec::with_capacity(self.radii.len());
        for (i, &ri) in self.radii.iter().enumerate() {
            // η_i adds γ on edges with both endpoints in V_0 \ V_i.
            if i > 0 {
                let prev = self.radii[i - 1];
                for j in 0..self.frame.edges.len() {
                    let (a, b, _) = self.frame.edges[j];
                    let (da, db) = (self.frame.dist[a as usize], self.frame.dist[b as usize]);
                    let inside = |x: i32| x <= r0 && x > ri;
                    let new = !(da > prev && db > prev);
                    if inside(da) && inside(db) && new && gamma.get(self.frame.edge_id(region, base, j)) {
                        self.uf2.union(a, b);
                    }
                }
            }
            let mut classes: Vec<u32> = roots
                .iter()
                .filter(|&&c| reach[c as usize] <= ri)
                .map(|&c| self.uf2.find(c))
                .collect();
            classes.sort_unstable();
            classes.dedup();
            values.push((i, classes.len()));
        }
        Ok(USequence { radii: self.radii.clone(), values })
    }
}

pub fn u_sequence(
    region: &Region,
    omega: &BondConfig,
    gamma: &BondConfig,
    center: &[i32],
    l: u32,
    delta: f64,
) -> Result<USequence> {
    omega.check_region(region)?;
    gamma.check_region(region)?;
    USequenceEvaluator::new(region, l, delta)?.eval(region, omega, gamma, center)
}

fn record(d: usize, params: &FkParams, spec: &SamplerSpec, seed: u64) -> ParamRecord {
    ParamRecord {
        d: Some(d),
        q: Some(params.q),
        p: Some(params.p),
        seed: Some(seed),
        chains: Some(spec.chains),
        ..Default::default()
    }
}

/// Frequency of `event` under `φ^ξ` with batch-means stderr.
pub fn estimate(
    region: &Region,
    bc: &BoundarySpec,
    params: &FkParams,
    event: &EventPredicate,
    spec: &SamplerSpec,
    seed: u64,
) -> Result<EstimatorResult> {
    let chains = run_chains(region, bc, params, spec, seed, |w, _| {
        let l = label_clusters(region, w, bc).expect("sampler output belongs to region");
        f64::from(u8::from(event.eval(w, &l)))
    })?;
    let mut r = record(region.dim(), params, spec, seed);
    r.bc = Some(bc_name(region, bc));
    Ok(EstimatorResult::from_chains(event.name(), r, &chains))
}

pub(crate) fn bc_name(region: &Region, bc: &BoundarySpec) -> String {
    if bc.is_free() {
        "free".into()
    } else if *bc == BoundarySpec::wired(region) {
        "wired".into()
    } else {
        "custom".into()
    }
}

/// `M = ⌊δL⌋` for `ℛ(L, δL)`.
fn rect_height(l: i32, delta: f64) -> Result<i32> {
    let m = (delta * l as f64).floor() as i32;
    if m < 1 {
        return Err(Error::invalid(format!("δL = {} rounds below 1", delta * l as f64)));
    }
    Ok(m)
}

/// `∂^{bot}ℛ(L,δL) ↮ ∂^{top}ℛ(L,δL)` in `ω` on `Λ_{⌊CL⌋}` with free boundary,
/// and `τ̂ = log(1/prob) / L^{d−1}`.
#[allow(clippy::too_many_arguments)]
pub fn disconnection_free(
    d: usize,
    l: i32,
    delta: f64,
    c: f64,
    params: &FkParams,
    spec: &SamplerSpec,
    seed: u64,
) -> Result<EstimatorResult> {
    if !(c >= 1.0) || !(delta > 0.0 && delta <= c) {
        return Err(Error::invalid(format!("need C >= 1 and 0 < δ <= C, got C={c}, δ={delta}")));
    }
    let m = rect_height(l, delta)?;
    let n = (c * l as f64).floor() as i32;
    let region = RegionSpec::boxed(d, n).build()?;
    let (top, bot) = rect_faces(&region, l, m);
    let bc = BoundarySpec::free();
    let chains = run_chains(&region, &bc, params, spec, seed, |w, _| {
        let lab = label_clusters(&region, w, &bc).expect("own region");
        f64::from(u8::from(!lab.is_connected(&bot, &top).expect("faces are nonempty")))
    })?;
    let mut r = record(d, params, spec, seed);
    r.l = Some(l as i64);
    r.delta = Some(delta);
    r.c = Some(c);
    r.bc = Some("free".into());
    let area = (l as f64).powi(d as i32 - 1);
    Ok(EstimatorResult::from_chains("free_disconnection", r, &chains).with_log_rate("tau_free", area))
}

/// Top and bottom faces `{−L..L}^{d−1} × {±M}` of `ℛ(L,M)` inside `region`.
pub fn rect_faces(region: &Region, l: i32, m: i32) -> (Vec<NodeId>, Vec<NodeId>) {
    let d = region.dim();
    let lateral_ok = |x: &[i32]| x[..d - 1].iter().all(|c| c.abs() <= l);
    let top = region.vertices_where(|x| lateral_ok(x) && x[d - 1] == m);
    let bot = region.vertices_where(|x| lateral_ok(x) && x[d - 1] == -m);
    (top, bot)
}

/// `φ^0_{Λ_L}[Λ_ℓ ↔ ∂Λ_{⌊δL⌋}]`, reported with the reference value
/// `1 − e^{−δℓ^{d−1}}` as the derived column.
#[allow(clippy::too_many_arguments)]
pub fn box_connection_estimate(
    d: usize,
    l: i32,
    delta: f64,
    ell: i32,
    params: &FkParams,
    spec: &SamplerSpec,
    seed: u64,
) -> Result<EstimatorResult> {
    let r = (delta * l as f64).floor() as i32;
    if !(1 <= ell && ell < r && r <= l) {
        return Err(Error::invalid(format!("need 1 <= ell < ⌊δL⌋ <= L, got ell={ell}, ⌊δL⌋={r}")));
    }
    let region = RegionSpec::boxed(d, l).build()?;
    let bc = BoundarySpec::free();
    let origin = vec![0; d];
    let inner = region.ball(&origin, ell);
    let sphere = region.sphere(&origin, r);
    let chains = run_chains(&region, &bc, params, spec, seed, |w, _| {
        let restricted = w.restricted_to_ball(&region, &origin, r);
        let lab = label_clusters(&region, &restricted, &bc).expect("own region");
        f64::from(u8::from(lab.is_connected(&inner, &sphere).expect("nonempty")))
    })?;
    let mut rec = record(d, params, spec, seed);
    rec.l = Some(l as i64);
    rec.delta = Some(delta);
    rec.ell = Some(ell as i64);
    rec.bc = Some("free".into());
    let reference = 1.0 - (-delta * (ell as f64).powi(d as i32 - 1)).exp();
    Ok(EstimatorResult::from_chains("box_connection", rec, &chains).with_derived("reference_bound", reference, 0.0))
}

/// Default `ℓ = ⌈C₀ (log L)^{1/(d−1)}⌉`.
pub fn default_ell(l: u32, d: usize, c0: f64) -> i32 {
    (c0 * (l as f64).ln().powf(1.0 / (d as f64 - 1.0))).ceil().max(1.0) as i32
}

/// Frequency of the density event `𝒜` on `Λ_L` (free boundary).
#[allow(clippy::too_many_arguments)]
pub fn density_estimate(
    d: usize,
    l: i32,
    delta: f64,
    ell: i32,
    params: &FkParams,
    spec: &SamplerSpec,
    seed: u64,
) -> Result<EstimatorResult> {
    let r = (delta * l as f64).floor() as i32;
    let region = RegionSpec::boxed(d, l).build()?;
    let origin = vec![0; d];
    if !(1 <= ell && ell < r) {
        return Err(Error::invalid(format!("need 1 <= ell < ⌊δL⌋, got ell={ell}, ⌊δL⌋={r}")));
    }
    // Grid boxes with centers in Λ_{r-1}, connected to ∂Λ_r.
    let chains = run_chains(&region, &BoundarySpec::free(), params, spec, seed, |w, _| {
        f64::from(u8::from(density_event(&region, w, &origin, ell, r - 1, r).expect("validated")))
    })?;
    let mut rec = record(d, params, spec, seed);
    rec.l = Some(l as i64);
    rec.delta = Some(delta);
    rec.ell = Some(ell as i64);
    rec.bc = Some("free".into());
    Ok(EstimatorResult::from_chains("density_event", rec, &chains))
}

/// `ψ^ξ[A ↔ x in ω ∪ γ]` for each target, one pass over the chains.
#[allow(clippy::too_many_arguments)]
pub fn connection_estimates(
    region: &Region,
    bc: &BoundarySpec,
    params: &FkParams,
    eps: f64,
    source: &[NodeId],
    targets: &[NodeId],
    spec: &SamplerSpec,
    seed: u64,
) -> Result<Vec<EstimatorResult>> {
    if source.is_empty() || targets.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("eps = {eps} outside [0,1]")));
    }
    let chains = run_chains(region, bc, params, spec, seed, |w, ctx| {
        let gamma = SprinkleField::draw(region, ctx.aux).gamma(region, eps);
        let eta = w.union(&gamma).expect("same region");
        let lab = label_clusters(region, &eta, bc).expect("own region");
        let roots = lab.components_of(source);
        targets.iter().map(|&t| f64::from(u8::from(roots.contains(&lab.component(t))))).collect::<Vec<f64>>()
    })?;
    let mut out = Vec::with_capacity(targets.len());
    for t in 0..targets.len() {
        let per: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|v| v[t]).collect()).collect();
        let mut rec = record(region.dim(), params, spec, seed);
        rec.eps = Some(eps);
        rec.bc = Some(bc_name(region, bc));
        let name = format!("connection_to_{:?}", region.coords(targets[t]));
        out.push(EstimatorResult::from_chains(name, rec, &per));
    }
    Ok(out)
}

/// `ψ⁰_{𝒮(L,N)}[0 ↔ x in ω ∪ γ]` for each target `x`.
#[allow(clippy::too_many_arguments)]
pub fn slab_connection(
    d: usize,
    l: i32,
    n: i32,
    params: &FkParams,
    eps: f64,
    targets: &[Vec<i32>],
    spec: &SamplerSpec,
    seed: u64,
) -> Result<Vec<EstimatorResult>> {
    if d < 3 {
        return Err(Error::invalid("slabs need d >= 3"));
    }
    let region = RegionSpec::slab(d, l, n).build()?;
    let origin = region.vertex_at(&vec![0; d]).expect("origin in slab");
    let mut ids = Vec::with_capacity(targets.len());
    for x in targets {
        ids.push(
            region
                .vertex_at(x)
                .ok_or_else(|| Error::invalid(format!("target {x:?} outside the slab")))?,
        );
    }
    let mut out = connection_estimates(&region, &BoundarySpec::free(), params, eps, &[origin], &ids, spec, seed)?;
    for r in &mut out {
        r.params.l = Some(l as i64);
        r.params.n = Some(n as i64);
    }
    Ok(out)
}

/// Far corners of the slab `𝒮(L,N)` in the two long directions, used to
/// probe the infimum over `x`.
pub fn slab_far_targets(d: usize, n: i32) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    for (a, b) in [(n, n), (n, 0), (0, n), (n, -n)] {
        let mut x = vec![0; d];
        x[d - 2] = a;
        x[d - 1] = b;
        out.push(x);
    }
    out
}

/// Sprinkling statistics on `Λ_L` at several `ε` from one `ω` chain:
/// `Unique(⌊δL⌋)` frequency, final `U = 1` frequency, monotonicity of `U_i`
/// and the halving diagnostic. `γ_ε = 1[U_e < ε]` shares uniforms across `ε`.
#[derive(Clone, Debug, Serialize)]
pub struct SprinklingReport {
    pub eps: Vec<f64>,
    pub unique: Vec<EstimatorResult>,
    pub final_u_one: Vec<EstimatorResult>,
    /// Samples (over all `ε`) with a nonincreasing `U_i` trajectory.
    pub monotone_samples: u64,
    pub total_samples: u64,
    /// Per `ε`, per `i`: frequency of `U_{i+8} > max(1, U_i/2)`.
    pub halving: Vec<Vec<f64>>,
    /// Per `ε`, per `i`: mean of `U_i`.
    pub u_mean: Vec<Vec<f64>>,
    pub radii: Vec<i32>,
}

#[derive(Clone, Debug)]
struct SprinkleSample {
    unique: Vec<bool>,
    seqs: Vec<USequence>,
}

#[allow(clippy::too_many_arguments)]
pub fn sprinkling_study(
    d: usize,
    l: i32,
    delta: f64,
    params: &FkParams,
    bc_wired: bool,
    eps: &[f64],
    spec: &SamplerSpec,
    seed: u64,
) -> Result<SprinklingReport> {
    if eps.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::invalid("eps outside [0,1]"));
    }
    let region = RegionSpec::boxed(d, l).build()?;
    let bc = if bc_wired { BoundarySpec::wired(&region) } else { BoundarySpec::free() };
    let big = (delta * l as f64).floor() as i32;
    let origin = vec![0; d];
    let ue = UniqueEvaluator::new(&region, big)?;
    let ve = USequenceEvaluator::new(&region, l as u32, delta)?;
    let radii = ve.radii().to_vec();
    let chains = run_chains(&region, &bc, params, spec, seed, |w, ctx| {
        let mut ue = ue.clone();
        let mut ve = ve.clone();
        let field = SprinkleField::draw(&region, ctx.aux);
        let mut s = SprinkleSample { unique: Vec::new(), seqs: Vec::new() };
        for &e in eps {
            let g = field.gamma(&region, e);
            s.unique.push(ue.eval(&region, w, &g, &origin).expect("validated"));
            s.seqs.push(ve.eval(&region, w, &g, &origin).expect("validated"));
        }
        s
    })?;
    let mut rec = record(d, params, spec, seed);
    rec.l = Some(l as i64);
    rec.delta = Some(delta);
    rec.bc = Some(bc_name(&region, &bc));
    let mut unique = Vec::new();
    let mut final_u_one = Vec::new();
    let mut halving = Vec::new();
    let mut u_mean = Vec::new();
    let mut monotone = 0u64;
    let mut total = 0u64;
    for (j, &e) in eps.iter().enumerate() {
        let mut r = rec.clone();
        r.eps = Some(e);
        let u: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|s| f64::from(u8::from(s.unique[j]))).collect()).collect();
        unique.push(EstimatorResult::from_chains("unique", r.clone(), &u));
        let f: Vec<Vec<f64>> =
            chains.iter().map(|c| c.iter().map(|s| f64::from(u8::from(s.seqs[j].last() == 1))).collect()).collect();
        final_u_one.push(EstimatorResult::from_chains("final_u_one", r, &f));
        let mut h = Vec::new();
        for i in 0..radii.len().saturating_sub(8) {
            let mut hits = 0usize;
            let mut n = 0usize;
            for s in chains.iter().flatten() {
                let v = &s.seqs[j].values;
                n += 1;
                if v[i + 8].1 as f64 > (v[i].1 as f64 / 2.0).max(1.0) {
                    hits += 1;
                }
            }
            h.push(hits as f64 / n.max(1) as f64);
        }
        halving.push(h);
        let count = chains.iter().map(Vec::len).sum::<usize>().max(1) as f64;
        u_mean.push(
            (0..radii.len())
                .map(|i| chains.iter().flatten().map(|s| s.seqs[j].values[i].1 as f64).sum::<f64>() / count)
                .collect(),
        );
        for s in chains.iter().flatten() {
            total += 1;
            monotone += u64::from(s.seqs[j].is_nonincreasing());
        }
    }
    Ok(SprinklingReport {
        eps: eps.to_vec(),
        unique,
        final_u_one,
        monotone_samples: monotone,
        total_samples: total,
        halving,
        u_mean,
        radii,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lbox(d: usize, n: i32) -> Region {
        RegionSpec::boxed(d, n).build().unwrap()
    }

    fn open_path(r: &Region, w: &mut BondConfig, pts: &[Vec<i32>]) {
        for s in pts.windows(2) {
            let a = r.vertex_at(&s[0]).unwrap();
            let b = r.vertex_at(&s[1]).unwrap();
            w.set(r.edge_between(a, b).unwrap(), true);
        }
    }

    fn straight(from: [i32; 2], to: [i32; 2]) -> Vec<Vec<i32>> {
        let mut out = vec![from.to_vec()];
        let mut cur = from;
        while cur != to {
            for k in 0..2 {
                if cur[k] != to[k] {
                    cur[k] += (to[k] - cur[k]).signum();
                    break;
                }
            }
            out.push(cur.to_vec());
        }
        out
    }

    #[test]
    fn frame_matches_geometry() {
        let r = lbox(3, 4);
        let f = BoxFrame::new(&r, 2).unwrap();
        assert_eq!(f.len(), 125);
        let base = r.node_at(&[1, -1, 0]).unwrap() as i64;
        let mut seen = std::collections::BTreeSet::new();
        for j in 0..f.edges.len() {
            let e = f.edge_id(&r, base, j);
            let [a, b] = r.edge(e);
            assert!(sup_dist(r.coords(a), &[1, -1, 0]) <= 2 && sup_dist(r.coords(b), &[1, -1, 0]) <= 2);
            seen.insert(e);
        }
        assert_eq!(seen.len(), 3 * 5 * 5 * 4);
        assert!(f.check(&r, &[3, 0, 0]).is_err());
    }

    #[test]
    fn density_event_examples() {
        let r = lbox(2, 6);
        let c = [0, 0];
        assert!(density_event(&r, &BondConfig::ones(&r), &c, 2, 3, 5).unwrap());
        assert!(!density_event(&r, &BondConfig::zeros(&r), &c, 2, 3, 5).unwrap());
        // A comb: the row y=0 plus vertical teeth at every even x reaches
        // every grid box and the boundary.
        let mut w = BondConfig::zeros(&r);
        open_path(&r, &mut w, &straight([-5, 0], [5, 0]));
        for x in (-4..=4).step_by(2) {
            open_path(&r, &mut w, &straight([x, -5], [x, 5]));
        }
        assert!(density_event(&r, &w, &c, 2, 3, 5).unwrap());
        assert!(density_event(&r, &w, &c, 4, 3, 5).is_err());
    }

    #[test]
    fn unique_examples() {
        let r = lbox(2, 8);
        let c = [0, 0];
        let z = BondConfig::zeros(&r);
        assert!(unique_event(&r, &BondConfig::ones(&r), &z, &c, 8).unwrap());
        assert!(!unique_event(&r, &z, &z, &c, 8).unwrap());
        // Two radial crossings from the center ring to the outer boundary,
        // on opposite sides; a bridge in γ joins them inside Λ_4.
        let mut w = BondConfig::zeros(&r);
        open_path(&r, &mut w, &straight([1, 0], [8, 0]));
        open_path(&r, &mut w, &straight([-1, 0], [-8, 0]));
        assert!(!unique_event(&r, &w, &z, &c, 8).unwrap());
        let mut g = BondConfig::zeros(&r);
        open_path(&r, &mut g, &straight([-1, 0], [1, 0]));
        assert!(unique_event(&r, &w, &g, &c, 8).unwrap());
        // The same bridge outside Λ_4 does not count.
        let mut far = BondConfig::zeros(&r);
        open_path(&r, &mut far, &[vec![5, 0], vec![5, 1], vec![5, 2], vec![4, 2], vec![3, 2]]);
        assert!(!unique_event(&r, &w, &far, &c, 8).unwrap());
        assert!(UniqueEvaluator::new(&r, 7).is_err());
    }

    #[test]
    fn u_sequence_examples() {
        // L = 32, δ = 1/2: V_0 = Λ_8, V_1 = Λ_2, clusters of ω ∩ Λ_16.
        let r = lbox(2, 16);
        let c = [0, 0];
        let z = BondConfig::zeros(&r);
        let one = BondConfig::ones(&r);
        let s = u_sequence(&r, &one, &z, &c, 32, 0.5).unwrap();
        assert_eq!(s.radii, vec![8, 2]);
        assert_eq!(s.values, vec![(0, 1), (1, 1)]);
        let s = u_sequence(&r, &z, &z, &c, 32, 0.5).unwrap();
        assert_eq!(s.values[0].1, 64);
        assert_eq!(s.values[1].1, 0);
        // Two clusters reaching V_1, bridged in V_0 \ V_1.
        let mut w = BondConfig::zeros(&r);
        open_path(&r, &mut w, &straight([1, 0], [8, 0]));
        open_path(&r, &mut w, &straight([1, 2], [8, 2]));
        let mut g = BondConfig::zeros(&r);
        open_path(&r, &mut g, &straight([5, 0], [5, 2]));
        let s = u_sequence(&r, &w, &g, &c, 32, 0.5).unwrap();
        // U_0 counts every cluster touching ∂Λ_8, singletons included.
        assert_eq!(s.values, vec![(0, 64), (1, 1)]);
        let s = u_sequence(&r, &w, &z, &c, 32, 0.5).unwrap();
        assert_eq!(s.values, vec![(0, 64), (1, 2)]);
        // Full sprinkling merges everything that reaches V_1.
        let s = u_sequence(&r, &w, &one, &c, 32, 0.5).unwrap();
        assert_eq!(s.values[1].1, 1);
    }

    #[test]
    fn u_sequence_two_clusters_one_bridge() {
        // Two clusters cover ∂Λ_8 between them: the upper half of the ring
        // with a spoke down to (0,1), and the lower half with a spoke to (0,-1).
        let r = lbox(2, 16);
        let c = [0, 0];
        let mut w = BondConfig::zeros(&r);
        for seg in [([-8, 1], [-8, 8]), ([-8, 8], [8, 8]), ([8, 8], [8, 1]), ([0, 8], [0, 1])] {
            open_path(&r, &mut w, &straight(seg.0, seg.1));
        }
        for seg in [([-8, 0], [-8, -8]), ([-8, -8], [8, -8]), ([8, -8], [8, 0]), ([0, -8], [0, -1])] {
            open_path(&r, &mut w, &straight(seg.0, seg.1));
        }
        let z = BondConfig::zeros(&r);
        assert_eq!(u_sequence(&r, &w, &z, &c, 32, 0.5).unwrap().values, vec![(0, 2), (1, 2)]);
        let mut g = BondConfig::zeros(&r);
        open_path(&r, &mut g, &straight([8, 0], [8, 1]));
        assert_eq!(u_sequence(&r, &w, &g, &c, 32, 0.5).unwrap().values, vec![(0, 2), (1, 1)]);
        // A bridge inside V_1 is not used.
        let mut inner = BondConfig::zeros(&r);
        open_path(&r, &mut inner, &straight([0, -1], [0, 1]));
        assert_eq!(u_sequence(&r, &w, &inner, &c, 32, 0.5).unwrap().values, vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn disconnection_extremes() {
        let spec = SamplerSpec { burn_in: 2, thinning: 1, samples: 20, chains: 2, ..Default::default() };
        let r = disconnection_free(2, 2, 0.5, 1.0, &FkParams::new(0.0, 2.0).unwrap(), &spec, 1).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.derived.as_ref().unwrap().value, 0.0);
        let r = disconnection_free(2, 2, 0.5, 1.0, &FkParams::new(1.0, 2.0).unwrap(), &spec, 1).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert!(r.is_bound());
    }

    #[test]
    fn estimate_trivial_events() {
        let r = RegionSpec::single_edge().build().unwrap();
        let spec = SamplerSpec { burn_in: 1, thinning: 1, samples: 100, chains: 2, ..Default::default() };
        let p = FkParams::new(0.5, 2.0).unwrap();
        let t = estimate(&r, &BoundarySpec::free(), &p, &EventPredicate::always(), &spec, 3).unwrap();
        assert_eq!((t.estimate, t.stderr), (1.0, 0.0));
        let never = EventPredicate::new("never", |_, _| false);
        assert_eq!(estimate(&r, &BoundarySpec::free(), &p, &never, &spec, 3).unwrap().estimate, 0.0);
    }

    #[test]
    fn slab_trivial_targets() {
        let spec = SamplerSpec { burn_in: 2, thinning: 1, samples: 10, chains: 1, ..Default::default() };
        let p = FkParams::new(0.3, 2.0).unwrap();
        let res = slab_connection(3, 1, 3, &p, 0.0, &[vec![0, 0, 0]], &spec, 1).unwrap();
        assert_eq!(res[0].estimate, 1.0);
        let res = slab_connection(3, 1, 3, &p, 1.0, &slab_far_targets(3, 3), &spec, 1).unwrap();
        assert!(res.iter().all(|r| r.estimate == 1.0));
        assert!(slab_connection(3, 1, 3, &p, 0.0, &[vec![0, 0, 4]], &spec, 1).is_err());
    }
}
