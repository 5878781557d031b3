//! Exact enumeration of FK and Ising measures on micro-instances.
//!
//! The FK enumerator walks the configuration tree depth-first with a
//! rollback union-find, so each leaf costs O(1) amortised instead of a fresh
//! labeling. Subtree weights are returned up the recursion, which makes the
//! partition function a pairwise (tree) sum.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bonds::{label_clusters, BondConfig, BoundarySpec, ClusterLabeling};
use crate::error::{Error, Result};
use crate::geometry::{EdgeId, NodeId, Region};
use crate::stats::KahanSum;
use crate::unionfind::RollbackUnionFind;

/// Largest number of unrevealed edges the FK enumerator accepts.
pub const MAX_ENUM_EDGES: usize = 24;
/// Largest number of spins the Ising enumerator accepts.
pub const MAX_ISING_SPINS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkParams {
    pub p: f64,
    pub q: f64,
}

impl FkParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        let f = FkParams { p, q };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("p = {} outside [0,1]", self.p)));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(Error::invalid(format!("q = {} must be a finite real >= 1", self.q)));
        }
        Ok(())
    }

    /// `p_e = multiplier_e * p`.
    pub fn edge_p(&self, bc: &BoundarySpec, e: EdgeId) -> f64 {
        bc.multiplier(e) * self.p
    }
}

type PredFn = dyn Fn(&BondConfig, &ClusterLabeling) -> bool + Send + Sync;

/// A named, deterministic function of a configuration and its labeling.
#[derive(Clone)]
pub struct EventPredicate {
    name: String,
    f: Arc<PredFn>,
}

impl fmt::Debug for EventPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EventPredicate({})", self.name)
    }
}

impl EventPredicate {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&BondConfig, &ClusterLabeling) -> bool + Send + Sync + 'static,
    ) -> Self {
        EventPredicate { name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, omega: &BondConfig, labeling: &ClusterLabeling) -> bool {
        (self.f)(omega, labeling)
    }

    pub fn always() -> Self {
        Self::new("always", |_, _| true)
    }

    pub fn edge_open(e: EdgeId) -> Self {
        Self::new(format!("edge_open({e})"), move |w, _| w.get(e))
    }

    pub fn connected(a: Vec<NodeId>, b: Vec<NodeId>) -> Self {
        Self::new("connected", move |_, l| l.is_connected(&a, &b).unwrap_or(false))
    }
}

/// Observables evaluated at every leaf of the enumeration.
#[derive(Clone, Debug)]
pub enum Observable {
    /// `ω_e ω_f`
    EdgePair(EdgeId, EdgeId),
    /// Some cluster meets both sets.
    Connected(Vec<NodeId>, Vec<NodeId>),
    /// Anything else; costs a full labeling per leaf.
    Event(EventPredicate),
}

/// Normalised expectations from one enumeration.
#[derive(Clone, Debug)]
pub struct FkExpectations {
    pub z: f64,
    /// `φ[ω_e]` for every edge.
    pub edge: Vec<f64>,
    /// One value per requested observable, in order.
    pub observables: Vec<f64>,
}

struct Enumerator<'a> {
    region: &'a Region,
    order: Vec<EdgeId>,
    pe: Vec<f64>,
    qpow: Vec<f64>,
    uf: RollbackUnionFind,
    open: BondConfig,
    obs: &'a [Observable],
    bc: &'a BoundarySpec,
    edge_acc: Vec<KahanSum>,
    obs_acc: Vec<KahanSum>,
    need_leaf: bool,
    /// Per-leaf root cache, valid where `stamp == leaf_id`.
    roots: Vec<u32>,
    stamp: Vec<u32>,
    leaf_id: u32,
}

impl Enumerator<'_> {
    fn leaf(&mut self, w: f64) -> f64 {
        let w = w * self.qpow[self.uf.counted_sets];
        if self.need_leaf && w != 0.0 {
            self.leaf_id = self.leaf_id.wrapping_add(1);
            if self.leaf_id == 0 {
                self.stamp.iter_mut().for_each(|s| *s = 0);
                self.leaf_id = 1;
            }
            let mut labeling: Option<ClusterLabeling> = None;
            for (i, o) in self.obs.iter().enumerate() {
                let hit = match o {
                    Observable::EdgePair(a, b) => self.open.get(*a) && self.open.get(*b),
                    Observable::Connected(a, b) => {
                        let (uf, roots, stamp, id) = (&self.uf, &mut self.roots, &mut self.stamp, self.leaf_id);
                        let mut root = |x: u32| {
                            if stamp[x as usize] != id {
                                stamp[x as usize] = id;
                                roots[x as usize] = uf.find(x);
                            }
                            roots[x as usize]
                        };
                        a.iter().any(|&x| {
                            let rx = root(x);
                            b.iter().any(|&y| root(y) == rx)
                        })
                    }
                    Observable::Event(ev) => {
                        let l = labeling.get_or_insert_with(|| {
                            label_clusters(self.region, &self.open, self.bc).expect("own region")
                        });
                        ev.eval(&self.open, l)
                    }
                };
                if hit {
                    self.obs_acc[i].add(w);
                }
            }
        }
        w
    }

    fn walk(&mut self, depth: usize, w: f64) -> f64 {
        if depth == self.order.len() {
            return self.leaf(w);
        }
        let e = self.order[depth];
        let pe = self.pe[e as usize];
        let mut total = 0.0;
        if pe < 1.0 {
            total += self.walk(depth + 1, w * (1.0 - pe));
        }
        if pe > 0.0 {
            let [a, b] = self.region.edge(e);
            self.uf.union(a, b);
            self.open.set(e, true);
            let sub = self.walk(depth + 1, w * pe);
            self.open.set(e, false);
            self.uf.undo();
            self.edge_acc[e as usize].add(sub);
            total += sub;
        }
        total
    }
}

/// Sum `weight(ω)` over all `ω` agreeing with `fixed` (per-edge `Some(bit)`),
/// accumulating per-edge open weight and leaf observables.
pub fn fk_enumerate(
    region: &Region,
    bc: &BoundarySpec,
    params: &FkParams,
    fixed: Option<&[Option<bool>]>,
    observables: &[Observable],
) -> Result<FkExpectations> {
    params.validate()?;
    bc.validate(region)?;
    let ne = region.n_edges();
    if let Some(f) = fixed {
        if f.len() != ne {
            return Err(Error::RegionMismatch { expected: ne, got: f.len() });
        }
    }
    let is_free = |e: usize| fixed.is_none_or(|f| f[e].is_none());
    let order: Vec<EdgeId> = (0..ne).filter(|&e| is_free(e)).map(|e| e as EdgeId).collect();
    if order.len() > MAX_ENUM_EDGES {
        return Err(Error::CapExceeded { what: "edges", size: order.len(), cap: MAX_ENUM_EDGES });
    }
    let pe: Vec<f64> = (0..ne as EdgeId).map(|e| params.edge_p(bc, e)).collect();
    let mut uf = RollbackUnionFind::new(bc.counted_nodes(region));
    for b in &bc.blocks {
        for w in b.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    let mut open = BondConfig::zeros(region);
    let mut w0 = 1.0;
    if let Some(f) = fixed {
        for (e, v) in f.iter().enumerate() {
            match v {
                Some(true) => {
                    let [a, b] = region.edge(e as EdgeId);
                    uf.union(a, b);
                    open.set(e as EdgeId, true);
                    w0 *= pe[e];
                }
                Some(false) => w0 *= 1.0 - pe[e],
                None => {}
            }
        }
    }
    let qpow: Vec<f64> = (0..=region.n_nodes()).map(|k| params.q.powi(k as i32)).collect();
    let mut en = Enumerator {
        region,
        order,
        pe,
        qpow,
        uf,
        open,
        obs: observables,
        bc,
        edge_acc: vec![KahanSum::default(); ne],
        obs_acc: vec![KahanSum::default(); observables.len()],
        need_leaf: !observables.is_empty(),
        roots: vec![0; region.n_nodes()],
        stamp: vec![0; region.n_nodes()],
        leaf_id: 0,
    };
    let z = en.walk(0, w0);
    if !(z > 0.0) {
        return Err(Error::invalid("partition function vanishes for this conditioning"));
    }
    let mut edge: Vec<f64> = en.edge_acc.iter().map(|s| s.value() / z).collect();
    if let Some(f) = fixed {
        for (e, v) in f.iter().enumerate() {
            if let Some(bit) = v {
                edge[e] = if *bit { 1.0 } else { 0.0 };
            }
        }
    }
    let observables = en.obs_acc.iter().map(|s| s.value() / z).collect();
    Ok(FkExpectations { z, edge, observables })
}

/// `Z^ξ_{Λ,p,q}`.
pub fn fk_partition(region: &Region, bc: &BoundarySpec, params: &FkParams) -> Result<f64> {
    Ok(fk_enumerate(region, bc, params, None, &[])?.z)
}

/// `φ^ξ[event]`.
pub fn fk_event_prob(region: &Region, bc: &BoundarySpec, params: &FkParams, event: &EventPredicate) -> Result<f64> {
    let r = fk_enumerate(region, bc, params, None, &[Observable::Event(event.clone())])?;
    Ok(r.observables[0])
}

/// All single-edge marginals `φ^ξ[ω_e]`.
pub fn fk_edge_marginals(region: &Region, bc: &BoundarySpec, params: &FkParams) -> Result<Vec<f64>> {
    Ok(fk_enumerate(region, bc, params, None, &[])?.edge)
}

/// `φ^ξ[A ↔ B]`.
pub fn fk_connection_prob(
    region: &Region,
    bc: &BoundarySpec,
    params: &FkParams,
    a: &[NodeId],
    b: &[NodeId],
) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let obs = [Observable::Connected(a.to_vec(), b.to_vec())];
    Ok(fk_enumerate(region, bc, params, None, &obs)?.observables[0])
}

/// `φ^ξ[ω_e = 1 | ω_f = revealed_f for the revealed edges]`.
pub fn fk_conditional_edge(
    region: &Region,
    bc: &BoundarySpec,
    params: &FkParams,
    e: EdgeId,
    revealed: &[(EdgeId, bool)],
) -> Result<f64> {
    let ne = region.n_edges();
    if e as usize >= ne {
        return Err(Error::invalid(format!("edge {e} outside region")));
    }
    let mut fixed = vec![None; ne];
    for &(f, v) in revealed {
        let slot = fixed
            .get_mut(f as usize)
            .ok_or_else(|| Error::invalid(format!("revealed edge {f} outside region")))?;
        if slot.is_some_and(|old| old != v) {
            return Err(Error::invalid(format!("edge {f} revealed twice with different values")));
        }
        *slot = Some(v);
    }
    Ok(fk_enumerate(region, bc, params, Some(&fixed), &[])?.edge[e as usize])
}

/// Per-vertex external field `h_x = Σ η_y` over ghost neighbours, and the
/// internal edge list, for an Ising system on `region`.
type IsingSystem = (Vec<f64>, Vec<(usize, usize)>);

fn ising_setup(region: &Region, eta: &[f64]) -> Result<IsingSystem> {
    let n = region.n_vertices();
    if n > MAX_ISING_SPINS {
        return Err(Error::CapExceeded { what: "spins", size: n, cap: MAX_ISING_SPINS });
    }
    if eta.len() != region.n_ghosts() {
        return Err(Error::RegionMismatch { expected: region.n_ghosts(), got: eta.len() });
    }
    if eta.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("boundary field must be finite"));
    }
    let mut h = vec![0.0; n];
    let mut inner = Vec::new();
    for &[a, b] in region.edges() {
        match (region.is_vertex(a), region.is_vertex(b)) {
            (true, true) => inner.push((a as usize, b as usize)),
            (true, false) => h[a as usize] += eta[b as usize - n],
            (false, true) => h[b as usize] += eta[a as usize - n],
            (false, false) => {}
        }
    }
    Ok((h, inner))
}

/// Exact Ising enumeration result: `log Z` and `⟨σ_A⟩` for each requested set.
#[derive(Clone, Debug)]
pub struct IsingExact {
    pub log_z: f64,
    pub correlations: Vec<f64>,
}

/// Enumerate `Σ_σ exp(-β H^η(σ)) Π_{x∈A} σ_x` for each set `A` by a Gray-code
/// walk. `eta` holds one real per ghost (ghost order of the region).
pub fn ising_enumerate(region: &Region, beta: f64, eta: &[f64], sets: &[Vec<NodeId>]) -> Result<IsingExact> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta = {beta} must be finite and >= 0")));
    }
    ising_enumerate_any_beta(region, beta, eta, sets)
}

/// As [`ising_enumerate`] but for any finite `β`, so that finite differences
/// can straddle `β = 0`.
pub(crate) fn ising_enumerate_any_beta(region: &Region, beta: f64, eta: &[f64], sets: &[Vec<NodeId>]) -> Result<IsingExact> {
    if !beta.is_finite() {
        return Err(Error::invalid(format!("beta = {beta} must be finite")));
    }
    let (h, inner) = ising_setup(region, eta)?;
    let n = h.len();
    let mut masks = Vec::with_capacity(sets.len());
    for a in sets {
        let mut m = 0u32;
        for &x in a {
            if !region.is_vertex(x) {
                return Err(Error::invalid(format!("node {x} is not a spin of the region")));
            }
            m ^= 1 << x;
        }
        masks.push(m);
    }
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &inner {
        nbrs[a].push(b);
        nbrs[b].push(a);
    }
    // S(σ) = -H(σ) lies in [-s_max, s_max]; weights are shifted by the
    // extreme value so that none exceeds 1.
    let s_max = inner.len() as f64 + h.iter().map(|x| x.abs()).sum::<f64>();
    let s_ref = if beta >= 0.0 { s_max } else { -s_max };
    let mut spin = vec![1i8; n];
    let mut s = inner.len() as f64 + h.iter().sum::<f64>();
    let mut neg: u32 = 0;
    let mut z = KahanSum::default();
    let mut acc = vec![KahanSum::default(); sets.len()];
    let total: u64 = 1 << n;
    for step in 0..total {
        if step > 0 {
            let j = step.trailing_zeros() as usize;
            let local: f64 = nbrs[j].iter().map(|&y| spin[y] as f64).sum::<f64>() + h[j];
            s -= 2.0 * spin[j] as f64 * local;
            spin[j] = -spin[j];
            neg ^= 1 << j;
        }
        let w = (beta * (s - s_ref)).exp();
        z.add(w);
        for (i, &m) in masks.iter().enumerate() {
            if (neg & m).count_ones().is_multiple_of(2) {
                acc[i].add(w);
            } else {
                acc[i].add(-w);
            }
        }
    }
    let zv = z.value();
    Ok(IsingExact {
        log_z: beta * s_ref + zv.ln(),
        correlations: acc.iter().map(|a| a.value() / zv).collect(),
    })
}

/// `Z^η_{Λ,β}`.
pub fn ising_partition(region: &Region, beta: f64, eta: &[f64]) -> Result<f64> {
    Ok(ising_enumerate(region, beta, eta, &[])?.log_z.exp())
}

/// `log Z^η_{Λ,β}`, safe for large systems where `Z` overflows.
pub fn ising_log_partition(region: &Region, beta: f64, eta: &[f64]) -> Result<f64> {
    Ok(ising_enumerate(region, beta, eta, &[])?.log_z)
}

/// `⟨Π_{x∈A} σ_x⟩^η_{Λ,β}`.
pub fn ising_expectation(region: &Region, beta: f64, eta: &[f64], a: &[NodeId]) -> Result<f64> {
    Ok(ising_enumerate(region, beta, eta, &[a.to_vec()])?.correlations[0])
}

/// Both sides of Russo's formula for one edge.
#[derive(Clone, Copy, Debug)]
pub struct RussoReport {
    /// Central finite difference of `φ_p[ω_e]` in `p`.
    pub finite_difference: f64,
    /// `Σ_f Cov(ω_e, ω_f) / (p(1−p))`.
    pub covariance_form: f64,
}

impl RussoReport {
    pub fn relative_error(&self) -> f64 {
        (self.finite_difference - self.covariance_form).abs() / self.covariance_form.abs().max(f64::MIN_POSITIVE)
    }
}

/// `∂_p φ[ω_e]` two ways. Needs `h < p < 1 − h` and no edge multipliers.
pub fn russo_check(region: &Region, bc: &BoundarySpec, params: &FkParams, e: EdgeId, h: f64) -> Result<RussoReport> {
    let (p, q) = (params.p, params.q);
    if !(h > 0.0 && p - h > 0.0 && p + h < 1.0) {
        return Err(Error::invalid(format!("need 0 < p - h and p + h < 1, got p = {p}, h = {h}")));
    }
    let ne = region.n_edges() as EdgeId;
    if e >= ne {
        return Err(Error::invalid(format!("edge {e} out of range")));
    }
    let pairs: Vec<Observable> = (0..ne).map(|f| Observable::EdgePair(e, f)).collect();
    let at = fk_enumerate(region, bc, params, None, &pairs)?;
    let mean_e = at.edge[e as usize];
    let cov: f64 = (0..ne as usize).map(|f| at.observables[f] - mean_e * at.edge[f]).sum();
    let up = fk_edge_marginals(region, bc, &FkParams::new(p + h, q)?)?[e as usize];
    let down = fk_edge_marginals(region, bc, &FkParams::new(p - h, q)?)?[e as usize];
    Ok(RussoReport { finite_difference: (up - down) / (2.0 * h), covariance_form: cov / (p * (1.0 - p)) })
}

/// `φ^{coarse}_{p'}[ω_e] − φ^{fine}_p[ω_e] − (p' − p)/q`, which is nonnegative
/// whenever `fine` is finer than `coarse` and `p ≤ p'`.
pub fn boundary_gap(
    region: &Region,
    fine: &BoundarySpec,
    coarse: &BoundarySpec,
    p: f64,
    p_prime: f64,
    q: f64,
    e: EdgeId,
) -> Result<f64> {
    if !fine.is_finer_than(coarse, region) {
        return Err(Error::invalid("first wiring must be finer than the second"));
    }
    if p > p_prime {
        return Err(Error::invalid(format!("need p <= p', got {p} > {p_prime}")));
    }
    let lo = fk_edge_marginals(region, fine, &FkParams::new(p, q)?)?[e as usize];
    let hi = fk_edge_marginals(region, coarse, &FkParams::new(p_prime, q)?)?[e as usize];
    Ok(hi - lo - (p_prime - p) / q)
}

/// Left minus right side of the Ginibre inequality
/// `⟨σ_Aσ_B⟩^{η'} − ⟨σ_Aσ_B⟩^η ≥ |⟨σ_A⟩^{η'}⟨σ_B⟩^η − ⟨σ_B⟩^{η'}⟨σ_A⟩^η|`.
pub fn ginibre_gap(region: &Region, beta: f64, eta: &[f64], eta_prime: &[f64], a: &[NodeId], b: &[NodeId]) -> Result<f64> {
    if eta.len() != eta_prime.len() || eta.iter().zip(eta_prime).any(|(x, y)| x.abs() > *y) {
        return Err(Error::invalid("need |η| ≤ η' entrywise"));
    }
    let mut ab: Vec<NodeId> = a.to_vec();
    ab.extend_from_slice(b);
    let sets = [a.to_vec(), b.to_vec(), ab];
    let lo = ising_enumerate(region, beta, eta, &sets)?.correlations;
    let hi = ising_enumerate(region, beta, eta_prime, &sets)?.correlations;
    Ok(hi[2] - lo[2] - (hi[0] * lo[1] - hi[1] * lo[0]).abs())
}
