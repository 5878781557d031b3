//! Markov chains for the FK measure, sprinkling and the sequential coupling.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bonds::{label_clusters, BondConfig, BoundarySpec};
use crate::error::{Error, Result};
use crate::geometry::{EdgeId, NodeId, Region};
use crate::oracle::{fk_conditional_edge, FkParams, MAX_ENUM_EDGES};
use crate::rng::{stream, Purpose, Rng};
use crate::unionfind::UnionFind;

/// Sprinkling intensity `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprinklingParams {
    pub eps: f64,
}

impl SprinklingParams {
    pub fn new(eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::invalid(format!("eps = {eps} outside [0,1]")));
        }
        Ok(SprinklingParams { eps })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Swendsen–Wang when `q = 2` and the boundary allows it, heat bath otherwise.
    #[default]
    Auto,
    HeatBath,
    SwendsenWang,
    /// Heat bath with connectivity frozen at the start of each sweep. Not an
    /// exact kernel for `q > 1`; provided for quick exploratory runs only.
    FrozenHeatBath,
}

/// One Markov chain: configuration, sweep counter and its own random stream.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub omega: BondConfig,
    pub sweeps: u64,
    pub rng: Rng,
}

impl ChainState {
    /// Empty configuration, stream keyed by `(seed, chain)`.
    pub fn new(region: &Region, seed: u64, chain: u64) -> Self {
        ChainState {
            omega: BondConfig::zeros(region),
            sweeps: 0,
            rng: stream(seed, chain, Purpose::Chain),
        }
    }
}

/// Scratch space for the off-edge connectivity search.
#[derive(Clone, Debug)]
pub struct HeatBath {
    block_of: Vec<u32>,
    blocks: Vec<Vec<NodeId>>,
    counted: Vec<bool>,
    mark: Vec<u32>,
    side: Vec<u8>,
    generation: u32,
    queues: [Vec<u32>; 2],
    pe: Vec<f64>,
}

/// Outcome of the search for the edge `{a, b}` with the edge itself removed.
enum OffEdge {
    Connected,
    /// Different components; whether each one counts towards `k`.
    Separate(bool, bool),
}

impl HeatBath {
    pub fn new(region: &Region, bc: &BoundarySpec, params: &FkParams) -> Result<Self> {
        params.validate()?;
        bc.validate(region)?;
        let n = region.n_nodes() + bc.blocks.len();
        Ok(HeatBath {
            block_of: bc.block_of(region),
            blocks: bc.blocks.clone(),
            counted: bc.counted_nodes(region),
            mark: vec![0; n],
            side: vec![0; n],
            generation: 0,
            queues: [Vec::new(), Vec::new()],
            pe: (0..region.n_edges() as EdgeId).map(|e| params.edge_p(bc, e)).collect(),
        })
    }

    fn bump(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.generation = 1;
        }
    }

    fn visit(&mut self, node: u32, s: u8) -> Option<bool> {
        let i = node as usize;
        if self.mark[i] == self.generation {
            return Some(self.side[i] != s);
        }
        self.mark[i] = self.generation;
        self.side[i] = s;
        self.queues[s as usize].push(node);
        None
    }

    fn node_counted(&self, node: u32, n_nodes: usize) -> bool {
        node as usize >= n_nodes || self.counted[node as usize]
    }

    /// Expand one queued node of side `s`; true when the other side is met.
    fn step(&mut self, region: &Region, omega: &BondConfig, skip: EdgeId, s: u8, head: &mut usize, found: &mut bool) -> bool {
        let node = self.queues[s as usize][*head];
        *head += 1;
        let n_nodes = region.n_nodes();
        if !*found && self.node_counted(node, n_nodes) {
            *found = true;
        }
        if node as usize >= n_nodes {
            let b = node as usize - n_nodes;
            for j in 0..self.blocks[b].len() {
                let m = self.blocks[b][j];
                if self.visit(m, s) == Some(true) {
                    return true;
                }
            }
            return false;
        }
        let blk = self.block_of[node as usize];
        if blk != u32::MAX && self.visit(n_nodes as u32 + blk, s) == Some(true) {
            return true;
        }
        for &(y, e) in region.neighbors(node) {
            if e != skip && omega.get(e) && self.visit(y, s) == Some(true) {
                return true;
            }
        }
        false
    }

    /// Interleaved breadth-first search from both endpoints of `e` in `ω \ {e}`.
    fn off_edge(&mut self, region: &Region, omega: &BondConfig, e: EdgeId) -> OffEdge {
        let [a, b] = region.edge(e);
        self.bump();
        self.queues[0].clear();
        self.queues[1].clear();
        self.visit(a, 0);
        self.visit(b, 1);
        let mut heads = [0usize, 0usize];
        let mut found = [false, false];
        loop {
            for s in 0..2u8 {
                let si = s as usize;
                if heads[si] == self.queues[si].len() {
                    // This side is exhausted: the components are distinct.
                    let o = 1 - si;
                    while !found[o] && heads[o] < self.queues[o].len() {
                        let (mut h, mut f) = (heads[o], found[o]);
                        self.step(region, omega, e, o as u8, &mut h, &mut f);
                        heads[o] = h;
                        found[o] = f;
                    }
                    return OffEdge::Separate(found[0], found[1]);
                }
                let (mut h, mut f) = (heads[si], found[si]);
                let met = self.step(region, omega, e, s, &mut h, &mut f);
                heads[si] = h;
                found[si] = f;
                if met {
                    return OffEdge::Connected;
                }
            }
        }
    }

    /// Exact conditional probability that `e` is open given the rest of `ω`.
    pub fn conditional(&mut self, region: &Region, omega: &BondConfig, e: EdgeId, q: f64) -> f64 {
        let p = self.pe[e as usize];
        if q == 1.0 || p == 0.0 || p == 1.0 {
            return p;
        }
        match self.off_edge(region, omega, e) {
            OffEdge::Separate(true, true) => p / (p + q * (1.0 - p)),
            _ => p,
        }
    }

    /// Resample every edge once, in index order, from its exact conditional.
    pub fn sweep(&mut self, state: &mut ChainState, region: &Region, q: f64) {
        for e in 0..region.n_edges() as EdgeId {
            let pr = self.conditional(region, &state.omega, e, q);
            let u: f64 = state.rng.gen();
            state.omega.set(e, u < pr);
        }
        state.sweeps += 1;
    }
}

/// One exact heat-bath sweep. Allocates scratch space; use [`HeatBath`]
/// directly in loops.
pub fn heat_bath_sweep(state: &mut ChainState, region: &Region, bc: &BoundarySpec, params: &FkParams) -> Result<()> {
    state.omega.check_region(region)?;
    HeatBath::new(region, bc, params)?.sweep(state, region, params.q);
    Ok(())
}

/// Approximate sweep: connectivity of `ω \ {e}` is read from a labeling made
/// once at the start of the sweep (edge `e` itself is still excluded when
/// the endpoints are joined only through it, which this cannot see).
pub fn frozen_heat_bath_sweep(state: &mut ChainState, region: &Region, bc: &BoundarySpec, params: &FkParams) -> Result<()> {
    params.validate()?;
    let labeling = label_clusters(region, &state.omega, bc)?;
    for e in 0..region.n_edges() as EdgeId {
        let p = params.edge_p(bc, e);
        let [a, b] = region.edge(e);
        let sep = !labeling.same(a, b)
            && labeling.is_counted(labeling.component(a))
            && labeling.is_counted(labeling.component(b));
        let pr = if sep { p / (p + params.q * (1.0 - p)) } else { p };
        let u: f64 = state.rng.gen();
        state.omega.set(e, u < pr);
    }
    state.sweeps += 1;
    Ok(())
}

/// Swendsen–Wang for `q = 2` with reusable scratch space.
#[derive(Clone, Debug)]
pub struct SwendsenWang {
    pe: Vec<f64>,
    blocks: Vec<Vec<NodeId>>,
    /// Free ghosts; their single edge is an independent `Ber(p_e)`.
    free_ghost: Vec<bool>,
    uf: UnionFind,
    spin: Vec<i8>,
}

impl SwendsenWang {
    pub fn new(region: &Region, bc: &BoundarySpec, params: &FkParams) -> Result<Self> {
        params.validate()?;
        bc.validate(region)?;
        if params.q != 2.0 {
            return Err(Error::Unsupported(format!("Swendsen-Wang needs q = 2, got {}", params.q)));
        }
        let counted = bc.counted_nodes(region);
        let free_ghost: Vec<bool> = counted.iter().map(|c| !c).collect();
        for g in region.ghosts() {
            if free_ghost[g as usize] && region.neighbors(g).len() > 1 {
                return Err(Error::Unsupported(
                    "a free ghost joins several region vertices; use the heat bath".into(),
                ));
            }
        }
        Ok(SwendsenWang {
            pe: (0..region.n_edges() as EdgeId).map(|e| params.edge_p(bc, e)).collect(),
            blocks: bc.blocks.clone(),
            free_ghost,
            uf: UnionFind::new(region.n_nodes()),
            spin: vec![0; region.n_nodes()],
        })
    }

    /// One Edwards–Sokal round trip: uniform spins per cluster, then bonds.
    pub fn step(&mut self, state: &mut ChainState, region: &Region) {
        let n = region.n_nodes();
        self.uf.reset(n);
        for b in &self.blocks {
            for w in b.windows(2) {
                self.uf.union(w[0], w[1]);
            }
        }
        for e in state.omega.open_edges() {
            let [a, b] = region.edge(e);
            if !(self.free_ghost[a as usize] || self.free_ghost[b as usize]) {
                self.uf.union(a, b);
            }
        }
        self.spin.iter_mut().for_each(|s| *s = 0);
        for v in 0..n as u32 {
            let r = self.uf.find(v) as usize;
            if self.spin[r] == 0 {
                self.spin[r] = if state.rng.gen::<bool>() { 1 } else { -1 };
            }
        }
        for e in 0..region.n_edges() as EdgeId {
            let [a, b] = region.edge(e);
            let u: f64 = state.rng.gen();
            let agree = self.free_ghost[a as usize]
                || self.free_ghost[b as usize]
                || self.spin[self.uf.find(a) as usize] == self.spin[self.uf.find(b) as usize];
            state.omega.set(e, agree && u < self.pe[e as usize]);
        }
        state.sweeps += 1;
    }
}

pub fn swendsen_wang_step(state: &mut ChainState, region: &Region, bc: &BoundarySpec, p: f64) -> Result<()> {
    state.omega.check_region(region)?;
    SwendsenWang::new(region, bc, &FkParams::new(p, 2.0)?)?.step(state, region);
    Ok(())
}

/// A configured kernel ready to advance chains.
#[derive(Clone, Debug)]
pub enum Dynamics {
    HeatBath(HeatBath, f64),
    SwendsenWang(SwendsenWang),
    Frozen(BoundarySpec, FkParams),
}

impl Dynamics {
    pub fn new(kernel: Kernel, region: &Region, bc: &BoundarySpec, params: &FkParams) -> Result<Self> {
        match kernel {
            Kernel::HeatBath => Ok(Dynamics::HeatBath(HeatBath::new(region, bc, params)?, params.q)),
            Kernel::SwendsenWang => Ok(Dynamics::SwendsenWang(SwendsenWang::new(region, bc, params)?)),
            Kernel::FrozenHeatBath => {
                params.validate()?;
                bc.validate(region)?;
                Ok(Dynamics::Frozen(bc.clone(), *params))
            }
            Kernel::Auto => match SwendsenWang::new(region, bc, params) {
                Ok(sw) => Ok(Dynamics::SwendsenWang(sw)),
                Err(Error::Unsupported(_)) => Ok(Dynamics::HeatBath(HeatBath::new(region, bc, params)?, params.q)),
                Err(e) => Err(e),
            },
        }
    }

    pub fn advance(&mut self, state: &mut ChainState, region: &Region) {
        match self {
            Dynamics::HeatBath(hb, q) => hb.sweep(state, region, *q),
            Dynamics::SwendsenWang(sw) => sw.step(state, region),
            Dynamics::Frozen(bc, params) => {
                frozen_heat_bath_sweep(state, region, bc, params).expect("validated at construction")
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, Dynamics::Frozen(..))
    }
}

/// Chain schedule. `chains` logical chains each own a random stream; the
/// samples are split between them, and `threads` only decides how many run
/// at once, so results never depend on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSpec {
    pub kernel: Kernel,
    pub burn_in: u64,
    pub thinning: u64,
    pub samples: u64,
    pub chains: usize,
    /// Worker threads; 0 picks the machine default.
    pub threads: usize,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec { kernel: Kernel::Auto, burn_in: 1000, thinning: 10, samples: 1000, chains: 4, threads: 0 }
    }
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.thinning == 0 {
            return Err(Error::invalid("thinning must be positive"));
        }
        if self.samples == 0 || self.chains == 0 {
            return Err(Error::invalid("samples and chains must be positive"));
        }
        Ok(())
    }

    /// Retained samples assigned to chain `c`.
    pub fn samples_for(&self, c: usize) -> u64 {
        let k = self.chains as u64;
        self.samples / k + u64::from((c as u64) < self.samples % k)
    }
}

/// Per-sample context handed to observers.
pub struct SampleCtx<'a> {
    pub chain: usize,
    pub index: u64,
    pub sweep: u64,
    /// Independent stream for auxiliary randomness (sprinkling, flips).
    pub aux: &'a mut Rng,
}

/// Run every logical chain and collect `observe` outputs, per chain, in order.
pub fn run_chains<T, F>(
    region: &Region,
    bc: &BoundarySpec,
    params: &FkParams,
    spec: &SamplerSpec,
    seed: u64,
    observe: F,
) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(&BondConfig, &mut SampleCtx) -> T + Sync,
{
    spec.validate()?;
    let template = Dynamics::new(spec.kernel, region, bc, params)?;
    let run_one = |c: usize| -> Vec<T> {
        let mut dynamics = template.clone();
        let mut state = ChainState::new(region, seed, c as u64);
        let mut aux = stream(seed, c as u64, Purpose::Sprinkle);
        for _ in 0..spec.burn_in {
            dynamics.advance(&mut state, region);
        }
        let n = spec.samples_for(c);
        let mut out = Vec::with_capacity(n as usize);
        for index in 0..n {
            for _ in 0..spec.thinning {
                dynamics.advance(&mut state, region);
            }
            let mut ctx = SampleCtx { chain: c, index, sweep: state.sweeps, aux: &mut aux };
            out.push(observe(&state.omega, &mut ctx));
        }
        out
    };
    Ok(par_map(spec.chains, spec.threads, run_one))
}

/// `(0..n).map(f)` in order, on up to `threads` workers.
pub fn par_map<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if threads != 1 && n > 1 {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
            if let Ok(pool) = pool {
                return pool.install(|| (0..n).into_par_iter().map(&f).collect());
            }
        }
    }
    let _ = threads;
    (0..n).map(f).collect()
}

/// Uniform field `U_e`; `γ_ε = 1[U_e < ε]`, so one field serves every `ε`
/// and `γ_ε` is pathwise increasing in `ε`.
#[derive(Clone, Debug)]
pub struct SprinkleField {
    u: Vec<f64>,
    region_id: u64,
}

impl SprinkleField {
    pub fn draw(region: &Region, rng: &mut Rng) -> Self {
        SprinkleField { u: (0..region.n_edges()).map(|_| rng.gen()).collect(), region_id: region.id() }
    }

    pub fn gamma(&self, region: &Region, eps: f64) -> BondConfig {
        debug_assert_eq!(self.region_id, region.id());
        BondConfig::from_fn(region, |e| self.u[e as usize] < eps)
    }
}

/// Iterator over `(ω, γ)` pairs from one chain: burn-in, then one pair every
/// `thinning` steps with a fresh `γ ~ ⊗ Ber(ε)` independent of `ω`.
pub struct SprinkledSampler<'a> {
    region: &'a Region,
    dynamics: Dynamics,
    state: ChainState,
    aux: Rng,
    eps: f64,
    thinning: u64,
    burned: Option<u64>,
}

impl Iterator for SprinkledSampler<'_> {
    type Item = (BondConfig, BondConfig);

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(b) = self.burned.take() {
            for _ in 0..b {
                self.dynamics.advance(&mut self.state, self.region);
            }
        }
        for _ in 0..self.thinning {
            self.dynamics.advance(&mut self.state, self.region);
        }
        let gamma = SprinkleField::draw(self.region, &mut self.aux).gamma(self.region, self.eps);
        Some((self.state.omega.clone(), gamma))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn sample_sprinkled<'a>(
    region: &'a Region,
    bc: &BoundarySpec,
    params: &FkParams,
    sprinkle: SprinklingParams,
    kernel: Kernel,
    burn_in: u64,
    thinning: u64,
    seed: u64,
) -> Result<SprinkledSampler<'a>> {
    SprinklingParams::new(sprinkle.eps)?;
    if thinning == 0 || burn_in == 0 {
        return Err(Error::invalid("burn-in and thinning must be positive"));
    }
    Ok(SprinkledSampler {
        region,
        dynamics: Dynamics::new(kernel, region, bc, params)?,
        state: ChainState::new(region, seed, 0),
        aux: stream(seed, 0, Purpose::Sprinkle),
        eps: sprinkle.eps,
        thinning,
        burned: Some(burn_in),
    })
}

/// `ε = (p′ − p) / q`.
pub fn epsilon_for(p: f64, p_prime: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&p_prime) || p >= p_prime {
        return Err(Error::invalid(format!("need 0 <= p < p' <= 1, got p={p}, p'={p_prime}")));
    }
    if !(q >= 1.0) {
        return Err(Error::invalid(format!("q = {q} must be >= 1")));
    }
    Ok((p_prime - p) / q)
}

/// Reveal edges in index order, each from its exact conditional given the
/// ones already revealed, with one shared uniform per edge driving both
/// parameters. Free boundary.
pub fn sequential_coupling(region: &Region, p: f64, p_prime: f64, q: f64, seed: u64) -> Result<(BondConfig, BondConfig)> {
    if p > p_prime {
        return Err(Error::invalid(format!("need p <= p', got p={p}, p'={p_prime}")));
    }
    if region.n_edges() > MAX_ENUM_EDGES {
        return Err(Error::CapExceeded { what: "edges", size: region.n_edges(), cap: MAX_ENUM_EDGES });
    }
    let bc = BoundarySpec::free();
    let lo = FkParams::new(p, q)?;
    let hi = FkParams::new(p_prime, q)?;
    let mut rng = stream(seed, 0, Purpose::Coupling);
    let mut w_lo = BondConfig::zeros(region);
    let mut w_hi = BondConfig::zeros(region);
    let mut rev_lo = Vec::with_capacity(region.n_edges());
    let mut rev_hi = Vec::with_capacity(region.n_edges());
    for e in 0..region.n_edges() as EdgeId {
        let u: f64 = rng.gen();
        let c_lo = fk_conditional_edge(region, &bc, &lo, e, &rev_lo)?;
        let c_hi = fk_conditional_edge(region, &bc, &hi, e, &rev_hi)?;
        let (b_lo, b_hi) = (u <= c_lo, u <= c_hi);
        w_lo.set(e, b_lo);
        w_hi.set(e, b_hi);
        rev_lo.push((e, b_lo));
        rev_hi.push((e, b_hi));
    }
    Ok((w_lo, w_hi))
}
