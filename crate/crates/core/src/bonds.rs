//! Bond configurations, boundary wirings and cluster labelings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sup_dist, AnnulusSpec, EdgeId, NodeId, Region};
use crate::unionfind::UnionFind;

/// A `{0,1}` assignment over the edges of one region.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BondConfig {
    region_id: u64,
    len: usize,
    words: Vec<u64>,
}

impl BondConfig {
    pub fn zeros(region: &Region) -> Self {
        let len = region.n_edges();
        BondConfig {
            region_id: region.id(),
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(region: &Region) -> Self {
        let mut c = Self::zeros(region);
        c.fill(true);
        c
    }

    pub fn from_fn(region: &Region, mut f: impl FnMut(EdgeId) -> bool) -> Self {
        let mut c = Self::zeros(region);
        for e in 0..c.len {
            if f(e as EdgeId) {
                c.set(e as EdgeId, true);
            }
        }
        c
    }

    pub fn region_id(&self) -> u64 {
        self.region_id
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, e: EdgeId) -> bool {
        let e = e as usize;
        (self.words[e >> 6] >> (e & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, e: EdgeId, open: bool) {
        let e = e as usize;
        let mask = 1u64 << (e & 63);
        if open {
            self.words[e >> 6] |= mask;
        } else {
            self.words[e >> 6] &= !mask;
        }
    }

    pub fn fill(&mut self, open: bool) {
        for w in &mut self.words {
            *w = if open { u64::MAX } else { 0 };
        }
        self.clear_tail();
    }

    fn clear_tail(&mut self) {
        let r = self.len & 63;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    pub fn count_open(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn open_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.len as EdgeId).filter(move |&e| self.get(e))
    }

    /// `ω ∪ γ`.
    pub fn union(&self, other: &BondConfig) -> Result<BondConfig> {
        self.check_same(other)?;
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect();
        Ok(BondConfig { words, ..self.clone() })
    }

    /// Pointwise `self ≤ other`.
    pub fn is_below(&self, other: &BondConfig) -> bool {
        self.len == other.len && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Keep only the edges accepted by `keep`.
    pub fn masked(&self, mut keep: impl FnMut(EdgeId) -> bool) -> BondConfig {
        let mut out = self.clone();
        for e in 0..self.len as EdgeId {
            if out.get(e) && !keep(e) {
                out.set(e, false);
            }
        }
        out
    }

    /// `ω ∩ Λ_r(center)`: edges with both endpoints in the box.
    pub fn restricted_to_ball(&self, region: &Region, center: &[i32], r: i32) -> BondConfig {
        self.masked(|e| {
            let [a, b] = region.edge(e);
            sup_dist(region.coords(a), center) <= r && sup_dist(region.coords(b), center) <= r
        })
    }

    /// Hex string, edge `i` at bit `i % 8` of byte `i / 8`.
    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = (0..self.len.div_ceil(8))
            .map(|i| (self.words[i / 8] >> ((i % 8) * 8)) as u8)
            .collect();
        hex::encode(bytes)
    }

    pub fn from_hex(region: &Region, s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::invalid(format!("bad hex: {e}")))?;
        let mut c = Self::zeros(region);
        if bytes.len() != c.len.div_ceil(8) {
            return Err(Error::RegionMismatch { expected: c.len, got: bytes.len() * 8 });
        }
        for (i, b) in bytes.iter().enumerate() {
            c.words[i / 8] |= (*b as u64) << ((i % 8) * 8);
        }
        if c.words.iter().zip(Self::ones(region).words).any(|(w, m)| w & !m != 0) {
            return Err(Error::invalid("bits set beyond the edge count"));
        }
        Ok(c)
    }

    pub(crate) fn check_region(&self, region: &Region) -> Result<()> {
        if self.region_id != region.id() || self.len != region.n_edges() {
            return Err(Error::RegionMismatch { expected: region.n_edges(), got: self.len });
        }
        Ok(())
    }

    fn check_same(&self, other: &BondConfig) -> Result<()> {
        if self.region_id != other.region_id || self.len != other.len {
            return Err(Error::RegionMismatch { expected: self.len, got: other.len });
        }
        Ok(())
    }
}

/// Boundary condition: a wiring partition plus optional per-edge intensity
/// multipliers.
///
/// Nodes in the same block are identified. Nodes outside every block are free.
/// A block always counts as one cluster in `k`, whether or not an open edge
/// reaches it; free ghosts count only through the region vertex they attach to.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    #[serde(default)]
    pub blocks: Vec<Vec<NodeId>>,
    /// Edge index -> multiplier `s ∈ [0,1]`; the edge then has intensity `s·p`.
    #[serde(default)]
    pub multipliers: BTreeMap<EdgeId, f64>,
}

impl BoundarySpec {
    pub fn free() -> Self {
        Self::default()
    }

    /// All ghosts identified into one block.
    pub fn wired(region: &Region) -> Self {
        let ghosts: Vec<NodeId> = region.ghosts().collect();
        if ghosts.is_empty() {
            return Self::free();
        }
        BoundarySpec { blocks: vec![ghosts], multipliers: BTreeMap::new() }
    }

    pub fn from_blocks(blocks: Vec<Vec<NodeId>>) -> Self {
        BoundarySpec {
            blocks: blocks.into_iter().filter(|b| !b.is_empty()).collect(),
            multipliers: BTreeMap::new(),
        }
    }

    pub fn with_multiplier(mut self, edges: impl IntoIterator<Item = EdgeId>, s: f64) -> Self {
        for e in edges {
            self.multipliers.insert(e, s);
        }
        self
    }

    pub fn is_free(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn multiplier(&self, e: EdgeId) -> f64 {
        self.multipliers.get(&e).copied().unwrap_or(1.0)
    }

    pub fn validate(&self, region: &Region) -> Result<()> {
        let mut seen = vec![false; region.n_nodes()];
        for b in &self.blocks {
            for &n in b {
                let slot = seen
                    .get_mut(n as usize)
                    .ok_or_else(|| Error::invalid(format!("wiring node {n} outside region")))?;
                if *slot {
                    return Err(Error::invalid(format!("node {n} appears in two wiring blocks")));
                }
                *slot = true;
            }
        }
        for (&e, &s) in &self.multipliers {
            if e as usize >= region.n_edges() {
                return Err(Error::invalid(format!("multiplier on unknown edge {e}")));
            }
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::invalid(format!("multiplier {s} outside [0,1]")));
            }
        }
        Ok(())
    }

    /// Per-node block index, `u32::MAX` for free nodes.
    pub fn block_of(&self, region: &Region) -> Vec<u32> {
        let mut out = vec![u32::MAX; region.n_nodes()];
        for (i, b) in self.blocks.iter().enumerate() {
            for &n in b {
                out[n as usize] = i as u32;
            }
        }
        out
    }

    /// Nodes whose component always counts toward `k`: region vertices and
    /// wired nodes.
    pub fn counted_nodes(&self, region: &Region) -> Vec<bool> {
        let mut c: Vec<bool> = (0..region.n_nodes() as NodeId).map(|n| region.is_vertex(n)).collect();
        for b in &self.blocks {
            for &n in b {
                c[n as usize] = true;
            }
        }
        c
    }

    /// Every wiring partition is coarser than or equal to the free one; this
    /// checks `self ≤ other` (each block of `self` inside one block of `other`).
    pub fn is_finer_than(&self, other: &BoundarySpec, region: &Region) -> bool {
        let ob = other.block_of(region);
        self.blocks.iter().all(|b| {
            let first = ob[b[0] as usize];
            first != u32::MAX && b.iter().all(|&n| ob[n as usize] == first)
        })
    }
}

/// Connected components of a configuration after ghost wiring.
#[derive(Clone, Debug)]
pub struct ClusterLabeling {
    region_id: u64,
    comp: Vec<u32>,
    counted: Vec<bool>,
    k: usize,
    face_names: Vec<String>,
    /// Bit `i` set when the component meets face `face_names[i]`.
    face_flags: Vec<u64>,
}

impl ClusterLabeling {
    /// Component id of a node (dense, in order of first appearance).
    pub fn component(&self, node: NodeId) -> u32 {
        self.comp[node as usize]
    }

    pub fn n_components(&self) -> usize {
        self.counted.len()
    }

    /// `k^ξ_Λ(ω)`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_counted(&self, comp: u32) -> bool {
        self.counted[comp as usize]
    }

    pub fn region_id(&self) -> u64 {
        self.region_id
    }

    pub fn same(&self, a: NodeId, b: NodeId) -> bool {
        self.comp[a as usize] == self.comp[b as usize]
    }

    pub fn components_of(&self, nodes: &[NodeId]) -> BTreeSet<u32> {
        nodes.iter().map(|&n| self.comp[n as usize]).collect()
    }

    pub fn meets_face(&self, comp: u32, face: &str) -> bool {
        self.face_names
            .iter()
            .position(|f| f == face)
            .map(|i| self.face_flags[comp as usize] >> i & 1 == 1)
            .unwrap_or(false)
    }

    /// Does some component meet both `a` and `b`?
    pub fn is_connected(&self, a: &[NodeId], b: &[NodeId]) -> Result<bool> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySet);
        }
        let ca = self.components_of(a);
        Ok(b.iter().any(|&n| ca.contains(&self.comp[n as usize])))
    }
}

/// Label clusters of `ω` under the wiring `bc`.
pub fn label_clusters(region: &Region, omega: &BondConfig, bc: &BoundarySpec) -> Result<ClusterLabeling> {
    omega.check_region(region)?;
    Ok(label_with(region, bc, |e| omega.get(e)))
}

/// Label clusters of the edges accepted by `open`.
pub fn label_with(region: &Region, bc: &BoundarySpec, mut open: impl FnMut(EdgeId) -> bool) -> ClusterLabeling {
    let n = region.n_nodes();
    let mut uf = UnionFind::new(n);
    for b in &bc.blocks {
        for w in b.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    for (i, e) in region.edges().iter().enumerate() {
        if open(i as EdgeId) {
            uf.union(e[0], e[1]);
        }
    }
    finish_labeling(region, bc, &mut uf)
}

fn finish_labeling(region: &Region, bc: &BoundarySpec, uf: &mut UnionFind) -> ClusterLabeling {
    let n = region.n_nodes();
    let mut dense = vec![u32::MAX; n];
    let mut comp = vec![0u32; n];
    let mut next = 0u32;
    for v in 0..n as u32 {
        let r = uf.find(v) as usize;
        if dense[r] == u32::MAX {
            dense[r] = next;
            next += 1;
        }
        comp[v as usize] = dense[r];
    }
    let mut counted = vec![false; next as usize];
    for (v, &c) in bc.counted_nodes(region).iter().enumerate() {
        if c {
            counted[comp[v] as usize] = true;
        }
    }
    let k = counted.iter().filter(|&&c| c).count();
    let face_names: Vec<String> = region.face_names().take(64).map(String::from).collect();
    let mut face_flags = vec![0u64; next as usize];
    for (i, f) in face_names.iter().enumerate() {
        for &v in region.face(f).unwrap_or(&[]) {
            face_flags[comp[v as usize] as usize] |= 1 << i;
        }
    }
    ClusterLabeling { region_id: region.id(), comp, counted, k, face_names, face_flags }
}

/// Components touching both the inner vertex boundary of `Λ_inner(c)` and
/// that of `Λ_outer(c)`.
pub fn crossing_clusters(labeling: &ClusterLabeling, region: &Region, annulus: &AnnulusSpec) -> BTreeSet<u32> {
    let inner = labeling.components_of(&region.sphere(&annulus.center, annulus.inner));
    let outer = labeling.components_of(&region.sphere(&annulus.center, annulus.outer));
    inner.intersection(&outer).copied().collect()
}

/// Clusters of `ω ∩ Λ_outer(c)` meeting `∂Λ_mid(c)`.
#[derive(Clone, Debug)]
pub struct BoundaryClusters {
    pub labeling: ClusterLabeling,
    pub ids: BTreeSet<u32>,
    center: Vec<i32>,
}

impl BoundaryClusters {
    /// The sub-family of clusters meeting `Λ_r(c)`.
    pub fn meeting(&self, region: &Region, r: i32) -> BTreeSet<u32> {
        let inside = self.labeling.components_of(&region.ball(&self.center, r));
        self.ids.intersection(&inside).copied().collect()
    }
}

pub fn boundary_clusters(
    region: &Region,
    omega: &BondConfig,
    center: &[i32],
    outer: i32,
    mid: i32,
) -> Result<BoundaryClusters> {
    omega.check_region(region)?;
    if !(0..outer).contains(&mid) {
        return Err(Error::invalid(format!("need 0 <= mid < outer, got mid={mid}, outer={outer}")));
    }
    let restricted = omega.restricted_to_ball(region, center, outer);
    let labeling = label_clusters(region, &restricted, &BoundarySpec::free())?;
    let ids = labeling.components_of(&region.sphere(center, mid));
    Ok(BoundaryClusters { labeling, ids, center: center.to_vec() })
}
