//! Finite regions of `Z^d` with deterministic edge indexing.
//!
//! A region owns its vertex set `Λ`, the edge set `E(Λ)` of all
//! nearest-neighbour edges with at least one endpoint in `Λ`, and the outside
//! endpoints of boundary-crossing edges ("ghosts"). Boundary conditions are
//! expressed later as wirings of ghosts, so nothing outside `E(Λ)` ever has to
//! be simulated.
//!
//! Node numbering: vertices of `Λ` come first in lexicographic order, then the
//! ghosts in lexicographic order. Edges are sorted lexicographically by their
//! (lower, upper) endpoint coordinates, so the index of an edge is a pure
//! function of its endpoints.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;
pub type EdgeId = u32;

/// Largest supported dimension.
pub const MAX_DIM: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionKind {
    /// `{-n..n}^d`
    Box { n: i32 },
    /// `{-l..l}^{d-2} x {-n..n}^2`
    Slab { l: i32, n: i32 },
    /// `{-l..l}^{d-1} x {-m..m}`
    Rect { l: i32, m: i32 },
    /// `{-k..k}^{d-1} x {0..k}`
    HalfBox { k: i32 },
    /// An explicit vertex list. With `boundary = false` only edges between
    /// listed sites are kept (no ghosts); this is how single edges and
    /// plaquettes are built for exact checks.
    Sites { sites: Vec<Vec<i32>>, boundary: bool },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: RegionKind,
}

impl RegionSpec {
    pub fn boxed(dim: usize, n: i32) -> Self {
        RegionSpec { dim, kind: RegionKind::Box { n } }
    }

    pub fn slab(dim: usize, l: i32, n: i32) -> Self {
        RegionSpec { dim, kind: RegionKind::Slab { l, n } }
    }

    pub fn rect(dim: usize, l: i32, m: i32) -> Self {
        RegionSpec { dim, kind: RegionKind::Rect { l, m } }
    }

    pub fn half_box(dim: usize, k: i32) -> Self {
        RegionSpec { dim, kind: RegionKind::HalfBox { k } }
    }

    pub fn sites(dim: usize, sites: Vec<Vec<i32>>, boundary: bool) -> Self {
        RegionSpec { dim, kind: RegionKind::Sites { sites, boundary } }
    }

    /// Two adjacent sites joined by one edge, no boundary edges.
    pub fn single_edge() -> Self {
        Self::sites(2, vec![vec![0, 0], vec![1, 0]], false)
    }

    /// The unit square `{0,1}^2` with its four edges, no boundary edges.
    pub fn plaquette() -> Self {
        Self::sites(
            2,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
            false,
        )
    }

    pub fn build(&self) -> Result<Region> {
        build_region(self)
    }
}

/// Sup-norm box `Λ_outer(center) \ Λ_inner(center)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub outer: i32,
    pub inner: i32,
    pub center: Vec<i32>,
}

impl AnnulusSpec {
    pub fn new(outer: i32, inner: i32, center: Vec<i32>) -> Result<Self> {
        if inner < 0 || outer <= inner {
            return Err(Error::invalid(format!(
                "annulus needs outer > inner >= 0, got outer={outer}, inner={inner}"
            )));
        }
        Ok(AnnulusSpec { outer, inner, center })
    }
}

#[derive(Clone, Debug)]
pub struct Region {
    spec: RegionSpec,
    dim: usize,
    n_vertices: usize,
    coords: Vec<i32>,
    edges: Vec<[NodeId; 2]>,
    edge_axis: Vec<u8>,
    adj_start: Vec<u32>,
    adj: Vec<(NodeId, EdgeId)>,
    /// Per-axis inclusive bounds when the vertex set is a product of intervals.
    bounds: Option<Vec<(i32, i32)>>,
    strides: Vec<usize>,
    /// Edge from vertex `v` to `v + e_k`, at `v * dim + k`.
    edge_up: Vec<EdgeId>,
    lookup: HashMap<Vec<i32>, NodeId>,
    faces: BTreeMap<String, Vec<NodeId>>,
    id: u64,
}

impl Region {
    pub fn spec(&self) -> &RegionSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fingerprint of the spec; bond configurations carry it.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_ghosts(&self) -> usize {
        self.n_nodes() - self.n_vertices
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_vertex(&self, node: NodeId) -> bool {
        (node as usize) < self.n_vertices
    }

    pub fn is_ghost(&self, node: NodeId) -> bool {
        !self.is_vertex(node)
    }

    pub fn coords(&self, node: NodeId) -> &[i32] {
        let i = node as usize * self.dim;
        &self.coords[i..i + self.dim]
    }

    pub fn edge(&self, e: EdgeId) -> [NodeId; 2] {
        self.edges[e as usize]
    }

    pub fn edges(&self) -> &[[NodeId; 2]] {
        &self.edges
    }

    pub fn edge_axis(&self, e: EdgeId) -> usize {
        self.edge_axis[e as usize] as usize
    }

    /// `(neighbour, edge)` pairs of a node.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, EdgeId)] {
        let s = self.adj_start[node as usize] as usize;
        let t = self.adj_start[node as usize + 1] as usize;
        &self.adj[s..t]
    }

    pub fn vertices(&self) -> std::ops::Range<NodeId> {
        0..self.n_vertices as NodeId
    }

    pub fn ghosts(&self) -> std::ops::Range<NodeId> {
        self.n_vertices as NodeId..self.n_nodes() as NodeId
    }

    pub fn bounds(&self) -> Option<&[(i32, i32)]> {
        self.bounds.as_deref()
    }

    pub fn node_at(&self, x: &[i32]) -> Option<NodeId> {
        if let Some(b) = &self.bounds {
            if x.iter().zip(b).all(|(&c, &(lo, hi))| lo <= c && c <= hi) {
                let idx: usize = x
                    .iter()
                    .zip(b)
                    .zip(&self.strides)
                    .map(|((&c, &(lo, _)), &s)| (c - lo) as usize * s)
                    .sum();
                return Some(idx as NodeId);
            }
        }
        self.lookup.get(x).copied()
    }

    pub fn vertex_at(&self, x: &[i32]) -> Option<NodeId> {
        self.node_at(x).filter(|&v| self.is_vertex(v))
    }

    /// Edge between `v` and `v + e_axis`; `v` must be a vertex.
    #[inline]
    pub fn edge_up(&self, v: NodeId, axis: usize) -> EdgeId {
        self.edge_up[v as usize * self.dim + axis]
    }

    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<EdgeId> {
        self.neighbors(a)
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, e)| e)
    }

    pub fn face(&self, name: &str) -> Option<&[NodeId]> {
        self.faces.get(name).map(|v| v.as_slice())
    }

    pub fn face_names(&self) -> impl Iterator<Item = &str> {
        self.faces.keys().map(|s| s.as_str())
    }

    pub fn ghosts_where(&self, mut pred: impl FnMut(&[i32]) -> bool) -> Vec<NodeId> {
        self.ghosts().filter(|&g| pred(self.coords(g))).collect()
    }

    pub fn vertices_where(&self, mut pred: impl FnMut(&[i32]) -> bool) -> Vec<NodeId> {
        self.vertices().filter(|&v| pred(self.coords(v))).collect()
    }

    /// Vertices of `Λ_r(center)` that belong to the region.
    pub fn ball(&self, center: &[i32], r: i32) -> Vec<NodeId> {
        self.vertices_where(|x| sup_dist(x, center) <= r)
    }

    /// Inner vertex boundary of `Λ_r(center)`: the sites at sup-distance
    /// exactly `r` (the center itself when `r = 0`).
    pub fn sphere(&self, center: &[i32], r: i32) -> Vec<NodeId> {
        self.vertices_where(|x| sup_dist(x, center) == r)
    }

    /// Clipped sub-box `Λ_r(center) ∩ Λ`, only for product-shaped regions.
    pub fn sub_box(&self, center: &[i32], r: i32) -> Result<SubBox> {
        let b = self
            .bounds
            .as_ref()
            .ok_or_else(|| Error::Unsupported("sub-boxes need a box-shaped region".into()))?;
        if center.len() != self.dim || r < 0 {
            return Err(Error::invalid("sub-box center/radius"));
        }
        let mut lo = Vec::with_capacity(self.dim);
        let mut hi = Vec::with_capacity(self.dim);
        for (k, &(blo, bhi)) in b.iter().enumerate() {
            let l = (center[k] - r).max(blo);
            let h = (center[k] + r).min(bhi);
            if l > h {
                return Err(Error::invalid("sub-box does not meet the region"));
            }
            lo.push(l);
            hi.push(h);
        }
        Ok(SubBox::new(center.to_vec(), r, lo, hi))
    }

    /// True when `Λ_r(center)` lies inside the vertex set.
    pub fn contains_box(&self, center: &[i32], r: i32) -> bool {
        match &self.bounds {
            Some(b) => center
                .iter()
                .zip(b)
                .all(|(&c, &(lo, hi))| c - r >= lo && c + r <= hi),
            None => false,
        }
    }
}

/// An axis-aligned box of vertices, clipped to a region, with local indexing.
#[derive(Clone, Debug)]
pub struct SubBox {
    pub center: Vec<i32>,
    pub radius: i32,
    pub lo: Vec<i32>,
    pub hi: Vec<i32>,
    strides: Vec<usize>,
    len: usize,
}

impl SubBox {
    fn new(center: Vec<i32>, radius: i32, lo: Vec<i32>, hi: Vec<i32>) -> Self {
        let d = lo.len();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * (hi[k + 1] - lo[k + 1] + 1) as usize;
        }
        let len = strides[0] * (hi[0] - lo[0] + 1) as usize;
        SubBox { center, radius, lo, hi, strides, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, x: &[i32]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&c, (&l, &h))| l <= c && c <= h)
    }

    pub fn local_index(&self, x: &[i32]) -> usize {
        x.iter()
            .zip(&self.lo)
            .zip(&self.strides)
            .map(|((&c, &l), &s)| (c - l) as usize * s)
            .sum()
    }

    pub fn coords_of(&self, mut local: usize, out: &mut [i32]) {
        for ((o, &lo), &s) in out.iter_mut().zip(&self.lo).zip(&self.strides) {
            *o = lo + (local / s) as i32;
            local %= s;
        }
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }
}

pub fn sup_dist(a: &[i32], b: &[i32]) -> i32 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// Nearest integer, ties toward `+∞`.
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

fn fingerprint(spec: &RegionSpec) -> u64 {
    // FNV-1a over the canonical JSON form.
    let s = serde_json::to_string(spec).expect("region spec serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn build_region(spec: &RegionSpec) -> Result<Region> {
    let d = spec.dim;
    if !(2..=MAX_DIM).contains(&d) {
        return Err(Error::invalid(format!("dimension must be in 2..={MAX_DIM}, got {d}")));
    }
    let bounds: Option<Vec<(i32, i32)>> = match &spec.kind {
        RegionKind::Box { n } => {
            if *n < 0 {
                return Err(Error::invalid(format!("box size must be >= 0, got {n}")));
            }
            Some(vec![(-n, *n); d])
        }
        RegionKind::Slab { l, n } => {
            if d < 3 {
                return Err(Error::invalid("slab needs d >= 3"));
            }
            if *l < 1 || *n < 1 {
                return Err(Error::invalid(format!("slab sizes must be >= 1, got l={l}, n={n}")));
            }
            let mut b = vec![(-l, *l); d - 2];
            b.extend([(-n, *n), (-n, *n)]);
            Some(b)
        }
        RegionKind::Rect { l, m } => {
            if *l < 1 || *m < 1 {
                return Err(Error::invalid(format!("rectangle sizes must be >= 1, got l={l}, m={m}")));
            }
            let mut b = vec![(-l, *l); d - 1];
            b.push((-m, *m));
            Some(b)
        }
        RegionKind::HalfBox { k } => {
            if *k < 1 {
                return Err(Error::invalid(format!("half-box size must be >= 1, got {k}")));
            }
            let mut b = vec![(-k, *k); d - 1];
            b.push((0, *k));
            Some(b)
        }
        RegionKind::Sites { sites, .. } => {
            if sites.is_empty() {
                return Err(Error::EmptySet);
            }
            if sites.iter().any(|s| s.len() != d) {
                return Err(Error::invalid("site with wrong dimension"));
            }
            None
        }
    };

    // Vertex list in lexicographic order.
    let mut vertices: Vec<Vec<i32>> = match (&bounds, &spec.kind) {
        (Some(b), _) => product(b),
        (None, RegionKind::Sites { sites, .. }) => {
            let mut s = sites.clone();
            s.sort();
            s.dedup();
            s
        }
        _ => unreachable!(),
    };
    vertices.sort();
    let inside: HashSet<Vec<i32>> = if bounds.is_none() {
        vertices.iter().cloned().collect()
    } else {
        HashSet::new()
    };
    let in_region = |x: &[i32]| -> bool {
        match &bounds {
            Some(b) => x.iter().zip(b).all(|(&c, &(lo, hi))| lo <= c && c <= hi),
            None => inside.contains(x),
        }
    };
    let with_boundary = !matches!(spec.kind, RegionKind::Sites { boundary: false, .. });

    let mut ghost_set: HashSet<Vec<i32>> = HashSet::new();
    if with_boundary {
        let mut y = vec![0i32; d];
        for v in &vertices {
            for k in 0..d {
                for s in [-1, 1] {
                    y.copy_from_slice(v);
                    y[k] += s;
                    if !in_region(&y) {
                        ghost_set.insert(y.clone());
                    }
                }
            }
        }
    }
    let mut ghosts: Vec<Vec<i32>> = ghost_set.into_iter().collect();
    ghosts.sort();

    let n_vertices = vertices.len();
    let n_nodes = n_vertices + ghosts.len();
    if n_nodes > u32::MAX as usize / 2 {
        return Err(Error::invalid("region too large"));
    }
    let mut coords = Vec::with_capacity(n_nodes * d);
    for x in vertices.iter().chain(&ghosts) {
        coords.extend_from_slice(x);
    }

    let mut strides = vec![1usize; d];
    if let Some(b) = &bounds {
        for k in (0..d - 1).rev() {
            strides[k] = strides[k + 1] * (b[k + 1].1 - b[k + 1].0 + 1) as usize;
        }
    }
    let mut lookup: HashMap<Vec<i32>, NodeId> = HashMap::new();
    if bounds.is_none() {
        for (i, v) in vertices.iter().enumerate() {
            lookup.insert(v.clone(), i as NodeId);
        }
    }
    for (i, g) in ghosts.iter().enumerate() {
        lookup.insert(g.clone(), (n_vertices + i) as NodeId);
    }
    let node_of = |x: &[i32]| -> Option<NodeId> {
        if let Some(b) = &bounds {
            if x.iter().zip(b).all(|(&c, &(lo, hi))| lo <= c && c <= hi) {
                let idx: usize = x
                    .iter()
                    .zip(b)
                    .zip(&strides)
                    .map(|((&c, &(lo, _)), &s)| (c - lo) as usize * s)
                    .sum();
                return Some(idx as NodeId);
            }
        }
        lookup.get(x).copied()
    };

    // Walk all nodes in lexicographic order; for each, emit edges to
    // a + e_k for k = d-1..0, which yields lexicographically sorted edges.
    let mut order: Vec<NodeId> = (0..n_nodes as NodeId).collect();
    order.sort_by(|&a, &b| {
        let (ia, ib) = (a as usize * d, b as usize * d);
        coords[ia..ia + d].cmp(&coords[ib..ib + d])
    });
    let mut edges: Vec<[NodeId; 2]> = Vec::new();
    let mut edge_axis: Vec<u8> = Vec::new();
    let mut y = vec![0i32; d];
    for &a in &order {
        let ia = a as usize * d;
        let a_inside = (a as usize) < n_vertices;
        for k in (0..d).rev() {
            y.copy_from_slice(&coords[ia..ia + d]);
            y[k] += 1;
            if let Some(b) = node_of(&y) {
                let b_inside = (b as usize) < n_vertices;
                if a_inside || b_inside {
                    edges.push([a, b]);
                    edge_axis.push(k as u8);
                }
            }
        }
    }

    let mut degree = vec![0u32; n_nodes + 1];
    for e in &edges {
        degree[e[0] as usize] += 1;
        degree[e[1] as usize] += 1;
    }
    let mut adj_start = vec![0u32; n_nodes + 1];
    for i in 0..n_nodes {
        adj_start[i + 1] = adj_start[i] + degree[i];
    }
    let mut fill = adj_start.clone();
    let mut adj = vec![(0, 0); adj_start[n_nodes] as usize];
    let mut edge_up = vec![u32::MAX; n_vertices * d];
    for (i, e) in edges.iter().enumerate() {
        let [a, b] = *e;
        adj[fill[a as usize] as usize] = (b, i as EdgeId);
        fill[a as usize] += 1;
        adj[fill[b as usize] as usize] = (a, i as EdgeId);
        fill[b as usize] += 1;
        if (a as usize) < n_vertices {
            edge_up[a as usize * d + edge_axis[i] as usize] = i as EdgeId;
        }
    }

    let mut region = Region {
        id: fingerprint(spec),
        spec: spec.clone(),
        dim: d,
        n_vertices,
        coords,
        edges,
        edge_axis,
        adj_start,
        adj,
        bounds: bounds.clone(),
        strides,
        edge_up,
        lookup,
        faces: BTreeMap::new(),
    };

    let inner_boundary: Vec<NodeId> = region
        .vertices()
        .filter(|&v| {
            let x = region.coords(v).to_vec();
            (0..d).any(|k| {
                [-1, 1].iter().any(|s| {
                    let mut y = x.clone();
                    y[k] += s;
                    region.vertex_at(&y).is_none()
                })
            })
        })
        .collect();

    let faces = &mut region.faces;
    match spec.kind {
        RegionKind::Box { .. } | RegionKind::Slab { .. } | RegionKind::Sites { .. } => {
            faces.insert("boundary".into(), inner_boundary);
        }
        RegionKind::Rect { m, .. } => {
            let last = d - 1;
            let mut top = Vec::new();
            let mut bot = Vec::new();
            let mut lateral = Vec::new();
            for &v in &inner_boundary {
                let h = region.coords[v as usize * d + last];
                if h == m {
                    top.push(v);
                } else if h == -m {
                    bot.push(v);
                } else {
                    lateral.push(v);
                }
            }
            faces.insert("top".into(), top);
            faces.insert("bot".into(), bot);
            faces.insert("lateral".into(), lateral);
        }
        RegionKind::HalfBox { .. } => {
            let last = d - 1;
            let (mut bottom, mut rest) = (Vec::new(), Vec::new());
            for g in n_vertices as NodeId..n_nodes as NodeId {
                if region.coords[g as usize * d + last] < 0 {
                    bottom.push(g);
                } else {
                    rest.push(g);
                }
            }
            faces.insert("bottom".into(), bottom);
            faces.insert("rest".into(), rest);
        }
    }
    Ok(region)
}

fn product(bounds: &[(i32, i32)]) -> Vec<Vec<i32>> {
    let mut out = vec![Vec::with_capacity(bounds.len())];
    for &(lo, hi) in bounds {
        let mut next = Vec::with_capacity(out.len() * (hi - lo + 1) as usize);
        for prefix in &out {
            for c in lo..=hi {
                let mut p = prefix.clone();
                p.push(c);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Nested boxes `V_i = Λ_{r_i}` with `r_i = round(δL/2 − i·√L)`, for
/// `0 ≤ i ≤ max(1, ⌊δ√L/4⌋)`.
///
/// The sequence always reaches `i = 1` so that at least one sprinkling annulus
/// `V_0 \ V_1` exists; parameters whose radii drop below 1 are rejected.
pub fn annulus_sequence(l: u32, delta: f64, center: &[i32]) -> Result<Vec<AnnulusSpec>> {
    if l == 0 || !(delta > 0.0) {
        return Err(Error::invalid("annulus sequence needs L >= 1 and delta > 0"));
    }
    let lf = l as f64;
    let sqrt_l = lf.sqrt();
    let last = ((delta * sqrt_l / 4.0).floor() as usize).max(1);
    let radii: Vec<i64> = (0..=last + 1)
        .map(|i| round_half_up(delta * lf / 2.0 - i as f64 * sqrt_l))
        .collect();
    if radii[..=last].iter().any(|&r| r < 1) {
        return Err(Error::invalid(format!(
            "degenerate annulus radius for L={l}, delta={delta}: {:?}",
            &radii[..=last]
        )));
    }
    // V_i as an annulus reaching down to the next radius (0 after the last).
    Ok((0..=last)
        .map(|i| AnnulusSpec {
            outer: radii[i] as i32,
            inner: if i < last { radii[i + 1] as i32 } else { radii[i + 1].max(0) as i32 },
            center: center.to_vec(),
        })
        .collect())
}

/// Points of `ℓZ^d ∩ Λ_R(center)` (lattice anchored at the origin).
pub fn grid_boxes(radius: i32, cell: i32, center: &[i32]) -> Result<Vec<Vec<i32>>> {
    if cell < 1 || cell > radius {
        return Err(Error::invalid(format!("grid needs 1 <= ell <= R, got ell={cell}, R={radius}")));
    }
    let bounds: Vec<(i32, i32)> = center
        .iter()
        .map(|&c| {
            let lo = (c - radius).div_euclid(cell) + if (c - radius).rem_euclid(cell) == 0 { 0 } else { 1 };
            let hi = (c + radius).div_euclid(cell);
            (lo, hi)
        })
        .collect();
    if bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(Vec::new());
    }
    Ok(product(&bounds)
        .into_iter()
        .map(|p| p.into_iter().map(|c| c * cell).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_edge_count(d: usize, n: i32) -> usize {
        // Count ordered neighbour pairs (x, x+e_k) with at least one end in the box.
        let inside = |x: &[i32]| x.iter().all(|c| c.abs() <= n);
        let b = vec![(-n - 1, n + 1); d];
        let mut count = 0;
        for x in product(&b) {
            for k in 0..d {
                let mut y = x.clone();
                y[k] += 1;
                if inside(&x) || inside(&y) {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn box_one_in_two_dimensions() {
        let r = build_region(&RegionSpec::boxed(2, 1)).unwrap();
        assert_eq!(r.n_vertices(), 9);
        assert_eq!(r.n_edges(), 24);
        assert_eq!(r.n_ghosts(), 12);
        let internal = r.edges().iter().filter(|e| r.is_vertex(e[0]) && r.is_vertex(e[1])).count();
        assert_eq!(internal, 12);
    }

    #[test]
    fn single_site_box() {
        let r = build_region(&RegionSpec::boxed(2, 0)).unwrap();
        assert_eq!((r.n_vertices(), r.n_edges(), r.n_ghosts()), (1, 4, 4));
    }

    #[test]
    fn edge_counts_match_brute_force() {
        for d in 2..=3 {
            for n in 0..=3 {
                let r = build_region(&RegionSpec::boxed(d, n)).unwrap();
                assert_eq!(r.n_edges(), brute_force_edge_count(d, n), "d={d} n={n}");
                let side = (2 * n + 1) as usize;
                assert_eq!(r.n_edges(), d * side.pow(d as u32 - 1) * (side + 1));
            }
        }
    }

    #[test]
    fn rect_top_face() {
        let r = build_region(&RegionSpec::rect(3, 2, 1)).unwrap();
        let top = r.face("top").unwrap();
        assert_eq!(top.len(), 25);
        assert!(top.iter().all(|&v| r.coords(v)[2] == 1));
        let bot = r.face("bot").unwrap();
        assert!(top.iter().all(|v| !bot.contains(v)));
    }

    #[test]
    fn half_box_ghost_faces_partition() {
        let r = build_region(&RegionSpec::half_box(3, 2)).unwrap();
        let bottom = r.face("bottom").unwrap();
        let rest = r.face("rest").unwrap();
        assert_eq!(bottom.len() + rest.len(), r.n_ghosts());
        assert_eq!(bottom.len(), 25);
        for g in r.ghosts() {
            assert_eq!(bottom.contains(&g) as u8 + rest.contains(&g) as u8, 1);
        }
    }

    #[test]
    fn rebuild_is_identical() {
        let spec = RegionSpec::slab(3, 1, 3);
        let a = build_region(&spec).unwrap();
        let b = build_region(&spec).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.coords, b.coords);
        assert_eq!(a.id(), b.id());
    }

    #[test]
    fn edges_sorted_and_indexed_by_endpoints() {
        let r = build_region(&RegionSpec::rect(2, 2, 1)).unwrap();
        let keys: Vec<(Vec<i32>, Vec<i32>)> = r
            .edges()
            .iter()
            .map(|e| (r.coords(e[0]).to_vec(), r.coords(e[1]).to_vec()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for v in r.vertices() {
            for k in 0..2 {
                let e = r.edge_up(v, k);
                assert_eq!(r.edge(e)[0], v);
                assert_eq!(r.edge_axis(e), k);
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_region(&RegionSpec::boxed(2, -1)).is_err());
        assert!(build_region(&RegionSpec::slab(2, 1, 1)).is_err());
        assert!(build_region(&RegionSpec::rect(3, 0, 1)).is_err());
        assert!(build_region(&RegionSpec::half_box(3, 0)).is_err());
    }

    #[test]
    fn plaquette_and_single_edge() {
        let e = build_region(&RegionSpec::single_edge()).unwrap();
        assert_eq!((e.n_vertices(), e.n_edges(), e.n_ghosts()), (2, 1, 0));
        let p = build_region(&RegionSpec::plaquette()).unwrap();
        assert_eq!((p.n_vertices(), p.n_edges(), p.n_ghosts()), (4, 4, 0));
    }

    #[test]
    fn annuli_from_displayed_formula() {
        let a = annulus_sequence(400, 0.5, &[0, 0, 0]).unwrap();
        let radii: Vec<i32> = a.iter().map(|s| s.outer).collect();
        assert_eq!(radii, vec![100, 80, 60]);
        let b = annulus_sequence(100, 2.0, &[0, 0, 0]).unwrap();
        let radii: Vec<i32> = b.iter().map(|s| s.outer).collect();
        assert_eq!(radii, vec![100, 90, 80, 70, 60, 50]);
        assert!(annulus_sequence(16, 0.125, &[0, 0]).is_err());
        // Short sequences still reach V_1.
        let c = annulus_sequence(32, 0.5, &[0, 0, 0]).unwrap();
        let radii: Vec<i32> = c.iter().map(|s| s.outer).collect();
        assert_eq!(radii, vec![8, 2]);
    }

    #[test]
    fn grid_centers() {
        assert_eq!(grid_boxes(2, 1, &[0, 0]).unwrap().len(), 25);
        let g = grid_boxes(2, 2, &[0, 0]).unwrap();
        assert_eq!(g.len(), 9);
        assert!(g.iter().all(|x| x.iter().all(|c| [-2, 0, 2].contains(c))));
        assert_eq!(grid_boxes(3, 2, &[0, 0, 0]).unwrap().len(), 27);
        assert!(grid_boxes(2, 3, &[0, 0]).is_err());
    }

    #[test]
    fn sub_box_local_indexing() {
        let r = build_region(&RegionSpec::boxed(3, 3)).unwrap();
        let sb = r.sub_box(&[1, 0, -1], 2).unwrap();
        assert_eq!(sb.lo, vec![-1, -2, -3]);
        assert_eq!(sb.hi, vec![3, 2, 1]);
        let mut x = vec![0; 3];
        for i in 0..sb.len() {
            sb.coords_of(i, &mut x);
            assert_eq!(sb.local_index(&x), i);
        }
    }
}
