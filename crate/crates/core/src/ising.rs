//! Ising-side quantities: boundary fields, the FK–Ising map, surface tension
//! and the weak-mixing gap on half-boxes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bonds::{label_with, BondConfig, BoundarySpec};
use crate::error::{Error, Result};
use crate::geometry::{EdgeId, NodeId, Region, RegionSpec};
use crate::oracle::{ising_enumerate, ising_enumerate_any_beta, FkParams};
use crate::rng::Rng;
use crate::sampler::{run_chains, SamplerSpec};
use crate::stats::{EstimatorResult, ParamRecord};

/// `p = 1 − e^{−2β}`.
pub fn beta_to_p(beta: f64) -> Result<f64> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta = {beta} must be finite and >= 0")));
    }
    Ok(-(-2.0 * beta).exp_m1())
}

/// Inverse of [`beta_to_p`].
pub fn p_to_beta(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("p = {p} has no finite beta (need 0 <= p < 1)")));
    }
    Ok(-(-p).ln_1p() / 2.0)
}

/// Named boundary fields. `±` puts `+1` on ghosts whose last coordinate is
/// `>= 0` and `−1` on the others.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldPreset {
    Plus,
    PlusMinus,
    Zero,
    /// `h` on the `bottom` face, `+1` elsewhere.
    HPlus(f64),
    /// `h` on the `bottom` face, `0` elsewhere.
    HZero(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub beta: f64,
    /// One value per ghost, in the region's ghost order.
    pub field: Vec<f64>,
}

impl IsingParams {
    pub fn preset(region: &Region, beta: f64, preset: FieldPreset) -> Result<Self> {
        Ok(IsingParams { beta, field: boundary_field(region, preset)? })
    }
}

pub fn boundary_field(region: &Region, preset: FieldPreset) -> Result<Vec<f64>> {
    let d = region.dim();
    let bottom: Vec<NodeId> = match preset {
        FieldPreset::HPlus(_) | FieldPreset::HZero(_) => region
            .face("bottom")
            .ok_or_else(|| Error::invalid("h-presets need a region with a bottom face"))?
            .to_vec(),
        _ => Vec::new(),
    };
    Ok(region
        .ghosts()
        .map(|g| match preset {
            FieldPreset::Plus => 1.0,
            FieldPreset::Zero => 0.0,
            FieldPreset::PlusMinus => {
                if region.coords(g)[d - 1] >= 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            FieldPreset::HPlus(h) => {
                if bottom.contains(&g) {
                    h
                } else {
                    1.0
                }
            }
            FieldPreset::HZero(h) => {
                if bottom.contains(&g) {
                    h
                } else {
                    0.0
                }
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinConfig {
    pub spins: Vec<i8>,
}

impl SpinConfig {
    pub fn all_plus(region: &Region) -> Self {
        SpinConfig { spins: vec![1; region.n_vertices()] }
    }

    pub fn magnetization(&self) -> f64 {
        self.spins.iter().map(|&s| s as f64).sum::<f64>() / self.spins.len().max(1) as f64
    }
}

/// Resample every spin, in vertex order, from
/// `P(σ_x = s) = e^{β s m_x} / 2cosh(β m_x)`.
pub fn ising_heat_bath_sweep(sigma: &mut SpinConfig, region: &Region, beta: f64, eta: &[f64], rng: &mut Rng) -> Result<()> {
    if sigma.spins.len() != region.n_vertices() {
        return Err(Error::RegionMismatch { expected: region.n_vertices(), got: sigma.spins.len() });
    }
    if eta.len() != region.n_ghosts() {
        return Err(Error::RegionMismatch { expected: region.n_ghosts(), got: eta.len() });
    }
    let n = region.n_vertices();
    for x in region.vertices() {
        let m: f64 = region
            .neighbors(x)
            .iter()
            .map(|&(y, _)| {
                if (y as usize) < n {
                    sigma.spins[y as usize] as f64
                } else {
                    eta[y as usize - n]
                }
            })
            .sum();
        let p_plus = 1.0 / (1.0 + (-2.0 * beta * m).exp());
        sigma.spins[x as usize] = if rng.gen::<f64>() < p_plus { 1 } else { -1 };
    }
    Ok(())
}

/// Ghosts on the `+` and `−` sides of the `±` field.
fn plus_minus_ghosts(region: &Region) -> (Vec<NodeId>, Vec<NodeId>) {
    let d = region.dim();
    let plus = region.ghosts_where(|x| x[d - 1] >= 0);
    let minus = region.ghosts_where(|x| x[d - 1] < 0);
    (plus, minus)
}

/// Wired FK-Ising (`q = 2`) on `ℛ(L,M)`: probability that no open path joins
/// the `+` ghosts to the `−` ghosts, and `τ̂ = −log(prob) / L^{d−1}`.
pub fn wired_surface_tension_estimate(
    d: usize,
    l: i32,
    m: i32,
    p: f64,
    spec: &SamplerSpec,
    seed: u64,
) -> Result<EstimatorResult> {
    let region = RegionSpec::rect(d, l, m).build()?;
    let params = FkParams::new(p, 2.0)?;
    let bc = BoundarySpec::wired(&region);
    let (plus, minus) = plus_minus_ghosts(&region);
    let split = BoundarySpec::from_blocks(vec![plus.clone(), minus.clone()]);
    let (g_plus, g_minus) = (plus[0], minus[0]);
    let chains = run_chains(&region, &bc, &params, spec, seed, |w, _| {
        let lab = label_with(&region, &split, |e| w.get(e));
        f64::from(u8::from(!lab.same(g_plus, g_minus)))
    })?;
    let record = ParamRecord {
        d: Some(d),
        q: Some(2.0),
        p: Some(p),
        l: Some(l as i64),
        m: Some(m as i64),
        bc: Some("wired".into()),
        seed: Some(seed),
        chains: Some(spec.chains),
        ..Default::default()
    };
    let area = (l as f64).powi(d as i32 - 1);
    Ok(EstimatorResult::from_chains("wired_disconnection", record, &chains).with_log_rate("tau", area))
}

/// The `±`-split wiring used by the surface-tension identity, for exact checks.
pub fn plus_minus_split(region: &Region) -> BoundarySpec {
    let (plus, minus) = plus_minus_ghosts(region);
    BoundarySpec::from_blocks(vec![plus, minus])
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivativeReport {
    pub beta: f64,
    /// Central difference of `(1/L^{d−1}) log(Z^+/Z^±)`.
    pub finite_difference: f64,
    /// `(1/L^{d−1}) Σ_{xy} ⟨σ_xσ_y⟩^+ − ⟨σ_xσ_y⟩^±`.
    pub correlation_sum: f64,
    pub gap: f64,
    /// Per-edge unnormalised summands, in edge order.
    pub summands: Vec<f64>,
    pub min_summand: f64,
}

/// Compare the finite-difference `β`-derivative of the finite-volume surface
/// tension with the exact correlation-difference sum.
pub fn surface_tension_derivative_check(d: usize, l: i32, m: i32, beta: f64, h: f64) -> Result<DerivativeReport> {
    if !(h > 0.0) {
        return Err(Error::invalid("step h must be positive"));
    }
    let region = RegionSpec::rect(d, l, m).build()?;
    let plus = boundary_field(&region, FieldPreset::Plus)?;
    let pm = boundary_field(&region, FieldPreset::PlusMinus)?;
    let area = (l as f64).powi(d as i32 - 1);
    let tau = |b: f64| -> Result<f64> {
        let zp = ising_enumerate_any_beta(&region, b, &plus, &[])?.log_z;
        let zpm = ising_enumerate_any_beta(&region, b, &pm, &[])?.log_z;
        Ok((zp - zpm) / area)
    };
    let finite_difference = (tau(beta + h)? - tau(beta - h)?) / (2.0 * h);

    let n = region.n_vertices();
    // Internal edges give ⟨σ_xσ_y⟩; a ghost edge gives η_y⟨σ_x⟩.
    let split_edge = |e: usize| -> (Vec<NodeId>, Option<usize>) {
        let [a, b] = region.edge(e as EdgeId);
        match (region.is_vertex(a), region.is_vertex(b)) {
            (true, true) => (vec![a, b], None),
            (true, false) => (vec![a], Some(b as usize - n)),
            _ => (vec![b], Some(a as usize - n)),
        }
    };
    let parts: Vec<_> = (0..region.n_edges()).map(split_edge).collect();
    let sets: Vec<Vec<NodeId>> = parts.iter().map(|(s, _)| s.clone()).collect();
    let cp = ising_enumerate(&region, beta, &plus, &sets)?.correlations;
    let cpm = ising_enumerate(&region, beta, &pm, &sets)?.correlations;
    let summands: Vec<f64> = parts
        .iter()
        .enumerate()
        .map(|(e, (_, g))| match g {
            None => cp[e] - cpm[e],
            Some(g) => plus[*g] * cp[e] - pm[*g] * cpm[e],
        })
        .collect();
    let correlation_sum = summands.iter().sum::<f64>() / area;
    let min_summand = summands.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DerivativeReport {
        beta,
        finite_difference,
        correlation_sum,
        gap: (finite_difference - correlation_sum).abs(),
        summands,
        min_summand,
    })
}

/// The two FK measures compared by the weak-mixing gap on `H(K)`. Bonds
/// crossing the bottom face get intensity `s·p`; the bottom ghosts are wired.
/// The first boundary also wires every other ghost into the same block, the
/// second leaves them free. Returns `(region, wired, free, b₀)`.
pub fn weak_mixing_setup(d: usize, k: i32, s: f64) -> Result<(Region, BoundarySpec, BoundarySpec, EdgeId)> {
    if k < 1 {
        return Err(Error::invalid("K must be >= 1"));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!("s = {s} outside [0,1]")));
    }
    let region = RegionSpec::half_box(d, k).build()?;
    let bottom = region.face("bottom").expect("half-box has a bottom face").to_vec();
    let bottom_edges: Vec<EdgeId> = bottom.iter().flat_map(|&g| region.neighbors(g).iter().map(|&(_, e)| e)).collect();
    let all: Vec<NodeId> = region.ghosts().collect();
    let wired = BoundarySpec::from_blocks(vec![all]).with_multiplier(bottom_edges.iter().copied(), s);
    let free = BoundarySpec::from_blocks(vec![bottom]).with_multiplier(bottom_edges, s);
    let origin = vec![0; d];
    let mut up = origin.clone();
    up[d - 1] = 1;
    let b0 = region
        .edge_between(region.vertex_at(&origin).unwrap(), region.vertex_at(&up).unwrap())
        .expect("b0 inside H(K)");
    Ok((region, wired, free, b0))
}

/// `φ^{s,1}[ω_{b₀}] − φ^{s,0}[ω_{b₀}]` on `H(K)` for FK-Ising.
pub fn weak_mixing_gap(d: usize, k: i32, s: f64, p: f64, spec: &SamplerSpec, seed: u64) -> Result<EstimatorResult> {
    let (region, wired, free, b0) = weak_mixing_setup(d, k, s)?;
    let params = FkParams::new(p, 2.0)?;
    let obs = |w: &BondConfig, _: &mut crate::sampler::SampleCtx| f64::from(u8::from(w.get(b0)));
    let a = run_chains(&region, &wired, &params, spec, seed, obs)?;
    let b = run_chains(&region, &free, &params, spec, seed ^ 0x9e37_79b9_7f4a_7c15, obs)?;
    let record = ParamRecord {
        d: Some(d),
        q: Some(2.0),
        p: Some(p),
        k: Some(k as i64),
        bc: Some(format!("s={s}")),
        seed: Some(seed),
        chains: Some(spec.chains),
        ..Default::default()
    };
    let ra = EstimatorResult::from_chains("b0_wired", record.clone(), &a);
    let rb = EstimatorResult::from_chains("b0_free", record.clone(), &b);
    let se = (ra.stderr.powi(2) + rb.stderr.powi(2)).sqrt();
    Ok(EstimatorResult::new("weak_mixing_gap", record, ra.samples + rb.samples, ra.estimate - rb.estimate, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{fk_connection_prob, ising_expectation};
    use crate::rng::{stream, Purpose};

    #[test]
    fn fk_ising_map() {
        assert_eq!(beta_to_p(0.0).unwrap(), 0.0);
        assert!((beta_to_p(0.5).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-16);
        for p in [0.0, 1e-9, 0.3, 0.6321, 0.99] {
            assert!((beta_to_p(p_to_beta(p).unwrap()).unwrap() - p).abs() < 1e-15);
        }
        assert!(p_to_beta(1.0).is_err());
    }

    #[test]
    fn derivative_identity_small() {
        let r = surface_tension_derivative_check(2, 1, 1, 0.0, 1e-4).unwrap();
        assert!(r.finite_difference.abs() < 1e-6 && r.correlation_sum.abs() < 1e-12);
        let r = surface_tension_derivative_check(2, 1, 1, 0.4, 1e-4).unwrap();
        assert!(r.gap < 1e-6, "{r:?}");
        assert!(r.min_summand >= -1e-12);
    }

    #[test]
    fn heat_bath_matches_single_site() {
        let r = RegionSpec::boxed(2, 0).build().unwrap();
        let beta = 0.6;
        let eta = [1.0, 0.0, 0.0, 0.0];
        let exact = ising_expectation(&r, beta, &eta, &[0]).unwrap();
        let mut rng = stream(1, 0, Purpose::Spins);
        let mut s = SpinConfig::all_plus(&r);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            ising_heat_bath_sweep(&mut s, &r, beta, &eta, &mut rng).unwrap();
            sum += s.spins[0] as f64;
        }
        let se = ((1.0 - exact * exact) / n as f64).sqrt();
        assert!((sum / n as f64 - exact).abs() < 3.0 * se);
    }

    #[test]
    fn edwards_sokal_two_point() {
        let r = RegionSpec::boxed(2, 1).build().unwrap();
        let beta = 0.35;
        let p = beta_to_p(beta).unwrap();
        let plus = boundary_field(&r, FieldPreset::Plus).unwrap();
        let x = r.vertex_at(&[0, 0]).unwrap();
        let y = r.vertex_at(&[1, 1]).unwrap();
        let spin = ising_expectation(&r, beta, &plus, &[x, y]).unwrap();
        let fk = fk_connection_prob(&r, &BoundarySpec::wired(&r), &FkParams::new(p, 2.0).unwrap(), &[x], &[y]).unwrap();
        assert!((spin - fk).abs() < 1e-12, "{spin} vs {fk}");
    }

    #[test]
    fn weak_mixing_setup_shapes() {
        let (r, wired, free, b0) = weak_mixing_setup(2, 1, 0.5).unwrap();
        assert_eq!(r.edge(b0).len(), 2);
        assert_eq!(wired.blocks.len(), 1);
        assert_eq!(free.blocks[0].len(), 3);
        assert_eq!(wired.multipliers.len(), 3);
        assert!(weak_mixing_setup(2, 0, 0.5).is_err());
    }
}
