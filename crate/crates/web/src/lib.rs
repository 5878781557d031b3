//! Browser bindings. Every function returns a JSON string so the page needs
//! no generated type glue beyond the function names.

use fklab::bonds::label_clusters;
use fklab::events::{UniqueEvaluator, USequenceEvaluator};
use fklab::geometry::{Region, RegionSpec};
use fklab::oracle::{fk_edge_marginals, FkParams};
use fklab::sampler::{ChainState, Dynamics, Kernel, SprinkleField};
use fklab::rng::{stream, Purpose};
use fklab::{BondConfig, BoundarySpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest box half-width the page may ask for.
const MAX_HALF_WIDTH: i32 = 40;

#[derive(Serialize)]
struct Picture {
    n: i32,
    /// Open bulk edges as `[x1, y1, x2, y2, cluster]`.
    edges: Vec<[i32; 5]>,
    /// Sprinkled edges not already open in ω, same layout.
    sprinkled: Vec<[i32; 5]>,
    clusters: usize,
    density: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    unique: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    u_sequence: Vec<usize>,
}

fn error_json(msg: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": msg.to_string() }).to_string()
}

fn sample_omega(region: &Region, bc: &BoundarySpec, params: &FkParams, sweeps: u32, seed: u64) -> fklab::Result<BondConfig> {
    let mut dynamics = Dynamics::new(Kernel::Auto, region, bc, params)?;
    let mut state = ChainState::new(region, seed, 0);
    for _ in 0..sweeps.max(1) {
        dynamics.advance(&mut state, region);
    }
    Ok(state.omega)
}

fn picture(region: &Region, bc: &BoundarySpec, omega: &BondConfig, gamma: Option<&BondConfig>) -> fklab::Result<Picture> {
    let shown = match gamma {
        Some(g) => omega.union(g)?,
        None => omega.clone(),
    };
    let lab = label_clusters(region, &shown, bc)?;
    let mut edges = Vec::new();
    let mut sprinkled = Vec::new();
    let mut bulk = 0usize;
    let mut open = 0usize;
    for (e, &[a, b]) in region.edges().iter().enumerate() {
        if !(region.is_vertex(a) && region.is_vertex(b)) {
            continue;
        }
        bulk += 1;
        let (x, y) = (region.coords(a), region.coords(b));
        let row = [x[0], x[1], y[0], y[1], lab.component(a) as i32];
        if omega.get(e as u32) {
            open += 1;
            edges.push(row);
        } else if shown.get(e as u32) {
            sprinkled.push(row);
        }
    }
    Ok(Picture {
        n: region.bounds().map_or(0, |b| b[0].1),
        edges,
        sprinkled,
        clusters: lab.k(),
        density: open as f64 / bulk.max(1) as f64,
        unique: None,
        u_sequence: Vec::new(),
    })
}

fn checked_box(n: i32) -> Result<Region, String> {
    if !(1..=MAX_HALF_WIDTH).contains(&n) {
        return Err(format!("half-width must be in 1..={MAX_HALF_WIDTH}"));
    }
    RegionSpec::boxed(2, n).build().map_err(|e| e.to_string())
}

/// Random-cluster configuration on the planar box `Λ_n` after `sweeps`
/// steps of the sampler (Swendsen–Wang at `q = 2`, heat bath otherwise).
#[wasm_bindgen]
pub fn sample_box(n: i32, p: f64, q: f64, wired: bool, sweeps: u32, seed: u64) -> String {
    let run = || -> Result<String, String> {
        let region = checked_box(n)?;
        let params = FkParams::new(p, q).map_err(|e| e.to_string())?;
        let bc = if wired { BoundarySpec::wired(&region) } else { BoundarySpec::free() };
        let omega = sample_omega(&region, &bc, &params, sweeps, seed).map_err(|e| e.to_string())?;
        let pic = picture(&region, &bc, &omega, None).map_err(|e| e.to_string())?;
        Ok(serde_json::to_string(&pic).expect("serializes"))
    };
    run().unwrap_or_else(error_json)
}

/// Exact marginal of the top edge of the unit square under free and wired
/// boundary, on `points` values of `p` in `(0, 1)`.
#[wasm_bindgen]
pub fn plaquette_curves(q: f64, points: u32) -> String {
    let run = || -> Result<String, String> {
        let r = RegionSpec::plaquette().build().map_err(|e| e.to_string())?;
        let wired = BoundarySpec::from_blocks(vec![r.vertices().collect()]);
        let k = points.clamp(2, 400);
        let mut rows = Vec::with_capacity(k as usize);
        for i in 1..k {
            let p = i as f64 / k as f64;
            let params = FkParams::new(p, q).map_err(|e| e.to_string())?;
            let f = fk_edge_marginals(&r, &BoundarySpec::free(), &params).map_err(|e| e.to_string())?[0];
            let w = fk_edge_marginals(&r, &wired, &params).map_err(|e| e.to_string())?[0];
            rows.push([p, f, w, p / (p + q * (1.0 - p))]);
        }
        Ok(serde_json::json!({ "q": q, "rows": rows }).to_string())
    };
    run().unwrap_or_else(error_json)
}

/// One sprinkled sample on `Λ_n`: `ω` from the sampler, `γ_ε` independent,
/// with `Unique(n)` at the origin and the `U_i` trajectory for `L = n`,
/// `δ = 1`.
#[wasm_bindgen]
pub fn sprinkle_box(n: i32, p: f64, eps: f64, sweeps: u32, seed: u64) -> String {
    let run = || -> Result<String, String> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(format!("eps = {eps} outside [0,1]"));
        }
        let region = checked_box(n)?;
        let params = FkParams::new(p, 2.0).map_err(|e| e.to_string())?;
        let bc = BoundarySpec::free();
        let omega = sample_omega(&region, &bc, &params, sweeps, seed).map_err(|e| e.to_string())?;
        let mut rng = stream(seed, 0, Purpose::Sprinkle);
        let gamma = SprinkleField::draw(&region, &mut rng).gamma(&region, eps);
        let mut pic = picture(&region, &bc, &omega, Some(&gamma)).map_err(|e| e.to_string())?;
        let origin = [0, 0];
        if n >= 8 {
            let mut ue = UniqueEvaluator::new(&region, n).map_err(|e| e.to_string())?;
            pic.unique = Some(ue.eval(&region, &omega, &gamma, &origin).map_err(|e| e.to_string())?);
        }
        if let Ok(mut ve) = USequenceEvaluator::new(&region, n as u32, 1.0) {
            let seq = ve.eval(&region, &omega, &gamma, &origin).map_err(|e| e.to_string())?;
            pic.u_sequence = seq.values.iter().map(|v| v.1).collect();
        }
        Ok(serde_json::to_string(&pic).expect("serializes"))
    };
    run().unwrap_or_else(error_json)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn sample_extremes() {
        let full = parse(&sample_box(3, 1.0, 2.0, false, 60, 1));
        assert_eq!(full["clusters"], 1);
        assert_eq!(full["density"], 1.0);
        let empty = parse(&sample_box(3, 0.0, 2.0, false, 2, 1));
        assert_eq!(empty["clusters"], 49);
        assert!(parse(&sample_box(0, 0.5, 2.0, false, 1, 1))["error"].is_string());
        assert!(parse(&sample_box(3, 0.5, 0.5, false, 1, 1))["error"].is_string());
    }

    #[test]
    fn curves_are_ordered() {
        let v = parse(&plaquette_curves(2.0, 10));
        for row in v["rows"].as_array().unwrap() {
            let r: Vec<f64> = row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            assert!(r[3] <= r[1] + 1e-12 && r[1] <= r[2] + 1e-12 && r[2] <= r[0] + 1e-12);
        }
    }

    #[test]
    fn sprinkle_full_gamma_is_unique() {
        let v = parse(&sprinkle_box(8, 0.0, 1.0, 1, 3));
        // p = 0 leaves ω empty, so the crossing part fails.
        assert_eq!(v["unique"], false);
        let v = parse(&sprinkle_box(8, 1.0, 0.0, 60, 3));
        assert_eq!(v["unique"], true);
        assert_eq!(v["u_sequence"].as_array().unwrap().last().unwrap(), 1);
    }
}
