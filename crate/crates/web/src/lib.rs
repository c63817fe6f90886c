//! wasm-bindgen exports for `www/index.html`. Every export returns a JSON
//! string; errors come back as `{"error": "..."}` so the page never has to
//! catch exceptions.

use janossy_core::architectures::Encoder;
use janossy_core::bounds::{axis_cardinality, grid_size, BoundsRow};
use janossy_core::collision::{find_collision, BorsukUlamMap, SearchConfig};
use janossy_core::constructions::{sample_obstruction, ObstructionParams};
use janossy_core::geometry::{regular_simplex, SphereDirection};
use janossy_core::numerics::{Activation, Mlp};
use janossy_core::seed::{component_seed, Stream};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// Bounds for one `(d, n, k)` plus the intermediate grid quantities.
#[wasm_bindgen]
pub fn bounds_row(d: u32, n: u32, k: u32) -> String {
    respond((|| {
        let (d, n, k) = (d as u64, n as u64, k as u64);
        let row = BoundsRow::new(d, n, k).map_err(|e| e.to_string())?;
        let (s, axis) = if k < n {
            let s = grid_size(d, n, k).map_err(|e| e.to_string())?;
            (
                Some(s),
                Some(axis_cardinality(s, k).map_err(|e| e.to_string())?),
            )
        } else {
            (None, None)
        };
        Ok(json!({ "row": row, "sphere_dim": d * (n.saturating_sub(k)), "s": s, "axis": axis }))
    })())
}

/// Region of the direction at `angle` (radians) on the circle, its antipode's
/// region, and the cover vertices.
#[wasm_bindgen]
pub fn cover_point(angle: f64) -> String {
    respond((|| {
        let cover = regular_simplex(2).map_err(|e| e.to_string())?;
        let u = SphereDirection::new(vec![angle.cos(), angle.sin()]).map_err(|e| e.to_string())?;
        let region = cover.assign_region(&u).map_err(|e| e.to_string())?;
        let anti = cover
            .assign_region(&u.antipode())
            .map_err(|e| e.to_string())?;
        Ok(json!({
            "vertices": cover.vertices(),
            "region": region,
            "antipode_region": anti,
            "scores": cover.vertices().iter().map(|v| v[0] * u.coords()[0] + v[1] * u.coords()[1]).collect::<Vec<_>>(),
        }))
    })())
}

/// Random indexed tanh encoder at `d = 1, n = 3, k = 1` with latent dimension
/// `m`: the antipodal residual around the circle and the searched collision.
#[wasm_bindgen]
pub fn collision_demo(m: u32, seed: u32, restarts: u32, samples: u32) -> String {
    respond((|| {
        if m == 0 || m > 16 || samples < 8 {
            return Err("need 1 <= M <= 16 and at least 8 samples".into());
        }
        let seed = seed as u64;
        let members = (0..3)
            .map(|t| {
                Mlp::random(
                    &[1, 8, m as usize],
                    Activation::Tanh,
                    component_seed(seed, Stream::EncoderInit, t),
                )
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let enc = Encoder::indexed(1, 3, 1, members).map_err(|e| e.to_string())?;
        let params =
            ObstructionParams::new(1, 3, 1, 0.25, 50, component_seed(seed, Stream::Instance, 0));
        let inst = sample_obstruction(params).map_err(|e| e.to_string())?;
        let map = BorsukUlamMap::new(&enc, &inst).map_err(|e| e.to_string())?;
        let landscape = (0..samples)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / samples as f64;
                let u = SphereDirection::new(vec![a.cos(), a.sin()]).map_err(|e| e.to_string())?;
                map.antipodal_residual(&u).map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = SearchConfig {
            restarts: restarts.max(1) as usize,
            seed: component_seed(seed, Stream::Search, 0),
            ..SearchConfig::default()
        };
        let report = find_collision(&map, &cfg).map_err(|e| e.to_string())?;
        let cert = report.certificate.as_ref();
        Ok(json!({
            "latent_dim": m,
            "guaranteed": map.collision_guaranteed(),
            "landscape": landscape,
            "certified": cert.is_some(),
            "best_residual": report.best_residual,
            "best_direction": report.best_direction,
            "region": cert.map(|c| c.region),
            "x_plus": cert.map(|c| &c.x_plus),
            "x_minus": cert.map(|c| &c.x_minus),
            "restarts_used": report.restarts_used,
        }))
    })())
}
