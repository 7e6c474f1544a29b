#![allow(dead_code)]

use odscale_core::{build_snapshot, ModelParams, NetworkSnapshot, OdPair, Path, Segment};
use rand::Rng;

pub struct Instance {
    pub snapshot: NetworkSnapshot,
    pub params: ModelParams,
}

/// Segments on a line; every path is a random contiguous window; one OD per path.
/// `kappa` is set so that the busiest segment reaches density ratio `peak` at `x_ref`.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    segments: usize,
    paths: usize,
    alpha1: f64,
    alpha2: f64,
    x_ref: f64,
    peak: f64,
) -> Instance {
    let segs: Vec<Segment> = (0..segments)
        .map(|i| {
            let v_max = rng.random_range(60.0..120.0);
            Segment {
                id: format!("seg{i}"),
                length_km: rng.random_range(0.1..3.0),
                lanes: rng.random_range(1..=5),
                v_max_kmh: v_max,
                v_min_kmh: rng.random_range(3.0..0.5 * v_max),
            }
        })
        .collect();
    let mut ps = Vec::new();
    let mut ods = Vec::new();
    for p in 0..paths {
        let len = rng.random_range(1..=segments.min(8));
        let start = rng.random_range(0..=segments - len);
        ps.push(Path {
            id: format!("p{p}"),
            segment_ids: (start..start + len).map(|i| format!("seg{i}")).collect(),
        });
        ods.push(OdPair {
            id: format!("od{p}"),
            path_id: format!("p{p}"),
            subsample_demand_vph: rng.random_range(10.0..300.0),
        });
    }
    let snapshot = build_snapshot(segs, ps, ods).unwrap();
    let c = odscale_core::segment_demand_coefficients(&snapshot);
    let max_load = snapshot
        .segments()
        .iter()
        .zip(c.as_slice())
        .map(|(s, &c)| c / f64::from(s.lanes))
        .fold(0.0, f64::max);
    let params = ModelParams {
        k_jam: rng.random_range(80.0..160.0),
        kappa: peak / (x_ref * max_load),
        alpha1,
        alpha2,
        x_lower: 0.0,
        x_upper: 100.0,
    };
    Instance { snapshot, params }
}

/// Density ratio of every loaded segment at `x`, computed from first principles.
pub fn loaded_ratios(inst: &Instance, x: f64) -> Vec<f64> {
    let c = odscale_core::segment_demand_coefficients(&inst.snapshot);
    inst.snapshot
        .segments()
        .iter()
        .zip(c.as_slice())
        .filter(|(_, &c)| c > 0.0)
        .map(|(s, &c)| inst.params.kappa * x * c / f64::from(s.lanes))
        .collect()
}

pub fn away_from_clamp(inst: &Instance, x: f64) -> bool {
    loaded_ratios(inst, x)
        .iter()
        .all(|&r| r > 1e-3 && (r - 1.0).abs() > 1e-3)
}

/// Central difference `(t(x+h) - t(x-h)) / 2h` per path, with every
/// subtraction rearranged so nothing cancels catastrophically: the speed
/// difference goes through `log1p`/`expm1` on the density-ratio powers.
/// Requires no segment to cross the clamp point inside `[x-h, x+h]`.
pub fn stable_central_difference(inst: &Instance, x: f64, h: f64) -> Vec<f64> {
    let p = &inst.params;
    let xp = x + h;
    let xm = x - h;
    let width = xp - xm;
    let c = odscale_core::segment_demand_coefficients(&inst.snapshot);
    let seg_diff: Vec<f64> = inst
        .snapshot
        .segments()
        .iter()
        .zip(c.as_slice())
        .map(|(s, &c)| {
            if c == 0.0 {
                return 0.0;
            }
            let rm = p.kappa * xm * c / f64::from(s.lanes);
            if rm >= 1.0 {
                // on the plateau at both points
                return 0.0;
            }
            let um = rm.powf(p.alpha1);
            // u+ - u- = u- * ((xp/xm)^a1 - 1)
            let du = um * (p.alpha1 * (width / xm).ln_1p()).exp_m1();
            let up = um + du;
            assert!(up < 1.0, "clamped segment in stable difference");
            // G = (1-u)^a2 = exp(a2 * log1p(-u))
            let am = p.alpha2 * (-um).ln_1p();
            let ap = p.alpha2 * (-up).ln_1p();
            // log1p(-up) - log1p(-um) = log1p(-du / (1 - um))
            let da = p.alpha2 * (-du / (1.0 - um)).ln_1p();
            let gm = am.exp();
            let gp = ap.exp();
            let dg = gm * da.exp_m1(); // G+ - G-
            let span = s.v_max_kmh - s.v_min_kmh;
            let vm = s.v_min_kmh + span * gm;
            let vp = s.v_min_kmh + span * gp;
            // l/v+ - l/v- = l * (v- - v+) / (v+ v-)
            s.length_km * (-span * dg) / (vp * vm)
        })
        .collect();
    (0..inst.snapshot.paths().len())
        .map(|path| {
            inst.snapshot
                .path_segment_indices(path)
                .iter()
                .map(|&i| seg_diff[i])
                .sum::<f64>()
                / width
        })
        .collect()
}
