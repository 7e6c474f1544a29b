//! Implementation outputs checked against independent oracles: a dense
//! matrix-vector product, a straight-line re-evaluation of the model,
//! central finite differences, and an exhaustive fine grid.

mod common;

use common::{away_from_clamp, random_instance, stable_central_difference};
use odscale_core::{
    estimate, load_network, objective, segment_counts, segment_demand_coefficients,
    travel_time_derivative, EstimateOptions, GroundTruth, ModelParams, NetworkSnapshot,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense A (segments x ODs) rebuilt from the raw path records.
fn dense_assignment(snap: &NetworkSnapshot) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; snap.od_pairs().len()]; snap.segments().len()];
    for (j, od) in snap.od_pairs().iter().enumerate() {
        let path = snap.paths().iter().find(|p| p.id == od.path_id).unwrap();
        for sid in &path.segment_ids {
            let i = snap.segments().iter().position(|s| &s.id == sid).unwrap();
            a[i][j] = 1.0;
        }
    }
    a
}

/// Model equations evaluated literally, one quantity at a time, in hours.
fn straight_line_times(snap: &NetworkSnapshot, p: &ModelParams, x: f64) -> Vec<f64> {
    let a = dense_assignment(snap);
    let d: Vec<f64> = snap
        .od_pairs()
        .iter()
        .map(|o| o.subsample_demand_vph)
        .collect();
    let mut speed = std::collections::HashMap::new();
    for (i, s) in snap.segments().iter().enumerate() {
        let mut demand = 0.0;
        for j in 0..d.len() {
            demand += a[i][j] * d[j];
        }
        let lambda = x * demand;
        let k = p.kappa * p.k_jam / s.lanes as f64 * lambda;
        let ratio = if k / p.k_jam > 1.0 { 1.0 } else { k / p.k_jam };
        let v =
            s.v_min_kmh + (s.v_max_kmh - s.v_min_kmh) * (1.0 - ratio.powf(p.alpha1)).powf(p.alpha2);
        speed.insert(s.id.clone(), (v, s.length_km));
    }
    snap.paths()
        .iter()
        .map(|path| {
            path.segment_ids
                .iter()
                .map(|id| {
                    let (v, l) = speed[id];
                    l / v
                })
                .sum()
        })
        .collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn coefficients_match_dense_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 20, 10, 2.0, 2.0, 1.0, 0.5);
        let a = dense_assignment(&inst.snapshot);
        let d: Vec<f64> = inst
            .snapshot
            .od_pairs()
            .iter()
            .map(|o| o.subsample_demand_vph)
            .collect();
        let c = segment_demand_coefficients(&inst.snapshot);
        for (i, row) in a.iter().enumerate() {
            let dense: f64 = row.iter().zip(&d).map(|(a, d)| a * d).sum();
            assert!((dense - c.as_slice()[i]).abs() <= 1e-12 * dense.max(1.0));
        }
    }
}

#[test]
fn travel_times_match_straight_line_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let inst = random_instance(&mut rng, 5, 3, 2.0, 3.0, 1.0, 1.1);
        let c = segment_demand_coefficients(&inst.snapshot);
        let st = load_network(&inst.snapshot, &inst.params, &c, 0.7).unwrap();
        let oracle = straight_line_times(&inst.snapshot, &inst.params, 0.7);
        for (t, o) in st.t.iter().zip(&oracle) {
            assert!(rel_err(*t, *o) < 1e-12, "{t} vs {o}");
        }
    }
}

#[test]
fn path_derivative_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 100 {
        let a1 = rng.random_range(1.0..4.0);
        let a2 = rng.random_range(1.0..4.0);
        let inst = random_instance(&mut rng, 12, 6, a1, a2, 10.0, 0.9);
        let x = rng.random_range(1.0..12.0);
        if !away_from_clamp(&inst, x) {
            continue;
        }
        let c = segment_demand_coefficients(&inst.snapshot);
        let h = 1e-6 * x.abs().max(1.0);
        let fd_all = stable_central_difference(&inst, x, h);
        let dt = travel_time_derivative(&inst.snapshot, &inst.params, &c, x).unwrap();
        for p in 0..dt.len() {
            let fd = fd_all[p];
            assert!(rel_err(dt[p], fd) < 1e-6, "path {p}: {} vs {fd}", dt[p]);
        }
        checked += 1;
    }
}

#[test]
fn derivative_vanishes_at_zero_and_on_plateau() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inst = random_instance(&mut rng, 8, 4, 2.5, 2.0, 1.0, 0.5);
    let c = segment_demand_coefficients(&inst.snapshot);
    let dt = travel_time_derivative(&inst.snapshot, &inst.params, &c, 0.0).unwrap();
    assert!(dt.iter().all(|&d| d == 0.0));
    // every loaded segment is at least 0.5 * 100 / 1 = 50 times past jam
    let dt = travel_time_derivative(&inst.snapshot, &inst.params, &c, 100.0).unwrap();
    let st = load_network(&inst.snapshot, &inst.params, &c, 100.0).unwrap();
    for (p, path) in inst.snapshot.paths().iter().enumerate() {
        let all_loaded = path
            .segment_ids
            .iter()
            .all(|s| c.get(&inst.snapshot, s).unwrap() > 0.0);
        if all_loaded {
            assert_eq!(dt[p], 0.0);
            let t_min: f64 = path
                .segment_ids
                .iter()
                .map(|s| {
                    let seg = &inst.snapshot.segments()[inst.snapshot.segment_position(s).unwrap()];
                    seg.length_km / seg.v_min_kmh
                })
                .sum();
            assert!(rel_err(st.t[p], t_min) < 1e-14);
        }
    }
}

#[test]
fn counts_match_arithmetic_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let inst = random_instance(&mut rng, 30, 12, 2.0, 2.0, 1.0, 0.7);
    let c = segment_demand_coefficients(&inst.snapshot);
    let st = load_network(&inst.snapshot, &inst.params, &c, 1.3).unwrap();
    let q = segment_counts(&st, &inst.snapshot);
    for (i, s) in inst.snapshot.segments().iter().enumerate() {
        assert_eq!(q[i], s.lanes as f64 * st.k[i] * st.v[i]);
    }
}

fn noisy_gt<R: Rng>(rng: &mut R, inst: &common::Instance, x0: f64, noise: f64) -> GroundTruth {
    let c = segment_demand_coefficients(&inst.snapshot);
    let st = load_network(&inst.snapshot, &inst.params, &c, x0).unwrap();
    GroundTruth::unweighted(
        &inst.snapshot,
        inst.snapshot.paths().iter().enumerate().map(|(p, path)| {
            let e: f64 = rng.random_range(-noise..=noise);
            (path.id.clone(), st.travel_time_s(p) * (1.0 + e))
        }),
    )
    .unwrap()
}

/// Central difference of the objective, `f(x+h) - f(x-h)` expanded as
/// `sum w (t- - t+)(2 t_obs - t+ - t-) / |P|` around the stable path differences.
fn objective_difference(inst: &common::Instance, gt: &GroundTruth, x: f64, h: f64) -> f64 {
    let dt = stable_central_difference(inst, x, h);
    let tp = straight_line_times(&inst.snapshot, &inst.params, x + h);
    let tm = straight_line_times(&inst.snapshot, &inst.params, x - h);
    let mut sum = 0.0;
    for (p, t_obs, w) in gt.iter() {
        let (a, b) = (tp[p] * 3600.0, tm[p] * 3600.0);
        sum += w * (-dt[p] * 3600.0) * (2.0 * t_obs - a - b);
    }
    sum / gt.len() as f64
}

#[test]
fn objective_matches_summation_and_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut checked = 0;
    while checked < 30 {
        let inst = random_instance(&mut rng, 10, 5, 2.0, 2.5, 8.0, 0.9);
        let gt = noisy_gt(&mut rng, &inst, 8.0, 0.1);
        let x = rng.random_range(1.0..20.0);
        if !away_from_clamp(&inst, x) {
            continue;
        }
        let (f, g) = objective(&inst.snapshot, &inst.params, &gt, x).unwrap();
        let times = straight_line_times(&inst.snapshot, &inst.params, x);
        let mut sum = 0.0;
        for (p, t_obs, w) in gt.iter() {
            sum += w * (t_obs - times[p] * 3600.0).powi(2);
        }
        let oracle = sum / gt.len() as f64;
        assert!(rel_err(f, oracle) < 1e-9, "{f} vs {oracle}");

        let h = 1e-6 * x.max(1.0);
        let fd = objective_difference(&inst, &gt, x, h);
        assert!(rel_err(g, fd) < 1e-6, "{g} vs {fd}");
        checked += 1;
    }
}

#[test]
fn optimum_not_beaten_by_fine_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..5 {
        let mut inst = random_instance(&mut rng, 15, 7, 2.0, 2.0, 6.0, 0.8);
        inst.params.x_lower = 1.0;
        inst.params.x_upper = 100.0;
        let gt = noisy_gt(&mut rng, &inst, 6.0, 0.05);
        let r = estimate(
            &inst.snapshot,
            &inst.params,
            &gt,
            &EstimateOptions::default(),
        )
        .unwrap();
        let step = (inst.params.x_upper - inst.params.x_lower) / 1e5;
        let mut best = f64::INFINITY;
        for k in 0..=100_000 {
            let x = (inst.params.x_lower + k as f64 * step).min(inst.params.x_upper);
            best = best.min(objective(&inst.snapshot, &inst.params, &gt, x).unwrap().0);
        }
        let tol = 1e-9 * (1.0 + r.objective_value);
        assert!(
            r.objective_value <= best + tol,
            "{} > {best}",
            r.objective_value
        );
    }
}
