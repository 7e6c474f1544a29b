use std::fs;

use odscale::synthetic::MANIFEST_FILE;
use odscale::{build_synthetic, generate_synthetic, parse_scenario, Error, SyntheticSpec};
use odscale_core::estimate;

#[test]
fn same_seed_gives_identical_files() {
    let spec = SyntheticSpec {
        segment_count: 120,
        od_count: 25,
        noise_std_fraction: 0.05,
        rng_seed: 77,
        ..Default::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate_synthetic(&spec, a.path()).unwrap();
    generate_synthetic(&spec, b.path()).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for n in names {
        assert_eq!(
            fs::read(a.path().join(&n)).unwrap(),
            fs::read(b.path().join(&n)).unwrap(),
            "{n:?}"
        );
    }
    let s77 = build_synthetic(&spec).unwrap();
    let s78 = build_synthetic(&SyntheticSpec {
        rng_seed: 78,
        ..spec
    })
    .unwrap();
    assert_ne!(s77.segments, s78.segments);
}

#[test]
fn manifest_records_seed_and_true_x() {
    let spec = SyntheticSpec {
        true_x: 7.25,
        rng_seed: 9,
        hour: "h08".into(),
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let bundle = generate_synthetic(&spec, dir.path()).unwrap();
    assert_eq!(bundle.hour, "h08");
    let m = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(m.contains("schema_version = 1\n"));
    assert!(m.contains("seed = 9\n"));
    assert!(m.contains("true_x = 7.25\n"));
}

#[test]
fn noiseless_bundle_recovers_true_x() {
    for (seed, x0) in [(1, 2.0), (2, 7.3), (3, 31.0)] {
        let spec = SyntheticSpec {
            segment_count: 150,
            od_count: 30,
            true_x: x0,
            rng_seed: seed,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let scn = parse_scenario(&generate_synthetic(&spec, dir.path()).unwrap()).unwrap();
        let r = estimate(
            &scn.snapshot,
            &scn.config.params,
            &scn.gt,
            &scn.config.options,
        )
        .unwrap();
        assert!((r.x_star - x0).abs() <= 1e-4 * x0, "{} vs {x0}", r.x_star);
    }
}

#[test]
fn path_range_beyond_segment_count_is_infeasible() {
    let spec = SyntheticSpec {
        segment_count: 10,
        path_len: (50, 60),
        ..Default::default()
    };
    assert!(matches!(
        build_synthetic(&spec),
        Err(Error::InfeasibleSpec(_))
    ));
    let dir = tempfile::tempdir().unwrap();
    assert!(generate_synthetic(&spec, dir.path()).is_err());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn noise_perturbs_ground_truth_multiplicatively() {
    let base = SyntheticSpec {
        segment_count: 400,
        od_count: 200,
        rng_seed: 5,
        ..Default::default()
    };
    let clean = build_synthetic(&base).unwrap();
    let noisy = build_synthetic(&SyntheticSpec {
        noise_std_fraction: 0.05,
        ..base
    })
    .unwrap();
    let ratios: Vec<f64> = clean
        .gt
        .iter()
        .zip(&noisy.gt)
        .map(|(c, n)| n.travel_time / c.travel_time - 1.0)
        .collect();
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 0.015, "{mean}");
    assert!((sd - 0.05).abs() < 0.01, "{sd}");
}
