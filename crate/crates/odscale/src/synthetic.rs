//! Synthetic highway scenarios with a known scaling factor.
//!
//! The network is a chain of corridors. Each corridor is a mainline of
//! directed segments between nodes `0..=M`, with on-ramps joining at nodes
//! `0..M` and off-ramps leaving at nodes `1..=M`; a connector segment links a
//! node of one corridor to the start of the next. A path is a random walk
//! from an on-ramp along mainline and connector segments to an off-ramp.
//!
//! Ground-truth travel times are the model's travel times at `true_x`,
//! multiplied by `1 + e` with `e ~ N(0, noise_std_fraction)`. Sensor counts
//! are the model's segment counts at `true_x` with the same noise.

use std::collections::HashSet;
use std::fs;
use std::path::Path as FsPath;

use odscale_core::{
    build_snapshot, load_network, segment_counts, segment_demand_coefficients, ModelParams, OdPair,
    Path, Segment,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::formats::{self, GtRow, RunConfig, SensorCount};
use crate::scenario::ScenarioBundle;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub segment_count: usize,
    pub od_count: usize,
    /// Inclusive range of path lengths in segments, ramps included.
    pub path_len: (usize, usize),
    pub true_x: f64,
    pub noise_std_fraction: f64,
    pub rng_seed: u64,
    /// Subsample demand range (veh/h), sampled uniformly.
    pub demand_vph: (f64, f64),
    /// `k / k_jam` on the most loaded segment at `true_x`; sets `kappa`.
    pub peak_density_ratio: f64,
    /// Fraction of loaded segments carrying a sensor (at least one sensor).
    pub sensor_fraction: f64,
    pub k_jam: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub x_lower: f64,
    pub x_upper: f64,
    pub hour: String,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            segment_count: 60,
            od_count: 12,
            path_len: (3, 12),
            true_x: 5.0,
            noise_std_fraction: 0.0,
            rng_seed: 0,
            demand_vph: (10.0, 300.0),
            peak_density_ratio: 0.8,
            sensor_fraction: 0.1,
            k_jam: ModelParams::DEFAULT_K_JAM,
            alpha1: ModelParams::DEFAULT_ALPHA1,
            alpha2: ModelParams::DEFAULT_ALPHA2,
            x_lower: ModelParams::DEFAULT_X_LOWER,
            x_upper: ModelParams::DEFAULT_X_UPPER,
            hour: "h0".into(),
        }
    }
}

/// A generated scenario held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub spec: SyntheticSpec,
    pub segments: Vec<Segment>,
    pub paths: Vec<Path>,
    pub od_pairs: Vec<OdPair>,
    pub config: RunConfig,
    /// Ground truth in seconds.
    pub gt: Vec<GtRow>,
    pub sensors: Vec<SensorCount>,
}

const MAX_WALK_ATTEMPTS: usize = 200;

fn infeasible(msg: impl Into<String>) -> Error {
    Error::InfeasibleSpec(msg.into())
}

impl SyntheticSpec {
    fn check(&self) -> Result<()> {
        let (lo, hi) = self.path_len;
        if lo < 3 {
            return Err(infeasible(
                "paths need at least 3 segments (on-ramp, mainline, off-ramp)",
            ));
        }
        if lo > hi {
            return Err(infeasible("path length range is empty"));
        }
        if hi > self.segment_count {
            return Err(infeasible(format!(
                "path length range [{lo}, {hi}] exceeds segment count {}",
                self.segment_count
            )));
        }
        if self.od_count == 0 {
            return Err(infeasible("od_count >= 1"));
        }
        if !(self.true_x.is_finite() && self.true_x > 0.0) {
            return Err(infeasible("true_x > 0"));
        }
        if !(self.true_x >= self.x_lower && self.true_x <= self.x_upper) {
            return Err(infeasible("true_x within [x_lower, x_upper]"));
        }
        if !(self.noise_std_fraction.is_finite() && self.noise_std_fraction >= 0.0) {
            return Err(infeasible("noise_std_fraction >= 0"));
        }
        let (dlo, dhi) = self.demand_vph;
        if !(dlo.is_finite() && dhi.is_finite() && 0.0 < dlo && dlo <= dhi) {
            return Err(infeasible("0 < demand min <= demand max"));
        }
        if !(self.peak_density_ratio > 0.0 && self.peak_density_ratio.is_finite()) {
            return Err(infeasible("peak_density_ratio > 0"));
        }
        if !(0.0..=1.0).contains(&self.sensor_fraction) {
            return Err(infeasible("0 <= sensor_fraction <= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Mainline,
    OnRamp,
    OffRamp,
    Connector,
}

struct Corridor {
    /// Segment index of mainline link `i -> i + 1`.
    mainline: Vec<usize>,
    /// Per node: on-ramp / off-ramp segment indices, if any.
    on: Vec<Option<usize>>,
    off: Vec<Option<usize>>,
    /// Per node: connector into the next corridor, if any.
    connector: Vec<Option<usize>>,
}

struct Topology {
    kinds: Vec<Kind>,
    corridors: Vec<Corridor>,
}

/// Lays out exactly `n` segments (`n >= 3`).
fn topology<R: Rng>(rng: &mut R, n: usize) -> Topology {
    let corridor_count = (1 + n / 2000).min(n / 3).max(1);
    let budget = n - (corridor_count - 1);
    let mainline_total = budget.div_ceil(3).max(corridor_count);
    let ramp_total = budget - mainline_total;

    let mut lengths = vec![mainline_total / corridor_count; corridor_count];
    for l in lengths.iter_mut().take(mainline_total % corridor_count) {
        *l += 1;
    }

    // every corridor gets an on-ramp at node 0 and an off-ramp at its last
    // node; the remaining ramps go to random free slots
    let mut on_slots: Vec<Vec<bool>> = lengths.iter().map(|&m| vec![false; m + 1]).collect();
    let mut off_slots = on_slots.clone();
    let mut free = Vec::new();
    for (c, &m) in lengths.iter().enumerate() {
        on_slots[c][0] = true;
        off_slots[c][m] = true;
        free.extend((1..m).map(|i| (c, i, true)));
        free.extend((1..m).map(|i| (c, i, false)));
    }
    free.shuffle(rng);
    // mainline >= budget / 3 leaves enough slots for every ramp
    let extra = ramp_total - 2 * corridor_count;
    for &(c, i, on) in &free[..extra] {
        if on {
            on_slots[c][i] = true;
        } else {
            off_slots[c][i] = true;
        }
    }

    let mut kinds = Vec::with_capacity(n);
    let mut push = |k: Kind| {
        kinds.push(k);
        kinds.len() - 1
    };
    let mut corridors = Vec::with_capacity(corridor_count);
    for (c, &m) in lengths.iter().enumerate() {
        let mainline = (0..m).map(|_| push(Kind::Mainline)).collect();
        let on = on_slots[c]
            .iter()
            .map(|&b| b.then(|| push(Kind::OnRamp)))
            .collect();
        let off = off_slots[c]
            .iter()
            .map(|&b| b.then(|| push(Kind::OffRamp)))
            .collect();
        corridors.push(Corridor {
            mainline,
            on,
            off,
            connector: vec![None; m + 1],
        });
    }
    for c in 0..corridor_count.saturating_sub(1) {
        let m = lengths[c];
        let node = rng.random_range(0..=m);
        let s = push(Kind::Connector);
        corridors[c].connector[node] = Some(s);
    }
    debug_assert_eq!(kinds.len(), n);
    Topology { kinds, corridors }
}

fn segment<R: Rng>(rng: &mut R, id: String, kind: Kind) -> Segment {
    let (len, lanes, vmax, vmin) = match kind {
        Kind::Mainline => ((0.3, 3.0), (2, 5), (100.0, 120.0), (5.0, 15.0)),
        Kind::OnRamp | Kind::OffRamp => ((0.2, 0.6), (1, 1), (60.0, 80.0), (5.0, 10.0)),
        Kind::Connector => ((0.5, 2.0), (1, 2), (70.0, 90.0), (5.0, 10.0)),
    };
    Segment {
        id,
        length_km: rng.random_range(len.0..=len.1),
        lanes: rng.random_range(lanes.0..=lanes.1),
        v_max_kmh: rng.random_range(vmax.0..=vmax.1),
        v_min_kmh: rng.random_range(vmin.0..=vmin.1),
    }
}

/// One random walk of exactly `len` segments, or `None` on a dead end.
fn walk<R: Rng>(
    rng: &mut R,
    topo: &Topology,
    starts: &[(usize, usize)],
    len: usize,
) -> Option<Vec<usize>> {
    let &(mut c, mut node) = starts.get(rng.random_range(0..starts.len()))?;
    let mut route = vec![topo.corridors[c].on[node]?];
    while route.len() < len - 1 {
        let cor = &topo.corridors[c];
        let mut moves = Vec::with_capacity(2);
        if node < cor.mainline.len() {
            moves.push((cor.mainline[node], c, node + 1));
        }
        if let Some(s) = cor.connector[node] {
            moves.push((s, c + 1, 0));
        }
        if moves.is_empty() {
            return None;
        }
        let (s, nc, nn) = moves[rng.random_range(0..moves.len())];
        route.push(s);
        c = nc;
        node = nn;
    }
    route.push(topo.corridors[c].off[node]?);
    Some(route)
}

/// Builds a synthetic scenario in memory.
pub fn build_synthetic(spec: &SyntheticSpec) -> Result<SyntheticScenario> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let topo = topology(&mut rng, spec.segment_count);
    let segments: Vec<Segment> = topo
        .kinds
        .iter()
        .enumerate()
        .map(|(i, &k)| segment(&mut rng, format!("s{i}"), k))
        .collect();

    let starts: Vec<(usize, usize)> = topo
        .corridors
        .iter()
        .enumerate()
        .flat_map(|(c, cor)| {
            cor.on
                .iter()
                .enumerate()
                .filter(|(_, s)| s.is_some())
                .map(move |(i, _)| (c, i))
        })
        .collect();

    let (lo, hi) = spec.path_len;
    let mut routes = Vec::with_capacity(spec.od_count);
    let mut taken = HashSet::new();
    while routes.len() < spec.od_count {
        let mut found = None;
        for _ in 0..MAX_WALK_ATTEMPTS {
            let len = rng.random_range(lo..=hi);
            if let Some(r) = walk(&mut rng, &topo, &starts, len) {
                // one route per (on-ramp, off-ramp) pair
                if taken.insert((r[0], r[r.len() - 1])) {
                    found = Some(r);
                    break;
                }
            }
        }
        match found {
            Some(r) => routes.push(r),
            None => {
                return Err(infeasible(format!(
                    "found only {} distinct ramp-to-ramp paths with lengths in [{lo}, {hi}]",
                    routes.len()
                )))
            }
        }
    }

    let paths: Vec<Path> = routes
        .iter()
        .enumerate()
        .map(|(k, r)| Path {
            id: format!("p{k}"),
            segment_ids: r.iter().map(|&s| segments[s].id.clone()).collect(),
        })
        .collect();
    let (dlo, dhi) = spec.demand_vph;
    let od_pairs: Vec<OdPair> = paths
        .iter()
        .enumerate()
        .map(|(k, p)| OdPair {
            id: format!("od{k}"),
            path_id: p.id.clone(),
            subsample_demand_vph: rng.random_range(dlo..=dhi),
        })
        .collect();

    let snapshot = build_snapshot(segments.clone(), paths.clone(), od_pairs.clone())?;
    let coeffs = segment_demand_coefficients(&snapshot);
    let peak = coeffs
        .as_slice()
        .iter()
        .zip(snapshot.segments())
        .map(|(c, s)| c / s.lanes as f64)
        .fold(0.0, f64::max);
    let mut config = RunConfig::with_kappa(spec.peak_density_ratio / (spec.true_x * peak));
    config.params.k_jam = spec.k_jam;
    config.params.alpha1 = spec.alpha1;
    config.params.alpha2 = spec.alpha2;
    config.params.x_lower = spec.x_lower;
    config.params.x_upper = spec.x_upper;
    config.params.validate()?;

    let state = load_network(&snapshot, &config.params, &coeffs, spec.true_x)?;
    let noise = Normal::new(0.0, spec.noise_std_fraction)
        .map_err(|e| infeasible(format!("noise distribution: {e}")))?;
    let sigma = spec.noise_std_fraction;
    let perturb = |rng: &mut ChaCha8Rng, v: f64| {
        if sigma == 0.0 {
            return v;
        }
        loop {
            let y = v * (1.0 + noise.sample(rng));
            if y > 0.0 {
                return y;
            }
        }
    };
    let gt: Vec<GtRow> = paths
        .iter()
        .enumerate()
        .map(|(p, path)| GtRow {
            path_id: path.id.clone(),
            travel_time: perturb(&mut rng, state.travel_time_s(p)),
            weight: 1.0,
        })
        .collect();

    let counts = segment_counts(&state, &snapshot);
    let mut loaded: Vec<usize> = (0..segments.len())
        .filter(|&i| coeffs.as_slice()[i] > 0.0)
        .collect();
    loaded.shuffle(&mut rng);
    let n_sensors = ((loaded.len() as f64 * spec.sensor_fraction).round() as usize).max(1);
    let mut chosen: Vec<usize> = loaded.into_iter().take(n_sensors).collect();
    chosen.sort_unstable();
    let sensors = chosen
        .into_iter()
        .map(|i| SensorCount {
            segment_id: segments[i].id.clone(),
            count_vph: perturb(&mut rng, counts[i]),
        })
        .collect();

    Ok(SyntheticScenario {
        spec: spec.clone(),
        segments,
        paths,
        od_pairs,
        config,
        gt,
        sensors,
    })
}

fn manifest(spec: &SyntheticSpec) -> String {
    format!(
        "schema_version = {SCHEMA_VERSION}\nseed = {}\ntrue_x = {:?}\nhour = {}\n\
         segment_count = {}\nod_count = {}\npath_len_min = {}\npath_len_max = {}\n\
         noise_std_fraction = {:?}\npeak_density_ratio = {:?}\n",
        spec.rng_seed,
        spec.true_x,
        spec.hour,
        spec.segment_count,
        spec.od_count,
        spec.path_len.0,
        spec.path_len.1,
        spec.noise_std_fraction,
        spec.peak_density_ratio,
    )
}

pub const MANIFEST_FILE: &str = "manifest.txt";

impl SyntheticScenario {
    /// Writes a flat bundle into `dir`, plus `manifest.txt`.
    pub fn write(&self, dir: &FsPath) -> Result<ScenarioBundle> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        formats::write_segments(&dir.join(formats::SEGMENTS_FILE), &self.segments)?;
        formats::write_paths(&dir.join(formats::PATHS_FILE), &self.paths)?;
        formats::write_od(&dir.join(formats::OD_FILE), &self.od_pairs)?;
        formats::write_gt(&dir.join(formats::GT_FILE), &self.gt)?;
        formats::write_sensors(&dir.join(formats::SENSORS_FILE), &self.sensors)?;
        formats::write_config(&dir.join(formats::CONFIG_FILE), &self.config)?;
        let m = dir.join(MANIFEST_FILE);
        fs::write(&m, manifest(&self.spec)).map_err(|e| Error::io(&m, e))?;
        let mut bundle = ScenarioBundle::locate(dir, None, None);
        bundle.hour = self.spec.hour.clone();
        Ok(bundle)
    }
}

/// Builds a scenario and writes it to `dir`.
pub fn generate_synthetic(spec: &SyntheticSpec, dir: &FsPath) -> Result<ScenarioBundle> {
    build_synthetic(spec)?.write(dir)
}
