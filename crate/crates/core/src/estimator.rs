//! Scaling-factor estimation against observed path travel times.
//!
//! The objective is the weighted mean squared travel-time error
//!
//! ```text
//! f(x) = (1/|P|) * sum_p w_p * (t_p_obs - t_p(x))^2
//! ```
//!
//! with travel times in seconds. [`estimate`] minimizes it over
//! `[x_lower, x_upper]` by splitting the interval at equally spaced seeds and
//! running a derivative-based bracketed search in every cell.
//! [`grid_search_benchmark`] evaluates `f` on a fixed grid and serves as the
//! exhaustive reference.

use alloc::string::String;
use alloc::vec::Vec;

use crate::flow::{self, segment_counts, ModelError, ModelParams};
use crate::network::{segment_demand_coefficients, DemandCoefficients, NetworkSnapshot, OdPair};
pub use crate::scalar::StopReason;
use crate::scalar::{self, Probe, Settings};
use crate::SECONDS_PER_HOUR;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("ground truth references unknown path `{0}`")]
    UnknownPath(String),
    #[error("ground truth lists path `{0}` more than once")]
    DuplicatePath(String),
    #[error("travel time {value} s for path `{path}` must be finite and > 0")]
    InvalidTravelTime { path: String, value: f64 },
    #[error("weight {value} for path `{path}` must be finite and >= 0")]
    InvalidWeight { path: String, value: f64 },
    #[error("ground truth is empty or carries zero total weight")]
    EmptyGroundTruth,
    #[error("grid specification yields no points")]
    EmptyGrid,
    #[error("invalid optimizer option: {0}")]
    InvalidOptions(&'static str),
    #[error("optimizer hit its iteration cap after {iterations} iterations (best x = {x_star})")]
    NoConvergence { iterations: usize, x_star: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GtEntry {
    path: usize,
    travel_time_s: f64,
    weight: f64,
}

/// Observed path travel times and their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    entries: Vec<GtEntry>,
}

impl GroundTruth {
    /// Builds ground truth from `(path id, travel time in s, weight)` rows.
    pub fn new<I, S>(snapshot: &NetworkSnapshot, rows: I) -> Result<Self, EstimateError>
    where
        I: IntoIterator<Item = (S, f64, f64)>,
        S: AsRef<str>,
    {
        let mut seen = alloc::vec![false; snapshot.paths().len()];
        let mut entries = Vec::new();
        for (id, tt, w) in rows {
            let id = id.as_ref();
            let path = snapshot
                .path_position(id)
                .ok_or_else(|| EstimateError::UnknownPath(id.into()))?;
            if seen[path] {
                return Err(EstimateError::DuplicatePath(id.into()));
            }
            seen[path] = true;
            if !(tt.is_finite() && tt > 0.0) {
                return Err(EstimateError::InvalidTravelTime {
                    path: id.into(),
                    value: tt,
                });
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(EstimateError::InvalidWeight {
                    path: id.into(),
                    value: w,
                });
            }
            entries.push(GtEntry {
                path,
                travel_time_s: tt,
                weight: w,
            });
        }
        Ok(Self { entries })
    }

    /// Unit weights for every row.
    pub fn unweighted<I, S>(snapshot: &NetworkSnapshot, rows: I) -> Result<Self, EstimateError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        Self::new(snapshot, rows.into_iter().map(|(p, t)| (p, t, 1.0)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(path index, travel time s, weight)` in input order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.entries
            .iter()
            .map(|e| (e.path, e.travel_time_s, e.weight))
    }

    fn check_usable(&self) -> Result<(), EstimateError> {
        if self.entries.is_empty() || self.entries.iter().all(|e| e.weight == 0.0) {
            Err(EstimateError::EmptyGroundTruth)
        } else {
            Ok(())
        }
    }
}

/// Reusable objective evaluator; holds the demand coefficients and scratch
/// buffers so repeated evaluations do not allocate.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    snapshot: &'a NetworkSnapshot,
    params: ModelParams,
    gt: &'a GroundTruth,
    coefficients: DemandCoefficients,
    seg_t: Vec<f64>,
    seg_dt: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(
        snapshot: &'a NetworkSnapshot,
        params: &ModelParams,
        gt: &'a GroundTruth,
    ) -> Result<Self, EstimateError> {
        params.validate()?;
        gt.check_usable()?;
        Ok(Self {
            snapshot,
            params: *params,
            gt,
            coefficients: segment_demand_coefficients(snapshot),
            seg_t: Vec::new(),
            seg_dt: Vec::new(),
        })
    }

    pub fn coefficients(&self) -> &DemandCoefficients {
        &self.coefficients
    }

    /// `(f(x), f'(x))` in s² and s² per unit x.
    pub fn eval(&mut self, x: f64) -> Result<(f64, f64), EstimateError> {
        self.params.check_x(x)?;
        flow::segment_times(
            self.snapshot,
            &self.params,
            &self.coefficients,
            x,
            &mut self.seg_t,
            &mut self.seg_dt,
        );
        let mut value = 0.0;
        let mut slope = 0.0;
        for e in &self.gt.entries {
            let idx = self.snapshot.path_segment_indices(e.path);
            let t: f64 = idx.iter().map(|&i| self.seg_t[i]).sum();
            let dt: f64 = idx.iter().map(|&i| self.seg_dt[i]).sum();
            let resid = e.travel_time_s - t * SECONDS_PER_HOUR;
            value += e.weight * resid * resid;
            slope += -2.0 * e.weight * resid * dt * SECONDS_PER_HOUR;
        }
        let n = self.gt.entries.len() as f64;
        let (value, slope) = (value / n, slope / n);
        if !value.is_finite() || !slope.is_finite() {
            return Err(ModelError::NonFiniteResult {
                quantity: "objective",
                x,
            }
            .into());
        }
        Ok((value, slope))
    }

    fn probe(&mut self, x: f64) -> Result<Probe, EstimateError> {
        let (f, g) = self.eval(x)?;
        Ok(Probe { x, f, g })
    }
}

/// Objective value and derivative at `x`.
pub fn objective(
    snapshot: &NetworkSnapshot,
    params: &ModelParams,
    gt: &GroundTruth,
    x: f64,
) -> Result<(f64, f64), EstimateError> {
    Objective::new(snapshot, params, gt)?.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    /// Equally spaced seeds across the bounds, endpoints included; the
    /// search runs once in every cell between neighbouring seeds.
    pub seeds: usize,
    pub max_iter_per_start: usize,
    /// Bracket-width tolerance relative to `x_upper - x_lower`.
    pub tol_x_rel: f64,
    /// Projected-gradient tolerance (s² per unit x).
    pub tol_g: f64,
    /// Objective values closer than this count as tied; ties go to smaller x.
    pub tol_f: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            seeds: 8,
            max_iter_per_start: 200,
            tol_x_rel: 1e-8,
            tol_g: 1e-10,
            tol_f: 1e-12,
        }
    }
}

impl EstimateOptions {
    pub fn validate(&self) -> Result<(), EstimateError> {
        if self.seeds < 2 {
            return Err(EstimateError::InvalidOptions("seeds >= 2"));
        }
        if self.max_iter_per_start == 0 {
            return Err(EstimateError::InvalidOptions("max_iter_per_start >= 1"));
        }
        if !(self.tol_x_rel >= 0.0 && self.tol_g >= 0.0 && self.tol_f >= 0.0) {
            return Err(EstimateError::InvalidOptions("tolerances >= 0"));
        }
        Ok(())
    }
}

/// One objective evaluation made by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub x: f64,
    pub f: f64,
    pub df_dx: f64,
}

impl From<Probe> for IterateRecord {
    fn from(p: Probe) -> Self {
        Self {
            x: p.x,
            f: p.f,
            df_dx: p.g,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub x_star: f64,
    /// Objective at `x_star` (s²).
    pub objective_value: f64,
    pub df_dx: f64,
    /// Optimizer iterations summed over all cells.
    pub iterations: usize,
    pub converged: bool,
    /// How the search in the winning cell ended.
    pub stop_reason: StopReason,
    /// Subsample OD scaled by `x_star`, in snapshot OD order.
    pub upscaled_od: Vec<OdPair>,
    /// Model travel time per path at `x_star` (s), snapshot path order.
    pub predicted_travel_times_s: Vec<f64>,
    /// Model segment flow at `x_star` (veh/h), snapshot segment order.
    pub predicted_counts_vph: Vec<f64>,
    /// Seeds first, then every iterate in evaluation order.
    pub trace: Vec<IterateRecord>,
}

impl EstimationResult {
    /// Turns a capped run into [`EstimateError::NoConvergence`].
    pub fn require_converged(self) -> Result<Self, EstimateError> {
        if self.converged {
            Ok(self)
        } else {
            Err(EstimateError::NoConvergence {
                iterations: self.iterations,
                x_star: self.x_star,
            })
        }
    }
}

/// Every OD entry multiplied by `x`; ids and paths untouched.
pub fn apply_scaling(od_pairs: &[OdPair], x: f64) -> Vec<OdPair> {
    od_pairs
        .iter()
        .map(|od| OdPair {
            subsample_demand_vph: od.subsample_demand_vph * x,
            ..od.clone()
        })
        .collect()
}

/// Estimates the scaling factor. A run that hits the iteration cap still
/// returns its best point with `converged == false`.
pub fn estimate(
    snapshot: &NetworkSnapshot,
    params: &ModelParams,
    gt: &GroundTruth,
    options: &EstimateOptions,
) -> Result<EstimationResult, EstimateError> {
    options.validate()?;
    let mut obj = Objective::new(snapshot, params, gt)?;
    let (lo, hi) = (params.x_lower, params.x_upper);
    let settings = Settings {
        max_iter: options.max_iter_per_start,
        tol_x: options.tol_x_rel * (hi - lo),
        tol_g: options.tol_g,
        lower: lo,
        upper: hi,
    };

    let n = options.seeds;
    let mut seeds = Vec::with_capacity(n);
    for k in 0..n {
        let x = if k + 1 == n {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        };
        seeds.push(obj.probe(x)?);
    }
    let mut trace: Vec<Probe> = seeds.clone();

    let mut best: Option<scalar::LocalMin> = None;
    let mut iterations = 0;
    for cell in seeds.windows(2) {
        let mut eval = |x: f64| obj.probe(x);
        let local = scalar::local_minimize(&mut eval, cell[0], cell[1], &settings, &mut trace)?;
        iterations += local.iterations;
        let replace = match &best {
            None => true,
            Some(b) => {
                let (fl, fb) = (local.best.f, b.best.f);
                if (fl - fb).abs() <= options.tol_f {
                    local.best.x < b.best.x
                } else {
                    fl < fb
                }
            }
        };
        if replace {
            best = Some(local);
        }
    }
    let mut best = best.expect("at least one cell");

    // polish: keep refining the winning bracket past tol_x until the gradient
    // test passes or the bracket reaches floating-point resolution
    // polish: refine the winning bracket past tol_x until the gradient test
    // passes or the bracket reaches floating-point resolution
    if let (StopReason::Bracket, Some((neg, pos))) = (best.stop, best.bracket) {
        if best.best.g.abs() > options.tol_g {
            let polish = Settings {
                tol_x: 0.0,
                ..settings
            };
            let mut eval = |x: f64| obj.probe(x);
            let refined = scalar::stationary_point(&mut eval, neg, pos, &polish, &mut trace)?;
            iterations += refined.iterations;
            best = scalar::LocalMin {
                stop: if refined.stop == StopReason::IterationCap {
                    StopReason::Bracket
                } else {
                    refined.stop
                },
                ..refined
            };
        }
    }

    let x_star = best.best.x;
    let state = flow::load_network(snapshot, params, obj.coefficients(), x_star)?;
    Ok(EstimationResult {
        x_star,
        objective_value: best.best.f,
        df_dx: best.best.g,
        iterations,
        converged: best.stop != StopReason::IterationCap,
        stop_reason: best.stop,
        upscaled_od: apply_scaling(snapshot.od_pairs(), x_star),
        predicted_travel_times_s: state.t.iter().map(|t| t * SECONDS_PER_HOUR).collect(),
        predicted_counts_vph: segment_counts(&state, snapshot),
        trace: trace.into_iter().map(IterateRecord::from).collect(),
    })
}

/// Grid resolution: a point count (endpoints included) or a step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridResolution {
    Points(usize),
    Step(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_lower: f64,
    pub x_upper: f64,
    pub resolution: GridResolution,
}

impl GridSpec {
    pub fn points(x_lower: f64, x_upper: f64, count: usize) -> Self {
        Self {
            x_lower,
            x_upper,
            resolution: GridResolution::Points(count),
        }
    }

    pub fn step(x_lower: f64, x_upper: f64, step: f64) -> Self {
        Self {
            x_lower,
            x_upper,
            resolution: GridResolution::Step(step),
        }
    }

    /// Grid over the parameter bounds.
    pub fn over(params: &ModelParams, count: usize) -> Self {
        Self::points(params.x_lower, params.x_upper, count)
    }

    /// Grid abscissae in increasing order.
    pub fn abscissae(&self) -> Result<Vec<f64>, EstimateError> {
        let (lo, hi) = (self.x_lower, self.x_upper);
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(EstimateError::EmptyGrid);
        }
        match self.resolution {
            GridResolution::Points(0) => Err(EstimateError::EmptyGrid),
            GridResolution::Points(1) => Ok(alloc::vec![lo]),
            GridResolution::Points(n) => {
                let span = hi - lo;
                Ok((0..n)
                    .map(|k| {
                        if k + 1 == n {
                            hi
                        } else {
                            lo + span * k as f64 / (n - 1) as f64
                        }
                    })
                    .collect())
            }
            GridResolution::Step(step) => {
                if !(step.is_finite() && step > 0.0) {
                    return Err(EstimateError::EmptyGrid);
                }
                let count = libm::floor((hi - lo) / step * (1.0 + 1e-12)) as usize + 1;
                Ok((0..count).map(|k| (lo + step * k as f64).min(hi)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBenchmark {
    pub x_bench: f64,
    pub f_bench: f64,
    /// `(x, f(x))` at every grid point, increasing in x.
    pub curve: Vec<(f64, f64)>,
}

/// Minimum of a curve; the first (smallest x) wins ties.
pub fn argmin_curve(curve: &[(f64, f64)]) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &(x, f) in curve {
        match best {
            Some((bx, bf)) if !(f < bf || (f == bf && x < bx)) => {}
            _ => best = Some((x, f)),
        }
    }
    best
}

pub fn grid_search_benchmark(
    snapshot: &NetworkSnapshot,
    params: &ModelParams,
    gt: &GroundTruth,
    grid: &GridSpec,
) -> Result<GridBenchmark, EstimateError> {
    let xs = grid.abscissae()?;
    let mut obj = Objective::new(snapshot, params, gt)?;
    let mut curve = Vec::with_capacity(xs.len());
    for x in xs {
        curve.push((x, obj.eval(x)?.0));
    }
    let (x_bench, f_bench) = argmin_curve(&curve).ok_or(EstimateError::EmptyGrid)?;
    Ok(GridBenchmark {
        x_bench,
        f_bench,
        curve,
    })
}
