//! Multi-hour batch runner and report writers.
//!
//! Every hour is handled independently (in parallel when enabled); a failing
//! hour is recorded and the others carry on. Per-hour files are named after
//! the hour label; summary files are written once all hours are done, in
//! input order, so reports are byte-identical across runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use odscale_core::metrics::{mean, median};
use odscale_core::{
    estimate, grid_search_benchmark, load_network, nrmse, objective, pct_gap, pct_improvement,
    round_report, segment_demand_coefficients, EstimationResult, GridBenchmark, GridSpec,
    ObservationKind, PairedObservations,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formats::{self, num};
use crate::scenario::{parse_scenario, Scenario, ScenarioBundle};
use crate::validation::{
    export_counts_validation, params_admitting, read_bundle_sensors, write_counts_validation,
    CountsValidation,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Estimate,
    /// Travel-time fit of a fixed scaling factor.
    Evaluate {
        x: f64,
    },
    GridSearch,
    /// Baseline (`x = 1`), grid benchmark and estimate side by side.
    Compare,
    ValidateCounts,
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub out_dir: PathBuf,
    /// Overrides the config's `grid_points`.
    pub grid_points: Option<usize>,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOutcome {
    pub result: EstimationResult,
    pub nrmse_tt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOutcome {
    pub x: f64,
    pub objective_s2: f64,
    pub nrmse_tt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub benchmark: GridBenchmark,
    pub nrmse_tt: f64,
}

/// Travel-time nRMSE of the three demand matrices for one hour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareOutcome {
    pub x_star: f64,
    pub x_bench: f64,
    pub baseline_nrmse: f64,
    pub benchmark_nrmse: f64,
    pub proposed_nrmse: f64,
    /// Proposed over baseline; `None` when the baseline nRMSE is zero.
    pub pct_improvement: Option<f64>,
    /// Proposed against benchmark; `None` when the benchmark nRMSE is zero.
    pub pct_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Estimate(EstimateOutcome),
    Evaluate(EvaluateOutcome),
    GridSearch(GridOutcome),
    Compare(CompareOutcome),
    ValidateCounts(EstimateOutcome, CountsValidation),
}

#[derive(Debug)]
pub struct HourReport {
    pub hour: String,
    pub outcome: Result<Outcome>,
}

#[derive(Debug)]
pub struct BatchReport {
    pub mode: Mode,
    pub hours: Vec<HourReport>,
}

impl BatchReport {
    pub fn failures(&self) -> impl Iterator<Item = (&str, &Error)> {
        self.hours.iter().filter_map(|h| match &h.outcome {
            Err(e) => Some((h.hour.as_str(), e)),
            Ok(_) => None,
        })
    }

    pub fn is_success(&self) -> bool {
        self.failures().next().is_none()
    }
}

fn file_name(prefix: &str, hour: &str, suffix: &str) -> String {
    format!("{prefix}_{hour}{suffix}.csv")
}

/// Predicted travel times (s) at `x`, one per path.
fn travel_times_s(scn: &Scenario, x: f64) -> Result<Vec<f64>> {
    let params = params_admitting(&scn.config.params, x);
    let coeffs = segment_demand_coefficients(&scn.snapshot);
    let st = load_network(&scn.snapshot, &params, &coeffs, x)?;
    Ok((0..st.t.len()).map(|p| st.travel_time_s(p)).collect())
}

/// `(path id, gt, predicted)` for every ground-truth path.
fn tt_pairs(scn: &Scenario, predicted_s: &[f64]) -> Vec<(String, f64, f64)> {
    let paths = scn.snapshot.paths();
    scn.gt
        .iter()
        .map(|(p, tt, _)| (paths[p].id.clone(), tt, predicted_s[p]))
        .collect()
}

fn tt_nrmse(pairs: &[(String, f64, f64)]) -> Result<f64> {
    let obs = PairedObservations::new(
        ObservationKind::TravelTimes,
        pairs.iter().map(|(id, g, e)| (id.as_str(), *g, *e)),
    )?;
    Ok(nrmse(&obs)?)
}

fn write_pairs(file: &FsPath, header: [&str; 3], pairs: &[(String, f64, f64)]) -> Result<()> {
    formats::write_csv(
        file,
        &header,
        pairs
            .iter()
            .map(|(id, g, e)| [id.clone(), num(*g), num(*e)]),
    )
}

fn write_two_column(file: &FsPath, header: [&str; 2], rows: &[(f64, f64)]) -> Result<()> {
    formats::write_csv(file, &header, rows.iter().map(|(a, b)| [num(*a), num(*b)]))
}

/// Empirical cumulative distribution: sorted values with fractions `k / n`.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(k, x)| (x, (k + 1) as f64 / n))
        .collect()
}

fn run_estimate(scn: &Scenario, out: &FsPath) -> Result<EstimateOutcome> {
    let result = estimate(
        &scn.snapshot,
        &scn.config.params,
        &scn.gt,
        &scn.config.options,
    )?;
    if !result.converged {
        log::warn!(
            "hour {}: optimizer hit its iteration cap; best x = {}",
            scn.hour,
            result.x_star
        );
    }
    let pairs = tt_pairs(scn, &result.predicted_travel_times_s);
    let nrmse_tt = tt_nrmse(&pairs)?;
    let hour = &scn.hour;
    formats::write_od(
        &out.join(file_name("upscaled_od", hour, "")),
        &result.upscaled_od,
    )?;
    write_pairs(
        &out.join(file_name("travel_times", hour, "")),
        ["path_id", "gt_s", "estimate_s"],
        &pairs,
    )?;
    formats::write_csv(
        &out.join(file_name("trace", hour, "")),
        &["eval", "x", "objective_s2", "df_dx"],
        result
            .trace
            .iter()
            .enumerate()
            .map(|(k, r)| [k.to_string(), num(r.x), num(r.f), num(r.df_dx)]),
    )?;
    Ok(EstimateOutcome { result, nrmse_tt })
}

fn run_evaluate(scn: &Scenario, x: f64, out: &FsPath) -> Result<EvaluateOutcome> {
    let params = params_admitting(&scn.config.params, x);
    let (objective_s2, _) = objective(&scn.snapshot, &params, &scn.gt, x)?;
    let pairs = tt_pairs(scn, &travel_times_s(scn, x)?);
    write_pairs(
        &out.join(file_name("travel_times", &scn.hour, "_eval")),
        ["path_id", "gt_s", "estimate_s"],
        &pairs,
    )?;
    Ok(EvaluateOutcome {
        x,
        objective_s2,
        nrmse_tt: tt_nrmse(&pairs)?,
    })
}

fn grid_points(scn: &Scenario, opts: &BatchOptions) -> usize {
    opts.grid_points.unwrap_or(scn.config.grid_points)
}

/// `(path id, observed, modelled)` travel times in seconds.
type PathTimes = Vec<(String, f64, f64)>;

fn run_grid(scn: &Scenario, opts: &BatchOptions) -> Result<(GridOutcome, PathTimes)> {
    let grid = GridSpec::over(&scn.config.params, grid_points(scn, opts));
    let benchmark = grid_search_benchmark(&scn.snapshot, &scn.config.params, &scn.gt, &grid)?;
    write_two_column(
        &opts.out_dir.join(file_name("grid", &scn.hour, "")),
        ["x", "objective_s2"],
        &benchmark.curve,
    )?;
    let pairs = tt_pairs(scn, &travel_times_s(scn, benchmark.x_bench)?);
    let nrmse_tt = tt_nrmse(&pairs)?;
    Ok((
        GridOutcome {
            benchmark,
            nrmse_tt,
        },
        pairs,
    ))
}

fn run_compare(scn: &Scenario, opts: &BatchOptions) -> Result<CompareOutcome> {
    let out = &opts.out_dir;
    let hour = &scn.hour;
    let base_pairs = tt_pairs(scn, &travel_times_s(scn, 1.0)?);
    let (grid, bench_pairs) = run_grid(scn, opts)?;
    let proposed = run_estimate(scn, out)?;
    let prop_pairs = tt_pairs(scn, &proposed.result.predicted_travel_times_s);

    let baseline_nrmse = tt_nrmse(&base_pairs)?;
    let mut gt = Vec::with_capacity(base_pairs.len());
    for (method, pairs) in [
        ("baseline", &base_pairs),
        ("benchmark", &bench_pairs),
        ("proposed", &prop_pairs),
    ] {
        let scatter: Vec<(f64, f64)> = pairs.iter().map(|(_, g, e)| (*g, *e)).collect();
        write_two_column(
            &out.join(format!("scatter_{hour}_{method}.csv")),
            ["gt_s", "estimate_s"],
            &scatter,
        )?;
        let est: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        write_two_column(
            &out.join(format!("cdf_{hour}_{method}.csv")),
            ["travel_time_s", "fraction"],
            &empirical_cdf(&est),
        )?;
        gt = pairs.iter().map(|p| p.1).collect();
    }
    write_two_column(
        &out.join(format!("cdf_{hour}_gt.csv")),
        ["travel_time_s", "fraction"],
        &empirical_cdf(&gt),
    )?;

    Ok(CompareOutcome {
        x_star: proposed.result.x_star,
        x_bench: grid.benchmark.x_bench,
        baseline_nrmse,
        benchmark_nrmse: grid.nrmse_tt,
        proposed_nrmse: proposed.nrmse_tt,
        pct_improvement: pct_improvement(baseline_nrmse, proposed.nrmse_tt).ok(),
        pct_gap: pct_gap(proposed.nrmse_tt, grid.nrmse_tt).ok(),
    })
}

fn run_validate(bundle: &ScenarioBundle, scn: &Scenario, out: &FsPath) -> Result<Outcome> {
    // the estimate is complete before the sensors file is opened
    let est = run_estimate(scn, out)?;
    let sensors = read_bundle_sensors(bundle, &scn.snapshot)?;
    let v = export_counts_validation(&scn.snapshot, &scn.config.params, &est.result, &sensors)?;
    write_counts_validation(&out.join(file_name("counts_validation", &scn.hour, "")), &v)?;
    Ok(Outcome::ValidateCounts(est, v))
}

fn run_hour(bundle: &ScenarioBundle, mode: Mode, opts: &BatchOptions) -> Result<Outcome> {
    let scn = parse_scenario(bundle)?;
    let out = &opts.out_dir;
    Ok(match mode {
        Mode::Estimate => Outcome::Estimate(run_estimate(&scn, out)?),
        Mode::Evaluate { x } => Outcome::Evaluate(run_evaluate(&scn, x, out)?),
        Mode::GridSearch => Outcome::GridSearch(run_grid(&scn, opts)?.0),
        Mode::Compare => Outcome::Compare(run_compare(&scn, opts)?),
        Mode::ValidateCounts => run_validate(bundle, &scn, out)?,
    })
}

/// Runs every bundle and writes per-hour files plus the mode's summary files
/// into `opts.out_dir`. Only a failure to write summaries is an error; hour
/// failures are reported in the returned [`BatchReport`].
pub fn run_batch(
    bundles: &[ScenarioBundle],
    mode: Mode,
    opts: &BatchOptions,
) -> Result<BatchReport> {
    fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    if bundles.is_empty() {
        log::warn!("no scenario bundles found; writing an empty report");
    }
    let mut seen = std::collections::HashSet::new();
    for b in bundles {
        if !seen.insert(b.hour.as_str()) {
            return Err(Error::DuplicateHour(b.hour.clone()));
        }
    }
    let one = |b: &ScenarioBundle| HourReport {
        hour: b.hour.clone(),
        outcome: run_hour(b, mode, opts),
    };
    let hours: Vec<HourReport> = if opts.parallel {
        bundles.par_iter().map(one).collect()
    } else {
        bundles.iter().map(one).collect()
    };
    for h in &hours {
        if let Err(e) = &h.outcome {
            log::error!("hour {}: {e}", h.hour);
        }
    }
    let report = BatchReport { mode, hours };
    write_summaries(&report, &opts.out_dir)?;
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn ok_rows<'a, T>(
    report: &'a BatchReport,
    pick: impl Fn(&'a Outcome) -> Option<T> + 'a,
) -> impl Iterator<Item = (&'a str, T)> + 'a {
    report.hours.iter().filter_map(move |h| match &h.outcome {
        Ok(o) => pick(o).map(|t| (h.hour.as_str(), t)),
        Err(_) => None,
    })
}

fn write_failures(report: &BatchReport, out: &FsPath) -> Result<()> {
    formats::write_csv(
        &out.join("failures.csv"),
        &["hour", "error"],
        report
            .failures()
            .map(|(h, e)| [h.to_owned(), e.to_string()]),
    )
}

fn estimate_row(hour: &str, e: &EstimateOutcome) -> [String; 8] {
    let r = &e.result;
    [
        hour.to_owned(),
        num(r.x_star),
        num(r.objective_value),
        num(r.df_dx),
        r.iterations.to_string(),
        r.converged.to_string(),
        format!("{:?}", r.stop_reason).to_lowercase(),
        num(e.nrmse_tt),
    ]
}

const ESTIMATE_HEADER: [&str; 8] = [
    "hour",
    "x_star",
    "objective_s2",
    "df_dx",
    "iterations",
    "converged",
    "stop_reason",
    "nrmse_tt",
];

fn write_summaries(report: &BatchReport, out: &FsPath) -> Result<()> {
    write_failures(report, out)?;
    match report.mode {
        Mode::Estimate => formats::write_csv(
            &out.join("estimates.csv"),
            &ESTIMATE_HEADER,
            ok_rows(report, |o| match o {
                Outcome::Estimate(e) => Some(e),
                _ => None,
            })
            .map(|(h, e)| estimate_row(h, e)),
        ),
        Mode::Evaluate { .. } => formats::write_csv(
            &out.join("evaluate.csv"),
            &["hour", "x", "objective_s2", "nrmse_tt"],
            ok_rows(report, |o| match o {
                Outcome::Evaluate(e) => Some(e),
                _ => None,
            })
            .map(|(h, e)| [h.to_owned(), num(e.x), num(e.objective_s2), num(e.nrmse_tt)]),
        ),
        Mode::GridSearch => formats::write_csv(
            &out.join("grid_search.csv"),
            &["hour", "x_bench", "objective_s2", "nrmse_tt", "grid_points"],
            ok_rows(report, |o| match o {
                Outcome::GridSearch(g) => Some(g),
                _ => None,
            })
            .map(|(h, g)| {
                [
                    h.to_owned(),
                    num(g.benchmark.x_bench),
                    num(g.benchmark.f_bench),
                    num(g.nrmse_tt),
                    g.benchmark.curve.len().to_string(),
                ]
            }),
        ),
        Mode::Compare => write_compare(report, out),
        Mode::ValidateCounts => {
            let rows: Vec<_> = ok_rows(report, |o| match o {
                Outcome::ValidateCounts(e, v) => Some((e, v)),
                _ => None,
            })
            .collect();
            formats::write_csv(
                &out.join("estimates.csv"),
                &ESTIMATE_HEADER,
                rows.iter().map(|(h, (e, _))| estimate_row(h, e)),
            )?;
            formats::write_csv(
                &out.join("counts_validation.csv"),
                &[
                    "hour",
                    "sensors",
                    "proposed_count_nrmse",
                    "baseline_count_nrmse",
                    "pct_improvement",
                ],
                rows.iter().map(|(h, (_, v))| {
                    [
                        h.to_string(),
                        v.rows.len().to_string(),
                        num(v.proposed_nrmse),
                        num(v.baseline_nrmse),
                        opt(v.pct_improvement),
                    ]
                }),
            )
        }
    }
}

/// Integer-rounded row as printed in reports. %Improvement and %Gap are taken
/// from the rounded nRMSE values, like published tables; two values that
/// both round to zero count as no difference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportedRow {
    pub baseline: i64,
    pub benchmark: i64,
    pub proposed: i64,
    pub pct_improvement: Option<i64>,
    pub pct_gap: Option<i64>,
}

fn rounded_ratio(
    num: i64,
    den: i64,
    f: fn(f64, f64) -> std::result::Result<f64, odscale_core::MetricsError>,
) -> Option<i64> {
    match (num, den) {
        (0, 0) => Some(0),
        _ => f(num as f64, den as f64).ok().map(round_report),
    }
}

impl ReportedRow {
    pub fn from_outcome(c: &CompareOutcome) -> Self {
        let (b, m, p) = (
            round_report(c.baseline_nrmse),
            round_report(c.benchmark_nrmse),
            round_report(c.proposed_nrmse),
        );
        Self {
            baseline: b,
            benchmark: m,
            proposed: p,
            pct_improvement: rounded_ratio(b, p, pct_improvement),
            pct_gap: rounded_ratio(p, m, pct_gap),
        }
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    hour: &'a str,
    #[serde(flatten)]
    raw: &'a CompareOutcome,
    reported: ReportedRow,
}

#[derive(Serialize)]
struct JsonFailure<'a> {
    hour: &'a str,
    error: String,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    rows: Vec<JsonRow<'a>>,
    median_pct_gap: Option<f64>,
    mean_pct_improvement: Option<f64>,
    failures: Vec<JsonFailure<'a>>,
}

fn cell(v: Option<i64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "n/a".into())
}

fn write_compare(report: &BatchReport, out: &FsPath) -> Result<()> {
    let rows: Vec<(&str, &CompareOutcome)> = ok_rows(report, |o| match o {
        Outcome::Compare(c) => Some(c),
        _ => None,
    })
    .collect();
    formats::write_csv(
        &out.join("compare.csv"),
        &[
            "hour",
            "baseline_nrmse",
            "benchmark_nrmse",
            "proposed_nrmse",
            "pct_improvement",
            "pct_gap",
            "x_star",
            "x_bench",
        ],
        rows.iter().map(|(h, c)| {
            [
                h.to_string(),
                num(c.baseline_nrmse),
                num(c.benchmark_nrmse),
                num(c.proposed_nrmse),
                opt(c.pct_improvement),
                opt(c.pct_gap),
                num(c.x_star),
                num(c.x_bench),
            ]
        }),
    )?;

    let reported: Vec<ReportedRow> = rows
        .iter()
        .map(|(_, c)| ReportedRow::from_outcome(c))
        .collect();
    let gaps: Vec<f64> = reported
        .iter()
        .filter_map(|r| r.pct_gap)
        .map(|g| g as f64)
        .collect();
    let imps: Vec<f64> = rows.iter().filter_map(|(_, c)| c.pct_improvement).collect();
    let median_gap = median(&gaps);
    let mean_imp = mean(&imps);

    let header = [
        "hour",
        "baseline",
        "benchmark",
        "proposed",
        "%improvement",
        "%gap",
    ];
    let mut table: Vec<[String; 6]> = vec![header.map(String::from)];
    for ((h, _), r) in rows.iter().zip(&reported) {
        table.push([
            h.to_string(),
            r.baseline.to_string(),
            r.benchmark.to_string(),
            r.proposed.to_string(),
            cell(r.pct_improvement),
            cell(r.pct_gap),
        ]);
    }
    let mut width = [0usize; 6];
    for row in &table {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut text = String::new();
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .zip(width)
            .enumerate()
            .map(|(k, (c, w))| {
                if k == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        writeln!(text, "{}", line.join("  ")).expect("write to string");
    }
    writeln!(text).expect("write to string");
    writeln!(text, "nRMSE of path travel times in percent").expect("write to string");
    writeln!(text, "median %gap: {}", cell(median_gap.map(round_report))).expect("write to string");
    writeln!(
        text,
        "mean %improvement: {}",
        cell(mean_imp.map(round_report))
    )
    .expect("write to string");
    let txt = out.join("compare.txt");
    fs::write(&txt, text).map_err(|e| Error::io(&txt, e))?;

    let json = JsonReport {
        rows: rows
            .iter()
            .zip(reported)
            .map(|((h, c), r)| JsonRow {
                hour: h,
                raw: c,
                reported: r,
            })
            .collect(),
        median_pct_gap: median_gap,
        mean_pct_improvement: mean_imp,
        failures: report
            .failures()
            .map(|(h, e)| JsonFailure {
                hour: h,
                error: e.to_string(),
            })
            .collect(),
    };
    let path = out.join("compare.json");
    let body = serde_json::to_string_pretty(&json).expect("report serializes");
    fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(b: f64, m: f64, p: f64) -> CompareOutcome {
        CompareOutcome {
            x_star: 1.0,
            x_bench: 1.0,
            baseline_nrmse: b,
            benchmark_nrmse: m,
            proposed_nrmse: p,
            pct_improvement: None,
            pct_gap: None,
        }
    }

    #[test]
    fn reported_rows_use_rounded_values() {
        let r = ReportedRow::from_outcome(&outcome(52.2, 44.4, 44.6));
        assert_eq!((r.baseline, r.benchmark, r.proposed), (52, 44, 45));
        assert_eq!(r.pct_gap, Some(2));
        assert_eq!(r.pct_improvement, Some(13));
        let r = ReportedRow::from_outcome(&outcome(30.0, 0.2, 0.001));
        assert_eq!(r.pct_gap, Some(0));
        let r = ReportedRow::from_outcome(&outcome(30.0, 0.2, 3.0));
        assert_eq!(r.pct_gap, None);
    }

    #[test]
    fn cdf_is_sorted_and_ends_at_one() {
        let c = empirical_cdf(&[3.0, 1.0, 2.0, 2.0]);
        assert_eq!(c, vec![(1.0, 0.25), (2.0, 0.5), (2.0, 0.75), (3.0, 1.0)]);
    }
}
