//! Scenario bundles: the files describing one hour, and their parsing into
//! validated model inputs.
//!
//! A bundle for hour `h` under a network directory `d` takes each file from
//! `d/h/` when present there and from `d/` otherwise, so a shared network
//! can sit at the top with per-hour demand and ground truth below it.

use std::collections::HashSet;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use odscale_core::{build_snapshot, EstimateError, GroundTruth, NetworkError, NetworkSnapshot};

use crate::error::{Error, Result};
use crate::formats::{self, num, GtRow, Located, RunConfig, TimeUnit};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioBundle {
    pub hour: String,
    pub segments: PathBuf,
    pub paths: PathBuf,
    pub od: PathBuf,
    pub gt: PathBuf,
    pub sensors: Option<PathBuf>,
    pub assignment: Option<PathBuf>,
    pub config: PathBuf,
}

fn pick(dir: &FsPath, hour_dir: Option<&FsPath>, name: &str) -> PathBuf {
    if let Some(h) = hour_dir {
        let p = h.join(name);
        if p.is_file() {
            return p;
        }
    }
    dir.join(name)
}

impl ScenarioBundle {
    /// Resolves the files of one hour. Missing files surface when parsing.
    pub fn locate(network_dir: &FsPath, hour: Option<&str>, config: Option<&FsPath>) -> Self {
        let hour_dir = hour.map(|h| network_dir.join(h));
        let hd = hour_dir.as_deref();
        let optional = |name| Some(pick(network_dir, hd, name)).filter(|p| p.is_file());
        let label = match hour {
            Some(h) => h.to_owned(),
            None => network_dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "all".into()),
        };
        Self {
            hour: label,
            segments: pick(network_dir, hd, formats::SEGMENTS_FILE),
            paths: pick(network_dir, hd, formats::PATHS_FILE),
            od: pick(network_dir, hd, formats::OD_FILE),
            gt: pick(network_dir, hd, formats::GT_FILE),
            sensors: optional(formats::SENSORS_FILE),
            assignment: optional(formats::ASSIGNMENT_FILE),
            config: config
                .map(PathBuf::from)
                .unwrap_or_else(|| pick(network_dir, hd, formats::CONFIG_FILE)),
        }
    }
}

/// Bundles for the given hour labels, or, when none are given, one bundle per
/// subdirectory holding a ground-truth file (sorted by name). A directory with
/// no such subdirectory but a ground-truth file of its own is one bundle.
pub fn discover_bundles(
    network_dir: &FsPath,
    hours: &[String],
    config: Option<&FsPath>,
) -> Result<Vec<ScenarioBundle>> {
    let mut labels = hours.to_vec();
    if labels.is_empty() {
        let entries = fs::read_dir(network_dir).map_err(|e| Error::io(network_dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(network_dir, e))?;
            let path = entry.path();
            if path.is_dir() && path.join(formats::GT_FILE).is_file() {
                labels.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        labels.sort();
        if labels.is_empty() {
            if network_dir.join(formats::GT_FILE).is_file() {
                return Ok(vec![ScenarioBundle::locate(network_dir, None, config)]);
            }
            return Ok(Vec::new());
        }
    }
    let mut seen = HashSet::new();
    for h in &labels {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateHour(h.clone()));
        }
    }
    Ok(labels
        .iter()
        .map(|h| ScenarioBundle::locate(network_dir, Some(h), config))
        .collect())
}

/// Parsed, validated inputs of one bundle. Sensor counts are deliberately
/// absent; they are read only by the validation step.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub hour: String,
    pub snapshot: NetworkSnapshot,
    pub config: RunConfig,
    pub gt: GroundTruth,
    /// Assignment entries that replaced path-derived columns, if any.
    pub assignment_override: Vec<(String, String, f64)>,
}

fn line_of<T>(rows: &[Located<T>], mut hit: impl FnMut(&T) -> bool, last: bool) -> u64 {
    let mut it = rows.iter().filter(|r| hit(&r.value)).map(|r| r.line);
    if last {
        it.last().unwrap_or(0)
    } else {
        it.next().unwrap_or(0)
    }
}

pub fn parse_scenario(bundle: &ScenarioBundle) -> Result<Scenario> {
    let config = formats::read_config(&bundle.config)?;
    let segments = formats::read_segments(&bundle.segments)?;
    let paths = formats::read_paths(&bundle.paths)?;
    let ods = formats::read_od(&bundle.od)?;

    let snapshot = build_snapshot(
        segments.iter().map(|s| s.value.clone()).collect(),
        paths.iter().map(|p| p.value.clone()).collect(),
        ods.iter().map(|o| o.value.clone()).collect(),
    )
    .map_err(|err| {
        let (file, line) = match &err {
            NetworkError::DuplicateId {
                kind: "segment",
                id,
            } => (&bundle.segments, line_of(&segments, |s| &s.id == id, true)),
            NetworkError::DuplicateId { kind: "path", id } => {
                (&bundle.paths, line_of(&paths, |p| &p.id == id, true))
            }
            NetworkError::DuplicateId { id, .. } => {
                (&bundle.od, line_of(&ods, |o| &o.id == id, true))
            }
            NetworkError::MissingReference {
                kind: "segment",
                referenced_by,
                ..
            }
            | NetworkError::RepeatedSegment {
                path: referenced_by,
                ..
            }
            | NetworkError::EmptyPath { id: referenced_by } => (
                &bundle.paths,
                line_of(&paths, |p| &p.id == referenced_by, false),
            ),
            NetworkError::MissingReference { referenced_by, .. } => {
                (&bundle.od, line_of(&ods, |o| &o.id == referenced_by, false))
            }
            NetworkError::InvalidSegment { id, .. } => {
                (&bundle.segments, line_of(&segments, |s| &s.id == id, false))
            }
            NetworkError::NegativeDemand { id, .. } => {
                (&bundle.od, line_of(&ods, |o| &o.id == id, false))
            }
            NetworkError::InvalidProbability { .. } => (&bundle.od, 0),
        };
        Error::schema(file, line, err.to_string())
    })?;

    let mut assignment_override = Vec::new();
    let snapshot = match &bundle.assignment {
        Some(file) => {
            let rows = formats::read_assignment(file)?;
            assignment_override = rows.iter().map(|r| r.value.clone()).collect();
            snapshot
                .with_assignment_override(assignment_override.clone())
                .map_err(|err| {
                    let line = match &err {
                        NetworkError::MissingReference { id, .. }
                        | NetworkError::DuplicateId { id, .. } => {
                            line_of(&rows, |r| &r.0 == id || &r.1 == id, true)
                        }
                        _ => 0,
                    };
                    Error::schema(file, line, err.to_string())
                })?
        }
        None => snapshot,
    };

    let gt_rows = formats::read_gt(&bundle.gt)?;
    let scale = config.travel_time_unit.seconds();
    let gt = GroundTruth::new(
        &snapshot,
        gt_rows.iter().map(|r| {
            (
                r.value.path_id.as_str(),
                r.value.travel_time * scale,
                r.value.weight,
            )
        }),
    )
    .map_err(|err| {
        let line = match &err {
            EstimateError::UnknownPath(id) => line_of(&gt_rows, |r| &r.path_id == id, false),
            EstimateError::DuplicatePath(id) => line_of(&gt_rows, |r| &r.path_id == id, true),
            EstimateError::InvalidTravelTime { path, .. }
            | EstimateError::InvalidWeight { path, .. } => {
                line_of(&gt_rows, |r| &r.path_id == path, false)
            }
            _ => 0,
        };
        Error::schema(&bundle.gt, line, err.to_string())
    })?;

    Ok(Scenario {
        hour: bundle.hour.clone(),
        snapshot,
        config,
        gt,
        assignment_override,
    })
}

/// Ground-truth rows in seconds, keyed by path id, in file order.
pub fn gt_rows_seconds(scenario: &Scenario) -> Vec<GtRow> {
    let paths = scenario.snapshot.paths();
    scenario
        .gt
        .iter()
        .map(|(p, tt, w)| GtRow {
            path_id: paths[p].id.clone(),
            travel_time: tt,
            weight: w,
        })
        .collect()
}

/// Writes a scenario as a flat bundle in `dir`. Travel times are written in
/// seconds and the config unit set to match.
pub fn write_scenario(dir: &FsPath, scenario: &Scenario) -> Result<ScenarioBundle> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let snap = &scenario.snapshot;
    formats::write_segments(&dir.join(formats::SEGMENTS_FILE), snap.segments())?;
    formats::write_paths(&dir.join(formats::PATHS_FILE), snap.paths())?;
    formats::write_od(&dir.join(formats::OD_FILE), snap.od_pairs())?;
    formats::write_gt(&dir.join(formats::GT_FILE), &gt_rows_seconds(scenario))?;
    if !scenario.assignment_override.is_empty() {
        formats::write_csv(
            &dir.join(formats::ASSIGNMENT_FILE),
            &["segment_id", "od_id", "probability"],
            scenario
                .assignment_override
                .iter()
                .map(|(s, o, p)| [s.clone(), o.clone(), num(*p)]),
        )?;
    }
    let config = RunConfig {
        travel_time_unit: TimeUnit::Seconds,
        ..scenario.config
    };
    formats::write_config(&dir.join(formats::CONFIG_FILE), &config)?;
    let mut bundle = ScenarioBundle::locate(dir, None, None);
    bundle.hour = scenario.hour.clone();
    Ok(bundle)
}
