//! Segment-count validation of an estimate.
//!
//! Counts are compared after estimation has finished; nothing here feeds
//! back into `x_star`.

use std::path::Path as FsPath;

use odscale_core::{
    load_network, nrmse, pct_improvement, segment_counts, segment_demand_coefficients,
    EstimationResult, ModelParams, NetworkError, NetworkSnapshot, ObservationKind,
    PairedObservations,
};

use crate::error::{Error, Result};
use crate::formats::{self, num, SensorCount};
use crate::scenario::ScenarioBundle;

#[derive(Debug, Clone, PartialEq)]
pub struct CountRow {
    pub segment_id: String,
    pub gt_vph: f64,
    pub proposed_vph: f64,
    pub baseline_vph: f64,
    /// No OD demand crosses the segment, so both predictions are zero.
    pub unloaded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountsValidation {
    pub rows: Vec<CountRow>,
    pub proposed_nrmse: f64,
    pub baseline_nrmse: f64,
    /// `None` when the baseline already fits exactly.
    pub pct_improvement: Option<f64>,
}

/// Bounds widened so that `x` itself is admissible.
pub fn params_admitting(params: &ModelParams, x: f64) -> ModelParams {
    ModelParams {
        x_lower: params.x_lower.min(x),
        x_upper: params.x_upper.max(x),
        ..*params
    }
}

/// Reads the bundle's sensors file, checking every segment id against the
/// network.
pub fn read_bundle_sensors(
    bundle: &ScenarioBundle,
    snapshot: &NetworkSnapshot,
) -> Result<Vec<SensorCount>> {
    let Some(file) = &bundle.sensors else {
        return Err(Error::NoSensors);
    };
    let rows = formats::read_sensors(file)?;
    for r in &rows {
        if snapshot.segment_position(&r.value.segment_id).is_none() {
            return Err(Error::schema(
                file.as_path(),
                r.line,
                format!("segment `{}` exists", r.value.segment_id),
            ));
        }
    }
    Ok(rows.into_iter().map(|r| r.value).collect())
}

/// Observed counts against counts predicted at `x_star` and at `x = 1`.
pub fn export_counts_validation(
    snapshot: &NetworkSnapshot,
    params: &ModelParams,
    result: &EstimationResult,
    sensors: &[SensorCount],
) -> Result<CountsValidation> {
    if sensors.is_empty() {
        return Err(Error::NoSensors);
    }
    let coeffs = segment_demand_coefficients(snapshot);
    let base_state = load_network(snapshot, &params_admitting(params, 1.0), &coeffs, 1.0)?;
    let baseline = segment_counts(&base_state, snapshot);

    let mut rows = Vec::with_capacity(sensors.len());
    for s in sensors {
        let i = snapshot.segment_position(&s.segment_id).ok_or_else(|| {
            NetworkError::MissingReference {
                kind: "segment",
                id: s.segment_id.clone(),
                referenced_by: "sensors".into(),
            }
        })?;
        rows.push(CountRow {
            segment_id: s.segment_id.clone(),
            gt_vph: s.count_vph,
            proposed_vph: result.predicted_counts_vph[i],
            baseline_vph: baseline[i],
            unloaded: coeffs.as_slice()[i] == 0.0,
        });
    }
    let obs = |pick: fn(&CountRow) -> f64| {
        PairedObservations::new(
            ObservationKind::Counts,
            rows.iter()
                .map(|r| (r.segment_id.as_str(), r.gt_vph, pick(r))),
        )
    };
    let proposed_nrmse = nrmse(&obs(|r| r.proposed_vph)?)?;
    let baseline_nrmse = nrmse(&obs(|r| r.baseline_vph)?)?;
    Ok(CountsValidation {
        rows,
        proposed_nrmse,
        baseline_nrmse,
        pct_improvement: pct_improvement(baseline_nrmse, proposed_nrmse).ok(),
    })
}

pub fn write_counts_validation(file: &FsPath, v: &CountsValidation) -> Result<()> {
    formats::write_csv(
        file,
        &[
            "segment_id",
            "gt_count_vph",
            "proposed_vph",
            "baseline_vph",
            "unloaded",
        ],
        v.rows.iter().map(|r| {
            [
                r.segment_id.clone(),
                num(r.gt_vph),
                num(r.proposed_vph),
                num(r.baseline_vph),
                r.unloaded.to_string(),
            ]
        }),
    )
}
