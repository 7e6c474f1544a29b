//! Static network, path and demand data.
//!
//! A [`NetworkSnapshot`] is built once from raw records and never mutated.
//! Ids are opaque strings on the way in; internally everything is indexed by
//! position in the input order so the hot loops in [`crate::flow`] work on
//! plain vectors.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised while assembling a [`NetworkSnapshot`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("{kind} `{id}` referenced by `{referenced_by}` does not exist")]
    MissingReference {
        kind: &'static str,
        id: String,
        referenced_by: String,
    },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("segment `{id}` is invalid: {constraint} does not hold")]
    InvalidSegment {
        id: String,
        constraint: &'static str,
    },
    #[error("OD pair `{id}` has demand {value}; demand_vph >= 0 is required")]
    NegativeDemand { id: String, value: f64 },
    #[error("path `{id}` has no segments")]
    EmptyPath { id: String },
    #[error("path `{path}` visits segment `{segment}` more than once")]
    RepeatedSegment { path: String, segment: String },
    #[error(
        "assignment probability {value} for (segment `{segment}`, OD `{od}`) is outside [0, 1]"
    )]
    InvalidProbability {
        segment: String,
        od: String,
        value: f64,
    },
}

/// One directed highway segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: String,
    pub length_km: f64,
    pub lanes: u32,
    pub v_max_kmh: f64,
    pub v_min_kmh: f64,
}

impl Segment {
    /// Checks the per-segment constraints enforced by [`build_snapshot`].
    pub fn validate(&self) -> Result<(), NetworkError> {
        let fail = |constraint| {
            Err(NetworkError::InvalidSegment {
                id: self.id.clone(),
                constraint,
            })
        };
        if !(self.length_km.is_finite() && self.length_km > 0.0) {
            return fail("length_km > 0");
        }
        if self.lanes < 1 {
            return fail("lanes >= 1");
        }
        if !(self.v_min_kmh.is_finite() && self.v_min_kmh > 0.0) {
            return fail("v_min_kmh > 0");
        }
        if !(self.v_max_kmh.is_finite() && self.v_min_kmh < self.v_max_kmh) {
            return fail("v_min_kmh < v_max_kmh");
        }
        Ok(())
    }
}

/// An ordered ramp-to-ramp route.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub id: String,
    pub segment_ids: Vec<String>,
}

/// An origin-destination pair with its subsample demand and its single route.
#[derive(Debug, Clone, PartialEq)]
pub struct OdPair {
    pub id: String,
    pub path_id: String,
    pub subsample_demand_vph: f64,
}

/// Sparse segment-by-OD assignment probabilities, stored column-wise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssignmentMatrix {
    // columns[od] = [(segment index, probability)], sorted by segment index
    columns: Vec<Vec<(usize, f64)>>,
}

impl AssignmentMatrix {
    /// Entries of one OD column as `(segment index, probability)`.
    pub fn column(&self, od: usize) -> &[(usize, f64)] {
        &self.columns[od]
    }

    pub fn nonzero_count(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.iter().filter(|(_, p)| *p != 0.0).count())
            .sum()
    }

    /// All stored entries as `(segment index, od index, probability)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(j, col)| col.iter().map(move |&(i, p)| (i, j, p)))
    }
}

/// Validated, immutable network with paths, demand and assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    segments: Vec<Segment>,
    paths: Vec<Path>,
    od_pairs: Vec<OdPair>,
    segment_index: BTreeMap<String, usize>,
    path_index: BTreeMap<String, usize>,
    od_index: BTreeMap<String, usize>,
    path_segments: Vec<Vec<usize>>,
    od_path: Vec<usize>,
    assignment: AssignmentMatrix,
}

fn index_ids<'a, I>(kind: &'static str, ids: I) -> Result<BTreeMap<String, usize>, NetworkError>
where
    I: Iterator<Item = &'a String>,
{
    let mut map = BTreeMap::new();
    for (pos, id) in ids.enumerate() {
        if map.insert(id.clone(), pos).is_some() {
            return Err(NetworkError::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(map)
}

/// Validates raw records and derives the single-route assignment matrix.
pub fn build_snapshot(
    segments: Vec<Segment>,
    paths: Vec<Path>,
    od_pairs: Vec<OdPair>,
) -> Result<NetworkSnapshot, NetworkError> {
    for s in &segments {
        s.validate()?;
    }
    let segment_index = index_ids("segment", segments.iter().map(|s| &s.id))?;
    let path_index = index_ids("path", paths.iter().map(|p| &p.id))?;
    let od_index = index_ids("OD pair", od_pairs.iter().map(|o| &o.id))?;

    let mut path_segments = Vec::with_capacity(paths.len());
    for p in &paths {
        if p.segment_ids.is_empty() {
            return Err(NetworkError::EmptyPath { id: p.id.clone() });
        }
        let mut seen = BTreeMap::new();
        let mut idx = Vec::with_capacity(p.segment_ids.len());
        for sid in &p.segment_ids {
            let &i = segment_index
                .get(sid)
                .ok_or_else(|| NetworkError::MissingReference {
                    kind: "segment",
                    id: sid.clone(),
                    referenced_by: p.id.clone(),
                })?;
            if seen.insert(i, ()).is_some() {
                return Err(NetworkError::RepeatedSegment {
                    path: p.id.clone(),
                    segment: sid.clone(),
                });
            }
            idx.push(i);
        }
        path_segments.push(idx);
    }

    let mut od_path = Vec::with_capacity(od_pairs.len());
    for od in &od_pairs {
        if !(od.subsample_demand_vph.is_finite() && od.subsample_demand_vph >= 0.0) {
            return Err(NetworkError::NegativeDemand {
                id: od.id.clone(),
                value: od.subsample_demand_vph,
            });
        }
        let &p = path_index
            .get(&od.path_id)
            .ok_or_else(|| NetworkError::MissingReference {
                kind: "path",
                id: od.path_id.clone(),
                referenced_by: od.id.clone(),
            })?;
        od_path.push(p);
    }

    let columns = od_path
        .iter()
        .map(|&p| {
            let mut col: Vec<(usize, f64)> = path_segments[p].iter().map(|&i| (i, 1.0)).collect();
            col.sort_unstable_by_key(|e| e.0);
            col
        })
        .collect();

    Ok(NetworkSnapshot {
        segments,
        paths,
        od_pairs,
        segment_index,
        path_index,
        od_index,
        path_segments,
        od_path,
        assignment: AssignmentMatrix { columns },
    })
}

impl NetworkSnapshot {
    /// Replaces the assignment column of every OD named in `entries` with the
    /// given `(segment id, od id, probability)` triples. ODs not mentioned keep
    /// their path-derived column. Path travel times still follow `paths`.
    pub fn with_assignment_override<I>(mut self, entries: I) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        let mut replaced: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for (seg, od, p) in entries {
            let &j = self
                .od_index
                .get(&od)
                .ok_or_else(|| NetworkError::MissingReference {
                    kind: "OD pair",
                    id: od.clone(),
                    referenced_by: String::from("assignment"),
                })?;
            let &i =
                self.segment_index
                    .get(&seg)
                    .ok_or_else(|| NetworkError::MissingReference {
                        kind: "segment",
                        id: seg.clone(),
                        referenced_by: String::from("assignment"),
                    })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(NetworkError::InvalidProbability {
                    segment: seg,
                    od,
                    value: p,
                });
            }
            let col = replaced.entry(j).or_default();
            if col.iter().any(|e| e.0 == i) {
                return Err(NetworkError::DuplicateId {
                    kind: "assignment entry",
                    id: seg,
                });
            }
            col.push((i, p));
        }
        for (j, mut col) in replaced {
            col.sort_unstable_by_key(|e| e.0);
            self.assignment.columns[j] = col;
        }
        Ok(self)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn od_pairs(&self) -> &[OdPair] {
        &self.od_pairs
    }

    pub fn assignment(&self) -> &AssignmentMatrix {
        &self.assignment
    }

    pub fn segment_position(&self, id: &str) -> Option<usize> {
        self.segment_index.get(id).copied()
    }

    pub fn path_position(&self, id: &str) -> Option<usize> {
        self.path_index.get(id).copied()
    }

    pub fn od_position(&self, id: &str) -> Option<usize> {
        self.od_index.get(id).copied()
    }

    /// Segment indices of path `p`, in travel order.
    pub fn path_segment_indices(&self, p: usize) -> &[usize] {
        &self.path_segments[p]
    }

    /// Path index serving OD `j`.
    pub fn od_path_index(&self, j: usize) -> usize {
        self.od_path[j]
    }

    /// Looks up an assignment entry by ids; absent entries read as 0.
    pub fn assignment_probability(&self, segment: &str, od: &str) -> Option<f64> {
        let i = self.segment_position(segment)?;
        let j = self.od_position(od)?;
        Some(
            self.assignment.columns[j]
                .binary_search_by_key(&i, |e| e.0)
                .map(|k| self.assignment.columns[j][k].1)
                .unwrap_or(0.0),
        )
    }
}

/// Per-segment demand `c_i = sum_j a_ij d_j` (veh/h) at unit scaling.
///
/// Segment demand at scaling factor `x` is `x * c_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandCoefficients(Vec<f64>);

impl DemandCoefficients {
    /// Wraps raw per-segment values, in snapshot segment order.
    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, snapshot: &NetworkSnapshot, segment: &str) -> Option<f64> {
        snapshot.segment_position(segment).map(|i| self.0[i])
    }

    /// `(segment id, c_i)` pairs in snapshot order.
    pub fn iter<'a>(
        &'a self,
        snapshot: &'a NetworkSnapshot,
    ) -> impl Iterator<Item = (&'a str, f64)> + 'a {
        snapshot
            .segments()
            .iter()
            .zip(self.0.iter())
            .map(|(s, &c)| (s.id.as_str(), c))
    }
}

pub fn segment_demand_coefficients(snapshot: &NetworkSnapshot) -> DemandCoefficients {
    let mut c = alloc::vec![0.0; snapshot.segments.len()];
    for (j, od) in snapshot.od_pairs.iter().enumerate() {
        let d = od.subsample_demand_vph;
        for &(i, a) in snapshot.assignment.column(j) {
            c[i] += a * d;
        }
    }
    DemandCoefficients(c)
}
