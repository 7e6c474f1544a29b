//! Evaluation statistics: nRMSE, % improvement and % gap.
//!
//! All functions return full-precision percentages. Tables round with
//! [`round_report`].

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("observation collection is empty")]
    EmptyCollection,
    #[error("ground-truth values sum to zero")]
    ZeroGroundTruthSum,
    #[error("observation `{id}` has invalid value {value}")]
    InvalidValue { id: String, value: f64 },
    #[error("baseline nRMSE must be > 0")]
    ZeroBaseline,
    #[error("benchmark nRMSE must be > 0")]
    ZeroBenchmark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationKind {
    Counts,
    TravelTimes,
}

/// `(entity id, ground truth, estimate)` triples of one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedObservations {
    kind: ObservationKind,
    entries: Vec<(String, f64, f64)>,
}

impl PairedObservations {
    pub fn new<I, S>(kind: ObservationKind, entries: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = (S, f64, f64)>,
        S: Into<String>,
    {
        let mut out = Vec::new();
        for (id, gt, est) in entries {
            let id = id.into();
            if !(gt.is_finite() && gt >= 0.0) {
                return Err(MetricsError::InvalidValue { id, value: gt });
            }
            if !est.is_finite() {
                return Err(MetricsError::InvalidValue { id, value: est });
            }
            out.push((id, gt, est));
        }
        Ok(Self { kind, entries: out })
    }

    pub fn kind(&self) -> ObservationKind {
        self.kind
    }

    pub fn entries(&self) -> &[(String, f64, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries whose id satisfies `keep`.
    pub fn subset(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        Self {
            kind: self.kind,
            entries: self
                .entries
                .iter()
                .filter(|e| keep(&e.0))
                .cloned()
                .collect(),
        }
    }

    /// Concatenation of several collections of the same kind.
    pub fn pooled<'a, I>(kind: ObservationKind, parts: I) -> Self
    where
        I: IntoIterator<Item = &'a PairedObservations>,
    {
        Self {
            kind,
            entries: parts
                .into_iter()
                .flat_map(|p| p.entries.iter().cloned())
                .collect(),
        }
    }
}

/// `(|S| / sum y_gt) * sqrt(mean((y_hat - y_gt)^2)) * 100`.
pub fn nrmse(obs: &PairedObservations) -> Result<f64, MetricsError> {
    if obs.entries.is_empty() {
        return Err(MetricsError::EmptyCollection);
    }
    let n = obs.entries.len() as f64;
    let gt_sum: f64 = obs.entries.iter().map(|e| e.1).sum();
    if gt_sum <= 0.0 {
        return Err(MetricsError::ZeroGroundTruthSum);
    }
    let sq: f64 = obs
        .entries
        .iter()
        .map(|(_, gt, est)| (est - gt) * (est - gt))
        .sum();
    Ok(n / gt_sum * libm::sqrt(sq / n) * 100.0)
}

/// How a family of labelled collections is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// One value per collection.
    PerGroup,
    /// One value over the union, labelled `"pooled"`.
    Pooled,
}

pub fn nrmse_scoped(
    groups: &[(&str, &PairedObservations)],
    scope: Scope,
) -> Result<Vec<(String, f64)>, MetricsError> {
    match scope {
        Scope::PerGroup => groups
            .iter()
            .map(|(label, obs)| Ok((String::from(*label), nrmse(obs)?)))
            .collect(),
        Scope::Pooled => {
            let kind = groups
                .first()
                .map(|g| g.1.kind)
                .ok_or(MetricsError::EmptyCollection)?;
            let all = PairedObservations::pooled(kind, groups.iter().map(|g| g.1));
            Ok(alloc::vec![(String::from("pooled"), nrmse(&all)?)])
        }
    }
}

pub fn pct_improvement(nrmse_baseline: f64, nrmse_model: f64) -> Result<f64, MetricsError> {
    if nrmse_baseline.is_nan() || nrmse_baseline <= 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok((nrmse_baseline - nrmse_model) / nrmse_baseline * 100.0)
}

pub fn pct_gap(nrmse_proposed: f64, nrmse_benchmark: f64) -> Result<f64, MetricsError> {
    if nrmse_benchmark.is_nan() || nrmse_benchmark <= 0.0 {
        return Err(MetricsError::ZeroBenchmark);
    }
    Ok((nrmse_proposed - nrmse_benchmark) / nrmse_benchmark * 100.0)
}

/// Integer rendering for tables, rounding half away from zero.
pub fn round_report(value: f64) -> i64 {
    libm::round(value) as i64
}

/// Median of finite values; mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obs(pairs: &[(f64, f64)]) -> PairedObservations {
        PairedObservations::new(
            ObservationKind::Counts,
            pairs
                .iter()
                .enumerate()
                .map(|(i, &(g, e))| (alloc::format!("s{i}"), g, e)),
        )
        .unwrap()
    }

    #[test]
    fn perfect_is_zero() {
        assert_eq!(nrmse(&obs(&[(10.0, 10.0), (3.0, 3.0)])).unwrap(), 0.0);
    }

    #[test]
    fn single_entity_hand_value() {
        assert_eq!(nrmse(&obs(&[(100.0, 50.0)])).unwrap(), 50.0);
    }

    #[test]
    fn degenerate_collections() {
        assert_eq!(nrmse(&obs(&[])), Err(MetricsError::EmptyCollection));
        assert_eq!(
            nrmse(&obs(&[(0.0, 1.0)])),
            Err(MetricsError::ZeroGroundTruthSum)
        );
        assert!(PairedObservations::new(ObservationKind::Counts, [("a", -1.0, 0.0)]).is_err());
    }

    #[test]
    fn improvement_and_gap() {
        assert_eq!(round_report(pct_improvement(108.0, 39.0).unwrap()), 64);
        assert_eq!(round_report(pct_improvement(110.0, 29.0).unwrap()), 74);
        assert_eq!(pct_improvement(50.0, 50.0).unwrap(), 0.0);
        assert_eq!(round_report(pct_gap(45.0, 44.0).unwrap()), 2);
        assert_eq!(pct_gap(58.0, 50.0).unwrap(), 16.0);
        assert_eq!(pct_gap(54.0, 54.0).unwrap(), 0.0);
        assert_eq!(pct_improvement(0.0, 1.0), Err(MetricsError::ZeroBaseline));
        assert_eq!(pct_gap(1.0, 0.0), Err(MetricsError::ZeroBenchmark));
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_report(2.5), 3);
        assert_eq!(round_report(-2.5), -3);
        assert_eq!(round_report(2.49), 2);
    }

    #[test]
    fn scopes() {
        let a = obs(&[(100.0, 50.0)]);
        let b = obs(&[(100.0, 100.0)]);
        let per = nrmse_scoped(&[("h1", &a), ("h2", &b)], Scope::PerGroup).unwrap();
        assert_eq!(per, vec![("h1".into(), 50.0), ("h2".into(), 0.0)]);
        let pooled = nrmse_scoped(&[("h1", &a), ("h2", &b)], Scope::Pooled).unwrap();
        // 2/200 * sqrt(2500/2) * 100
        assert!((pooled[0].1 - 2.0 / 200.0 * libm::sqrt(1250.0) * 100.0).abs() < 1e-12);
        let sub = a.subset(|id| id == "zz");
        assert!(sub.is_empty());
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(mean(&[1.0, 2.0]), Some(1.5));
        assert_eq!(median(&[]), None);
    }
}
