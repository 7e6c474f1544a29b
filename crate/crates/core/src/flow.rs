//! Analytical macroscopic network model.
//!
//! For a scaling factor `x` the model computes, per segment `i`:
//!
//! ```text
//! lambda_i = x * c_i                                  (veh/h)
//! k_i      = kappa * k_jam * lambda_i / n_i           (veh/km/lane)
//! r_i      = min(k_i / k_jam, 1)
//! v_i      = v_min + (v_max - v_min) * (1 - r_i^a1)^a2 (km/h)
//! ```
//!
//! and per path `t_p = sum l_i / v_i` in hours. Densities past jam are
//! clamped to the `v_min` plateau, which keeps `t_p(x)` continuous and
//! monotone. The derivative `dt_p/dx` is exact; on the plateau it is zero.

use alloc::vec::Vec;

use crate::network::{DemandCoefficients, NetworkSnapshot};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("model parameter {name} is invalid: {constraint} does not hold")]
    InvalidParams {
        name: &'static str,
        constraint: &'static str,
    },
    #[error("scaling factor {x} is outside [{lower}, {upper}]")]
    XOutOfBounds { x: f64, lower: f64, upper: f64 },
    #[error("non-finite {quantity} at x = {x}")]
    NonFiniteResult { quantity: &'static str, x: f64 },
    #[error("demand coefficients cover {got} segments, network has {expected}")]
    CoefficientMismatch { expected: usize, got: usize },
}

/// Fundamental-diagram constants shared by all segments, plus bounds on `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Jam density (veh/km/lane).
    pub k_jam: f64,
    /// Demand-to-density conversion factor.
    pub kappa: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub x_lower: f64,
    pub x_upper: f64,
}

impl ModelParams {
    pub const DEFAULT_K_JAM: f64 = 100.0;
    pub const DEFAULT_ALPHA1: f64 = 2.0;
    pub const DEFAULT_ALPHA2: f64 = 2.0;
    pub const DEFAULT_X_LOWER: f64 = 1.0;
    pub const DEFAULT_X_UPPER: f64 = 100.0;

    /// Default parameters around a scenario-supplied `kappa`, which has no default.
    pub fn with_kappa(kappa: f64) -> Self {
        Self {
            k_jam: Self::DEFAULT_K_JAM,
            kappa,
            alpha1: Self::DEFAULT_ALPHA1,
            alpha2: Self::DEFAULT_ALPHA2,
            x_lower: Self::DEFAULT_X_LOWER,
            x_upper: Self::DEFAULT_X_UPPER,
        }
    }

    /// Exponents below one make the derivative unbounded at `r = 0` or `r = 1`,
    /// so both are required to be at least one.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |name, constraint| Err(ModelError::InvalidParams { name, constraint });
        if !(self.k_jam.is_finite() && self.k_jam > 0.0) {
            return fail("k_jam", "k_jam > 0");
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return fail("kappa", "kappa > 0");
        }
        if !(self.alpha1.is_finite() && self.alpha1 >= 1.0) {
            return fail("alpha1", "alpha1 >= 1");
        }
        if !(self.alpha2.is_finite() && self.alpha2 >= 1.0) {
            return fail("alpha2", "alpha2 >= 1");
        }
        if !(self.x_lower.is_finite() && self.x_lower >= 0.0) {
            return fail("x_lower", "x_lower >= 0");
        }
        if !(self.x_upper.is_finite() && self.x_upper > self.x_lower) {
            return fail("x_upper", "x_upper > x_lower");
        }
        Ok(())
    }

    pub(crate) fn check_x(&self, x: f64) -> Result<(), ModelError> {
        if x >= self.x_lower && x <= self.x_upper {
            Ok(())
        } else {
            Err(ModelError::XOutOfBounds {
                x,
                lower: self.x_lower,
                upper: self.x_upper,
            })
        }
    }
}

#[inline]
fn pow(base: f64, exp: f64) -> f64 {
    if exp == 0.0 {
        1.0
    } else if exp == 1.0 {
        base
    } else if exp == 2.0 {
        base * base
    } else {
        #[cfg(feature = "std")]
        return base.powf(exp);
        #[cfg(not(feature = "std"))]
        return libm::pow(base, exp);
    }
}

/// Speed and `dv/dk` of one segment at density ratio `r` (already clamped to `[0, 1]`).
#[inline]
pub(crate) fn fd_speed(params: &ModelParams, v_min: f64, v_max: f64, r: f64) -> (f64, f64) {
    // r^(a1-1) and free^(a2-1) serve both the speed and its slope
    let ra1m = pow(r, params.alpha1 - 1.0);
    let free = 1.0 - ra1m * r;
    let fa2m = pow(free, params.alpha2 - 1.0);
    // the sum can round one ulp past either bound
    let v = (v_min + (v_max - v_min) * (fa2m * free)).clamp(v_min, v_max);
    let dv_dk = if r >= 1.0 {
        0.0
    } else {
        -(v_max - v_min) * params.alpha2 * fa2m * params.alpha1 * ra1m / params.k_jam
    };
    (v, dv_dk)
}

/// Per-segment travel time (h) and its derivative in `x`, for every segment.
///
/// Shared by [`load_network`] and the objective; the latter never needs the
/// full [`FlowState`].
pub(crate) fn segment_times(
    snapshot: &NetworkSnapshot,
    params: &ModelParams,
    coefficients: &DemandCoefficients,
    x: f64,
    time_h: &mut Vec<f64>,
    dtime_dx: &mut Vec<f64>,
) {
    time_h.clear();
    dtime_dx.clear();
    for (s, &c) in snapshot.segments().iter().zip(coefficients.as_slice()) {
        let lanes = f64::from(s.lanes);
        let slope = params.kappa * params.k_jam / lanes;
        let k = slope * x * c;
        let r = (k / params.k_jam).min(1.0);
        let (v, dv_dk) = fd_speed(params, s.v_min_kmh, s.v_max_kmh, r);
        time_h.push(s.length_km / v);
        dtime_dx.push(-(s.length_km / (v * v)) * dv_dk * slope * c);
    }
}

pub(crate) fn check_inputs(
    snapshot: &NetworkSnapshot,
    params: &ModelParams,
    coefficients: &DemandCoefficients,
    x: f64,
) -> Result<(), ModelError> {
    params.validate()?;
    params.check_x(x)?;
    let expected = snapshot.segments().len();
    let got = coefficients.as_slice().len();
    if expected != got {
        return Err(ModelError::CoefficientMismatch { expected, got });
    }
    Ok(())
}

/// Full model state at one scaling factor. Segment vectors follow snapshot
/// segment order, path vectors follow snapshot path order.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub x: f64,
    /// Segment demand (veh/h).
    pub lambda: Vec<f64>,
    /// Lane density (veh/km/lane), unclamped.
    pub k: Vec<f64>,
    /// Speed (km/h).
    pub v: Vec<f64>,
    /// Path travel time (h).
    pub t: Vec<f64>,
    /// `dt/dx` per path (h per unit x).
    pub dt_dx: Vec<f64>,
}

impl FlowState {
    pub fn travel_time_s(&self, path: usize) -> f64 {
        self.t[path] * crate::SECONDS_PER_HOUR
    }

    pub fn travel_time_by_id(&self, snapshot: &NetworkSnapshot, path: &str) -> Option<f64> {
        snapshot.path_position(path).map(|p| self.t[p])
    }
}

pub fn load_network(
    snapshot: &NetworkSnapshot,
    params: &ModelParams,
    coefficients: &DemandCoefficients,
    x: f64,
) -> Result<FlowState, ModelError> {
    check_inputs(snapshot, params, coefficients, x)?;
    let n = snapshot.segments().len();
    let mut lambda = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut seg_t = Vec::with_capacity(n);
    let mut seg_dt = Vec::with_capacity(n);
    for (s, &c) in snapshot.segments().iter().zip(coefficients.as_slice()) {
        let lanes = f64::from(s.lanes);
        let slope = params.kappa * params.k_jam / lanes;
        let l = x * c;
        let ki = slope * l;
        let r = (ki / params.k_jam).min(1.0);
        let (vi, dv_dk) = fd_speed(params, s.v_min_kmh, s.v_max_kmh, r);
        lambda.push(l);
        k.push(ki);
        v.push(vi);
        seg_t.push(s.length_km / vi);
        seg_dt.push(-(s.length_km / (vi * vi)) * dv_dk * slope * c);
    }
    let (t, dt_dx) = sum_paths(snapshot, &seg_t, &seg_dt);
    if v.iter().chain(&k).any(|q| !q.is_finite()) {
        return Err(ModelError::NonFiniteResult {
            quantity: "segment state",
            x,
        });
    }
    check_finite(&t, &dt_dx, x)?;
    Ok(FlowState {
        x,
        lambda,
        k,
        v,
        t,
        dt_dx,
    })
}

pub(crate) fn sum_paths(
    snapshot: &NetworkSnapshot,
    seg_t: &[f64],
    seg_dt: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = snapshot.paths().len();
    let mut t = Vec::with_capacity(n);
    let mut dt = Vec::with_capacity(n);
    for p in 0..n {
        let idx = snapshot.path_segment_indices(p);
        t.push(idx.iter().map(|&i| seg_t[i]).sum());
        dt.push(idx.iter().map(|&i| seg_dt[i]).sum());
    }
    (t, dt)
}

pub(crate) fn check_finite(t: &[f64], dt: &[f64], x: f64) -> Result<(), ModelError> {
    if t.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteResult {
            quantity: "travel time",
            x,
        });
    }
    if dt.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteResult {
            quantity: "travel time derivative",
            x,
        });
    }
    Ok(())
}

/// `dt_p/dx` for every path (h per unit x), in snapshot path order.
pub fn travel_time_derivative(
    snapshot: &NetworkSnapshot,
    params: &ModelParams,
    coefficients: &DemandCoefficients,
    x: f64,
) -> Result<Vec<f64>, ModelError> {
    check_inputs(snapshot, params, coefficients, x)?;
    let mut seg_t = Vec::new();
    let mut seg_dt = Vec::new();
    segment_times(snapshot, params, coefficients, x, &mut seg_t, &mut seg_dt);
    let (t, dt) = sum_paths(snapshot, &seg_t, &seg_dt);
    check_finite(&t, &dt, x)?;
    Ok(dt)
}

/// Segment flows `q_i = n_i * k_i * v_i` (veh/h), in snapshot segment order.
pub fn segment_counts(state: &FlowState, snapshot: &NetworkSnapshot) -> Vec<f64> {
    snapshot
        .segments()
        .iter()
        .zip(state.k.iter().zip(&state.v))
        .map(|(s, (&k, &v))| f64::from(s.lanes) * k * v)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_snapshot, segment_demand_coefficients, OdPair, Path, Segment};
    use alloc::string::ToString;
    use alloc::vec;

    fn one_segment(lanes: u32, demand: f64) -> NetworkSnapshot {
        build_snapshot(
            vec![Segment {
                id: "s".to_string(),
                length_km: 2.0,
                lanes,
                v_max_kmh: 100.0,
                v_min_kmh: 20.0,
            }],
            vec![Path {
                id: "p".to_string(),
                segment_ids: vec!["s".to_string()],
            }],
            vec![OdPair {
                id: "o".to_string(),
                path_id: "p".to_string(),
                subsample_demand_vph: demand,
            }],
        )
        .unwrap()
    }

    fn params(a1: f64, a2: f64) -> ModelParams {
        ModelParams {
            k_jam: 100.0,
            kappa: 1e-3,
            alpha1: a1,
            alpha2: a2,
            x_lower: 0.0,
            x_upper: 100.0,
        }
    }

    #[test]
    fn free_flow_at_zero() {
        let snap = one_segment(2, 500.0);
        let c = segment_demand_coefficients(&snap);
        let st = load_network(&snap, &params(2.0, 2.0), &c, 0.0).unwrap();
        assert_eq!(st.lambda, vec![0.0]);
        assert_eq!(st.k, vec![0.0]);
        assert_eq!(st.v, vec![100.0]);
        assert_eq!(st.t, vec![2.0 / 100.0]);
        assert_eq!(st.dt_dx, vec![0.0]);
    }

    #[test]
    fn congested_plateau() {
        let snap = one_segment(2, 500.0);
        let c = segment_demand_coefficients(&snap);
        // r = kappa * x * c / n = 1e-3 * 50 * 500 / 2 = 12.5 -> clamped
        let st = load_network(&snap, &params(2.0, 3.0), &c, 50.0).unwrap();
        assert_eq!(st.v, vec![20.0]);
        assert_eq!(st.t, vec![2.0 / 20.0]);
        assert_eq!(st.dt_dx, vec![0.0]);
    }

    #[test]
    fn linear_fd_midpoint() {
        let snap = one_segment(2, 500.0);
        let c = segment_demand_coefficients(&snap);
        // r = 1e-3 * 2 * 500 / 2 = 0.5
        let st = load_network(&snap, &params(1.0, 1.0), &c, 2.0).unwrap();
        assert_eq!(st.k, vec![50.0]);
        assert_eq!(st.v, vec![20.0 + 80.0 / 2.0]);
    }

    #[test]
    fn linear_fd_derivative_at_zero_is_nonzero() {
        let snap = one_segment(2, 500.0);
        let c = segment_demand_coefficients(&snap);
        let dt = travel_time_derivative(&snap, &params(1.0, 1.0), &c, 0.0).unwrap();
        // dv/dk = -(80)/100, dk/dx = 1e-3*100/2*500 = 25, t' = l/v^2 * 0.8 * 25
        let expected = 2.0 / (100.0 * 100.0) * 0.8 * 25.0;
        assert!((dt[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn counts_are_lane_density_speed_product() {
        let snap = one_segment(3, 0.0);
        let state = FlowState {
            x: 1.0,
            lambda: vec![0.0],
            k: vec![20.0],
            v: vec![100.0],
            t: vec![0.02],
            dt_dx: vec![0.0],
        };
        assert_eq!(segment_counts(&state, &snap), vec![6000.0]);
        let empty = load_network(
            &snap,
            &params(2.0, 2.0),
            &segment_demand_coefficients(&snap),
            3.0,
        )
        .unwrap();
        assert_eq!(segment_counts(&empty, &snap), vec![0.0]);
    }

    #[test]
    fn rejects_out_of_bounds_and_bad_params() {
        let snap = one_segment(2, 1.0);
        let c = segment_demand_coefficients(&snap);
        assert!(matches!(
            load_network(&snap, &params(2.0, 2.0), &c, 101.0),
            Err(ModelError::XOutOfBounds { .. })
        ));
        assert!(matches!(
            load_network(&snap, &params(0.5, 2.0), &c, 1.0),
            Err(ModelError::InvalidParams { name: "alpha1", .. })
        ));
        assert!(matches!(
            load_network(&snap, &params(2.0, 0.9), &c, 1.0),
            Err(ModelError::InvalidParams { name: "alpha2", .. })
        ));
        let mut p = params(2.0, 2.0);
        p.x_upper = p.x_lower;
        assert!(p.validate().is_err());
        let mut p = params(2.0, 2.0);
        p.kappa = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn defaults() {
        let p = ModelParams::with_kappa(0.5);
        assert_eq!((p.k_jam, p.alpha1, p.alpha2), (100.0, 2.0, 2.0));
        assert_eq!((p.x_lower, p.x_upper), (1.0, 100.0));
        assert!(p.validate().is_ok());
    }
}
