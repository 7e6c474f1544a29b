//! Bounded one-dimensional minimization with exact derivatives.
//!
//! A cell `[a, b]` whose end derivatives change sign from negative to
//! positive holds a local minimum; it is located as a root of `f'` with
//! Brent's method (inverse quadratic / secant steps guarded by bisection).
//! Near the minimum `f` is flat to within rounding, so the sign of `f'` is
//! the only reliable guide there and `f` values are never compared inside
//! a cell. A cell without that sign change has its local minimum at an end.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Probe {
    pub x: f64,
    pub f: f64,
    pub g: f64,
}

impl Probe {
    /// Strictly lower value, or equal value at smaller `x`.
    pub fn beats(&self, other: &Probe) -> bool {
        self.f < other.f || (self.f == other.f && self.x < other.x)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub max_iter: usize,
    /// Absolute bracket width at which the search may stop.
    pub tol_x: f64,
    pub tol_g: f64,
    /// Global feasible interval, used for the projected gradient.
    pub lower: f64,
    pub upper: f64,
}

/// Why a local search ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `|projected f'|` fell to the gradient tolerance.
    Gradient,
    /// The bracket shrank to the x tolerance or to floating-point resolution.
    Bracket,
    IterationCap,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalMin {
    pub best: Probe,
    pub iterations: usize,
    pub stop: StopReason,
    /// Final sign-change bracket `(g < 0, g > 0)`, when there was one.
    pub bracket: Option<(Probe, Probe)>,
}

fn projected_gradient(p: &Probe, s: &Settings) -> f64 {
    if (p.x <= s.lower && p.g > 0.0) || (p.x >= s.upper && p.g < 0.0) {
        0.0
    } else {
        p.g
    }
}

fn endpoint(p: Probe, s: &Settings) -> LocalMin {
    LocalMin {
        best: p,
        iterations: 0,
        stop: if projected_gradient(&p, s).abs() <= s.tol_g {
            StopReason::Gradient
        } else {
            // a cell end is a local minimum of the cell even when f' != 0
            StopReason::Bracket
        },
        bracket: None,
    }
}

/// Local minimum of the cell `[left.x, right.x]`, both ends already evaluated.
pub(crate) fn local_minimize<E, F>(
    eval: &mut F,
    left: Probe,
    right: Probe,
    s: &Settings,
    trace: &mut Vec<Probe>,
) -> Result<LocalMin, E>
where
    F: FnMut(f64) -> Result<Probe, E>,
{
    if left.g < 0.0 && right.g > 0.0 {
        return stationary_point(eval, left, right, s, trace);
    }
    // no sign change: f' >= 0 at the left end or f' <= 0 at the right end,
    // and whichever end applies is a local minimum
    let cand = match (left.g >= 0.0, right.g <= 0.0) {
        (true, true) => {
            if right.beats(&left) {
                right
            } else {
                left
            }
        }
        (true, false) => left,
        _ => right,
    };
    Ok(endpoint(cand, s))
}

/// Root of `f'` inside `[neg.x, pos.x]` where `neg.g < 0 < pos.g`.
pub(crate) fn stationary_point<E, F>(
    eval: &mut F,
    neg: Probe,
    pos: Probe,
    s: &Settings,
    trace: &mut Vec<Probe>,
) -> Result<LocalMin, E>
where
    F: FnMut(f64) -> Result<Probe, E>,
{
    // Brent's zero finder on g; `b` is the current estimate, `a` the previous
    // one, `c` keeps g(b) and g(c) of opposite sign.
    let mut a = neg;
    let mut b = pos;
    let mut c = a;
    let mut d = b.x - a.x;
    let mut e = d;

    let result = |b: Probe, c: Probe, iterations, stop| LocalMin {
        best: b,
        iterations,
        stop,
        bracket: Some(if b.g < 0.0 { (b, c) } else { (c, b) }),
    };

    for iter in 0..s.max_iter {
        if (b.g > 0.0) == (c.g > 0.0) {
            c = a;
            d = b.x - a.x;
            e = d;
        }
        if c.g.abs() < b.g.abs() {
            a = b;
            b = c;
            c = a;
        }
        if b.g.abs() <= s.tol_g {
            return Ok(result(b, c, iter, StopReason::Gradient));
        }
        let tol = 2.0 * f64::EPSILON * b.x.abs() + 0.5 * s.tol_x;
        let m = 0.5 * (c.x - b.x);
        if m.abs() <= tol {
            return Ok(result(b, c, iter, StopReason::Bracket));
        }

        if e.abs() >= tol && a.g.abs() > b.g.abs() {
            let sr = b.g / a.g;
            let (mut p, mut q);
            if a.x == c.x {
                // secant
                p = 2.0 * m * sr;
                q = 1.0 - sr;
            } else {
                // inverse quadratic interpolation
                let qa = a.g / c.g;
                let r = b.g / c.g;
                p = sr * (2.0 * m * qa * (qa - r) - (b.x - a.x) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (sr - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }

        a = b;
        let step = if d.abs() > tol { d } else { tol.copysign(m) };
        b = eval(b.x + step)?;
        trace.push(b);
    }
    Ok(result(b, c, s.max_iter, StopReason::IterationCap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::convert::Infallible;

    fn settings(lower: f64, upper: f64) -> Settings {
        Settings {
            max_iter: 200,
            tol_x: 1e-12,
            tol_g: 1e-12,
            lower,
            upper,
        }
    }

    fn run(f: impl Fn(f64) -> (f64, f64), a: f64, b: f64) -> LocalMin {
        let mut eval = |x: f64| -> Result<Probe, Infallible> {
            let (f, g) = f(x);
            Ok(Probe { x, f, g })
        };
        let l = eval(a).unwrap();
        let r = eval(b).unwrap();
        let mut trace = Vec::new();
        local_minimize(&mut eval, l, r, &settings(a, b), &mut trace).unwrap()
    }

    #[test]
    fn quadratic_interior() {
        let m = run(|x| ((x - 2.5).powi(2), 2.0 * (x - 2.5)), 0.0, 10.0);
        assert_eq!(m.stop, StopReason::Gradient);
        assert!((m.best.x - 2.5).abs() < 1e-12);
    }

    #[test]
    fn quartic_with_flat_bottom() {
        let m = run(|x| ((x - 1.0).powi(4), 4.0 * (x - 1.0).powi(3)), -3.0, 7.0);
        assert_ne!(m.stop, StopReason::IterationCap);
        assert!((m.best.x - 1.0).abs() < 1e-3);
    }

    #[test]
    fn boundary_minimum() {
        let m = run(|x| (x * x, 2.0 * x), 1.0, 5.0);
        assert_eq!(m.stop, StopReason::Gradient);
        assert_eq!(m.best.x, 1.0);
        let m = run(|x| (-x, -1.0), 1.0, 5.0);
        assert_eq!(m.best.x, 5.0);
    }

    #[test]
    fn interior_maximum_prefers_lower_end() {
        // f(0) = -4, f(5) = -6.5
        let m = run(
            |x| (-(x - 2.0).powi(2) + 0.5 * x, -2.0 * (x - 2.0) + 0.5),
            0.0,
            5.0,
        );
        assert_eq!(m.best.x, 5.0);
    }

    #[test]
    fn nonsmooth_kink() {
        let m = run(
            |x| ((x - 0.3).abs(), if x > 0.3 { 1.0 } else { -1.0 }),
            0.0,
            1.0,
        );
        assert_eq!(m.stop, StopReason::Bracket);
        assert!((m.best.x - 0.3).abs() < 1e-12);
    }
}
