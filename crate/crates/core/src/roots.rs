//! Root finding for strictly increasing scalar functions, as arises from the
//! first-order condition of a smooth strictly convex objective.

use crate::error::{Error, Result};

/// Outcome of [`increasing_root`].
#[derive(Debug, Clone, Copy)]
pub struct RootOutcome {
    pub x: f64,
    /// Value of the function at `x`.
    pub residual: f64,
    /// Derivative at `x`.
    pub slope: f64,
    /// Number of function evaluations after the initial one.
    pub iterations: usize,
}

/// Finds the zero of a strictly increasing function `g` by Newton's method,
/// falling back to bisection once a sign-change bracket is known and to step
/// doubling while it is not.
///
/// `eval` returns `(g(x), g'(x))` with `g'(x) > 0`. Iteration stops when
/// `accept(x, g, g')` holds, or when the bracket has shrunk to machine
/// precision.
pub fn increasing_root(
    what: &'static str,
    mut eval: impl FnMut(f64) -> (f64, f64),
    x0: f64,
    mut accept: impl FnMut(f64, f64, f64) -> bool,
    max_iter: usize,
) -> Result<RootOutcome> {
    let mut x = x0;
    let (mut g, mut dg) = eval(x);
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut last_step = 1.0_f64;
    let mut previous_g = f64::INFINITY;

    for iterations in 0..=max_iter {
        if !g.is_finite() {
            return Err(Error::Domain(format!("{what}: non-finite value at x = {x}")));
        }
        if accept(x, g, dg) {
            return Ok(RootOutcome {
                x,
                residual: g,
                slope: dg,
                iterations,
            });
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if lo.is_finite() && hi.is_finite() && hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            return Ok(RootOutcome {
                x,
                residual: g,
                slope: dg,
                iterations,
            });
        }
        if iterations == max_iter {
            break;
        }

        let newton = x - g / dg;
        let next = if lo.is_finite() && hi.is_finite() {
            // Newton inside the bracket, unless it is crawling (linear convergence)
            if newton.is_finite() && newton > lo && newton < hi && g.abs() <= 0.25 * previous_g.abs() {
                newton
            } else {
                0.5 * (lo + hi)
            }
        } else if newton.is_finite() && dg > 0.0 {
            newton
        } else {
            // no usable slope and one-sided bracket: double the step outwards
            last_step *= 2.0;
            if g < 0.0 {
                x + last_step
            } else {
                x - last_step
            }
        };
        previous_g = g;
        // pull back overshoots into regions where g overflows
        let mut next = next;
        (g, dg) = eval(next);
        let mut pullbacks = 0;
        while !g.is_finite() && pullbacks < 200 {
            next = x + 0.5 * (next - x);
            (g, dg) = eval(next);
            pullbacks += 1;
        }
        last_step = (next - x).abs().max(f64::MIN_POSITIVE);
        x = next;
    }
    Err(Error::NonConvergence {
        what,
        iterations: max_iter,
        achieved: g.abs(),
        required: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let r = increasing_root(
            "cubic",
            |x| (x * x * x + x - 10.0, 3.0 * x * x + 1.0),
            0.0,
            |_, g, _| g.abs() < 1e-13,
            100,
        )
        .unwrap();
        assert!((r.x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn survives_flat_exponential_start() {
        // Newton from far left overshoots wildly; the bracket keeps it sane
        let r = increasing_root(
            "exp",
            |x: f64| (x.exp() - 2.0, x.exp()),
            -30.0,
            |_, g, _| g.abs() < 1e-14,
            200,
        )
        .unwrap();
        assert!((r.x - 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let err = increasing_root("slow", |x: f64| (x.atan() - 1.5, 1.0 / (1.0 + x * x)), 0.0, |_, g, _| g.abs() < 1e-300, 3);
        assert!(matches!(err, Err(Error::NonConvergence { .. })));
    }
}
