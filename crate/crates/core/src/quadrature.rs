//! Numerical integration: cached Gauss-Legendre rules and an adaptive
//! Gauss-Kronrod (7, 15) integrator with global error control.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

/// Nodes and weights of a Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct LegendreRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LegendreRule {
    fn build(degree: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(degree).expect("degree > 0"));
        let (nodes, weights) = rule.into_iter().unzip();
        LegendreRule { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum();
        sum * half
    }

    /// Composite rule: `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_composite(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: impl FnMut(f64) -> f64,
    ) -> f64 {
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * width;
                self.integrate(lo, lo + width, &mut f)
            })
            .sum()
    }
}

/// The 20-point rule.
pub fn legendre20() -> &'static LegendreRule {
    static RULE: OnceLock<LegendreRule> = OnceLock::new();
    RULE.get_or_init(|| LegendreRule::build(20))
}

/// The 64-point rule.
pub fn legendre64() -> &'static LegendreRule {
    static RULE: OnceLock<LegendreRule> = OnceLock::new();
    RULE.get_or_init(|| LegendreRule::build(64))
}

// Kronrod abscissae; odd indices are the embedded Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Tolerance and work limits for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_panels: usize,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            initial_panels: 4,
            max_intervals: 2000,
        }
    }
}

impl AdaptiveOptions {
    pub fn with_tolerance(rel_tol: f64, abs_tol: f64) -> Self {
        AdaptiveOptions {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
///
/// The interval with the largest local error estimate is bisected until the
/// summed estimate drops below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    opts: AdaptiveOptions,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
        });
    }
    let panels = opts.initial_panels.max(1);
    let width = (b - a) / panels as f64;
    // (lo, hi, value, error)
    let mut intervals: Vec<(f64, f64, f64, f64)> = (0..panels)
        .map(|p| {
            let lo = a + p as f64 * width;
            let hi = if p + 1 == panels { b } else { lo + width };
            let (v, e) = gk15(lo, hi, &mut f);
            (lo, hi, v, e)
        })
        .collect();

    let min_width = (b - a).abs() * 1e-14;
    loop {
        let value: f64 = intervals.iter().map(|iv| iv.2).sum();
        let error: f64 = intervals.iter().map(|iv| iv.3).sum();
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if !value.is_finite() {
            return Err(Error::Domain(
                "integrand produced a non-finite value".to_string(),
            ));
        }
        if error <= target {
            return Ok(Integral { value, error });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .filter(|(_, iv)| (iv.1 - iv.0).abs() > min_width)
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i);
        let Some(worst) = worst else {
            // every interval is already at the resolution floor
            return Err(Error::NonConvergence {
                what: "adaptive quadrature",
                iterations: intervals.len(),
                achieved: error,
                required: target,
            });
        };
        if intervals.len() >= opts.max_intervals {
            return Err(Error::NonConvergence {
                what: "adaptive quadrature",
                iterations: intervals.len(),
                achieved: error,
                required: target,
            });
        }
        let (lo, hi, _, _) = intervals[worst];
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(lo, mid, &mut f);
        let (v2, e2) = gk15(mid, hi, &mut f);
        intervals[worst] = (lo, mid, v1, e1);
        intervals.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rules_integrate_polynomials_exactly() {
        let v = legendre20().integrate(0.0, 2.0, |x| x.powi(7));
        assert!((v - 32.0).abs() < 1e-12);
        let v = legendre64().integrate(-1.0, 1.0, |x| x * x);
        assert!((v - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrands() {
        let width: f64 = 1e-3;
        let f = |x: f64| (-(x - 0.3) * (x - 0.3) / (2.0 * width * width)).exp();
        let r = integrate_adaptive(f, -1.0, 1.0, AdaptiveOptions::default()).unwrap();
        let exact = width * (2.0 * std::f64::consts::PI).sqrt();
        assert!((r.value / exact - 1.0).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        let opts = AdaptiveOptions {
            max_intervals: 3,
            ..Default::default()
        };
        let err = integrate_adaptive(|x: f64| x.abs().sqrt().recip(), -1.0, 1.0, opts);
        assert!(matches!(err, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn zero_integrand_converges_immediately() {
        let r = integrate_adaptive(|_| 0.0, 0.0, 1.0, AdaptiveOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }
}
