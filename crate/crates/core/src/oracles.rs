//! Reference computations that share as little code as possible with the
//! pricing routes they check.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use libm::lgamma as ln_gamma;

use crate::bs::{bs_price, BsContext, OptionKind, OptionSpec};
use crate::error::{Error, Result};
use crate::levy::{LevyMeasure, LevyModel, LogNormalJumps, MertonParams};
use crate::quadrature::{integrate_adaptive, legendre20, AdaptiveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Series,
    Quadrature,
    FiniteDiff,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleReport {
    pub value: f64,
    pub method: OracleMethod,
    pub error_estimate: f64,
    pub seed: Option<u64>,
}

const SERIES_TAIL: f64 = 1e-12;
const SERIES_CAP: usize = 10_000;

/// Merton price as a Poisson mixture of Black-Scholes prices, over the
/// untruncated lognormal jump law.
pub fn merton_series_price(opt: &OptionSpec, p: &MertonParams) -> Result<OracleReport> {
    if !p.is_martingale() {
        return Err(Error::Domain("series price needs martingale-drift Merton parameters".into()));
    }
    let t = opt.maturity;
    let intensity = p.lambda_m * t;
    let put = opt.with_spot(opt.spot).map(|o| OptionSpec { kind: OptionKind::Put, ..o })?;
    let branch = |n: usize| -> f64 {
        let n = n as f64;
        let var = p.sigma * p.sigma * t + n * p.delta_j * p.delta_j;
        let spot = opt.spot * (-p.jump_compensator() * t + n * p.gamma_j + 0.5 * n * p.delta_j * p.delta_j).exp();
        if var == 0.0 {
            return put.payoff(spot);
        }
        let ctx = BsContext { vol: (var / t).sqrt(), t: 0.0 };
        bs_price(&put, &ctx, spot)
    };

    let mut value = 0.0;
    let mut weight_sum = 0.0;
    let mut tail;
    let mut n = 0;
    loop {
        let log_w = if intensity == 0.0 {
            if n == 0 { 0.0 } else { f64::NEG_INFINITY }
        } else {
            -intensity + n as f64 * intensity.ln() - ln_gamma(n as f64 + 1.0)
        };
        let w = log_w.exp();
        weight_sum += w;
        value += w * branch(n);
        tail = (1.0 - weight_sum).max(0.0);
        n += 1;
        if (n as f64 > intensity && tail < SERIES_TAIL) || n >= SERIES_CAP {
            break;
        }
    }
    // every branch of a put is bounded by the strike
    let error_estimate = tail * opt.strike;
    if error_estimate > 1e-10 * value.abs().max(f64::MIN_POSITIVE) && tail >= SERIES_TAIL {
        return Err(Error::NonConvergence {
            what: "Merton series",
            iterations: n,
            achieved: error_estimate,
            required: 1e-10 * value.abs(),
        });
    }
    if opt.kind == OptionKind::Call {
        value += opt.spot - opt.strike;
    }
    Ok(OracleReport {
        value,
        method: OracleMethod::Series,
        error_estimate,
        seed: None,
    })
}

/// `E^BS[ int_0^T (S_t^2 d^2P/dS^2)^2 dt ]` by direct quadrature: adaptive
/// Gauss-Kronrod over the Brownian marginal, composite Gauss-Legendre in
/// time after `T - t = T w^2`.
pub fn jump_sensitivity_numeric(opt: &OptionSpec, sigma_bar: f64) -> Result<OracleReport> {
    if !(sigma_bar > 0.0 && sigma_bar.is_finite()) {
        return Err(Error::invalid("sigma_bar", "must be finite and > 0"));
    }
    let big_t = opt.maturity;
    let var = sigma_bar * sigma_bar;
    let log_m = (opt.spot / opt.strike).ln();
    let inner = |w: f64| -> Result<f64> {
        let tau = big_t * w * w;
        let t = big_t - tau;
        let vol_tau = sigma_bar * tau.sqrt();
        let a = (log_m - 0.5 * var * t + 0.5 * var * tau) / vol_tau;
        let b = (t / tau).sqrt();
        let root_t = t.sqrt();
        let integrand = |z: f64| {
            let d1 = a + b * z;
            let log_s2 = 2.0 * opt.spot.ln() - var * t + 2.0 * sigma_bar * root_t * z;
            // (s phi(d1))^2 / (sigma^2 tau) times the standard normal density
            (log_s2 - d1 * d1 - 0.5 * z * z).exp() / (2.0 * std::f64::consts::PI * vol_tau * vol_tau)
                / (2.0 * std::f64::consts::PI).sqrt()
        };
        let centre = (2.0 * sigma_bar * root_t - 2.0 * a * b) / (1.0 + 2.0 * b * b);
        let width = 1.0 / (1.0 + 2.0 * b * b).sqrt();
        let opts = AdaptiveOptions::with_tolerance(1e-13, 1e-300);
        let e = integrate_adaptive(integrand, centre - 40.0 * width, centre + 40.0 * width, opts)?;
        // dt = 2 T w dw
        Ok(e.value * 2.0 * big_t * w)
    };

    let rule = legendre20();
    let level = |panels: usize| -> Result<f64> {
        let mut failure = None;
        let total = rule.integrate_composite(0.0, 1.0, panels, |w| match inner(w) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        });
        failure.map_or(Ok(total), Err)
    };
    let mut panels = 1;
    let mut previous = level(panels)?;
    for _ in 0..10 {
        panels *= 2;
        let current = level(panels)?;
        let change = (current - previous).abs();
        if change <= 1e-11 * current.abs() || current == 0.0 {
            return Ok(OracleReport {
                value: current,
                method: OracleMethod::Quadrature,
                error_estimate: change,
                seed: None,
            });
        }
        previous = current;
    }
    Err(Error::NonConvergence {
        what: "jump sensitivity time quadrature",
        iterations: panels,
        achieved: f64::NAN,
        required: 1e-11,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `s^n d^n P / ds^n` by central differences of [`bs_price`], Richardson
/// extrapolated over the steps `h, 2h, 4h` with
/// `h = s eps^{1/(n+2)} max(1, 5 vol sqrt(tau))`.
pub fn fd_greeks(opt: &OptionSpec, ctx: &BsContext, s: f64, n: usize) -> Result<OracleReport> {
    if !(1..=6).contains(&n) {
        return Err(Error::Domain(format!("greek order {n} outside 1..=6")));
    }
    if ctx.t >= opt.maturity {
        return Err(Error::Domain("finite differences need t < maturity".into()));
    }
    // widen the step with the price's own length scale, or round-off dominates
    let spread = ctx.vol * (opt.maturity - ctx.t).sqrt();
    let h0 = s * f64::EPSILON.powf(1.0 / (n as f64 + 2.0)) * (5.0 * spread).max(1.0);
    if s - 2.0 * n as f64 * h0 <= 0.0 {
        return Err(Error::Domain(format!("spot {s} too small for the difference stencil")));
    }
    let central = |h: f64| -> f64 {
        let sum: f64 = (0..=n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(n, k) * bs_price(opt, ctx, s + (0.5 * n as f64 - k as f64) * h)
            })
            .sum();
        sum / h.powi(n as i32)
    };
    let mut table: Vec<f64> = (0..3).map(|i| central(h0 * (1 << i) as f64)).collect();
    let mut previous = table[0];
    for level in 1..3 {
        let factor = 4f64.powi(level);
        for i in 0..3 - level as usize {
            table[i] = (factor * table[i] - table[i + 1]) / (factor - 1.0);
        }
        if level == 1 {
            previous = table[0];
        }
    }
    let scale = s.powi(n as i32);
    let value = table[0] * scale;
    let error_estimate = (table[0] - previous).abs() * scale;
    if !value.is_finite() {
        return Err(Error::NonConvergence {
            what: "finite-difference extrapolation",
            iterations: 3,
            achieved: f64::NAN,
            required: 0.0,
        });
    }
    Ok(OracleReport {
        value,
        method: OracleMethod::FiniteDiff,
        error_estimate,
        seed: None,
    })
}

const MC_BATCH: usize = 10_000;

enum JumpSampler {
    None,
    Atoms { sizes: Vec<f64>, cumulative: Vec<f64> },
    LogNormal { jumps: LogNormalJumps, envelope: f64 },
}

impl JumpSampler {
    fn new(measure: &LevyMeasure) -> Self {
        match measure {
            LevyMeasure::Atoms(list) => {
                let list: Vec<_> = list.iter().filter(|a| a.mass > 0.0).collect();
                if list.is_empty() {
                    return JumpSampler::None;
                }
                let mut acc = 0.0;
                let cumulative = list
                    .iter()
                    .map(|a| {
                        acc += a.mass;
                        acc
                    })
                    .collect();
                JumpSampler::Atoms {
                    sizes: list.iter().map(|a| a.size).collect(),
                    cumulative,
                }
            }
            LevyMeasure::LogNormal(j) if j.intensity > 0.0 => {
                // tilt factor e^{tilt (e^y - 1)} is monotone in y
                let (lo, hi) = j.support();
                let envelope = (j.tilt * lo).max(j.tilt * hi);
                JumpSampler::LogNormal { jumps: *j, envelope }
            }
            LevyMeasure::LogNormal(_) => JumpSampler::None,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            JumpSampler::None => 0.0,
            JumpSampler::Atoms { sizes, cumulative } => {
                let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let i = cumulative.partition_point(|&c| c <= u).min(sizes.len() - 1);
                sizes[i]
            }
            JumpSampler::LogNormal { jumps, envelope } => {
                let (lo, hi) = jumps.log_support();
                loop {
                    let z: f64 = StandardNormal.sample(rng);
                    let y = jumps.log_mean + jumps.log_std * z;
                    if y < lo || y > hi {
                        continue;
                    }
                    let x = y.exp_m1();
                    if jumps.tilt == 0.0 || rng.random::<f64>().ln() <= jumps.tilt * x - envelope {
                        return x;
                    }
                }
            }
        }
    }
}

/// Monte Carlo estimate of `E[H(S_T)]` by exact terminal sampling. Paths run
/// in batches of 10^4, batch `b` on ChaCha stream `b` of `seed`, so the
/// result does not depend on the thread count.
pub fn mc_linear_price(opt: &OptionSpec, m: &LevyModel, n_paths: usize, seed: u64) -> Result<OracleReport> {
    if n_paths < 10_000 {
        return Err(Error::invalid("n_paths", "must be >= 10^4"));
    }
    if !m.is_martingale(1e-9)? {
        return Err(Error::Domain("Monte Carlo linear price needs a martingale model".into()));
    }
    let t = opt.maturity;
    let sigma = m.sigma();
    let intensity = m.measure().integrate(|_| 1.0)? * t;
    let log_drift = (m.pure_drift()? - 0.5 * sigma * sigma) * t;
    let poisson = if intensity > 0.0 {
        Some(Poisson::new(intensity).map_err(|e| Error::Internal(format!("Poisson sampler: {e}")))?)
    } else {
        None
    };
    let sampler = JumpSampler::new(m.measure());
    let vol = sigma * t.sqrt();

    let n_batches = n_paths.div_ceil(MC_BATCH);
    let sums: Vec<(f64, f64)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let paths = MC_BATCH.min(n_paths - b * MC_BATCH);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..paths {
                let z: f64 = StandardNormal.sample(&mut rng);
                let mut log_s = opt.spot.ln() + log_drift + vol * z;
                if let Some(p) = &poisson {
                    let count = p.sample(&mut rng) as u64;
                    for _ in 0..count {
                        log_s += sampler.sample(&mut rng).ln_1p();
                    }
                }
                let h = opt.payoff(log_s.exp());
                sum += h;
                sum_sq += h * h;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = sums.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    let n = n_paths as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok(OracleReport {
        value: mean,
        method: OracleMethod::MonteCarlo,
        error_estimate: (var / n).sqrt(),
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bs::cash_greeks;
    use crate::levy::{Drift, DEFAULT_TRUNCATION};

    #[test]
    fn series_without_jumps_is_black_scholes() {
        let opt = OptionSpec::put(1.1, 0.7, 1.0).unwrap();
        let p = MertonParams::martingale(0.25, 0.0, -0.1, 0.2).unwrap();
        let r = merton_series_price(&opt, &p).unwrap();
        assert_eq!(r.value, bs_price(&opt, &BsContext::at_inception(0.25).unwrap(), 1.0));
    }

    #[test]
    fn series_with_null_jumps_is_black_scholes() {
        let opt = OptionSpec::call(0.9, 1.0, 1.0).unwrap();
        let p = MertonParams::martingale(0.2, 3.0, 0.0, 1e-9).unwrap();
        let r = merton_series_price(&opt, &p).unwrap();
        let bs = bs_price(&opt, &BsContext::at_inception(0.2).unwrap(), 1.0);
        assert!((r.value - bs).abs() < 1e-10, "{} vs {bs}", r.value);
    }

    #[test]
    fn series_rejects_physical_drift() {
        let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
        let p = MertonParams::new(0.2, 5.0, -0.05, 0.1, Some(0.03)).unwrap();
        assert!(matches!(merton_series_price(&opt, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn sensitivity_at_zero_log_moneyness() {
        // d = 0 when log(S0/K) = sigma^2 T / 2
        let sigma: f64 = 0.3;
        let opt = OptionSpec::put(1.0, 2.0, (0.5 * sigma * sigma * 2.0).exp()).unwrap();
        let r = jump_sensitivity_numeric(&opt, sigma).unwrap();
        let exact = 1.0 / (4.0 * sigma * sigma);
        assert!((r.value - exact).abs() < 1e-8 * exact, "{} vs {exact}", r.value);
    }

    #[test]
    fn sensitivity_vanishes_for_tiny_strike() {
        let opt = OptionSpec::put(1e-12, 1.0, 1.0).unwrap();
        assert!(jump_sensitivity_numeric(&opt, 0.2).unwrap().value < 1e-30);
    }

    #[test]
    fn fd_delta_and_gamma() {
        let opt = OptionSpec::call(1.05, 1.0, 1.0).unwrap();
        let ctx = BsContext::at_inception(0.2).unwrap();
        let exact = cash_greeks(&opt, &ctx, 1.0, 6).unwrap();
        assert!((fd_greeks(&opt, &ctx, 1.0, 1).unwrap().value - exact[0]).abs() < 1e-8);
        assert!((fd_greeks(&opt, &ctx, 1.0, 2).unwrap().value - exact[1]).abs() < 1e-7);
        let d6 = fd_greeks(&opt, &ctx, 1.0, 6).unwrap().value;
        assert!((d6 - exact[5]).abs() < 1e-4 * exact[5].abs());
    }

    #[test]
    fn mc_is_deterministic_and_gaussian_case_matches() {
        let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
        let m = LevyModel::from_atoms(0.2, vec![], Drift::Martingale).unwrap();
        let a = mc_linear_price(&opt, &m, 200_000, 7).unwrap();
        let b = mc_linear_price(&opt, &m, 200_000, 7).unwrap();
        assert_eq!(a, b);
        let bs = bs_price(&opt, &BsContext::at_inception(0.2).unwrap(), 1.0);
        assert!((a.value - bs).abs() < 4.0 * a.error_estimate);
    }

    #[test]
    fn mc_tiny_strike_put_is_zero() {
        let opt = OptionSpec::put(1e-300, 1.0, 1.0).unwrap();
        let m = LevyModel::merton(&MertonParams::martingale(0.2, 5.0, -0.05, 0.1).unwrap(), DEFAULT_TRUNCATION).unwrap();
        let r = mc_linear_price(&opt, &m, 10_000, 1).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(mc_linear_price(&opt, &m, 9_999, 1).is_err());
    }
}
