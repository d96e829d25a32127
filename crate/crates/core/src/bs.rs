//! Zero-rate Black-Scholes prices, cash greeks `d_n = s^n d^nP/ds^n` up to
//! order six, and the expected squared cash gamma of a put.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature::legendre64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Put,
    Call,
}

/// European option on `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub strike: f64,
    pub maturity: f64,
    pub spot: f64,
}

impl OptionSpec {
    pub fn new(kind: OptionKind, strike: f64, maturity: f64, spot: f64) -> Result<Self> {
        for (name, v) in [("strike", strike), ("maturity", maturity), ("spot", spot)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("{v} must be finite and > 0")));
            }
        }
        Ok(OptionSpec {
            kind,
            strike,
            maturity,
            spot,
        })
    }

    pub fn put(strike: f64, maturity: f64, spot: f64) -> Result<Self> {
        Self::new(OptionKind::Put, strike, maturity, spot)
    }

    pub fn call(strike: f64, maturity: f64, spot: f64) -> Result<Self> {
        Self::new(OptionKind::Call, strike, maturity, spot)
    }

    pub fn payoff(&self, s: f64) -> f64 {
        match self.kind {
            OptionKind::Put => (self.strike - s).max(0.0),
            OptionKind::Call => (s - self.strike).max(0.0),
        }
    }

    pub fn with_spot(&self, spot: f64) -> Result<Self> {
        Self::new(self.kind, self.strike, self.maturity, spot)
    }

    pub fn with_strike(&self, strike: f64) -> Result<Self> {
        Self::new(self.kind, strike, self.maturity, self.spot)
    }

    pub fn with_maturity(&self, maturity: f64) -> Result<Self> {
        Self::new(self.kind, self.strike, maturity, self.spot)
    }
}

/// Volatility and evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsContext {
    pub vol: f64,
    pub t: f64,
}

impl BsContext {
    pub fn new(vol: f64, t: f64) -> Result<Self> {
        if !(vol > 0.0 && vol.is_finite()) {
            return Err(Error::invalid("vol", "must be finite and > 0"));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid("t", "must be finite and >= 0"));
        }
        Ok(BsContext { vol, t })
    }

    pub fn at_inception(vol: f64) -> Result<Self> {
        Self::new(vol, 0.0)
    }
}

fn d1(strike: f64, vol: f64, tau: f64, s: f64) -> f64 {
    ((s / strike).ln() + 0.5 * vol * vol * tau) / (vol * tau.sqrt())
}

/// Price at spot `s`. Returns the pay-off once `t >= maturity`.
pub fn bs_price(opt: &OptionSpec, ctx: &BsContext, s: f64) -> f64 {
    let tau = opt.maturity - ctx.t;
    if tau <= 0.0 {
        return opt.payoff(s);
    }
    let a = d1(opt.strike, ctx.vol, tau, s);
    let b = a - ctx.vol * tau.sqrt();
    match opt.kind {
        OptionKind::Call => s * normal::cdf(a) - opt.strike * normal::cdf(b),
        OptionKind::Put => opt.strike * normal::cdf(-b) - s * normal::cdf(-a),
    }
}

/// The coefficient `D_k` of the greek recurrence.
fn recurrence_coefficient(k: usize, delta: f64, inv_var: f64) -> f64 {
    let harmonic: f64 = (1..=k).map(|p| 1.0 / p as f64).sum();
    let factorial: f64 = (1..=k).map(|p| p as f64).product();
    let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
    sign * factorial * (delta - inv_var * harmonic)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cash greeks `[d_1, ..., d_{n_max}]`. Puts and calls share every greek
/// of order two and above.
pub fn cash_greeks(opt: &OptionSpec, ctx: &BsContext, s: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(1..=6).contains(&n_max) {
        return Err(Error::Domain(format!("greek order {n_max} outside 1..=6")));
    }
    let tau = opt.maturity - ctx.t;
    if tau <= 0.0 {
        return Err(Error::Domain(format!(
            "greeks are singular at t = {} >= maturity {}",
            ctx.t, opt.maturity
        )));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid("s", "must be finite and > 0"));
    }
    let vol_sqrt = ctx.vol * tau.sqrt();
    let a = d1(opt.strike, ctx.vol, tau, s);
    let mut d = Vec::with_capacity(n_max);
    d.push(match opt.kind {
        OptionKind::Call => s * normal::cdf(a),
        OptionKind::Put => -s * normal::cdf(-a),
    });
    if n_max == 1 {
        return Ok(d);
    }
    d.push(s * normal::pdf(a) / vol_sqrt);

    let delta = a / vol_sqrt + 1.0;
    let inv_var = 1.0 / (vol_sqrt * vol_sqrt);
    let coeffs: Vec<f64> = (0..=3).map(|k| recurrence_coefficient(k, delta, inv_var)).collect();
    for n in 0..n_max.saturating_sub(2) {
        // d[1 + k] holds d_{2+k}
        let next = (0..=n).map(|k| binomial(n, k) * coeffs[n - k] * d[1 + k]).sum();
        d.push(next);
    }
    Ok(d)
}

/// `E^BS[ int_0^T (S_t^2 d^2P/dS^2)^2 dt ]` for a put (the call value is identical),
/// via `K^2/(2 pi sigma^2) int_0^1 e^{-d^2/(1+u)} / sqrt(1-u^2) du` after `u = sin(theta)`.
pub fn put_gamma_integral(opt: &OptionSpec, sigma_bar: f64) -> Result<f64> {
    if !(sigma_bar > 0.0 && sigma_bar.is_finite()) {
        return Err(Error::invalid("sigma_bar", "must be finite and > 0"));
    }
    let var = sigma_bar * sigma_bar;
    let sqrt_t = opt.maturity.sqrt();
    let d = ((opt.spot / opt.strike).ln() - 0.5 * var * opt.maturity) / (sigma_bar * sqrt_t);
    let d_sq = d * d;
    let integrand = |theta: f64| (-d_sq / (1.0 + theta.sin())).exp();

    let rule = legendre64();
    let mut panels = 1;
    let mut previous = rule.integrate(0.0, FRAC_PI_2, integrand);
    let mut gap = f64::INFINITY;
    // refinement passes: one is enough unless d is extreme
    for _ in 0..8 {
        panels *= 2;
        let refined = rule.integrate_composite(0.0, FRAC_PI_2, panels, integrand);
        gap = (refined - previous).abs() / refined.abs();
        previous = refined;
        if gap <= 1e-13 || refined == 0.0 {
            let prefactor = opt.strike * opt.strike / (2.0 * PI * var);
            return Ok(prefactor * refined);
        }
    }
    Err(Error::NonConvergence {
        what: "gamma integral quadrature",
        iterations: panels,
        achieved: gap,
        required: 1e-13,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn near_zero_strike_call_is_worth_spot() {
        let opt = OptionSpec::call(1e-12, 1.0, 1.0).unwrap();
        let ctx = BsContext::at_inception(0.2).unwrap();
        assert!((bs_price(&opt, &ctx, 1.0) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn far_out_of_the_money_put() {
        let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
        let ctx = BsContext::at_inception(0.3).unwrap();
        assert!(bs_price(&opt, &ctx, 1e6) <= 1e-6);
    }

    #[test]
    fn price_at_maturity_is_payoff() {
        let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
        let ctx = BsContext::new(0.2, 1.0).unwrap();
        assert_eq!(bs_price(&opt, &ctx, 0.8), 1.0 - 0.8);
    }

    #[test]
    fn greeks_refuse_expiry() {
        let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
        let ctx = BsContext::new(0.2, 1.0).unwrap();
        assert!(matches!(cash_greeks(&opt, &ctx, 1.0, 4), Err(Error::Domain(_))));
        let ctx = BsContext::new(0.2, 0.0).unwrap();
        assert!(cash_greeks(&opt, &ctx, 1.0, 7).is_err());
        assert!(cash_greeks(&opt, &ctx, 1.0, 0).is_err());
    }

    #[test]
    fn third_greek_is_minus_gamma_times_delta() {
        let opt = OptionSpec::call(1.1, 0.7, 1.0).unwrap();
        let ctx = BsContext::new(0.25, 0.1).unwrap();
        let s = 0.93;
        let d = cash_greeks(&opt, &ctx, s, 3).unwrap();
        let tau = 0.6f64;
        let delta = d1(1.1, 0.25, tau, s) / (0.25 * tau.sqrt()) + 1.0;
        assert!((d[2] + d[1] * delta).abs() < 1e-15);
    }

    #[test]
    fn put_and_call_share_high_order_greeks() {
        let ctx = BsContext::at_inception(0.3).unwrap();
        let call = cash_greeks(&OptionSpec::call(1.0, 2.0, 1.0).unwrap(), &ctx, 1.2, 6).unwrap();
        let put = cash_greeks(&OptionSpec::put(1.0, 2.0, 1.0).unwrap(), &ctx, 1.2, 6).unwrap();
        assert!((call[0] - put[0] - 1.2).abs() < 1e-15);
        assert_eq!(&call[1..], &put[1..]);
    }

    #[test]
    fn gamma_integral_at_zero_d() {
        let sigma: f64 = 0.2;
        let opt = OptionSpec::put(1.3, 1.5, 1.3 * (0.5 * sigma * sigma * 1.5).exp()).unwrap();
        let v = put_gamma_integral(&opt, sigma).unwrap();
        let expected = 1.3 * 1.3 / (4.0 * sigma * sigma);
        assert!((v / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_integral_vanishes_for_tiny_strike() {
        let opt = OptionSpec::put(1e-12, 1.0, 1.0).unwrap();
        assert!(put_gamma_integral(&opt, 0.2).unwrap() < 1e-20);
    }

    #[test]
    fn gamma_integral_scales_with_strike_squared() {
        let base = put_gamma_integral(&OptionSpec::put(1.1, 0.8, 1.0).unwrap(), 0.25).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let scaled = put_gamma_integral(&OptionSpec::put(1.1 * c, 0.8, c).unwrap(), 0.25).unwrap();
            assert!((scaled / (c * c * base) - 1.0).abs() < 1e-12);
        }
    }
}
