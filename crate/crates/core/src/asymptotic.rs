//! Closed-form second-order indifference price around Black-Scholes, the
//! implied bid-ask spread and the jump-risk sensitivity of an option.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bs::{bs_price, cash_greeks, put_gamma_integral, BsContext, OptionKind, OptionSpec};
use crate::error::{Error, Result};
use crate::levy::GroupParams;

/// Term-by-term breakdown of the asymptotic seller's price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticPrice {
    /// Black-Scholes price at the total volatility.
    pub bs_term: f64,
    /// Skewness correction, `m3 T / 6 * d_3`.
    pub m3_term: f64,
    /// Kurtosis correction, `m4 T / 24 * d_4`.
    pub m4_term: f64,
    /// Second-order skewness correction in `m3^2`.
    pub m3sq_term: f64,
    /// Risk-aversion premium, proportional to `alpha`.
    pub nonlinear_term: f64,
    pub total: f64,
    pub alpha: f64,
}

impl AsymptoticPrice {
    /// The price at zero risk aversion, `E*[H]` to second order.
    pub fn linear_part(&self) -> f64 {
        self.bs_term + self.m3_term + self.m4_term + self.m3sq_term
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("alpha", "must be finite and >= 0"))
    }
}

fn validated(gp: &GroupParams) -> Result<GroupParams> {
    GroupParams::new(gp.sigma_bar_sq, gp.m3, gp.m4).map_err(|e| Error::Domain(e.to_string()))
}

/// Asymptotic indifference price of a European put or call.
///
/// Calls have unbounded pay-offs and sit outside the hypotheses under which
/// the expansion is established; see [`within_hypotheses`].
pub fn asymptotic_price(opt: &OptionSpec, gp: &GroupParams, alpha: f64) -> Result<AsymptoticPrice> {
    check_alpha(alpha)?;
    let gp = validated(gp)?;
    let sigma_bar = gp.sigma_bar();
    let ctx = BsContext::at_inception(sigma_bar)?;
    let s0 = opt.spot;
    let t = opt.maturity;

    let bs_term = bs_price(opt, &ctx, s0);
    let d = cash_greeks(opt, &ctx, s0, 6)?;
    let (d3, d4, d5, d6) = (d[2], d[3], d[4], d[5]);

    let m3_term = gp.m3 * t / 6.0 * d3;
    let m4_term = gp.m4 * t / 24.0 * d4;
    let m3sq_term = gp.m3 * gp.m3 * t * t / 72.0 * (6.0 * d3 + 18.0 * d4 + 9.0 * d5 + d6);
    let nonlinear_term = alpha / 8.0 * gp.incompleteness() * jump_sensitivity(opt, sigma_bar)?;
    Ok(AsymptoticPrice {
        bs_term,
        m3_term,
        m4_term,
        m3sq_term,
        nonlinear_term,
        total: bs_term + m3_term + m4_term + m3sq_term + nonlinear_term,
        alpha,
    })
}

/// Whether the expansion's bounded pay-off hypothesis covers this contract.
pub fn within_hypotheses(opt: &OptionSpec) -> bool {
    opt.kind == OptionKind::Put
}

/// Seller's minus buyer's price to second order:
/// `alpha/4 (m4 - m3^2/sigma_bar^2) * jump_sensitivity`.
pub fn bid_ask_spread(opt: &OptionSpec, gp: &GroupParams, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let gp = validated(gp)?;
    Ok(alpha / 4.0 * gp.incompleteness() * jump_sensitivity(opt, gp.sigma_bar())?)
}

/// `E^BS[ int_0^T (S_t^2 Gamma(t, S_t))^2 dt ]`; identical for puts and calls.
pub fn jump_sensitivity(opt: &OptionSpec, sigma_bar: f64) -> Result<f64> {
    let put = OptionSpec { kind: OptionKind::Put, ..*opt };
    put_gamma_integral(&put, sigma_bar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Spot,
    Alpha,
    Strike,
    Maturity,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spot" | "s0" => Ok(SweepAxis::Spot),
            "alpha" => Ok(SweepAxis::Alpha),
            "strike" | "k" => Ok(SweepAxis::Strike),
            "maturity" | "t" => Ok(SweepAxis::Maturity),
            other => Err(Error::Usage(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// A monotone grid of values for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn new(axis: SweepAxis, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Usage("sweep grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("sweep grid has non-finite values".into()));
        }
        let increasing = values.windows(2).all(|w| w[1] > w[0]);
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Usage("sweep grid must be strictly monotone".into()));
        }
        Ok(Sweep { axis, values })
    }

    /// `n` evenly spaced points from `a` to `b` inclusive.
    pub fn linspace(axis: SweepAxis, a: f64, b: f64, n: usize) -> Result<Self> {
        let values = match n {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        };
        Self::new(axis, values)
    }

    /// The contract and risk aversion at grid point `value`.
    pub fn apply(&self, template: &OptionSpec, alpha: f64, value: f64) -> Result<(OptionSpec, f64)> {
        Ok(match self.axis {
            SweepAxis::Spot => (template.with_spot(value)?, alpha),
            SweepAxis::Strike => (template.with_strike(value)?, alpha),
            SweepAxis::Maturity => (template.with_maturity(value)?, alpha),
            SweepAxis::Alpha => (*template, value),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub abscissa: f64,
    pub price: AsymptoticPrice,
}

/// Evaluates [`asymptotic_price`] along a sweep, in grid order.
pub fn price_curve(template: &OptionSpec, gp: &GroupParams, alpha: f64, sweep: &Sweep) -> Result<Vec<CurvePoint>> {
    sweep
        .values
        .par_iter()
        .map(|&v| {
            let (opt, a) = sweep.apply(template, alpha, v)?;
            Ok(CurvePoint {
                abscissa: v,
                price: asymptotic_price(&opt, gp, a)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{group_params_merton, MertonParams};

    fn reference_gp() -> GroupParams {
        group_params_merton(&MertonParams::martingale(0.2, 5.0, -0.05, 0.1).unwrap()).unwrap()
    }

    #[test]
    fn gaussian_limit_is_black_scholes() {
        let gp = GroupParams::new(0.04, 0.0, 0.0).unwrap();
        let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
        for alpha in [0.0, 3.0, 10.0] {
            let p = asymptotic_price(&opt, &gp, alpha).unwrap();
            let bs = bs_price(&opt, &BsContext::at_inception(0.2).unwrap(), 1.0);
            assert_eq!(p.total, bs);
            assert_eq!(p.nonlinear_term, 0.0);
        }
    }

    #[test]
    fn zero_risk_aversion_is_linear_part() {
        let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
        let p = asymptotic_price(&opt, &reference_gp(), 0.0).unwrap();
        assert_eq!(p.nonlinear_term, 0.0);
        assert_eq!(p.total, p.linear_part());
    }

    #[test]
    fn spread_is_twice_nonlinear_term() {
        let opt = OptionSpec::put(0.9, 0.5, 1.0).unwrap();
        let gp = reference_gp();
        let p = asymptotic_price(&opt, &gp, 7.0).unwrap();
        let spread = bid_ask_spread(&opt, &gp, 7.0).unwrap();
        assert!((spread - 2.0 * p.nonlinear_term).abs() <= 1e-16 * spread);
        assert_eq!(bid_ask_spread(&opt, &gp, 0.0).unwrap(), 0.0);
        let gauss = GroupParams::new(0.05, 0.0, 0.0).unwrap();
        assert_eq!(bid_ask_spread(&opt, &gauss, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
        let bad = GroupParams {
            sigma_bar_sq: 0.04,
            m3: 0.1,
            m4: 0.01,
        };
        assert!(matches!(asymptotic_price(&opt, &bad, 1.0), Err(Error::Domain(_))));
        assert!(asymptotic_price(&opt, &reference_gp(), -1.0).is_err());
    }

    #[test]
    fn sensitivity_peaks_near_the_money() {
        let at = |k: f64| jump_sensitivity(&OptionSpec::put(k, 1.0, 1.0).unwrap(), 0.2).unwrap();
        assert!(at(1.0) > at(0.5) && at(1.0) > at(2.0));
    }

    #[test]
    fn sweep_validation() {
        assert!(Sweep::new(SweepAxis::Spot, vec![]).is_err());
        assert!(Sweep::new(SweepAxis::Spot, vec![1.0, 0.5, 2.0]).is_err());
        assert!(Sweep::new(SweepAxis::Alpha, vec![3.0]).is_ok());
        assert_eq!(Sweep::linspace(SweepAxis::Alpha, 0.0, 10.0, 3).unwrap().values, vec![0.0, 5.0, 10.0]);
    }

    #[test]
    fn single_point_curve_matches_direct_price() {
        let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
        let gp = reference_gp();
        let sweep = Sweep::new(SweepAxis::Spot, vec![1.1]).unwrap();
        let rows = price_curve(&opt, &gp, 10.0, &sweep).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].price, asymptotic_price(&opt.with_spot(1.1).unwrap(), &gp, 10.0).unwrap());
    }

    #[test]
    fn alpha_curve_is_affine() {
        let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
        let sweep = Sweep::new(SweepAxis::Alpha, vec![0.0, 5.0, 10.0]).unwrap();
        let rows = price_curve(&opt, &reference_gp(), 0.0, &sweep).unwrap();
        let slope = (rows[1].price.total - rows[0].price.total) / 5.0;
        let predicted = rows[0].price.total + 10.0 * slope;
        assert!((rows[2].price.total - predicted).abs() < 1e-14);
    }
}
