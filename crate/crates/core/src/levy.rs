//! Exponential Lévy models `S = S0 * E(X)`: the jump measure of `X`, the
//! Merton parametrization, the reduced moments driving the asymptotic price
//! and the minimal entropy martingale measure.
//!
//! The drift `gamma` of a [`LevyModel`] is stored against the truncation
//! function `1_{|x| <= 1}`; [`LevyModel::mean_drift`] gives `E[X_1]`.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, AdaptiveOptions};
use crate::roots::increasing_root;

/// Log-jump support is truncated to `gamma_j +/- DEFAULT_TRUNCATION * delta_j`.
pub const DEFAULT_TRUNCATION: f64 = 8.0;

const MEMM_MAX_ITER: usize = 200;

/// Merton jump-diffusion `X_t = mu t + sigma W_t + sum_i (e^{Y_i} - 1)` with
/// `Y_i ~ N(gamma_j, delta_j^2)` arriving at rate `lambda_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MertonParams {
    pub sigma: f64,
    pub lambda_m: f64,
    pub gamma_j: f64,
    pub delta_j: f64,
    /// Drift of `X` net of jumps; `None` means it is fixed by the martingale condition.
    pub mu: Option<f64>,
}

impl MertonParams {
    pub fn new(sigma: f64, lambda_m: f64, gamma_j: f64, delta_j: f64, mu: Option<f64>) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be finite and >= 0"));
        }
        if !(lambda_m >= 0.0 && lambda_m.is_finite()) {
            return Err(Error::invalid("lambda_m", "must be finite and >= 0"));
        }
        if !gamma_j.is_finite() {
            return Err(Error::invalid("gamma_j", "must be finite"));
        }
        if !(delta_j > 0.0 && delta_j.is_finite()) {
            return Err(Error::invalid("delta_j", "must be finite and > 0"));
        }
        if sigma == 0.0 && lambda_m == 0.0 {
            return Err(Error::invalid("sigma", "sigma and lambda_m cannot both vanish"));
        }
        if let Some(m) = mu {
            if !m.is_finite() {
                return Err(Error::invalid("mu", "must be finite"));
            }
        }
        Ok(MertonParams {
            sigma,
            lambda_m,
            gamma_j,
            delta_j,
            mu,
        })
    }

    pub fn martingale(sigma: f64, lambda_m: f64, gamma_j: f64, delta_j: f64) -> Result<Self> {
        Self::new(sigma, lambda_m, gamma_j, delta_j, None)
    }

    /// `lambda_m * E[e^Y - 1]` over the untruncated jump law.
    pub fn jump_compensator(&self) -> f64 {
        self.lambda_m * (self.gamma_j + 0.5 * self.delta_j * self.delta_j).exp_m1()
    }

    pub fn is_martingale(&self) -> bool {
        self.mu.is_none()
    }
}

/// Lévy density of the Merton model: the law of `e^Y - 1` scaled by `lambda_m`.
/// Zero for `x <= -1`.
pub fn merton_levy_density(x: f64, p: &MertonParams) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    let z = ((1.0 + x).ln() - p.gamma_j) / p.delta_j;
    p.lambda_m / (p.delta_j * (x + 1.0) * (2.0 * PI).sqrt()) * (-0.5 * z * z).exp()
}

/// Lognormal jump measure, optionally exponentially tilted by `e^{tilt * x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogNormalJumps {
    pub intensity: f64,
    pub log_mean: f64,
    pub log_std: f64,
    /// Support is `log_mean +/- truncation * log_std` in log-jump space.
    pub truncation: f64,
    pub tilt: f64,
}

impl LogNormalJumps {
    pub fn log_support(&self) -> (f64, f64) {
        let half = self.truncation * self.log_std;
        (self.log_mean - half, self.log_mean + half)
    }

    /// Support in jump-size space `x = e^y - 1`.
    pub fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.log_support();
        (lo.exp_m1(), hi.exp_m1())
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi || x <= -1.0 {
            return 0.0;
        }
        let z = ((1.0 + x).ln() - self.log_mean) / self.log_std;
        let base = self.intensity / (self.log_std * (x + 1.0) * (2.0 * PI).sqrt()) * (-0.5 * z * z).exp();
        if self.tilt == 0.0 {
            base
        } else {
            base * (self.tilt * x).exp()
        }
    }

    /// Density of the pushforward under `x -> log(1 + x)`.
    pub fn log_density(&self, y: f64) -> f64 {
        let (lo, hi) = self.log_support();
        if y < lo || y > hi {
            return 0.0;
        }
        let z = (y - self.log_mean) / self.log_std;
        let base = self.intensity / (self.log_std * (2.0 * PI).sqrt()) * (-0.5 * z * z).exp();
        if self.tilt == 0.0 {
            base
        } else {
            base * (self.tilt * y.exp_m1()).exp()
        }
    }
}

/// A point mass of the jump measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    /// Relative jump size `z > -1`.
    pub size: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LevyMeasure {
    LogNormal(LogNormalJumps),
    Atoms(Vec<Atom>),
}

impl LevyMeasure {
    fn validate(&self) -> Result<()> {
        match self {
            LevyMeasure::LogNormal(j) => {
                if !(j.intensity >= 0.0 && j.log_std > 0.0 && j.truncation > 0.0) {
                    return Err(Error::invalid("measure", "lognormal jumps need intensity >= 0, log_std > 0, truncation > 0"));
                }
                if !(j.log_mean.is_finite() && j.tilt.is_finite()) {
                    return Err(Error::invalid("measure", "non-finite lognormal parameter"));
                }
            }
            LevyMeasure::Atoms(atoms) => {
                for a in atoms {
                    if !(a.size > -1.0 && a.size.is_finite()) {
                        return Err(Error::invalid("atoms", format!("jump size {} must exceed -1", a.size)));
                    }
                    if !(a.mass >= 0.0 && a.mass.is_finite()) {
                        return Err(Error::invalid("atoms", format!("mass {} must be >= 0", a.mass)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Total jump intensity as a rough magnitude for absolute tolerances.
    fn scale(&self) -> f64 {
        match self {
            LevyMeasure::LogNormal(j) => j.intensity,
            LevyMeasure::Atoms(atoms) => atoms.iter().map(|a| a.mass).sum(),
        }
    }

    /// `int f(x) nu(dx)`: exact summation for atoms, adaptive quadrature otherwise.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        self.integrate_with(f, 1e-12)
    }

    pub fn integrate_with(&self, f: impl Fn(f64) -> f64, rel_tol: f64) -> Result<f64> {
        match self {
            LevyMeasure::Atoms(atoms) => Ok(atoms.iter().map(|a| a.mass * f(a.size)).sum()),
            LevyMeasure::LogNormal(j) => {
                if j.intensity == 0.0 {
                    return Ok(0.0);
                }
                let (lo, hi) = j.support();
                let opts = AdaptiveOptions {
                    rel_tol,
                    abs_tol: 1e-15 * self.scale(),
                    initial_panels: 8,
                    max_intervals: 4000,
                };
                integrate_adaptive(|x| f(x) * j.density(x), lo, hi, opts).map(|r| r.value)
            }
        }
    }

    /// Whether the measure charges negative and positive jumps.
    pub fn sides(&self) -> (bool, bool) {
        match self {
            LevyMeasure::Atoms(atoms) => (
                atoms.iter().any(|a| a.mass > 0.0 && a.size < 0.0),
                atoms.iter().any(|a| a.mass > 0.0 && a.size > 0.0),
            ),
            LevyMeasure::LogNormal(j) => {
                if j.intensity == 0.0 {
                    return (false, false);
                }
                let (lo, hi) = j.support();
                (lo < 0.0, hi > 0.0)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sides() == (false, false)
    }

    /// The measure `e^{u x} nu(dx)`.
    pub fn tilted(&self, u: f64) -> LevyMeasure {
        match self {
            LevyMeasure::LogNormal(j) => LevyMeasure::LogNormal(LogNormalJumps { tilt: j.tilt + u, ..*j }),
            LevyMeasure::Atoms(atoms) => LevyMeasure::Atoms(
                atoms
                    .iter()
                    .map(|a| Atom {
                        size: a.size,
                        mass: a.mass * (u * a.size).exp(),
                    })
                    .collect(),
            ),
        }
    }
}

/// How the drift of a model is specified at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drift {
    /// Solve for the drift that makes `X` (hence `S`) a martingale.
    Martingale,
    /// Drift against the truncation `1_{|x| <= 1}`.
    Triplet(f64),
}

/// Lévy process `X` with diffusion volatility, jump measure and drift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyModel {
    sigma: f64,
    measure: LevyMeasure,
    gamma: f64,
}

impl LevyModel {
    pub fn new(sigma: f64, measure: LevyMeasure, drift: Drift) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be finite and >= 0"));
        }
        measure.validate()?;
        if sigma == 0.0 && measure.is_zero() {
            return Err(Error::invalid("sigma", "model has neither diffusion nor jumps"));
        }
        let gamma = match drift {
            Drift::Triplet(g) => {
                if !g.is_finite() {
                    return Err(Error::invalid("gamma", "must be finite"));
                }
                g
            }
            Drift::Martingale => -measure.integrate(|x| if x.abs() > 1.0 { x } else { 0.0 })?,
        };
        Ok(LevyModel { sigma, measure, gamma })
    }

    /// Merton model with log-jump support truncated at `truncation` standard deviations.
    pub fn merton(p: &MertonParams, truncation: f64) -> Result<Self> {
        if !(truncation > 0.0) {
            return Err(Error::invalid("truncation", "must be > 0"));
        }
        let measure = LevyMeasure::LogNormal(LogNormalJumps {
            intensity: p.lambda_m,
            log_mean: p.gamma_j,
            log_std: p.delta_j,
            truncation,
            tilt: 0.0,
        });
        let drift = match p.mu {
            None => Drift::Martingale,
            Some(mu) => Drift::Triplet(mu + measure.integrate(|x| if x.abs() <= 1.0 { x } else { 0.0 })?),
        };
        Self::new(p.sigma, measure, drift)
    }

    pub fn from_atoms(sigma: f64, atoms: Vec<Atom>, drift: Drift) -> Result<Self> {
        Self::new(sigma, LevyMeasure::Atoms(atoms), drift)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn measure(&self) -> &LevyMeasure {
        &self.measure
    }

    /// Triplet drift against `1_{|x| <= 1}`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `E[X_1]`.
    pub fn mean_drift(&self) -> Result<f64> {
        Ok(self.gamma + self.measure.integrate(|x| if x.abs() > 1.0 { x } else { 0.0 })?)
    }

    /// Drift of `X` net of its (uncompensated) jumps.
    pub fn pure_drift(&self) -> Result<f64> {
        Ok(self.gamma - self.measure.integrate(|x| if x.abs() <= 1.0 { x } else { 0.0 })?)
    }

    pub fn is_martingale(&self, tol: f64) -> Result<bool> {
        Ok(self.mean_drift()?.abs() <= tol)
    }

    /// First and second derivative of [`ell`] at `u`.
    pub fn ell_derivatives(&self, u: f64) -> Result<(f64, f64)> {
        let first = self.mean_drift()? + self.sigma * self.sigma * u + self.measure.integrate(|x| x * (u * x).exp_m1())?;
        let second = self.sigma * self.sigma + self.measure.integrate(|x| x * x * (u * x).exp())?;
        Ok((first, second))
    }

    fn is_monotone(&self) -> Result<bool> {
        if self.sigma > 0.0 {
            return Ok(false);
        }
        Ok(match self.measure.sides() {
            (true, true) => false,
            (false, true) => self.pure_drift()? >= 0.0,
            (true, false) => self.pure_drift()? <= 0.0,
            (false, false) => true,
        })
    }
}

/// The reduced parameters of the asymptotic expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupParams {
    /// `sigma^2 + int x^2 nu(dx)`.
    pub sigma_bar_sq: f64,
    pub m3: f64,
    pub m4: f64,
}

// roundoff allowance for the sign invariants of closed-form moments
const MOMENT_ROUNDOFF: f64 = 1e-13;

impl GroupParams {
    pub fn new(sigma_bar_sq: f64, m3: f64, m4: f64) -> Result<Self> {
        if !(sigma_bar_sq > 0.0 && sigma_bar_sq.is_finite()) {
            return Err(Error::invalid("sigma_bar_sq", "must be finite and > 0"));
        }
        if !(m3.is_finite() && m4.is_finite()) {
            return Err(Error::invalid("m3/m4", "must be finite"));
        }
        let gp = GroupParams { sigma_bar_sq, m3, m4 };
        if m4 < -MOMENT_ROUNDOFF {
            return Err(Error::invalid("m4", format!("{m4} is negative")));
        }
        if gp.cauchy_schwarz_gap() < -MOMENT_ROUNDOFF * sigma_bar_sq.max(1.0) {
            return Err(Error::invalid("m3", "m3^2 exceeds m4 * sigma_bar_sq"));
        }
        Ok(gp)
    }

    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar_sq.sqrt()
    }

    /// `m4 * sigma_bar^2 - m3^2`, non-negative for any Lévy measure.
    pub fn cauchy_schwarz_gap(&self) -> f64 {
        self.m4 * self.sigma_bar_sq - self.m3 * self.m3
    }

    /// `m4 - m3^2 / sigma_bar^2`, floored at zero to absorb roundoff.
    pub fn incompleteness(&self) -> f64 {
        (self.m4 - self.m3 * self.m3 / self.sigma_bar_sq).max(0.0)
    }
}

/// Closed-form group parameters of the (untruncated) Merton model.
pub fn group_params_merton(p: &MertonParams) -> Result<GroupParams> {
    let (g, d2) = (p.gamma_j, p.delta_j * p.delta_j);
    let e1 = (g + 0.5 * d2).exp();
    let e2 = (2.0 * g + 2.0 * d2).exp();
    let e3 = (3.0 * g + 4.5 * d2).exp();
    let e4 = (4.0 * g + 8.0 * d2).exp();
    let lam = p.lambda_m;
    GroupParams::new(
        p.sigma * p.sigma + lam * (e2 - 2.0 * e1 + 1.0),
        lam * (e3 - 3.0 * e2 + 3.0 * e1 - 1.0),
        lam * (e4 - 4.0 * e3 + 6.0 * e2 - 4.0 * e1 + 1.0),
    )
}

/// Group parameters by direct integration of the model's measure.
pub fn group_params_numeric(m: &LevyModel) -> Result<GroupParams> {
    let tol = 1e-12;
    let m2 = m.measure.integrate_with(|x| x * x, tol)?;
    let m3 = m.measure.integrate_with(|x| x * x * x, tol)?;
    let m4 = m.measure.integrate_with(|x| x.powi(4), tol)?;
    GroupParams::new(m.sigma * m.sigma + m2, m3, m4)
}

/// `ell(u) = gamma u + sigma^2 u^2 / 2 + int (e^{ux} - 1 - ux 1_{|x|<=1}) nu(dx)`,
/// the Laplace exponent of `X`.
pub fn ell(u: f64, m: &LevyModel) -> Result<f64> {
    let jumps = m.measure.integrate(|x| {
        if x.abs() <= 1.0 {
            (u * x).exp_m1() - u * x
        } else {
            (u * x).exp_m1()
        }
    })?;
    Ok(m.gamma * u + 0.5 * m.sigma * m.sigma * u * u + jumps)
}

/// Minimizer `u* = -alpha phi*` of `ell`, independent of `alpha`.
pub fn memm_exponent(m: &LevyModel) -> Result<f64> {
    if m.is_monotone()? {
        return Err(Error::Domain(
            "model is a.s. monotone: ell has no interior minimum".to_string(),
        ));
    }
    let mut failure = None;
    let outcome = increasing_root(
        "MEMM tilt search",
        |u| match m.ell_derivatives(u) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                (f64::NAN, f64::NAN)
            }
        },
        0.0,
        |_, g, dg| g.abs() <= 1e-10 * (1.0 + dg.abs()),
        MEMM_MAX_ITER,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let outcome = outcome?;
    if outcome.residual.abs() > 1e-10 * (1.0 + outcome.slope.abs()) {
        return Err(Error::NonConvergence {
            what: "MEMM tilt search",
            iterations: outcome.iterations,
            achieved: outcome.residual.abs(),
            required: 1e-10 * (1.0 + outcome.slope.abs()),
        });
    }
    Ok(outcome.x)
}

/// The optimal exposure `phi*` with `ell(-alpha phi*) = inf ell`.
pub fn find_memm_tilt(m: &LevyModel, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", "must be finite and > 0"));
    }
    Ok(-memm_exponent(m)? / alpha)
}

/// Tilts the measure by `e^{-alpha phi* x}` and resets the drift to the
/// martingale value. Fails if `phi*` is not a stationary point of `ell`.
pub fn tilt_measure(m: &LevyModel, alpha: f64, phi_star: f64) -> Result<LevyModel> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", "must be finite and > 0"));
    }
    tilt_by_exponent(m, -alpha * phi_star)
}

fn tilt_by_exponent(m: &LevyModel, u: f64) -> Result<LevyModel> {
    // drift of X under the tilted measure (Girsanov); zero at the MEMM
    let (residual, _) = m.ell_derivatives(u)?;
    let scale = 1.0 + m.sigma * m.sigma * u.abs() + m.measure.integrate(|x| x.abs())?;
    if residual.abs() > 1e-9 * scale {
        return Err(Error::Internal(format!(
            "tilted drift residual {residual:.3e} exceeds 1e-9"
        )));
    }
    LevyModel::new(m.sigma, m.measure.tilted(u), Drift::Martingale)
}

/// The model under the minimal entropy martingale measure.
pub fn memm_model(m: &LevyModel) -> Result<LevyModel> {
    tilt_by_exponent(m, memm_exponent(m)?)
}
