//! Finite-difference solver for the indifference-price HJB equation in
//! log-spot: diffusion implicit, jump and hedging terms explicit, with a
//! per-node minimization over the hedge.
//!
//! The hedge `theta` is the cash amount held in the underlying: it multiplies
//! the relative jump size `e^z - 1` and is compared against `dP/dx`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::bs::{OptionKind, OptionSpec};
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::levy::{LevyMeasure, LevyModel};
use crate::normal;
use crate::quadrature::{integrate_adaptive, AdaptiveOptions};
use crate::roots::increasing_root;

/// Exponent bound inside the Hamiltonian.
pub const EXPONENT_CLAMP: f64 = 700.0;
const NEWTON_MAX_ITER: usize = 100;

/// Space, time and jump discretization plus the risk aversion.
///
/// Nodes are `x_j = x0 + j d` for `j = 0..=2 m_half`; jumps sit at `k d` for
/// `|k| <= k_half`. `alpha = 0` selects the linear (risk-neutral) equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PideGrid {
    pub n_time: usize,
    pub m_half: usize,
    pub x0: f64,
    pub d: f64,
    pub k_half: usize,
    pub alpha: f64,
}

impl PideGrid {
    pub fn new(n_time: usize, m_half: usize, x0: f64, d: f64, k_half: usize, alpha: f64) -> Result<Self> {
        if n_time < 1 {
            return Err(Error::invalid("n_time", "must be >= 1"));
        }
        if m_half < 2 {
            return Err(Error::invalid("m_half", "must be >= 2"));
        }
        if k_half < 1 || k_half > m_half {
            return Err(Error::invalid("k_half", "must lie in 1..=m_half"));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid("d", "must be finite and > 0"));
        }
        if !x0.is_finite() {
            return Err(Error::invalid("x0", "must be finite"));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", "must be finite and >= 0"));
        }
        Ok(PideGrid {
            n_time,
            m_half,
            x0,
            d,
            k_half,
            alpha,
        })
    }

    /// 40 time steps, 200 space steps over `log S in [-1.2, 1.2]`, 100 jump cells.
    pub fn reference(alpha: f64) -> Result<Self> {
        Self::new(40, 100, -1.2, 0.012, 50, alpha)
    }

    pub fn n_nodes(&self) -> usize {
        2 * self.m_half + 1
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.d
    }

    pub fn x_max(&self) -> f64 {
        self.x(2 * self.m_half)
    }

    /// Halves the time and space steps over the same domain and jump range.
    pub fn refined(&self) -> Self {
        PideGrid {
            n_time: 2 * self.n_time,
            m_half: 2 * self.m_half,
            d: 0.5 * self.d,
            k_half: 2 * self.k_half,
            ..*self
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.n_time, self.m_half, self.x0, self.d, self.k_half, alpha)
    }
}

/// Jump measure of `log(1 + z)` lumped onto the cells `((k - 1/2) d, (k + 1/2) d]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyAtoms {
    pub k_half: usize,
    /// `masses[k + k_half]`; the `k = 0` entry is always zero.
    pub masses: Vec<f64>,
    /// Mass of the `k = 0` cell, dropped from the dynamics.
    pub center_mass: f64,
    /// `int (e^y - 1)^2` over the `k = 0` cell.
    pub center_second_moment: f64,
    /// Mass beyond the outermost cells.
    pub tail_mass: f64,
}

impl LevyAtoms {
    pub fn zero(k_half: usize) -> Self {
        LevyAtoms {
            k_half,
            masses: vec![0.0; 2 * k_half + 1],
            center_mass: 0.0,
            center_second_moment: 0.0,
            tail_mass: 0.0,
        }
    }

    pub fn from_masses(k_half: usize, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != 2 * k_half + 1 {
            return Err(Error::invalid("masses", "length must be 2 k_half + 1"));
        }
        if masses.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::invalid("masses", "must be finite and >= 0"));
        }
        if masses[k_half] != 0.0 {
            return Err(Error::invalid("masses", "the k = 0 mass must be zero"));
        }
        Ok(LevyAtoms {
            k_half,
            masses,
            ..Self::zero(k_half)
        })
    }

    pub fn mass(&self, k: isize) -> f64 {
        let idx = k + self.k_half as isize;
        if idx < 0 {
            return 0.0;
        }
        self.masses.get(idx as usize).copied().unwrap_or(0.0)
    }

    /// Mass retained in the dynamics.
    pub fn active_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.masses.iter().all(|&m| m == 0.0)
    }
}

/// Lumps the model's log-jump measure onto the grid with the default tail
/// tolerance of `1e-6` of the total intensity.
pub fn discretize_levy(m: &LevyModel, grid: &PideGrid) -> Result<LevyAtoms> {
    discretize_levy_with(m, grid, 1e-6)
}

pub fn discretize_levy_with(m: &LevyModel, grid: &PideGrid, tail_tolerance: f64) -> Result<LevyAtoms> {
    let k_half = grid.k_half;
    let d = grid.d;
    let mut atoms = LevyAtoms::zero(k_half);
    let total;
    match m.measure() {
        LevyMeasure::Atoms(list) => {
            total = list.iter().map(|a| a.mass).sum::<f64>();
            for a in list.iter().filter(|a| a.mass > 0.0) {
                let y = a.size.ln_1p();
                let k = (y / d - 0.5).ceil() as i64;
                if k == 0 {
                    atoms.center_mass += a.mass;
                    atoms.center_second_moment += a.mass * a.size * a.size;
                } else if k.unsigned_abs() as usize <= k_half {
                    atoms.masses[(k + k_half as i64) as usize] += a.mass;
                } else {
                    atoms.tail_mass += a.mass;
                }
            }
        }
        LevyMeasure::LogNormal(j) => {
            if j.intensity == 0.0 {
                return Ok(atoms);
            }
            let (lo, hi) = j.log_support();
            let opts = AdaptiveOptions::with_tolerance(1e-12, 1e-16 * j.intensity);
            let cell_mass = |a: f64, b: f64| -> Result<f64> {
                let (a, b) = (a.max(lo), b.min(hi));
                if b <= a {
                    return Ok(0.0);
                }
                if j.tilt == 0.0 {
                    let z = |y: f64| (y - j.log_mean) / j.log_std;
                    Ok(j.intensity * normal::interval_prob(z(a), z(b)))
                } else {
                    Ok(integrate_adaptive(|y| j.log_density(y), a, b, opts)?.value)
                }
            };
            total = cell_mass(lo, hi)?;
            let mut covered = 0.0;
            for k in -(k_half as i64)..=(k_half as i64) {
                let a = (k as f64 - 0.5) * d;
                let b = (k as f64 + 0.5) * d;
                let mass = cell_mass(a, b)?;
                covered += mass;
                if k == 0 {
                    atoms.center_mass = mass;
                    let (a, b) = (a.max(lo), b.min(hi));
                    if b > a {
                        atoms.center_second_moment =
                            integrate_adaptive(|y| y.exp_m1().powi(2) * j.log_density(y), a, b, opts)?.value;
                    }
                } else {
                    atoms.masses[(k + k_half as i64) as usize] = mass;
                }
            }
            atoms.tail_mass = (total - covered).max(0.0);
        }
    }
    if atoms.tail_mass > tail_tolerance * total {
        return Err(Error::Range(format!(
            "jump mass {:.3e} falls outside |k| <= {} cells ({:.3e} of the intensity); increase k_half or d",
            atoms.tail_mass,
            k_half,
            atoms.tail_mass / total
        )));
    }
    Ok(atoms)
}

/// Terminal and boundary condition `sign * (K - e^x)^+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PutClaim {
    pub strike: f64,
    /// `+1` for the claim sold, `-1` for the claim bought.
    pub sign: f64,
}

impl PutClaim {
    pub fn value(&self, x: f64) -> f64 {
        self.sign * (self.strike - x.exp()).max(0.0)
    }
}

/// One active jump cell seen from a node.
#[derive(Debug, Clone, Copy)]
pub struct JumpTerm {
    /// `e^{kd} - 1`.
    pub growth: f64,
    /// `P_{i+1, j+k} - P_{i+1, j}`.
    pub dp: f64,
    pub mass: f64,
}

/// Everything the explicit terms at node `j` need from the next time row.
#[derive(Debug, Clone, Default)]
pub struct NodeStencil {
    /// Central-difference `dP/dx`.
    pub delta: f64,
    pub jumps: Vec<JumpTerm>,
}

impl NodeStencil {
    /// Gathers node `j` (interior) of `p_next`, extending the row beyond
    /// either end with `claim`.
    pub fn gather(j: usize, p_next: &[f64], grid: &PideGrid, atoms: &LevyAtoms, claim: &PutClaim) -> Self {
        let mut s = NodeStencil::default();
        s.fill(j, p_next, grid, atoms, claim);
        s
    }

    fn fill(&mut self, j: usize, p_next: &[f64], grid: &PideGrid, atoms: &LevyAtoms, claim: &PutClaim) {
        let n = p_next.len() as isize;
        let pj = p_next[j];
        self.delta = (p_next[j + 1] - p_next[j - 1]) / (2.0 * grid.d);
        self.jumps.clear();
        let k_half = atoms.k_half as isize;
        for k in -k_half..=k_half {
            let mass = atoms.masses[(k + k_half) as usize];
            if mass == 0.0 {
                continue;
            }
            let idx = j as isize + k;
            let neighbour = if (0..n).contains(&idx) {
                p_next[idx as usize]
            } else {
                claim.value(grid.x0 + idx as f64 * grid.d)
            };
            self.jumps.push(JumpTerm {
                growth: (k as f64 * grid.d).exp_m1(),
                dp: neighbour - pj,
                mass,
            });
        }
    }

    /// The explicit jump integral `B_j`.
    pub fn jump_drift(&self) -> f64 {
        self.jumps
            .iter()
            .map(|t| (t.dp - t.growth * self.delta) * t.mass)
            .sum()
    }
}

/// Value of the Hamiltonian and whether an exponent was clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianValue {
    pub value: f64,
    pub clamped: bool,
}

struct Local {
    value: f64,
    grad: f64,
    curvature: f64,
    clamped: bool,
}

fn local(s: &NodeStencil, theta: f64, alpha: f64, sigma: f64) -> Local {
    let var = sigma * sigma;
    let gap = theta - s.delta;
    let mut value = 0.5 * alpha * var * gap * gap;
    let mut grad = alpha * var * gap;
    let mut curvature = alpha * var;
    let mut clamped = false;
    for t in &s.jumps {
        let raw = alpha * (t.dp - t.growth * theta);
        let y = raw.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP);
        if y != raw {
            clamped = true;
        }
        let em1 = y.exp_m1();
        value += (em1 - y) * t.mass / alpha;
        grad -= t.growth * em1 * t.mass;
        if y == raw {
            curvature += alpha * t.growth * t.growth * (em1 + 1.0) * t.mass;
        }
    }
    Local {
        value,
        grad,
        curvature,
        clamped,
    }
}

/// `H_j(P_{i+1}, theta)`; identically zero when `alpha = 0`.
pub fn hamiltonian(s: &NodeStencil, theta: f64, alpha: f64, sigma: f64) -> HamiltonianValue {
    if alpha == 0.0 {
        return HamiltonianValue {
            value: 0.0,
            clamped: false,
        };
    }
    let l = local(s, theta, alpha, sigma);
    HamiltonianValue {
        value: l.value,
        clamped: l.clamped,
    }
}

/// Minimizer of the Hamiltonian at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianMin {
    pub theta: f64,
    pub value: f64,
    pub iterations: usize,
    /// `dH/dtheta` at `theta`.
    pub residual: f64,
    pub clamped: bool,
}

/// Minimizes the strictly convex Hamiltonian over the hedge by safeguarded
/// Newton from the central-difference delta.
///
/// With `alpha = 0` the minimum value is zero and the returned hedge is the
/// quadratic-hedging ratio, the small-`alpha` limit of the minimizer.
pub fn minimize_hamiltonian(s: &NodeStencil, alpha: f64, sigma: f64) -> Result<HamiltonianMin> {
    let var = sigma * sigma;
    let jumps_active = s.jumps.iter().any(|t| t.growth != 0.0);
    if var == 0.0 && !jumps_active {
        return Ok(HamiltonianMin {
            theta: s.delta,
            value: 0.0,
            iterations: 0,
            residual: 0.0,
            clamped: false,
        });
    }
    if alpha == 0.0 {
        let num: f64 = var * s.delta + s.jumps.iter().map(|t| t.growth * t.dp * t.mass).sum::<f64>();
        let den: f64 = var + s.jumps.iter().map(|t| t.growth * t.growth * t.mass).sum::<f64>();
        return Ok(HamiltonianMin {
            theta: num / den,
            value: 0.0,
            iterations: 0,
            residual: 0.0,
            clamped: false,
        });
    }

    let last = std::cell::Cell::new((0.0, false));
    let outcome = increasing_root(
        "hedge minimization",
        |theta| {
            let l = local(s, theta, alpha, sigma);
            last.set((l.value, l.clamped));
            (l.grad, l.curvature)
        },
        s.delta,
        |theta, g, dg| {
            let value = last.get().0;
            g.abs() <= 1e-10 * (1.0 + value.abs()) && g.abs() <= 1e-12 * dg * (1.0 + theta.abs())
        },
        NEWTON_MAX_ITER,
    )?;
    let (value, clamped) = last.get();
    Ok(HamiltonianMin {
        theta: outcome.x,
        value,
        iterations: outcome.iterations,
        residual: outcome.residual,
        clamped,
    })
}

/// Solver switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PideOptions {
    /// Evaluate per-node explicit terms on the rayon pool.
    pub parallel: bool,
    pub keep_hedge: bool,
    /// Add the second moment of the dropped `k = 0` cell to the diffusion variance.
    pub fold_center_mass: bool,
    pub tail_tolerance: f64,
}

impl Default for PideOptions {
    fn default() -> Self {
        PideOptions {
            parallel: false,
            keep_hedge: false,
            fold_center_mass: false,
            tail_tolerance: 1e-6,
        }
    }
}

/// Counters aggregated over the minimizations of a step or a solve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PideDiagnostics {
    pub minimizations: usize,
    pub newton_iterations: usize,
    pub max_residual: f64,
    pub clamp_hits: usize,
}

impl PideDiagnostics {
    pub fn mean_newton_iterations(&self) -> f64 {
        if self.minimizations == 0 {
            0.0
        } else {
            self.newton_iterations as f64 / self.minimizations as f64
        }
    }

    fn absorb(&mut self, other: &PideDiagnostics) {
        self.minimizations += other.minimizations;
        self.newton_iterations += other.newton_iterations;
        self.max_residual = self.max_residual.max(other.max_residual);
        self.clamp_hits += other.clamp_hits;
    }
}

/// Output of one backward step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub row: Vec<f64>,
    /// Minimizing hedge per node; boundary entries are zero.
    pub hedge: Vec<f64>,
    pub diagnostics: PideDiagnostics,
}

/// The implicit-explicit scheme for one claim on one grid.
#[derive(Debug, Clone)]
pub struct PideSolver<'a> {
    grid: PideGrid,
    atoms: &'a LevyAtoms,
    sigma: f64,
    h: f64,
    claim: PutClaim,
    parallel: bool,
    // tridiagonal coefficients: -lower P_{j-1} + diag P_j - upper P_{j+1}
    lower: f64,
    diag: f64,
    upper: f64,
}

impl<'a> PideSolver<'a> {
    pub fn new(grid: &PideGrid, atoms: &'a LevyAtoms, sigma: f64, maturity: f64, claim: PutClaim, parallel: bool) -> Result<Self> {
        if atoms.k_half != grid.k_half {
            return Err(Error::Internal("jump atoms were built for a different grid".into()));
        }
        if !(maturity > 0.0) {
            return Err(Error::invalid("maturity", "must be > 0"));
        }
        let h = maturity / grid.n_time as f64;
        let var = sigma * sigma;
        let d = grid.d;
        let lower = var * h / (2.0 * d * d) + var * h / (4.0 * d);
        let upper = var * h / (2.0 * d * d) - var * h / (4.0 * d);
        let diag = 1.0 + var * h / (d * d);
        if upper < 0.0 || diag < lower.abs() + upper.abs() {
            return Err(Error::Internal(format!(
                "space step d = {d} makes the implicit system lose diagonal dominance (need d < 2)"
            )));
        }
        Ok(PideSolver {
            grid: *grid,
            atoms,
            sigma,
            h,
            claim,
            parallel,
            lower,
            diag,
            upper,
        })
    }

    pub fn terminal_row(&self) -> Vec<f64> {
        (0..self.grid.n_nodes()).map(|j| self.claim.value(self.grid.x(j))).collect()
    }

    /// Values imposed at `j = 0` and `j = 2M` at every time level.
    pub fn boundary(&self) -> (f64, f64) {
        (self.claim.value(self.grid.x0), self.claim.value(self.grid.x_max()))
    }

    fn node(&self, j: usize, p_next: &[f64], stencil: &mut NodeStencil) -> Result<(f64, HamiltonianMin)> {
        stencil.fill(j, p_next, &self.grid, self.atoms, &self.claim);
        let min = minimize_hamiltonian(stencil, self.grid.alpha, self.sigma)?;
        let rhs = p_next[j] + self.h * stencil.jump_drift() + self.h * min.value;
        Ok((rhs, min))
    }

    /// Computes `P_i` from `P_{i+1}`.
    pub fn step(&self, p_next: &[f64]) -> Result<StepOutput> {
        let n = self.grid.n_nodes();
        if p_next.len() != n {
            return Err(Error::Internal(format!("row has {} nodes, grid has {n}", p_next.len())));
        }
        let interior: Vec<(f64, HamiltonianMin)> = if self.parallel {
            (1..n - 1)
                .into_par_iter()
                .map_init(NodeStencil::default, |st, j| self.node(j, p_next, st))
                .collect::<Result<_>>()?
        } else {
            let mut st = NodeStencil::default();
            (1..n - 1).map(|j| self.node(j, p_next, &mut st)).collect::<Result<_>>()?
        };

        let (left, right) = self.boundary();
        let m = n - 2;
        let sub = vec![-self.lower; m];
        let diag = vec![self.diag; m];
        let sup = vec![-self.upper; m];
        let mut rhs: Vec<f64> = interior.iter().map(|(r, _)| *r).collect();
        rhs[0] += self.lower * left;
        rhs[m - 1] += self.upper * right;
        let solved = crate::tridiag::solve_tridiagonal(&sub, &diag, &sup, &rhs)?;

        let mut row = Vec::with_capacity(n);
        row.push(left);
        row.extend(solved);
        row.push(right);

        let mut hedge = vec![0.0; n];
        let mut diagnostics = PideDiagnostics::default();
        for (j, (_, min)) in interior.iter().enumerate() {
            hedge[j + 1] = min.theta;
            diagnostics.minimizations += 1;
            diagnostics.newton_iterations += min.iterations;
            diagnostics.max_residual = diagnostics.max_residual.max(min.residual.abs());
            diagnostics.clamp_hits += usize::from(min.clamped);
        }
        Ok(StepOutput { row, hedge, diagnostics })
    }
}

/// One backward step for the claim `claim` (convenience wrapper).
pub fn step_backward(
    p_next: &[f64],
    grid: &PideGrid,
    atoms: &LevyAtoms,
    sigma: f64,
    maturity: f64,
    claim: PutClaim,
) -> Result<Vec<f64>> {
    PideSolver::new(grid, atoms, sigma, maturity, claim, false)?
        .step(p_next)
        .map(|o| o.row)
}

/// Full backward solution on the grid.
#[derive(Debug, Clone)]
pub struct PideSolution {
    pub grid: PideGrid,
    pub maturity: f64,
    pub claim: PutClaim,
    pub spot: f64,
    /// Log-spot nodes.
    pub x: Vec<f64>,
    /// `values[i][j]` approximates the price at `t_i = i h`, `x_j`.
    pub values: Vec<Vec<f64>>,
    /// `hedge[i][j]` is the minimizing hedge used to step from `t_{i+1}` to `t_i`.
    pub hedge: Option<Vec<Vec<f64>>>,
    pub diagnostics: PideDiagnostics,
}

impl PideSolution {
    /// Price at time zero, by monotone cubic interpolation in log-spot.
    pub fn price_at(&self, spot: f64) -> Result<f64> {
        let x = spot.ln();
        let (lo, hi) = (self.x[0], self.x[self.x.len() - 1]);
        if !(x > lo && x < hi) {
            return Err(Error::Range(format!(
                "spot {spot} outside the grid interior ({:.6}, {:.6})",
                lo.exp(),
                hi.exp()
            )));
        }
        let ip = MonotoneCubic::new(&self.x, &self.values[0])?;
        ip.eval(x).ok_or_else(|| Error::Range(format!("spot {spot} outside grid")))
    }

    pub fn price(&self) -> Result<f64> {
        self.price_at(self.spot)
    }

    /// Writes `i,t,j,x,spot,value[,hedge]` rows for the whole surface.
    pub fn write_surface_csv(&self, mut w: impl Write) -> io::Result<()> {
        let h = self.maturity / self.grid.n_time as f64;
        if self.hedge.is_some() {
            writeln!(w, "i,t,j,x,spot,value,hedge")?;
        } else {
            writeln!(w, "i,t,j,x,spot,value")?;
        }
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let x = self.x[j];
                write!(w, "{i},{},{j},{x},{},{v}", i as f64 * h, x.exp())?;
                match &self.hedge {
                    Some(hedge) if i < hedge.len() => writeln!(w, ",{}", hedge[i][j])?,
                    Some(_) => writeln!(w, ",")?,
                    None => writeln!(w)?,
                }
            }
        }
        Ok(())
    }
}

fn check_inputs(opt: &OptionSpec, model: &LevyModel, grid: &PideGrid) -> Result<()> {
    if opt.kind != OptionKind::Put {
        return Err(Error::Domain("the PIDE solver prices puts only".into()));
    }
    let drift = model.mean_drift()?;
    if drift.abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "model drift {drift:.3e} is not a martingale drift; tilt to the MEMM first"
        )));
    }
    let log_k = opt.strike.ln();
    if !(log_k > grid.x0 && log_k < grid.x_max()) {
        return Err(Error::Range(format!(
            "strike {} outside the grid ({:.6}, {:.6})",
            opt.strike,
            grid.x0.exp(),
            grid.x_max().exp()
        )));
    }
    Ok(())
}

/// Solves for `sign * (K - S_T)^+` under a martingale model.
pub fn solve_claim(opt: &OptionSpec, model: &LevyModel, grid: &PideGrid, sign: f64, options: &PideOptions) -> Result<PideSolution> {
    check_inputs(opt, model, grid)?;
    let atoms = discretize_levy_with(model, grid, options.tail_tolerance)?;
    let sigma = if options.fold_center_mass {
        (model.sigma().powi(2) + atoms.center_second_moment).sqrt()
    } else {
        model.sigma()
    };
    let claim = PutClaim {
        strike: opt.strike,
        sign,
    };
    let solver = PideSolver::new(grid, &atoms, sigma, opt.maturity, claim, options.parallel)?;

    let n_time = grid.n_time;
    let mut values = vec![Vec::new(); n_time + 1];
    let mut hedges = options.keep_hedge.then(|| vec![Vec::new(); n_time]);
    let mut diagnostics = PideDiagnostics::default();
    values[n_time] = solver.terminal_row();
    for i in (0..n_time).rev() {
        let out = solver.step(&values[i + 1])?;
        diagnostics.absorb(&out.diagnostics);
        values[i] = out.row;
        if let Some(h) = hedges.as_mut() {
            h[i] = out.hedge;
        }
    }
    Ok(PideSolution {
        grid: *grid,
        maturity: opt.maturity,
        claim,
        spot: opt.spot,
        x: (0..grid.n_nodes()).map(|j| grid.x(j)).collect(),
        values,
        hedge: hedges,
        diagnostics,
    })
}

/// Seller's indifference price surface of a put under a martingale model.
pub fn solve_pide(opt: &OptionSpec, model: &LevyModel, grid: &PideGrid) -> Result<PideSolution> {
    solve_claim(opt, model, grid, 1.0, &PideOptions::default())
}

pub fn solve_pide_with(opt: &OptionSpec, model: &LevyModel, grid: &PideGrid, options: &PideOptions) -> Result<PideSolution> {
    solve_claim(opt, model, grid, 1.0, options)
}

/// Seller's and buyer's prices; the buyer's price of `H` is minus the seller's price of `-H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadQuote {
    pub seller: f64,
    pub buyer: f64,
    pub spread: f64,
}

pub fn indifference_spread_pide(opt: &OptionSpec, model: &LevyModel, grid: &PideGrid) -> Result<SpreadQuote> {
    indifference_spread_pide_with(opt, model, grid, &PideOptions::default())
}

pub fn indifference_spread_pide_with(
    opt: &OptionSpec,
    model: &LevyModel,
    grid: &PideGrid,
    options: &PideOptions,
) -> Result<SpreadQuote> {
    let (sell, buy) = if options.parallel {
        rayon::join(
            || solve_claim(opt, model, grid, 1.0, options),
            || solve_claim(opt, model, grid, -1.0, options),
        )
    } else {
        (
            solve_claim(opt, model, grid, 1.0, options),
            solve_claim(opt, model, grid, -1.0, options),
        )
    };
    let seller = sell?.price()?;
    let buyer = -buy?.price()?;
    Ok(SpreadQuote {
        seller,
        buyer,
        spread: seller - buyer,
    })
}
