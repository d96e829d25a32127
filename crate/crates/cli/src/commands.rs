//! The four subcommands. Each turns a [`RunConfig`] into a [`Table`].

use std::time::Instant;

use levy_indifference::oracles::{fd_greeks, jump_sensitivity_numeric, mc_linear_price, merton_series_price};
use levy_indifference::{
    asymptotic_price, bid_ask_spread, bs_price, cash_greeks, group_params_numeric, indifference_spread_pide_with,
    jump_sensitivity, memm_exponent, memm_model, price_curve, put_gamma_integral, solve_pide_with, within_hypotheses,
    BsContext, Drift, GroupParams, LevyModel, MertonParams, OptionSpec, PideOptions, PideSolution, Sweep, SweepAxis,
};

use crate::config::{in_section, parse_range, RunConfig};
use crate::error::{CliError, Context};
use crate::output::{Cell, Table};

/// Martingale drift tolerance below which the configured model is used as is.
const MARTINGALE_TOL: f64 = 1e-12;

/// The model under the pricing measure and its group parameters.
pub struct Pricing {
    pub model: LevyModel,
    pub gp: GroupParams,
    /// Minimizer of the Laplace exponent; zero for a martingale input.
    pub u_star: f64,
}

pub fn pricing(cfg: &RunConfig) -> Result<Pricing, CliError> {
    let physical = cfg.model()?;
    let (model, u_star) = if physical.is_martingale(MARTINGALE_TOL).context(|| "martingale check".into())? {
        (physical, 0.0)
    } else {
        let u = memm_exponent(&physical).context(|| "minimal entropy martingale measure".into())?;
        (memm_model(&physical).context(|| "minimal entropy martingale measure".into())?, u)
    };
    let gp = group_params_numeric(&model).context(|| "group parameters".into())?;
    Ok(Pricing { model, gp, u_star })
}

fn pide_options(cfg: &RunConfig) -> PideOptions {
    PideOptions {
        parallel: cfg.run.parallel,
        ..PideOptions::default()
    }
}

fn solve(cfg: &RunConfig, opt: &OptionSpec, alpha: f64, model: &LevyModel, keep_hedge: bool) -> Result<PideSolution, CliError> {
    let grid = cfg.grid(alpha)?;
    let options = PideOptions {
        keep_hedge,
        ..pide_options(cfg)
    };
    solve_pide_with(opt, model, &grid, &options)
        .context(|| format!("PIDE solve at K = {}, T = {}, alpha = {alpha}", opt.strike, opt.maturity))
}

fn resolve_sweep(cfg: &RunConfig, flag: Option<&Sweep>) -> Result<Option<Sweep>, CliError> {
    match (flag, cfg.run.sweep.as_deref()) {
        (Some(s), _) => Ok(Some(s.clone())),
        (None, Some(spec)) => crate::config::parse_sweep(spec).map(Some),
        (None, None) => Ok(None),
    }
}

pub fn cmd_price(cfg: &RunConfig, flag: Option<&Sweep>) -> Result<Table, CliError> {
    let template = cfg.option()?;
    let alpha = cfg.alpha()?;
    let sweep = match resolve_sweep(cfg, flag)? {
        Some(s) => s,
        None => Sweep::new(SweepAxis::Spot, vec![template.spot])?,
    };
    let p = pricing(cfg)?;
    let curve = price_curve(&template, &p.gp, alpha, &sweep).context(|| "asymptotic price".into())?;

    let mut newton = None;
    let pide: Vec<Option<f64>> = if cfg.wants_pide()? {
        let keep = cfg.run.surface.is_some();
        let mut prices = Vec::with_capacity(sweep.values.len());
        if sweep.axis == SweepAxis::Spot {
            let sol = solve(cfg, &template, alpha, &p.model, keep)?;
            for &s in &sweep.values {
                prices.push(Some(sol.price_at(s).context(|| format!("PIDE price at S0 = {s}"))?));
            }
            newton = Some(sol.diagnostics.mean_newton_iterations());
            dump_surface(cfg, &sol)?;
        } else {
            if keep {
                dump_surface(cfg, &solve(cfg, &template, alpha, &p.model, true)?)?;
            }
            for &v in &sweep.values {
                let (opt, a) = sweep.apply(&template, alpha, v).map_err(in_section("run"))?;
                prices.push(Some(solve(cfg, &opt, a, &p.model, false)?.price().context(|| "PIDE price".into())?));
            }
        }
        prices
    } else {
        vec![None; sweep.values.len()]
    };

    let mut table = Table::new(
        "price",
        vec![
            "S0",
            "K",
            "T",
            "alpha",
            "bs",
            "m3_term",
            "m4_term",
            "m3sq_term",
            "nonlinear",
            "linear",
            "asymptotic",
            "pide",
            "abs_gap",
            "rel_gap",
            "within_hypotheses",
        ],
    );
    for (point, pide) in curve.iter().zip(pide) {
        let (opt, a) = sweep.apply(&template, alpha, point.abscissa)?;
        let ap = &point.price;
        let gap = pide.map(|v| v - ap.total);
        table.push(vec![
            opt.spot.into(),
            opt.strike.into(),
            opt.maturity.into(),
            a.into(),
            ap.bs_term.into(),
            ap.m3_term.into(),
            ap.m4_term.into(),
            ap.m3sq_term.into(),
            ap.nonlinear_term.into(),
            ap.linear_part().into(),
            ap.total.into(),
            pide.into(),
            gap.into(),
            gap.zip(pide).map(|(g, v)| g / v).into(),
            within_hypotheses(&opt).into(),
        ]);
    }
    push_group_meta(&mut table, &p);
    if let Some(n) = newton {
        table.meta.push(("mean_newton_iterations", n.into()));
    }
    Ok(table)
}

fn push_group_meta(table: &mut Table, p: &Pricing) {
    table.meta.push(("sigma_bar_sq", p.gp.sigma_bar_sq.into()));
    table.meta.push(("m3", p.gp.m3.into()));
    table.meta.push(("m4", p.gp.m4.into()));
    table.meta.push(("incompleteness", p.gp.incompleteness().into()));
    table.meta.push(("u_star", p.u_star.into()));
}

fn dump_surface(cfg: &RunConfig, sol: &PideSolution) -> Result<(), CliError> {
    if let Some(path) = &cfg.run.surface {
        let file = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        sol.write_surface_csv(std::io::BufWriter::new(file))
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn cmd_spread(cfg: &RunConfig, flag: Option<&Sweep>) -> Result<Table, CliError> {
    let opt = cfg.option()?;
    let alphas = match resolve_sweep(cfg, flag)? {
        Some(s) if s.axis == SweepAxis::Alpha => s.values,
        Some(_) => return Err(CliError::Usage("spread sweeps over alpha only".into())),
        None => vec![cfg.alpha()?],
    };
    let p = pricing(cfg)?;
    let pide = cfg.wants_pide()?;
    let mut table = Table::new(
        "spread",
        vec!["alpha", "spread_closed_form", "spread_pide", "seller_asymptotic", "seller_pide", "buyer_pide"],
    );
    for a in alphas {
        let closed = bid_ask_spread(&opt, &p.gp, a).context(|| format!("closed-form spread at alpha = {a}"))?;
        let seller = asymptotic_price(&opt, &p.gp, a).context(|| format!("asymptotic price at alpha = {a}"))?;
        let quote = if pide {
            let grid = cfg.grid(a)?;
            Some(
                indifference_spread_pide_with(&opt, &p.model, &grid, &pide_options(cfg))
                    .context(|| format!("PIDE spread at alpha = {a}"))?,
            )
        } else {
            None
        };
        table.push(vec![
            a.into(),
            closed.into(),
            quote.map(|q| q.spread).into(),
            seller.total.into(),
            quote.map(|q| q.seller).into(),
            quote.map(|q| q.buyer).into(),
        ]);
    }
    push_group_meta(&mut table, &p);
    Ok(table)
}

pub fn cmd_sensitivity(cfg: &RunConfig, flag: Option<&Sweep>) -> Result<Table, CliError> {
    let opt = cfg.option()?;
    let sigma_bar = match cfg.sensitivity.sigma_bar {
        Some(s) => s,
        None => pricing(cfg)?.gp.sigma_bar(),
    };
    let series = |axis: SweepAxis, configured: Option<&str>, default: f64| -> Result<Vec<f64>, CliError> {
        match (flag, configured) {
            (Some(s), _) if s.axis == axis => Ok(s.values.clone()),
            (_, Some(spec)) => Ok(parse_range(axis, spec)?.values),
            _ => Ok(vec![default]),
        }
    };
    if let Some(s) = flag {
        if !matches!(s.axis, SweepAxis::Strike | SweepAxis::Maturity) {
            return Err(CliError::Usage("sensitivity sweeps over strike or maturity only".into()));
        }
    }
    let strikes = series(SweepAxis::Strike, cfg.sensitivity.strikes.as_deref(), opt.strike)?;
    let maturities = series(SweepAxis::Maturity, cfg.sensitivity.maturities.as_deref(), opt.maturity)?;

    let mut table = Table::new("sensitivity", vec!["series", "K", "T", "value"]);
    let mut emit = |name: &str, o: OptionSpec| -> Result<(), CliError> {
        let v = jump_sensitivity(&o, sigma_bar).map_err(in_section("sensitivity"))?;
        table.push(vec![name.into(), o.strike.into(), o.maturity.into(), v.into()]);
        Ok(())
    };
    for k in strikes {
        emit("strike", opt.with_strike(k).map_err(in_section("sensitivity"))?)?;
    }
    for t in maturities {
        emit("maturity", opt.with_maturity(t).map_err(in_section("sensitivity"))?)?;
    }
    table.meta.push(("sigma_bar", sigma_bar.into()));
    table.meta.push(("S0", opt.spot.into()));
    Ok(table)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct Checks {
    table: Table,
    scale: f64,
    failures: usize,
}

impl Checks {
    fn check(&mut self, name: &str, achieved: f64, required: f64) {
        let required = required * self.scale;
        let pass = achieved <= required;
        if !pass {
            self.failures += 1;
        }
        self.table.push(vec![
            name.into(),
            achieved.into(),
            required.into(),
            (if pass { "PASS" } else { "FAIL" }).into(),
        ]);
    }
}

/// Oracle cross-checks on the configured contract (as a put) and Merton
/// jump law. Returns the table and the number of failed checks.
pub fn cmd_selftest(cfg: &RunConfig, seed: Option<u64>) -> Result<(Table, usize), CliError> {
    let start = Instant::now();
    let st = &cfg.selftest;
    if !(st.tolerance_scale > 0.0 && st.tolerance_scale.is_finite()) {
        return Err(CliError::Config {
            path: "selftest.tolerance_scale".into(),
            reason: "must be finite and > 0".into(),
        });
    }
    if st.mc_paths < 10_000 {
        return Err(CliError::Config {
            path: "selftest.mc_paths".into(),
            reason: "must be >= 10000".into(),
        });
    }
    let p = cfg
        .merton_params()?
        .ok_or_else(|| CliError::Usage("selftest needs a Merton model, not an atom list".into()))?;
    // the series oracle is defined for the martingale version of the jump law
    let p = MertonParams::martingale(p.sigma, p.lambda_m, p.gamma_j, p.delta_j).map_err(in_section("model"))?;
    let model = LevyModel::merton(&p, cfg.model.truncation).map_err(in_section("model"))?;
    let o = cfg.option()?;
    let put = OptionSpec::put(o.strike, o.maturity, o.spot).map_err(in_section("option"))?;
    let alpha = cfg.alpha()?;
    let sigma_bar = group_params_numeric(&model).context(|| "group parameters".into())?.sigma_bar();

    let mut checks = Checks {
        table: Table::new("selftest", vec!["check", "achieved", "required", "status"]),
        scale: st.tolerance_scale,
        failures: 0,
    };

    let ctx = BsContext::at_inception(sigma_bar)?;
    let exact = cash_greeks(&put, &ctx, put.spot, 6).context(|| "cash greeks".into())?;
    let fd3 = fd_greeks(&put, &ctx, put.spot, 3).context(|| "finite-difference d3".into())?;
    let fd6 = fd_greeks(&put, &ctx, put.spot, 6).context(|| "finite-difference d6".into())?;
    checks.check("greek_d3_vs_finite_difference", rel(fd3.value, exact[2]), 1e-6);
    checks.check("greek_d6_vs_finite_difference", rel(fd6.value, exact[5]), 1e-4);

    let closed = put_gamma_integral(&put, sigma_bar).context(|| "gamma integral".into())?;
    let numeric = jump_sensitivity_numeric(&put, sigma_bar).context(|| "gamma integral quadrature".into())?;
    checks.check("gamma_integral_vs_quadrature", rel(closed, numeric.value), 1e-6);

    let series = merton_series_price(&put, &p).context(|| "series price".into())?;
    let mc = mc_linear_price(&put, &model, st.mc_paths, seed.unwrap_or(st.seed)).context(|| "Monte Carlo price".into())?;
    checks.check("series_vs_monte_carlo_std_errors", (mc.value - series.value).abs() / mc.error_estimate, 3.0);

    let vol = if p.sigma > 0.0 { p.sigma } else { sigma_bar };
    let gauss = LevyModel::from_atoms(vol, vec![], Drift::Martingale)?;
    let bs = bs_price(&put, &BsContext::at_inception(vol)?, put.spot);
    let pide_bs = solve(cfg, &put, alpha, &gauss, false)?.price().context(|| "PIDE price".into())?;
    checks.check("pide_black_scholes_limit", (pide_bs - bs).abs(), 5e-4);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let solve_start = Instant::now();
    let grid = cfg.grid(alpha)?;
    let sol = pool
        .install(|| solve_pide_with(&put, &model, &grid, &PideOptions::default()))
        .context(|| "reference PIDE solve".into())?;
    checks.check("pide_reference_solve_seconds", solve_start.elapsed().as_secs_f64(), 2.0);
    checks.check("pide_mean_newton_iterations", sol.diagnostics.mean_newton_iterations(), 6.0);

    checks.table.push(vec![
        "suite_seconds".into(),
        start.elapsed().as_secs_f64().into(),
        Cell::Empty,
        "RECORDED".into(),
    ]);
    Ok((checks.table, checks.failures))
}
