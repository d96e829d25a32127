//! Exponential-utility indifference pricing of European options in
//! exponential Lévy models.
//!
//! Two independent routes are provided: a closed-form expansion around the
//! Black-Scholes price ([`asymptotic`]) and a finite-difference solver for
//! the nonlinear pricing equation ([`pide`]). [`oracles`] holds reference
//! computations used to cross-check both.

pub mod asymptotic;
pub mod bs;
pub mod error;
pub mod interp;
pub mod levy;
pub mod normal;
pub mod oracles;
pub mod pide;
pub mod quadrature;
pub mod roots;
pub mod tridiag;

pub use asymptotic::{
    asymptotic_price, bid_ask_spread, jump_sensitivity, price_curve, within_hypotheses, AsymptoticPrice, CurvePoint,
    Sweep, SweepAxis,
};
pub use bs::{bs_price, cash_greeks, put_gamma_integral, BsContext, OptionKind, OptionSpec};
pub use error::{Error, Result};
pub use levy::{
    ell, find_memm_tilt, group_params_merton, group_params_numeric, memm_exponent, memm_model, merton_levy_density,
    tilt_measure, Atom, Drift, GroupParams, LevyMeasure, LevyModel, LogNormalJumps, MertonParams, DEFAULT_TRUNCATION,
};
pub use pide::{
    discretize_levy, hamiltonian, indifference_spread_pide, indifference_spread_pide_with, minimize_hamiltonian, solve_pide, solve_pide_with,
    step_backward, LevyAtoms, PideGrid, PideOptions, PideSolution, SpreadQuote,
};
