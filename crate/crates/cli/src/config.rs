//! Run configuration: a TOML file with `[model]`, `[option]`, `[grid]`,
//! `[run]`, `[sensitivity]` and `[selftest]` sections, plus dotted
//! command-line overrides. Every section is optional; omitted fields fall
//! back to the at-the-money Merton reference case.

use std::path::{Path, PathBuf};

use levy_indifference::{
    Atom, Drift, LevyModel, MertonParams, OptionKind, OptionSpec, PideGrid, Sweep, SweepAxis, DEFAULT_TRUNCATION,
};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub option: OptionSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sensitivity: SensitivitySection,
    #[serde(default)]
    pub selftest: SelftestSection,
}

/// Either Merton parameters or an explicit atom list.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub lambda_m: Option<f64>,
    pub gamma_j: Option<f64>,
    pub delta_j: Option<f64>,
    /// Physical drift; leave unset (or set `martingale = true`) for a martingale model.
    pub mu: Option<f64>,
    pub martingale: Option<bool>,
    /// Log-jump support half-width in units of `delta_j`.
    #[serde(default = "default_truncation")]
    pub truncation: f64,
    pub atoms: Option<Vec<AtomEntry>>,
    /// Triplet drift of an atom model under the physical measure.
    pub drift: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            sigma: default_sigma(),
            lambda_m: None,
            gamma_j: None,
            delta_j: None,
            mu: None,
            martingale: None,
            truncation: default_truncation(),
            atoms: None,
            drift: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomEntry {
    pub size: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionSection {
    #[serde(default = "default_kind")]
    pub kind: OptionKind,
    #[serde(default = "one")]
    pub strike: f64,
    #[serde(default = "one")]
    pub maturity: f64,
    #[serde(default = "one")]
    pub spot: f64,
}

impl Default for OptionSection {
    fn default() -> Self {
        OptionSection {
            kind: default_kind(),
            strike: 1.0,
            maturity: 1.0,
            spot: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_time: Option<usize>,
    pub m_half: Option<usize>,
    pub x0: Option<f64>,
    pub d: Option<f64>,
    pub k_half: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Price,
    Spread,
    Sensitivity,
    Selftest,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub command: Option<Command>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Run the PIDE solver alongside the closed form; defaults to on for puts.
    pub pide: Option<bool>,
    /// `KEY=a:b:n` with KEY one of spot, alpha, strike, maturity.
    pub sweep: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default = "yes")]
    pub parallel: bool,
    /// Where to dump the PIDE value and hedge surface of the template contract.
    pub surface: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            command: None,
            alpha: default_alpha(),
            pide: None,
            sweep: None,
            out: None,
            format: None,
            parallel: true,
            surface: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySection {
    /// Total volatility; defaults to the model's.
    pub sigma_bar: Option<f64>,
    /// `a:b:n`; defaults to the option's strike alone.
    pub strikes: Option<String>,
    /// `a:b:n`; defaults to the option's maturity alone.
    pub maturities: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestSection {
    #[serde(default = "default_paths")]
    pub mc_paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Multiplies every required tolerance.
    #[serde(default = "one")]
    pub tolerance_scale: f64,
}

impl Default for SelftestSection {
    fn default() -> Self {
        SelftestSection {
            mc_paths: default_paths(),
            seed: default_seed(),
            tolerance_scale: 1.0,
        }
    }
}

fn default_sigma() -> f64 {
    0.2
}

fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION
}

fn default_kind() -> OptionKind {
    OptionKind::Put
}

fn default_alpha() -> f64 {
    10.0
}

fn default_paths() -> usize {
    1_000_000
}

fn default_seed() -> u64 {
    42
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

const REFERENCE_JUMPS: (f64, f64, f64) = (5.0, -0.05, 0.1);

/// Prefixes an engine error with the section it came from.
pub(crate) fn in_section(section: &str) -> impl Fn(levy_indifference::Error) -> CliError + '_ {
    move |e| match e {
        levy_indifference::Error::InvalidParameter { name, reason } => CliError::Config {
            path: format!("{section}.{name}"),
            reason,
        },
        other => CliError::from(other),
    }
}

fn config_error(path: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_string(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        RunConfig::deserialize(table).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn merton_params(&self) -> Result<Option<MertonParams>, CliError> {
        let m = &self.model;
        if m.atoms.is_some() {
            for (key, set) in [
                ("lambda_m", m.lambda_m.is_some()),
                ("gamma_j", m.gamma_j.is_some()),
                ("delta_j", m.delta_j.is_some()),
                ("mu", m.mu.is_some()),
            ] {
                if set {
                    return Err(config_error(&format!("model.{key}"), "not allowed together with model.atoms"));
                }
            }
            return Ok(None);
        }
        if m.drift.is_some() {
            return Err(config_error("model.drift", "only used with model.atoms; Merton models take model.mu"));
        }
        if m.mu.is_some() && m.martingale == Some(true) {
            return Err(config_error("model.mu", "give either mu or martingale = true, not both"));
        }
        if m.mu.is_none() && m.martingale == Some(false) {
            return Err(config_error("model.mu", "required when martingale = false"));
        }
        let (lambda_m, gamma_j, delta_j) = REFERENCE_JUMPS;
        MertonParams::new(
            m.sigma,
            m.lambda_m.unwrap_or(lambda_m),
            m.gamma_j.unwrap_or(gamma_j),
            m.delta_j.unwrap_or(delta_j),
            m.mu,
        )
        .map(Some)
        .map_err(in_section("model"))
    }

    /// The model as specified, before any change of measure.
    pub fn model(&self) -> Result<LevyModel, CliError> {
        let m = &self.model;
        match self.merton_params()? {
            Some(p) => LevyModel::merton(&p, m.truncation).map_err(in_section("model")),
            None => {
                let atoms = m
                    .atoms
                    .iter()
                    .flatten()
                    .map(|a| Atom {
                        size: a.size,
                        mass: a.mass,
                    })
                    .collect();
                let drift = match (m.martingale.unwrap_or(m.drift.is_none()), m.drift) {
                    (true, None) => Drift::Martingale,
                    (true, Some(_)) => {
                        return Err(config_error("model.drift", "give either drift or martingale = true, not both"))
                    }
                    (false, Some(g)) => Drift::Triplet(g),
                    (false, None) => return Err(config_error("model.drift", "required when martingale = false")),
                };
                LevyModel::from_atoms(m.sigma, atoms, drift).map_err(in_section("model"))
            }
        }
    }

    pub fn option(&self) -> Result<OptionSpec, CliError> {
        let o = &self.option;
        OptionSpec::new(o.kind, o.strike, o.maturity, o.spot).map_err(in_section("option"))
    }

    pub fn grid(&self, alpha: f64) -> Result<PideGrid, CliError> {
        let r = PideGrid::reference(alpha).map_err(in_section("run"))?;
        let g = &self.grid;
        PideGrid::new(
            g.n_time.unwrap_or(r.n_time),
            g.m_half.unwrap_or(r.m_half),
            g.x0.unwrap_or(r.x0),
            g.d.unwrap_or(r.d),
            g.k_half.unwrap_or(r.k_half),
            alpha,
        )
        .map_err(in_section("grid"))
    }

    pub fn alpha(&self) -> Result<f64, CliError> {
        let a = self.run.alpha;
        if a >= 0.0 && a.is_finite() {
            Ok(a)
        } else {
            Err(config_error("run.alpha", "must be finite and >= 0"))
        }
    }

    /// Whether the PIDE route runs; it only prices puts.
    pub fn wants_pide(&self) -> Result<bool, CliError> {
        match (self.run.pide, self.option.kind) {
            (Some(true), OptionKind::Call) => Err(config_error("run.pide", "the PIDE solver prices puts only")),
            (Some(p), _) => Ok(p),
            (None, kind) => Ok(kind == OptionKind::Put),
        }
    }
}

/// Applies `section.key=value`; the value is read as a TOML literal and
/// falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{assignment}` is not KEY=VALUE")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Usage(format!("override key `{path}` is malformed")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut node = table;
    for k in parents {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("override `{path}`: `{k}` is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// Parses `a:b:n` into evenly spaced points.
pub fn parse_range(axis: SweepAxis, spec: &str) -> Result<Sweep, CliError> {
    let bad = || CliError::Usage(format!("range `{spec}` is not a:b:n"));
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.parse().map_err(|_| bad())?;
    let b: f64 = b.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    Ok(Sweep::linspace(axis, a, b, n)?)
}

/// Parses `KEY=a:b:n`.
pub fn parse_sweep(spec: &str) -> Result<Sweep, CliError> {
    let (key, range) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("sweep `{spec}` is not KEY=a:b:n")))?;
    let axis: SweepAxis = key.trim().parse()?;
    parse_range(axis, range)
}
