//! Command-line flags, the optional `key=value` file, and their merge.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

/// Environment variable consulted for the seed when neither flag nor file sets one.
pub const SEED_ENV: &str = "COHDISC_SEED";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "cohdisc", version, about = "Discrimination of coherent states with uncertain amplitude")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Limiting excess risk of the collective and E&D strategies over an amplitude grid
    RiskCurve,
    /// Optimal heterodyne squeezing over an amplitude grid
    Squeezing,
    /// Finite-n collective error against its large-n expansion
    FiniteN,
    /// Finite-n E&D error against its large-n expansion
    EandFiniteN,
    /// Monte Carlo estimate of the E&D error next to the quadrature value
    Montecarlo,
    /// Two-value amplitude model: symmetric measurement and both excess risks
    Twopoint,
    /// Run the built-in invariant checks
    Selftest,
}

#[derive(Debug, Default, Clone, Args)]
pub struct Flags {
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha0_min: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha0_max: Option<f64>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Single amplitude for the finite-n, Monte Carlo commands
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha0: Option<f64>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<u64>,
    /// Heterodyne squeezing; defaults to the optimum for the amplitude
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub squeezing: Option<f64>,
    #[arg(long, global = true)]
    pub quad_order: Option<usize>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Discriminate against the point estimate instead of the posterior
    #[arg(long, global = true)]
    pub plug_in: bool,
    /// Score Monte Carlo trials by simulated decisions instead of conditional errors
    #[arg(long, global = true)]
    pub binary: bool,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// File of `key=value` lines using the long flag names
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

const FILE_KEYS: &[&str] = &[
    "alpha0-min",
    "alpha0-max",
    "steps",
    "alpha0",
    "mu",
    "n",
    "squeezing",
    "quad-order",
    "trials",
    "seed",
    "plug-in",
    "binary",
    "out",
    "workers",
];

/// Parse `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<HashMap<String, String>, CliError> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| CliError::Config(format!("line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        if !FILE_KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(map)
}

fn load_config(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

fn pick<T: FromStr>(flag: Option<T>, file: &HashMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    file.get(key)
        .map(|v| v.parse::<T>().map_err(|_| CliError::Config(format!("invalid value '{v}' for '{key}'"))))
        .transpose()
}

fn pick_switch(flag: bool, file: &HashMap<String, String>, key: &str) -> Result<bool, CliError> {
    Ok(flag || pick::<bool>(None, file, key)?.unwrap_or(false))
}

/// Flags merged over the config file; unset values stay `None` so each
/// command can apply its own defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub alpha0_min: Option<f64>,
    pub alpha0_max: Option<f64>,
    pub steps: Option<usize>,
    pub alpha0: Option<f64>,
    pub mu: Option<f64>,
    pub n: Option<u64>,
    pub squeezing: Option<f64>,
    pub quad_order: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub plug_in: bool,
    pub binary: bool,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn resolve(flags: Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => load_config(p)?,
            None => HashMap::new(),
        };
        Ok(Self {
            alpha0_min: pick(flags.alpha0_min, &file, "alpha0-min")?,
            alpha0_max: pick(flags.alpha0_max, &file, "alpha0-max")?,
            steps: pick(flags.steps, &file, "steps")?,
            alpha0: pick(flags.alpha0, &file, "alpha0")?,
            mu: pick(flags.mu, &file, "mu")?,
            n: pick(flags.n, &file, "n")?,
            squeezing: pick(flags.squeezing, &file, "squeezing")?,
            quad_order: pick(flags.quad_order, &file, "quad-order")?,
            trials: pick(flags.trials, &file, "trials")?,
            seed: pick(flags.seed, &file, "seed")?,
            plug_in: pick_switch(flags.plug_in, &file, "plug-in")?,
            binary: pick_switch(flags.binary, &file, "binary")?,
            out: pick(flags.out, &file, "out")?,
            workers: pick(flags.workers, &file, "workers")?,
        })
    }

    /// Inclusive, evenly spaced amplitude grid.
    pub fn grid(&self, min: f64, max: f64, steps: usize) -> Result<Vec<f64>, CliError> {
        let lo = self.alpha0_min.unwrap_or(min);
        let hi = self.alpha0_max.unwrap_or(max);
        let steps = self.steps.unwrap_or(steps);
        if steps == 0 {
            return Err(CliError::Config("steps must be at least 1".into()));
        }
        if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(CliError::Config(format!("amplitude grid needs 0 < min <= max, got [{lo}, {hi}]")));
        }
        if steps == 1 {
            return Ok(vec![lo]);
        }
        let h = (hi - lo) / (steps - 1) as f64;
        Ok((0..steps).map(|k| if k == steps - 1 { hi } else { lo + h * k as f64 }).collect())
    }

    /// Single amplitude: `--alpha0`, else the grid minimum, else `fallback`.
    pub fn single_alpha0(&self, fallback: f64) -> f64 {
        self.alpha0.or(self.alpha0_min).unwrap_or(fallback)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                v.trim().parse().map_err(|_| CliError::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer")))
            }
            Err(_) => Ok(DEFAULT_SEED),
        }
    }
}
