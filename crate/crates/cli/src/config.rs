//! Flat dotted-key configuration files (`estimation.k_grid = 3,4,5`) with
//! strict unknown-key detection. Command-line flags take precedence over
//! file values; every key left unread when a command finishes is an error.

use std::collections::BTreeMap;
use std::path::Path;

use vcam_core::estimation::EstimationConfig;
use vcam_core::identification::{log_spaced, PenaltyConfig};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// Key/value pairs from a config file; keys are checked off as they are
/// consumed so leftovers can be reported as unknown.
#[derive(Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    idx + 1
                )));
            };
            let key = key.trim().to_string();
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(ConfigError(format!(
                    "{}:{}: duplicate key `{key}`",
                    path.display(),
                    idx + 1
                )));
            }
        }
        Ok(Self { values })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    /// Value resolution with flag precedence: the flag wins when present.
    pub fn resolve<T: Clone, F: FnOnce(&str) -> Result<T>>(
        &mut self,
        key: &str,
        flag: Option<T>,
        parse: F,
    ) -> Result<Option<T>> {
        let file_value = match self.take(key) {
            Some(raw) => Some(parse(&raw).map_err(|e| ConfigError(format!("key `{key}`: {e}")))?),
            None => None,
        };
        Ok(flag.or(file_value))
    }

    /// Errors on any key never consumed by the command.
    pub fn finish(self) -> Result<()> {
        if let Some(key) = self.values.keys().next() {
            return Err(ConfigError(format!("unknown config key `{key}`")));
        }
        Ok(())
    }
}

pub fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| ConfigError(format!("`{s}` is not a nonnegative integer")))
}

pub fn parse_u64(s: &str) -> Result<u64> {
    s.parse().map_err(|_| ConfigError(format!("`{s}` is not a nonnegative integer")))
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| ConfigError(format!("`{s}` is not a number")))
}

pub fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(ConfigError(format!("`{s}` is not a boolean (true/false/1/0)"))),
    }
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|p| parse_usize(p.trim())).collect()
}

/// Penalty grids: either an explicit comma list of levels or
/// `log:N:LO:HI` for N log-spaced points.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(ConfigError(format!("`{s}`: expected log:N:LO:HI")));
        }
        let n = parse_usize(parts[0])?;
        let lo = parse_f64(parts[1])?;
        let hi = parse_f64(parts[2])?;
        if n < 2 || lo <= 0.0 || hi <= lo {
            return Err(ConfigError(format!("`{s}`: need N >= 2 and 0 < LO < HI")));
        }
        return Ok(log_spaced(n, lo, hi));
    }
    s.split(',').map(|p| parse_f64(p.trim())).collect()
}

/// Shared estimation-parameter flags; `None` falls through to the config
/// file and then to the defaults in `base`.
#[derive(clap::Args, Clone, Default)]
pub struct EstimationArgs {
    /// Spline order for the Step-I additive bases
    #[arg(long, value_name = "M")]
    pub order_step1: Option<usize>,
    /// Spline order for the Step-II time basis
    #[arg(long, value_name = "M")]
    pub order_step2: Option<usize>,
    /// Spline order for the Step-III additive bases
    #[arg(long, value_name = "M")]
    pub order_step3: Option<usize>,
    /// Interior-knot counts searched by BIC (comma list)
    #[arg(long, value_name = "LIST", value_parser = clap_usize_list)]
    pub k_grid: Option<Vec<usize>>,
    /// Segment lengths searched by BIC (comma list)
    #[arg(long, value_name = "LIST", value_parser = clap_usize_list)]
    pub i_grid: Option<Vec<usize>>,
    /// Anchoring point for the additive components
    #[arg(long, value_name = "X")]
    pub anchor: Option<f64>,
    /// Extra Step II/III refitting rounds
    #[arg(long, value_name = "N")]
    pub extra_rounds: Option<usize>,
}

/// Shared penalty-parameter flags.
#[derive(clap::Args, Clone, Default)]
pub struct PenaltyArgs {
    /// SCAD companion constant
    #[arg(long = "scad-a", value_name = "A")]
    pub a: Option<f64>,
    /// First-stage penalty grid: comma list or log:N:LO:HI
    #[arg(long, value_name = "GRID", value_parser = clap_grid)]
    pub lambda_grid: Option<Vec<f64>>,
    /// Second-stage penalty grid: comma list or log:N:LO:HI
    #[arg(long, value_name = "GRID", value_parser = clap_grid)]
    pub mu_grid: Option<Vec<f64>>,
    /// Norm below which a block counts as structurally zero
    #[arg(long, value_name = "EPS")]
    pub zero_threshold: Option<f64>,
    /// Floor for the quadratic-approximation denominator
    #[arg(long, value_name = "EPS")]
    pub lqa_floor: Option<f64>,
    /// Iteration cap for the penalized ridge loop
    #[arg(long, value_name = "N")]
    pub max_iter: Option<usize>,
    /// Coefficient-change convergence tolerance
    #[arg(long, value_name = "TOL")]
    pub coef_tol: Option<f64>,
    /// Scale applied to the derivative norm inside the penalty argument
    #[arg(long, value_name = "S")]
    pub penalty_scale: Option<f64>,
}

fn clap_usize_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    parse_usize_list(s).map_err(|e| e.to_string())
}

fn clap_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    parse_grid(s).map_err(|e| e.to_string())
}

pub fn merge_estimation(
    base: EstimationConfig,
    args: &EstimationArgs,
    file: &mut FileConfig,
) -> Result<EstimationConfig> {
    let mut cfg = base;
    if let Some(v) = file.resolve("estimation.order_step1", args.order_step1, parse_usize)? {
        cfg.order_step1 = v;
    }
    if let Some(v) = file.resolve("estimation.order_step2", args.order_step2, parse_usize)? {
        cfg.order_step2 = v;
    }
    if let Some(v) = file.resolve("estimation.order_step3", args.order_step3, parse_usize)? {
        cfg.order_step3 = v;
    }
    if let Some(v) = file.resolve("estimation.k_grid", args.k_grid.clone(), parse_usize_list)? {
        cfg.k_grid = v;
    }
    if let Some(v) = file.resolve("estimation.i_grid", args.i_grid.clone(), parse_usize_list)? {
        cfg.i_grid = v;
    }
    if let Some(v) = file.resolve("estimation.anchor", args.anchor, parse_f64)? {
        cfg.anchor = v;
    }
    if let Some(v) = file.resolve("estimation.extra_rounds", args.extra_rounds, parse_usize)? {
        cfg.extra_rounds = v;
    }
    if let Some(v) = file.resolve("estimation.shared_k", None, parse_bool)? {
        cfg.shared_k = v;
    }
    Ok(cfg)
}

pub fn merge_penalty(
    base: PenaltyConfig,
    args: &PenaltyArgs,
    file: &mut FileConfig,
) -> Result<PenaltyConfig> {
    let mut cfg = base;
    if let Some(v) = file.resolve("penalty.a", args.a, parse_f64)? {
        cfg.a = v;
    }
    if let Some(v) = file.resolve("penalty.lambda_grid", args.lambda_grid.clone(), parse_grid)? {
        cfg.lambda_grid = v;
    }
    if let Some(v) = file.resolve("penalty.mu_grid", args.mu_grid.clone(), parse_grid)? {
        cfg.mu_grid = v;
    }
    if let Some(v) = file.resolve("penalty.zero_threshold", args.zero_threshold, parse_f64)? {
        cfg.zero_threshold = v;
    }
    if let Some(v) = file.resolve("penalty.lqa_floor", args.lqa_floor, parse_f64)? {
        cfg.lqa_floor = v;
    }
    if let Some(v) = file.resolve("penalty.max_iter", args.max_iter, parse_usize)? {
        cfg.max_iter = v;
    }
    if let Some(v) = file.resolve("penalty.coef_tol", args.coef_tol, parse_f64)? {
        cfg.coef_tol = v;
    }
    if let Some(v) = file.resolve("penalty.penalty_scale", args.penalty_scale, parse_f64)? {
        cfg.penalty_scale = Some(v);
    }
    Ok(cfg)
}
