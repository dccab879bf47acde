//! Run configuration: a plain-text `key = value` format with section
//! headers, chosen so config files diff cleanly and parse without any
//! external format dependency. Serialization and parsing round-trip.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown section '[{name}]'")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key '{key}' in section [{section}]")]
    UnknownKey { line: usize, key: String, section: String },
    #[error("line {line}: could not parse '{value}' as {wanted}")]
    BadValue { line: usize, value: String, wanted: &'static str },
    #[error("eps list must be strictly decreasing and positive, got {0:?}")]
    BadEpsList(Vec<f64>),
    #[error("comparison window [{tau0}, {t_end}] is not a valid time window")]
    BadWindow { tau0: f64, t_end: f64 },
    #[error("tolerances must be positive (rtol {rtol:.3e}, atol {atol:.3e})")]
    BadTolerances { rtol: f64, atol: f64 },
    #[error("tail factor {0} must lie in (0, 1]")]
    BadTailFactor(f64),
    #[error("no system selected; pass --system or a config file with one")]
    MissingSystem,
}

/// Everything a subcommand needs to run, gathered from defaults, an
/// optional config file, and command-line flags (in that order).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: String,
    /// Parameter overrides applied on top of the system defaults.
    pub overrides: Vec<(String, f64)>,
    pub eps_list: Vec<f64>,
    pub tau0: f64,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub force: bool,
    /// Tail errors must stay below this fraction of the sup error for a
    /// sweep to count as converged. The default 1.0 asserts the bare
    /// inclusion, which is not vacuous: the tail window is probed on a
    /// denser grid than the full window, so an error that keeps
    /// oscillating late in the run tops the coarser sup measurement and
    /// fails. Values below 1 additionally demand active decay.
    pub tail_factor: f64,
    /// Record real wall times in the CSV instead of zeros (costs
    /// byte-level reproducibility).
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: String::new(),
            overrides: Vec::new(),
            eps_list: vec![1e-1, 1e-2, 1e-3, 1e-4],
            tau0: 0.1,
            t_end: 50.0,
            rtol: 1e-8,
            atol: 1e-12,
            out_dir: None,
            seed: 1,
            force: false,
            tail_factor: 1.0,
            timing: false,
        }
    }
}

impl RunConfig {
    /// Consistency checks shared by all subcommands; violations are usage
    /// errors (exit code 2), not mathematical failures.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.system.is_empty() {
            return Err(ConfigError::MissingSystem);
        }
        let decreasing = self
            .eps_list
            .windows(2)
            .all(|w| w[1] < w[0]);
        if self.eps_list.is_empty()
            || !decreasing
            || self.eps_list.iter().any(|&e| !(e > 0.0))
        {
            return Err(ConfigError::BadEpsList(self.eps_list.clone()));
        }
        if !(self.tau0 >= 0.0 && self.tau0 < self.t_end) {
            return Err(ConfigError::BadWindow { tau0: self.tau0, t_end: self.t_end });
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(ConfigError::BadTolerances { rtol: self.rtol, atol: self.atol });
        }
        if !(self.tail_factor > 0.0 && self.tail_factor <= 1.0) {
            return Err(ConfigError::BadTailFactor(self.tail_factor));
        }
        Ok(())
    }
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[run]")?;
        writeln!(f, "system = {}", self.system)?;
        if let Some(dir) = &self.out_dir {
            writeln!(f, "out = {}", dir.display())?;
        }
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "force = {}", self.force)?;
        writeln!(f, "tail_factor = {}", self.tail_factor)?;
        writeln!(f, "timing = {}", self.timing)?;
        writeln!(f)?;
        writeln!(f, "[sweep]")?;
        writeln!(f, "eps = {}", join_floats(&self.eps_list))?;
        writeln!(f, "tau0 = {}", self.tau0)?;
        writeln!(f, "t_end = {}", self.t_end)?;
        writeln!(f, "rtol = {}", self.rtol)?;
        writeln!(f, "atol = {}", self.atol)?;
        if !self.overrides.is_empty() {
            writeln!(f)?;
            writeln!(f, "[params]")?;
            for (k, v) in &self.overrides {
                writeln!(f, "{k} = {v}")?;
            }
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(
    value: &str,
    line: usize,
    wanted: &'static str,
) -> Result<T, ConfigError> {
    value
        .parse::<T>()
        .map_err(|_| ConfigError::BadValue { line, value: value.to_string(), wanted })
}

fn parse_bool(value: &str, line: usize) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::BadValue { line, value: value.to_string(), wanted: "bool" }),
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section = String::from("run");
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                match name {
                    "run" | "sweep" | "params" => section = name.to_string(),
                    _ => {
                        return Err(ConfigError::UnknownSection {
                            line,
                            name: name.to_string(),
                        })
                    }
                }
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Malformed { line, text: trimmed.to_string() });
            };
            let key = key.trim();
            let value = value.trim();
            match (section.as_str(), key) {
                ("run", "system") => cfg.system = value.to_string(),
                ("run", "out") => cfg.out_dir = Some(PathBuf::from(value)),
                ("run", "seed") => cfg.seed = parse_num(value, line, "u64")?,
                ("run", "force") => cfg.force = parse_bool(value, line)?,
                ("run", "tail_factor") => cfg.tail_factor = parse_num(value, line, "f64")?,
                ("run", "timing") => cfg.timing = parse_bool(value, line)?,
                ("sweep", "eps") => {
                    let mut eps = Vec::new();
                    for part in value.split(',') {
                        eps.push(parse_num(part.trim(), line, "f64")?);
                    }
                    cfg.eps_list = eps;
                }
                ("sweep", "tau0") => cfg.tau0 = parse_num(value, line, "f64")?,
                ("sweep", "t_end") => cfg.t_end = parse_num(value, line, "f64")?,
                ("sweep", "rtol") => cfg.rtol = parse_num(value, line, "f64")?,
                ("sweep", "atol") => cfg.atol = parse_num(value, line, "f64")?,
                ("params", name) => {
                    cfg.overrides.push((name.to_string(), parse_num(value, line, "f64")?))
                }
                (sec, _) => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                        section: sec.to_string(),
                    })
                }
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let mut cfg = RunConfig {
            system: "maltose_transport".into(),
            eps_list: vec![0.1, 0.003, 1e-4],
            tau0: 0.25,
            t_end: 40.0,
            seed: 99,
            force: true,
            timing: true,
            out_dir: Some(PathBuf::from("results/maltose")),
            ..RunConfig::default()
        };
        cfg.overrides.push(("z0".into(), 1.5));
        cfg.overrides.push(("r0".into(), 0.75));
        let text = cfg.to_string();
        let parsed: RunConfig = text.parse().expect("round trip parse");
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn default_round_trips_too() {
        let cfg = RunConfig { system: "linear_toy".into(), ..RunConfig::default() };
        let parsed: RunConfig = cfg.to_string().parse().unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# comment\n\n[run]\nsystem = linear_toy\n\n# more\n[sweep]\ntau0 = 0.2\n";
        let cfg: RunConfig = text.parse().unwrap();
        assert_eq!(cfg.system, "linear_toy");
        assert_eq!(cfg.tau0, 0.2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = "[run]\nnot a pair\n".parse::<RunConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::Malformed { line: 2, .. }), "{err}");
        let err = "[orbit]\n".parse::<RunConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::UnknownSection { line: 1, .. }), "{err}");
        let err = "[sweep]\nrtol = tight\n".parse::<RunConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { line: 2, .. }), "{err}");
        let err = "[run]\nplanet = mars\n".parse::<RunConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 2, .. }), "{err}");
    }

    #[test]
    fn validation_rejects_bad_windows_and_lists() {
        let base = RunConfig { system: "linear_toy".into(), ..RunConfig::default() };
        assert!(base.validate().is_ok());
        let cfg = RunConfig { eps_list: vec![1e-3, 1e-2], ..base.clone() };
        assert!(matches!(cfg.validate(), Err(ConfigError::BadEpsList(_))));
        let cfg = RunConfig { eps_list: vec![0.1, -0.01], ..base.clone() };
        assert!(matches!(cfg.validate(), Err(ConfigError::BadEpsList(_))));
        let cfg = RunConfig { tau0: 60.0, ..base.clone() };
        assert!(matches!(cfg.validate(), Err(ConfigError::BadWindow { .. })));
        let cfg = RunConfig { tail_factor: 0.0, ..base.clone() };
        assert!(matches!(cfg.validate(), Err(ConfigError::BadTailFactor(_))));
        let cfg = RunConfig { system: String::new(), ..base };
        assert!(matches!(cfg.validate(), Err(ConfigError::MissingSystem)));
    }
}
