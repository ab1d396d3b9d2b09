//! Run configuration: command-line flags layered over an optional JSON file
//! with the same keys.

use crate::CliError;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Flags shared by every command. Everything is optional so that values
/// from `--config` can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON file with the same keys as the flags (`tol_abs`, `params`, ...).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Built-in system name.
    #[arg(long)]
    pub system: Option<String>,
    /// Parameter overrides.
    #[arg(long, value_name = "K=V", num_args = 1..)]
    pub params: Vec<String>,
    /// Directory for data files and `report.json`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Absolute integrator tolerance.
    #[arg(long)]
    pub tol_abs: Option<f64>,
    /// Relative integrator tolerance.
    #[arg(long)]
    pub tol_rel: Option<f64>,
    /// Seed for randomised sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Transition matrix file, or a built-in name (`A4`, `B8`).
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<String>,
    /// Symbol word, e.g. `1,3,2` or `132`.
    #[arg(long, value_name = "SYMBOLS")]
    pub word: Option<String>,
    /// Word length for `entropy`; map index (or search bound for flows) for `certify`.
    #[arg(long, value_name = "INT")]
    pub m: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Initial point `x,y,z`.
    #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Integration time.
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Period guess for orbit refinement.
    #[arg(long)]
    pub period: Option<f64>,
    /// Skip the parameter range checks of the example flows.
    #[arg(long)]
    pub allow_degenerate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub system: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub out: Option<PathBuf>,
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
    pub seed: Option<u64>,
    pub matrix: Option<String>,
    pub word: Option<String>,
    pub m: Option<usize>,
    pub format: Option<Format>,
    pub x0: Option<[f64; 3]>,
    pub t: Option<f64>,
    pub period: Option<f64>,
    pub allow_degenerate: bool,
}

/// The merged configuration. Serialised into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub system: Option<String>,
    pub params: BTreeMap<String, f64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
    pub seed: u64,
    pub matrix: Option<String>,
    pub word: Option<String>,
    pub m: Option<usize>,
    pub format: Format,
    pub x0: Option<[f64; 3]>,
    pub t: Option<f64>,
    pub period: Option<f64>,
    pub allow_degenerate: bool,
}

fn parse_param(s: &str) -> Result<(String, f64), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("parameter `{s}` is not of the form k=v")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("parameter `{k}` has non-numeric value `{v}`")))?;
    Ok((k.trim().to_string(), v))
}

fn parse_point(s: &str) -> Result<[f64; 3], CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("bad point `{s}`")))?;
    <[f64; 3]>::try_from(v).map_err(|_| CliError::Usage(format!("point `{s}` needs three coordinates")))
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str::<FileConfig>(&text)
                    .map_err(|e| CliError::Usage(format!("bad config {}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };
        let mut params = file.params;
        for p in &flags.params {
            let (k, v) = parse_param(p)?;
            params.insert(k, v);
        }
        let x0 = match &flags.x0 {
            Some(s) => Some(parse_point(s)?),
            None => file.x0,
        };
        let cfg = RunConfig {
            system: flags.system.clone().or(file.system),
            params,
            out: flags.out.clone().or(file.out),
            tol_abs: flags.tol_abs.or(file.tol_abs),
            tol_rel: flags.tol_rel.or(file.tol_rel),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            matrix: flags.matrix.clone().or(file.matrix),
            word: flags.word.clone().or(file.word),
            m: flags.m.or(file.m),
            format: flags.format.or(file.format).unwrap_or_default(),
            x0,
            t: flags.t.or(file.t),
            period: flags.period.or(file.period),
            allow_degenerate: flags.allow_degenerate || file.allow_degenerate,
        };
        for (name, v) in [("tol-abs", cfg.tol_abs), ("tol-rel", cfg.tol_rel)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Usage(format!("--{name} must be positive, got {v}")));
                }
            }
        }
        Ok(cfg)
    }

    pub fn system(&self) -> Result<&str, CliError> {
        self.system.as_deref().ok_or_else(|| CliError::Usage("--system is required".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"system": "example1", "params": {"alpha": 0.4, "gamma": 0.2}, "seed": 7}"#).unwrap();
        let flags = Flags {
            config: Some(p),
            params: vec!["gamma=0.5".into()],
            seed: Some(3),
            ..Flags::default()
        };
        let c = RunConfig::resolve(&flags).unwrap();
        assert_eq!(c.system.as_deref(), Some("example1"));
        assert_eq!(c.params["alpha"], 0.4);
        assert_eq!(c.params["gamma"], 0.5);
        assert_eq!(c.seed, 3);
    }

    #[test]
    fn unknown_file_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"sytem": "example1"}"#).unwrap();
        let flags = Flags { config: Some(p), ..Flags::default() };
        assert!(matches!(RunConfig::resolve(&flags), Err(CliError::Usage(_))));
    }

    #[test]
    fn params_and_points_parse() {
        assert_eq!(parse_param("alpha=0.25").unwrap(), ("alpha".to_string(), 0.25));
        assert!(parse_param("alpha").is_err());
        assert_eq!(parse_point("1,-2,3.5").unwrap(), [1.0, -2.0, 3.5]);
        assert!(parse_point("1,2").is_err());
    }
}
