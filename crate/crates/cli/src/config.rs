//! Run configuration: flags and an optional TOML run file, merged and then
//! resolved into a fully explicit `RunConfig` (every default written out).

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use cpqsd_core::graphical::default_beta;
use cpqsd_core::spectral::{Policy, MAX_GENERATOR_DEPTH};
use cpqsd_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Spectral,
    Yaglom,
    Breakpoints,
    Criteria,
    VerifyAll,
}

/// Everything that may be given on the command line or in a run file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub command: Option<Command>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub t: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    #[serde(rename = "L")]
    pub l: Option<u32>,
    #[serde(rename = "M")]
    pub m: Option<u64>,
    pub replicas: Option<usize>,
    pub target_survivors: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub policy: Option<Policy>,
}

macro_rules! merge_fields {
    ($flags:ident, $file:ident, $($f:ident),*) => {
        $(
            if let Some(v) = $file.$f.clone() {
                if $flags.$f.as_ref().is_some_and(|x| *x != v) {
                    log::warn!("run file overrides flag `{}`: using {:?}", stringify!($f), v);
                }
                $flags.$f = Some(v);
            }
        )*
    };
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
            message: e.message().to_string(),
        })
    }

    /// Values from `file` win; each conflict is logged.
    pub fn merged(mut self, file: RunFile) -> RunFile {
        merge_fields!(self, file, command, lambda, beta, t, t_grid, l, m, replicas, target_survivors, seed, output_dir, policy);
        self
    }
}

/// The resolved configuration echoed into every manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub lambda: f64,
    pub beta: f64,
    pub t: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    #[serde(rename = "L")]
    pub l: u32,
    #[serde(rename = "M")]
    pub m: Option<u64>,
    pub replicas: usize,
    pub target_survivors: Option<usize>,
    pub seed: u64,
    /// Not part of the run id: the same run in two directories is identical.
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub policy: Policy,
}

fn check(field: &'static str, ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Parameter { field, message: msg() })
    }
}

pub const MAX_T: f64 = 1e4;
pub const MAX_REPLICAS: usize = 100_000_000;

impl RunConfig {
    pub fn resolve(f: RunFile) -> Result<Self> {
        let command = f.command.ok_or_else(|| Error::Parameter { field: "command", message: "no command given".into() })?;
        let lambda = f.lambda.unwrap_or(0.5);
        check("lambda", lambda > 0.0 && lambda <= 100.0, || format!("must lie in (0, 100], got {lambda}"))?;
        let beta = f.beta.unwrap_or_else(|| default_beta(lambda));
        check("beta", beta > 0.0 && beta.is_finite(), || format!("must be positive, got {beta}"))?;
        let default_t = match command {
            Command::Simulate | Command::Breakpoints => Some(10.0),
            Command::Yaglom => Some(20.0),
            Command::Spectral | Command::Criteria | Command::VerifyAll => None,
        };
        let t = f.t.or(if f.t_grid.is_some() { None } else { default_t });
        if let Some(t) = t {
            check("t", (0.0..=MAX_T).contains(&t), || format!("must lie in [0, {MAX_T}], got {t}"))?;
        }
        if let Some(g) = &f.t_grid {
            check("t_grid", !g.is_empty() && g.iter().all(|t| (0.0..=MAX_T).contains(t)), || {
                format!("times must lie in [0, {MAX_T}], got {g:?}")
            })?;
            check("t_grid", g.windows(2).all(|w| w[0] < w[1]), || "times must be increasing".into())?;
        }
        let l = f.l.unwrap_or(match command {
            Command::Spectral => 12,
            Command::Criteria => 16,
            _ => 10,
        });
        let max_l = if matches!(command, Command::Spectral | Command::Criteria) { MAX_GENERATOR_DEPTH } else { 63 };
        check("L", (1..=max_l).contains(&l), || format!("must lie in 1..={max_l}, got {l}"))?;
        if let Some(m) = f.m {
            check("M", (1..=1_000_000).contains(&m), || format!("must lie in 1..=1000000, got {m}"))?;
        }
        let replicas = f.replicas.unwrap_or(match command {
            Command::Simulate => 1000,
            Command::Yaglom => f.target_survivors.unwrap_or(100_000),
            Command::Breakpoints => 1,
            Command::Criteria => 20_000,
            Command::Spectral | Command::VerifyAll => 0,
        });
        check("replicas", replicas <= MAX_REPLICAS, || format!("must be at most {MAX_REPLICAS}, got {replicas}"))?;
        if let Some(s) = f.target_survivors {
            check("target_survivors", (10..=MAX_REPLICAS).contains(&s), || {
                format!("must lie in 10..={MAX_REPLICAS}, got {s}")
            })?;
        }
        Ok(RunConfig {
            command,
            lambda,
            beta,
            t,
            t_grid: f.t_grid,
            l,
            m: f.m,
            replicas,
            target_survivors: f.target_survivors,
            seed: f.seed.unwrap_or(1),
            output_dir: f.output_dir.unwrap_or_else(|| PathBuf::from("cpqsd-out")),
            policy: f.policy.unwrap_or_default(),
        })
    }

    /// The single time or the grid, in that order of preference.
    pub fn times(&self) -> Vec<f64> {
        match (&self.t_grid, self.t) {
            (Some(g), _) => g.clone(),
            (None, Some(t)) => vec![t],
            (None, None) => vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(command: Command) -> RunFile {
        RunFile { command: Some(command), ..Default::default() }
    }

    #[test]
    fn defaults_are_explicit() {
        let c = RunConfig::resolve(flags(Command::Spectral)).unwrap();
        assert_eq!((c.lambda, c.l, c.beta, c.policy), (0.5, 12, 18.0, Policy::Clip));
        let y = RunConfig::resolve(flags(Command::Yaglom)).unwrap();
        assert_eq!((y.t, y.replicas), (Some(20.0), 100_000));
    }

    #[test]
    fn bad_lambda_names_field() {
        let f = RunFile { lambda: Some(-1.0), ..flags(Command::Spectral) };
        match RunConfig::resolve(f) {
            Err(Error::Parameter { field, .. }) => assert_eq!(field, "lambda"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_wins() {
        let cli = RunFile { lambda: Some(0.3), seed: Some(4), ..flags(Command::Yaglom) };
        let file: RunFile = toml::from_str("lambda = 0.4\nL = 8\n").unwrap();
        let m = cli.merged(file);
        assert_eq!((m.lambda, m.seed, m.l), (Some(0.4), Some(4), Some(8)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunFile>("lamda = 0.4\n").is_err());
    }

    #[test]
    fn run_file_command_parses() {
        let f: RunFile = toml::from_str("command = \"verify-all\"\n").unwrap();
        assert_eq!(f.command, Some(Command::VerifyAll));
    }
}
