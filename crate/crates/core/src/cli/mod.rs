//! Command-line front end: problem files, command dispatch and rendering.
//!
//! Exit codes: 0 when every checked property holds, 1 when one fails, 2 on
//! input errors.

mod render;
mod run;
mod spec;

use std::path::PathBuf;

use thiserror::Error;

pub use run::{run, Outcome};
pub use spec::{load_spec, parse_spec, GapSpec, OperatorSource, PerturbationSpec, ProblemSpec, StabilitySpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{}{message}", line.map_or(String::new(), |l| format!("line {l}: ")))]
    Spec { line: Option<usize>, message: String },
    #[error(transparent)]
    Core(#[from] crate::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(crate::Error::Hypothesis { .. }) => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapKind {
    Vip,
    Ep,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    CheckCoupling(PathBuf),
    Conjugate(PathBuf),
    Duality(PathBuf),
    Saddle(PathBuf),
    Perturb(PathBuf),
    Gap(GapKind, PathBuf),
    Stability(PathBuf),
    /// Randomized invariant checks driven by `--seed`; needs no problem file.
    Selfcheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckCoupling(_) => "check-coupling",
            Command::Conjugate(_) => "conjugate",
            Command::Duality(_) => "duality",
            Command::Saddle(_) => "saddle",
            Command::Perturb(_) => "perturb",
            Command::Gap(GapKind::Vip, _) => "gap vip",
            Command::Gap(GapKind::Ep, _) => "gap ep",
            Command::Stability(_) => "stability",
            Command::Selfcheck => "selfcheck",
        }
    }

    /// Parses `command [args…]` as typed on the command line.
    pub fn parse(words: &[String]) -> Result<Command, CliError> {
        let path = |w: Option<&String>| {
            w.map(PathBuf::from).ok_or_else(|| CliError::Usage("missing problem file".into()))
        };
        let cmd = match words.first().map(String::as_str) {
            Some("check-coupling") => Command::CheckCoupling(path(words.get(1))?),
            Some("conjugate") => Command::Conjugate(path(words.get(1))?),
            Some("duality") => Command::Duality(path(words.get(1))?),
            Some("saddle") => Command::Saddle(path(words.get(1))?),
            Some("perturb") => Command::Perturb(path(words.get(1))?),
            Some("stability") => Command::Stability(path(words.get(1))?),
            Some("gap") => {
                let kind = match words.get(1).map(String::as_str) {
                    Some("vip") => GapKind::Vip,
                    Some("ep") => GapKind::Ep,
                    other => return Err(CliError::Usage(format!("gap needs `vip` or `ep`, got {other:?}"))),
                };
                Command::Gap(kind, path(words.get(2))?)
            }
            Some("selfcheck") => Command::Selfcheck,
            Some(other) => return Err(CliError::Usage(format!("unknown command `{other}`"))),
            None => return Err(CliError::Usage("missing command".into())),
        };
        let used = match cmd {
            Command::Gap(..) => 3,
            Command::Selfcheck => 1,
            _ => 2,
        };
        if words.len() > used {
            return Err(CliError::Usage(format!("unexpected argument `{}`", words[used])));
        }
        Ok(cmd)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Flags {
    /// Overrides `zero_tol`.
    pub tol: Option<f64>,
    /// Directory for CSV outputs; without it CSVs are appended to stdout.
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for Flags {
    fn default() -> Self {
        Flags { tol: None, out: None, seed: 20240917, threads: None }
    }
}
