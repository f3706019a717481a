use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building a model, integrating it, or
/// analysing its output.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("far-field limits differ at -inf ({left}) and +inf ({right}) for `{name}`")]
    AsymmetricFarField { name: String, left: f64, right: f64 },

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error("degenerate domain: h = {h} is not to the right of g = {g}")]
    DegenerateDomain { g: f64, h: f64 },

    #[error(
        "scheme instability at t = {t}: {field} = {value} leaves [0, {bound}] (try a smaller time step)"
    )]
    SchemeInstability {
        t: f64,
        field: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("numerical blow-up at t = {t}: non-finite {field}")]
    NumericalBlowup { t: f64, field: &'static str },

    #[error("missing history: {0}")]
    MissingHistory(String),

    #[error("eigen solver did not converge after {iterations} iterations (last change {last_change:e})")]
    EigenNoConvergence { iterations: usize, last_change: f64 },

    #[error(
        "no sign change of kappa(lambda) - lambda on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}"
    )]
    BracketFailure {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("subcritical domain: R0 on (-{half_width}, {half_width}) is {r0} <= 1")]
    SubcriticalDomain { half_width: f64, r0: f64 },

    #[error("upper and lower monotone limits differ by {gap:e} (tolerance {tolerance:e})")]
    UniquenessGapWarning { gap: f64, tolerance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid bracket [{mu_lo}, {mu_hi}]: {reason}")]
    InvalidBracket {
        mu_lo: f64,
        mu_hi: f64,
        reason: String,
    },

    #[error("runs stayed undecided inside [{mu_lo}, {mu_hi}] (last probe mu = {probe})")]
    InconclusiveRegion { mu_lo: f64, mu_hi: f64, probe: f64 },

    #[error("{0}")]
    Config(ConfigErrors),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SchemeInstability { .. }
                | Error::NumericalBlowup { .. }
                | Error::EigenNoConvergence { .. }
                | Error::BracketFailure { .. }
                | Error::SubcriticalDomain { .. }
                | Error::UniquenessGapWarning { .. }
                | Error::InconclusiveRegion { .. }
                | Error::InvalidBracket { .. }
        )
    }
}

/// One schema violation with the dotted field path it was found at.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

/// All violations found in a configuration document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl ConfigErrors {
    pub fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mentions(&self, field: &str) -> bool {
        self.0.iter().any(|i| i.field == field)
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s):", self.0.len())?;
        for issue in &self.0 {
            write!(f, "\n  {}: {}", issue.field, issue.message)?;
        }
        Ok(())
    }
}
