use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("distribution has no outcomes")]
    Empty,
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("entry {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("all weights are zero")]
    ZeroMass,
}

/// Which rule a model tensor broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ViolationKind {
    NotStochastic,
    NegativeEntry,
    DimensionMismatch,
    NonFiniteEntry,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ViolationKind::NotStochastic => "NotStochastic",
            ViolationKind::NegativeEntry => "NegativeEntry",
            ViolationKind::DimensionMismatch => "DimensionMismatch",
            ViolationKind::NonFiniteEntry => "NonFiniteEntry",
        };
        f.write_str(name)
    }
}

/// One broken rule, located by tensor name and index path.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub tensor: String,
    pub index: Vec<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.tensor)?;
        if !self.index.is_empty() {
            let idx: Vec<String> = self.index.iter().map(|i| i.to_string()).collect();
            write!(f, "[{}]", idx.join(","))?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Every violation found while validating a model description.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("enumeration needs {terms} joint terms, above the cap of {cap}")]
    HorizonOverflow { terms: u128, cap: u128 },
    #[error("observation at timestep {timestep} has zero probability under the model")]
    ZeroEvidence { timestep: usize },
    #[error("observation {observation} has zero predictive probability at timestep {timestep}")]
    ZeroProbabilityObservation { observation: usize, timestep: usize },
    #[error("invalid history: {0}")]
    InvalidHistory(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanningError {
    #[error("{count} policies exceed the cap of {cap}")]
    PolicySpaceOverflow { count: u128, cap: u128 },
    #[error("precision must be finite and non-negative, got {0}")]
    InvalidPrecision(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no remaining decisions: history already reaches the horizon")]
    HorizonReached,
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("step called after the episode finished")]
    StepAfterDone,
    #[error("step called before reset")]
    NotReset,
    #[error("action {action} out of range for {n_actions} actions")]
    InvalidAction { action: usize, n_actions: usize },
    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),
    #[error("unknown environment {0:?}")]
    UnknownEnvironment(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("model error: {0}")]
    Model(#[from] ValidationReport),
    #[error("trial {trial}: {source}")]
    Planning {
        trial: usize,
        #[source]
        source: PlanningError,
    },
    #[error("trial {trial}: {source}")]
    Environment {
        trial: usize,
        #[source]
        source: EnvError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
