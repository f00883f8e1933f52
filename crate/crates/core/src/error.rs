// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("word length {0} outside 1..=64")]
    WordLength(u32),
    #[error("boolean signals are 1 bit wide, got {0}")]
    BooleanWidth(u32),
    #[error("fraction length {0} is not supported")]
    Fraction(u32),
    #[error("sample period {0}/{1} must be positive")]
    Period(u64, u64),
    #[error("cannot parse signal type `{0}`")]
    Syntax(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("unknown block kind `{0}`")]
    UnknownBlockKind(String),
    #[error("type rule violation in `{kind}`: {reason}")]
    TypeRuleViolation { kind: String, reason: String },
}

impl CatalogError {
    pub(crate) fn violation(kind: &str, reason: impl Into<String>) -> Self {
        CatalogError::TypeRuleViolation {
            kind: kind.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("insertion rejected: {}", summarize(.0))]
    ConstraintViolated(Vec<Violation>),
    #[error("insertion point {0} does not name a net")]
    NoSuchNet(String),
    #[error("block {0} does not exist")]
    NoSuchBlock(u32),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("no eligible block kind for the current constraint")]
    NoEligibleKind,
    #[error("generation stalled after {0} consecutive failed fallbacks")]
    GenerationStalled(usize),
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("invalid probability matrix: {0}")]
    Matrix(String),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HdlError {
    #[error("no {dialect} template for block kind `{kind}`")]
    UnsupportedConstruct { kind: String, dialect: String },
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

impl HdlError {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        HdlError::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuidanceError {
    #[error("fact extraction failed: {0}")]
    FactExtraction(String),
    #[error("no insertion point available")]
    NoInsertionPoint,
    #[error(transparent)]
    Hdl(#[from] HdlError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("sandbox error at {path}: {source}")]
    Sandbox {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("adapter `{0}` is misconfigured: {1}")]
    Adapter(String, String),
    #[error("cannot parse trace line {line}: `{text}`")]
    Trace { line: usize, text: String },
}

impl HarnessError {
    pub(crate) fn sandbox(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Sandbox {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("the original case no longer triggers the predicate")]
    TriggerLost,
    #[error("predicate evaluation failed: {0}")]
    Predicate(String),
    #[error("evaluation budget exhausted after {} evaluations", .0.evaluations)]
    BudgetExhausted(Box<crate::reducer::ReductionResult>),
    #[error(transparent)]
    Hdl(#[from] HdlError),
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Hdl(#[from] HdlError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
}

impl CampaignError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CampaignError::Io {
            path: path.into(),
            source,
        }
    }
}
