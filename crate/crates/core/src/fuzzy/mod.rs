//! Mamdani fuzzy controller: fuzzification, min/max rule evaluation, clipping,
//! max aggregation and centroid defuzzification onto a 0 to 100 suspicion scale.

mod config;
mod engine;
mod error_log;
mod membership;
mod rule;

pub use config::{
    validate_config, FuzzyConfig, Role, ValidationReport, VariableSpec, Violation,
    COVERAGE_SAMPLES, DEFAULT_GRID, INPUT_MEMBERS, INPUT_NAMES, MIN_COVERAGE, OUTPUT_MEMBERS,
};
pub use engine::{
    defuzzify, Activation, AggregatedOutput, FuzzyEngine, ScoreInputs, ScoreStatus, SuspicionScore,
};
pub use error_log::{format_error_line, ErrorLog, FileErrorLog, MemoryErrorLog};
pub use membership::{Extension, FuzzifiedValue, LinguisticVariable, MembershipFunction};
pub use rule::{Antecedent, Rule};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("invalid membership function `{label}`: {reason}")]
    InvalidMembership { label: String, reason: String },
    #[error("non-finite input {value} for variable `{variable}`")]
    NonFiniteInput { variable: String, value: f64 },
    #[error("variable `{0}` missing from the fuzzified inputs")]
    MissingVariable(String),
    #[error("variable `{variable}` has no label `{label}`")]
    UnknownLabel { variable: String, label: String },
    #[error("rule base is empty")]
    EmptyRuleBase,
    #[error("invalid fuzzy configuration:\n{0}")]
    InvalidConfig(ValidationReport),
    #[error("cannot load fuzzy configuration: {0}")]
    Load(String),
}
