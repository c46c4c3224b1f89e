//! JSON fuzzy configuration and its validator.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FuzzyError, LinguisticVariable, Rule};

/// The five crisp inputs the engine scores, by variable name.
pub const INPUT_NAMES: [&str; 5] = [
    "hour",
    "speed_changes",
    "dwell_time",
    "people_count",
    "direction_changes",
];

pub const INPUT_MEMBERS: usize = 3;
pub const OUTPUT_MEMBERS: usize = 5;
pub const DEFAULT_GRID: usize = 1001;
/// Samples per variable used by the coverage check.
pub const COVERAGE_SAMPLES: usize = 10_000;
pub const MIN_COVERAGE: f64 = 0.5;

const DEFAULT_CONFIG: &str = include_str!("../../config/default_fuzzy.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    #[serde(default)]
    pub role: Role,
    #[serde(flatten)]
    pub variable: LinguisticVariable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyConfig {
    pub variables: Vec<VariableSpec>,
    pub rules: Vec<Rule>,
    #[serde(default = "default_grid")]
    pub grid_resolution: usize,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

impl FuzzyConfig {
    /// The configuration shipped with the crate.
    pub fn default_config() -> Self {
        serde_json::from_str(DEFAULT_CONFIG).expect("shipped fuzzy config parses")
    }

    pub fn from_json(text: &str) -> Result<Self, FuzzyError> {
        serde_json::from_str(text).map_err(|e| FuzzyError::Load(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FuzzyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| FuzzyError::Load(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn inputs(&self) -> impl Iterator<Item = &LinguisticVariable> {
        self.variables
            .iter()
            .filter(|v| v.role == Role::Input)
            .map(|v| &v.variable)
    }

    pub fn output(&self) -> Option<&LinguisticVariable> {
        self.variables
            .iter()
            .find(|v| v.role == Role::Output)
            .map(|v| &v.variable)
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.variable.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `max μ < 0.5` over `[from, to]` (sampled).
    Coverage {
        variable: String,
        from: f64,
        to: f64,
        lowest: f64,
    },
    MemberCount {
        variable: String,
        expected: usize,
        found: usize,
    },
    Membership {
        variable: String,
        label: String,
        reason: String,
    },
    /// Output member must reach degree 1.0 at exactly one point.
    OutputPeak {
        variable: String,
        label: String,
        peaks: usize,
    },
    UnknownVariable {
        rule: String,
        variable: String,
    },
    UnknownLabel {
        rule: String,
        variable: String,
        label: String,
    },
    UnknownConsequent {
        rule: String,
        label: String,
    },
    EmptyAntecedent {
        rule: String,
    },
    Structure(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Coverage { variable, from, to, lowest } => write!(
                f,
                "coverage: variable `{variable}` has max membership {lowest:.3} < 0.5 over [{from:.4}, {to:.4}]"
            ),
            Violation::MemberCount { variable, expected, found } => {
                write!(f, "members: variable `{variable}` has {found} members, expected {expected}")
            }
            Violation::Membership { variable, label, reason } => {
                write!(f, "membership: `{variable}.{label}`: {reason}")
            }
            Violation::OutputPeak { variable, label, peaks } => write!(
                f,
                "output peak: `{variable}.{label}` reaches 1.0 at {peaks} breakpoints, expected exactly one"
            ),
            Violation::UnknownVariable { rule, variable } => {
                write!(f, "rule `{rule}`: unknown variable `{variable}`")
            }
            Violation::UnknownLabel { rule, variable, label } => {
                write!(f, "rule `{rule}`: variable `{variable}` has no label `{label}`")
            }
            Violation::UnknownConsequent { rule, label } => {
                write!(f, "rule `{rule}`: output has no label `{label}`")
            }
            Violation::EmptyAntecedent { rule } => write!(f, "rule `{rule}`: empty antecedent group"),
            Violation::Structure(msg) => write!(f, "structure: {msg}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural property the engine depends on; lists all violations found.
pub fn validate_config(config: &FuzzyConfig) -> ValidationReport {
    let mut out = Vec::new();

    let mut seen = HashSet::new();
    for spec in &config.variables {
        if !seen.insert(spec.variable.name.as_str()) {
            out.push(Violation::Structure(format!(
                "duplicate variable `{}`",
                spec.variable.name
            )));
        }
    }
    for name in INPUT_NAMES {
        match config.variable(name) {
            Some(v) if v.role == Role::Input => {}
            _ => out.push(Violation::Structure(format!(
                "missing input variable `{name}`"
            ))),
        }
    }
    let outputs = config
        .variables
        .iter()
        .filter(|v| v.role == Role::Output)
        .count();
    if outputs != 1 {
        out.push(Violation::Structure(format!(
            "expected one output variable, found {outputs}"
        )));
    }
    if config.grid_resolution < 2 {
        out.push(Violation::Structure(
            "grid_resolution must be at least 2".into(),
        ));
    }

    for spec in &config.variables {
        check_variable(spec, &mut out);
    }

    if config.rules.is_empty() {
        out.push(Violation::Structure("rule base is empty".into()));
    }
    let mut rule_ids = HashSet::new();
    for rule in &config.rules {
        if !rule_ids.insert(rule.id.as_str()) {
            out.push(Violation::Structure(format!(
                "duplicate rule id `{}`",
                rule.id
            )));
        }
        check_rule(config, rule, &mut out);
    }

    ValidationReport { violations: out }
}

fn check_variable(spec: &VariableSpec, out: &mut Vec<Violation>) {
    let var = &spec.variable;
    let (lo, hi) = var.domain;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        out.push(Violation::Structure(format!(
            "variable `{}` has an invalid domain",
            var.name
        )));
        return;
    }
    let expected = match spec.role {
        Role::Input => INPUT_MEMBERS,
        Role::Output => OUTPUT_MEMBERS,
    };
    if var.members.len() != expected {
        out.push(Violation::MemberCount {
            variable: var.name.clone(),
            expected,
            found: var.members.len(),
        });
    }
    let mut labels = HashSet::new();
    let mut curves_ok = true;
    for m in &var.members {
        if !labels.insert(m.label.as_str()) {
            out.push(Violation::Membership {
                variable: var.name.clone(),
                label: m.label.clone(),
                reason: "duplicate label".into(),
            });
        }
        if let Err(FuzzyError::InvalidMembership { reason, .. }) = m.check() {
            curves_ok = false;
            out.push(Violation::Membership {
                variable: var.name.clone(),
                label: m.label.clone(),
                reason,
            });
        }
    }
    if !curves_ok || var.members.is_empty() {
        return;
    }

    if spec.role == Role::Output {
        for m in &var.members {
            let peaks = m.peak_positions().len();
            if peaks != 1 {
                out.push(Violation::OutputPeak {
                    variable: var.name.clone(),
                    label: m.label.clone(),
                    peaks,
                });
            }
        }
    }

    // contiguous runs of under-covered samples become one violation each
    let step = (hi - lo) / (COVERAGE_SAMPLES - 1) as f64;
    let mut run: Option<(f64, f64, f64)> = None;
    for k in 0..COVERAGE_SAMPLES {
        let x = if k == COVERAGE_SAMPLES - 1 {
            hi
        } else {
            lo + k as f64 * step
        };
        let m = var.max_degree(x);
        if m < MIN_COVERAGE {
            run = Some(match run {
                Some((from, _, lowest)) => (from, x, lowest.min(m)),
                None => (x, x, m),
            });
        } else if let Some((from, to, lowest)) = run.take() {
            out.push(Violation::Coverage {
                variable: var.name.clone(),
                from,
                to,
                lowest,
            });
        }
    }
    if let Some((from, to, lowest)) = run {
        out.push(Violation::Coverage {
            variable: var.name.clone(),
            from,
            to,
            lowest,
        });
    }
}

fn check_rule(config: &FuzzyConfig, rule: &Rule, out: &mut Vec<Violation>) {
    if has_empty_group(&rule.antecedent) || rule.antecedent.atoms().is_empty() {
        out.push(Violation::EmptyAntecedent {
            rule: rule.id.clone(),
        });
    }
    for (var, label) in rule.antecedent.atoms() {
        match config.variable(var) {
            Some(spec) if spec.role == Role::Input => {
                if spec.variable.member(label).is_none() {
                    out.push(Violation::UnknownLabel {
                        rule: rule.id.clone(),
                        variable: var.to_string(),
                        label: label.to_string(),
                    });
                }
            }
            _ => out.push(Violation::UnknownVariable {
                rule: rule.id.clone(),
                variable: var.to_string(),
            }),
        }
    }
    if let Some(output) = config.output() {
        if output.member(&rule.consequent).is_none() {
            out.push(Violation::UnknownConsequent {
                rule: rule.id.clone(),
                label: rule.consequent.clone(),
            });
        }
    }
}

fn has_empty_group(a: &super::Antecedent) -> bool {
    use super::Antecedent::*;
    match a {
        Atom(..) => false,
        And(xs) | Or(xs) => xs.is_empty() || xs.iter().any(has_empty_group),
    }
}
