//! Rule antecedents: AND/OR trees over `(variable, label)` atoms.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{FuzzifiedValue, FuzzyError};

/// Antecedent expression. Serialized as `{"and":[..]}`, `{"or":[..]}` or `{"atom":[var,label]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Antecedent {
    And(Vec<Antecedent>),
    Or(Vec<Antecedent>),
    Atom(String, String),
}

impl Antecedent {
    pub fn atom(variable: &str, label: &str) -> Self {
        Antecedent::Atom(variable.to_string(), label.to_string())
    }

    /// All `(variable, label)` leaves, left to right.
    pub fn atoms(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<(&'a str, &'a str)>) {
        match self {
            Antecedent::Atom(v, l) => out.push((v, l)),
            Antecedent::And(xs) | Antecedent::Or(xs) => {
                xs.iter().for_each(|x| x.collect_atoms(out))
            }
        }
    }

    /// Premise weight: leaves are membership degrees, AND takes the minimum, OR the maximum.
    pub fn evaluate(&self, env: &HashMap<String, FuzzifiedValue>) -> Result<f64, FuzzyError> {
        self.evaluate_with(&mut |var, label| {
            let value = env
                .get(var)
                .ok_or_else(|| FuzzyError::MissingVariable(var.to_string()))?;
            value.degree(label).ok_or_else(|| FuzzyError::UnknownLabel {
                variable: var.to_string(),
                label: label.to_string(),
            })
        })
    }

    pub(crate) fn evaluate_with<F>(&self, leaf: &mut F) -> Result<f64, FuzzyError>
    where
        F: FnMut(&str, &str) -> Result<f64, FuzzyError>,
    {
        match self {
            Antecedent::Atom(v, l) => leaf(v, l),
            Antecedent::And(xs) => {
                let mut acc = f64::INFINITY;
                for x in xs {
                    acc = acc.min(x.evaluate_with(leaf)?);
                }
                Ok(if xs.is_empty() { 0.0 } else { acc })
            }
            Antecedent::Or(xs) => {
                let mut acc = 0.0f64;
                for x in xs {
                    acc = acc.max(x.evaluate_with(leaf)?);
                }
                Ok(acc)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub antecedent: Antecedent,
    pub consequent: String,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
}

fn enabled_default() -> bool {
    true
}

/// Antecedent compiled against the engine's variable ordering.
#[derive(Debug, Clone)]
pub(crate) enum CompiledExpr {
    And(Vec<CompiledExpr>),
    Or(Vec<CompiledExpr>),
    Atom { variable: usize, member: usize },
}

impl CompiledExpr {
    /// `degrees[v][m]` is the degree of member `m` of input variable `v`.
    pub(crate) fn weight(&self, degrees: &[Vec<f64>]) -> f64 {
        match self {
            CompiledExpr::Atom { variable, member } => degrees[*variable][*member],
            CompiledExpr::And(xs) => xs.iter().map(|x| x.weight(degrees)).fold(1.0, f64::min),
            CompiledExpr::Or(xs) => xs.iter().map(|x| x.weight(degrees)).fold(0.0, f64::max),
        }
    }
}
