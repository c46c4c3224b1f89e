use std::collections::HashMap;

use super::config::{validate_config, FuzzyConfig, INPUT_NAMES};
use super::rule::{Antecedent, CompiledExpr};
use super::{ErrorLog, FuzzifiedValue, FuzzyError, LinguisticVariable};

/// Crisp measurements for one object, in the units of each input variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreInputs {
    /// Local hour of day, `[0, 24)`.
    pub hour: f64,
    pub speed_changes: f64,
    /// Seconds.
    pub dwell_time: f64,
    pub people_count: f64,
    pub direction_changes: f64,
}

impl ScoreInputs {
    fn as_array(&self) -> [f64; 5] {
        [
            self.hour,
            self.speed_changes,
            self.dwell_time,
            self.people_count,
            self.direction_changes,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreStatus {
    Ok,
    InputError,
}

impl ScoreStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreStatus::Ok => "ok",
            ScoreStatus::InputError => "input-error",
        }
    }
}

/// Defuzzified suspicion on a 0 to 100 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SuspicionScore {
    pub value: f64,
    pub status: ScoreStatus,
    pub error_detail: Option<String>,
}

impl SuspicionScore {
    pub fn ok(value: f64) -> Self {
        Self {
            value,
            status: ScoreStatus::Ok,
            error_detail: None,
        }
    }

    /// Erroneous inputs always score exactly zero so no alarm can follow.
    pub fn input_error(detail: impl Into<String>) -> Self {
        Self {
            value: 0.0,
            status: ScoreStatus::InputError,
            error_detail: Some(detail.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ScoreStatus::Ok
    }
}

/// One fired rule: its premise weight and its consequent clipped at that weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub rule_id: String,
    pub consequent: String,
    pub weight: f64,
    /// `min(weight, C(z))` sampled on the output grid.
    pub clipped: Vec<f64>,
}

/// Max-aggregate of all clipped consequents over a uniform output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedOutput {
    pub activations: Vec<Activation>,
    pub envelope: Vec<f64>,
    pub domain: (f64, f64),
}

impl AggregatedOutput {
    pub fn grid_resolution(&self) -> usize {
        self.envelope.len()
    }

    pub fn z(&self, k: usize) -> f64 {
        grid_point(self.domain, self.envelope.len(), k)
    }
}

fn grid_point((lo, hi): (f64, f64), n: usize, k: usize) -> f64 {
    if k + 1 == n {
        hi
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

/// Discrete centroid `Σ z·env(z) / Σ env(z)`; an all-zero envelope scores 0.
pub fn defuzzify(agg: &AggregatedOutput) -> SuspicionScore {
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, &e) in agg.envelope.iter().enumerate() {
        num += agg.z(k) * e;
        den += e;
    }
    if den <= 0.0 {
        return SuspicionScore::ok(0.0);
    }
    let (lo, hi) = agg.domain;
    SuspicionScore::ok((num / den).clamp(lo, hi))
}

#[derive(Debug, Clone)]
struct CompiledRule {
    id: String,
    expr: CompiledExpr,
    consequent: usize,
    enabled: bool,
}

/// Immutable scoring engine built from a validated [`FuzzyConfig`].
#[derive(Debug, Clone)]
pub struct FuzzyEngine {
    config: FuzzyConfig,
    /// Input variables in `INPUT_NAMES` order.
    inputs: Vec<LinguisticVariable>,
    output: LinguisticVariable,
    rules: Vec<CompiledRule>,
    /// `curves[m][k]`: output member `m` sampled at grid point `k`.
    curves: Vec<Vec<f64>>,
}

impl FuzzyEngine {
    pub fn new(config: FuzzyConfig) -> Result<Self, FuzzyError> {
        let report = validate_config(&config);
        if !report.is_ok() {
            return Err(FuzzyError::InvalidConfig(report));
        }
        let inputs: Vec<LinguisticVariable> = INPUT_NAMES
            .iter()
            .map(|name| config.variable(name).expect("validated").variable.clone())
            .collect();
        let output = config.output().expect("validated").clone();

        let index_of = |var: &str| INPUT_NAMES.iter().position(|n| *n == var);
        let rules = config
            .rules
            .iter()
            .map(|r| {
                Ok(CompiledRule {
                    id: r.id.clone(),
                    expr: compile(&r.antecedent, &inputs, &index_of)?,
                    consequent: output.member_index(&r.consequent).ok_or_else(|| {
                        FuzzyError::UnknownLabel {
                            variable: output.name.clone(),
                            label: r.consequent.clone(),
                        }
                    })?,
                    enabled: r.enabled,
                })
            })
            .collect::<Result<Vec<_>, FuzzyError>>()?;

        let n = config.grid_resolution;
        let curves = output
            .members
            .iter()
            .map(|m| {
                (0..n)
                    .map(|k| m.evaluate(grid_point(output.domain, n, k)))
                    .collect()
            })
            .collect();

        Ok(Self {
            config,
            inputs,
            output,
            rules,
            curves,
        })
    }

    pub fn default_engine() -> Self {
        Self::new(FuzzyConfig::default_config()).expect("shipped fuzzy config is valid")
    }

    /// Same configuration sampled on a different output grid.
    pub fn with_grid_resolution(&self, n: usize) -> Result<Self, FuzzyError> {
        let mut config = self.config.clone();
        config.grid_resolution = n;
        Self::new(config)
    }

    pub fn config(&self) -> &FuzzyConfig {
        &self.config
    }

    pub fn output_variable(&self) -> &LinguisticVariable {
        &self.output
    }

    pub fn input_variable(&self, name: &str) -> Option<&LinguisticVariable> {
        self.inputs.iter().find(|v| v.name == name)
    }

    pub fn fuzzify(&self, variable: &str, x: f64) -> Result<FuzzifiedValue, FuzzyError> {
        self.input_variable(variable)
            .ok_or_else(|| FuzzyError::MissingVariable(variable.to_string()))?
            .fuzzify(x)
    }

    /// Fuzzifies all five inputs into a name-keyed environment.
    pub fn fuzzify_inputs(
        &self,
        inputs: &ScoreInputs,
    ) -> Result<HashMap<String, FuzzifiedValue>, FuzzyError> {
        self.inputs
            .iter()
            .zip(inputs.as_array())
            .map(|(var, x)| Ok((var.name.clone(), var.fuzzify(x)?)))
            .collect()
    }

    /// Evaluates every enabled rule against `env`, clips and max-aggregates the consequents.
    pub fn infer(
        &self,
        env: &HashMap<String, FuzzifiedValue>,
    ) -> Result<AggregatedOutput, FuzzyError> {
        if self.rules.is_empty() {
            return Err(FuzzyError::EmptyRuleBase);
        }
        let mut fired = Vec::new();
        for (rule, spec) in self.rules.iter().zip(&self.config.rules) {
            if !rule.enabled {
                continue;
            }
            fired.push((rule, spec.antecedent.evaluate(env)?));
        }
        Ok(self.aggregate_compiled(fired))
    }

    /// Aggregates explicit `(consequent label, weight)` activations.
    pub fn aggregate(&self, activations: &[(&str, f64)]) -> Result<AggregatedOutput, FuzzyError> {
        let n = self.config.grid_resolution;
        let mut envelope = vec![0.0; n];
        let mut out = Vec::new();
        for (i, &(label, w)) in activations.iter().enumerate() {
            let m = self
                .output
                .member_index(label)
                .ok_or_else(|| FuzzyError::UnknownLabel {
                    variable: self.output.name.clone(),
                    label: label.to_string(),
                })?;
            if let Some(a) = self.clip(format!("a{i}"), m, w, &mut envelope) {
                out.push(a);
            }
        }
        Ok(AggregatedOutput {
            activations: out,
            envelope,
            domain: self.output.domain,
        })
    }

    fn aggregate_compiled(&self, fired: Vec<(&CompiledRule, f64)>) -> AggregatedOutput {
        let mut envelope = vec![0.0; self.config.grid_resolution];
        let activations = fired
            .into_iter()
            .filter_map(|(rule, w)| self.clip(rule.id.clone(), rule.consequent, w, &mut envelope))
            .collect();
        AggregatedOutput {
            activations,
            envelope,
            domain: self.output.domain,
        }
    }

    fn clip(
        &self,
        rule_id: String,
        member: usize,
        weight: f64,
        envelope: &mut [f64],
    ) -> Option<Activation> {
        let weight = weight.clamp(0.0, 1.0);
        if weight <= 0.0 {
            return None;
        }
        let clipped: Vec<f64> = self.curves[member].iter().map(|&c| c.min(weight)).collect();
        for (e, &c) in envelope.iter_mut().zip(&clipped) {
            *e = e.max(c);
        }
        Some(Activation {
            rule_id,
            consequent: self.output.members[member].label.clone(),
            weight,
            clipped,
        })
    }

    /// Scores one object. Non-finite inputs yield an input-error score of 0.
    pub fn score(&self, inputs: &ScoreInputs) -> Result<SuspicionScore, FuzzyError> {
        if self.rules.is_empty() {
            return Err(FuzzyError::EmptyRuleBase);
        }
        let mut degrees = Vec::with_capacity(self.inputs.len());
        for (var, x) in self.inputs.iter().zip(inputs.as_array()) {
            match var.fuzzify(x) {
                Ok(f) => degrees.push(f.degrees.into_iter().map(|(_, d)| d).collect::<Vec<_>>()),
                Err(e @ FuzzyError::NonFiniteInput { .. }) => {
                    return Ok(SuspicionScore::input_error(e.to_string()))
                }
                Err(e) => return Err(e),
            }
        }
        let fired = self
            .rules
            .iter()
            .filter(|r| r.enabled)
            .map(|r| (r, r.expr.weight(&degrees)))
            .collect();
        Ok(defuzzify(&self.aggregate_compiled(fired)))
    }

    /// [`score`](Self::score), additionally acknowledging erroneous inputs in `log`.
    pub fn score_object(
        &self,
        object_id: &str,
        timestamp: f64,
        inputs: &ScoreInputs,
        log: &dyn ErrorLog,
    ) -> Result<SuspicionScore, FuzzyError> {
        let score = self.score(inputs)?;
        if let Some(detail) = &score.error_detail {
            log.append(timestamp, object_id, detail);
        }
        Ok(score)
    }
}

fn compile(
    a: &Antecedent,
    inputs: &[LinguisticVariable],
    index_of: &dyn Fn(&str) -> Option<usize>,
) -> Result<CompiledExpr, FuzzyError> {
    Ok(match a {
        Antecedent::Atom(v, l) => {
            let variable = index_of(v).ok_or_else(|| FuzzyError::MissingVariable(v.clone()))?;
            let member =
                inputs[variable]
                    .member_index(l)
                    .ok_or_else(|| FuzzyError::UnknownLabel {
                        variable: v.clone(),
                        label: l.clone(),
                    })?;
            CompiledExpr::Atom { variable, member }
        }
        Antecedent::And(xs) => CompiledExpr::And(
            xs.iter()
                .map(|x| compile(x, inputs, index_of))
                .collect::<Result<_, _>>()?,
        ),
        Antecedent::Or(xs) => CompiledExpr::Or(
            xs.iter()
                .map(|x| compile(x, inputs, index_of))
                .collect::<Result<_, _>>()?,
        ),
    })
}
