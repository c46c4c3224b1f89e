//! Piecewise-linear membership functions and linguistic variables.

use serde::{Deserialize, Serialize};

use super::FuzzyError;

/// How a membership curve behaves outside its first/last breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    /// Keep the degree of the nearest breakpoint.
    #[default]
    HoldDegree,
    /// Drop to zero.
    Zero,
}

/// A fuzzy subset over a measurement domain, given as a piecewise-linear curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipFunction {
    pub label: String,
    /// `(x, degree)` pairs, strictly increasing in `x`.
    pub points: Vec<(f64, f64)>,
    #[serde(default)]
    pub left: Extension,
    #[serde(default)]
    pub right: Extension,
}

impl MembershipFunction {
    /// Builds a membership function, rejecting breakpoints that violate the curve invariants.
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self, FuzzyError> {
        let mf = Self {
            label: label.into(),
            points,
            left: Extension::HoldDegree,
            right: Extension::HoldDegree,
        };
        mf.check()?;
        Ok(mf)
    }

    pub fn with_extensions(mut self, left: Extension, right: Extension) -> Self {
        self.left = left;
        self.right = right;
        self
    }

    /// Triangle peaking at `peak` with feet at `lo` and `hi`, zero outside.
    pub fn triangle(
        label: impl Into<String>,
        lo: f64,
        peak: f64,
        hi: f64,
    ) -> Result<Self, FuzzyError> {
        Ok(Self::new(label, vec![(lo, 0.0), (peak, 1.0), (hi, 0.0)])?
            .with_extensions(Extension::Zero, Extension::Zero))
    }

    pub(crate) fn check(&self) -> Result<(), FuzzyError> {
        let bad = |reason: &str| FuzzyError::InvalidMembership {
            label: self.label.clone(),
            reason: reason.to_string(),
        };
        if self.points.len() < 2 {
            return Err(bad("at least two breakpoints are required"));
        }
        for &(x, d) in &self.points {
            if !x.is_finite() || !d.is_finite() {
                return Err(bad("breakpoints must be finite"));
            }
            if !(0.0..=1.0).contains(&d) {
                return Err(bad("degrees must lie in [0, 1]"));
            }
        }
        if self.points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(bad("breakpoints must be strictly increasing in x"));
        }
        Ok(())
    }

    /// Degree of membership of `x`. Total for any finite input.
    pub fn evaluate(&self, x: f64) -> f64 {
        let pts = &self.points;
        let (x0, d0) = pts[0];
        let (xn, dn) = pts[pts.len() - 1];
        if x < x0 {
            return match self.left {
                Extension::HoldDegree => d0,
                Extension::Zero => 0.0,
            };
        }
        if x > xn {
            return match self.right {
                Extension::HoldDegree => dn,
                Extension::Zero => 0.0,
            };
        }
        // first breakpoint with x_i >= x
        let idx = pts.partition_point(|&(px, _)| px < x);
        let (xr, dr) = pts[idx];
        if xr == x || idx == 0 {
            return dr;
        }
        let (xl, dl) = pts[idx - 1];
        let t = (x - xl) / (xr - xl);
        (dl + t * (dr - dl)).clamp(0.0, 1.0)
    }

    /// Breakpoint x-positions where the curve reaches 1.0.
    pub fn peak_positions(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter(|&&(_, d)| d >= 1.0)
            .map(|&(x, _)| x)
            .collect()
    }
}

/// A named measurement domain partitioned into labelled fuzzy subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticVariable {
    pub name: String,
    pub domain: (f64, f64),
    /// Domain wraps around (e.g. hour of day); out-of-range inputs are taken modulo the span.
    #[serde(default)]
    pub circular: bool,
    pub members: Vec<MembershipFunction>,
}

/// Crisp measurement mapped onto every label of a variable.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzifiedValue {
    pub variable: String,
    /// The measurement after clamping (or wrapping) into the domain.
    pub raw: f64,
    /// `(label, degree)` in member order.
    pub degrees: Vec<(String, f64)>,
}

impl FuzzifiedValue {
    pub fn degree(&self, label: &str) -> Option<f64> {
        self.degrees
            .iter()
            .find(|(l, _)| l == label)
            .map(|&(_, d)| d)
    }
}

impl LinguisticVariable {
    pub fn member(&self, label: &str) -> Option<&MembershipFunction> {
        self.members.iter().find(|m| m.label == label)
    }

    pub fn member_index(&self, label: &str) -> Option<usize> {
        self.members.iter().position(|m| m.label == label)
    }

    /// Maps a finite measurement into the domain: wraps circular variables, clamps the rest.
    pub fn normalize(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain;
        if self.circular {
            let span = hi - lo;
            lo + (x - lo).rem_euclid(span)
        } else {
            x.clamp(lo, hi)
        }
    }

    /// Singleton fuzzification: each label's degree is its membership at the normalized input.
    pub fn fuzzify(&self, x: f64) -> Result<FuzzifiedValue, FuzzyError> {
        if !x.is_finite() {
            return Err(FuzzyError::NonFiniteInput {
                variable: self.name.clone(),
                value: x,
            });
        }
        let raw = self.normalize(x);
        Ok(FuzzifiedValue {
            variable: self.name.clone(),
            raw,
            degrees: self
                .members
                .iter()
                .map(|m| (m.label.clone(), m.evaluate(raw)))
                .collect(),
        })
    }

    /// Largest membership degree over all members at `x`.
    pub fn max_degree(&self, x: f64) -> f64 {
        self.members
            .iter()
            .map(|m| m.evaluate(x))
            .fold(0.0, f64::max)
    }
}
