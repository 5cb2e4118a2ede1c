//! JSON instance files.
//!
//! ```json
//! {
//!   "n": 3,
//!   "y": [0.5, 0.5, 1.0],
//!   "constraints": [
//!     { "coeffs": [1, 1, 0], "b": 1 },
//!     { "indices": [1, 2], "lambda": "inf" }
//!   ],
//!   "matroid": { "kind": "partition", "parts": [[0, 1], [2]], "capacities": [1, 1] }
//! }
//! ```
//!
//! Optional blocks: `laminar`, `costs` (degmat), `multicrit`, `paths`
//! (rsp / laminar-rsp), `groups`. When `paths` is present, `n` and `y` may
//! be omitted; they then describe the candidate paths in pair order.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matroid::{LaminarFamily, LaminarSense, LaminarSet, Matroid};
use crate::schedules::{DegreeConstraint, LaminarRequirement, LinearRow, PathWeight};
use crate::walk::{Lambda, SideConstraint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseCode {
    Schema,
    Dimension,
    Range,
}

impl ParseCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseCode::Schema => "E_SCHEMA",
            ParseCode::Dimension => "E_DIMENSION",
            ParseCode::Range => "E_RANGE",
        }
    }
}

impl fmt::Display for ParseCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{code} at {location}: {message}")]
pub struct ParseError {
    pub code: ParseCode,
    /// `line:column` for syntax errors, a field path otherwise.
    pub location: String,
    pub message: String,
}

impl ParseError {
    fn new(code: ParseCode, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self { code, location: location.into(), message: message.into() }
    }
}

/// `λ` as written in a file: a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Word(InfWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfWord {
    Inf,
}

impl LambdaSpec {
    pub fn to_lambda(self) -> Lambda {
        match self {
            LambdaSpec::Value(v) => Lambda::Finite(v),
            LambdaSpec::Word(_) => Lambda::Unbounded,
        }
    }
}

/// One side constraint: dense `coeffs`, or sparse `indices` with optional
/// `weights` (default 1). `b` defaults to `⟨a, y⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaSpec>,
}

impl ConstraintSpec {
    pub fn dense(&self, n: usize) -> Vec<f64> {
        match (&self.coeffs, &self.indices) {
            (Some(c), _) => c.clone(),
            (None, Some(idx)) => {
                let mut a = vec![0.0; n];
                for (k, &i) in idx.iter().enumerate() {
                    a[i] += self.weights.as_ref().map_or(1.0, |w| w[k]);
                }
                a
            }
            (None, None) => vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatroidSpec {
    Uniform { rank: usize },
    Partition { parts: Vec<Vec<usize>>, capacities: Vec<usize> },
    Graphic { vertices: usize, edges: Vec<(usize, usize)> },
    Explicit { bases: Vec<Vec<usize>> },
}

impl MatroidSpec {
    pub fn build(&self, n: usize) -> Result<Matroid, crate::matroid::MatroidError> {
        match self {
            MatroidSpec::Uniform { rank } => Ok(Matroid::uniform(n, (*rank).min(n))),
            MatroidSpec::Partition { parts, capacities } => Matroid::partition(n, parts.clone(), capacities.clone()),
            MatroidSpec::Graphic { vertices, edges } => Matroid::graphic(*vertices, edges.clone()),
            MatroidSpec::Explicit { bases } => Matroid::explicit(n, bases.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaminarSpec {
    pub sense: LaminarSense,
    pub sets: Vec<LaminarSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MulticritSpec {
    pub costs: Vec<Vec<f64>>,
    pub budgets: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSpec {
    pub capacities: Vec<f64>,
    pub pairs: Vec<Vec<PathWeight>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requirements: Vec<LaminarRequirement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub y: Vec<f64>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matroid: Option<MatroidSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laminar: Option<LaminarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multicrit: Option<MulticritSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<PathsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<usize>>,
}

fn check_finite(v: &[f64], field: &str) -> Result<(), ParseError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(ParseError::new(ParseCode::Range, format!("{field}[{i}]"), "value is not finite")),
        None => Ok(()),
    }
}

fn check_index(i: usize, n: usize, field: &str) -> Result<(), ParseError> {
    if i >= n {
        return Err(ParseError::new(ParseCode::Range, field, format!("index {i} is outside 0..{n}")));
    }
    Ok(())
}

impl InstanceFile {
    /// Checks dimensions, ranges and the structure blocks.
    pub fn validate(&mut self) -> Result<(), ParseError> {
        if let Some(p) = &self.paths {
            let total: usize = p.pairs.iter().map(Vec::len).sum();
            if self.y.is_empty() && self.n == 0 {
                self.n = total;
                self.y = p.pairs.iter().flatten().map(|w| w.weight.min(1.0)).collect();
            } else if self.n != total {
                return Err(ParseError::new(
                    ParseCode::Dimension,
                    "n",
                    format!("n = {} but the paths block lists {total} candidate paths", self.n),
                ));
            }
            check_finite(&p.capacities, "paths.capacities")?;
            for (pi, list) in p.pairs.iter().enumerate() {
                for (k, w) in list.iter().enumerate() {
                    let at = format!("paths.pairs[{pi}][{k}]");
                    if !(w.weight.is_finite() && w.weight >= 0.0) {
                        return Err(ParseError::new(ParseCode::Range, format!("{at}.weight"), "weight must be a nonnegative number"));
                    }
                    for &e in &w.edges {
                        check_index(e, p.capacities.len(), &format!("{at}.edges"))?;
                    }
                }
            }
            for (t, r) in p.requirements.iter().enumerate() {
                for &pi in &r.pairs {
                    check_index(pi, p.pairs.len(), &format!("paths.requirements[{t}].pairs"))?;
                }
            }
        }
        let n = self.n;
        if self.y.len() != n {
            return Err(ParseError::new(ParseCode::Dimension, "y", format!("y has {} entries but n = {n}", self.y.len())));
        }
        for (i, &v) in self.y.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(ParseError::new(ParseCode::Range, format!("y[{i}]"), format!("coordinate {i} = {v} lies outside [0, 1]")));
            }
        }
        for (j, c) in self.constraints.iter().enumerate() {
            let at = format!("constraints[{j}]");
            match (&c.coeffs, &c.indices) {
                (Some(_), Some(_)) => {
                    return Err(ParseError::new(ParseCode::Schema, at, "give either coeffs or indices, not both"));
                }
                (None, None) => return Err(ParseError::new(ParseCode::Schema, at, "missing coeffs or indices")),
                (Some(a), None) => {
                    if a.len() != n {
                        return Err(ParseError::new(
                            ParseCode::Dimension,
                            format!("{at}.coeffs"),
                            format!("{} coefficients but n = {n}", a.len()),
                        ));
                    }
                    check_finite(a, &format!("{at}.coeffs"))?;
                }
                (None, Some(idx)) => {
                    for &i in idx {
                        check_index(i, n, &format!("{at}.indices"))?;
                    }
                    if let Some(w) = &c.weights {
                        if w.len() != idx.len() {
                            return Err(ParseError::new(
                                ParseCode::Dimension,
                                format!("{at}.weights"),
                                format!("{} weights for {} indices", w.len(), idx.len()),
                            ));
                        }
                        check_finite(w, &format!("{at}.weights"))?;
                    }
                }
            }
            if c.coeffs.is_some() && c.weights.is_some() {
                return Err(ParseError::new(ParseCode::Schema, format!("{at}.weights"), "weights only apply to indices"));
            }
            if let Some(b) = c.b {
                if !b.is_finite() {
                    return Err(ParseError::new(ParseCode::Range, format!("{at}.b"), "target is not finite"));
                }
            }
            if let Some(LambdaSpec::Value(l)) = c.lambda {
                if !(l >= 0.0 && l.is_finite()) {
                    return Err(ParseError::new(ParseCode::Range, format!("{at}.lambda"), "lambda must be nonnegative or \"inf\""));
                }
            }
        }
        if let Some(m) = &self.matroid {
            m.build(n).map_err(|e| ParseError::new(ParseCode::Range, "matroid", e.to_string()))?;
            if let MatroidSpec::Graphic { edges, .. } = m {
                if edges.len() != n {
                    return Err(ParseError::new(ParseCode::Dimension, "matroid.edges", format!("{} edges but n = {n}", edges.len())));
                }
            }
        }
        if let Some(l) = &self.laminar {
            for (i, s) in l.sets.iter().enumerate() {
                if !s.value.is_finite() {
                    return Err(ParseError::new(ParseCode::Range, format!("laminar.sets[{i}].value"), "value is not finite"));
                }
            }
            LaminarFamily::new(n, l.sense, l.sets.clone()).map_err(|e| ParseError::new(ParseCode::Range, "laminar", e.to_string()))?;
        }
        if let Some(c) = &self.costs {
            if c.len() != n {
                return Err(ParseError::new(ParseCode::Dimension, "costs", format!("{} costs but n = {n}", c.len())));
            }
            if let Some(i) = c.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(ParseError::new(ParseCode::Range, format!("costs[{i}]"), "cost must be nonnegative"));
            }
        }
        if let Some(mc) = &self.multicrit {
            if mc.budgets.len() != mc.costs.len() {
                return Err(ParseError::new(
                    ParseCode::Dimension,
                    "multicrit.budgets",
                    format!("{} budgets for {} cost functions", mc.budgets.len(), mc.costs.len()),
                ));
            }
            for (j, c) in mc.costs.iter().enumerate() {
                if c.len() != n {
                    return Err(ParseError::new(ParseCode::Dimension, format!("multicrit.costs[{j}]"), format!("{} entries but n = {n}", c.len())));
                }
                if let Some(i) = c.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(ParseError::new(ParseCode::Range, format!("multicrit.costs[{j}][{i}]"), "cost must be nonnegative"));
                }
            }
            if let Some(j) = mc.budgets.iter().position(|b| !(b.is_finite() && *b > 0.0)) {
                return Err(ParseError::new(ParseCode::Range, format!("multicrit.budgets[{j}]"), "budget must be positive"));
            }
            if !(mc.epsilon > 0.0 && mc.epsilon.is_finite()) {
                return Err(ParseError::new(ParseCode::Range, "multicrit.epsilon", "epsilon must be positive"));
            }
        }
        if let Some(g) = &self.groups {
            if g.len() != self.constraints.len() {
                return Err(ParseError::new(
                    ParseCode::Dimension,
                    "groups",
                    format!("{} group ids for {} constraints", g.len(), self.constraints.len()),
                ));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> Vec<LinearRow> {
        self.constraints
            .iter()
            .map(|c| {
                let a = c.dense(self.n);
                let b = c.b.unwrap_or_else(|| crate::numeric::dot(&a, &self.y));
                LinearRow { a, b }
            })
            .collect()
    }

    /// Side constraints with their explicit `λ` (unbounded when absent).
    pub fn side_constraints(&self) -> Vec<SideConstraint> {
        self.constraints
            .iter()
            .map(|c| SideConstraint::new(c.dense(self.n), c.lambda.map_or(Lambda::Unbounded, LambdaSpec::to_lambda)))
            .collect()
    }

    /// Sparse constraints read as degree sets with bound `b` (default `⟨a, y⟩`).
    pub fn degree_constraints(&self) -> Vec<DegreeConstraint> {
        self.rows()
            .into_iter()
            .map(|r| DegreeConstraint { set: (0..self.n).filter(|&i| r.a[i] != 0.0).collect(), bound: r.b })
            .collect()
    }

    pub fn build_matroid(&self) -> Option<Matroid> {
        self.matroid.as_ref().map(|m| m.build(self.n).expect("validated"))
    }

    pub fn build_laminar(&self) -> Option<LaminarFamily> {
        self.laminar.as_ref().map(|l| LaminarFamily::new(self.n, l.sense, l.sets.clone()).expect("validated"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }
}

/// Parses and validates an instance file.
pub fn parse_instance(bytes: &[u8]) -> Result<InstanceFile, ParseError> {
    let mut inst: InstanceFile = serde_json::from_slice(bytes).map_err(|e| {
        let code = match e.classify() {
            serde_json::error::Category::Data => ParseCode::Schema,
            _ => ParseCode::Schema,
        };
        ParseError::new(code, format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    inst.validate()?;
    Ok(inst)
}
