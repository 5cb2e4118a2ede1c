//! Partial rounding by a scaled random walk inside a polytope `Q`.
//!
//! `Q` keeps the point inside the structure (matroid polytope or laminar
//! family), inside a band around each side constraint, on the class-sum
//! hyperplanes, and under per-class variable caps. Every step moves along a
//! random sign combination of an orthonormal basis of the free subspace,
//! rescaled coordinate-wise by the scale `s_i`. A step that would leave `Q`
//! is cut at the boundary and the constraint that stopped it is registered,
//! which removes one dimension from the free subspace.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matroid::{LaminarFamily, LaminarSense, Matroid, MatroidError, Separation};
use crate::numeric::{self, dot, norm, ConstraintMatrix, NumericError, ToleranceModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("coordinate {index} = {value} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("side constraint {row} has {found} coefficients, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("lambda condition fails: sum {sum:.4} is not below f/16 = {bound:.4}")]
    LambdaCondition { sum: f64, bound: f64 },
    #[error("starting point infeasible: {0}")]
    Infeasible(String),
    #[error("invalid walk configuration: {0}")]
    BadConfig(String),
    #[error("walk invariant broken: {0}")]
    InvariantBreach(String),
    #[error(transparent)]
    Matroid(#[from] MatroidError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Slack multiplier of a side constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Finite(f64),
    Unbounded,
}

impl Lambda {
    pub fn finite(self) -> Option<f64> {
        match self {
            Lambda::Finite(v) => Some(v),
            Lambda::Unbounded => None,
        }
    }
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lambda::Finite(v) => write!(f, "{v:.6}"),
            Lambda::Unbounded => f.write_str("inf"),
        }
    }
}

/// A side constraint `⟨a, x⟩ ≈ b` with slack multiplier `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SideConstraint {
    pub a: Vec<f64>,
    pub b: Option<f64>,
    pub lambda: Lambda,
}

impl SideConstraint {
    pub fn new(a: Vec<f64>, lambda: Lambda) -> Self {
        Self { a, b: None, lambda }
    }
}

/// Exactly preserved structure.
#[derive(Debug, Clone, Default)]
pub enum Structure {
    #[default]
    Free,
    Matroid(Matroid),
    Laminar(LaminarFamily),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleClass {
    Frozen,
    U(u32),
    V(u32),
}

/// Dyadic classification of the coordinates of a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleClasses {
    pub labels: Vec<ScaleClass>,
    /// `2^-k` for fractional coordinates, 0 for frozen ones.
    pub scales: Vec<f64>,
    pub ell: u32,
}

impl ScaleClasses {
    pub fn fractional_count(&self) -> usize {
        self.labels.iter().filter(|c| **c != ScaleClass::Frozen).count()
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] != ScaleClass::Frozen).collect()
    }

    /// Members of every nonempty class, `U_1..U_ℓ` then `V_1..V_ℓ`.
    pub fn groups(&self) -> Vec<(ScaleClass, Vec<usize>)> {
        let mut out = Vec::new();
        for upper in [false, true] {
            for k in 1..=self.ell {
                let c = if upper { ScaleClass::V(k) } else { ScaleClass::U(k) };
                let members: Vec<usize> = (0..self.labels.len()).filter(|&i| self.labels[i] == c).collect();
                if !members.is_empty() {
                    out.push((c, members));
                }
            }
        }
        out
    }
}

/// Number of dyadic levels for `f` fractional coordinates: `3⌈log₂ f⌉`, with
/// `f` floored at 2.
pub fn level_count(f: usize) -> u32 {
    let f = f.max(2);
    3 * (usize::BITS - (f - 1).leading_zeros())
}

pub fn classify_scales(y: &[f64]) -> Result<ScaleClasses, WalkError> {
    for (index, &value) in y.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(WalkError::OutOfRange { index, value });
        }
    }
    let f = y.iter().filter(|&&v| v > 0.0 && v < 1.0).count();
    let ell = level_count(f);
    let mut labels = Vec::with_capacity(y.len());
    let mut scales = Vec::with_capacity(y.len());
    for &v in y {
        if v == 0.0 || v == 1.0 {
            labels.push(ScaleClass::Frozen);
            scales.push(0.0);
            continue;
        }
        let (dist, upper) = if v <= 0.5 { (v, false) } else { (1.0 - v, true) };
        let mut k = 1u32;
        while k < ell && dist <= 0.5f64.powi(k as i32 + 1) {
            k += 1;
        }
        labels.push(if upper { ScaleClass::V(k) } else { ScaleClass::U(k) });
        scales.push(0.5f64.powi(k as i32));
    }
    Ok(ScaleClasses { labels, scales, ell })
}

pub fn potential(x: &[f64], classes: &ScaleClasses) -> f64 {
    x.iter()
        .zip(&classes.labels)
        .map(|(&v, c)| match *c {
            ScaleClass::Frozen => 0.0,
            ScaleClass::U(k) => 4f64.powi(k as i32) * v * v,
            ScaleClass::V(k) => 4f64.powi(k as i32) * (1.0 - v) * (1.0 - v),
        })
        .sum()
}

/// `Σ_j exp(-min(λ_j, f)² / K0) < f / 16`, unbounded entries contributing 0.
pub fn check_lambda_condition(lambdas: &[Lambda], f: usize, k0: f64) -> bool {
    lambda_sum(lambdas, f, k0) < f as f64 / 16.0
}

pub fn lambda_sum(lambdas: &[Lambda], f: usize, k0: f64) -> f64 {
    let cap = f as f64;
    lambdas
        .iter()
        .filter_map(|l| l.finite())
        .map(|l| (-(l.min(cap).powi(2)) / k0).exp())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Practical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub steps: u64,
    pub k0: f64,
    pub slack_exp: f64,
    pub restarts: u32,
    pub stop_fraction: f64,
    /// Fraction of the fractional coordinates that must become integral for
    /// an attempt to count as a success. At least one is always required.
    pub success_fraction: f64,
    pub preset: Preset,
    /// Invariant audit period in steps.
    pub check_every: u64,
    #[serde(skip)]
    pub tol: ToleranceModel,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self::practical()
    }
}

impl WalkConfig {
    pub fn practical() -> Self {
        let alpha = 4.0;
        let gamma = 0.04;
        Self {
            alpha,
            gamma,
            steps: (10.0 * alpha * alpha / (gamma * gamma)).round() as u64,
            k0: 10.0,
            slack_exp: 3.0,
            restarts: 5,
            stop_fraction: 1.0 / 20.0,
            success_fraction: 1.0 / 40.0,
            preset: Preset::Practical,
            check_every: if cfg!(debug_assertions) { 1 } else { 100 },
            tol: ToleranceModel::default(),
        }
    }

    /// Constants as stated for the analysis. The step budget saturates for
    /// anything but tiny `n`.
    pub fn paper(n: usize) -> Self {
        let alpha = 40.0;
        let gamma = (n.max(2) as f64).powi(-6);
        let k = 10.0 * alpha * alpha;
        Self {
            alpha,
            gamma,
            steps: (k / (gamma * gamma)) as u64,
            k0: 10.0,
            slack_exp: 3.0,
            restarts: 5,
            stop_fraction: 1.0,
            success_fraction: 0.1 - 1.0 / alpha,
            preset: Preset::Paper,
            check_every: if cfg!(debug_assertions) { 1 } else { 100 },
            tol: ToleranceModel::default(),
        }
    }

    pub fn validate(&self) -> Result<(), WalkError> {
        let bad = |m: &str| Err(WalkError::BadConfig(m.to_string()));
        if !(self.alpha >= 2.0) {
            return bad("alpha must be at least 2");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if self.steps < 1 {
            return bad("step budget must be at least 1");
        }
        if !(self.k0 > 0.0) {
            return bad("K0 must be positive");
        }
        if self.restarts < 1 {
            return bad("restarts must be at least 1");
        }
        if !(self.stop_fraction > 0.0 && self.stop_fraction <= 1.0) {
            return bad("stop fraction must lie in (0, 1]");
        }
        if self.check_every < 1 {
            return bad("check period must be at least 1");
        }
        Ok(())
    }

    pub fn success_threshold(&self, f: usize) -> usize {
        ((self.success_fraction.max(0.0) * f as f64).ceil() as usize).max(1)
    }

    pub fn stop_threshold(&self, f: usize) -> usize {
        ((self.stop_fraction * f as f64).ceil() as usize).max(1)
    }
}

/// A side constraint band `|⟨a, x - y⟩| ≤ radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub a: Vec<f64>,
    pub center: f64,
    pub lambda: Lambda,
    pub w_s: f64,
    pub w_y: f64,
    pub slack_term: f64,
    /// `None` for unbounded multipliers: tracked but never enforced.
    pub radius: Option<f64>,
}

/// Identifier of a constraint of `Q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintId {
    Lower(usize),
    Upper(usize),
    BandLow(usize),
    BandHigh(usize),
    Laminar(usize),
    Rank(Vec<usize>),
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintId::Lower(i) => write!(f, "x[{i}] >= lower"),
            ConstraintId::Upper(i) => write!(f, "x[{i}] <= upper"),
            ConstraintId::BandLow(j) => write!(f, "side {j} lower band"),
            ConstraintId::BandHigh(j) => write!(f, "side {j} upper band"),
            ConstraintId::Laminar(i) => write!(f, "laminar set {i}"),
            ConstraintId::Rank(s) => write!(f, "rank set {s:?}"),
        }
    }
}

/// Sizes of the constraint groups of `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintCounts {
    pub structure: usize,
    pub side: usize,
    pub class: usize,
    pub boxes: usize,
}

/// The polytope `Q` around a starting point `y`.
#[derive(Debug, Clone)]
pub struct Polytope {
    pub y: Vec<f64>,
    pub classes: ScaleClasses,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub bands: Vec<Band>,
    pub class_sums: Vec<(ScaleClass, Vec<usize>, f64)>,
    pub structure: Structure,
    pub alpha: f64,
}

impl Polytope {
    pub fn build(y: &[f64], side: &[SideConstraint], structure: Structure, cfg: &WalkConfig) -> Result<Self, WalkError> {
        let n = y.len();
        let classes = classify_scales(y)?;
        let f = classes.fractional_count();
        let nf = f.max(2) as f64;
        let mut lower = y.to_vec();
        let mut upper = y.to_vec();
        for i in 0..n {
            match classes.labels[i] {
                ScaleClass::Frozen => {}
                ScaleClass::U(k) => {
                    lower[i] = 0.0;
                    upper[i] = (cfg.alpha * 0.5f64.powi(k as i32)).min(1.0);
                }
                ScaleClass::V(k) => {
                    lower[i] = (1.0 - cfg.alpha * 0.5f64.powi(k as i32)).max(0.0);
                    upper[i] = 1.0;
                }
            }
        }
        let mut bands = Vec::with_capacity(side.len());
        for (j, c) in side.iter().enumerate() {
            if c.a.len() != n {
                return Err(WalkError::DimensionMismatch { row: j, expected: n, found: c.a.len() });
            }
            let mut w_s = 0.0;
            let mut w_y = 0.0;
            for i in 0..n {
                let s = classes.scales[i];
                let d = y[i].min(1.0 - y[i]);
                w_s += c.a[i] * c.a[i] * s * s;
                w_y += c.a[i] * c.a[i] * d * d;
            }
            let slack_term = norm(&c.a) / nf.powf(cfg.slack_exp);
            debug_assert!(w_y <= w_s * (1.0 + 1e-12) + 1e-300);
            let radius = c.lambda.finite().map(|l| l.min(nf).max(0.0) * w_s.sqrt() + slack_term);
            bands.push(Band { a: c.a.clone(), center: dot(&c.a, y), lambda: c.lambda, w_s, w_y, slack_term, radius });
        }
        let class_sums = classes
            .groups()
            .into_iter()
            .map(|(c, members)| {
                let s = members.iter().map(|&i| y[i]).sum();
                (c, members, s)
            })
            .collect();
        let tol = cfg.tol;
        match &structure {
            Structure::Free => {}
            Structure::Matroid(m) => {
                if m.ground_size() != n {
                    return Err(WalkError::Infeasible(format!(
                        "matroid has {} elements, point has {n}",
                        m.ground_size()
                    )));
                }
                if let Separation::Violated { set, excess } = m.separate(y, &tol)? {
                    return Err(WalkError::Infeasible(format!("rank of {set:?} exceeded by {excess:e}")));
                }
            }
            Structure::Laminar(fam) => {
                if fam.ground_size() != n {
                    return Err(WalkError::Infeasible(format!(
                        "laminar family over {} elements, point has {n}",
                        fam.ground_size()
                    )));
                }
                for i in 0..fam.sets().len() {
                    let s = fam.slack(i, y);
                    if s < -tol.eps_feas * (1.0 + fam.sets()[i].value.abs()) {
                        return Err(WalkError::Infeasible(format!("laminar set {i} violated by {:e}", -s)));
                    }
                }
            }
        }
        Ok(Self { y: y.to_vec(), classes, lower, upper, bands, class_sums, structure, alpha: cfg.alpha })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn counts(&self) -> ConstraintCounts {
        let structure = match &self.structure {
            Structure::Free => 0,
            Structure::Matroid(m) => 1usize.checked_shl(m.ground_size() as u32).unwrap_or(usize::MAX),
            Structure::Laminar(f) => f.sets().len(),
        };
        ConstraintCounts {
            structure,
            side: self.bands.len(),
            class: 2 * self.classes.ell as usize,
            boxes: 2 * self.dim(),
        }
    }

    /// Largest violation of the linear constraints of `Q` at `x` (box, caps,
    /// enforced bands, class sums, laminar requirements), structure excluded.
    pub fn linear_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..x.len() {
            worst = worst.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        for b in &self.bands {
            if let Some(r) = b.radius {
                worst = worst.max((dot(&b.a, x) - b.center).abs() - r);
            }
        }
        for (_, members, s) in &self.class_sums {
            let v: f64 = members.iter().map(|&i| x[i]).sum();
            worst = worst.max((v - s).abs() / (1.0 + s.abs()));
        }
        if let Structure::Laminar(f) = &self.structure {
            for i in 0..f.sets().len() {
                worst = worst.max(-f.slack(i, x));
            }
        }
        worst
    }

    pub fn contains(&self, x: &[f64], tol: &ToleranceModel) -> Result<bool, WalkError> {
        if self.linear_violation(x) > tol.eps_feas {
            return Ok(false);
        }
        if let Structure::Matroid(m) = &self.structure {
            return Ok(m.separate(x, tol)? == Separation::Inside);
        }
        Ok(true)
    }

    /// Largest `μ ∈ [0, mu_max]` such that `x + μ d` satisfies every
    /// inequality of `Q` not marked in `skip`, and the constraint that binds.
    /// Constraints whose rate along `d` is numerically zero are ignored.
    fn max_step(
        &self,
        x: &[f64],
        d: &[f64],
        mu_max: f64,
        skip: &Registry,
        band_rates: &mut [f64],
        tol: &ToleranceModel,
    ) -> Result<(f64, Option<ConstraintId>), WalkError> {
        let dn = norm(d);
        let mut best = mu_max;
        let mut hit = None;
        if dn == 0.0 {
            return Ok((best, hit));
        }
        let eps = 1e-13 * dn;
        for i in 0..x.len() {
            if skip.var[i] || d[i].abs() <= eps {
                continue;
            }
            let (t, id) = if d[i] > 0.0 {
                ((self.upper[i] - x[i]) / d[i], ConstraintId::Upper(i))
            } else {
                ((self.lower[i] - x[i]) / d[i], ConstraintId::Lower(i))
            };
            let t = t.max(0.0);
            if t < best {
                best = t;
                hit = Some(id);
            }
        }
        for (j, b) in self.bands.iter().enumerate() {
            let rate = dot(&b.a, d);
            band_rates[j] = rate;
            let Some(r) = b.radius else { continue };
            if skip.band[j] || rate.abs() <= eps * norm(&b.a) {
                continue;
            }
            let v = dot(&b.a, x) - b.center;
            let (t, id) = if rate > 0.0 {
                ((r - v) / rate, ConstraintId::BandHigh(j))
            } else {
                ((-r - v) / rate, ConstraintId::BandLow(j))
            };
            let t = t.max(0.0);
            if t < best {
                best = t;
                hit = Some(id);
            }
        }
        match &self.structure {
            Structure::Free => {}
            Structure::Laminar(fam) => {
                for (i, set) in fam.sets().iter().enumerate() {
                    if skip.laminar[i] {
                        continue;
                    }
                    let rate: f64 = set.members.iter().map(|&e| d[e]).sum();
                    let slack = fam.slack(i, x).max(0.0);
                    let closing = match fam.sense() {
                        LaminarSense::AtMost => rate,
                        LaminarSense::AtLeast => -rate,
                        LaminarSense::Equal => rate.abs(),
                    };
                    if closing <= eps {
                        continue;
                    }
                    let t = slack / closing;
                    if t < best {
                        best = t;
                        hit = Some(ConstraintId::Laminar(i));
                    }
                }
            }
            Structure::Matroid(m) => {
                let (mu, set) = m.max_step(x, d, best, tol)?;
                if let Some(set) = set {
                    if mu < best {
                        best = mu;
                        hit = Some(ConstraintId::Rank(set));
                    }
                }
            }
        }
        Ok((best, hit))
    }
}

#[derive(Debug, Clone)]
struct Registry {
    var: Vec<bool>,
    band: Vec<bool>,
    laminar: Vec<bool>,
}

impl Registry {
    fn new(n: usize, bands: usize, laminar: usize) -> Self {
        Self { var: vec![false; n], band: vec![false; bands], laminar: vec![false; laminar] }
    }
}

/// Moves from `x` toward `target` as far as `Q` allows. Equality constraints
/// of `Q` are not consulted: the segment is assumed to stay on them.
pub fn truncate(
    q: &Polytope,
    x: &[f64],
    target: &[f64],
    tol: &ToleranceModel,
) -> Result<(Vec<f64>, Option<ConstraintId>), WalkError> {
    if q.linear_violation(x) > tol.eps_feas {
        return Err(WalkError::InvariantBreach("truncation started outside Q".into()));
    }
    let d: Vec<f64> = target.iter().zip(x).map(|(t, a)| t - a).collect();
    let lam = match &q.structure {
        Structure::Laminar(f) => f.sets().len(),
        _ => 0,
    };
    let skip = Registry::new(x.len(), q.bands.len(), lam);
    let mut rates = vec![0.0; q.bands.len()];
    let (mu, hit) = q.max_step(x, &d, 1.0, &skip, &mut rates, tol)?;
    let mut out: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + mu * b).collect();
    if let Some(ConstraintId::Upper(i)) = hit {
        out[i] = q.upper[i];
    }
    if let Some(ConstraintId::Lower(i)) = hit {
        out[i] = q.lower[i];
    }
    Ok((out, hit))
}

/// Why a walk attempt ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StopFraction,
    Exhausted,
    StepBudget,
    AlreadyIntegral,
}

/// Structure audit taken at a truncation against a rank face, and at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub step: u64,
    pub separation_ok: bool,
    pub chain_len: usize,
    pub strictly_fractional: bool,
    pub ground_size: usize,
}

/// Summary of one walk attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkReport {
    pub attempt: u32,
    pub steps: u64,
    pub truncations: usize,
    pub degenerate_hits: usize,
    pub fractional_start: usize,
    pub var_tight: usize,
    pub side_tight: usize,
    pub structure_rows: usize,
    pub new_integral: usize,
    pub free_dim_start: usize,
    pub free_dim_end: usize,
    pub potential_start: f64,
    pub potential_end: f64,
    pub max_class_drift: f64,
    pub reason: StopReason,
    pub success: bool,
    pub audits: Vec<Audit>,
}

/// One stepping walk over a fixed polytope.
pub struct Walker<'q> {
    q: &'q Polytope,
    cfg: WalkConfig,
    rng: ChaCha8Rng,
    x: Vec<f64>,
    s: Vec<f64>,
    basis: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
    reg: Registry,
    direction: Vec<f64>,
    rows_at_draw: usize,
    band_rates: Vec<f64>,
    steps: u64,
    truncations: usize,
    degenerate: usize,
    var_tight: usize,
    side_tight: usize,
    structure_rows: usize,
    free_dim_start: usize,
    audits: Vec<Audit>,
    attempt: u32,
}

/// Outcome of a single step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Moved,
    Truncated(ConstraintId),
    Exhausted,
}

impl<'q> Walker<'q> {
    /// Starts a walk at `q.y`. The random stream is `seed` on stream
    /// `attempt`, so restarts never share randomness.
    pub fn new(q: &'q Polytope, cfg: &WalkConfig, seed: u64, attempt: u32) -> Result<Self, WalkError> {
        cfg.validate()?;
        let n = q.dim();
        let tol = cfg.tol;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let s: Vec<f64> = q.classes.scales.iter().map(|&v| if v > 0.0 { v } else { 1.0 }).collect();
        let lam = match &q.structure {
            Structure::Laminar(f) => f.sets().len(),
            _ => 0,
        };
        let mut reg = Registry::new(n, q.bands.len(), lam);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            if q.classes.labels[i] == ScaleClass::Frozen {
                reg.var[i] = true;
                rows.push(unit(n, i));
            }
        }
        for (_, members, _) in &q.class_sums {
            rows.push(indicator(n, members));
        }
        let mut structure_rows = 0;
        match &q.structure {
            Structure::Free => {}
            Structure::Matroid(m) => {
                for set in m.tight_chain(&q.y, &tol)?.sets {
                    rows.push(indicator(n, &set));
                    structure_rows += 1;
                }
            }
            Structure::Laminar(fam) => {
                let tight = fam.laminar_tight(&q.y, &tol);
                for (i, set) in fam.sets().iter().enumerate() {
                    if tight.contains(&i) {
                        reg.laminar[i] = true;
                        rows.push(indicator(n, &set.members));
                        structure_rows += 1;
                    } else if fam.sense() == LaminarSense::Equal {
                        return Err(WalkError::Infeasible(format!("laminar equality {i} does not hold")));
                    }
                }
            }
        }
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&s).map(|(a, b)| a * b).collect()).collect();
        let basis = numeric::orthonormal_nullspace_basis(&ConstraintMatrix::new(n, scaled)?, &tol)?;
        let free_dim_start = basis.len();
        Ok(Self {
            q,
            cfg: cfg.clone(),
            rng,
            x: q.y.clone(),
            s,
            basis,
            rows,
            reg,
            direction: vec![0.0; n],
            rows_at_draw: 0,
            band_rates: vec![0.0; q.bands.len()],
            steps: 0,
            truncations: 0,
            degenerate: 0,
            var_tight: 0,
            side_tight: 0,
            structure_rows,
            free_dim_start,
            audits: Vec::new(),
            attempt,
        })
    }

    pub fn point(&self) -> &[f64] {
        &self.x
    }

    pub fn free_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn truncations(&self) -> usize {
        self.truncations
    }

    pub fn var_tight(&self) -> usize {
        self.var_tight
    }

    pub fn audits(&self) -> &[Audit] {
        &self.audits
    }

    /// Step vector `Ḡ` of the most recent step (before truncation).
    pub fn last_direction(&self) -> &[f64] {
        &self.direction
    }

    /// Draws `Ḡ = s ⊙ Σ_h g_h b_h` with independent uniform signs `g_h`.
    /// Returns `false` when the free subspace is empty.
    pub fn random_direction(&mut self) -> bool {
        self.direction.iter_mut().for_each(|v| *v = 0.0);
        self.rows_at_draw = self.rows.len();
        if self.basis.is_empty() {
            return false;
        }
        let mut bits = 0u64;
        for (h, b) in self.basis.iter().enumerate() {
            if h % 64 == 0 {
                bits = self.rng.next_u64();
            }
            let g = if (bits >> (h % 64)) & 1 == 1 { 1.0 } else { -1.0 };
            numeric::axpy(g, b, &mut self.direction);
        }
        for (d, s) in self.direction.iter_mut().zip(&self.s) {
            *d *= s;
        }
        true
    }

    pub fn step(&mut self) -> Result<StepOutcome, WalkError> {
        if !self.random_direction() {
            return Ok(StepOutcome::Exhausted);
        }
        self.steps += 1;
        let tol = self.cfg.tol;
        let d: Vec<f64> = self.direction.iter().map(|v| v * self.cfg.gamma).collect();
        let (mu, hit) = self.q.max_step(&self.x, &d, 1.0, &self.reg, &mut self.band_rates, &tol)?;
        numeric::axpy(mu, &d, &mut self.x);
        let outcome = match hit {
            None => StepOutcome::Moved,
            Some(id) => {
                self.register_hit(&id)?;
                StepOutcome::Truncated(id)
            }
        };
        if self.steps % self.cfg.check_every == 0 {
            self.check_invariants()?;
        }
        Ok(outcome)
    }

    fn register_row(&mut self, row: Vec<f64>) -> bool {
        let scaled: Vec<f64> = row.iter().zip(&self.s).map(|(a, b)| a * b).collect();
        let added = numeric::remove_direction(&mut self.basis, &scaled, 1e-9);
        if added {
            self.rows.push(row);
        }
        added
    }

    fn register_hit(&mut self, id: &ConstraintId) -> Result<(), WalkError> {
        let n = self.x.len();
        let tol = self.cfg.tol;
        let added = match id {
            ConstraintId::Lower(i) | ConstraintId::Upper(i) => {
                let i = *i;
                self.x[i] = if matches!(id, ConstraintId::Lower(_)) { self.q.lower[i] } else { self.q.upper[i] };
                self.reg.var[i] = true;
                self.var_tight += 1;
                self.register_row(unit(n, i))
            }
            ConstraintId::BandLow(j) | ConstraintId::BandHigh(j) => {
                self.reg.band[*j] = true;
                self.side_tight += 1;
                self.register_row(self.q.bands[*j].a.clone())
            }
            ConstraintId::Laminar(i) => {
                let Structure::Laminar(fam) = &self.q.structure else { unreachable!() };
                self.reg.laminar[*i] = true;
                self.structure_rows += 1;
                self.register_row(indicator(n, &fam.sets()[*i].members))
            }
            ConstraintId::Rank(set) => {
                let Structure::Matroid(m) = &self.q.structure else { unreachable!() };
                let mut added = self.register_row(indicator(n, set));
                let chain = m.tight_chain(&self.x, &tol)?;
                for s in &chain.sets {
                    if self.register_row(indicator(n, s)) {
                        added = true;
                    }
                }
                if added {
                    self.structure_rows += 1;
                }
                let ok = m.separate(&self.x, &tol)? == Separation::Inside;
                let strictly = self.x.iter().all(|&v| v > tol.eps_tight && v < 1.0 - tol.eps_tight);
                self.audits.push(Audit {
                    step: self.steps,
                    separation_ok: ok,
                    chain_len: chain.len(),
                    strictly_fractional: strictly,
                    ground_size: n,
                });
                added
            }
        };
        if added {
            self.truncations += 1;
        } else {
            self.degenerate += 1;
        }
        let f = self.q.classes.fractional_count();
        assert!(
            self.truncations <= f,
            "truncation counter {} exceeds fractional count {f}",
            self.truncations
        );
        Ok(())
    }

    /// Checks `X ∈ Q`, class-sum conservation, and that the last direction
    /// is orthogonal to every row registered before it was drawn.
    pub fn check_invariants(&self) -> Result<(), WalkError> {
        let tol = self.cfg.tol;
        let v = self.q.linear_violation(&self.x);
        if v > tol.eps_feas {
            return Err(WalkError::InvariantBreach(format!("linear constraints of Q violated by {v:e}")));
        }
        let drift = self.class_drift();
        if drift > 1e-9 {
            return Err(WalkError::InvariantBreach(format!("class sums drifted by {drift:e}")));
        }
        if let Structure::Matroid(m) = &self.q.structure {
            if let Separation::Violated { set, excess } = m.separate(&self.x, &tol)? {
                return Err(WalkError::InvariantBreach(format!("rank of {set:?} exceeded by {excess:e}")));
            }
        }
        for row in &self.rows[..self.rows_at_draw] {
            let c = dot(row, &self.direction).abs();
            if c > 1e-8 * norm(row) {
                return Err(WalkError::InvariantBreach(format!("step leaves a registered face by {c:e}")));
            }
        }
        Ok(())
    }

    fn class_drift(&self) -> f64 {
        self.q
            .class_sums
            .iter()
            .map(|(_, members, s)| {
                let v: f64 = members.iter().map(|&i| self.x[i]).sum();
                (v - s).abs() / (1.0 + s.abs())
            })
            .fold(0.0, f64::max)
    }

    fn new_integral(&self) -> usize {
        (0..self.x.len())
            .filter(|&i| self.q.classes.labels[i] != ScaleClass::Frozen && (self.x[i] == 0.0 || self.x[i] == 1.0))
            .count()
    }

    /// Runs until the stop fraction is reached, the free subspace is empty,
    /// or the step budget is spent.
    pub fn run(&mut self) -> Result<StopReason, WalkError> {
        let f = self.q.classes.fractional_count();
        let target = self.cfg.stop_threshold(f);
        while self.steps < self.cfg.steps {
            if self.var_tight >= target {
                return Ok(StopReason::StopFraction);
            }
            if self.step()? == StepOutcome::Exhausted {
                return Ok(StopReason::Exhausted);
            }
        }
        Ok(if self.var_tight >= target { StopReason::StopFraction } else { StopReason::StepBudget })
    }

    /// Final audit and report. Coordinates within `eps_tight` of 0 or 1 are
    /// snapped onto them.
    pub fn finish(mut self, reason: StopReason) -> Result<(Vec<f64>, WalkReport), WalkError> {
        let tol = self.cfg.tol;
        for v in self.x.iter_mut() {
            if v.abs() <= tol.eps_tight {
                *v = 0.0;
            } else if (1.0 - *v).abs() <= tol.eps_tight {
                *v = 1.0;
            }
        }
        self.check_invariants()?;
        if let Structure::Matroid(m) = &self.q.structure {
            let ok = m.separate(&self.x, &tol)? == Separation::Inside;
            let chain = m.tight_chain(&self.x, &tol)?;
            let strictly = self.x.iter().all(|&v| v > tol.eps_tight && v < 1.0 - tol.eps_tight);
            self.audits.push(Audit {
                step: self.steps,
                separation_ok: ok,
                chain_len: chain.len(),
                strictly_fractional: strictly,
                ground_size: self.x.len(),
            });
        }
        let f = self.q.classes.fractional_count();
        let new_integral = self.new_integral();
        let report = WalkReport {
            attempt: self.attempt,
            steps: self.steps,
            truncations: self.truncations,
            degenerate_hits: self.degenerate,
            fractional_start: f,
            var_tight: self.var_tight,
            side_tight: self.side_tight,
            structure_rows: self.structure_rows,
            new_integral,
            free_dim_start: self.free_dim_start,
            free_dim_end: self.basis.len(),
            potential_start: potential(&self.q.y, &self.q.classes),
            potential_end: potential(&self.x, &self.q.classes),
            max_class_drift: self.class_drift(),
            reason,
            success: new_integral >= self.cfg.success_threshold(f),
            audits: std::mem::take(&mut self.audits),
        };
        Ok((self.x, report))
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn indicator(n: usize, set: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &i in set {
        v[i] = 1.0;
    }
    v
}

/// Result of [`partial_round`]: the chosen attempt and all attempts' reports.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialOutcome {
    pub x: Vec<f64>,
    pub report: WalkReport,
    pub attempts: Vec<WalkReport>,
    pub success: bool,
}

/// One partial rounding. Attempts up to `cfg.restarts` seeded walks and
/// keeps the first successful one, or the one with most new integral
/// coordinates when none succeeds.
pub fn partial_round(
    y: &[f64],
    side: &[SideConstraint],
    structure: Structure,
    cfg: &WalkConfig,
    seed: u64,
) -> Result<PartialOutcome, WalkError> {
    cfg.validate()?;
    let q = Polytope::build(y, side, structure, cfg)?;
    let f = q.classes.fractional_count();
    if f == 0 {
        let report = WalkReport {
            attempt: 0,
            steps: 0,
            truncations: 0,
            degenerate_hits: 0,
            fractional_start: 0,
            var_tight: 0,
            side_tight: 0,
            structure_rows: 0,
            new_integral: 0,
            free_dim_start: 0,
            free_dim_end: 0,
            potential_start: 0.0,
            potential_end: 0.0,
            max_class_drift: 0.0,
            reason: StopReason::AlreadyIntegral,
            success: true,
            audits: Vec::new(),
        };
        return Ok(PartialOutcome { x: y.to_vec(), report: report.clone(), attempts: vec![report], success: true });
    }
    let lambdas: Vec<Lambda> = side.iter().map(|c| c.lambda).collect();
    let sum = lambda_sum(&lambdas, f, cfg.k0);
    if sum >= f as f64 / 16.0 {
        return Err(WalkError::LambdaCondition { sum, bound: f as f64 / 16.0 });
    }
    let mut best: Option<(Vec<f64>, WalkReport)> = None;
    let mut attempts = Vec::new();
    for attempt in 0..cfg.restarts {
        let mut w = Walker::new(&q, cfg, seed, attempt)?;
        let reason = w.run()?;
        let (x, report) = w.finish(reason)?;
        attempts.push(report.clone());
        let better = best.as_ref().is_none_or(|(_, b)| report.new_integral > b.new_integral);
        let success = report.success;
        if better {
            best = Some((x, report));
        }
        if success {
            break;
        }
    }
    let (x, report) = best.expect("at least one attempt");
    let success = report.success;
    Ok(PartialOutcome { x, report, attempts, success })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free() -> Structure {
        Structure::Free
    }

    #[test]
    fn classify_examples() {
        let c = classify_scales(&[0.5, 0.3, 0.9, 0.05]).unwrap();
        assert_eq!(c.labels, vec![ScaleClass::U(1), ScaleClass::U(1), ScaleClass::V(3), ScaleClass::U(4)]);
        assert_eq!(c.scales, vec![0.5, 0.5, 0.125, 0.0625]);

        let c = classify_scales(&[1.0, 0.0]).unwrap();
        assert!(c.labels.iter().all(|l| *l == ScaleClass::Frozen));

        let y = [0.5, 0.5, 0.5, 0.5f64.powi(7)];
        let c = classify_scales(&y).unwrap();
        assert_eq!(c.ell, 6);
        assert_eq!(c.labels[3], ScaleClass::U(6));
        assert_eq!(c.scales[3], 0.5f64.powi(6));

        assert!(matches!(classify_scales(&[1.5]), Err(WalkError::OutOfRange { index: 0, .. })));
    }

    #[test]
    fn lambda_condition_examples() {
        assert!(check_lambda_condition(&[Lambda::Finite(0.0); 9], 160, 10.0));
        assert!(!check_lambda_condition(&[Lambda::Finite(0.0); 11], 160, 10.0));
        assert!(check_lambda_condition(&[Lambda::Unbounded; 50], 3, 10.0));
    }

    #[test]
    fn polytope_examples() {
        let mut cfg = WalkConfig::practical();
        cfg.alpha = 2.0;
        let q = Polytope::build(&[0.5, 0.5], &[], free(), &cfg).unwrap();
        assert_eq!(q.upper, vec![1.0, 1.0]);
        assert_eq!(q.lower, vec![0.0, 0.0]);
        assert_eq!(q.class_sums.len(), 1);
        assert_eq!(q.class_sums[0].2, 1.0);

        let q = Polytope::build(&[0.25, 0.25], &[], free(), &cfg).unwrap();
        assert_eq!(q.upper, vec![0.5, 0.5]);

        let side = [SideConstraint::new(vec![1.0, 1.0], Lambda::Finite(1.0))];
        let q = Polytope::build(&[0.5, 0.5], &side, free(), &cfg).unwrap();
        let b = &q.bands[0];
        assert!((b.w_s - 0.5).abs() < 1e-15);
        let expected = 0.5f64.sqrt() + 2f64.sqrt() / 8.0;
        assert!((b.radius.unwrap() - expected).abs() < 1e-15);
        assert_eq!(q.counts().boxes, 4);
        assert_eq!(q.counts().side, 1);
    }

    #[test]
    fn potential_examples() {
        let c = classify_scales(&[0.5, 0.5]).unwrap();
        assert_eq!(potential(&[0.5, 0.5], &c), 2.0);
        assert_eq!(potential(&[0.0, 0.0], &c), 0.0);
        let alpha = 4.0;
        let y = [0.05, 0.1, 0.3];
        let c = classify_scales(&y).unwrap();
        let caps: Vec<f64> = c.scales.iter().map(|s| alpha * s).collect();
        assert!((potential(&caps, &c) - alpha * alpha * 3.0).abs() < 1e-12);
    }

    #[test]
    fn truncate_examples() {
        let cfg = WalkConfig::practical();
        let tol = cfg.tol;
        let q = Polytope::build(&[0.5], &[], free(), &cfg).unwrap();
        let (p, id) = truncate(&q, &[0.5], &[1.2], &tol).unwrap();
        assert_eq!(p, vec![1.0]);
        assert_eq!(id, Some(ConstraintId::Upper(0)));
        let (p, id) = truncate(&q, &[0.5], &[0.7], &tol).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-15);
        assert_eq!(id, None);

        let tri = Matroid::graphic(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let q = Polytope::build(&[0.6; 3], &[], Structure::Matroid(tri.clone()), &cfg).unwrap();
        let r = 1.0 / 3f64.sqrt();
        let (p, id) = truncate(&q, &[0.6; 3], &[0.6 + r, 0.6 + r, 0.6 + r], &tol).unwrap();
        assert!((p.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert_eq!(id, Some(ConstraintId::Rank(vec![0, 1, 2])));
        assert_eq!(tri.separate(&p, &tol).unwrap(), Separation::Inside);
    }

    #[test]
    fn direction_in_two_dimensions() {
        let cfg = WalkConfig::practical();
        let q = Polytope::build(&[0.5, 0.5], &[], free(), &cfg).unwrap();
        let mut w = Walker::new(&q, &cfg, 7, 0).unwrap();
        assert_eq!(w.free_dim(), 1);
        assert!(w.random_direction());
        let g = w.last_direction();
        let v = 0.5 / 2f64.sqrt();
        assert!((g[0].abs() - v).abs() < 1e-12);
        assert!((g[0] + g[1]).abs() < 1e-12);

        let q = Polytope::build(&[1.0, 0.0], &[], free(), &cfg).unwrap();
        let mut w = Walker::new(&q, &cfg, 7, 0).unwrap();
        assert!(!w.random_direction());
        assert_eq!(w.step().unwrap(), StepOutcome::Exhausted);
    }

    #[test]
    fn integral_input_is_fixed() {
        let out = partial_round(&[1.0, 0.0, 1.0], &[], free(), &WalkConfig::practical(), 1).unwrap();
        assert_eq!(out.x, vec![1.0, 0.0, 1.0]);
        assert!(out.success);
    }

    #[test]
    fn two_coordinates_split_evenly() {
        let mut cfg = WalkConfig::practical();
        cfg.restarts = 1;
        let trials = 10_000;
        let mut first = 0;
        for seed in 0..trials {
            let out = partial_round(&[0.5, 0.5], &[], free(), &cfg, seed).unwrap();
            let x = &out.x;
            assert!(*x == vec![1.0, 0.0] || *x == vec![0.0, 1.0], "{x:?}");
            if x[0] == 1.0 {
                first += 1;
            }
        }
        let freq = first as f64 / trials as f64;
        assert!((freq - 0.5).abs() <= 0.05, "frequency {freq}");
    }

    #[test]
    fn partition_base_is_kept() {
        let m = Matroid::partition(4, vec![vec![0, 1], vec![2, 3]], vec![1, 1]).unwrap();
        let mut cfg = WalkConfig::practical();
        cfg.stop_fraction = 1.0;
        for seed in 0..20 {
            let out = partial_round(&[0.5; 4], &[], Structure::Matroid(m.clone()), &cfg, seed).unwrap();
            let x = &out.x;
            assert!((x[0] + x[1] - 1.0).abs() < 1e-12);
            assert!((x[2] + x[3] - 1.0).abs() < 1e-12);
            let integral = x.iter().filter(|v| **v == 0.0 || **v == 1.0).count();
            assert!(integral >= 2, "{x:?}");
        }
    }

    #[test]
    fn lambda_condition_is_enforced() {
        let side: Vec<SideConstraint> =
            (0..4).map(|_| SideConstraint::new(vec![1.0; 4], Lambda::Finite(0.0))).collect();
        let err = partial_round(&[0.3; 4], &side, free(), &WalkConfig::practical(), 0).unwrap_err();
        assert!(matches!(err, WalkError::LambdaCondition { .. }));
    }

    #[test]
    fn config_validation() {
        let mut cfg = WalkConfig::practical();
        assert!(cfg.validate().is_ok());
        cfg.alpha = 1.5;
        assert!(cfg.validate().is_err());
        let p = WalkConfig::paper(8);
        assert_eq!(p.alpha, 40.0);
        assert!((p.gamma - 8f64.powi(-6)).abs() < 1e-20);
    }
}
