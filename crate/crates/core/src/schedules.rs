//! Drivers built on repeated partial rounding.
//!
//! Every constraint is labelled by the smallest of four bound terms (its
//! "menu"); the label fixes how its slack multiplier evolves as the number
//! of fractional coordinates `f` shrinks. The drivers differ in what they
//! preserve exactly and how they finish the last few fractional coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::report::{ReportRow, RoundingReport, RunMeta};
use crate::matroid::{LaminarFamily, LaminarSense, LaminarSet, Matroid, MatroidError};
use crate::numeric::dot;
use crate::walk::{self, Lambda, SideConstraint, Structure, WalkConfig, WalkError, WalkReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Matroid(#[from] MatroidError),
    #[error("invalid schedule parameters: {0}")]
    BadParams(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("no progress at iteration {iteration} with {fractional} fractional coordinates")]
    NoProgress { iteration: usize, fractional: usize },
    #[error("lambda condition unattainable with {fractional} fractional coordinates")]
    LambdaUnattainable { fractional: usize },
    #[error("no structure-feasible integral completion of the last {0} fractional coordinates")]
    NoCompletion(usize),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartLabel {
    M1,
    M2,
    M3,
    M4,
}

impl fmt::Display for PartLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartLabel::M1 => "M1",
            PartLabel::M2 => "M2",
            PartLabel::M3 => "M3",
            PartLabel::M4 => "M4",
        })
    }
}

/// The four bound terms of one constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Menu {
    pub sqrt_j: f64,
    pub nlog: f64,
    pub lb: f64,
    pub delta: f64,
}

impl Menu {
    pub fn values(&self) -> [f64; 4] {
        [self.sqrt_j, self.nlog, self.lb, self.delta]
    }

    pub fn min(&self) -> f64 {
        self.values().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Index of the smallest term, ties to the lower index.
    pub fn label(&self) -> PartLabel {
        let v = self.values();
        let mut best = 0;
        for i in 1..4 {
            if v[i] < v[best] {
                best = i;
            }
        }
        [PartLabel::M1, PartLabel::M2, PartLabel::M3, PartLabel::M4][best]
    }

    fn scaled(self, s: f64) -> Self {
        Self { sqrt_j: self.sqrt_j * s, nlog: self.nlog * s, lb: self.lb * s, delta: self.delta * s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub c_l: f64,
    /// Group id per constraint, switching M4 rows to the group-sparse rule.
    pub groups: Option<Vec<usize>>,
    /// Iterate while more than this many coordinates are fractional, then
    /// enumerate completions.
    pub final_enum_max: usize,
    /// Stop fraction handed to each partial rounding.
    pub iteration_stop_fraction: f64,
    /// DegMat keeps iterating while `f` is at least this (default
    /// `max(K0, 48)`).
    pub degmat_min_f: Option<usize>,
    pub multicrit_retries: u32,
    pub multicrit_branch_cap: usize,
}

impl ScheduleParams {
    pub fn new(k0: f64) -> Self {
        Self {
            c1: 1.0 / 200.0,
            c2: 2.0 * k0,
            k1: 4.0 * k0,
            c_l: 1.0,
            groups: None,
            final_enum_max: 6,
            iteration_stop_fraction: 1.0,
            degmat_min_f: None,
            multicrit_retries: 3,
            multicrit_branch_cap: 1_000_000,
        }
    }

    pub fn validate(&self, k0: f64) -> Result<(), ScheduleError> {
        let bad = |m: String| Err(ScheduleError::BadParams(m));
        if !(self.c1 > 0.0 && self.c1 < 1.0 / 150.0) {
            return bad(format!("c1 = {} must lie in (0, 1/150)", self.c1));
        }
        if !(self.c2 >= 2.0 * k0) {
            return bad(format!("c2 = {} must be at least 2*K0 = {}", self.c2, 2.0 * k0));
        }
        if !(self.k1 > 0.0 && self.c_l > 0.0) {
            return bad("K1 and C_L must be positive".into());
        }
        if !(self.iteration_stop_fraction > 0.0 && self.iteration_stop_fraction <= 1.0) {
            return bad("iteration stop fraction must lie in (0, 1]".into());
        }
        if self.final_enum_max > 16 {
            return bad("final enumeration is limited to 16 coordinates".into());
        }
        Ok(())
    }
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self::new(10.0)
    }
}

fn ceil_log2(v: usize) -> f64 {
    (v.max(2) as f64).log2().ceil()
}

/// `L = C_L ⌈log₂ m⌉ ⌈log₂ n⌉`.
pub fn l_scale(n: usize, m: usize, c_l: f64) -> f64 {
    c_l * ceil_log2(m) * ceil_log2(n)
}

/// Menu of constraint `j` (1-based) for 0/1 rows with target `b`.
pub fn menu(j: usize, n: usize, m: usize, b: f64, delta: usize, params: &ScheduleParams) -> Menu {
    let nf = n.max(1) as f64;
    let l = l_scale(n, m, params.c_l);
    Menu {
        sqrt_j: (j as f64).sqrt(),
        nlog: (nf * (2.0 + m as f64 / nf).ln()).sqrt(),
        lb: (l * b.max(0.0)).sqrt() + l,
        delta: (delta.max(1) as f64).sqrt() * nf.ln().max(0.0),
    }
}

/// Largest number of rows sharing a column (at least 1).
pub fn column_sparsity(rows: &[Vec<f64>]) -> usize {
    let n = rows.first().map_or(0, Vec::len);
    (0..n).map(|i| rows.iter().filter(|r| r[i] != 0.0).count()).max().unwrap_or(0).max(1)
}

/// Labels and menus. Rows with entries other than 0/1 are measured in units
/// of their largest coefficient `a_max`.
pub fn assign_parts(b: &[f64], a_max: &[f64], n: usize, delta: usize, params: &ScheduleParams) -> Vec<(PartLabel, Menu)> {
    let m = b.len();
    b.iter()
        .zip(a_max)
        .enumerate()
        .map(|(j, (&bj, &amax))| {
            let s = if amax > 0.0 { amax } else { 1.0 };
            let menu = menu(j + 1, n, m, bj / s, delta, params).scaled(s);
            (menu.label(), menu)
        })
        .collect()
}

/// Slack multiplier for one row in an iteration with `f` fractional
/// coordinates. `support` counts the row's nonzeros among them and
/// `delta_eff` is `Δ` (or `g·Δ_k` in the group-sparse variant).
pub fn lambda_for(part: PartLabel, j: usize, f: usize, support: usize, delta_eff: f64, params: &ScheduleParams) -> Lambda {
    match part {
        PartLabel::M1 | PartLabel::M2 => {
            let t = params.c1 * f as f64;
            if (j as f64) <= t {
                Lambda::Finite(0.0)
            } else {
                Lambda::Finite((params.c2 * (j as f64 / t).ln()).sqrt())
            }
        }
        PartLabel::M3 => Lambda::Unbounded,
        PartLabel::M4 => {
            if support == 0 {
                Lambda::Unbounded
            } else {
                Lambda::Finite((params.k1 * delta_eff / support as f64).sqrt())
            }
        }
    }
}

/// Target of a row after padding M3 rows with `⌈L - b⌉` ghost elements
/// fixed at 1. Ghosts are never walked, so they only shift `⟨a, x⟩`.
pub fn lifted_target(part: PartLabel, b: f64, l: f64) -> f64 {
    if part == PartLabel::M3 && b < l {
        b + (l - b).ceil()
    } else {
        b
    }
}

/// A linear constraint `⟨a, x⟩ ≈ b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub a: Vec<f64>,
    pub b: f64,
}

/// One partial-rounding iteration of a driver.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub fractional_before: usize,
    pub fractional_after: usize,
    pub lambda_sum: f64,
    pub lambda_bound: f64,
    pub inflation: f64,
    pub walk: WalkReport,
    pub attempts: usize,
}

/// Labelled rows shared by the drivers.
struct Schedule {
    rows: Vec<Vec<f64>>,
    parts: Vec<PartLabel>,
    menus: Vec<Menu>,
    delta_eff: Vec<f64>,
    /// Rows pinned to `λ = 0` in every iteration (not reported).
    pinned: Vec<Vec<f64>>,
}

impl Schedule {
    fn new(rows: Vec<Vec<f64>>, b: &[f64], n: usize, params: &ScheduleParams) -> Result<Self, ScheduleError> {
        for (j, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(ScheduleError::Invalid(format!("row {j} has {} entries, expected {n}", r.len())));
            }
            if r.iter().any(|v| !v.is_finite()) || !b[j].is_finite() {
                return Err(ScheduleError::Invalid(format!("row {j} is not finite")));
            }
        }
        let delta = column_sparsity(&rows);
        let a_max: Vec<f64> = rows.iter().map(|r| r.iter().fold(0.0, |m: f64, v| m.max(v.abs()))).collect();
        let labelled = assign_parts(b, &a_max, n, delta, params);
        let parts: Vec<PartLabel> = labelled.iter().map(|(p, _)| *p).collect();
        let menus = labelled.iter().map(|(_, m)| *m).collect();
        let mut delta_eff = vec![delta as f64; rows.len()];
        if let Some(groups) = &params.groups {
            if groups.len() != rows.len() {
                return Err(ScheduleError::Invalid(format!(
                    "{} group ids for {} constraints",
                    groups.len(),
                    rows.len()
                )));
            }
            let mut ids: Vec<usize> = (0..rows.len()).filter(|&j| parts[j] == PartLabel::M4).map(|j| groups[j]).collect();
            ids.sort_unstable();
            ids.dedup();
            let g = ids.len().max(1) as f64;
            for &id in &ids {
                let members: Vec<Vec<f64>> = (0..rows.len())
                    .filter(|&j| parts[j] == PartLabel::M4 && groups[j] == id)
                    .map(|j| rows[j].clone())
                    .collect();
                let dk = column_sparsity(&members) as f64;
                for j in 0..rows.len() {
                    if parts[j] == PartLabel::M4 && groups[j] == id {
                        delta_eff[j] = g * dk;
                    }
                }
            }
        }
        Ok(Self { rows, parts, menus, delta_eff, pinned: Vec::new() })
    }

    /// Multipliers for the current point, raised uniformly if needed so the
    /// walk's precondition holds. Returns `(λ, inflation, sum)`.
    fn lambdas(
        &self,
        x: &[f64],
        f: usize,
        k0: f64,
        params: &ScheduleParams,
    ) -> Option<(Vec<Lambda>, f64, f64)> {
        let frac: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0 && x[i] < 1.0).collect();
        let base: Vec<Lambda> = self
            .rows
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let support = frac.iter().filter(|&&i| r[i] != 0.0).count();
                if support == 0 {
                    Lambda::Unbounded
                } else {
                    lambda_for(self.parts[j], j + 1, f, support, self.delta_eff[j], params)
                }
            })
            .collect();
        let pinned: Vec<Lambda> = self
            .pinned
            .iter()
            .map(|r| if frac.iter().any(|&i| r[i] != 0.0) { Lambda::Finite(0.0) } else { Lambda::Unbounded })
            .collect();
        let bound = f as f64 / 16.0;
        let mut shift = 0.0;
        for _ in 0..64 {
            let lam: Vec<Lambda> = base
                .iter()
                .map(|l| match l {
                    Lambda::Finite(v) => Lambda::Finite(v + shift),
                    Lambda::Unbounded => Lambda::Unbounded,
                })
                .collect();
            let mut all = pinned.clone();
            all.extend_from_slice(&lam);
            let sum = walk::lambda_sum(&all, f, k0);
            if sum < bound {
                return Some((lam, shift, sum));
            }
            if shift >= f as f64 {
                return None;
            }
            shift = if shift == 0.0 { 0.25 } else { (shift * 2.0).min(f as f64) };
        }
        None
    }
}

fn fractional_count(x: &[f64]) -> usize {
    x.iter().filter(|&&v| v > 0.0 && v < 1.0).count()
}

fn iteration_seed(seed: u64, iter: usize) -> u64 {
    seed ^ (iter as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct LoopResult {
    x: Vec<f64>,
    logs: Vec<IterationLog>,
    first_lambda: Vec<Option<Lambda>>,
    inflations: usize,
    /// Why the loop handed over to enumeration before reaching its target.
    early_finish: Option<&'static str>,
}

/// Repeated partial rounding while `continue_at(f)` holds.
fn iterate(
    y: &[f64],
    sched: &Schedule,
    structure: &Structure,
    cfg: &WalkConfig,
    params: &ScheduleParams,
    seed: u64,
    continue_at: impl Fn(usize) -> bool,
) -> Result<LoopResult, ScheduleError> {
    let mut x = y.to_vec();
    let mut logs = Vec::new();
    let mut first_lambda: Vec<Option<Lambda>> = vec![None; sched.rows.len()];
    let mut inflations = 0;
    let mut stalls = 0;
    let mut iter_cfg = cfg.clone();
    iter_cfg.stop_fraction = params.iteration_stop_fraction;
    iter_cfg.success_fraction = 1.0 / 40.0;
    loop {
        let f = fractional_count(&x);
        if f == 0 || !continue_at(f) {
            return Ok(LoopResult { x, logs, first_lambda, inflations, early_finish: None });
        }
        let Some((lam, shift, sum)) = sched.lambdas(&x, f, cfg.k0, params) else {
            if f <= 16 {
                return Ok(LoopResult { x, logs, first_lambda, inflations, early_finish: Some("lambda condition unattainable") });
            }
            return Err(ScheduleError::LambdaUnattainable { fractional: f });
        };
        if shift > 0.0 {
            inflations += 1;
        }
        for (j, l) in lam.iter().enumerate() {
            if first_lambda[j].is_none() && sched.rows[j].iter().enumerate().any(|(i, v)| *v != 0.0 && x[i] > 0.0 && x[i] < 1.0) {
                first_lambda[j] = Some(*l);
            }
        }
        let mut side: Vec<SideConstraint> = sched
            .pinned
            .iter()
            .map(|r| SideConstraint::new(r.clone(), Lambda::Finite(0.0)))
            .collect();
        side.extend(sched.rows.iter().zip(&lam).map(|(r, l)| SideConstraint::new(r.clone(), *l)));
        let out = walk::partial_round(&x, &side, structure.clone(), &iter_cfg, iteration_seed(seed, logs.len()))?;
        let after = fractional_count(&out.x);
        logs.push(IterationLog {
            fractional_before: f,
            fractional_after: after,
            lambda_sum: sum,
            lambda_bound: f as f64 / 16.0,
            inflation: shift,
            walk: out.report.clone(),
            attempts: out.attempts.len(),
        });
        let stuck = out.report.free_dim_start == 0;
        if after >= f && out.report.var_tight == 0 {
            stalls += 1;
        } else {
            stalls = 0;
        }
        x = out.x;
        if stuck || stalls >= 3 {
            if f <= 16 {
                return Ok(LoopResult { x, logs, first_lambda, inflations, early_finish: Some("walk has no free direction") });
            }
            return Err(ScheduleError::NoProgress { iteration: logs.len(), fractional: f });
        }
    }
}

/// Chooses 0/1 values for the remaining fractional coordinates: the
/// structure-feasible completion with the smallest menu-normalized maximum
/// violation; ties go to the lowest bitmask.
fn best_completion(
    x: &[f64],
    rows: &[Vec<f64>],
    targets: &[f64],
    scale: &[f64],
    structure: &Structure,
    need_base: bool,
) -> Result<Vec<f64>, ScheduleError> {
    let frac: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0 && x[i] < 1.0).collect();
    if frac.len() > 16 {
        return Err(ScheduleError::NoCompletion(frac.len()));
    }
    let mut base: Vec<f64> = x.to_vec();
    for &i in &frac {
        base[i] = 0.0;
    }
    let fixed: Vec<f64> = rows.iter().map(|r| dot(r, &base)).collect();
    let rank = match structure {
        Structure::Matroid(m) => Some(m.full_rank()),
        _ => None,
    };
    // laminar sets tight at x keep their value when some completion allows it
    let tight: Vec<(Vec<usize>, f64)> = match structure {
        Structure::Laminar(fam) => fam
            .laminar_tight(x, &crate::numeric::ToleranceModel::default())
            .into_iter()
            .map(|i| (fam.sets()[i].members.clone(), fam.sets()[i].value))
            .collect(),
        _ => Vec::new(),
    };
    let mut best: Option<((bool, f64), Vec<f64>)> = None;
    let mut cand = base.clone();
    for mask in 0u32..(1u32 << frac.len()) {
        for (k, &i) in frac.iter().enumerate() {
            cand[i] = if mask & (1 << k) != 0 { 1.0 } else { 0.0 };
        }
        let ok = match structure {
            Structure::Free => true,
            Structure::Matroid(m) => {
                let set: Vec<usize> = (0..cand.len()).filter(|&i| cand[i] == 1.0).collect();
                m.is_independent(&set) && (!need_base || Some(set.len()) == rank)
            }
            Structure::Laminar(fam) => fam.is_satisfied(&cand, 1e-9),
        };
        if !ok {
            continue;
        }
        let mut score = 0.0_f64;
        for (j, r) in rows.iter().enumerate() {
            let mut v = fixed[j];
            for (k, &i) in frac.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    v += r[i];
                }
            }
            score = score.max((v - targets[j]).abs() / scale[j]);
        }
        let broken = tight.iter().any(|(set, value)| (set.iter().map(|&i| cand[i]).sum::<f64>() - value).abs() > 1e-6);
        let better = match &best {
            None => true,
            Some(((b, s), _)) => (broken, score) < (*b, *s - 1e-12),
        };
        if better {
            best = Some(((broken, score), cand.clone()));
        }
    }
    best.map(|(_, c)| c).ok_or(ScheduleError::NoCompletion(frac.len()))
}

/// Result of a full rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct FullOutcome {
    pub x: Vec<f64>,
    pub report: RoundingReport,
    pub iterations: Vec<IterationLog>,
    /// Targets after lifting M3 rows to at least `L` with frozen ghost mass.
    pub internal_targets: Vec<f64>,
}

fn summarize(meta: &mut RunMeta, logs: &[IterationLog], inflations: usize) {
    meta.iterations = logs.len();
    meta.attempts = logs.iter().map(|l| l.attempts).sum();
    meta.truncations = logs.iter().map(|l| l.walk.truncations).sum();
    meta.lambda_inflations = inflations;
}

/// Rounds `y` to an integral point, iterating partial rounding with the
/// four-part schedule and enumerating the last few coordinates.
pub fn round_full(
    y: &[f64],
    rows: &[LinearRow],
    structure: &Structure,
    cfg: &WalkConfig,
    params: &ScheduleParams,
    seed: u64,
) -> Result<FullOutcome, ScheduleError> {
    cfg.validate()?;
    params.validate(cfg.k0)?;
    let n = y.len();
    walk::classify_scales(y)?;
    let b: Vec<f64> = rows.iter().map(|r| r.b).collect();
    let sched = Schedule::new(rows.iter().map(|r| r.a.clone()).collect(), &b, n, params)?;
    let l = l_scale(n, rows.len(), params.c_l);
    // ghost coordinates fixed at 1 only shift ⟨a, x⟩ by a constant, which is
    // all that is kept of them
    let internal_targets: Vec<f64> = b
        .iter()
        .zip(&sched.parts)
        .map(|(&bj, p)| lifted_target(*p, bj, l))
        .collect();
    let need_base = match structure {
        Structure::Matroid(m) => (y.iter().sum::<f64>() - m.full_rank() as f64).abs() <= 1e-6,
        _ => false,
    };
    let fe = params.final_enum_max;
    let res = iterate(y, &sched, structure, cfg, params, seed, |f| f > fe)?;
    let scale: Vec<f64> = sched.menus.iter().map(|m| m.min().max(1e-12)).collect();
    let x = best_completion(&res.x, &sched.rows, &b, &scale, structure, need_base)?;

    let mut meta = RunMeta::new("round", seed, cfg.preset, cfg.restarts);
    summarize(&mut meta, &res.logs, res.inflations);
    meta.push("n", n);
    meta.push("m", rows.len());
    meta.push("delta", column_sparsity(&sched.rows));
    meta.push("L", l);
    meta.push("final_fractional", fractional_count(&res.x));
    if let Some(why) = res.early_finish {
        meta.push("early_finish", why);
    }
    let report_rows = (0..rows.len())
        .map(|j| ReportRow {
            constraint_id: j,
            part: sched.parts[j],
            b: b[j],
            lambda: res.first_lambda[j].unwrap_or(Lambda::Unbounded),
            violation: (dot(&sched.rows[j], &x) - b[j]).abs(),
            menu: sched.menus[j],
        })
        .collect();
    Ok(FullOutcome {
        report: RoundingReport { rows: report_rows, meta, solution: x.clone() },
        x,
        iterations: res.logs,
        internal_targets,
    })
}

/// Degree constraint `|I ∩ S| ≤ bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeConstraint {
    pub set: Vec<usize>,
    pub bound: f64,
}

fn indicator(n: usize, set: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &i in set {
        v[i] = 1.0;
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegMatOutcome {
    pub base: Vec<usize>,
    pub x: Vec<f64>,
    pub cost: f64,
    pub lp_cost: f64,
    /// Point handed to the final decomposition.
    pub almost_integral: Vec<f64>,
    pub decomposition: Vec<(Vec<usize>, f64)>,
    pub report: RoundingReport,
    pub iterations: Vec<IterationLog>,
}

/// Minimum-cost degree-bounded base: iterate partial rounding with the cost
/// pinned at zero slack, then decompose and keep the cheapest base.
pub fn degmat(
    costs: &[f64],
    constraints: &[DegreeConstraint],
    matroid: &Matroid,
    y: &[f64],
    cfg: &WalkConfig,
    params: &ScheduleParams,
    seed: u64,
) -> Result<DegMatOutcome, ScheduleError> {
    cfg.validate()?;
    params.validate(cfg.k0)?;
    let n = matroid.ground_size();
    if costs.len() != n || y.len() != n {
        return Err(ScheduleError::Invalid(format!(
            "ground set has {n} elements, got {} costs and {} coordinates",
            costs.len(),
            y.len()
        )));
    }
    if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(ScheduleError::Invalid(format!("cost {c} is not a nonnegative number")));
    }
    for (j, c) in constraints.iter().enumerate() {
        if let Some(&e) = c.set.iter().find(|&&e| e >= n) {
            return Err(ScheduleError::Invalid(format!("degree constraint {j} names element {e}")));
        }
    }
    walk::classify_scales(y)?;
    if !matroid.in_base_polytope(y, &cfg.tol)? {
        return Err(ScheduleError::Infeasible("fractional point is not in the base polytope".into()));
    }
    let rows: Vec<Vec<f64>> = constraints.iter().map(|c| indicator(n, &c.set)).collect();
    let b: Vec<f64> = constraints.iter().map(|c| c.bound).collect();
    let mut sched = Schedule::new(rows, &b, n, params)?;
    sched.pinned.push(costs.to_vec());
    let min_f = params.degmat_min_f.unwrap_or_else(|| (cfg.k0.ceil() as usize).max(48));
    let structure = Structure::Matroid(matroid.clone());
    let res = iterate(y, &sched, &structure, cfg, params, seed, |f| f >= min_f)?;
    let decomposition = matroid.base_decompose(&res.x, &cfg.tol)?;
    let cost_of = |set: &[usize]| set.iter().map(|&e| costs[e]).sum::<f64>();
    let (base, _) = decomposition
        .iter()
        .min_by(|a, b| cost_of(&a.0).total_cmp(&cost_of(&b.0)))
        .cloned()
        .expect("nonempty decomposition");
    let x = indicator(n, &base);
    let cost = cost_of(&base);
    let lp_cost = dot(costs, y);

    let mut meta = RunMeta::new("degmat", seed, cfg.preset, cfg.restarts);
    summarize(&mut meta, &res.logs, res.inflations);
    meta.push("n", n);
    meta.push("m", constraints.len());
    meta.push("cost", format!("{cost:.6}"));
    meta.push("lp_cost", format!("{lp_cost:.6}"));
    meta.push("decomposition_size", decomposition.len());
    meta.push("base", format!("{base:?}"));
    let report_rows = constraints
        .iter()
        .enumerate()
        .map(|(j, c)| ReportRow {
            constraint_id: j,
            part: sched.parts[j],
            b: c.bound,
            lambda: res.first_lambda[j].unwrap_or(Lambda::Unbounded),
            violation: (dot(&sched.rows[j], &x) - c.bound).max(0.0),
            menu: sched.menus[j],
        })
        .collect();
    Ok(DegMatOutcome {
        base,
        cost,
        lp_cost,
        almost_integral: res.x,
        decomposition,
        report: RoundingReport { rows: report_rows, meta, solution: x.clone() },
        x,
        iterations: res.logs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticritOutcome {
    pub base: Vec<usize>,
    pub costs: Vec<f64>,
    /// `max_j (d_j(I)/B_j - 1) / ε`, clamped at 0.
    pub measured_c: f64,
    pub within_budget: bool,
    pub branches: usize,
    pub heavy: Vec<usize>,
    pub guessed: Vec<usize>,
    pub report: RoundingReport,
}

/// Minimizes the smoothed maximum of `(c_j·x - B'_j)/B_j` over the base
/// polytope by Frank-Wolfe with a greedy linear oracle.
fn fractional_point(m: &Matroid, c: &[Vec<f64>], residual: &[f64], budgets: &[f64], iters: usize) -> (Vec<f64>, f64) {
    let n = m.ground_size();
    let k = c.len();
    let tau = 1e-3;
    let g = |x: &[f64]| -> Vec<f64> { (0..k).map(|j| (dot(&c[j], x) - residual[j]) / budgets[j]).collect() };
    let smooth = |x: &[f64]| -> f64 {
        let v = g(x);
        let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        mx + tau * v.iter().map(|t| ((t - mx) / tau).exp()).sum::<f64>().ln()
    };
    let start: Vec<f64> = (0..n).map(|i| -(0..k).map(|j| c[j][i] / budgets[j]).sum::<f64>()).collect();
    let mut x = indicator(n, &m.greedy_base(&start, f64::NEG_INFINITY));
    for _ in 0..iters {
        let v = g(&x);
        let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = v.iter().map(|t| ((t - mx) / tau).exp()).collect();
        let ws: f64 = w.iter().sum();
        let grad: Vec<f64> = (0..n).map(|i| (0..k).map(|j| w[j] / ws * c[j][i] / budgets[j]).sum()).collect();
        let neg: Vec<f64> = grad.iter().map(|v| -v).collect();
        let s = indicator(n, &m.greedy_base(&neg, f64::NEG_INFINITY));
        let gap: f64 = grad.iter().zip(x.iter().zip(&s)).map(|(g, (a, b))| g * (a - b)).sum();
        if gap <= 1e-10 {
            break;
        }
        // golden-section line search on [0, 1]
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let at = |t: f64| -> f64 {
            let p: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a + t * (b - a)).collect();
            smooth(&p)
        };
        for _ in 0..40 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if at(a) <= at(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let t = 0.5 * (lo + hi);
        for i in 0..n {
            x[i] += t * (s[i] - x[i]);
        }
    }
    for v in x.iter_mut() {
        if v.abs() < 1e-12 {
            *v = 0.0;
        } else if (1.0 - *v).abs() < 1e-12 {
            *v = 1.0;
        }
    }
    let worst = g(&x).into_iter().fold(f64::NEG_INFINITY, f64::max);
    (x, worst)
}

/// Multi-criteria base: enumerate the heavy part of a solution, contract it,
/// and round a fractional point of the remainder.
#[allow(clippy::too_many_arguments)]
pub fn multicrit(
    matroid: &Matroid,
    costs: &[Vec<f64>],
    budgets: &[f64],
    eps: f64,
    cfg: &WalkConfig,
    params: &ScheduleParams,
    seed: u64,
) -> Result<MulticritOutcome, ScheduleError> {
    cfg.validate()?;
    let n = matroid.ground_size();
    let k = costs.len();
    if budgets.len() != k {
        return Err(ScheduleError::Invalid(format!("{k} cost functions but {} budgets", budgets.len())));
    }
    if !(eps > 0.0) {
        return Err(ScheduleError::Invalid("epsilon must be positive".into()));
    }
    for (j, c) in costs.iter().enumerate() {
        if c.len() != n {
            return Err(ScheduleError::Invalid(format!("cost function {j} has {} entries, expected {n}", c.len())));
        }
        if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ScheduleError::Invalid(format!("cost function {j} has a negative or non-finite entry")));
        }
        if !(budgets[j] > 0.0) {
            return Err(ScheduleError::Invalid(format!("budget {j} must be positive")));
        }
    }
    let r = matroid.full_rank();
    let eval = |base: &[usize]| -> Vec<f64> { costs.iter().map(|c| base.iter().map(|&e| c[e]).sum()).collect() };
    let finish = |base: Vec<usize>, branches: usize, heavy: Vec<usize>, guessed: Vec<usize>| -> MulticritOutcome {
        let d = eval(&base);
        let excess = d.iter().zip(budgets).map(|(v, b)| v / b - 1.0).fold(0.0, f64::max);
        let within = d.iter().zip(budgets).all(|(v, b)| *v <= (1.0 + eps) * b + 1e-9);
        let mut meta = RunMeta::new("multicrit", seed, cfg.preset, cfg.restarts);
        meta.iterations = branches;
        meta.push("n", n);
        meta.push("k", k);
        meta.push("epsilon", eps);
        meta.push("base", format!("{base:?}"));
        meta.push("heavy", heavy.len());
        meta.push("guessed_heavy", format!("{guessed:?}"));
        meta.push("within_budget", within);
        meta.push("measured_c", format!("{:.6}", excess / eps));
        let rows = (0..k)
            .map(|j| ReportRow {
                constraint_id: j,
                part: PartLabel::M1,
                b: budgets[j],
                lambda: Lambda::Finite(0.0),
                violation: (d[j] - budgets[j]).max(0.0),
                menu: Menu { sqrt_j: eps * budgets[j], nlog: eps * budgets[j], lb: eps * budgets[j], delta: eps * budgets[j] },
            })
            .collect();
        let x = indicator(n, &base);
        MulticritOutcome {
            measured_c: excess / eps,
            within_budget: within,
            costs: d,
            base,
            branches,
            heavy,
            guessed,
            report: RoundingReport { rows, meta, solution: x },
        }
    };
    if costs.iter().all(|c| c.iter().all(|v| *v == 0.0)) {
        let base = matroid.greedy_base(&vec![1.0; n], f64::NEG_INFINITY);
        return Ok(finish(base, 0, Vec::new(), Vec::new()));
    }
    let kf = k as f64;
    let heavy: Vec<usize> =
        (0..n).filter(|&e| (0..k).any(|j| costs[j][e] > eps / kf.sqrt() * budgets[j])).collect();
    let max_size = ((kf.powf(1.5) / eps).ceil() as usize).min(r).min(heavy.len());
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    let mut branches = 0usize;
    let mut combo: Vec<usize> = Vec::new();
    'sizes: for size in 0..=max_size {
        combo.clear();
        combo.extend(0..size);
        loop {
            if branches >= params.multicrit_branch_cap {
                break 'sizes;
            }
            branches += 1;
            let h: Vec<usize> = combo.iter().map(|&p| heavy[p]).collect();
            if let Some(base) = multicrit_branch(matroid, costs, budgets, eps, &heavy, &h, cfg, params, seed, branches)? {
                let d = eval(&base);
                let score = d.iter().zip(budgets).map(|(v, b)| v / b).fold(0.0, f64::max);
                if best.as_ref().is_none_or(|(s, _, _)| score < *s - 1e-12) {
                    best = Some((score, base, h.clone()));
                }
                if score <= 1.0 + eps + 1e-9 {
                    break 'sizes;
                }
            }
            if !next_combination(&mut combo, heavy.len()) {
                break;
            }
        }
    }
    match best {
        Some((_, base, guessed)) => Ok(finish(base, branches, heavy, guessed)),
        None => Err(ScheduleError::Infeasible(format!("all {branches} enumeration branches failed"))),
    }
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[allow(clippy::too_many_arguments)]
fn multicrit_branch(
    matroid: &Matroid,
    costs: &[Vec<f64>],
    budgets: &[f64],
    eps: f64,
    heavy: &[usize],
    h: &[usize],
    cfg: &WalkConfig,
    params: &ScheduleParams,
    seed: u64,
    branch: usize,
) -> Result<Option<Vec<usize>>, ScheduleError> {
    let k = costs.len();
    let r = matroid.full_rank();
    if !matroid.is_independent(h) {
        return Ok(None);
    }
    let residual: Vec<f64> = (0..k).map(|j| budgets[j] - h.iter().map(|&e| costs[j][e]).sum::<f64>()).collect();
    if residual.iter().any(|v| *v < -1e-9) {
        return Ok(None);
    }
    let contracted = matroid.contract(h)?;
    let others: Vec<usize> = heavy.iter().copied().filter(|e| !h.contains(e)).collect();
    let local_delete: Vec<usize> =
        contracted.original.iter().enumerate().filter(|(_, o)| others.contains(o)).map(|(i, _)| i).collect();
    let minor = contracted.matroid.delete(&local_delete)?;
    let original: Vec<usize> = minor.original.iter().map(|&i| contracted.original[i]).collect();
    let m2 = minor.matroid;
    if m2.full_rank() != r - h.len() {
        return Ok(None);
    }
    if m2.ground_size() == 0 {
        return Ok(Some(h.to_vec()));
    }
    let c2: Vec<Vec<f64>> = costs.iter().map(|c| original.iter().map(|&e| c[e]).collect()).collect();
    let (x0, worst) = fractional_point(&m2, &c2, &residual, budgets, 400);
    if worst > eps / 4.0 {
        return Ok(None);
    }
    let n2 = m2.ground_size();
    let big_n = 16 * k;
    let structure = Structure::Matroid(m2.clone());
    let mut iter_cfg = cfg.clone();
    iter_cfg.stop_fraction = params.iteration_stop_fraction;
    iter_cfg.success_fraction = 1.0 / 40.0;
    let score = |set: &[usize]| -> f64 {
        (0..k)
            .map(|j| (h.iter().map(|&e| costs[j][e]).sum::<f64>() + set.iter().map(|&i| c2[j][i]).sum::<f64>()) / budgets[j])
            .fold(0.0, f64::max)
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for retry in 0..params.multicrit_retries.max(1) {
        let mut x = x0.clone();
        let mut iter = 0usize;
        let mut stalls = 0;
        loop {
            let f = fractional_count(&x);
            if f <= params.final_enum_max {
                break;
            }
            let lam = if f > big_n {
                Lambda::Finite(0.0)
            } else {
                Lambda::Finite((cfg.k0 * (2.0 * big_n as f64 / f as f64).ln()).sqrt())
            };
            let side: Vec<SideConstraint> = c2.iter().map(|c| SideConstraint::new(c.clone(), lam)).collect();
            let s = iteration_seed(seed ^ ((branch as u64) << 20) ^ ((retry as u64) << 40), iter);
            let out = walk::partial_round(&x, &side, structure.clone(), &iter_cfg, s)?;
            iter += 1;
            if fractional_count(&out.x) >= f && out.report.var_tight == 0 {
                stalls += 1;
                if stalls >= 3 {
                    break;
                }
            }
            x = out.x;
        }
        let decomposition = m2.base_decompose(&x, &cfg.tol)?;
        for (set, _) in decomposition {
            let sc = score(&set);
            if best.as_ref().is_none_or(|(b, _)| sc < *b - 1e-12) {
                best = Some((sc, set));
            }
        }
        if best.as_ref().is_some_and(|(b, _)| *b <= 1.0 + eps + 1e-9) {
            break;
        }
    }
    let _ = n2;
    Ok(best.map(|(_, set)| {
        let mut base: Vec<usize> = h.to_vec();
        base.extend(set.iter().map(|&i| original[i]));
        base.sort_unstable();
        base
    }))
}

/// A candidate path (edge ids) with its fractional weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathWeight {
    pub edges: Vec<usize>,
    pub weight: f64,
}

/// DegMat instance built from routing weights.
#[derive(Debug, Clone)]
pub struct RspInstance {
    /// `(pair, index into that pair's path list)` per ground element.
    pub paths: Vec<(usize, usize)>,
    pub matroid: Matroid,
    pub constraints: Vec<DegreeConstraint>,
    pub y: Vec<f64>,
    pub delta: usize,
}

pub fn rsp_reduce(pairs: &[Vec<PathWeight>], capacities: &[f64]) -> Result<RspInstance, ScheduleError> {
    let mut paths = Vec::new();
    let mut parts = Vec::new();
    let mut y = Vec::new();
    for (p, list) in pairs.iter().enumerate() {
        let support: Vec<usize> = (0..list.len()).filter(|&i| list[i].weight > 0.0).collect();
        if support.is_empty() {
            return Err(ScheduleError::Invalid(format!("pair {p} has no path with positive weight")));
        }
        let total: f64 = support.iter().map(|&i| list[i].weight).sum();
        if total < 1.0 - 1e-9 {
            return Err(ScheduleError::Infeasible(format!("pair {p} has total weight {total} < 1")));
        }
        let mut part = Vec::new();
        for &i in &support {
            for &e in &list[i].edges {
                if e >= capacities.len() {
                    return Err(ScheduleError::Invalid(format!("pair {p} path {i} uses unknown edge {e}")));
                }
            }
            part.push(paths.len());
            paths.push((p, i));
            y.push(list[i].weight / total);
        }
        parts.push(part);
    }
    let n = paths.len();
    let caps = vec![1; parts.len()];
    let matroid = Matroid::partition(n, parts, caps)?;
    let constraints: Vec<DegreeConstraint> = (0..capacities.len())
        .map(|e| DegreeConstraint {
            set: (0..n).filter(|&g| pairs[paths[g].0][paths[g].1].edges.contains(&e)).collect(),
            bound: capacities[e],
        })
        .collect();
    let delta = paths.iter().map(|&(p, i)| pairs[p][i].edges.len()).max().unwrap_or(0);
    Ok(RspInstance { paths, matroid, constraints, y, delta })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RspOutcome {
    /// Chosen path index per pair.
    pub chosen: Vec<usize>,
    pub loads: Vec<f64>,
    pub report: RoundingReport,
}

pub fn rsp(
    pairs: &[Vec<PathWeight>],
    capacities: &[f64],
    cfg: &WalkConfig,
    params: &ScheduleParams,
    seed: u64,
) -> Result<RspOutcome, ScheduleError> {
    let inst = rsp_reduce(pairs, capacities)?;
    let zero = vec![0.0; inst.y.len()];
    let out = degmat(&zero, &inst.constraints, &inst.matroid, &inst.y, cfg, params, seed)?;
    let mut chosen = vec![usize::MAX; pairs.len()];
    for &g in &out.base {
        let (p, i) = inst.paths[g];
        chosen[p] = i;
    }
    let mut loads = vec![0.0; capacities.len()];
    for (p, &i) in chosen.iter().enumerate() {
        for &e in &pairs[p][i].edges {
            loads[e] += 1.0;
        }
    }
    let mut report = out.report;
    report.meta.driver = "rsp".into();
    report.meta.push("chosen", format!("{chosen:?}"));
    report.meta.push("path_length_max", inst.delta);
    Ok(RspOutcome { chosen, loads, report })
}

/// Requirement: at least `required` paths among the listed pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaminarRequirement {
    pub pairs: Vec<usize>,
    pub required: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaminarRspOutcome {
    /// Multiplicity of every candidate path, per pair.
    pub counts: Vec<Vec<usize>>,
    pub loads: Vec<f64>,
    pub report: RoundingReport,
}

/// Multiset routing with laminar requirements: integer parts of the weights
/// are committed, the fractional remainder is rounded while the lifted
/// laminar family is kept feasible.
pub fn laminar_rsp(
    pairs: &[Vec<PathWeight>],
    requirements: &[LaminarRequirement],
    capacities: &[f64],
    cfg: &WalkConfig,
    params: &ScheduleParams,
    seed: u64,
) -> Result<LaminarRspOutcome, ScheduleError> {
    let k = pairs.len();
    LaminarFamily::new(
        k,
        LaminarSense::AtLeast,
        requirements.iter().map(|r| LaminarSet { members: r.pairs.clone(), value: r.required }).collect(),
    )?;
    let mut paths = Vec::new();
    let mut committed = Vec::new();
    let mut z = Vec::new();
    for (p, list) in pairs.iter().enumerate() {
        for (i, pw) in list.iter().enumerate() {
            if !(pw.weight.is_finite() && pw.weight >= 0.0) {
                return Err(ScheduleError::Invalid(format!("pair {p} path {i} has weight {}", pw.weight)));
            }
            if let Some(&e) = pw.edges.iter().find(|&&e| e >= capacities.len()) {
                return Err(ScheduleError::Invalid(format!("pair {p} path {i} uses unknown edge {e}")));
            }
            paths.push((p, i));
            let fl = pw.weight.floor();
            committed.push(fl as usize);
            z.push(pw.weight - fl);
        }
    }
    let n = paths.len();
    let mut sets = Vec::new();
    for (t, req) in requirements.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&g| req.pairs.contains(&paths[g].0)).collect();
        let total: f64 = members.iter().map(|&g| pairs[paths[g].0][paths[g].1].weight).sum();
        if total < req.required - 1e-9 {
            return Err(ScheduleError::Infeasible(format!(
                "requirement {t} needs {} paths but the weights give {total}",
                req.required
            )));
        }
        let fixed: f64 = members.iter().map(|&g| committed[g] as f64).sum();
        sets.push(LaminarSet { members, value: req.required - fixed });
    }
    let family = LaminarFamily::new(n, LaminarSense::AtLeast, sets)?;
    let rows: Vec<LinearRow> = (0..capacities.len())
        .map(|e| {
            let a: Vec<f64> = (0..n)
                .map(|g| if pairs[paths[g].0][paths[g].1].edges.contains(&e) { 1.0 } else { 0.0 })
                .collect();
            let b = dot(&a, &z);
            LinearRow { a, b }
        })
        .collect();
    let out = round_full(&z, &rows, &Structure::Laminar(family), cfg, params, seed)?;
    let mut counts: Vec<Vec<usize>> = pairs.iter().map(|l| vec![0; l.len()]).collect();
    for g in 0..n {
        let (p, i) = paths[g];
        counts[p][i] = committed[g] + out.x[g] as usize;
    }
    let mut loads = vec![0.0; capacities.len()];
    for (p, list) in pairs.iter().enumerate() {
        for (i, pw) in list.iter().enumerate() {
            for &e in &pw.edges {
                loads[e] += counts[p][i] as f64;
            }
        }
    }
    for (t, req) in requirements.iter().enumerate() {
        let got: usize = req.pairs.iter().map(|&p| counts[p].iter().sum::<usize>()).sum();
        if (got as f64) < req.required - 1e-9 {
            return Err(ScheduleError::Infeasible(format!("requirement {t} ended with {got} paths")));
        }
    }
    let mut report = out.report;
    report.meta.driver = "laminar-rsp".into();
    for (e, row) in report.rows.iter_mut().enumerate() {
        row.b = capacities[e];
        row.violation = (loads[e] - capacities[e]).max(0.0);
    }
    report.solution = counts.iter().flatten().map(|&c| c as f64).collect();
    report.meta.push("counts", format!("{counts:?}"));
    Ok(LaminarRspOutcome { counts, loads, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ScheduleParams {
        ScheduleParams::default()
    }

    #[test]
    fn menu_examples() {
        let p = params();
        let m = menu(1, 100, 100, 1e4, 100, &p);
        assert!((m.sqrt_j - 1.0).abs() < 1e-12);
        assert!((m.nlog - (100.0 * 3f64.ln()).sqrt()).abs() < 1e-12);
        assert!((m.nlog - 10.48).abs() < 0.01);
        assert!(m.lb > 700.0);
        assert!((m.delta - 10.0 * 100f64.ln()).abs() < 1e-12);
        assert!((m.delta - 46.05).abs() < 0.01);
        assert_eq!(m.label(), PartLabel::M1);

        let m = menu(1_000_000, 100, 1_000_000, 1.0, 2, &p);
        assert_eq!(m.label(), PartLabel::M4);

        // n = m, b = n^2: √j wins exactly while j < n ln 3
        let n = 64;
        let cut = n as f64 * 3f64.ln();
        for j in 1..=n {
            let m = menu(j, n, n, (n * n) as f64, n, &p);
            let want = if (j as f64) < cut { PartLabel::M1 } else { PartLabel::M2 };
            assert_eq!(m.label(), want, "j = {j}");
        }
    }

    #[test]
    fn lambda_examples() {
        let p = params();
        let f = 1000;
        let t = p.c1 * f as f64;
        assert_eq!(lambda_for(PartLabel::M1, t as usize, f, 3, 1.0, &p), Lambda::Finite(0.0));
        let j = (std::f64::consts::E * t).round() as usize;
        let want = (p.c2 * (j as f64 / t).ln()).sqrt();
        assert_eq!(lambda_for(PartLabel::M2, j, f, 3, 1.0, &p), Lambda::Finite(want));
        assert_eq!(lambda_for(PartLabel::M1, 1_000_000, 1, 1, 1.0, &p), Lambda::Finite((p.c2 * (1e6f64 / p.c1).ln()).sqrt()));
        assert_eq!(lambda_for(PartLabel::M3, 7, f, 3, 1.0, &p), Lambda::Unbounded);
        assert_eq!(lambda_for(PartLabel::M4, 1, f, 12, 12.0, &p), Lambda::Finite(p.k1.sqrt()));
    }

    #[test]
    fn exact_e_gives_sqrt_c2() {
        let p = params();
        // j / (c1 f) = e exactly when c1 f = j / e
        let j = 2718281usize;
        let f = (j as f64 / std::f64::consts::E / p.c1).round() as usize;
        if let Lambda::Finite(v) = lambda_for(PartLabel::M1, j, f, 1, 1.0, &p) {
            assert!((v - p.c2.sqrt()).abs() < 1e-3);
        } else {
            panic!("finite lambda expected");
        }
    }

    #[test]
    fn params_validation() {
        let mut p = params();
        assert!(p.validate(10.0).is_ok());
        p.c1 = 0.01;
        assert!(p.validate(10.0).is_err());
        let mut p = params();
        p.c2 = 5.0;
        assert!(p.validate(10.0).is_err());
    }

    #[test]
    fn round_full_fixed_point() {
        let rows = vec![LinearRow { a: vec![1.0, 1.0, 0.0], b: 1.0 }];
        let out = round_full(&[1.0, 0.0, 1.0], &rows, &Structure::Free, &WalkConfig::practical(), &params(), 3).unwrap();
        assert_eq!(out.x, vec![1.0, 0.0, 1.0]);
        assert_eq!(out.report.rows[0].violation, 0.0);
    }

    #[test]
    fn round_full_ten_halves() {
        let rows = vec![LinearRow { a: vec![1.0; 10], b: 5.0 }];
        let (opt, _) = crate::baselines::brute_force_best(&[vec![1.0; 10]], &[5.0], None).unwrap();
        assert_eq!(opt, 0.0);
        for seed in 0..10 {
            let out = round_full(&[0.5; 10], &rows, &Structure::Free, &WalkConfig::practical(), &params(), seed).unwrap();
            assert!(out.x.iter().all(|v| *v == 0.0 || *v == 1.0));
            let v = out.report.rows[0].violation;
            assert!(v >= opt);
            assert!(v <= out.report.rows[0].menu.min() * 25.0);
        }
    }

    #[test]
    fn m3_rows_are_lifted() {
        assert_eq!(lifted_target(PartLabel::M3, 1.0, 16.0), 16.0);
        assert_eq!(lifted_target(PartLabel::M3, 20.0, 16.0), 20.0);
        assert_eq!(lifted_target(PartLabel::M1, 1.0, 16.0), 1.0);
        // n = 2^4, m = 2^4 gives L = 16 at C_L = 1
        assert_eq!(l_scale(16, 16, 1.0), 16.0);
        // a late row with b = 1 picks M3 once √j and the other terms exceed √L + L
        let p = params();
        let m = menu(1 << 17, 1 << 20, 1 << 17, 1.0, 1 << 10, &p);
        assert_eq!(m.label(), PartLabel::M3);
    }

    #[test]
    fn degmat_examples() {
        let m = Matroid::partition(2, vec![vec![0, 1]], vec![1]).unwrap();
        let cons = vec![DegreeConstraint { set: vec![0, 1], bound: 1.0 }];
        let cfg = WalkConfig::practical();
        let out = degmat(&[1.0, 2.0], &cons, &m, &[1.0, 0.0], &cfg, &params(), 0).unwrap();
        assert_eq!(out.base, vec![0]);
        assert_eq!(out.cost, 1.0);
        assert_eq!(out.report.rows[0].violation, 0.0);

        let out = degmat(&[1.0, 2.0], &cons, &m, &[0.5, 0.5], &cfg, &params(), 0).unwrap();
        assert_eq!(out.decomposition.len(), 2);
        assert_eq!(out.base, vec![0]);
        assert!(out.cost <= 1.5);

        assert!(matches!(
            degmat(&[1.0, 2.0], &cons, &m, &[0.3, 0.3], &cfg, &params(), 0),
            Err(ScheduleError::Infeasible(_))
        ));
    }

    #[test]
    fn multicrit_examples() {
        let cfg = WalkConfig::practical();
        let u = Matroid::uniform(2, 1);
        let out = multicrit(&u, &[vec![5.0, 6.0]], &[6.0], 0.5, &cfg, &params(), 0).unwrap();
        assert_eq!(out.heavy, vec![0, 1]);
        assert_eq!(out.base, vec![0]);

        let out = multicrit(&u, &[vec![0.0, 0.0]], &[1.0], 0.5, &cfg, &params(), 0).unwrap();
        assert_eq!(out.base.len(), 1);
        assert_eq!(out.branches, 0);

        // planted base {1, 2} of a partition matroid with parts {0,1}, {2,3}
        let p = Matroid::partition(4, vec![vec![0, 1], vec![2, 3]], vec![1, 1]).unwrap();
        let d1 = vec![3.0, 1.0, 1.0, 3.0];
        let d2 = vec![1.0, 2.0, 2.0, 2.0];
        let out = multicrit(&p, &[d1, d2], &[2.0, 4.0], 0.5, &cfg, &params(), 0).unwrap();
        assert_eq!(out.base, vec![1, 2]);
        assert_eq!(out.measured_c, 0.0);
    }

    #[test]
    fn rsp_reduce_examples() {
        let pairs = vec![vec![
            PathWeight { edges: vec![0], weight: 0.5 },
            PathWeight { edges: vec![1], weight: 0.5 },
        ]];
        let inst = rsp_reduce(&pairs, &[1.0, 1.0]).unwrap();
        assert_eq!(inst.paths.len(), 2);
        assert_eq!(inst.constraints[0].set, vec![0]);
        assert_eq!(inst.constraints[1].set, vec![1]);
        assert_eq!(inst.matroid.full_rank(), 1);

        let shared = vec![vec![
            PathWeight { edges: vec![0, 1], weight: 0.5 },
            PathWeight { edges: vec![0, 2], weight: 0.5 },
        ]];
        let inst = rsp_reduce(&shared, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(inst.constraints[0].set, vec![0, 1]);
        assert_eq!(inst.delta, 2);

        let out = rsp(&shared, &[1.0, 1.0, 1.0], &WalkConfig::practical(), &params(), 0).unwrap();
        assert_eq!(out.loads[0], 1.0);

        assert!(rsp_reduce(&[vec![PathWeight { edges: vec![0], weight: 0.0 }]], &[1.0]).is_err());
    }

    #[test]
    fn laminar_rsp_examples() {
        // nested requirements {0} >= 1 and {0,1} >= 2, disjoint paths
        let pairs = vec![
            vec![PathWeight { edges: vec![0], weight: 0.5 }, PathWeight { edges: vec![1], weight: 0.5 }],
            vec![PathWeight { edges: vec![2], weight: 0.5 }, PathWeight { edges: vec![3], weight: 0.5 }],
        ];
        let reqs = vec![
            LaminarRequirement { pairs: vec![0], required: 1.0 },
            LaminarRequirement { pairs: vec![0, 1], required: 2.0 },
        ];
        for seed in 0..5 {
            let out = laminar_rsp(&pairs, &reqs, &[1.0; 4], &WalkConfig::practical(), &params(), seed).unwrap();
            let c0: usize = out.counts[0].iter().sum();
            let c1: usize = out.counts[1].iter().sum();
            assert_eq!(c0, 1);
            assert_eq!(c0 + c1, 2);
        }

        let whole = vec![LaminarRequirement { pairs: vec![0, 1], required: 2.0 }];
        let out = laminar_rsp(&pairs, &whole, &[1.0; 4], &WalkConfig::practical(), &params(), 0).unwrap();
        assert!(out.counts.iter().flatten().sum::<usize>() >= 2);

        let integral = vec![vec![PathWeight { edges: vec![0], weight: 1.0 }], vec![PathWeight { edges: vec![1], weight: 2.0 }]];
        let reqs = vec![LaminarRequirement { pairs: vec![0, 1], required: 3.0 }];
        let out = laminar_rsp(&integral, &reqs, &[1.0, 2.0], &WalkConfig::practical(), &params(), 0).unwrap();
        assert_eq!(out.counts, vec![vec![1], vec![2]]);
    }
}
