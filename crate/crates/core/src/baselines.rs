//! Reference rounders: independent randomized rounding, iterated rounding
//! with a pluggable drop rule, and an exhaustive optimum for tiny instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matroid::Matroid;
use crate::numeric::{self, ConstraintMatrix, ToleranceModel};
use crate::schedules::{self, LinearRow, ScheduleError, ScheduleParams};
use crate::walk::{Structure, WalkConfig};

/// Largest dimension accepted by [`brute_force_best`].
pub const BRUTE_FORCE_MAX_N: usize = 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {0}")]
    TooLarge(usize),
    #[error("row {row} has {found} coefficients, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("{rows} rows but {targets} targets")]
    TargetCount { rows: usize, targets: usize },
    #[error("no feasible integral point (matroid has no base of this size)")]
    NoCandidate,
}

/// Per-constraint absolute violations `|⟨a_j, x⟩ - b_j|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationProfile {
    pub per_row: Vec<f64>,
    pub max: f64,
    pub ratios: Option<Vec<f64>>,
}

impl ViolationProfile {
    pub fn new(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> Self {
        let per_row: Vec<f64> = a.iter().zip(b).map(|(row, bj)| (numeric::dot(row, x) - bj).abs()).collect();
        let max = per_row.iter().copied().fold(0.0, f64::max);
        Self { per_row, max, ratios: None }
    }

    /// Attaches `violation / bound` for each row.
    pub fn with_bounds(mut self, bounds: &[f64]) -> Self {
        self.ratios = Some(self.per_row.iter().zip(bounds).map(|(v, m)| v / m).collect());
        self
    }
}

/// `x_i = 1` with probability `y_i`, independently.
pub fn randomized_round(y: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    y.iter().map(|&p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 }).collect()
}

/// Which live constraint to drop when no nullspace direction remains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DropRule {
    /// Fewest nonzeros on the fractional coordinates; ties to the lowest index.
    #[default]
    FewestFractional,
    /// Highest live index first.
    LastIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IteratedOutcome {
    pub x: Vec<f64>,
    /// Constraints in the order they were dropped.
    pub dropped: Vec<usize>,
    pub moves: usize,
}

/// Iterated rounding: walk along the nullspace of the live rows restricted
/// to fractional coordinates until a coordinate reaches 0 or 1; drop a row
/// when the nullspace is empty. Rounds to the nearest integer once no live
/// rows remain (0.5 goes up).
pub fn iterated_round(y: &[f64], a: &[Vec<f64>], rule: DropRule) -> IteratedOutcome {
    let n = y.len();
    let tol = ToleranceModel::default();
    let snap = 1e-12;
    let mut x = y.to_vec();
    let mut live: Vec<usize> = (0..a.len()).collect();
    let mut dropped = Vec::new();
    let mut moves = 0;
    loop {
        let frac: Vec<usize> = (0..n).filter(|&i| x[i] > snap && x[i] < 1.0 - snap).collect();
        if frac.is_empty() {
            break;
        }
        if live.is_empty() {
            for &i in &frac {
                x[i] = if x[i] >= 0.5 { 1.0 } else { 0.0 };
            }
            break;
        }
        let rows: Vec<Vec<f64>> = live.iter().map(|&j| frac.iter().map(|&i| a[j][i]).collect()).collect();
        let matrix = ConstraintMatrix::new(frac.len(), rows).expect("rows share the fractional dimension");
        let null = numeric::orthonormal_nullspace_basis(&matrix, &tol).expect("nonempty dimension");
        match null.first() {
            Some(d) => {
                let mut t = f64::INFINITY;
                let mut hit = 0;
                for (k, &i) in frac.iter().enumerate() {
                    let step = if d[k] > 1e-12 {
                        (1.0 - x[i]) / d[k]
                    } else if d[k] < -1e-12 {
                        -x[i] / d[k]
                    } else {
                        continue;
                    };
                    if step < t {
                        t = step;
                        hit = i;
                    }
                }
                for (k, &i) in frac.iter().enumerate() {
                    x[i] += t * d[k];
                }
                x[hit] = x[hit].round();
                for &i in &frac {
                    if x[i] <= snap {
                        x[i] = 0.0;
                    } else if x[i] >= 1.0 - snap {
                        x[i] = 1.0;
                    }
                }
                moves += 1;
            }
            None => {
                let pos = match rule {
                    DropRule::FewestFractional => {
                        let support = |j: usize| frac.iter().filter(|&&i| a[j][i] != 0.0).count();
                        (0..live.len()).min_by_key(|&p| (support(live[p]), live[p])).expect("live rows")
                    }
                    DropRule::LastIndex => live.len() - 1,
                };
                dropped.push(live.remove(pos));
            }
        }
    }
    IteratedOutcome { x, dropped, moves }
}

/// Exact `min_x max_j |⟨a_j, x⟩ - b_j|` over `x ∈ {0,1}^n` (bases of the
/// matroid when given). The witness is the first minimizer in bitmask order.
pub fn brute_force_best(
    a: &[Vec<f64>],
    b: &[f64],
    matroid: Option<&Matroid>,
) -> Result<(f64, Vec<f64>), BaselineError> {
    let n = match (a.first(), matroid) {
        (Some(r), _) => r.len(),
        (None, Some(m)) => m.ground_size(),
        (None, None) => 0,
    };
    if n > BRUTE_FORCE_MAX_N {
        return Err(BaselineError::TooLarge(n));
    }
    if a.len() != b.len() {
        return Err(BaselineError::TargetCount { rows: a.len(), targets: b.len() });
    }
    for (row, r) in a.iter().enumerate() {
        if r.len() != n {
            return Err(BaselineError::DimensionMismatch { row, expected: n, found: r.len() });
        }
    }
    let rank = matroid.map(|m| m.full_rank());
    let mut sums = vec![0.0; a.len()];
    let mut best: Option<(f64, u32)> = None;
    let mut code: u32 = 0;
    let total = 1u64 << n;
    for t in 0..total {
        if t > 0 {
            let bit = t.trailing_zeros() as usize;
            code ^= 1 << bit;
            let sign = if code & (1 << bit) != 0 { 1.0 } else { -1.0 };
            for (s, row) in sums.iter_mut().zip(a) {
                *s += sign * row[bit];
            }
        }
        if let (Some(m), Some(r)) = (matroid, rank) {
            if code.count_ones() as usize != r || !m.is_independent(&crate::matroid::from_mask(code)) {
                continue;
            }
        }
        let v = sums.iter().zip(b).map(|(s, bj)| (s - bj).abs()).fold(0.0, f64::max);
        let better = match best {
            None => true,
            Some((bv, bm)) => v < bv - 1e-12 || ((v - bv).abs() <= 1e-12 && code < bm),
        };
        if better {
            best = Some((v, code));
        }
    }
    let (v, mask) = best.ok_or(BaselineError::NoCandidate)?;
    let witness: Vec<f64> = (0..n).map(|i| if mask & (1 << i) != 0 { 1.0 } else { 0.0 }).collect();
    // recompute exactly to avoid accumulated Gray-code drift
    let prof = ViolationProfile::new(a, b, &witness);
    debug_assert!((prof.max - v).abs() < 1e-6);
    Ok((prof.max, witness))
}

/// Random weighted 0/1 system with targets near `b`: each row covers a
/// column with probability `density` and carries weight `w = ⌈b/96⌉` (1 for
/// `b ≤ 96`); `y_i` is uniform in `[ȳ/2, 3ȳ/2]` with `ȳ = b/(n·density·w)`,
/// capped at 2/3 so that `y ≤ 1`. Targets are `⟨a_j, y⟩`.
pub fn sweep_instance(n: usize, m: usize, b: f64, density: f64, seed: u64) -> (Vec<f64>, Vec<LinearRow>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = if b > 96.0 { (b / 96.0).ceil() } else { 1.0 };
    let mean = (b / (n as f64 * density * w)).min(0.66);
    let y: Vec<f64> = (0..n).map(|_| mean * rng.gen_range(0.5..1.5)).collect();
    let rows = (0..m)
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < density { w } else { 0.0 }).collect();
            let b = numeric::dot(&a, &y);
            LinearRow { a, b }
        })
        .collect();
    (y, rows)
}

/// One point of a violation-versus-target sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub b: f64,
    pub weight: f64,
    /// Mean over seeds of the engine's max violation.
    pub engine: f64,
    /// Mean over seeds of independent randomized rounding's max violation.
    pub random: f64,
    /// `w·√(n ln 3)`.
    pub envelope: f64,
    /// Largest violation / menu ratio seen by the engine.
    pub max_ratio: f64,
}

pub fn sweep_point(
    n: usize,
    m: usize,
    b: f64,
    density: f64,
    seeds: &[u64],
    cfg: &WalkConfig,
    params: &ScheduleParams,
) -> Result<SweepPoint, ScheduleError> {
    let mut engine = 0.0;
    let mut random = 0.0;
    let mut max_ratio = 0.0_f64;
    let mut weight = 1.0;
    for &seed in seeds {
        let (y, rows) = sweep_instance(n, m, b, density, seed);
        weight = rows.iter().flat_map(|r| r.a.iter().copied()).fold(0.0, f64::max).max(1.0);
        let out = schedules::round_full(&y, &rows, &Structure::Free, cfg, params, seed)?;
        engine += out.report.max_violation();
        max_ratio = max_ratio.max(out.report.max_ratio());
        let a: Vec<Vec<f64>> = rows.iter().map(|r| r.a.clone()).collect();
        let t: Vec<f64> = rows.iter().map(|r| r.b).collect();
        random += ViolationProfile::new(&a, &t, &randomized_round(&y, seed)).max;
    }
    let k = seeds.len().max(1) as f64;
    Ok(SweepPoint {
        b,
        weight,
        engine: engine / k,
        random: random / k,
        envelope: weight * (n as f64 * 3f64.ln()).sqrt(),
        max_ratio,
    })
}
