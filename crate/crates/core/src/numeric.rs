//! Dense vector utilities with an explicit tolerance model.
//!
//! Everything here works on plain `Vec<f64>` / `&[f64]` at desk scale
//! (dimensions up to a few hundred). Orthonormalization is a Gram-Schmidt
//! sweep with one full reorthogonalization pass, which keeps Gram errors near
//! machine precision even when the constraint rows are badly scaled.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("row {row} has length {found}, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("row {row} contains a non-finite entry")]
    NonFinite { row: usize },
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("diagonal scaling entry {index} is {value}, must be strictly positive")]
    NonPositiveScale { index: usize, value: f64 },
    #[error("tolerances must satisfy 0 < eps_rank <= eps_tight <= eps_feas < 1e-3")]
    BadTolerance,
    #[error("{what} violated by {amount:e}, more than eps_feas")]
    InfeasibleSnap { what: String, amount: f64 },
}

/// Tolerances used for tightness, rank and feasibility decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceModel {
    pub eps_tight: f64,
    pub eps_rank: f64,
    pub eps_feas: f64,
}

impl Default for ToleranceModel {
    fn default() -> Self {
        Self { eps_tight: 1e-9, eps_rank: 1e-10, eps_feas: 1e-8 }
    }
}

impl ToleranceModel {
    pub fn new(eps_tight: f64, eps_rank: f64, eps_feas: f64) -> Result<Self, NumericError> {
        let ok = eps_rank > 0.0 && eps_rank <= eps_tight && eps_tight <= eps_feas && eps_feas < 1e-3;
        if ok {
            Ok(Self { eps_tight, eps_rank, eps_feas })
        } else {
            Err(NumericError::BadTolerance)
        }
    }
}

/// A list of coefficient rows over a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl ConstraintMatrix {
    pub fn new(n: usize, rows: Vec<Vec<f64>>) -> Result<Self, NumericError> {
        for (r, row) in rows.iter().enumerate() {
            check_row(r, row, n)?;
        }
        Ok(Self { n, rows })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<(), NumericError> {
        check_row(self.rows.len(), &row, self.n)?;
        self.rows.push(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn check_row(r: usize, row: &[f64], n: usize) -> Result<(), NumericError> {
    if row.len() != n {
        return Err(NumericError::DimensionMismatch { row: r, expected: n, found: row.len() });
    }
    if row.iter().any(|v| !v.is_finite()) {
        return Err(NumericError::NonFinite { row: r });
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Removes the components of `v` along the orthonormal vectors in `basis`,
/// twice. Returns the residual norm.
pub fn orthogonalize_against(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            axpy(-c, q, v);
        }
    }
    norm(v)
}

/// Orthonormal basis of the row space. Rows whose residual after projection
/// falls below `eps_rank * ‖row‖` are treated as dependent.
pub fn orthonormal_row_basis(rows: &ConstraintMatrix, tol: &ToleranceModel) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for row in rows.rows() {
        let scale = norm(row);
        if scale == 0.0 {
            continue;
        }
        let mut v: Vec<f64> = row.iter().map(|x| x / scale).collect();
        let res = orthogonalize_against(&mut v, &basis);
        if res > tol.eps_rank {
            v.iter_mut().for_each(|x| *x /= res);
            basis.push(v);
        }
    }
    basis
}

/// Numerical rank of the rows.
pub fn numerical_rank(rows: &ConstraintMatrix, tol: &ToleranceModel) -> usize {
    orthonormal_row_basis(rows, tol).len()
}

/// Orthonormal basis of `{x : rows · x = 0}`.
///
/// The row space is orthonormalized first; the complement is then completed
/// from coordinate vectors, always picking the coordinate with the largest
/// remaining residual so that the completion never divides by a small norm.
pub fn orthonormal_nullspace_basis(
    rows: &ConstraintMatrix,
    tol: &ToleranceModel,
) -> Result<Vec<Vec<f64>>, NumericError> {
    let n = rows.dim();
    if n == 0 {
        return Err(NumericError::EmptyDimension);
    }
    let row_basis = orthonormal_row_basis(rows, tol);
    Ok(complete_complement(n, &row_basis))
}

/// Orthonormal basis of the orthogonal complement of `span(q)` where `q` is
/// already orthonormal.
pub fn complete_complement(n: usize, q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let target = n.saturating_sub(q.len());
    // residual[i] = ‖P⊥ e_i‖² against everything accepted so far
    let mut residual: Vec<f64> = (0..n).map(|i| 1.0 - q.iter().map(|v| v[i] * v[i]).sum::<f64>()).collect();
    let mut all: Vec<Vec<f64>> = q.to_vec();
    let mut out = Vec::with_capacity(target);
    let mut used = vec![false; n];
    while out.len() < target {
        let pick = (0..n)
            .filter(|&i| !used[i])
            .max_by(|&a, &b| residual[a].total_cmp(&residual[b]).then(b.cmp(&a)));
        let Some(i) = pick else { break };
        used[i] = true;
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        let res = orthogonalize_against(&mut v, &all);
        if res < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= res);
        for (j, r) in residual.iter_mut().enumerate() {
            *r -= v[j] * v[j];
        }
        all.push(v.clone());
        out.push(v);
    }
    out
}

/// Given a basis of a subspace `V` and a positive diagonal `D`, returns an
/// orthonormal basis of `{D v : v ∈ V}`.
pub fn scale_and_orthonormalize(
    basis: &[Vec<f64>],
    diag: &[f64],
    tol: &ToleranceModel,
) -> Result<Vec<Vec<f64>>, NumericError> {
    if let Some((index, &value)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0) || !d.is_finite()) {
        return Err(NumericError::NonPositiveScale { index, value });
    }
    let n = diag.len();
    let scaled: Vec<Vec<f64>> = basis
        .iter()
        .map(|v| v.iter().zip(diag).map(|(a, d)| a * d).collect())
        .collect();
    let m = ConstraintMatrix::new(n, scaled)?;
    Ok(orthonormal_row_basis(&m, tol))
}

/// Drops the direction `c` from an orthonormal basis (stored as vectors) by a
/// Householder reflection in coefficient space. Returns `false` and leaves the
/// basis alone when `c` has no component in the span.
pub fn remove_direction(basis: &mut Vec<Vec<f64>>, c: &[f64], rel_tol: f64) -> bool {
    let k = basis.len();
    if k == 0 {
        return false;
    }
    let cn = norm(c);
    if cn == 0.0 {
        return false;
    }
    let z: Vec<f64> = basis.iter().map(|b| dot(b, c)).collect();
    let zn = norm(&z);
    if zn <= rel_tol * cn {
        return false;
    }
    // v = z + sign(z0) ‖z‖ e0, H = I - 2 v vᵀ / vᵀv ; new basis = B H, minus column 0
    let mut v = z;
    let s = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += s * zn;
    let vtv = dot(&v, &v);
    let n = basis[0].len();
    let mut w = vec![0.0; n];
    for (b, &vl) in basis.iter().zip(&v) {
        axpy(vl, b, &mut w);
    }
    let beta = 2.0 / vtv;
    for (b, &vh) in basis.iter_mut().zip(&v) {
        axpy(-beta * vh, &w, b);
    }
    basis.remove(0);
    true
}

/// Linear feasibility region used by [`snap_to_feasible`]: a box plus
/// equality rows `a·x = b` and inequality rows `a·x ≤ b`.
#[derive(Debug, Clone, Default)]
pub struct FeasibleRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub equalities: Vec<(Vec<f64>, f64)>,
    pub inequalities: Vec<(Vec<f64>, f64)>,
}

impl FeasibleRegion {
    pub fn unit_box(n: usize) -> Self {
        Self { lower: vec![0.0; n], upper: vec![1.0; n], ..Default::default() }
    }

    /// Largest violation of any constraint at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for (i, &xi) in x.iter().enumerate() {
            worst = worst.max(self.lower[i] - xi).max(xi - self.upper[i]);
        }
        for (a, b) in &self.equalities {
            worst = worst.max((dot(a, x) - b).abs());
        }
        for (a, b) in &self.inequalities {
            worst = worst.max(dot(a, x) - b);
        }
        worst
    }
}

/// Moves a nearly feasible point onto the region: clamps the box and
/// re-projects active linear rows with a minimum-norm correction over the
/// coordinates not pinned at a bound.
pub fn snap_to_feasible(
    x: &[f64],
    q: &FeasibleRegion,
    tol: &ToleranceModel,
) -> Result<Vec<f64>, NumericError> {
    let n = x.len();
    for (i, &xi) in x.iter().enumerate() {
        let v = (q.lower[i] - xi).max(xi - q.upper[i]);
        if v > tol.eps_feas {
            return Err(NumericError::InfeasibleSnap { what: format!("bound on x[{i}]"), amount: v });
        }
    }
    for (r, (a, b)) in q.equalities.iter().enumerate() {
        let v = (dot(a, x) - b).abs();
        if v > tol.eps_feas * (1.0 + b.abs()) {
            return Err(NumericError::InfeasibleSnap { what: format!("equality {r}"), amount: v });
        }
    }
    for (r, (a, b)) in q.inequalities.iter().enumerate() {
        let v = dot(a, x) - b;
        if v > tol.eps_feas * (1.0 + b.abs()) {
            return Err(NumericError::InfeasibleSnap { what: format!("inequality {r}"), amount: v });
        }
    }

    let mut out: Vec<f64> = x.iter().enumerate().map(|(i, &v)| v.clamp(q.lower[i], q.upper[i])).collect();
    let mut pinned = vec![false; n];
    for _round in 0..6 {
        for i in 0..n {
            if out[i] <= q.lower[i] || out[i] >= q.upper[i] {
                pinned[i] = true;
                out[i] = out[i].clamp(q.lower[i], q.upper[i]);
            }
        }
        // active rows: all equalities plus inequalities at or over their bound
        let mut rows: Vec<(&[f64], f64)> = q.equalities.iter().map(|(a, b)| (a.as_slice(), *b)).collect();
        for (a, b) in &q.inequalities {
            if dot(a, &out) >= b - tol.eps_rank {
                rows.push((a.as_slice(), *b));
            }
        }
        let resid: Vec<f64> = rows.iter().map(|(a, b)| b - dot(a, &out)).collect();
        let worst = rows
            .iter()
            .zip(&resid)
            .map(|((_, b), r)| r.abs() / (1.0 + b.abs()))
            .fold(0.0_f64, f64::max);
        if worst <= 0.1 * tol.eps_rank {
            break;
        }
        let masked: Vec<Vec<f64>> = rows
            .iter()
            .map(|(a, _)| a.iter().enumerate().map(|(i, v)| if pinned[i] { 0.0 } else { *v }).collect())
            .collect();
        let delta = min_norm_correction(&masked, &resid);
        for i in 0..n {
            out[i] += delta[i];
        }
        let mut moved_out = false;
        for i in 0..n {
            if out[i] < q.lower[i] || out[i] > q.upper[i] {
                out[i] = out[i].clamp(q.lower[i], q.upper[i]);
                moved_out = true;
            }
        }
        if !moved_out {
            // one more pass tightens the residual further
            continue;
        }
    }
    Ok(out)
}

/// Minimum-norm `δ` with `A δ = r` over the row space (dependent rows skipped).
fn min_norm_correction(a: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let n = a.first().map_or(0, Vec::len);
    let mut delta = vec![0.0; n];
    if n == 0 {
        return delta;
    }
    // Orthonormalize the rows while carrying the right-hand sides along:
    // if q = (a_i - Σ c_l q_l)/ρ then ⟨q, δ⟩ = (r_i - Σ c_l t_l)/ρ.
    let mut qs: Vec<Vec<f64>> = Vec::new();
    let mut ts: Vec<f64> = Vec::new();
    for (row, &ri) in a.iter().zip(r) {
        let scale = norm(row);
        if scale == 0.0 {
            continue;
        }
        let mut v: Vec<f64> = row.iter().map(|x| x / scale).collect();
        let mut t = ri / scale;
        for _ in 0..2 {
            for (q, &tq) in qs.iter().zip(&ts) {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
                t -= c * tq;
            }
        }
        let rho = norm(&v);
        if rho < 1e-7 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= rho);
        qs.push(v);
        ts.push(t / rho);
    }
    for (q, t) in qs.iter().zip(&ts) {
        axpy(*t, q, &mut delta);
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_error(b: &[Vec<f64>]) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..b.len() {
            for j in 0..b.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&b[i], &b[j]) - want).abs());
            }
        }
        worst
    }

    /// Rank by exact rational-style elimination on small integer matrices,
    /// independent of the Gram-Schmidt path.
    fn elimination_rank(rows: &[Vec<f64>]) -> usize {
        let mut m: Vec<Vec<f64>> = rows.to_vec();
        let cols = m.first().map_or(0, Vec::len);
        let mut rank = 0;
        for c in 0..cols {
            let Some(p) = (rank..m.len()).find(|&r| m[r][c].abs() > 1e-12) else { continue };
            m.swap(rank, p);
            for r in 0..m.len() {
                if r != rank && m[r][c] != 0.0 {
                    let f = m[r][c] / m[rank][c];
                    for k in 0..cols {
                        m[r][k] -= f * m[rank][k];
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn nullspace_of_single_row() {
        let tol = ToleranceModel::default();
        let m = ConstraintMatrix::new(2, vec![vec![1.0, 1.0]]).unwrap();
        let b = orthonormal_nullspace_basis(&m, &tol).unwrap();
        assert_eq!(b.len(), 1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b[0][0].abs() - h).abs() < 1e-12);
        assert!((b[0][0] + b[0][1]).abs() < 1e-12);
    }

    #[test]
    fn nullspace_without_rows_is_full_space() {
        let tol = ToleranceModel::default();
        let b = orthonormal_nullspace_basis(&ConstraintMatrix::empty(3), &tol).unwrap();
        assert_eq!(b.len(), 3);
        assert!(gram_error(&b) < 1e-12);
    }

    #[test]
    fn nullspace_with_dependent_row() {
        let tol = ToleranceModel::default();
        let rows = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]];
        assert_eq!(elimination_rank(&rows), 2);
        let m = ConstraintMatrix::new(3, rows).unwrap();
        let b = orthonormal_nullspace_basis(&m, &tol).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0][2].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_rows_are_rejected() {
        let err = ConstraintMatrix::new(2, vec![vec![1.0, 2.0, 3.0]]).unwrap_err();
        assert!(matches!(err, NumericError::DimensionMismatch { row: 0, .. }));
        let err = ConstraintMatrix::new(2, vec![vec![f64::NAN, 1.0]]).unwrap_err();
        assert!(matches!(err, NumericError::NonFinite { row: 0 }));
    }

    #[test]
    fn tolerance_ordering_is_enforced() {
        assert!(ToleranceModel::new(1e-9, 1e-10, 1e-8).is_ok());
        assert!(ToleranceModel::new(1e-11, 1e-10, 1e-8).is_err());
        assert!(ToleranceModel::new(1e-9, 1e-10, 1e-2).is_err());
    }

    #[test]
    fn scaling_examples() {
        let tol = ToleranceModel::default();
        let s = 1.0 / 5.0_f64.sqrt();
        let out = scale_and_orthonormalize(&[vec![1.0, -1.0]], &[2.0, 2.0], &tol).unwrap();
        assert!((out[0][0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((out[0][0] + out[0][1]).abs() < 1e-12);
        let out = scale_and_orthonormalize(&[vec![1.0, 1.0]], &[1.0, 2.0], &tol).unwrap();
        assert!((out[0][0].abs() - s).abs() < 1e-12 && (out[0][1].abs() - 2.0 * s).abs() < 1e-12);
        let out = scale_and_orthonormalize(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0], &tol).unwrap();
        assert_eq!(out.len(), 2);
        assert!(gram_error(&out) < 1e-12);
        assert!(matches!(
            scale_and_orthonormalize(&[vec![1.0, 0.0]], &[1.0, 0.0], &tol),
            Err(NumericError::NonPositiveScale { index: 1, .. })
        ));
    }

    #[test]
    fn householder_removal_keeps_orthonormality() {
        let tol = ToleranceModel::default();
        let mut b = orthonormal_nullspace_basis(&ConstraintMatrix::empty(5), &tol).unwrap();
        assert!(remove_direction(&mut b, &[1.0, 1.0, 0.0, 0.0, 0.0], 1e-12));
        assert!(remove_direction(&mut b, &[0.0, 1.0, -2.0, 0.5, 0.0], 1e-12));
        // already removed
        assert!(!remove_direction(&mut b, &[2.0, 2.0, 0.0, 0.0, 0.0], 1e-9));
        assert_eq!(b.len(), 3);
        assert!(gram_error(&b) < 1e-12);
        for v in &b {
            assert!((v[0] + v[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn snap_clamps_box() {
        let tol = ToleranceModel::default();
        let q = FeasibleRegion::unit_box(2);
        let out = snap_to_feasible(&[1.0 + 1e-12, 0.5], &q, &tol).unwrap();
        assert_eq!(out, vec![1.0, 0.5]);
        let out = snap_to_feasible(&[0.25, 0.5], &q, &tol).unwrap();
        assert_eq!(out, vec![0.25, 0.5]);
    }

    #[test]
    fn snap_keeps_exact_equality() {
        let tol = ToleranceModel::default();
        let mut q = FeasibleRegion::unit_box(2);
        q.equalities.push((vec![1.0, 1.0], 1.0));
        let x = [0.5 + 2e-10, 0.5 - 2e-10];
        let out = snap_to_feasible(&x, &q, &tol).unwrap();
        assert!((out[0] + out[1] - 1.0).abs() <= tol.eps_rank);
        assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn snap_projects_drifted_equality_and_rejects_far_points() {
        let tol = ToleranceModel::default();
        let mut q = FeasibleRegion::unit_box(3);
        q.equalities.push((vec![1.0, 1.0, 1.0], 1.5));
        let out = snap_to_feasible(&[1.0, 0.25 + 3e-9, 0.25], &q, &tol).unwrap();
        assert!((out.iter().sum::<f64>() - 1.5).abs() <= tol.eps_rank);
        assert_eq!(out[0], 1.0);
        let l1: f64 = out.iter().zip([1.0, 0.25 + 3e-9, 0.25]).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 <= 3.0 * tol.eps_feas);
        assert!(snap_to_feasible(&[1.0, 0.3, 0.25], &q, &tol).is_err());
    }
}
