//! Matroid oracles and matroid polytope geometry.
//!
//! Four oracle kinds are supported. Uniform and partition matroids answer
//! separation and tight-set queries in closed form; graphic and explicit
//! matroids fall back to exhaustive tables over all subsets, which caps them
//! at [`BRUTE_FORCE_LIMIT`] elements.
//!
//! Subsets are passed as sorted index slices. Points are dense `&[f64]` of
//! length `ground_size()`.

use std::collections::HashSet;
use std::sync::OnceLock;

use thiserror::Error;

use crate::numeric::ToleranceModel;

/// Largest ground set handled by the exhaustive (table based) code paths.
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatroidError {
    #[error("element {0} is outside the ground set")]
    ElementOutOfRange(usize),
    #[error("partition parts overlap at element {0}")]
    OverlappingParts(usize),
    #[error("element {0} is not covered by any partition part")]
    UncoveredElement(usize),
    #[error("{parts} parts but {capacities} capacities")]
    CapacityCount { parts: usize, capacities: usize },
    #[error("edge {edge} references vertex {vertex} but only {vertices} vertices exist")]
    BadEdge { edge: usize, vertex: usize, vertices: usize },
    #[error("bases do not define a matroid: {0}")]
    NotAMatroid(String),
    #[error("{kind} matroid with {n} elements exceeds the exhaustive limit of {BRUTE_FORCE_LIMIT}")]
    TooLarge { kind: &'static str, n: usize },
    #[error("point has length {found}, ground set has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinate {index} is negative ({value})")]
    NegativeCoordinate { index: usize, value: f64 },
    #[error("point lies outside the matroid polytope (set {set:?} exceeds its rank by {excess:e})")]
    OutsidePolytope { set: Vec<usize>, excess: f64 },
    #[error("point is not in the base polytope: x(V) = {sum}, r(V) = {rank}")]
    NotInBasePolytope { sum: f64, rank: usize },
    #[error("set {0:?} is dependent")]
    Dependent(Vec<usize>),
    #[error("base decomposition stalled with residual weight {0:e}")]
    DecompositionStalled(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatroidKind {
    Uniform { rank: usize },
    Partition { parts: Vec<Vec<usize>>, capacities: Vec<usize> },
    Graphic { vertices: usize, edges: Vec<(usize, usize)> },
    Explicit { bases: Vec<Vec<usize>> },
}

/// Result of a separation query.
#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    Inside,
    Violated { set: Vec<usize>, excess: f64 },
}

/// Nested tight sets whose indicators span every tight rank constraint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TightChain {
    pub sets: Vec<Vec<usize>>,
    pub ranks: Vec<usize>,
}

impl TightChain {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

#[derive(Debug, Clone)]
struct BruteTables {
    rank: Vec<u8>,
}

/// An immutable matroid oracle over the ground set `0..n`.
#[derive(Debug, Clone)]
pub struct Matroid {
    n: usize,
    kind: MatroidKind,
    part_of: Vec<usize>,
    tables: OnceLock<BruteTables>,
}

/// A contracted or restricted matroid together with the original index of
/// each of its elements.
#[derive(Debug, Clone)]
pub struct Minor {
    pub matroid: Matroid,
    pub original: Vec<usize>,
}

impl Matroid {
    pub fn uniform(n: usize, rank: usize) -> Self {
        Self::from_kind(n, MatroidKind::Uniform { rank: rank.min(n) }, Vec::new())
    }

    pub fn partition(n: usize, parts: Vec<Vec<usize>>, capacities: Vec<usize>) -> Result<Self, MatroidError> {
        if parts.len() != capacities.len() {
            return Err(MatroidError::CapacityCount { parts: parts.len(), capacities: capacities.len() });
        }
        let mut part_of = vec![usize::MAX; n];
        for (p, part) in parts.iter().enumerate() {
            for &e in part {
                if e >= n {
                    return Err(MatroidError::ElementOutOfRange(e));
                }
                if part_of[e] != usize::MAX {
                    return Err(MatroidError::OverlappingParts(e));
                }
                part_of[e] = p;
            }
        }
        if let Some(e) = part_of.iter().position(|&p| p == usize::MAX) {
            return Err(MatroidError::UncoveredElement(e));
        }
        let parts = parts
            .into_iter()
            .map(|mut p| {
                p.sort_unstable();
                p
            })
            .collect();
        Ok(Self::from_kind(n, MatroidKind::Partition { parts, capacities }, part_of))
    }

    pub fn graphic(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self, MatroidError> {
        for (i, &(u, v)) in edges.iter().enumerate() {
            for w in [u, v] {
                if w >= vertices {
                    return Err(MatroidError::BadEdge { edge: i, vertex: w, vertices });
                }
            }
        }
        Ok(Self::from_kind(edges.len(), MatroidKind::Graphic { vertices, edges }, Vec::new()))
    }

    /// Matroid given by its list of bases. Checks equal base size and the
    /// basis exchange axiom.
    pub fn explicit(n: usize, bases: Vec<Vec<usize>>) -> Result<Self, MatroidError> {
        if n > BRUTE_FORCE_LIMIT {
            return Err(MatroidError::TooLarge { kind: "explicit", n });
        }
        if bases.is_empty() {
            return Err(MatroidError::NotAMatroid("no bases given".into()));
        }
        let mut masks = HashSet::new();
        let mut sorted = Vec::with_capacity(bases.len());
        for b in bases {
            let mut b = b;
            b.sort_unstable();
            b.dedup();
            if let Some(&e) = b.iter().find(|&&e| e >= n) {
                return Err(MatroidError::ElementOutOfRange(e));
            }
            if masks.insert(to_mask(&b)) {
                sorted.push(b);
            }
        }
        let r = sorted[0].len();
        if sorted.iter().any(|b| b.len() != r) {
            return Err(MatroidError::NotAMatroid("bases have different sizes".into()));
        }
        for b1 in &masks {
            for b2 in &masks {
                let mut only1 = b1 & !b2;
                while only1 != 0 {
                    let x = only1.trailing_zeros();
                    only1 &= only1 - 1;
                    let mut only2 = b2 & !b1;
                    let mut found = false;
                    while only2 != 0 {
                        let y = only2.trailing_zeros();
                        only2 &= only2 - 1;
                        if masks.contains(&((b1 & !(1 << x)) | (1 << y))) {
                            found = true;
                            break;
                        }
                    }
                    if !found {
                        return Err(MatroidError::NotAMatroid(format!(
                            "exchange fails for element {x} between bases {:?} and {:?}",
                            from_mask(*b1),
                            from_mask(*b2)
                        )));
                    }
                }
            }
        }
        sorted.sort();
        Ok(Self::from_kind(n, MatroidKind::Explicit { bases: sorted }, Vec::new()))
    }

    fn from_kind(n: usize, kind: MatroidKind, part_of: Vec<usize>) -> Self {
        Self { n, kind, part_of, tables: OnceLock::new() }
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &MatroidKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            MatroidKind::Uniform { .. } => "uniform",
            MatroidKind::Partition { .. } => "partition",
            MatroidKind::Graphic { .. } => "graphic",
            MatroidKind::Explicit { .. } => "explicit",
        }
    }

    fn uses_tables(&self) -> bool {
        matches!(self.kind, MatroidKind::Graphic { .. } | MatroidKind::Explicit { .. })
    }

    fn check_table_size(&self) -> Result<(), MatroidError> {
        if self.uses_tables() && self.n > BRUTE_FORCE_LIMIT {
            return Err(MatroidError::TooLarge { kind: self.kind_name(), n: self.n });
        }
        Ok(())
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        match &self.kind {
            MatroidKind::Uniform { rank } => set.len() <= *rank,
            MatroidKind::Partition { capacities, .. } => {
                let mut used = vec![0usize; capacities.len()];
                set.iter().all(|&e| {
                    let p = self.part_of[e];
                    used[p] += 1;
                    used[p] <= capacities[p]
                })
            }
            MatroidKind::Graphic { vertices, edges } => {
                let mut uf = UnionFind::new(*vertices);
                set.iter().all(|&e| {
                    let (u, v) = edges[e];
                    uf.union(u, v)
                })
            }
            MatroidKind::Explicit { bases } => {
                let m = to_mask(set);
                bases.iter().any(|b| to_mask(b) & m == m)
            }
        }
    }

    /// Size of a largest independent subset of `set`, grown greedily with
    /// the independence oracle.
    pub fn rank(&self, set: &[usize]) -> usize {
        let mut chosen: Vec<usize> = Vec::with_capacity(set.len());
        for &e in set {
            chosen.push(e);
            if !self.is_independent(&chosen) {
                chosen.pop();
            }
        }
        chosen.len()
    }

    pub fn full_rank(&self) -> usize {
        let all: Vec<usize> = (0..self.n).collect();
        self.rank(&all)
    }

    fn tables(&self) -> &BruteTables {
        self.tables.get_or_init(|| {
            let n = self.n;
            let size = 1usize << n;
            let mut rank = vec![0u8; size];
            match &self.kind {
                MatroidKind::Explicit { bases } => {
                    let mut indep = vec![false; size];
                    for b in bases {
                        indep[to_mask(b) as usize] = true;
                    }
                    for m in (0..size).rev() {
                        if indep[m] {
                            continue;
                        }
                        let mut free = !m & (size - 1);
                        while free != 0 {
                            let b = free & free.wrapping_neg();
                            free &= free - 1;
                            if indep[m | b] {
                                indep[m] = true;
                                break;
                            }
                        }
                    }
                    for m in 1..size {
                        rank[m] = if indep[m] {
                            m.count_ones() as u8
                        } else {
                            let mut best = 0;
                            let mut bits = m;
                            while bits != 0 {
                                let b = bits & bits.wrapping_neg();
                                bits &= bits - 1;
                                best = best.max(rank[m & !b]);
                            }
                            best
                        };
                    }
                }
                _ => {
                    for (m, r) in rank.iter_mut().enumerate() {
                        *r = self.rank(&from_mask(m as u32)) as u8;
                    }
                }
            }
            BruteTables { rank }
        })
    }

    fn check_point(&self, x: &[f64]) -> Result<(), MatroidError> {
        if x.len() != self.n {
            return Err(MatroidError::DimensionMismatch { expected: self.n, found: x.len() });
        }
        Ok(())
    }

    /// Most violated rank inequality at `x` and its excess `x(S) - r(S)`.
    /// The excess is 0 (for the empty set) when nothing is violated.
    pub fn max_violation(&self, x: &[f64]) -> Result<(Vec<usize>, f64), MatroidError> {
        self.check_point(x)?;
        self.check_table_size()?;
        Ok(match &self.kind {
            MatroidKind::Uniform { rank } => {
                let all: Vec<usize> = (0..self.n).collect();
                best_prefix(&all, x, *rank)
            }
            MatroidKind::Partition { parts, capacities } => {
                let mut set = Vec::new();
                let mut excess = 0.0;
                for (part, &cap) in parts.iter().zip(capacities) {
                    let (s, e) = best_prefix(part, x, cap);
                    if e > 0.0 {
                        set.extend(s);
                        excess += e;
                    }
                }
                set.sort_unstable();
                (set, excess)
            }
            _ => {
                let t = self.tables();
                let sums = subset_sums(x);
                let mut best = (0usize, 0.0);
                for (m, &s) in sums.iter().enumerate() {
                    let e = s - t.rank[m] as f64;
                    if e > best.1 {
                        best = (m, e);
                    }
                }
                (from_mask(best.0 as u32), best.1)
            }
        })
    }

    /// Separation over `P(M)`: inside iff `x(S) ≤ r(S) + eps_feas` for all `S`.
    pub fn separate(&self, x: &[f64], tol: &ToleranceModel) -> Result<Separation, MatroidError> {
        self.check_point(x)?;
        if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| **v < -tol.eps_feas) {
            return Err(MatroidError::NegativeCoordinate { index, value });
        }
        let (set, excess) = self.max_violation(x)?;
        if excess > tol.eps_feas {
            Ok(Separation::Violated { set, excess })
        } else {
            Ok(Separation::Inside)
        }
    }

    pub fn in_base_polytope(&self, x: &[f64], tol: &ToleranceModel) -> Result<bool, MatroidError> {
        if self.separate(x, tol)? != Separation::Inside {
            return Ok(false);
        }
        let sum: f64 = x.iter().sum();
        Ok((sum - self.full_rank() as f64).abs() <= tol.eps_feas * (1.0 + self.n as f64))
    }

    /// Largest `μ ∈ [0, mu_max]` with `x + μ d ∈ P(M)`, together with the
    /// rank set that becomes tight when `μ < mu_max`.
    ///
    /// Works from the far end inward: each violated set yields the exact
    /// line-hyperplane intersection, which can only move `μ` down toward the
    /// boundary. Terminates because every set is visited at most once.
    pub fn max_step(
        &self,
        x: &[f64],
        d: &[f64],
        mu_max: f64,
        tol: &ToleranceModel,
    ) -> Result<(f64, Option<Vec<usize>>), MatroidError> {
        let mut mu = mu_max;
        let mut hit = None;
        let mut p = vec![0.0; x.len()];
        for _ in 0..(4 * self.n + 64) {
            for i in 0..x.len() {
                p[i] = x[i] + mu * d[i];
            }
            let (set, excess) = self.max_violation(&p)?;
            if excess <= tol.eps_rank {
                return Ok((mu, hit));
            }
            let xs: f64 = set.iter().map(|&i| x[i]).sum();
            let ds: f64 = set.iter().map(|&i| d[i]).sum();
            let r = self.rank(&set) as f64;
            let next = if ds > 0.0 { ((r - xs) / ds).max(0.0) } else { 0.0 };
            if next >= mu {
                // numerical stall at the boundary
                return Ok((mu.min(next), Some(set)));
            }
            mu = next;
            hit = Some(set);
        }
        Ok((mu, hit))
    }

    fn is_tight(&self, x: &[f64], set: &[usize], tol: &ToleranceModel) -> bool {
        let s: f64 = set.iter().map(|&i| x[i]).sum();
        let r = self.rank(set) as f64;
        (s - r).abs() <= tol.eps_tight * (1.0 + r)
    }

    /// Smallest tight set containing `a`, if any. Tight sets are closed under
    /// intersection, so this is well defined.
    pub fn min_tight_superset(
        &self,
        x: &[f64],
        a: &[usize],
        tol: &ToleranceModel,
    ) -> Result<Option<Vec<usize>>, MatroidError> {
        self.check_point(x)?;
        self.check_table_size()?;
        let table = if self.uses_tables() { Some(self.tight_table(x, tol)) } else { None };
        Ok(self.min_tight_with(x, a, tol, table.as_deref()))
    }

    fn min_tight_with(&self, x: &[f64], a: &[usize], tol: &ToleranceModel, table: Option<&[bool]>) -> Option<Vec<usize>> {
        match &self.kind {
            MatroidKind::Uniform { rank } => {
                let all: Vec<usize> = (0..self.n).collect();
                min_tight_in_block(&all, a, x, *rank, tol)
            }
            MatroidKind::Partition { parts, capacities } => {
                let mut out = Vec::new();
                for (p, part) in parts.iter().enumerate() {
                    let local: Vec<usize> = a.iter().copied().filter(|&e| self.part_of[e] == p).collect();
                    if local.is_empty() {
                        continue;
                    }
                    match min_tight_in_block(part, &local, x, capacities[p], tol) {
                        Some(s) => out.extend(s),
                        None => return None,
                    }
                }
                out.sort_unstable();
                Some(out)
            }
            _ => {
                let tight = table.expect("tight table for exhaustive kinds");
                let am = to_mask(a);
                let comp = !am & ((1u32 << self.n) - 1);
                let mut acc: Option<u32> = None;
                let mut sub = comp;
                loop {
                    let s = am | sub;
                    if tight[s as usize] {
                        acc = Some(acc.map_or(s, |m| m & s));
                    }
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & comp;
                }
                acc.map(from_mask)
            }
        }
    }

    fn tight_table(&self, x: &[f64], tol: &ToleranceModel) -> Vec<bool> {
        let t = self.tables();
        subset_sums(x)
            .iter()
            .zip(&t.rank)
            .map(|(&s, &r)| (s - r as f64).abs() <= tol.eps_tight * (1.0 + r as f64))
            .collect()
    }

    /// Maximal chain of tight sets at `x`. Indicator vectors of a maximal
    /// chain in the lattice of tight sets span every tight rank constraint.
    pub fn tight_chain(&self, x: &[f64], tol: &ToleranceModel) -> Result<TightChain, MatroidError> {
        if let Separation::Violated { set, excess } = self.separate(x, tol)? {
            return Err(MatroidError::OutsidePolytope { set, excess });
        }
        let table = if self.uses_tables() { Some(self.tight_table(x, tol)) } else { None };
        let mut chain = TightChain::default();
        let mut current: Vec<usize> = Vec::new();
        let mut inside = vec![false; self.n];
        loop {
            let mut best: Option<Vec<usize>> = None;
            for e in 0..self.n {
                if inside[e] {
                    continue;
                }
                let mut a = current.clone();
                a.push(e);
                a.sort_unstable();
                if let Some(s) = self.min_tight_with(x, &a, tol, table.as_deref()) {
                    if best.as_ref().is_none_or(|b| s.len() < b.len()) {
                        best = Some(s);
                    }
                }
            }
            let Some(next) = best else { break };
            for &e in &next {
                inside[e] = true;
            }
            chain.ranks.push(self.rank(&next));
            chain.sets.push(next.clone());
            current = next;
        }
        debug_assert!(chain.sets.iter().all(|s| self.is_tight(x, s, tol)));
        Ok(chain)
    }

    /// Contracts the independent set `s`; the result lives on the remaining
    /// elements in increasing original order.
    pub fn contract(&self, s: &[usize]) -> Result<Minor, MatroidError> {
        if let Some(&e) = s.iter().find(|&&e| e >= self.n) {
            return Err(MatroidError::ElementOutOfRange(e));
        }
        if !self.is_independent(s) {
            return Err(MatroidError::Dependent(s.to_vec()));
        }
        let removed: HashSet<usize> = s.iter().copied().collect();
        let original: Vec<usize> = (0..self.n).filter(|e| !removed.contains(e)).collect();
        let relabel = relabeling(self.n, &original);
        let n2 = original.len();
        let matroid = match &self.kind {
            MatroidKind::Uniform { rank } => Matroid::uniform(n2, rank - s.len()),
            MatroidKind::Partition { parts, capacities } => {
                let mut caps = capacities.clone();
                for &e in s {
                    caps[self.part_of[e]] -= 1;
                }
                let parts2 = parts
                    .iter()
                    .map(|p| p.iter().filter_map(|&e| relabel[e]).collect())
                    .collect();
                Matroid::partition(n2, parts2, caps)?
            }
            MatroidKind::Graphic { vertices, edges } => {
                let mut uf = UnionFind::new(*vertices);
                for &e in s {
                    uf.union(edges[e].0, edges[e].1);
                }
                let mut ids = vec![usize::MAX; *vertices];
                let mut next = 0;
                for v in 0..*vertices {
                    let r = uf.find(v);
                    if ids[r] == usize::MAX {
                        ids[r] = next;
                        next += 1;
                    }
                }
                let edges2 = original
                    .iter()
                    .map(|&e| (ids[uf.find(edges[e].0)], ids[uf.find(edges[e].1)]))
                    .collect();
                Matroid::graphic(next, edges2)?
            }
            MatroidKind::Explicit { bases } => {
                let sm = to_mask(s);
                let bases2: Vec<Vec<usize>> = bases
                    .iter()
                    .filter(|b| to_mask(b) & sm == sm)
                    .map(|b| b.iter().filter_map(|&e| relabel[e]).collect())
                    .collect();
                Matroid::explicit(n2, bases2)?
            }
        };
        Ok(Minor { matroid, original })
    }

    /// Restriction to the complement of `d`.
    pub fn delete(&self, d: &[usize]) -> Result<Minor, MatroidError> {
        if let Some(&e) = d.iter().find(|&&e| e >= self.n) {
            return Err(MatroidError::ElementOutOfRange(e));
        }
        let removed: HashSet<usize> = d.iter().copied().collect();
        let original: Vec<usize> = (0..self.n).filter(|e| !removed.contains(e)).collect();
        let relabel = relabeling(self.n, &original);
        let n2 = original.len();
        let matroid = match &self.kind {
            MatroidKind::Uniform { rank } => Matroid::uniform(n2, (*rank).min(n2)),
            MatroidKind::Partition { parts, capacities } => {
                let parts2 = parts.iter().map(|p| p.iter().filter_map(|&e| relabel[e]).collect()).collect();
                Matroid::partition(n2, parts2, capacities.clone())?
            }
            MatroidKind::Graphic { vertices, edges } => {
                Matroid::graphic(*vertices, original.iter().map(|&e| edges[e]).collect())?
            }
            MatroidKind::Explicit { .. } => {
                let r = self.rank(&original);
                let t = self.tables();
                let keep = to_mask(&original);
                let mut bases = Vec::new();
                let mut sub = keep;
                loop {
                    if sub.count_ones() as usize == r && t.rank[sub as usize] as usize == r {
                        bases.push(from_mask(sub).into_iter().filter_map(|e| relabel[e]).collect());
                    }
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & keep;
                }
                if bases.is_empty() {
                    bases.push(Vec::new());
                }
                Matroid::explicit(n2, bases)?
            }
        };
        Ok(Minor { matroid, original })
    }

    /// Max-weight base by the greedy rule, considering only elements whose
    /// weight exceeds `floor`. Ties go to the lower index.
    pub fn greedy_base(&self, weights: &[f64], floor: f64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n).filter(|&i| weights[i] > floor).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        let mut chosen = Vec::new();
        for e in order {
            chosen.push(e);
            if !self.is_independent(&chosen) {
                chosen.pop();
            }
        }
        chosen.sort_unstable();
        chosen
    }

    /// Writes a base-polytope point as a convex combination of at most
    /// `n + 1` bases (largest weight first).
    pub fn base_decompose(&self, x: &[f64], tol: &ToleranceModel) -> Result<Vec<(Vec<usize>, f64)>, MatroidError> {
        self.check_point(x)?;
        if !self.in_base_polytope(x, tol)? {
            let sum: f64 = x.iter().sum();
            return Err(MatroidError::NotInBasePolytope { sum, rank: self.full_rank() });
        }
        let r = self.full_rank();
        let mut z: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        let mut w = 1.0_f64;
        let mut out: Vec<(Vec<usize>, f64)> = Vec::new();
        let floor = tol.eps_feas;
        let mut p = vec![0.0; self.n];
        for _ in 0..=(self.n + 1) {
            if w <= tol.eps_feas {
                break;
            }
            let base = self.greedy_base(&z, floor);
            if base.len() != r {
                return Err(MatroidError::DecompositionStalled(w));
            }
            let mut in_base = vec![false; self.n];
            base.iter().for_each(|&e| in_base[e] = true);
            let mut theta = base.iter().map(|&e| z[e]).fold(f64::INFINITY, f64::min).min(w);
            for _ in 0..(4 * self.n + 64) {
                let rest = w - theta;
                if rest <= tol.eps_feas {
                    break;
                }
                for i in 0..self.n {
                    p[i] = (z[i] - if in_base[i] { theta } else { 0.0 }).max(0.0) / rest;
                }
                let (set, excess) = self.max_violation(&p)?;
                if excess <= tol.eps_rank {
                    break;
                }
                let zs: f64 = set.iter().map(|&i| z[i]).sum();
                let bs = set.iter().filter(|&&i| in_base[i]).count() as f64;
                let rs = self.rank(&set) as f64;
                if rs - bs <= 0.5 {
                    break;
                }
                let next = (w * rs - zs) / (rs - bs);
                if next >= theta {
                    break;
                }
                theta = next.max(0.0);
            }
            if theta <= 0.0 {
                return Err(MatroidError::DecompositionStalled(w));
            }
            for &e in &base {
                z[e] -= theta;
                if z[e] < floor {
                    z[e] = 0.0;
                }
            }
            w -= theta;
            out.push((base, theta));
        }
        if w > tol.eps_feas * (1.0 + self.n as f64) {
            return Err(MatroidError::DecompositionStalled(w));
        }
        let total: f64 = out.iter().map(|(_, t)| t).sum();
        for (_, t) in out.iter_mut() {
            *t /= total;
        }
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(out)
    }
}

fn relabeling(n: usize, kept: &[usize]) -> Vec<Option<usize>> {
    let mut map = vec![None; n];
    for (new, &old) in kept.iter().enumerate() {
        map[old] = Some(new);
    }
    map
}

/// For a block behaving like a uniform matroid of rank `cap`, the subset
/// maximizing `x(S) - min(|S|, cap)`: always a prefix of the block sorted by
/// decreasing value.
fn best_prefix(block: &[usize], x: &[f64], cap: usize) -> (Vec<usize>, f64) {
    let mut order = block.to_vec();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut best = (0usize, 0.0);
    let mut sum = 0.0;
    for (t, &e) in order.iter().enumerate() {
        sum += x[e];
        let v = sum - (t + 1).min(cap) as f64;
        if v > best.1 {
            best = (t + 1, v);
        }
    }
    let mut set = order[..best.0].to_vec();
    set.sort_unstable();
    (set, best.1)
}

/// Tight sets of a uniform block of rank `cap` are either all-ones sets of
/// size at most `cap`, or (when the whole block is tight) supersets of the
/// support.
fn min_tight_in_block(block: &[usize], a: &[usize], x: &[f64], cap: usize, tol: &ToleranceModel) -> Option<Vec<usize>> {
    let one = 1.0 - tol.eps_tight;
    if a.len() <= cap && a.iter().all(|&e| x[e] >= one) {
        return Some(a.to_vec());
    }
    let total: f64 = block.iter().map(|&e| x[e]).sum();
    if (total - cap as f64).abs() <= tol.eps_tight * (1.0 + cap as f64) {
        let mut s: Vec<usize> = block.iter().copied().filter(|&e| x[e] > tol.eps_tight).collect();
        s.extend_from_slice(a);
        s.sort_unstable();
        s.dedup();
        return Some(s);
    }
    None
}

fn subset_sums(x: &[f64]) -> Vec<f64> {
    let size = 1usize << x.len();
    let mut sums = vec![0.0; size];
    for m in 1..size {
        let low = m.trailing_zeros() as usize;
        sums[m] = sums[m & (m - 1)] + x[low];
    }
    sums
}

pub(crate) fn to_mask(set: &[usize]) -> u32 {
    set.iter().fold(0u32, |m, &e| m | (1 << e))
}

pub(crate) fn from_mask(mut m: u32) -> Vec<usize> {
    let mut out = Vec::with_capacity(m.count_ones() as usize);
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Returns false when `u` and `v` were already connected.
    fn union(&mut self, u: usize, v: usize) -> bool {
        let (a, b) = (self.find(u), self.find(v));
        if a == b {
            return false;
        }
        self.parent[a] = b;
        true
    }
}

/// Direction of the laminar requirements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaminarSense {
    AtMost,
    AtLeast,
    Equal,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LaminarSet {
    pub members: Vec<usize>,
    pub value: f64,
}

/// A laminar family of requirements `x(S) {≤,≥,=} value`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaminarFamily {
    n: usize,
    sense: LaminarSense,
    sets: Vec<LaminarSet>,
}

impl LaminarFamily {
    pub fn new(n: usize, sense: LaminarSense, sets: Vec<LaminarSet>) -> Result<Self, MatroidError> {
        let mut sets = sets;
        for s in &mut sets {
            s.members.sort_unstable();
            s.members.dedup();
            if let Some(&e) = s.members.iter().find(|&&e| e >= n) {
                return Err(MatroidError::ElementOutOfRange(e));
            }
        }
        for i in 0..sets.len() {
            for j in (i + 1)..sets.len() {
                let a: HashSet<_> = sets[i].members.iter().collect();
                let b: HashSet<_> = sets[j].members.iter().collect();
                let inter = a.intersection(&b).count();
                if inter != 0 && inter != a.len() && inter != b.len() {
                    return Err(MatroidError::NotAMatroid(format!("laminar sets {i} and {j} cross")));
                }
            }
        }
        Ok(Self { n, sense, sets })
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    pub fn sense(&self) -> LaminarSense {
        self.sense
    }

    pub fn sets(&self) -> &[LaminarSet] {
        &self.sets
    }

    /// Signed slack of set `i` at `x`: nonnegative iff the requirement holds.
    pub fn slack(&self, i: usize, x: &[f64]) -> f64 {
        let s = &self.sets[i];
        let v: f64 = s.members.iter().map(|&e| x[e]).sum();
        match self.sense {
            LaminarSense::AtMost => s.value - v,
            LaminarSense::AtLeast => v - s.value,
            LaminarSense::Equal => -(v - s.value).abs(),
        }
    }

    pub fn is_satisfied(&self, x: &[f64], tol: f64) -> bool {
        (0..self.sets.len()).all(|i| self.slack(i, x) >= -tol)
    }

    /// Indices of members with `x(S)` equal to the required value.
    pub fn laminar_tight(&self, x: &[f64], tol: &ToleranceModel) -> Vec<usize> {
        (0..self.sets.len())
            .filter(|&i| {
                let s = &self.sets[i];
                let v: f64 = s.members.iter().map(|&e| x[e]).sum();
                (v - s.value).abs() <= tol.eps_tight * (1.0 + s.value.abs())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Matroid {
        Matroid::graphic(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn tol() -> ToleranceModel {
        ToleranceModel::default()
    }

    /// Exhaustive `max_S x(S) - r(S)` using only the rank oracle.
    fn brute_excess(m: &Matroid, x: &[f64]) -> (u32, f64) {
        let n = m.ground_size();
        let mut best = (0u32, 0.0);
        for mask in 0..(1u32 << n) {
            let s = from_mask(mask);
            let e = s.iter().map(|&i| x[i]).sum::<f64>() - m.rank(&s) as f64;
            if e > best.1 + 1e-12 {
                best = (mask, e);
            }
        }
        best
    }

    #[test]
    fn rank_examples() {
        assert_eq!(Matroid::uniform(4, 2).rank(&[0, 1, 2]), 2);
        let p = Matroid::partition(3, vec![vec![0, 1], vec![2]], vec![1, 1]).unwrap();
        assert_eq!(p.rank(&[0, 1]), 1);
        assert_eq!(triangle().rank(&[0, 1, 2]), 2);
        assert_eq!(triangle().full_rank(), 2);
    }

    #[test]
    fn separation_examples() {
        let t = triangle();
        assert_eq!(t.separate(&[0.5, 0.5, 0.5], &tol()).unwrap(), Separation::Inside);
        match t.separate(&[0.8, 0.8, 0.8], &tol()).unwrap() {
            Separation::Violated { set, excess } => {
                assert_eq!(set, vec![0, 1, 2]);
                assert!((excess - 0.4).abs() < 1e-12);
            }
            other => panic!("expected violation, got {other:?}"),
        }
        assert_eq!(brute_excess(&t, &[0.8, 0.8, 0.8]).0, 0b111);
        for m in [t, Matroid::uniform(3, 1), Matroid::partition(3, vec![vec![0, 2], vec![1]], vec![1, 0]).unwrap()] {
            assert_eq!(m.separate(&[0.0; 3], &tol()).unwrap(), Separation::Inside);
        }
        assert!(matches!(
            triangle().separate(&[-0.1, 0.0, 0.0], &tol()),
            Err(MatroidError::NegativeCoordinate { index: 0, .. })
        ));
    }

    #[test]
    fn tight_chain_examples() {
        let x = [2.0 / 3.0; 3];
        let c = triangle().tight_chain(&x, &tol()).unwrap();
        assert_eq!(c.sets, vec![vec![0, 1, 2]]);
        assert_eq!(c.ranks, vec![2]);

        let c = Matroid::uniform(3, 3).tight_chain(&[0.5; 3], &tol()).unwrap();
        assert!(c.is_empty());

        let p = Matroid::partition(4, vec![vec![0, 1], vec![2, 3]], vec![1, 1]).unwrap();
        let c = p.tight_chain(&[0.5; 4], &tol()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.sets[1], vec![0, 1, 2, 3]);
        assert!(c.sets[0] == vec![0, 1] || c.sets[0] == vec![2, 3]);

        assert!(matches!(
            triangle().tight_chain(&[0.9, 0.9, 0.9], &tol()),
            Err(MatroidError::OutsidePolytope { .. })
        ));
    }

    #[test]
    fn contraction_examples() {
        let u = Matroid::uniform(4, 2).contract(&[0]).unwrap();
        assert_eq!(u.original, vec![1, 2, 3]);
        assert_eq!(u.matroid.full_rank(), 1);

        let same = triangle().contract(&[]).unwrap();
        assert_eq!(same.matroid.full_rank(), 2);
        assert_eq!(same.original, vec![0, 1, 2]);

        let p = Matroid::partition(3, vec![vec![0, 1], vec![2]], vec![1, 1]).unwrap();
        let c = p.contract(&[0]).unwrap();
        // remaining {1, 2}: element 1 (old) is a loop, element 2 (old) free
        assert!(!c.matroid.is_independent(&[0]));
        assert!(c.matroid.is_independent(&[1]));
        assert_eq!(c.matroid.full_rank(), 1);

        assert!(matches!(p.contract(&[0, 1]), Err(MatroidError::Dependent(_))));

        let g = triangle().contract(&[0]).unwrap();
        // edges 1-2 and 0-2 become parallel
        assert_eq!(g.matroid.full_rank(), 1);
        assert!(!g.matroid.is_independent(&[0, 1]));
    }

    #[test]
    fn decomposition_examples() {
        let d = triangle().base_decompose(&[2.0 / 3.0; 3], &tol()).unwrap();
        assert_eq!(d.len(), 3);
        for (b, w) in &d {
            assert_eq!(b.len(), 2);
            assert!((w - 1.0 / 3.0).abs() < 1e-9);
        }
        let d = triangle().base_decompose(&[1.0, 0.0, 1.0], &tol()).unwrap();
        assert_eq!(d, vec![(vec![0, 2], 1.0)]);
        let d = Matroid::uniform(2, 1).base_decompose(&[0.25, 0.75], &tol()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].0, vec![1]);
        assert!((d[0].1 - 0.75).abs() < 1e-12);
        assert_eq!(d[1].0, vec![0]);
        assert!((d[1].1 - 0.25).abs() < 1e-12);
        assert!(triangle().base_decompose(&[0.5; 3], &tol()).is_err());
    }

    #[test]
    fn max_step_hits_rank_face() {
        let t = triangle();
        let x = [0.6; 3];
        let d = [1.0, 1.0, 1.0];
        let (mu, hit) = t.max_step(&x, &d, 1.0, &tol()).unwrap();
        assert!((mu - 0.2 / 3.0).abs() < 1e-12);
        assert_eq!(hit.unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn explicit_matroid_validation() {
        assert!(Matroid::explicit(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).is_ok());
        // {0,1} and {2,3} only: exchange fails
        assert!(matches!(
            Matroid::explicit(4, vec![vec![0, 1], vec![2, 3]]),
            Err(MatroidError::NotAMatroid(_))
        ));
        let e = Matroid::explicit(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert_eq!(e.rank(&[0, 1, 2]), 2);
        let (set, ex) = e.max_violation(&[0.8, 0.8, 0.8]).unwrap();
        assert_eq!(set, vec![0, 1, 2]);
        assert!((ex - 0.4).abs() < 1e-12);
    }

    #[test]
    fn partition_validation() {
        assert!(matches!(
            Matroid::partition(3, vec![vec![0, 1], vec![1, 2]], vec![1, 1]),
            Err(MatroidError::OverlappingParts(1))
        ));
        assert!(matches!(
            Matroid::partition(3, vec![vec![0, 1]], vec![1]),
            Err(MatroidError::UncoveredElement(2))
        ));
    }

    #[test]
    fn laminar_examples() {
        let f = LaminarFamily::new(2, LaminarSense::AtMost, vec![LaminarSet { members: vec![0, 1], value: 1.0 }]).unwrap();
        assert_eq!(f.laminar_tight(&[0.5, 0.5], &tol()), vec![0]);
        assert!(f.laminar_tight(&[0.3, 0.5], &tol()).is_empty());
        let g = LaminarFamily::new(
            4,
            LaminarSense::AtMost,
            vec![
                LaminarSet { members: vec![0, 1], value: 1.0 },
                LaminarSet { members: vec![0, 1, 2, 3], value: 2.0 },
            ],
        )
        .unwrap();
        assert_eq!(g.laminar_tight(&[0.5; 4], &tol()), vec![0, 1]);
        assert!(LaminarFamily::new(
            3,
            LaminarSense::AtLeast,
            vec![LaminarSet { members: vec![0, 1], value: 1.0 }, LaminarSet { members: vec![1, 2], value: 1.0 }],
        )
        .is_err());
    }
}
