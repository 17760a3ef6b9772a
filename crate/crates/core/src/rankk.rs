//! Marked-alphabet `(C,F)` systems of rank at most `k`.
//!
//! Points of the alphabet carry a tower mark: `F_n` is a finite subset of
//! `G x {1..k}` and `C_n` a finite set of edges `(source, offset, target)`.
//! The partial product `(f, i) * (i, g, j) = (f + g, j)` composes a position
//! in tower `i` with a placement of tower `i` inside tower `j`.  Stored
//! prefixes are subject to
//!
//! * (I)   `F_0 = {(0, i) : i}` and every source has at least two out-edges,
//! * (II)  `F_n * C_{n+1} ⊆ F_{n+1}`,
//! * (III) the placements `F_n * c`, `c ∈ C_{n+1}`, are pairwise disjoint,
//! * (V)   `(0, i) ∈ F_n` and `(i, 0, i) ∈ C_n` for every mark `i`.
//!
//! An invariant measure is a sequence of positive vectors `λ_n` (the mass of
//! one level of each tower) with `λ_n = r_{n+1} λ_{n+1}`, where
//! `r_n[i][j] = #C_n^{i,j}` is the incidence matrix.  The solver propagates
//! the full cone of solutions backward from the horizon and reports
//! certified rational bounds; unique ergodicity is certified exactly when
//! the cone collapses within tolerance.

use crate::certified::{CertifiedValue, Rat};
use crate::group::{GroupElement, GroupError, GroupSet};
use crate::rankone::MeasureCert;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RankKError {
    #[error("level {0} out of range (horizon {1})")]
    LevelOutOfRange(usize, usize),
    #[error("mark {0} out of range (rank {1})")]
    MarkOutOfRange(usize, usize),
    #[error("cylinder support is not contained in F_{0}")]
    SupportNotInTower(usize),
    #[error("stage {stage}: incidence column {column} is zero")]
    StructurallyDegenerate { stage: usize, column: usize },
    #[error("towers are not intervals at 0: {0}")]
    NonIntervalTowers(String),
    #[error("cut points must start at 0 and strictly increase within the horizon")]
    BadCuts,
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A point `(g, i)` of `G x {1..k}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MarkedElement {
    pub g: GroupElement,
    pub mark: usize,
}

impl MarkedElement {
    pub fn new(g: GroupElement, mark: usize) -> Self {
        assert!(mark >= 1);
        MarkedElement { g, mark }
    }
}

impl fmt::Debug for MarkedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.g, self.mark)
    }
}

/// An edge `(source, offset, target)` of `{1..k} x G x {1..k}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub source: usize,
    pub offset: GroupElement,
    pub target: usize,
}

impl Edge {
    pub fn new(source: usize, offset: GroupElement, target: usize) -> Self {
        assert!(source >= 1 && target >= 1);
        Edge {
            source,
            offset,
            target,
        }
    }

    /// Edge composition `(i, c, j) * (j, c', l) = (i, c + c', l)`,
    /// defined when the inner marks agree.
    pub fn compose(&self, other: &Edge) -> Option<Edge> {
        if self.target != other.source {
            return None;
        }
        Some(Edge {
            source: self.source,
            offset: self.offset.add(&other.offset),
            target: other.target,
        })
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.source, self.offset, self.target)
    }
}

/// The partial product `(f, i) * (i, g, j) = (f + g, j)`;
/// undefined when the marks mismatch.
pub fn star_product(a: &MarkedElement, c: &Edge) -> Option<MarkedElement> {
    if a.mark != c.source {
        return None;
    }
    Some(MarkedElement {
        g: a.g.add(&c.offset),
        mark: c.target,
    })
}

/// A finite subset of `G x {1..k}`, stored per mark.
#[derive(Clone, PartialEq, Eq)]
pub struct MarkedSet {
    dim: usize,
    per_mark: Vec<GroupSet>,
}

impl MarkedSet {
    pub fn empty(dim: usize, k: usize) -> Self {
        MarkedSet {
            dim,
            per_mark: vec![GroupSet::empty(dim); k],
        }
    }

    /// `{(0, i) : 1 <= i <= k}`.
    pub fn zero_base(dim: usize, k: usize) -> Self {
        MarkedSet {
            dim,
            per_mark: vec![GroupSet::singleton(GroupElement::zero(dim)); k],
        }
    }

    /// Interval towers `F^i = [0, heights[i-1]) x {i}` over `Z`.
    pub fn intervals(k: usize, heights: &[BigInt]) -> Self {
        assert_eq!(heights.len(), k);
        MarkedSet {
            dim: 1,
            per_mark: heights
                .iter()
                .map(|h| GroupSet::interval(0, h.clone()))
                .collect(),
        }
    }

    pub fn from_elems<I: IntoIterator<Item = MarkedElement>>(dim: usize, k: usize, it: I) -> Self {
        let mut s = Self::empty(dim, k);
        for m in it {
            assert!(m.mark >= 1 && m.mark <= k, "mark out of range");
            s.per_mark[m.mark - 1].insert(m.g);
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.per_mark.len()
    }

    /// The slice of the set in tower `i` (1-based).
    pub fn tower(&self, i: usize) -> &GroupSet {
        &self.per_mark[i - 1]
    }

    pub fn card(&self) -> BigInt {
        self.per_mark.iter().map(|s| s.card()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.per_mark.iter().all(|s| s.is_empty())
    }

    pub fn contains(&self, m: &MarkedElement) -> bool {
        m.mark >= 1 && m.mark <= self.rank() && self.per_mark[m.mark - 1].contains(&m.g)
    }

    pub fn iter(&self) -> impl Iterator<Item = MarkedElement> + '_ {
        self.per_mark.iter().enumerate().flat_map(|(i, s)| {
            s.iter()
                .map(move |g| MarkedElement::new(g, i + 1))
        })
    }

    pub fn is_subset(&self, other: &MarkedSet) -> bool {
        self.per_mark
            .iter()
            .zip(&other.per_mark)
            .all(|(a, b)| a.is_subset(b))
    }

    pub fn intersection(&self, other: &MarkedSet) -> Result<MarkedSet, GroupError> {
        let mut per_mark = Vec::new();
        for (a, b) in self.per_mark.iter().zip(&other.per_mark) {
            per_mark.push(a.intersection(b)?);
        }
        Ok(MarkedSet {
            dim: self.dim,
            per_mark,
        })
    }

    /// Translation by the `G`-action `g . (f, i) = (g + f, i)`.
    pub fn translate(&self, g: &GroupElement) -> MarkedSet {
        MarkedSet {
            dim: self.dim,
            per_mark: self.per_mark.iter().map(|s| s.translate(g)).collect(),
        }
    }

    /// `A * C`: all defined products.
    pub fn star_edges(&self, edges: &EdgeSet) -> Result<MarkedSet, GroupError> {
        let mut per_mark = vec![BTreeSet::new(); self.rank()];
        for e in edges.iter() {
            let src = &self.per_mark[e.source - 1];
            for g in src.iter() {
                per_mark[e.target - 1].insert(g.add(&e.offset));
            }
        }
        Ok(MarkedSet {
            dim: self.dim,
            per_mark: per_mark
                .into_iter()
                .map(|s| GroupSet::from_elems(self.dim, s))
                .collect(),
        })
    }
}

impl fmt::Debug for MarkedSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MarkedSet[")?;
        for (i, s) in self.per_mark.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{}: {:?}", i + 1, s)?;
        }
        write!(f, "]")
    }
}

/// A finite set of edges.
#[derive(Clone, PartialEq, Eq)]
pub struct EdgeSet {
    dim: usize,
    k: usize,
    edges: BTreeSet<Edge>,
}

impl EdgeSet {
    pub fn new(dim: usize, k: usize) -> Self {
        EdgeSet {
            dim,
            k,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges<I: IntoIterator<Item = Edge>>(dim: usize, k: usize, it: I) -> Self {
        let mut s = Self::new(dim, k);
        for e in it {
            s.insert(e);
        }
        s
    }

    pub fn insert(&mut self, e: Edge) {
        assert!(e.source <= self.k && e.target <= self.k, "mark out of range");
        assert_eq!(e.offset.dim(), self.dim);
        self.edges.insert(e);
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: &Edge) -> bool {
        self.edges.contains(e)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    /// Edges from source `i` to target `j` (1-based), sorted.
    pub fn block(&self, i: usize, j: usize) -> Vec<&Edge> {
        self.edges
            .iter()
            .filter(|e| e.source == i && e.target == j)
            .collect()
    }

    /// Edges into target `j`, sorted by offset.
    pub fn into_target(&self, j: usize) -> Vec<&Edge> {
        let mut v: Vec<&Edge> = self.edges.iter().filter(|e| e.target == j).collect();
        v.sort_by(|a, b| a.offset.cmp(&b.offset));
        v
    }

    /// Composition `C * C'` of edge sets.
    pub fn compose(&self, other: &EdgeSet) -> EdgeSet {
        let mut out = EdgeSet::new(self.dim, self.k);
        for a in self.iter() {
            for b in other.iter() {
                if let Some(e) = a.compose(b) {
                    out.edges.insert(e);
                }
            }
        }
        out
    }
}

impl fmt::Debug for EdgeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.edges.iter()).finish()
    }
}

/// Incidence matrix `r[i][j] = #C^{i,j}` of a stage (0-based storage,
/// `entry(i, j)` takes 1-based marks).
#[derive(Clone, PartialEq, Eq)]
pub struct RMatrix {
    k: usize,
    entries: Vec<Vec<BigInt>>,
}

impl RMatrix {
    pub fn identity(k: usize) -> Self {
        let mut entries = vec![vec![BigInt::zero(); k]; k];
        for (i, row) in entries.iter_mut().enumerate() {
            row[i] = BigInt::one();
        }
        RMatrix { k, entries }
    }

    pub fn from_edge_set(edges: &EdgeSet) -> Self {
        let k = edges.k;
        let mut entries = vec![vec![BigInt::zero(); k]; k];
        for e in edges.iter() {
            entries[e.source - 1][e.target - 1] += 1;
        }
        RMatrix { k, entries }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entry(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i - 1][j - 1]
    }

    pub fn rows(&self) -> &Vec<Vec<BigInt>> {
        &self.entries
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &RMatrix) -> RMatrix {
        let k = self.k;
        let mut entries = vec![vec![BigInt::zero(); k]; k];
        for i in 0..k {
            for j in 0..k {
                let mut v = BigInt::zero();
                for l in 0..k {
                    v += &self.entries[i][l] * &other.entries[l][j];
                }
                entries[i][j] = v;
            }
        }
        RMatrix { k, entries }
    }

    pub fn column_sum(&self, j: usize) -> BigInt {
        (0..self.k).map(|i| self.entries[i][j - 1].clone()).sum()
    }

    pub fn is_positive(&self) -> bool {
        self.entries
            .iter()
            .all(|row| row.iter().all(|v| v.is_positive()))
    }

    pub fn zero_column(&self) -> Option<usize> {
        (1..=self.k).find(|&j| self.column_sum(j).is_zero())
    }
}

impl fmt::Debug for RMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, row) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:?}", row)?;
        }
        write!(f, "]")
    }
}

/// A level-`n` cylinder of a rank-`k` system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedCylinder {
    pub level: usize,
    pub support: MarkedSet,
}

impl MarkedCylinder {
    pub fn new(level: usize, support: MarkedSet) -> Self {
        MarkedCylinder { level, support }
    }

    pub fn cell(level: usize, m: MarkedElement, dim: usize, k: usize) -> Self {
        MarkedCylinder {
            level,
            support: MarkedSet::from_elems(dim, k, [m]),
        }
    }
}

/// Per-level mass vector: `entries[i-1]` is the certified mass `λ_n^i` of a
/// single level of tower `i` at the vector's stage.
#[derive(Clone, Debug)]
pub struct MeasureVector {
    pub entries: Vec<CertifiedValue>,
}

impl MeasureVector {
    pub fn entry(&self, i: usize) -> &CertifiedValue {
        &self.entries[i - 1]
    }
}

/// Outcome of the invariant-measure solver.
#[derive(Clone, Debug)]
pub enum SolveCertificate {
    /// The solution cone collapsed: relative width of every `λ_0` entry is
    /// at most the tolerance.
    Certified { max_rel_width: Rat },
    /// The prefix does not pin the measure down (several invariant measures
    /// may exist, or the horizon is too short).
    Undecided { max_rel_width: Option<Rat> },
}

impl SolveCertificate {
    pub fn is_certified(&self) -> bool {
        matches!(self, SolveCertificate::Certified { .. })
    }
}

/// Certified invariant-measure data for a stored prefix.
pub struct MeasureSolve {
    /// `lambdas[n]` bounds `λ_n`, `n = 0..=N`.
    pub lambdas: Vec<MeasureVector>,
    pub certificate: SolveCertificate,
    /// Backward products `P_n = r_{n+1} ... r_N` (with `P_N = I`), kept for
    /// scale-free ratio bounds.
    pub products: Vec<RMatrix>,
    /// Contraction coefficients (Birkhoff projective metric) of the
    /// positive blocks the horizon was split into, coarsest first.
    /// Informational: the certificate itself rests on the rational hulls.
    pub contraction_coeffs: Vec<f64>,
}

/// Finite-horizon rank-`k` `(C,F)` data.
#[derive(Clone)]
pub struct RankKSystem {
    name: String,
    dim: usize,
    k: usize,
    f: Vec<MarkedSet>,
    c: Vec<EdgeSet>,
    measure_cert: MeasureCert,
}

impl RankKSystem {
    pub fn new(name: &str, dim: usize, k: usize, f: Vec<MarkedSet>, c: Vec<EdgeSet>) -> Self {
        assert_eq!(f.len(), c.len() + 1, "need F_0..F_N and C_1..C_N");
        assert!(f.iter().all(|s| s.dim() == dim && s.rank() == k));
        RankKSystem {
            name: name.to_string(),
            dim,
            k,
            f,
            c,
            measure_cert: MeasureCert::Unknown,
        }
    }

    pub fn with_finite_measure(mut self, total: Rat) -> Self {
        self.measure_cert = MeasureCert::Finite(total);
        self
    }

    pub fn with_measure_cert(mut self, cert: MeasureCert) -> Self {
        self.measure_cert = cert;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> usize {
        self.c.len()
    }

    pub fn f_set(&self, n: usize) -> &MarkedSet {
        &self.f[n]
    }

    /// `C_n` for `1 <= n <= N`.
    pub fn c_set(&self, n: usize) -> &EdgeSet {
        &self.c[n - 1]
    }

    pub fn measure_cert(&self) -> &MeasureCert {
        &self.measure_cert
    }

    /// Incidence matrix `r_n[i][j] = #C_n^{i,j}`.
    pub fn r_matrix(&self, n: usize) -> Result<RMatrix, RankKError> {
        if n < 1 || n > self.horizon() {
            return Err(RankKError::LevelOutOfRange(n, self.horizon()));
        }
        Ok(RMatrix::from_edge_set(self.c_set(n)))
    }

    /// Interval heights `h_n^j` when every tower is `[0, h) x {j}`.
    pub fn heights(&self, n: usize) -> Result<Vec<BigInt>, RankKError> {
        let mut out = Vec::new();
        for j in 1..=self.k {
            match self.f[n].tower(j).interval_height() {
                Some(h) => out.push(h),
                None => {
                    return Err(RankKError::NonIntervalTowers(format!(
                        "F_{}^{} is not an interval at 0",
                        n, j
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Per-stage checks of conditions (I), (II), (III), (V); condition
    /// (IV) (`#C_n^{i,j} > 1` for all pairs, which forces a complete
    /// incidence graph) is reported as a note, not a failure.
    pub fn validate(&self) -> crate::rankone::ValidationReport {
        use crate::rankone::{Condition, ConditionFailure, ValidationReport};
        let mut report = ValidationReport::default();
        let zero = GroupElement::zero(self.dim);
        // (I): F_0 is the zero base
        for i in 1..=self.k {
            let t = self.f[0].tower(i);
            if t.card() != BigInt::one() || !t.contains(&zero) {
                report.failures.push(ConditionFailure {
                    condition: Condition::I,
                    level: 0,
                    witness: format!("F_0^{} = {:?}, expected {{0}}", i, t),
                });
            }
        }
        let mut complete = true;
        for n in 1..=self.horizon() {
            let c = self.c_set(n);
            let f_prev = &self.f[n - 1];
            let f_cur = &self.f[n];
            let r = RMatrix::from_edge_set(c);
            // (I): every source has at least two out-edges
            for i in 1..=self.k {
                let row_sum: BigInt = (1..=self.k).map(|j| r.entry(i, j).clone()).sum();
                if row_sum < BigInt::from(2) {
                    report.failures.push(ConditionFailure {
                        condition: Condition::I,
                        level: n,
                        witness: format!("source {} has {} out-edges in C_{}", i, row_sum, n),
                    });
                }
                for j in 1..=self.k {
                    if r.entry(i, j) <= &BigInt::one() {
                        complete = false;
                    }
                }
            }
            // (II): each placement lands inside the next tower
            for e in c.iter() {
                let placed = f_prev.tower(e.source).translate(&e.offset);
                if !placed.is_subset(f_cur.tower(e.target)) {
                    report.failures.push(ConditionFailure {
                        condition: Condition::II,
                        level: n,
                        witness: format!("placement {:?} leaves F_{}^{}", e, n, e.target),
                    });
                }
            }
            // (III): placements into a common target are pairwise disjoint;
            // (F^i + g) meets (F^i' + g') iff g - g' lies in F^i' - F^i
            let edges: Vec<&Edge> = c.iter().collect();
            'outer: for x in 0..edges.len() {
                for y in (x + 1)..edges.len() {
                    let (a, b) = (edges[x], edges[y]);
                    if a.target != b.target {
                        continue;
                    }
                    let window = match f_prev.tower(b.source).diffset(f_prev.tower(a.source)) {
                        Ok(w) => w,
                        Err(e) => {
                            report.notes.push(format!("stage {}: {}", n, e));
                            continue;
                        }
                    };
                    if window.contains(&a.offset.sub(&b.offset)) {
                        report.failures.push(ConditionFailure {
                            condition: Condition::III,
                            level: n,
                            witness: format!("placements {:?} and {:?} overlap", a, b),
                        });
                        break 'outer;
                    }
                }
            }
            // (V): identity elements present
            for i in 1..=self.k {
                if !f_cur.contains(&MarkedElement::new(zero.clone(), i)) {
                    report.failures.push(ConditionFailure {
                        condition: Condition::IV,
                        level: n,
                        witness: format!("(0,{}) ∉ F_{}", i, n),
                    });
                }
                if !c.contains(&Edge::new(i, zero.clone(), i)) {
                    report.failures.push(ConditionFailure {
                        condition: Condition::IV,
                        level: n,
                        witness: format!("({0},0,{0}) ∉ C_{1}", i, n),
                    });
                }
            }
        }
        if !complete {
            report.notes.push(
                "incidence graph is not complete (some #C^{i,j} <= 1); minimality unasserted"
                    .to_string(),
            );
        }
        report
    }

    fn check_cylinder(&self, cyl: &MarkedCylinder) -> Result<(), RankKError> {
        if cyl.level > self.horizon() {
            return Err(RankKError::LevelOutOfRange(cyl.level, self.horizon()));
        }
        if !cyl.support.is_subset(&self.f[cyl.level]) {
            return Err(RankKError::SupportNotInTower(cyl.level));
        }
        Ok(())
    }

    /// Solves `λ_n = r_{n+1} λ_{n+1}` backward from the horizon, with the
    /// normalization `μ(X_0) = Σ_i λ_0^i #F_0^i = normalization`.
    ///
    /// For each `n` the feasible set of `λ_n` is the image of the unknown
    /// horizon vector under `P_n = r_{n+1} ... r_N`; its exact componentwise
    /// hull over the normalized cone is attained on the columns, giving
    /// rational bounds with no rounding.
    pub fn solve_invariant_measure(
        &self,
        normalization: &Rat,
    ) -> Result<MeasureSolve, RankKError> {
        let horizon = self.horizon();
        for n in 1..=horizon {
            let r = self.r_matrix(n)?;
            if let Some(j) = r.zero_column() {
                return Err(RankKError::StructurallyDegenerate { stage: n, column: j });
            }
        }
        // products[n] = r_{n+1} ... r_N
        let mut products = vec![RMatrix::identity(self.k); horizon + 1];
        for n in (0..horizon).rev() {
            products[n] = self.r_matrix(n + 1)?.mul(&products[n + 1]);
        }
        // weight_i = #F_0^i (1 under condition (I), kept general)
        let weights: Vec<BigInt> = (1..=self.k).map(|i| self.f[0].tower(i).card()).collect();
        // cs_j = Σ_i weight_i P_0[i][j]; the feasible horizon vectors x >= 0
        // satisfy Σ_j cs_j x_j = normalization
        let cs: Vec<BigInt> = (0..self.k)
            .map(|j| {
                (0..self.k)
                    .map(|i| &weights[i] * &products[0].entries[i][j])
                    .sum()
            })
            .collect();
        if cs.iter().any(|v| v.is_zero()) {
            return Err(RankKError::StructurallyDegenerate {
                stage: 0,
                column: cs.iter().position(|v| v.is_zero()).unwrap() + 1,
            });
        }
        let mut lambdas = Vec::new();
        for p in &products {
            let mut entries = Vec::new();
            for i in 0..self.k {
                let ratios: Vec<Rat> = (0..self.k)
                    .map(|j| {
                        BigRational::new(p.entries[i][j].clone(), cs[j].clone()) * normalization
                    })
                    .collect();
                let lo = ratios.iter().min().unwrap().clone();
                let hi = ratios.iter().max().unwrap().clone();
                entries.push(CertifiedValue::new(lo, hi));
            }
            lambdas.push(MeasureVector { entries });
        }
        // certificate from the relative widths of λ_0
        let mut max_rel: Option<Rat> = Some(Rat::zero());
        for e in &lambdas[0].entries {
            if e.lo().is_zero() {
                max_rel = None;
                break;
            }
            let rel = e.width() / e.lo();
            max_rel = max_rel.map(|m| m.max(rel));
        }
        let tolerance = BigRational::new(BigInt::one(), BigInt::from(10u64).pow(9));
        let certificate = match &max_rel {
            Some(w) if w <= &tolerance => SolveCertificate::Certified {
                max_rel_width: w.clone(),
            },
            w => SolveCertificate::Undecided {
                max_rel_width: w.clone(),
            },
        };
        // contraction coefficients of positive blocks, for reporting
        let mut contraction_coeffs = Vec::new();
        let mut block = RMatrix::identity(self.k);
        for n in 1..=horizon {
            block = self.r_matrix(n)?.mul(&block);
            if block.is_positive() {
                let mut delta: f64 = 1.0;
                for i in 0..self.k {
                    for j in 0..self.k {
                        for a in 0..self.k {
                            for b in 0..self.k {
                                let num = to_f64(&block.entries[i][a]) * to_f64(&block.entries[j][b]);
                                let den = to_f64(&block.entries[j][a]) * to_f64(&block.entries[i][b]);
                                if den > 0.0 {
                                    delta = delta.max(num / den);
                                }
                            }
                        }
                    }
                }
                let s = delta.sqrt();
                contraction_coeffs.push((s - 1.0) / (s + 1.0));
                block = RMatrix::identity(self.k);
            }
        }
        Ok(MeasureSolve {
            lambdas,
            certificate,
            products,
            contraction_coeffs,
        })
    }

    /// `μ([A]_n) = Σ_i #(A^i) λ_n^i` as a certified interval.
    pub fn cylinder_measure(
        &self,
        solve: &MeasureSolve,
        cyl: &MarkedCylinder,
    ) -> Result<CertifiedValue, RankKError> {
        self.check_cylinder(cyl)?;
        let lambda = &solve.lambdas[cyl.level];
        let mut acc = CertifiedValue::zero();
        for i in 1..=self.k {
            let count = BigRational::from_integer(cyl.support.tower(i).card());
            acc = acc.add(&lambda.entry(i).scale(&count));
        }
        Ok(acc)
    }

    /// The sequence `Σ_i λ_n^i #F_n^i` (total measure seen by stage `n`)
    /// plus the certificate-based verdict.
    pub fn check_finiteness(
        &self,
        solve: &MeasureSolve,
    ) -> (Vec<CertifiedValue>, crate::rankone::TrendVerdict) {
        use crate::rankone::TrendVerdict;
        let seq: Vec<CertifiedValue> = (0..=self.horizon())
            .map(|n| {
                let mut acc = CertifiedValue::zero();
                for i in 1..=self.k {
                    let count = BigRational::from_integer(self.f[n].tower(i).card());
                    acc = acc.add(&solve.lambdas[n].entry(i).scale(&count));
                }
                acc
            })
            .collect();
        let verdict = match &self.measure_cert {
            MeasureCert::Finite(v) => TrendVerdict::Finite(v.clone()),
            MeasureCert::Infinite => TrendVerdict::Infinite,
            MeasureCert::Unknown => TrendVerdict::Undecided(seq.last().unwrap().mid()),
        };
        (seq, verdict)
    }

    /// For fixed `n` and each `m <= N`: the certified mass of
    /// `A_{m,n} = (g . F_n * C_{n+1} * ... * C_m) ∩ F_m` against the mass of
    /// `F_n`; the ratios approach 1 exactly when the action is defined
    /// almost everywhere.
    pub fn check_ae_action(
        &self,
        solve: &MeasureSolve,
        g: &GroupElement,
        n: usize,
    ) -> Result<Vec<(usize, CertifiedValue)>, RankKError> {
        if n >= self.horizon() {
            return Err(RankKError::LevelOutOfRange(n, self.horizon()));
        }
        let mut denom = CertifiedValue::zero();
        for i in 1..=self.k {
            let count = BigRational::from_integer(self.f[n].tower(i).card());
            denom = denom.add(&solve.lambdas[n].entry(i).scale(&count));
        }
        let mut out = Vec::new();
        let mut set = self.f[n].translate(g);
        for m in (n + 1)..=self.horizon() {
            set = set.star_edges(self.c_set(m))?;
            let clipped = set.intersection(&self.f[m])?;
            let mut num = CertifiedValue::zero();
            for i in 1..=self.k {
                let count = BigRational::from_integer(clipped.tower(i).card());
                num = num.add(&solve.lambdas[m].entry(i).scale(&count));
            }
            let ratio = num.div(&denom).expect("tower mass is positive");
            out.push((m, ratio));
        }
        Ok(out)
    }

    /// Number of copies of the stage-0 base inside each tower of stage `n`:
    /// `copies_n = r_n^T copies_{n-1}` with `copies_0 = (1, ..., 1)`.
    pub fn base_copy_counts(&self, n: usize) -> Result<Vec<BigInt>, RankKError> {
        if n > self.horizon() {
            return Err(RankKError::LevelOutOfRange(n, self.horizon()));
        }
        let mut counts = vec![BigInt::one(); self.k];
        for m in 1..=n {
            let r = self.r_matrix(m)?;
            counts = (0..self.k)
                .map(|j| (0..self.k).map(|i| &r.entries[i][j] * &counts[i]).sum())
                .collect();
        }
        Ok(counts)
    }

    /// Passes to the `(C,F)`-subsequence given by cut points: edge sets are
    /// composed with the partial product; incidence matrices multiply.
    pub fn telescope(&self, cuts: &[usize]) -> Result<RankKSystem, RankKError> {
        if cuts.is_empty() || cuts[0] != 0 {
            return Err(RankKError::BadCuts);
        }
        for w in cuts.windows(2) {
            if w[1] <= w[0] || w[1] > self.horizon() {
                return Err(RankKError::BadCuts);
            }
        }
        let f: Vec<MarkedSet> = cuts.iter().map(|&k| self.f[k].clone()).collect();
        let mut c = Vec::new();
        for w in cuts.windows(2) {
            let mut acc = self.c_set(w[0] + 1).clone();
            for l in (w[0] + 2)..=w[1] {
                acc = acc.compose(self.c_set(l));
            }
            c.push(acc);
        }
        Ok(RankKSystem::new(
            &format!("{}-telescoped", self.name),
            self.dim,
            self.k,
            f,
            c,
        )
        .with_measure_cert(self.measure_cert.clone()))
    }
}

impl fmt::Debug for RankKSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RankKSystem({}, dim {}, rank {}, horizon {})",
            self.name,
            self.dim,
            self.k,
            self.horizon()
        )
    }
}

// ---------------------------------------------------------------------------
// castle view over Z
// ---------------------------------------------------------------------------

/// One placement of a previous-stage tower inside a tower.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placement {
    pub source: usize,
    pub offset: BigInt,
}

/// The stacked layout of one tower: placements sorted by offset, and the
/// spacer gaps around them (`gaps[0]` below the first placement, `gaps[t]`
/// between placements `t-1` and `t`, `gaps[last]` above the top placement).
#[derive(Clone, Debug)]
pub struct TowerLayout {
    pub target: usize,
    pub placements: Vec<Placement>,
    pub gaps: Vec<BigInt>,
}

impl TowerLayout {
    pub fn max_gap(&self) -> BigInt {
        self.gaps.iter().max().cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn spacer_total(&self) -> BigInt {
        self.gaps.iter().sum()
    }

    /// Source marks in stacking order.
    pub fn order(&self) -> Vec<usize> {
        self.placements.iter().map(|p| p.source).collect()
    }
}

/// Per-stage castle layouts of a finite-rank system over `Z` whose towers
/// are intervals at 0.
#[derive(Clone, Debug)]
pub struct CastleView {
    /// `heights[n][j-1] = h_n^j` for `n = 0..=N`.
    pub heights: Vec<Vec<BigInt>>,
    /// `stages[n-1]` describes how stage `n` stacks stage `n-1`,
    /// `n = 1..=N`.
    pub stages: Vec<Vec<TowerLayout>>,
}

impl CastleView {
    pub fn stage(&self, n: usize) -> &Vec<TowerLayout> {
        &self.stages[n - 1]
    }

    /// True when stage `n` has no spacers in any tower.
    pub fn no_spacers_at(&self, n: usize) -> bool {
        self.stage(n).iter().all(|t| t.spacer_total().is_zero())
    }

    pub fn max_gap(&self) -> BigInt {
        self.stages
            .iter()
            .flat_map(|s| s.iter().map(|t| t.max_gap()))
            .max()
            .unwrap_or_else(BigInt::zero)
    }
}

impl RankKSystem {
    /// Castle layout per stage; requires `Z` towers `F_n^j = [0, h_n^j)`.
    pub fn castle_view(&self) -> Result<CastleView, RankKError> {
        if self.dim != 1 {
            return Err(RankKError::NonIntervalTowers(
                "castle view requires one-dimensional towers".into(),
            ));
        }
        let heights: Vec<Vec<BigInt>> = (0..=self.horizon())
            .map(|n| self.heights(n))
            .collect::<Result<_, _>>()?;
        let mut stages = Vec::new();
        for n in 1..=self.horizon() {
            let mut towers = Vec::new();
            for j in 1..=self.k {
                let mut placements: Vec<Placement> = self
                    .c_set(n)
                    .into_target(j)
                    .into_iter()
                    .map(|e| Placement {
                        source: e.source,
                        offset: e.offset.as_scalar().clone(),
                    })
                    .collect();
                placements.sort_by(|a, b| a.offset.cmp(&b.offset));
                let mut gaps = Vec::with_capacity(placements.len() + 1);
                let mut cursor = BigInt::zero();
                for p in &placements {
                    let gap = &p.offset - &cursor;
                    if gap.is_negative() {
                        return Err(RankKError::NonIntervalTowers(format!(
                            "stage {n} tower {j}: placements overlap"
                        )));
                    }
                    gaps.push(gap);
                    cursor = &p.offset + &heights[n - 1][p.source - 1];
                }
                gaps.push(&heights[n][j - 1] - &cursor);
                towers.push(TowerLayout {
                    target: j,
                    placements,
                    gaps,
                });
            }
            stages.push(towers);
        }
        Ok(CastleView { heights, stages })
    }
}

// ---------------------------------------------------------------------------
// spacer map data
// ---------------------------------------------------------------------------

/// Distance from a base-copy position to the next base copy above it in the
/// same tower, resolved at the first stage that sees the next copy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Roof {
    Resolved { gap: BigInt, at_stage: usize },
    /// The position is the top base copy of its tower at every stage within
    /// the horizon (the maximal-digit tail).
    Unresolved,
}

/// Positions of the stage-0 base inside the stage-`n` towers together with
/// their roof gaps.
#[derive(Clone, Debug)]
pub struct SpacerData {
    pub stage: usize,
    /// `base_positions[j-1]`: sorted positions of base copies in tower `j`.
    pub base_positions: Vec<Vec<BigInt>>,
    /// `roofs[j-1][i]`: roof of `base_positions[j-1][i]`.
    pub roofs: Vec<Vec<Roof>>,
}

impl RankKSystem {
    /// Sorted per-tower positions of `F_0 * C_1 * ... * C_n`.
    pub fn base_positions(&self, n: usize) -> Result<Vec<Vec<BigInt>>, RankKError> {
        if self.dim != 1 {
            return Err(RankKError::NonIntervalTowers(
                "base positions require one-dimensional towers".into(),
            ));
        }
        let mut s = self.f[0].clone();
        for m in 1..=n {
            s = s.star_edges(self.c_set(m))?;
        }
        let mut out = Vec::new();
        for j in 1..=self.k {
            let mut v: Vec<BigInt> = s.tower(j).iter().map(|g| g.as_scalar().clone()).collect();
            v.sort();
            out.push(v);
        }
        Ok(out)
    }

    /// Spacer-map data at stage `n`: base-copy positions and roof gaps.
    ///
    /// Roofs of non-top copies are read off at stage `n` itself; a top copy
    /// keeps its position under the identity placements of condition (V),
    /// so its roof is resolved at the first deeper stage that places another
    /// base copy above it.
    pub fn spacer_data(&self, n: usize) -> Result<SpacerData, RankKError> {
        let base = self.base_positions(n)?;
        // deeper stages resolved lazily, tower by tower
        let mut deeper: Vec<Option<Vec<Vec<BigInt>>>> =
            vec![None; self.horizon().saturating_sub(n) + 1];
        deeper[0] = Some(base.clone());
        let mut roofs = Vec::new();
        for j in 1..=self.k {
            let mut tower_roofs = Vec::new();
            for (idx, p) in base[j - 1].iter().enumerate() {
                if idx + 1 < base[j - 1].len() {
                    tower_roofs.push(Roof::Resolved {
                        gap: &base[j - 1][idx + 1] - p,
                        at_stage: n,
                    });
                    continue;
                }
                // top copy: look deeper along the identity placements
                let mut found = Roof::Unresolved;
                for m in (n + 1)..=self.horizon() {
                    let slot = m - n;
                    if deeper[slot].is_none() {
                        deeper[slot] = Some(self.base_positions(m)?);
                    }
                    let positions = &deeper[slot].as_ref().unwrap()[j - 1];
                    let next = positions.partition_point(|v| v <= p);
                    if next < positions.len() {
                        found = Roof::Resolved {
                            gap: &positions[next] - p,
                            at_stage: m,
                        };
                        break;
                    }
                }
                tower_roofs.push(found);
            }
            roofs.push(tower_roofs);
        }
        Ok(SpacerData {
            stage: n,
            base_positions: base,
            roofs,
        })
    }
}

// ---------------------------------------------------------------------------
// balanced-rank diagnostics
// ---------------------------------------------------------------------------

/// Finite-horizon balancedness diagnostics.
#[derive(Clone, Debug)]
pub struct BalancedReport {
    /// `delta[n][j-1]` bounds `δ_j^{(n)} = μ(X_0 ∩ [F_n^j]_n)`.
    pub delta: Vec<Vec<CertifiedValue>>,
    /// `lambda_ratio[n][i-1]` bounds `Λ_i^{(n)} = λ_n^i / Σ_j λ_n^j`.
    pub lambda_ratio: Vec<Vec<CertifiedValue>>,
    /// `r_column_ratios[n-1][i-1][j-1] = r_n^{i,j} / Σ_l r_n^{l,j}`.
    pub r_column_ratios: Vec<Vec<Vec<Rat>>>,
    /// Stages whose `Λ` hulls are tight enough to be meaningful.
    pub evaluated_stages: Vec<usize>,
    /// `min_n min_i Λ_i^{(n)}` over the evaluated stages (lower bounds).
    pub min_lambda_ratio: Option<Rat>,
    pub balanced: bool,
    pub threshold: Rat,
}

impl RankKSystem {
    /// Balancedness diagnostics: per-stage base-window masses `δ_j`,
    /// normalized level masses `Λ_i` (scale-free column hulls of the
    /// backward products), and column-normalized incidence ratios.  The
    /// verdict holds iff `Λ` stays above the threshold on every stage whose
    /// hull has collapsed below width 1/4.
    pub fn balanced_diagnostics(
        &self,
        solve: &MeasureSolve,
        threshold: &Rat,
    ) -> Result<BalancedReport, RankKError> {
        let horizon = self.horizon();
        let mut delta = Vec::new();
        for n in 0..=horizon {
            let copies = self.base_copy_counts(n)?;
            let mut row = Vec::new();
            for j in 1..=self.k {
                let count = BigRational::from_integer(copies[j - 1].clone());
                row.push(solve.lambdas[n].entry(j).scale(&count));
            }
            delta.push(row);
        }
        let quarter = BigRational::new(BigInt::one(), BigInt::from(4));
        let mut lambda_ratio = Vec::new();
        let mut evaluated = Vec::new();
        let mut min_ratio: Option<Rat> = None;
        for (n, p) in solve.products.iter().enumerate() {
            let cs: Vec<BigInt> = (1..=self.k).map(|j| p.column_sum(j)).collect();
            let mut row = Vec::new();
            let mut max_width = Rat::zero();
            for i in 0..self.k {
                let ratios: Vec<Rat> = (0..self.k)
                    .map(|j| BigRational::new(p.rows()[i][j].clone(), cs[j].clone()))
                    .collect();
                let lo = ratios.iter().min().unwrap().clone();
                let hi = ratios.iter().max().unwrap().clone();
                if &hi - &lo > max_width {
                    max_width = &hi - &lo;
                }
                row.push(CertifiedValue::new(lo, hi));
            }
            if max_width <= quarter {
                evaluated.push(n);
                for e in &row {
                    let lo = e.lo().clone();
                    min_ratio = Some(match min_ratio {
                        None => lo,
                        Some(m) => m.min(lo),
                    });
                }
            }
            lambda_ratio.push(row);
        }
        let mut r_column_ratios = Vec::new();
        for n in 1..=horizon {
            let r = self.r_matrix(n)?;
            let mut mat = Vec::new();
            for i in 1..=self.k {
                let mut row = Vec::new();
                for j in 1..=self.k {
                    row.push(BigRational::new(r.entry(i, j).clone(), r.column_sum(j)));
                }
                mat.push(row);
            }
            r_column_ratios.push(mat);
        }
        let balanced = match &min_ratio {
            Some(m) => m >= threshold,
            None => false,
        };
        Ok(BalancedReport {
            delta,
            lambda_ratio,
            r_column_ratios,
            evaluated_stages: evaluated,
            min_lambda_ratio: min_ratio,
            balanced,
            threshold: threshold.clone(),
        })
    }
}

fn to_f64(v: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    v.to_f64().unwrap_or(f64::MAX)
}
