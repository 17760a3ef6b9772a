//! Rank-one and funny-rank-one `(C,F)` systems over `Z^d`.
//!
//! A system stores a finite horizon of construction data: tower shapes
//! `F_0, ..., F_N` and offset sets `C_1, ..., C_N` subject to
//!
//! * (I)   `F_0 = {0}` and `#C_n > 1`,
//! * (II)  `F_n + C_{n+1} ⊆ F_{n+1}`,
//! * (III) the translates `F_n + c`, `c in C_{n+1}`, are pairwise disjoint,
//! * (IV)  `0 ∈ F_n` and `0 ∈ C_n`.
//!
//! The canonical measure assigns each level-`n` cylinder `[A]_n` the exact
//! rational mass `#A / (#C_1 ... #C_n)`, normalized by `μ([F_0]_0) = 1`.
//! All per-level conditions the construction theory imposes are checkable
//! by finite enumeration and exposed here, together with telescoping,
//! offset thinning and the level-expansion enumeration that decides when
//! `μ(T_g[a]_n ∩ [b]_n) > 0`.

use crate::certified::{CertifiedValue, Rat};
use crate::group::{GroupElement, GroupSet};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RankOneError {
    #[error("level {0} out of range (horizon {1})")]
    LevelOutOfRange(usize, usize),
    #[error("cylinder support is not contained in F_{0}")]
    SupportNotInTower(usize),
    #[error("cut points must start at 0 and strictly increase within the horizon")]
    BadCuts,
    #[error("thinning emptied C_{0}")]
    ThinningFailed(usize),
    #[error("inconsistent cut-and-stack data: {0}")]
    BadCutAndStack(String),
    #[error(transparent)]
    Group(#[from] crate::group::GroupError),
}

/// How the total-measure question is settled for a stored prefix.
///
/// A finite prefix never decides finiteness by itself; catalog systems carry
/// closed-form certificates, everything else stays `Unknown`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeasureCert {
    Finite(Rat),
    Infinite,
    Unknown,
}

/// Facts about the infinite extension of the stored prefix that are
/// guaranteed by a generator rule rather than inspection of the prefix.
#[derive(Clone, Debug, Default)]
pub struct TailCertificates {
    /// Every future stage satisfies `F_{n+1} = F_n + C_{n+1}` (no spacers).
    pub no_spacer_tail: bool,
    /// The large-holes condition holds at every future stage, and offset
    /// gaps grow fast enough that no return times beyond the horizon fall
    /// into any window examined at or below the horizon.
    pub large_holes_tail: bool,
}

/// Finite-horizon rank-one `(C,F)` data.
#[derive(Clone)]
pub struct RankOneSystem {
    name: String,
    dim: usize,
    /// `f[n]` is `F_n`, `n = 0..=N`.
    f: Vec<GroupSet>,
    /// `c[n-1]` is `C_n`, `n = 1..=N`.
    c: Vec<GroupSet>,
    measure_cert: MeasureCert,
    tail: TailCertificates,
}

/// A level-`n` cylinder `[A]_n`, `A ⊆ F_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cylinder {
    pub level: usize,
    pub support: GroupSet,
}

impl Cylinder {
    pub fn new(level: usize, support: GroupSet) -> Self {
        Cylinder { level, support }
    }

    /// The one-cell cylinder `[g]_n`.
    pub fn cell(level: usize, g: GroupElement) -> Self {
        Cylinder {
            level,
            support: GroupSet::singleton(g),
        }
    }
}

/// One of the defining conditions, for validation reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    I,
    II,
    III,
    IV,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::I => "(I)",
            Condition::II => "(II)",
            Condition::III => "(III)",
            Condition::IV => "(IV)",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct ConditionFailure {
    pub condition: Condition,
    /// The stage index `n` of `C_n` (or of `F_n` for (I)/(IV) failures).
    pub level: usize,
    pub witness: String,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub failures: Vec<ConditionFailure>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Verdict of [`RankOneSystem::total_measure_trend`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TrendVerdict {
    /// Certified by a closed-form bound carried with the system.
    Finite(Rat),
    Infinite,
    /// A finite prefix alone never decides; the last observed value is kept.
    Undecided(Rat),
}

/// One term of the disjoint-union decomposition of `[a]_n ∩ T_g^{-1}[b]_n`:
/// digits `c_{n+1..j}` and `d_{n+1..j}` with `c_l, d_l ∈ C_l` and `c_j ≠ d_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expansion {
    pub level: usize,
    pub c_digits: Vec<GroupElement>,
    pub d_digits: Vec<GroupElement>,
}

impl RankOneSystem {
    /// Builds a system from raw data.  The data is stored as given; call
    /// [`validate`](Self::validate) to check the construction conditions.
    pub fn new(name: &str, dim: usize, f: Vec<GroupSet>, c: Vec<GroupSet>) -> Self {
        assert_eq!(f.len(), c.len() + 1, "need F_0..F_N and C_1..C_N");
        assert!(f.iter().all(|s| s.dim() == dim));
        assert!(c.iter().all(|s| s.dim() == dim));
        RankOneSystem {
            name: name.to_string(),
            dim,
            f,
            c,
            measure_cert: MeasureCert::Unknown,
            tail: TailCertificates::default(),
        }
    }

    pub fn with_measure_cert(mut self, cert: MeasureCert) -> Self {
        self.measure_cert = cert;
        self
    }

    pub fn with_tail_certificates(mut self, tail: TailCertificates) -> Self {
        self.tail = tail;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Horizon `N`: the deepest stored stage.
    pub fn horizon(&self) -> usize {
        self.c.len()
    }

    pub fn f_set(&self, n: usize) -> &GroupSet {
        &self.f[n]
    }

    /// `C_n` for `1 <= n <= N`.
    pub fn c_set(&self, n: usize) -> &GroupSet {
        &self.c[n - 1]
    }

    pub fn measure_cert(&self) -> &MeasureCert {
        &self.measure_cert
    }

    pub fn tail_certificates(&self) -> &TailCertificates {
        &self.tail
    }

    /// `#C_1 ... #C_n` as an exact integer.
    pub fn c_product(&self, n: usize) -> BigInt {
        let mut p = BigInt::one();
        for m in 1..=n {
            p *= BigInt::from(self.c_set(m).len());
        }
        p
    }

    /// Mass `λ_n = 1/(#C_1 ... #C_n)` of a single level-`n` cell.
    pub fn level_mass(&self, n: usize) -> Rat {
        BigRational::new(BigInt::one(), self.c_product(n))
    }

    /// Per-stage checks of conditions (I)-(IV).
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let zero = GroupElement::zero(self.dim);
        if self.f[0].len() != 1 || !self.f[0].contains(&zero) {
            report.failures.push(ConditionFailure {
                condition: Condition::I,
                level: 0,
                witness: format!("F_0 = {:?}, expected {{0}}", self.f[0]),
            });
        }
        for n in 1..=self.horizon() {
            let c = self.c_set(n);
            let f_prev = &self.f[n - 1];
            let f_cur = &self.f[n];
            if c.len() <= 1 {
                report.failures.push(ConditionFailure {
                    condition: Condition::I,
                    level: n,
                    witness: format!("#C_{} = {}", n, c.len()),
                });
            }
            for off in c.iter() {
                if !f_prev.translate(&off).is_subset(f_cur) {
                    report.failures.push(ConditionFailure {
                        condition: Condition::II,
                        level: n,
                        witness: format!("F_{} + {} leaves F_{}", n - 1, off, n),
                    });
                    break;
                }
            }
            if let Ok(Err((a, b))) = GroupSet::disjoint_translates(f_prev, c) {
                report.failures.push(ConditionFailure {
                    condition: Condition::III,
                    level: n,
                    witness: format!("translates by {} and {} of F_{} overlap", a, b, n - 1),
                });
            }
            if !c.contains(&zero) {
                report.failures.push(ConditionFailure {
                    condition: Condition::IV,
                    level: n,
                    witness: format!("0 ∉ C_{}", n),
                });
            }
            if !f_cur.contains(&zero) {
                report.failures.push(ConditionFailure {
                    condition: Condition::IV,
                    level: n,
                    witness: format!("0 ∉ F_{}", n),
                });
            }
        }
        report
    }

    fn check_cylinder(&self, cyl: &Cylinder) -> Result<(), RankOneError> {
        if cyl.level > self.horizon() {
            return Err(RankOneError::LevelOutOfRange(cyl.level, self.horizon()));
        }
        if !cyl.support.is_subset(self.f_set(cyl.level)) {
            return Err(RankOneError::SupportNotInTower(cyl.level));
        }
        Ok(())
    }

    /// Exact measure `μ([A]_n) = #A / (#C_1 ... #C_n)`.
    pub fn measure(&self, cyl: &Cylinder) -> Result<Rat, RankOneError> {
        self.check_cylinder(cyl)?;
        Ok(BigRational::new(
            cyl.support.card(),
            self.c_product(cyl.level),
        ))
    }

    /// Rewrites `[A]_n` as the level-`m` cylinder `[A + C_{n+1} + ... + C_m]_m`.
    /// The measure is preserved exactly.
    pub fn refine(&self, cyl: &Cylinder, m: usize) -> Result<Cylinder, RankOneError> {
        self.check_cylinder(cyl)?;
        if m < cyl.level || m > self.horizon() {
            return Err(RankOneError::LevelOutOfRange(m, self.horizon()));
        }
        let mut support = cyl.support.clone();
        for l in (cyl.level + 1)..=m {
            support = support.sumset(self.c_set(l))?;
        }
        Ok(Cylinder { level: m, support })
    }

    /// The nondecreasing sequence `#F_n / (#C_1 ... #C_n)`, `n = 0..=N`,
    /// together with a verdict.  Finiteness claims come only from the
    /// certificate carried by the system, never from the prefix.
    pub fn total_measure_trend(&self) -> (Vec<Rat>, TrendVerdict) {
        let seq: Vec<Rat> = (0..=self.horizon())
            .map(|n| BigRational::new(self.f[n].card(), self.c_product(n)))
            .collect();
        let last = seq.last().unwrap().clone();
        let verdict = match &self.measure_cert {
            MeasureCert::Finite(v) => TrendVerdict::Finite(v.clone()),
            MeasureCert::Infinite => TrendVerdict::Infinite,
            MeasureCert::Unknown => TrendVerdict::Undecided(last),
        };
        (seq, verdict)
    }

    /// For each `n`, the least `m <= N` with
    /// `g + F_n + C_{n+1} + ... + C_m ⊆ F_m`, if any.
    pub fn check_full_action(
        &self,
        g: &GroupElement,
    ) -> Result<Vec<(usize, Option<usize>)>, RankOneError> {
        let mut out = Vec::new();
        for n in 0..self.horizon() {
            let mut set = self.f[n].translate(g);
            let mut found = None;
            for m in (n + 1)..=self.horizon() {
                set = set.sumset(self.c_set(m))?;
                if set.is_subset(&self.f[m]) {
                    found = Some(m);
                    break;
                }
            }
            out.push((n, found));
        }
        Ok(out)
    }

    /// The ratios `#((g + F_n + C_{n+1} + ... + C_m) ∩ F_m) / (#F_n #C_{n+1} ... #C_m)`
    /// for fixed `n` and `m = n+1..=N`; they approach 1 exactly when the
    /// action is defined almost everywhere.
    pub fn check_ae_action(
        &self,
        g: &GroupElement,
        n: usize,
    ) -> Result<Vec<(usize, Rat)>, RankOneError> {
        let mut out = Vec::new();
        let mut set = self.f[n].translate(g);
        let mut denom = self.f[n].card();
        for m in (n + 1)..=self.horizon() {
            set = set.sumset(self.c_set(m))?;
            denom *= BigInt::from(self.c_set(m).len());
            let hits = set.iter().filter(|p| self.f[m].contains(p)).count();
            out.push((m, BigRational::new(BigInt::from(hits), denom.clone())));
        }
        Ok(out)
    }

    /// Depth-`L` support of a cylinder: the set `A + C_{n+1} + ... + C_L`.
    pub fn support_at_depth(&self, cyl: &Cylinder, depth: usize) -> Result<GroupSet, RankOneError> {
        Ok(self.refine(cyl, depth)?.support)
    }

    /// Enumerates all expansions of `g` (with endpoints `a, b ∈ F_n`) up to
    /// level `depth`, returning them together with the certified mass of
    /// `μ([a]_n ∩ T_g^{-1}[b]_n)`.
    ///
    /// Each expansion at level `j` contributes the cylinder
    /// `[a + d_{n+1} + ... + d_j]_j` of mass `λ_j`; the convention for the
    /// trivial translate `g = b - a` is the empty expansion contributing
    /// `μ([a]_n)` exactly.  Mass that resolves only beyond `depth` is the
    /// escaped part of `[a]_n` and is charged to the interval width.
    pub fn return_expansions(
        &self,
        g: &GroupElement,
        a: &GroupElement,
        b: &GroupElement,
        n: usize,
        depth: usize,
    ) -> Result<(Vec<Expansion>, CertifiedValue), RankOneError> {
        if n > self.horizon() || depth > self.horizon() || depth < n {
            return Err(RankOneError::LevelOutOfRange(depth.max(n), self.horizon()));
        }
        if !self.f[n].contains(a) || !self.f[n].contains(b) {
            return Err(RankOneError::SupportNotInTower(n));
        }
        // Target of the digit difference sum: g = b + Σc - Σd - a.
        let target = g.add(a).sub(b);
        let mut expansions = Vec::new();
        let mut lo = Rat::zero();
        if target.is_zero() {
            lo += self.measure(&Cylinder::cell(n, a.clone()))?;
        }
        // Depth-first enumeration over digit pairs, pruning branches whose
        // partial difference cannot reach the target with the remaining
        // per-stage diameters.
        // diam[j][axis] bounds |Σ_{i>=j} (c_i - d_i)| coordinatewise.
        let mut diam: Vec<Vec<BigInt>> = vec![vec![BigInt::zero(); self.dim]; depth + 2];
        for j in (n + 1..=depth).rev() {
            let d = self.c_set(j).diffset(self.c_set(j))?;
            let mut stage_max = vec![BigInt::zero(); self.dim];
            for g in d.iter() {
                for (axis, c) in g.coords().iter().enumerate() {
                    let a = c.abs();
                    if a > stage_max[axis] {
                        stage_max[axis] = a;
                    }
                }
            }
            diam[j] = stage_max
                .iter()
                .zip(&diam[j + 1])
                .map(|(a, b)| a + b)
                .collect();
        }
        struct Frame<'s> {
            sys: &'s RankOneSystem,
            target: GroupElement,
            depth: usize,
        }
        fn descend(
            fr: &Frame,
            j: usize,
            partial: &GroupElement,
            c_digits: &mut Vec<GroupElement>,
            d_digits: &mut Vec<GroupElement>,
            diam: &[Vec<BigInt>],
            expansions: &mut Vec<Expansion>,
            lo: &mut Rat,
        ) {
            if j > fr.depth {
                return;
            }
            for c in fr.sys.c_set(j).iter() {
                for d in fr.sys.c_set(j).iter() {
                    let next = partial.add(&c).sub(&d);
                    let gap = fr.target.sub(&next);
                    // prune: remaining stages cannot close the gap
                    let reachable = gap
                        .coords()
                        .iter()
                        .enumerate()
                        .all(|(axis, v)| v.abs() <= diam[j + 1][axis]);
                    if !reachable {
                        continue;
                    }
                    c_digits.push(c.clone());
                    d_digits.push(d.clone());
                    if c != d && next == fr.target {
                        expansions.push(Expansion {
                            level: j,
                            c_digits: c_digits.clone(),
                            d_digits: d_digits.clone(),
                        });
                        *lo += fr.sys.level_mass(j);
                    }
                    descend(fr, j + 1, &next, c_digits, d_digits, diam, expansions, lo);
                    c_digits.pop();
                    d_digits.pop();
                }
            }
        }
        let fr = Frame {
            sys: self,
            target,
            depth,
        };
        descend(
            &fr,
            n + 1,
            &GroupElement::zero(self.dim),
            &mut Vec::new(),
            &mut Vec::new(),
            &diam,
            &mut expansions,
            &mut lo,
        );
        // Tail bound: mass of [a]_n escaping the depth-L tower under T_g.
        let support = self.support_at_depth(&Cylinder::cell(n, a.clone()), depth)?;
        let f_depth = self.f_set(depth);
        let esc_fwd = support
            .iter()
            .filter(|p| !f_depth.contains(&p.add(g)))
            .count();
        let support_b = self.support_at_depth(&Cylinder::cell(n, b.clone()), depth)?;
        let esc_bwd = support_b
            .iter()
            .filter(|p| !f_depth.contains(&p.sub(g)))
            .count();
        let esc = esc_fwd.min(esc_bwd);
        let hi = &lo + self.level_mass(depth) * BigRational::from_integer(BigInt::from(esc));
        Ok((expansions, CertifiedValue::new(lo, hi)))
    }

    /// Passes to the `(C,F)`-subsequence given by cut points
    /// `0 = k_0 < k_1 < ... <= N`: new shapes `F'_n = F_{k_n}` and offsets
    /// `C'_n = C_{k_{n-1}+1} + ... + C_{k_n}`.
    pub fn telescope(&self, cuts: &[usize]) -> Result<RankOneSystem, RankOneError> {
        if cuts.is_empty() || cuts[0] != 0 {
            return Err(RankOneError::BadCuts);
        }
        for w in cuts.windows(2) {
            if w[1] <= w[0] || w[1] > self.horizon() {
                return Err(RankOneError::BadCuts);
            }
        }
        let f: Vec<GroupSet> = cuts.iter().map(|&k| self.f[k].clone()).collect();
        let mut c = Vec::new();
        for w in cuts.windows(2) {
            let mut acc = GroupSet::singleton(GroupElement::zero(self.dim));
            for l in (w[0] + 1)..=w[1] {
                acc = acc.sumset(self.c_set(l))?;
            }
            c.push(acc);
        }
        Ok(RankOneSystem::new(
            &format!("{}-telescoped", self.name),
            self.dim,
            f,
            c,
        )
        .with_measure_cert(self.measure_cert.clone())
        .with_tail_certificates(self.tail.clone()))
    }

    /// Keeps only the offsets `c ∈ C_{n+1}` with `g_j + F_n + c ⊆ F_{n+1}`
    /// for all supplied generators `g_j` with `j <= min(J, n)`.  Returns the
    /// thinned system and the per-stage density sequence `#C' / #C`; the
    /// caller judges whether the deficiencies are summable.
    pub fn thin(
        &self,
        generators: &[GroupElement],
    ) -> Result<(RankOneSystem, Vec<Rat>), RankOneError> {
        let mut c_new = Vec::new();
        let mut densities = Vec::new();
        for n in 0..self.horizon() {
            let c = self.c_set(n + 1);
            let active = &generators[..generators.len().min(n)];
            let mut kept = GroupSet::empty(self.dim);
            for off in c.iter() {
                let shifted = self.f[n].translate(&off);
                let ok = active.iter().all(|g| {
                    shifted
                        .translate(g)
                        .is_subset(&self.f[n + 1])
                });
                if ok {
                    kept.insert(off);
                }
            }
            if kept.is_empty() {
                return Err(RankOneError::ThinningFailed(n + 1));
            }
            densities.push(BigRational::new(
                BigInt::from(kept.len()),
                BigInt::from(c.len()),
            ));
            c_new.push(kept);
        }
        let thinned = RankOneSystem::new(
            &format!("{}-thinned", self.name),
            self.dim,
            self.f.clone(),
            c_new,
        );
        Ok((thinned, densities))
    }

    /// Large-holes condition at stage `n`:
    /// `(g + F_n + F_n - F_n - F_n) ∩ (C_{n+1} - C_{n+1}) = {0}`.
    /// Returns the offending nonzero element on failure.
    pub fn large_holes_check(
        &self,
        g: &GroupElement,
        n: usize,
    ) -> Result<Result<(), GroupElement>, RankOneError> {
        if n >= self.horizon() {
            return Err(RankOneError::LevelOutOfRange(n, self.horizon()));
        }
        let c_diff = self.c_set(n + 1).diffset(self.c_set(n + 1))?;
        // Membership of w in g + F + F - F - F, via box fast path when
        // F_n is a box, else via the two-fold sumset.
        let f = &self.f[n];
        let in_window: Box<dyn Fn(&GroupElement) -> bool> = if let Some((lo, hi)) = f.as_box() {
            let g = g.clone();
            Box::new(move |w: &GroupElement| {
                w.coords().iter().enumerate().all(|(axis, v)| {
                    let shifted = v - &g.coords()[axis];
                    let wlo = &lo[axis] * 2 - &hi[axis] * 2;
                    let whi = &hi[axis] * 2 - &lo[axis] * 2;
                    wlo <= shifted && shifted <= whi
                })
            })
        } else {
            let ff = f.sumset(f)?;
            let window = ff.diffset(&ff)?.translate(g);
            Box::new(move |w: &GroupElement| window.contains(w))
        };
        for w in c_diff.iter() {
            if w.is_zero() {
                continue;
            }
            if in_window(&w) {
                return Ok(Err(w));
            }
        }
        Ok(Ok(()))
    }

    /// Counts `#{(c, c') ∈ D x D : c - c' ∈ F_n - F_n + h}` for
    /// `D = C_{l+1} + ... + C_L` and each requested shift `h`.
    pub fn convolution_window_counts(
        &self,
        l: usize,
        n: usize,
        depth: usize,
        shifts: &[GroupElement],
    ) -> Result<Vec<(GroupElement, BigInt)>, RankOneError> {
        if !(l < n && n <= depth && depth <= self.horizon()) {
            return Err(RankOneError::LevelOutOfRange(depth, self.horizon()));
        }
        let mut d = GroupSet::singleton(GroupElement::zero(self.dim));
        for j in (l + 1)..=depth {
            d = d.sumset(self.c_set(j))?;
        }
        let window = self.f[n].diffset(&self.f[n])?;
        let mut out = Vec::new();
        for h in shifts {
            let mut count = BigInt::zero();
            for c in d.iter() {
                for c2 in d.iter() {
                    if window.contains(&c.sub(&c2).sub(h)) {
                        count += 1;
                    }
                }
            }
            out.push((h.clone(), count));
        }
        Ok(out)
    }
}

impl fmt::Debug for RankOneSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RankOneSystem({}, dim {}, horizon {})",
            self.name,
            self.dim,
            self.horizon()
        )
    }
}

/// Classical cutting-and-stacking front end over `Z`: at stage `n` the
/// current tower of height `h_n` is cut into `cuts[n]` columns and restacked
/// with `spacers[n][i]` spacer levels on top of column `i` (spacers on the
/// last column become top spacers).  Produces the equivalent `(C,F)` data:
/// offsets are the partial sums of `h_n + s_{n,i}`.
pub fn build_cut_and_stack(
    name: &str,
    stages: &[(u32, Vec<u64>)],
) -> Result<RankOneSystem, RankOneError> {
    let mut f = vec![GroupSet::interval(0, 1)];
    let mut c = Vec::new();
    let mut h = BigInt::one();
    for (i, (cuts, spacers)) in stages.iter().enumerate() {
        if *cuts < 2 {
            return Err(RankOneError::BadCutAndStack(format!(
                "stage {}: need at least 2 cuts",
                i
            )));
        }
        if spacers.len() != *cuts as usize {
            return Err(RankOneError::BadCutAndStack(format!(
                "stage {}: {} cuts but {} spacer columns",
                i,
                cuts,
                spacers.len()
            )));
        }
        let mut offsets = GroupSet::empty(1);
        let mut pos = BigInt::zero();
        for s in spacers.iter() {
            offsets.insert(GroupElement::new(vec![pos.clone()]));
            pos += &h + BigInt::from(*s);
        }
        h = pos;
        f.push(GroupSet::interval(0, h.clone()));
        c.push(offsets);
    }
    Ok(RankOneSystem::new(name, 1, f, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::certified::rat;

    #[test]
    fn validate_catalog_systems() {
        for sys in [
            catalog::odometer(8),
            catalog::chacon(8),
            catalog::hajian_kakutani(8),
            catalog::z2_large_holes(5, 10),
        ] {
            let report = sys.validate();
            assert!(report.all_pass(), "{}: {:?}", sys.name(), report.failures);
        }
    }

    #[test]
    fn validate_catches_overlap() {
        // Chacon with C_2 mutated to {0,4,6}: translates of [0,4) overlap.
        let mut sys = catalog::chacon(4);
        let c2 = GroupSet::from_elems(
            1,
            [0i64, 4, 6].iter().map(|&v| GroupElement::scalar(v)),
        );
        sys = RankOneSystem::new(
            "chacon-mutated",
            1,
            (0..=4).map(|n| sys.f_set(n).clone()).collect(),
            vec![
                sys.c_set(1).clone(),
                c2,
                sys.c_set(3).clone(),
                sys.c_set(4).clone(),
            ],
        );
        let report = sys.validate();
        let fail = report
            .failures
            .iter()
            .find(|f| f.condition == Condition::III)
            .expect("expected a (III) failure");
        assert_eq!(fail.level, 2);
        assert!(fail.witness.contains('4') && fail.witness.contains('6'));
    }

    #[test]
    fn measure_examples() {
        let odo = catalog::odometer(6);
        let cyl = Cylinder::new(1, GroupSet::interval(0, 2));
        assert_eq!(odo.measure(&cyl).unwrap(), rat(1, 1));

        let chacon = catalog::chacon(6);
        assert_eq!(
            chacon
                .measure(&Cylinder::cell(2, GroupElement::scalar(0)))
                .unwrap(),
            rat(1, 9)
        );
        let full2 = Cylinder::new(2, chacon.f_set(2).clone());
        assert_eq!(chacon.measure(&full2).unwrap(), rat(13, 9));
    }

    #[test]
    fn measure_rejects_bad_support() {
        let odo = catalog::odometer(4);
        let bad = Cylinder::cell(1, GroupElement::scalar(7));
        assert!(matches!(
            odo.measure(&bad),
            Err(RankOneError::SupportNotInTower(1))
        ));
    }

    #[test]
    fn refine_examples() {
        let chacon = catalog::chacon(6);
        let refined = chacon
            .refine(&Cylinder::cell(0, GroupElement::scalar(0)), 1)
            .unwrap();
        assert_eq!(refined.support, GroupSet::from_i64s(1, &[&[0], &[1], &[3]]));

        // refine to the same level is the identity
        let cyl = Cylinder::cell(2, GroupElement::scalar(5));
        assert_eq!(chacon.refine(&cyl, 2).unwrap(), cyl);

        // odometer [0]_1 -> level 3
        let odo = catalog::odometer(6);
        let r = odo
            .refine(&Cylinder::cell(1, GroupElement::scalar(0)), 3)
            .unwrap();
        assert_eq!(r.support, GroupSet::from_i64s(1, &[&[0], &[2], &[4], &[6]]));

        // measure preserved exactly
        let m0 = odo.measure(&Cylinder::cell(1, GroupElement::scalar(0))).unwrap();
        assert_eq!(odo.measure(&r).unwrap(), m0);
    }

    #[test]
    fn trend_examples() {
        let (seq, verdict) = catalog::odometer(6).total_measure_trend();
        assert!(seq.iter().all(|v| v == &rat(1, 1)));
        assert_eq!(verdict, TrendVerdict::Finite(rat(1, 1)));

        let (seq, verdict) = catalog::chacon(6).total_measure_trend();
        assert_eq!(&seq[..3], &[rat(1, 1), rat(4, 3), rat(13, 9)]);
        assert_eq!(verdict, TrendVerdict::Finite(rat(3, 2)));
        // nondecreasing and >= 1
        for w in seq.windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert!(seq.iter().all(|v| v >= &rat(1, 1)));

        let (seq, verdict) = catalog::hajian_kakutani(6).total_measure_trend();
        assert_eq!(&seq[..3], &[rat(1, 1), rat(2, 1), rat(4, 1)]);
        assert_eq!(verdict, TrendVerdict::Infinite);
    }

    #[test]
    fn full_action_examples() {
        let odo = catalog::odometer(8);
        // the odometer never satisfies the full-action inclusion for g = 1
        for (_, m) in odo.check_full_action(&GroupElement::scalar(1)).unwrap() {
            assert_eq!(m, None);
        }
        // g = 0 gives m = n+1 immediately (inclusion holds at every m)
        for (n, m) in odo.check_full_action(&GroupElement::zero(1)).unwrap() {
            assert_eq!(m, Some(n + 1));
        }
        let chacon = catalog::chacon(8);
        for (_, m) in chacon.check_full_action(&GroupElement::scalar(-1)).unwrap() {
            assert_eq!(m, None);
        }
    }

    #[test]
    fn ae_action_examples() {
        let chacon = catalog::chacon(8);
        let ratios = chacon.check_ae_action(&GroupElement::scalar(1), 0).unwrap();
        let at2 = ratios.iter().find(|(m, _)| *m == 2).unwrap();
        assert_eq!(at2.1, rat(8, 9));
        // ratios approach 1
        let last = ratios.last().unwrap();
        assert!(last.1 > rat(95, 100));

        for (_, r) in chacon.check_ae_action(&GroupElement::zero(1), 0).unwrap() {
            assert_eq!(r, rat(1, 1));
        }

        let odo = catalog::odometer(8);
        let ratios = odo.check_ae_action(&GroupElement::scalar(1), 0).unwrap();
        let at3 = ratios.iter().find(|(m, _)| *m == 3).unwrap();
        assert_eq!(at3.1, rat(7, 8));
    }

    #[test]
    fn expansion_examples() {
        let chacon = catalog::chacon(8);
        let zero = GroupElement::scalar(0);
        let one = GroupElement::scalar(1);

        let (exps, value) = chacon
            .return_expansions(&one, &zero, &zero, 0, 1)
            .unwrap();
        assert_eq!(exps.len(), 1);
        assert_eq!(exps[0].level, 1);
        assert_eq!(exps[0].c_digits, vec![GroupElement::scalar(1)]);
        assert_eq!(exps[0].d_digits, vec![GroupElement::scalar(0)]);
        assert!(value.contains_value(&rat(1, 3)));

        // g = 0, a = b: exact value μ([a]_n)
        let (exps, value) = chacon
            .return_expansions(&zero, &zero, &zero, 0, 4)
            .unwrap();
        assert!(exps.is_empty());
        assert!(value.is_exact());
        assert_eq!(value.lo(), &rat(1, 1));

        // depth 2 adds the expansion (c_1,d_1,c_2,d_2) = (0,3,4,0)
        let (exps, value) = chacon
            .return_expansions(&one, &zero, &zero, 0, 2)
            .unwrap();
        assert_eq!(exps.len(), 2);
        let deep = exps.iter().find(|e| e.level == 2).unwrap();
        assert_eq!(
            deep.c_digits,
            vec![GroupElement::scalar(0), GroupElement::scalar(4)]
        );
        assert_eq!(
            deep.d_digits,
            vec![GroupElement::scalar(3), GroupElement::scalar(0)]
        );
        assert!(value.lo() >= &rat(4, 9));

        // nesting: interval at depth L+1 inside interval at depth L,
        // lo nondecreasing
        let mut prev: Option<CertifiedValue> = None;
        for depth in 1..=5 {
            let (_, v) = chacon
                .return_expansions(&one, &zero, &zero, 0, depth)
                .unwrap();
            if let Some(p) = &prev {
                assert!(p.contains(&v), "depth {}: {:?} ⊄ {:?}", depth, v, p);
                assert!(v.lo() >= p.lo());
            }
            prev = Some(v);
        }
    }

    #[test]
    fn telescope_examples() {
        let odo = catalog::odometer(8);
        let t = odo.telescope(&[0, 2, 4, 6, 8]).unwrap();
        assert!(t.validate().all_pass());
        assert_eq!(t.c_set(1).len(), 4);
        // telescoped cylinder measures agree with the original
        let cyl = Cylinder::cell(1, GroupElement::scalar(3));
        let orig = odo.measure(&Cylinder::cell(2, GroupElement::scalar(3))).unwrap();
        assert_eq!(t.measure(&cyl).unwrap(), orig);

        // identity cuts reproduce the same sets
        let id = odo.telescope(&[0, 1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        for n in 1..=8 {
            assert_eq!(id.c_set(n), odo.c_set(n));
            assert_eq!(id.f_set(n), odo.f_set(n));
        }

        let chacon = catalog::chacon(4);
        let t = chacon.telescope(&[0, 2]).unwrap();
        assert_eq!(
            t.c_set(1),
            &chacon.c_set(1).sumset(chacon.c_set(2)).unwrap()
        );
        assert_eq!(t.f_set(1), &GroupSet::interval(0, 13));
        assert!(t.validate().all_pass());

        assert!(matches!(
            chacon.telescope(&[0, 3, 2]),
            Err(RankOneError::BadCuts)
        ));
    }

    #[test]
    fn thin_examples() {
        let chacon = catalog::chacon(6);
        // trivial generator keeps everything
        let (thinned, densities) = chacon.thin(&[GroupElement::zero(1)]).unwrap();
        assert!(densities.iter().all(|d| d == &rat(1, 1)));
        for n in 1..=6 {
            assert_eq!(thinned.c_set(n), chacon.c_set(n));
        }

        let (thinned, densities) = chacon.thin(&[GroupElement::scalar(1)]).unwrap();
        // stage 2: C'_2 = {0, 4}, density 2/3
        assert_eq!(thinned.c_set(2), &GroupSet::from_i64s(1, &[&[0], &[4]]));
        assert_eq!(densities[1], rat(2, 3));
        // thinned system satisfies the full-action inclusion at consecutive
        // levels for the supplied generator
        for n in 1..6 {
            let shifted = thinned
                .f_set(n)
                .translate(&GroupElement::scalar(1))
                .sumset(thinned.c_set(n + 1))
                .unwrap();
            assert!(shifted.is_subset(thinned.f_set(n + 1)));
        }

        let hk = catalog::hajian_kakutani(6);
        let (_, densities) = hk.thin(&[GroupElement::scalar(1)]).unwrap();
        assert!(densities.iter().all(|d| d == &rat(1, 1)));
    }

    #[test]
    fn large_holes_examples() {
        let sys = catalog::z2_large_holes(4, 10);
        for n in 0..4 {
            for g in [
                GroupElement::from_i64s(&[1, 0]),
                GroupElement::from_i64s(&[0, 1]),
            ] {
                assert!(sys.large_holes_check(&g, n).unwrap().is_ok(), "level {}", n);
            }
        }
        let small = catalog::z2_small_holes(4);
        let g = GroupElement::from_i64s(&[1, 0]);
        let witness = small.large_holes_check(&g, 1).unwrap().unwrap_err();
        assert_eq!(witness, GroupElement::from_i64s(&[20, 0]));
    }

    #[test]
    fn convolution_counts() {
        let odo = catalog::odometer(4);
        let counts = odo
            .convolution_window_counts(0, 1, 2, &[GroupElement::scalar(0)])
            .unwrap();
        assert_eq!(counts[0].1, BigInt::from(4));
        // h = 0 always counts at least the diagonal
        let chacon = catalog::chacon(5);
        let counts = chacon
            .convolution_window_counts(1, 2, 4, &[GroupElement::scalar(0)])
            .unwrap();
        assert!(counts[0].1 >= BigInt::from(chacon.c_set(3).len() * chacon.c_set(4).len()));
        // symmetry count(h) = count(-h)
        let h = GroupElement::scalar(5);
        let counts = chacon
            .convolution_window_counts(1, 2, 4, &[h.clone(), h.neg()])
            .unwrap();
        assert_eq!(counts[0].1, counts[1].1);
    }

    #[test]
    fn cut_and_stack_examples() {
        // two cuts, no spacers: the dyadic odometer
        let stages: Vec<(u32, Vec<u64>)> = (0..6).map(|_| (2, vec![0, 0])).collect();
        let sys = build_cut_and_stack("test-odometer", &stages).unwrap();
        let odo = catalog::odometer(6);
        for n in 1..=6 {
            assert_eq!(sys.c_set(n), odo.c_set(n), "stage {}", n);
            assert_eq!(sys.f_set(n), odo.f_set(n));
        }

        // three cuts with a middle spacer: Chacon
        let stages: Vec<(u32, Vec<u64>)> = (0..6).map(|_| (3, vec![0, 1, 0])).collect();
        let sys = build_cut_and_stack("test-chacon", &stages).unwrap();
        let chacon = catalog::chacon(6);
        for n in 1..=6 {
            assert_eq!(sys.c_set(n), chacon.c_set(n), "stage {}", n);
        }

        // two cuts with 2h spacers on the second column: needs per-stage data
        let mut stages: Vec<(u32, Vec<u64>)> = Vec::new();
        let mut h = 1u64;
        for _ in 0..5 {
            stages.push((2, vec![0, 2 * h]));
            h *= 4;
        }
        let sys = build_cut_and_stack("test-hk", &stages).unwrap();
        let hk = catalog::hajian_kakutani(5);
        for n in 1..=5 {
            assert_eq!(sys.c_set(n), hk.c_set(n), "stage {}", n);
            assert_eq!(sys.f_set(n), hk.f_set(n));
        }
        assert!(sys.validate().all_pass());

        assert!(build_cut_and_stack("bad", &[(1, vec![0])]).is_err());
        assert!(build_cut_and_stack("bad", &[(2, vec![0])]).is_err());
    }
}
