//! Partial-rigidity machinery for finite-rank systems over `Z`.
//!
//! A finite measure preserving transformation is partially rigid when some
//! sequence of times returns a fixed fraction of every set to itself.  For
//! systems of exact finite rank (no spacers, tower masses bounded below) a
//! rigidity time at stage `n` is found by a pigeonhole walk through the
//! castle: starting from the heaviest base, repeatedly push the current set
//! up by the height of the tower it sits in and keep the heaviest
//! intersection with a base.  Within `k + 1` steps two indices repeat, and
//! the summed height between the repeats moves a `k^{-k}` fraction of the
//! repeated base onto itself.
//!
//! The consecutive-ordering (CO) route instead uses the heaviest tower's
//! height directly: when equal-source copies stack consecutively and every
//! present source appears at least twice, that height returns a definite
//! fraction of every castle level.

use crate::certified::{CertifiedValue, Rat};
use crate::dynamics::{DynError, TowerModel};
use crate::group::GroupElement;
use crate::rankk::{MarkedCylinder, MarkedElement, MeasureSolve, RankKSystem};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RigidityError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no repeat found in the pigeonhole chain (data violates tiling)")]
    NoRepeat,
    #[error(transparent)]
    Dyn(#[from] DynError),
    #[error(transparent)]
    RankK(#[from] crate::rankk::RankKError),
}

/// Exactness report: spacer-freeness per stage and the minimal tower-mass
/// trend.
#[derive(Clone, Debug)]
pub struct ExactnessReport {
    pub no_spacers: Vec<bool>,
    /// `min_j μ(W_n^j)` per stage `n = 0..=N` (bounded below for exact rank).
    pub min_tower_mass: Vec<CertifiedValue>,
    pub exact: bool,
    pub threshold: Rat,
}

/// Quasi-exactness report: the maximal spacer run `R` and the mass floor.
#[derive(Clone, Debug)]
pub struct QuasiExactReport {
    pub max_gap: BigInt,
    pub gap_per_stage: Vec<BigInt>,
    pub min_tower_mass: CertifiedValue,
    /// Gap sizes stabilized over the stored horizon and the mass floor
    /// clears the threshold.  A growing gap trend refutes quasi-exactness
    /// on the prefix.
    pub quasi_exact: bool,
    pub threshold: Rat,
}

#[derive(Clone, Debug)]
pub struct CoFailure {
    pub stage: usize,
    pub tower: usize,
    pub witness: String,
}

/// Bounds for the relaxed consecutive-ordering conditions: `r_bound` is the
/// maximal spacer run, `l_bound` the maximal number of copies strictly
/// between two consecutive copies of the same source inside one tower.
#[derive(Clone, Debug)]
pub struct CoRelaxedReport {
    pub r_bound: BigInt,
    pub l_bound: usize,
}

/// A rigidity time located by the pigeonhole walk.
#[derive(Clone, Debug)]
pub struct RigidityFinding {
    pub stage: usize,
    /// `m_n = h_{n,j_a} + ... + h_{n,j_{b-1}}`, plus the scanned spacer
    /// shift for quasi-exact systems.
    pub time: BigInt,
    /// The repeated tower index `j_a` (1-based).
    pub tower: usize,
    pub chain: Vec<usize>,
    pub repeat: (usize, usize),
    /// Certified `μ(T_m B ∩ B) / μ(B)` for the repeated base `B`.
    pub ratio: CertifiedValue,
    pub base_measure: CertifiedValue,
    /// Extra shift found by the spacer scan (`None` for exact systems).
    pub shift_scanned: Option<BigInt>,
}

/// One stage of the consecutive-ordering rigidity-time sequence.
#[derive(Clone, Debug)]
pub struct CoRigidityFinding {
    pub stage: usize,
    pub heavy_tower: usize,
    pub time: BigInt,
    /// Certified `μ(T_h I ∩ I)/μ(I)` for every level `I` of the reference
    /// castle.
    pub level_ratios: Vec<(usize, BigInt, CertifiedValue)>,
    pub min_ratio: Rat,
}

/// Partial-rigidity estimate over supplied times.
#[derive(Clone, Debug)]
pub struct PartialRigidityEstimate {
    /// `min_J min_n` of the certified lower bound of `μ(J ∩ T_{m_n} J)/μ(J)`.
    pub eta: Rat,
    /// Rows `(tower, level, time, ratio)`.
    pub table: Vec<(usize, BigInt, BigInt, CertifiedValue)>,
}

/// Spacer-freeness and tower-mass floor per stage.
pub fn exactness_check(
    sys: &RankKSystem,
    solve: &MeasureSolve,
    threshold: &Rat,
) -> Result<ExactnessReport, RigidityError> {
    let view = sys.castle_view()?;
    let no_spacers: Vec<bool> = (1..=sys.horizon()).map(|n| view.no_spacers_at(n)).collect();
    let mut min_tower_mass = Vec::new();
    for n in 0..=sys.horizon() {
        let mut min: Option<CertifiedValue> = None;
        for j in 1..=sys.rank() {
            let mass = solve.lambdas[n]
                .entry(j)
                .scale(&BigRational::from_integer(view.heights[n][j - 1].clone()));
            min = Some(match min {
                None => mass,
                Some(m) => {
                    if mass.lo() < m.lo() {
                        mass
                    } else {
                        m
                    }
                }
            });
        }
        min_tower_mass.push(min.unwrap());
    }
    let exact = no_spacers.iter().all(|&b| b)
        && min_tower_mass.iter().all(|m| m.lo() >= threshold);
    Ok(ExactnessReport {
        no_spacers,
        min_tower_mass,
        exact,
        threshold: threshold.clone(),
    })
}

/// Maximal spacer runs per stage and the quasi-exactness verdict.
pub fn quasi_exact_params(
    sys: &RankKSystem,
    solve: &MeasureSolve,
    threshold: &Rat,
) -> Result<QuasiExactReport, RigidityError> {
    let view = sys.castle_view()?;
    let gap_per_stage: Vec<BigInt> = (1..=sys.horizon())
        .map(|n| {
            view.stage(n)
                .iter()
                .map(|t| t.max_gap())
                .max()
                .unwrap_or_else(BigInt::zero)
        })
        .collect();
    let max_gap = gap_per_stage.iter().max().cloned().unwrap_or_else(BigInt::zero);
    let exact_report = exactness_check(sys, solve, threshold)?;
    let min_tower_mass = exact_report
        .min_tower_mass
        .iter()
        .cloned()
        .reduce(|a, b| if b.lo() < a.lo() { b } else { a })
        .unwrap();
    // gaps must stabilize on the prefix: the last stage may not exceed the
    // maximum seen strictly before it (a strictly growing trend refutes a
    // uniform bound)
    let stabilized = match gap_per_stage.split_last() {
        Some((last, rest)) if !rest.is_empty() => {
            let prior_max = rest.iter().max().cloned().unwrap();
            last <= &prior_max.max(BigInt::zero()) || last.is_zero()
        }
        _ => true,
    };
    let quasi_exact = stabilized && min_tower_mass.lo() >= threshold;
    Ok(QuasiExactReport {
        max_gap,
        gap_per_stage,
        min_tower_mass,
        quasi_exact,
        threshold: threshold.clone(),
    })
}

/// Consecutive-ordering condition: within every tower's stacking order,
/// equal-source placements form contiguous runs.
pub fn co_condition(sys: &RankKSystem) -> Result<Vec<CoFailure>, RigidityError> {
    let view = sys.castle_view()?;
    let mut failures = Vec::new();
    for n in 1..=sys.horizon() {
        for t in view.stage(n) {
            let order = t.order();
            for (idx, &src) in order.iter().enumerate() {
                // a violation: src reappears after a different source
                if let Some(prev) = (0..idx).rev().find(|&p| order[p] == src) {
                    if prev + 1 != idx && order[prev + 1..idx].iter().any(|&o| o != src) {
                        failures.push(CoFailure {
                            stage: n,
                            tower: t.target,
                            witness: format!(
                                "order {:?}: source {} interrupted at position {}",
                                order, src, idx
                            ),
                        });
                        break;
                    }
                }
            }
        }
    }
    Ok(failures)
}

/// Uniform bounds for the relaxed consecutive-ordering conditions.
pub fn co_relaxed_condition(sys: &RankKSystem) -> Result<CoRelaxedReport, RigidityError> {
    let view = sys.castle_view()?;
    let r_bound = view.max_gap();
    let mut l_bound = 0usize;
    for n in 1..=sys.horizon() {
        for t in view.stage(n) {
            let order = t.order();
            for i in 1..=sys.rank() {
                let occurrences: Vec<usize> = order
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s == i)
                    .map(|(idx, _)| idx)
                    .collect();
                for w in occurrences.windows(2) {
                    l_bound = l_bound.max(w[1] - w[0] - 1);
                }
            }
        }
    }
    Ok(CoRelaxedReport { r_bound, l_bound })
}

/// Non-degeneracy: every incidence entry is 0 or at least 2 (a tower that
/// appears inside another appears at least twice).
pub fn nondegeneracy_check(sys: &RankKSystem) -> Result<Vec<(usize, usize, usize)>, RigidityError> {
    let mut failures = Vec::new();
    for n in 1..=sys.horizon() {
        let r = sys.r_matrix(n)?;
        for i in 1..=sys.rank() {
            for j in 1..=sys.rank() {
                if r.entry(i, j) == &BigInt::one() {
                    failures.push((n, i, j));
                }
            }
        }
    }
    Ok(failures)
}

/// Positions of the stage-`n` base of tower `j` in the depth model.
fn base_positions_at_depth(
    model: &TowerModel,
    sys: &RankKSystem,
    n: usize,
    j: usize,
) -> Result<Vec<Vec<BigInt>>, RigidityError> {
    let cyl = MarkedCylinder::cell(
        n,
        MarkedElement::new(GroupElement::zero(1), j),
        1,
        sys.rank(),
    );
    Ok(model.positions(&cyl)?)
}

fn mass_of_positions(model: &TowerModel, pos: &[Vec<BigInt>]) -> CertifiedValue {
    let mut acc = CertifiedValue::zero();
    for (j, p) in pos.iter().enumerate() {
        acc = acc.add(
            &model
                .level_mass(j + 1)
                .scale(&BigRational::from_integer(BigInt::from(p.len()))),
        );
    }
    acc
}

/// Pigeonhole search for a rigidity time at stage `n`, evaluated in the
/// depth-`depth` tower model.
///
/// The walk starts from the heaviest stage-`n` base and repeatedly applies
/// `T_{h_{n,j_t}}`, keeping the heaviest base intersection, until a tower
/// index repeats; ties break toward the front of `tie_order` (ascending
/// indices by default).  For systems with spacers, the exact-case candidate
/// time is scanned over `k (R + 1)` extra shifts and the best certified
/// ratio is reported.
pub fn find_rigidity_time(
    sys: &RankKSystem,
    solve: &MeasureSolve,
    n: usize,
    depth: usize,
    tie_order: Option<&[usize]>,
) -> Result<RigidityFinding, RigidityError> {
    if depth < n + 2 || depth > sys.horizon() {
        return Err(RigidityError::Precondition(format!(
            "need n + 2 <= depth <= horizon (n = {}, depth = {})",
            n, depth
        )));
    }
    let quasi = quasi_exact_params(sys, solve, &BigRational::new(BigInt::one(), BigInt::from(1000)))?;
    if !quasi.quasi_exact {
        return Err(RigidityError::Precondition(
            "system is neither exact nor quasi-exact on the stored prefix".into(),
        ));
    }
    let k = sys.rank();
    let order: Vec<usize> = match tie_order {
        Some(o) => o.to_vec(),
        None => (1..=k).collect(),
    };
    let model = TowerModel::new(sys, solve, depth)?;
    let heights_n = sys.heights(n)?;
    let bases: Vec<Vec<Vec<BigInt>>> = (1..=k)
        .map(|j| base_positions_at_depth(&model, sys, n, j))
        .collect::<Result<_, _>>()?;
    let base_masses: Vec<CertifiedValue> = bases.iter().map(|b| mass_of_positions(&model, b)).collect();

    let argmax = |masses: &[CertifiedValue]| -> usize {
        let mut best = order[0];
        for &j in &order {
            if masses[j - 1].lo() > masses[best - 1].lo() {
                best = j;
            }
        }
        best
    };

    let j0 = argmax(&base_masses);
    let mut chain = vec![j0];
    let mut current = bases[j0 - 1].clone();
    let (a, b) = loop {
        let jt = *chain.last().unwrap();
        let h = &heights_n[jt - 1];
        // push the set up by h, dropping escaped positions
        let mut shifted: Vec<Vec<BigInt>> = Vec::with_capacity(k);
        for (tower_idx, pos) in current.iter().enumerate() {
            let cap = &model.heights()[tower_idx];
            shifted.push(
                pos.iter()
                    .map(|p| p + h)
                    .filter(|q| q < cap)
                    .collect(),
            );
        }
        // intersect with each base and keep the heaviest
        let mut best_j = 0usize;
        let mut best_mass = CertifiedValue::zero();
        let mut best_set: Vec<Vec<BigInt>> = Vec::new();
        for &j in &order {
            let mut inter: Vec<Vec<BigInt>> = Vec::with_capacity(k);
            for (tower_idx, pos) in shifted.iter().enumerate() {
                inter.push(
                    pos.iter()
                        .filter(|q| bases[j - 1][tower_idx].binary_search(q).is_ok())
                        .cloned()
                        .collect(),
                );
            }
            let mass = mass_of_positions(&model, &inter);
            if best_j == 0 || mass.lo() > best_mass.lo() {
                best_j = j;
                best_mass = mass;
                best_set = inter;
            }
        }
        chain.push(best_j);
        current = best_set;
        if let Some(a) = chain[..chain.len() - 1].iter().position(|&j| j == best_j) {
            break (a, chain.len() - 1);
        }
        if chain.len() > k + 1 {
            return Err(RigidityError::NoRepeat);
        }
    };
    let m_n: BigInt = chain[a..b].iter().map(|&j| heights_n[j - 1].clone()).sum();
    let tower = chain[a];
    let base = &bases[tower - 1];
    let base_measure = base_masses[tower - 1].clone();

    // certified ratio; for spacer-carrying systems scan the nearby shifts
    let scan_limit: BigInt = if quasi.max_gap.is_zero() {
        BigInt::zero()
    } else {
        (&quasi.max_gap + 1) * k
    };
    let mut best: Option<(BigInt, CertifiedValue)> = None;
    let mut r = BigInt::zero();
    while r <= scan_limit {
        let time = &m_n + &r;
        let corr = model.correlation_positions(base, base, &time);
        let ratio = corr
            .div(&base_measure)
            .ok_or(DynError::InconclusiveDepth)?;
        let better = match &best {
            None => true,
            Some((_, b)) => ratio.lo() > b.lo(),
        };
        if better {
            best = Some((r.clone(), ratio));
        }
        r += 1;
    }
    let (shift, ratio) = best.unwrap();
    let (time, shift_scanned) = if scan_limit.is_zero() {
        (m_n, None)
    } else {
        (&m_n + &shift, Some(shift))
    };
    Ok(RigidityFinding {
        stage: n,
        time,
        tower,
        chain,
        repeat: (a, b),
        ratio,
        base_measure,
        shift_scanned,
    })
}

/// Rigidity times from the consecutive-ordering structure: for each stage
/// `m`, the height of the heaviest tower returns a definite fraction of
/// every level of the reference castle.
pub fn co_rigidity_times(
    sys: &RankKSystem,
    solve: &MeasureSolve,
    castle_level: usize,
    stages: std::ops::RangeInclusive<usize>,
    depth: usize,
) -> Result<Vec<CoRigidityFinding>, RigidityError> {
    let co = co_condition(sys)?;
    if !co.is_empty() {
        return Err(RigidityError::Precondition(format!(
            "consecutive-ordering fails: {:?}",
            co[0]
        )));
    }
    let nd = nondegeneracy_check(sys)?;
    if !nd.is_empty() {
        return Err(RigidityError::Precondition(format!(
            "non-degeneracy fails at (stage, source, target) = {:?}",
            nd[0]
        )));
    }
    let view = sys.castle_view()?;
    if (1..=sys.horizon()).any(|n| !view.no_spacers_at(n)) {
        return Err(RigidityError::Precondition("spacers present".into()));
    }
    let model = TowerModel::new(sys, solve, depth)?;
    let k = sys.rank();
    let mut out = Vec::new();
    for m in stages {
        if m <= castle_level || m + 1 > depth {
            return Err(RigidityError::Precondition(format!(
                "need castle_level < stage < depth (stage {})",
                m
            )));
        }
        // heaviest tower at stage m
        let heights_m = sys.heights(m)?;
        let mut heavy = 1usize;
        let mut heavy_mass = CertifiedValue::zero();
        for j in 1..=k {
            let mass = solve.lambdas[m]
                .entry(j)
                .scale(&BigRational::from_integer(heights_m[j - 1].clone()));
            if j == 1 || mass.lo() > heavy_mass.lo() {
                heavy = j;
                heavy_mass = mass;
            }
        }
        let time = heights_m[heavy - 1].clone();
        let mut level_ratios = Vec::new();
        let mut min_ratio: Option<Rat> = None;
        let heights_l = sys.heights(castle_level)?;
        for j in 1..=k {
            let base = base_positions_at_depth(&model, sys, castle_level, j)?;
            let mut v = BigInt::zero();
            while &v < &heights_l[j - 1] {
                let level_pos: Vec<Vec<BigInt>> = base
                    .iter()
                    .map(|pos| pos.iter().map(|p| p + &v).collect())
                    .collect();
                let mu = mass_of_positions(&model, &level_pos);
                let corr = model.correlation_positions(&level_pos, &level_pos, &time);
                let ratio = corr.div(&mu).ok_or(DynError::InconclusiveDepth)?;
                min_ratio = Some(match min_ratio {
                    None => ratio.lo().clone(),
                    Some(r) => r.min(ratio.lo().clone()),
                });
                level_ratios.push((j, v.clone(), ratio));
                v += 1;
            }
        }
        out.push(CoRigidityFinding {
            stage: m,
            heavy_tower: heavy,
            time,
            level_ratios,
            min_ratio: min_ratio.unwrap(),
        });
    }
    Ok(out)
}

/// Partial-rigidity estimate over user-supplied times: the certified lower
/// bound of `μ(J ∩ T_m J)/μ(J)` minimized over the levels `J` of the
/// reference castle and over the times.
pub fn partial_rigidity_estimate(
    sys: &RankKSystem,
    solve: &MeasureSolve,
    times: &[BigInt],
    castle_level: usize,
    depth: usize,
) -> Result<PartialRigidityEstimate, RigidityError> {
    let model = TowerModel::new(sys, solve, depth)?;
    let heights_l = sys.heights(castle_level)?;
    let mut eta: Option<Rat> = None;
    let mut table = Vec::new();
    for j in 1..=sys.rank() {
        let base = base_positions_at_depth(&model, sys, castle_level, j)?;
        let mut v = BigInt::zero();
        while &v < &heights_l[j - 1] {
            let level_pos: Vec<Vec<BigInt>> = base
                .iter()
                .map(|pos| pos.iter().map(|p| p + &v).collect())
                .collect();
            let mu = mass_of_positions(&model, &level_pos);
            for time in times {
                let corr = model.correlation_positions(&level_pos, &level_pos, time);
                let ratio = corr.div(&mu).ok_or(DynError::InconclusiveDepth)?;
                eta = Some(match eta {
                    None => ratio.lo().clone(),
                    Some(e) => e.min(ratio.lo().clone()),
                });
                table.push((j, v.clone(), time.clone(), ratio));
            }
            v += 1;
        }
    }
    Ok(PartialRigidityEstimate {
        eta: eta.unwrap_or_else(Rat::zero),
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::certified::rat;

    fn thresh() -> Rat {
        rat(1, 1000)
    }

    #[test]
    fn exactness_examples() {
        let r2 = catalog::r2(6);
        let solve = r2.solve_invariant_measure(&rat(1, 1)).unwrap();
        let report = exactness_check(&r2, &solve, &thresh()).unwrap();
        assert!(report.exact);
        for m in &report.min_tower_mass {
            assert_eq!(m.lo(), &rat(1, 2));
        }

        let chacon = catalog::embed_rank_one(&catalog::chacon(6));
        let solve = chacon.solve_invariant_measure(&rat(1, 1)).unwrap();
        let report = exactness_check(&chacon, &solve, &thresh()).unwrap();
        assert!(!report.exact);
        assert!(report.no_spacers.iter().any(|&b| !b));

        let odo = catalog::embed_rank_one(&catalog::odometer(6));
        let solve = odo.solve_invariant_measure(&rat(1, 1)).unwrap();
        assert!(exactness_check(&odo, &solve, &thresh()).unwrap().exact);
    }

    #[test]
    fn quasi_exact_examples() {
        let chacon = catalog::embed_rank_one(&catalog::chacon(8));
        let solve = chacon.solve_invariant_measure(&rat(1, 1)).unwrap();
        let report = quasi_exact_params(&chacon, &solve, &thresh()).unwrap();
        assert_eq!(report.max_gap, BigInt::one());
        assert!(report.quasi_exact);

        let r2 = catalog::r2(6);
        let solve = r2.solve_invariant_measure(&rat(1, 1)).unwrap();
        let report = quasi_exact_params(&r2, &solve, &thresh()).unwrap();
        assert!(report.max_gap.is_zero());
        assert!(report.quasi_exact);

        let hk = catalog::embed_rank_one(&catalog::hajian_kakutani(8));
        let solve = hk.solve_invariant_measure(&rat(1, 1)).unwrap();
        let report = quasi_exact_params(&hk, &solve, &thresh()).unwrap();
        assert!(!report.quasi_exact, "gaps grow: {:?}", report.gap_per_stage);
    }

    #[test]
    fn co_condition_examples() {
        let r2 = catalog::r2(5);
        assert!(co_condition(&r2).unwrap().is_empty());
        let relaxed = co_relaxed_condition(&r2).unwrap();
        assert!(relaxed.r_bound.is_zero());
        assert_eq!(relaxed.l_bound, 0);

        let chacon = catalog::embed_rank_one(&catalog::chacon(5));
        assert!(co_condition(&chacon).unwrap().is_empty());
        let relaxed = co_relaxed_condition(&chacon).unwrap();
        assert_eq!(relaxed.r_bound, BigInt::one());
        assert_eq!(relaxed.l_bound, 0);

        // interleaved order [1,2,1,2] fails CO and has l_bound = 1
        let inter = catalog::r2_interleaved(4);
        let failures = co_condition(&inter).unwrap();
        assert!(!failures.is_empty());
        assert_eq!(co_relaxed_condition(&inter).unwrap().l_bound, 1);
    }

    #[test]
    fn nondegeneracy_examples() {
        assert!(nondegeneracy_check(&catalog::r2(5)).unwrap().is_empty());
        // fb has entries equal to 1
        assert!(!nondegeneracy_check(&catalog::fb(5)).unwrap().is_empty());
        let failures = nondegeneracy_check(&catalog::r2_entry_one(4)).unwrap();
        assert!(!failures.is_empty());
    }

    #[test]
    fn rigidity_time_on_r2() {
        let r2 = catalog::r2(8);
        let solve = r2.solve_invariant_measure(&rat(1, 1)).unwrap();
        for n in 1..=4 {
            let finding = find_rigidity_time(&r2, &solve, n, n + 3, None).unwrap();
            // m_n equals the height sum along the chain
            let heights = r2.heights(n).unwrap();
            let (a, b) = finding.repeat;
            let expect: BigInt = finding.chain[a..b]
                .iter()
                .map(|&j| heights[j - 1].clone())
                .sum();
            assert_eq!(finding.time, expect);
            assert!(finding.shift_scanned.is_none());
            // the repeated-base guarantee: ratio >= k^{-k} = 1/4, and the
            // placement count gives at least 1/2
            assert!(
                finding.ratio.lo() >= &rat(1, 2),
                "stage {}: {:?}",
                n,
                finding.ratio
            );
            assert!(finding.repeat.1 <= 2);
        }
        // tie-break order does not affect the guarantee
        for order in [[1usize, 2], [2usize, 1]] {
            let finding = find_rigidity_time(&r2, &solve, 2, 5, Some(&order)).unwrap();
            assert!(finding.ratio.lo() >= &rat(1, 4));
        }
    }

    #[test]
    fn rigidity_time_on_odometer() {
        let odo = catalog::embed_rank_one(&catalog::odometer(10));
        let solve = odo.solve_invariant_measure(&rat(1, 1)).unwrap();
        for n in 1..=6 {
            let finding = find_rigidity_time(&odo, &solve, n, n + 3, None).unwrap();
            assert_eq!(finding.time, BigInt::from(2).pow(n as u32));
            // rank one: the tower maps onto itself beneath the top
            assert!(finding.ratio.lo() > &rat(3, 4));
            assert!(finding.ratio.hi() <= &rat(1, 1));
        }
    }

    #[test]
    fn rigidity_time_on_quasi_exact_chacon() {
        let chacon = catalog::embed_rank_one(&catalog::chacon(10));
        let solve = chacon.solve_invariant_measure(&rat(1, 1)).unwrap();
        let finding = find_rigidity_time(&chacon, &solve, 3, 7, None).unwrap();
        assert!(finding.shift_scanned.is_some());
        // the best shift returns at least a third of the base
        assert!(
            finding.ratio.lo() >= &rat(3, 10),
            "ratio {:?}",
            finding.ratio
        );
    }

    #[test]
    fn rigidity_rejects_non_quasi_exact() {
        let hk = catalog::embed_rank_one(&catalog::hajian_kakutani(8));
        let solve = hk.solve_invariant_measure(&rat(1, 1)).unwrap();
        assert!(matches!(
            find_rigidity_time(&hk, &solve, 2, 5, None),
            Err(RigidityError::Precondition(_))
        ));
    }

    #[test]
    fn co_rigidity_examples() {
        let r2 = catalog::r2(8);
        let solve = r2.solve_invariant_measure(&rat(1, 1)).unwrap();
        let findings = co_rigidity_times(&r2, &solve, 1, 2..=4, 7).unwrap();
        for f in &findings {
            assert_eq!(f.time, BigInt::from(4).pow(f.stage as u32));
            assert!(f.min_ratio >= rat(2, 5), "stage {}: {}", f.stage, f.min_ratio);
            for (_, _, ratio) in &f.level_ratios {
                assert!(ratio.hi() <= &rat(1, 1));
            }
        }
        // non-CO mutation refuses
        let inter = catalog::r2_interleaved(6);
        let solve = inter.solve_invariant_measure(&rat(1, 1)).unwrap();
        assert!(matches!(
            co_rigidity_times(&inter, &solve, 1, 2..=3, 5),
            Err(RigidityError::Precondition(_))
        ));
        // k = 1: times h_m, ratios near 1
        let odo = catalog::embed_rank_one(&catalog::odometer(8));
        let solve = odo.solve_invariant_measure(&rat(1, 1)).unwrap();
        let findings = co_rigidity_times(&odo, &solve, 1, 2..=3, 7).unwrap();
        for f in &findings {
            assert!(f.min_ratio > rat(9, 10));
        }
    }

    #[test]
    fn partial_rigidity_examples() {
        // odometer with its true times: full rigidity up to escape
        let odo = catalog::embed_rank_one(&catalog::odometer(10));
        let solve = odo.solve_invariant_measure(&rat(1, 1)).unwrap();
        let times: Vec<BigInt> = (2..=4).map(|n| BigInt::from(2).pow(n)).collect();
        let est = partial_rigidity_estimate(&odo, &solve, &times, 1, 9).unwrap();
        assert!(est.eta > rat(9, 10), "eta = {}", est.eta);

        // r2 with found times
        let r2 = catalog::r2(8);
        let solve = r2.solve_invariant_measure(&rat(1, 1)).unwrap();
        let times: Vec<BigInt> = (2..=3)
            .map(|n| find_rigidity_time(&r2, &solve, n, n + 3, None).unwrap().time)
            .collect();
        let est = partial_rigidity_estimate(&r2, &solve, &times, 1, 7).unwrap();
        assert!(est.eta >= rat(1, 4) - rat(1, 100), "eta = {}", est.eta);

        // wrong times (primes) on r2: the estimate honestly collapses
        let primes: Vec<BigInt> = [2u32, 3, 5, 7, 11, 13]
            .iter()
            .map(|&p| BigInt::from(p))
            .collect();
        let est = partial_rigidity_estimate(&r2, &solve, &primes, 1, 7).unwrap();
        assert!(est.eta < rat(1, 20), "eta = {}", est.eta);
    }
}
