//! Exact arithmetic on elements and finite subsets of `G = Z^d`.
//!
//! Everything downstream talks to the group through this module, so the
//! additive structure of `Z^d` is confined here.  Elements carry
//! arbitrary-precision coordinates.  Sets are finite and immutable after
//! construction; axis-aligned boxes (the tower shapes of most systems) are
//! stored implicitly so their cardinality can be astronomically large, while
//! every other set is an explicit collection of points.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Materialization guard: explicit enumerations beyond this size are refused.
const MAT_CAP: u64 = 8_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("operation requires a nonempty set")]
    EmptySet,
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),
    #[error("set too large to materialize: {0}")]
    TooLarge(String),
}

/// A point of `Z^d` with signed arbitrary-precision coordinates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupElement {
    coords: Vec<BigInt>,
}

impl GroupElement {
    pub fn new(coords: Vec<BigInt>) -> Self {
        assert!(!coords.is_empty(), "dimension must be at least 1");
        GroupElement { coords }
    }

    pub fn from_i64s(coords: &[i64]) -> Self {
        Self::new(coords.iter().map(|&c| BigInt::from(c)).collect())
    }

    /// The identity of `Z^d` (written additively).
    pub fn zero(dim: usize) -> Self {
        Self::new(vec![BigInt::zero(); dim])
    }

    /// Shorthand for a point of `Z^1`.
    pub fn scalar<T: Into<BigInt>>(v: T) -> Self {
        Self::new(vec![v.into()])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[BigInt] {
        &self.coords
    }

    /// The single coordinate of a `Z^1` element.
    pub fn as_scalar(&self) -> &BigInt {
        assert_eq!(self.dim(), 1, "as_scalar on a multi-dimensional element");
        &self.coords[0]
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &GroupElement) -> GroupElement {
        debug_assert_eq!(self.dim(), other.dim());
        GroupElement::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn neg(&self) -> GroupElement {
        GroupElement::new(self.coords.iter().map(|c| -c).collect())
    }

    pub fn sub(&self, other: &GroupElement) -> GroupElement {
        self.add(&other.neg())
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coords.len() == 1 {
            write!(f, "{}", self.coords[0])
        } else {
            write!(f, "(")?;
            for (i, c) in self.coords.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", c)?;
            }
            write!(f, ")")
        }
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq)]
enum Repr {
    Explicit(BTreeSet<GroupElement>),
    /// Full box `[lo_1, hi_1] x ... x [lo_d, hi_d]`, both ends inclusive,
    /// always nonempty.
    Box { lo: Vec<BigInt>, hi: Vec<BigInt> },
}

/// A finite subset of `Z^d`.
#[derive(Clone)]
pub struct GroupSet {
    dim: usize,
    repr: Repr,
}

impl GroupSet {
    pub fn empty(dim: usize) -> Self {
        assert!(dim >= 1);
        GroupSet {
            dim,
            repr: Repr::Explicit(BTreeSet::new()),
        }
    }

    pub fn singleton(g: GroupElement) -> Self {
        let dim = g.dim();
        let mut set = BTreeSet::new();
        set.insert(g);
        GroupSet {
            dim,
            repr: Repr::Explicit(set),
        }
    }

    pub fn from_elems<I: IntoIterator<Item = GroupElement>>(dim: usize, it: I) -> Self {
        let mut set = BTreeSet::new();
        for g in it {
            assert_eq!(g.dim(), dim, "element dimension mismatch");
            set.insert(g);
        }
        GroupSet {
            dim,
            repr: Repr::Explicit(set),
        }
    }

    pub fn from_i64s(dim: usize, pts: &[&[i64]]) -> Self {
        Self::from_elems(dim, pts.iter().map(|p| GroupElement::from_i64s(p)))
    }

    /// `{lo, lo+1, ..., hi-1}` in `Z^1`.
    pub fn interval<T: Into<BigInt>, U: Into<BigInt>>(lo: T, hi: U) -> Self {
        let (lo, hi) = (lo.into(), hi.into());
        if lo >= hi {
            return Self::empty(1);
        }
        GroupSet {
            dim: 1,
            repr: Repr::Box {
                lo: vec![lo],
                hi: vec![hi - 1],
            },
        }
    }

    /// The box `[0, sides[0]) x ... x [0, sides[d-1])`.
    pub fn box_at_origin(sides: &[BigInt]) -> Self {
        let dim = sides.len();
        if sides.iter().any(|s| !s.is_positive()) {
            return Self::empty(dim);
        }
        GroupSet {
            dim,
            repr: Repr::Box {
                lo: vec![BigInt::zero(); dim],
                hi: sides.iter().map(|s| s - 1).collect(),
            },
        }
    }

    /// Box with inclusive corner coordinates.
    pub fn box_corners(lo: Vec<BigInt>, hi: Vec<BigInt>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
        GroupSet {
            dim: lo.len(),
            repr: Repr::Box { lo, hi },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Exact cardinality.
    pub fn card(&self) -> BigInt {
        match &self.repr {
            Repr::Explicit(s) => BigInt::from(s.len()),
            Repr::Box { lo, hi } => {
                let mut v = BigInt::one();
                for (a, b) in lo.iter().zip(hi) {
                    v *= b - a + 1;
                }
                v
            }
        }
    }

    /// Cardinality as `usize`; panics if it does not fit.
    pub fn len(&self) -> usize {
        self.card()
            .to_usize()
            .expect("set cardinality exceeds usize")
    }

    pub fn is_empty(&self) -> bool {
        match &self.repr {
            Repr::Explicit(s) => s.is_empty(),
            Repr::Box { .. } => false,
        }
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        if g.dim() != self.dim {
            return false;
        }
        match &self.repr {
            Repr::Explicit(s) => s.contains(g),
            Repr::Box { lo, hi } => g
                .coords()
                .iter()
                .enumerate()
                .all(|(i, c)| &lo[i] <= c && c <= &hi[i]),
        }
    }

    fn materializable(&self) -> bool {
        self.card() <= BigInt::from(MAT_CAP)
    }

    /// Iterates the elements.  Panics on boxes above the materialization cap;
    /// check [`card`](Self::card) first when the size is not known.
    pub fn iter(&self) -> Box<dyn Iterator<Item = GroupElement> + '_> {
        match &self.repr {
            Repr::Explicit(s) => Box::new(s.iter().cloned()),
            Repr::Box { lo, hi } => {
                assert!(
                    self.materializable(),
                    "iterating a box of cardinality {}",
                    self.card()
                );
                let lo = lo.clone();
                let hi = hi.clone();
                let mut cur: Option<Vec<BigInt>> = Some(lo.clone());
                Box::new(std::iter::from_fn(move || {
                    let c = cur.clone()?;
                    // advance odometer-style
                    let mut next = c.clone();
                    let mut axis = lo.len();
                    loop {
                        if axis == 0 {
                            cur = None;
                            break;
                        }
                        axis -= 1;
                        next[axis] += 1;
                        if next[axis] <= hi[axis] {
                            for a in (axis + 1)..lo.len() {
                                next[a] = lo[a].clone();
                            }
                            cur = Some(next);
                            break;
                        }
                    }
                    Some(GroupElement::new(c))
                }))
            }
        }
    }

    fn to_explicit(&self) -> Result<BTreeSet<GroupElement>, GroupError> {
        match &self.repr {
            Repr::Explicit(s) => Ok(s.clone()),
            Repr::Box { .. } => {
                if !self.materializable() {
                    return Err(GroupError::TooLarge(format!(
                        "cardinality {}",
                        self.card()
                    )));
                }
                Ok(self.iter().collect())
            }
        }
    }

    pub fn insert(&mut self, g: GroupElement) {
        assert_eq!(g.dim(), self.dim);
        let mut s = self.to_explicit().expect("insert into a huge box");
        s.insert(g);
        self.repr = Repr::Explicit(s);
    }

    fn check_dim(&self, other: &GroupSet) -> Result<(), GroupError> {
        if self.dim != other.dim {
            Err(GroupError::DimensionMismatch(self.dim, other.dim))
        } else {
            Ok(())
        }
    }

    /// `{a + b : a in self, b in other}`, duplicates collapsed.
    /// Box + box is again a box; mixed shapes are materialized under the cap.
    pub fn sumset(&self, other: &GroupSet) -> Result<GroupSet, GroupError> {
        self.check_dim(other)?;
        if self.is_empty() || other.is_empty() {
            return Ok(GroupSet::empty(self.dim));
        }
        if let (Repr::Box { lo: a_lo, hi: a_hi }, Repr::Box { lo: b_lo, hi: b_hi }) =
            (&self.repr, &other.repr)
        {
            return Ok(GroupSet {
                dim: self.dim,
                repr: Repr::Box {
                    lo: a_lo.iter().zip(b_lo).map(|(x, y)| x + y).collect(),
                    hi: a_hi.iter().zip(b_hi).map(|(x, y)| x + y).collect(),
                },
            });
        }
        let bound = self.card() * other.card();
        if bound > BigInt::from(MAT_CAP) {
            return Err(GroupError::TooLarge(format!(
                "sumset of cardinalities {} and {}",
                self.card(),
                other.card()
            )));
        }
        let mut out = BTreeSet::new();
        for a in self.iter() {
            for b in other.iter() {
                out.insert(a.add(&b));
            }
        }
        Ok(GroupSet {
            dim: self.dim,
            repr: Repr::Explicit(out),
        })
    }

    /// `self - other = self + (-other)`.
    pub fn diffset(&self, other: &GroupSet) -> Result<GroupSet, GroupError> {
        self.sumset(&other.negate())
    }

    pub fn negate(&self) -> GroupSet {
        match &self.repr {
            Repr::Explicit(s) => GroupSet {
                dim: self.dim,
                repr: Repr::Explicit(s.iter().map(|g| g.neg()).collect()),
            },
            Repr::Box { lo, hi } => GroupSet {
                dim: self.dim,
                repr: Repr::Box {
                    lo: hi.iter().map(|v| -v).collect(),
                    hi: lo.iter().map(|v| -v).collect(),
                },
            },
        }
    }

    pub fn translate(&self, g: &GroupElement) -> GroupSet {
        assert_eq!(g.dim(), self.dim);
        match &self.repr {
            Repr::Explicit(s) => GroupSet {
                dim: self.dim,
                repr: Repr::Explicit(s.iter().map(|e| e.add(g)).collect()),
            },
            Repr::Box { lo, hi } => GroupSet {
                dim: self.dim,
                repr: Repr::Box {
                    lo: lo.iter().zip(g.coords()).map(|(a, b)| a + b).collect(),
                    hi: hi.iter().zip(g.coords()).map(|(a, b)| a + b).collect(),
                },
            },
        }
    }

    pub fn union(&self, other: &GroupSet) -> Result<GroupSet, GroupError> {
        self.check_dim(other)?;
        let mut s = self.to_explicit()?;
        s.extend(other.to_explicit()?);
        Ok(GroupSet {
            dim: self.dim,
            repr: Repr::Explicit(s),
        })
    }

    pub fn intersection(&self, other: &GroupSet) -> Result<GroupSet, GroupError> {
        self.check_dim(other)?;
        if let (Repr::Box { lo: a_lo, hi: a_hi }, Repr::Box { lo: b_lo, hi: b_hi }) =
            (&self.repr, &other.repr)
        {
            let lo: Vec<BigInt> = a_lo
                .iter()
                .zip(b_lo)
                .map(|(x, y)| x.clone().max(y.clone()))
                .collect();
            let hi: Vec<BigInt> = a_hi
                .iter()
                .zip(b_hi)
                .map(|(x, y)| x.clone().min(y.clone()))
                .collect();
            if lo.iter().zip(&hi).any(|(a, b)| a > b) {
                return Ok(GroupSet::empty(self.dim));
            }
            return Ok(GroupSet {
                dim: self.dim,
                repr: Repr::Box { lo, hi },
            });
        }
        // iterate the smaller explicit side
        let (small, big) = if self.card() <= other.card() {
            (self, other)
        } else {
            (other, self)
        };
        let small_set = small.to_explicit()?;
        Ok(GroupSet {
            dim: self.dim,
            repr: Repr::Explicit(
                small_set
                    .into_iter()
                    .filter(|g| big.contains(g))
                    .collect(),
            ),
        })
    }

    pub fn is_subset(&self, other: &GroupSet) -> bool {
        match (&self.repr, &other.repr) {
            (Repr::Box { lo: a_lo, hi: a_hi }, Repr::Box { lo: b_lo, hi: b_hi }) => {
                a_lo.iter().zip(b_lo).all(|(a, b)| a >= b)
                    && a_hi.iter().zip(b_hi).all(|(a, b)| a <= b)
            }
            (Repr::Explicit(s), _) => s.iter().all(|g| other.contains(g)),
            (Repr::Box { .. }, Repr::Explicit(_)) => {
                assert!(
                    self.materializable(),
                    "subset test would materialize a huge box"
                );
                self.iter().all(|g| other.contains(&g))
            }
        }
    }

    /// Følner defect `#((g + F) Δ F) / #F` of a translation, in `[0, 2]`.
    pub fn folner_defect(&self, g: &GroupElement) -> Result<BigRational, GroupError> {
        if self.is_empty() {
            return Err(GroupError::EmptySet);
        }
        match &self.repr {
            Repr::Box { lo, hi } => {
                // overlap of the box with its translate is a box product
                let mut overlap = BigInt::one();
                for (i, (a, b)) in lo.iter().zip(hi).enumerate() {
                    let side: BigInt = b - a + 1;
                    let shift = g.coords()[i].abs();
                    let o: BigInt = side - shift;
                    if o.is_positive() {
                        overlap *= o;
                    } else {
                        overlap = BigInt::zero();
                        break;
                    }
                }
                let card = self.card();
                let sym = (&card - &overlap) * 2;
                Ok(BigRational::new(sym, card))
            }
            Repr::Explicit(s) => {
                let shifted: BTreeSet<GroupElement> = s.iter().map(|e| e.add(g)).collect();
                let sym = shifted.symmetric_difference(s).count();
                Ok(BigRational::new(
                    BigInt::from(sym),
                    BigInt::from(s.len()),
                ))
            }
        }
    }

    /// Checks that the translates `F + c`, `c in C`, are pairwise disjoint.
    /// Returns the first witnessing pair on failure.
    ///
    /// Translates collide exactly when `c - c'` lies in `F - F`, so only the
    /// difference window of `F` is needed, never the translates themselves.
    pub fn disjoint_translates(
        f: &GroupSet,
        c: &GroupSet,
    ) -> Result<Result<(), (GroupElement, GroupElement)>, GroupError> {
        f.check_dim(c)?;
        let window = f.diffset(f)?;
        let cs: Vec<GroupElement> = c.iter().collect();
        for i in 0..cs.len() {
            for j in (i + 1)..cs.len() {
                if window.contains(&cs[i].sub(&cs[j])) {
                    return Ok(Err((cs[i].clone(), cs[j].clone())));
                }
            }
        }
        Ok(Ok(()))
    }

    /// Whether the set is a full box `[lo_1, hi_1] x ... x [lo_d, hi_d]`;
    /// returns the per-coordinate inclusive bounds.
    pub fn as_box(&self) -> Option<(Vec<BigInt>, Vec<BigInt>)> {
        match &self.repr {
            Repr::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            Repr::Explicit(s) => {
                if s.is_empty() {
                    return None;
                }
                let d = self.dim;
                let mut lo: Vec<BigInt> = s.iter().next().unwrap().coords().to_vec();
                let mut hi = lo.clone();
                for g in s {
                    for (axis, c) in g.coords().iter().enumerate() {
                        if c < &lo[axis] {
                            lo[axis] = c.clone();
                        }
                        if c > &hi[axis] {
                            hi[axis] = c.clone();
                        }
                    }
                }
                let mut volume = BigInt::one();
                for axis in 0..d {
                    volume *= &hi[axis] - &lo[axis] + 1;
                }
                if BigInt::from(s.len()) == volume {
                    Some((lo, hi))
                } else {
                    None
                }
            }
        }
    }

    /// Interval bounds `[0, h)` of a one-dimensional box at the origin.
    pub fn interval_height(&self) -> Option<BigInt> {
        if self.dim != 1 {
            return None;
        }
        let (lo, hi) = self.as_box()?;
        if lo[0].is_zero() {
            Some(&hi[0] + 1)
        } else {
            None
        }
    }

    /// Covers `F - F` by pairwise disjoint translates of `F`, for `F` a box
    /// at the origin.  Returns `(K, offsets)` with `K = #offsets = 2^e`,
    /// where `e` is the number of coordinates with side length `> 1`.
    pub fn cover_by_translates(&self) -> Result<(usize, GroupSet), GroupError> {
        let (lo, hi) = self.as_box().ok_or_else(|| {
            GroupError::UnsupportedShape("cover_by_translates requires a box".into())
        })?;
        if lo.iter().any(|l| !l.is_zero()) {
            return Err(GroupError::UnsupportedShape(
                "cover_by_translates requires a box at the origin".into(),
            ));
        }
        // Per coordinate of side h > 1, the window [-(h-1), h-1] is covered
        // by the two translates at -(h-1) and 1 of [0, h); a side-1
        // coordinate is covered by the translate at 0.
        let mut offsets = vec![vec![]];
        for h in &hi {
            let choices: Vec<BigInt> = if h.is_zero() {
                vec![BigInt::zero()]
            } else {
                vec![-h.clone(), BigInt::one()]
            };
            let mut next = Vec::new();
            for base in &offsets {
                for c in &choices {
                    let mut v: Vec<BigInt> = base.clone();
                    v.push(c.clone());
                    next.push(v);
                }
            }
            offsets = next;
        }
        let set = GroupSet::from_elems(self.dim, offsets.into_iter().map(GroupElement::new));
        Ok((set.len(), set))
    }
}

impl PartialEq for GroupSet {
    fn eq(&self, other: &Self) -> bool {
        if self.dim != other.dim || self.card() != other.card() {
            return false;
        }
        match (&self.repr, &other.repr) {
            (Repr::Explicit(a), Repr::Explicit(b)) => a == b,
            (Repr::Box { lo: a_lo, hi: a_hi }, Repr::Box { lo: b_lo, hi: b_hi }) => {
                a_lo == b_lo && a_hi == b_hi
            }
            _ => {
                // same cardinality; compare via membership of the explicit side
                let (e, b) = match &self.repr {
                    Repr::Explicit(e) => (e, other),
                    _ => match &other.repr {
                        Repr::Explicit(e) => (e, self),
                        _ => unreachable!(),
                    },
                };
                e.iter().all(|g| b.contains(g))
            }
        }
    }
}

impl Eq for GroupSet {}

impl fmt::Debug for GroupSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Box { lo, hi } if !self.materializable() => {
                write!(f, "Box[{:?}..={:?}]", lo, hi)
            }
            _ => {
                write!(f, "{{")?;
                for (i, g) in self.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", g)?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zset(pts: &[i64]) -> GroupSet {
        GroupSet::from_elems(1, pts.iter().map(|&p| GroupElement::scalar(p)))
    }

    #[test]
    fn sumset_examples() {
        // {0,1}+{0,2} = {0,1,2,3}
        assert_eq!(
            zset(&[0, 1]).sumset(&zset(&[0, 2])).unwrap(),
            zset(&[0, 1, 2, 3])
        );
        // absorbing empty set
        assert!(zset(&[0, 1])
            .sumset(&GroupSet::empty(1))
            .unwrap()
            .is_empty());
        // exhaustive enumeration oracle: {0,1,3}+{0,4,9}
        let mut expect = BTreeSet::new();
        for a in [0i64, 1, 3] {
            for b in [0i64, 4, 9] {
                expect.insert(a + b);
            }
        }
        let expect: Vec<i64> = expect.into_iter().collect();
        assert_eq!(
            zset(&[0, 1, 3]).sumset(&zset(&[0, 4, 9])).unwrap(),
            zset(&expect)
        );
        assert_eq!(expect, vec![0, 1, 3, 4, 5, 7, 9, 10, 12]);
    }

    #[test]
    fn sumset_of_boxes_stays_implicit() {
        let a = GroupSet::interval(0, 10);
        let b = GroupSet::interval(0, 5);
        let s = a.sumset(&b).unwrap();
        assert_eq!(s, GroupSet::interval(0, 14));
        // interval + explicit = explicit union of ranges
        let t = a.sumset(&zset(&[0, 100])).unwrap();
        assert_eq!(t.len(), 20);
        assert!(t.contains(&GroupElement::scalar(105)));
    }

    #[test]
    fn sumset_dimension_mismatch() {
        let a = zset(&[0]);
        let b = GroupSet::from_i64s(2, &[&[0, 0]]);
        assert_eq!(
            a.sumset(&b).unwrap_err(),
            GroupError::DimensionMismatch(1, 2)
        );
    }

    #[test]
    fn diffset_examples() {
        assert_eq!(
            GroupSet::interval(0, 4).diffset(&GroupSet::interval(0, 4)).unwrap(),
            GroupSet::box_corners(vec![BigInt::from(-3)], vec![BigInt::from(3)])
        );
        assert_eq!(zset(&[0]).diffset(&zset(&[0])).unwrap(), zset(&[0]));
        assert_eq!(
            zset(&[0, 100]).diffset(&zset(&[0, 100])).unwrap(),
            zset(&[-100, 0, 100])
        );
    }

    #[test]
    fn folner_defect_examples() {
        let f = GroupSet::interval(0, 8);
        assert_eq!(
            f.folner_defect(&GroupElement::scalar(1)).unwrap(),
            BigRational::new(BigInt::from(2), BigInt::from(8))
        );
        assert_eq!(
            f.folner_defect(&GroupElement::zero(1)).unwrap(),
            BigRational::zero()
        );
        // unit shift of a 10x10 box: 20/100
        let b = GroupSet::box_at_origin(&[BigInt::from(10), BigInt::from(10)]);
        assert_eq!(
            b.folner_defect(&GroupElement::from_i64s(&[1, 0])).unwrap(),
            BigRational::new(BigInt::from(1), BigInt::from(5))
        );
        // symmetry under g -> -g, and agreement with the explicit count
        let g = GroupElement::from_i64s(&[3, -2]);
        assert_eq!(
            b.folner_defect(&g).unwrap(),
            b.folner_defect(&g.neg()).unwrap()
        );
        let explicit = GroupSet::from_elems(2, b.iter());
        assert_eq!(b.folner_defect(&g).unwrap(), explicit.folner_defect(&g).unwrap());
        // defect of a unit vector on [0,h)^d is 2/h
        assert_eq!(
            b.folner_defect(&GroupElement::from_i64s(&[0, 1])).unwrap(),
            BigRational::new(BigInt::from(2), BigInt::from(10))
        );
    }

    #[test]
    fn disjoint_translates_examples() {
        let f = GroupSet::interval(0, 4);
        assert!(GroupSet::disjoint_translates(&f, &zset(&[0, 4, 9]))
            .unwrap()
            .is_ok());
        let witness = GroupSet::disjoint_translates(&f, &zset(&[0, 2]))
            .unwrap()
            .unwrap_err();
        assert_eq!(witness, (GroupElement::scalar(0), GroupElement::scalar(2)));
        let point = zset(&[0]);
        assert!(
            GroupSet::disjoint_translates(&point, &zset(&[-5, 0, 3, 17]))
                .unwrap()
                .is_ok()
        );
    }

    #[test]
    fn cover_by_translates_examples() {
        let f = GroupSet::interval(0, 4);
        let (k, offsets) = f.cover_by_translates().unwrap();
        assert_eq!(k, 2);
        assert_eq!(offsets, zset(&[-3, 1]));
        // the covering property, checked exhaustively
        let window = f.diffset(&f).unwrap();
        let mut union = GroupSet::empty(1);
        for off in offsets.iter() {
            let t = f.translate(&off);
            assert!(t.intersection(&union).unwrap().is_empty());
            union = union.union(&t).unwrap();
        }
        assert!(window.is_subset(&union));

        let point = GroupSet::interval(0, 1);
        let (k1, off1) = point.cover_by_translates().unwrap();
        assert_eq!(k1, 1);
        assert_eq!(off1, zset(&[0]));

        let square = GroupSet::box_at_origin(&[BigInt::from(2), BigInt::from(2)]);
        let (k2, off2) = square.cover_by_translates().unwrap();
        assert_eq!(k2, 4);
        assert_eq!(
            off2,
            GroupSet::from_i64s(2, &[&[-1, -1], &[-1, 1], &[1, -1], &[1, 1]])
        );
        let window2 = square.diffset(&square).unwrap();
        let mut union2 = GroupSet::empty(2);
        for off in off2.iter() {
            let t = square.translate(&off);
            assert!(t.intersection(&union2).unwrap().is_empty());
            union2 = union2.union(&t).unwrap();
        }
        assert!(window2.is_subset(&union2));
    }

    #[test]
    fn cover_rejects_non_boxes() {
        let s = zset(&[0, 2]);
        assert!(matches!(
            s.cover_by_translates(),
            Err(GroupError::UnsupportedShape(_))
        ));
    }

    #[test]
    fn box_detection_and_membership() {
        let b = GroupSet::box_at_origin(&[BigInt::from(3), BigInt::from(2)]);
        assert_eq!(b.len(), 6);
        let (lo, hi) = b.as_box().unwrap();
        assert_eq!(lo, vec![BigInt::zero(), BigInt::zero()]);
        assert_eq!(hi, vec![BigInt::from(2), BigInt::from(1)]);
        assert!(zset(&[0, 2]).as_box().is_none());
        // explicit box detection
        let e = GroupSet::from_i64s(1, &[&[3], &[4], &[5]]);
        let (lo, hi) = e.as_box().unwrap();
        assert_eq!((lo[0].clone(), hi[0].clone()), (BigInt::from(3), BigInt::from(5)));
        // huge boxes answer membership without materialization
        let huge = GroupSet::box_at_origin(&[BigInt::from(10).pow(20), BigInt::from(10).pow(20)]);
        assert!(huge.contains(&GroupElement::from_i64s(&[12345, 0])));
        assert!(!huge.contains(&GroupElement::from_i64s(&[-1, 0])));
        assert_eq!(huge.card(), BigInt::from(10).pow(40));
    }

    #[test]
    fn interval_height_helper() {
        assert_eq!(
            GroupSet::interval(0, 13).interval_height(),
            Some(BigInt::from(13))
        );
        assert_eq!(GroupSet::interval(1, 5).interval_height(), None);
        assert_eq!(zset(&[0, 1, 2]).interval_height(), Some(BigInt::from(3)));
        assert_eq!(zset(&[0, 2]).interval_height(), None);
    }
}
