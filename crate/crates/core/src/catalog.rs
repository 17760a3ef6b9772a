//! Built-in example systems.
//!
//! Each constructor takes a horizon and produces the stored prefix together
//! with whatever closed-form certificates the defining rule provides
//! (total-measure value, spacer-free tails, large-holes tails).  These are
//! the systems the command-line tool exposes by name.

use crate::group::{GroupElement, GroupSet};
use crate::rankk::{Edge, EdgeSet, MarkedElement, MarkedSet, RankKSystem};
use crate::rankone::{MeasureCert, RankOneSystem, TailCertificates};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

/// Dyadic odometer: `C_{n+1} = {0, h_n}`, `F_n = [0, 2^n)`.
pub fn odometer(horizon: usize) -> RankOneSystem {
    let mut f = vec![GroupSet::interval(0, 1)];
    let mut c = Vec::new();
    let mut h = BigInt::one();
    for _ in 0..horizon {
        c.push(GroupSet::from_elems(
            1,
            [BigInt::from(0), h.clone()]
                .into_iter()
                .map(|v| GroupElement::new(vec![v])),
        ));
        h *= 2;
        f.push(GroupSet::interval(0, h.clone()));
    }
    RankOneSystem::new("odometer", 1, f, c)
        .with_measure_cert(MeasureCert::Finite(BigRational::one()))
        .with_tail_certificates(TailCertificates {
            no_spacer_tail: true,
            large_holes_tail: false,
        })
}

/// Chacon: `C_{n+1} = {0, h_n, 2h_n + 1}`, `h_{n+1} = 3h_n + 1`.
pub fn chacon(horizon: usize) -> RankOneSystem {
    let mut f = vec![GroupSet::interval(0, 1)];
    let mut c = Vec::new();
    let mut h = BigInt::one();
    for _ in 0..horizon {
        c.push(GroupSet::from_elems(
            1,
            [
                BigInt::from(0),
                h.clone(),
                &h * 2 + 1,
            ]
            .into_iter()
            .map(|v| GroupElement::new(vec![v])),
        ));
        h = &h * 3 + 1;
        f.push(GroupSet::interval(0, h.clone()));
    }
    // #F_n / (#C_1...#C_n) = ((3^{n+1}-1)/2) / 3^n -> 3/2
    RankOneSystem::new("chacon", 1, f, c).with_measure_cert(MeasureCert::Finite(
        BigRational::new(BigInt::from(3), BigInt::from(2)),
    ))
}

/// Hajian–Kakutani-type infinite measure system:
/// `C_{n+1} = {0, 3h_n}`, `h_{n+1} = 4h_n`.
pub fn hajian_kakutani(horizon: usize) -> RankOneSystem {
    let mut f = vec![GroupSet::interval(0, 1)];
    let mut c = Vec::new();
    let mut h = BigInt::one();
    for _ in 0..horizon {
        c.push(GroupSet::from_elems(
            1,
            [BigInt::from(0), &h * 3]
                .into_iter()
                .map(|v| GroupElement::new(vec![v])),
        ));
        h *= 4;
        f.push(GroupSet::interval(0, h.clone()));
    }
    // #F_n / 2^n = 2^n diverges
    RankOneSystem::new("hk", 1, f, c)
        .with_measure_cert(MeasureCert::Infinite)
        .with_tail_certificates(TailCertificates {
            no_spacer_tail: false,
            large_holes_tail: true,
        })
}

/// `Z^2` system with widely separated placements:
/// `F_n = [0, s_n)^2` with `s_0 = 1`, `s_{n+1} = (v_factor + 1) s_n`, and
/// `C_{n+1} = {0, v_n e_1}` with `v_n = v_factor * s_n`.
///
/// With `v_factor = 10` the large-holes condition
/// `(g + F_n + F_n - F_n - F_n) ∩ (C_{n+1} - C_{n+1}) = {0}` holds at every
/// stage for every fixed `g`, since the window has radius `2(s_n - 1) + |g|`
/// per axis while the placements sit `10 s_n` apart.
pub fn z2_large_holes(horizon: usize, v_factor: u32) -> RankOneSystem {
    assert!(v_factor >= 3, "placements must clear the tower diameter");
    let mut side = BigInt::one();
    let mut f = vec![GroupSet::from_i64s(2, &[&[0, 0]])];
    let mut c = Vec::new();
    for _ in 0..horizon {
        let v = &side * v_factor;
        c.push(GroupSet::from_elems(
            2,
            [
                GroupElement::new(vec![BigInt::from(0), BigInt::from(0)]),
                GroupElement::new(vec![v, BigInt::from(0)]),
            ],
        ));
        side *= v_factor + 1;
        f.push(GroupSet::box_at_origin(&[side.clone(), side.clone()]));
    }
    RankOneSystem::new("z2lh", 2, f, c)
        .with_measure_cert(MeasureCert::Infinite)
        .with_tail_certificates(TailCertificates {
            no_spacer_tail: false,
            large_holes_tail: v_factor >= 10,
        })
}

/// Negative control for the large-holes condition: identical to
/// [`z2_large_holes`] at stage 0, but from stage 1 on the second placement
/// sits only `2(s_n - 1)` to the right, inside the correlation window of
/// any unit generator.
pub fn z2_small_holes(horizon: usize) -> RankOneSystem {
    let mut side = BigInt::one();
    let mut f = vec![GroupSet::from_i64s(2, &[&[0, 0]])];
    let mut c = Vec::new();
    for n in 0..horizon {
        let v = if n == 0 {
            BigInt::from(10)
        } else {
            &side * 2 - 2
        };
        c.push(GroupSet::from_elems(
            2,
            [
                GroupElement::new(vec![BigInt::from(0), BigInt::from(0)]),
                GroupElement::new(vec![v, BigInt::from(0)]),
            ],
        ));
        side = if n == 0 { BigInt::from(11) } else { &side * 3 };
        f.push(GroupSet::box_at_origin(&[side.clone(), side.clone()]));
    }
    RankOneSystem::new("z2sh", 2, f, c).with_measure_cert(MeasureCert::Infinite)
}

fn edge(src: usize, offset: BigInt, tgt: usize) -> Edge {
    Edge::new(src, GroupElement::new(vec![offset]), tgt)
}

/// Symmetric rank-2 system: every stage cuts both towers in two and stacks
/// tower 1 as `[1,1,2,2]` and tower 2 as `[2,2,1,1]`; all heights equal.
pub fn r2(horizon: usize) -> RankKSystem {
    let mut f = vec![MarkedSet::zero_base(1, 2)];
    let mut c = Vec::new();
    let mut h = BigInt::one();
    for _ in 0..horizon {
        let mut edges = EdgeSet::new(1, 2);
        // tower 1: [1, 1, 2, 2]
        edges.insert(edge(1, BigInt::from(0), 1));
        edges.insert(edge(1, h.clone(), 1));
        edges.insert(edge(2, &h * 2, 1));
        edges.insert(edge(2, &h * 3, 1));
        // tower 2: [2, 2, 1, 1]
        edges.insert(edge(2, BigInt::from(0), 2));
        edges.insert(edge(2, h.clone(), 2));
        edges.insert(edge(1, &h * 2, 2));
        edges.insert(edge(1, &h * 3, 2));
        c.push(edges);
        h *= 4;
        f.push(MarkedSet::intervals(2, &[h.clone(), h.clone()]));
    }
    RankKSystem::new("r2", 1, 2, f, c).with_finite_measure(BigRational::one())
}

/// `r2` with one spacer added on top of tower 1 at every stage: the
/// quasi-exact witness.  Tower heights satisfy `h^1 = h^2 + 1` from stage 1.
pub fn r2s(horizon: usize) -> RankKSystem {
    let mut f = vec![MarkedSet::zero_base(1, 2)];
    let mut c = Vec::new();
    let mut h1 = BigInt::one();
    let mut h2 = BigInt::one();
    for _ in 0..horizon {
        let mut edges = EdgeSet::new(1, 2);
        // tower 1: [1, 1, 2, 2] plus one spacer on top
        edges.insert(edge(1, BigInt::from(0), 1));
        edges.insert(edge(1, h1.clone(), 1));
        edges.insert(edge(2, &h1 * 2, 1));
        edges.insert(edge(2, &h1 * 2 + &h2, 1));
        // tower 2: [2, 2, 1, 1]
        edges.insert(edge(2, BigInt::from(0), 2));
        edges.insert(edge(2, h2.clone(), 2));
        edges.insert(edge(1, &h2 * 2, 2));
        edges.insert(edge(1, &h2 * 2 + &h1, 2));
        c.push(edges);
        let new_h1 = &h1 * 2 + &h2 * 2 + 1;
        let new_h2 = &h1 * 2 + &h2 * 2;
        h1 = new_h1;
        h2 = new_h2;
        f.push(MarkedSet::intervals(2, &[h1.clone(), h2.clone()]));
    }
    // total measure: sum_n of the extra spacer mass on top of the tiling,
    // mu(X_0) = 1 gives lambda_n = 4^{-n}/2 and total 1 + sum 4^{-n}/2 = 7/6
    RankKSystem::new("r2s", 1, 2, f, c).with_finite_measure(BigRational::new(
        BigInt::from(7),
        BigInt::from(6),
    ))
}

/// Fibonacci-like rank-2 system with incidence matrix `[[2,1],[1,1]]`:
/// tower 1 stacks `[1, 1, 2]`, tower 2 stacks `[2, 1]`.
pub fn fb(horizon: usize) -> RankKSystem {
    let mut f = vec![MarkedSet::zero_base(1, 2)];
    let mut c = Vec::new();
    let mut h1 = BigInt::one();
    let mut h2 = BigInt::one();
    for _ in 0..horizon {
        let mut edges = EdgeSet::new(1, 2);
        // tower 1: [1, 1, 2]
        edges.insert(edge(1, BigInt::from(0), 1));
        edges.insert(edge(1, h1.clone(), 1));
        edges.insert(edge(2, &h1 * 2, 1));
        // tower 2: [2, 1]
        edges.insert(edge(2, BigInt::from(0), 2));
        edges.insert(edge(1, h2.clone(), 2));
        c.push(edges);
        let new_h1 = &h1 * 2 + &h2;
        let new_h2 = &h1 + &h2;
        h1 = new_h1;
        h2 = new_h2;
        f.push(MarkedSet::intervals(2, &[h1.clone(), h2.clone()]));
    }
    RankKSystem::new("fb", 1, 2, f, c).with_finite_measure(BigRational::one())
}

/// Rank-2 no-spacer system from per-tower stacking orders (the same orders
/// at every stage); offsets are prefix sums of the stacked source heights.
pub fn rank2_from_orders(name: &str, horizon: usize, orders: [&[usize]; 2]) -> RankKSystem {
    let mut f = vec![MarkedSet::zero_base(1, 2)];
    let mut c = Vec::new();
    let mut h = [BigInt::one(), BigInt::one()];
    for _ in 0..horizon {
        let mut edges = EdgeSet::new(1, 2);
        let mut new_h = [BigInt::from(0), BigInt::from(0)];
        for (tgt, order) in orders.iter().enumerate() {
            let mut off = BigInt::from(0);
            for &src in order.iter() {
                edges.insert(edge(src, off.clone(), tgt + 1));
                off += &h[src - 1];
            }
            new_h[tgt] = off;
        }
        c.push(edges);
        h = new_h;
        f.push(MarkedSet::intervals(2, &[h[0].clone(), h[1].clone()]));
    }
    RankKSystem::new(name, 1, 2, f, c).with_finite_measure(BigRational::one())
}

/// `r2` with interleaved stacking `[1,2,1,2]` / `[2,1,2,1]`: valid data
/// that violates the consecutive-ordering condition.
pub fn r2_interleaved(horizon: usize) -> RankKSystem {
    rank2_from_orders("r2-interleaved", horizon, [&[1, 2, 1, 2], &[2, 1, 2, 1]])
}

/// `r2` with a single copy of tower 2 inside tower 1: valid data whose
/// incidence matrix has an entry equal to 1 (non-degeneracy fails).
pub fn r2_entry_one(horizon: usize) -> RankKSystem {
    rank2_from_orders("r2-entry-one", horizon, [&[1, 1, 2], &[2, 2, 1, 1]])
}

/// A rank-one system embedded as a `k = 1` marked system, for consistency
/// checks between the rank-one and finite-rank code paths.
pub fn embed_rank_one(sys: &RankOneSystem) -> RankKSystem {
    let horizon = sys.horizon();
    let mut f = Vec::new();
    for n in 0..=horizon {
        f.push(MarkedSet::from_elems(
            sys.dim(),
            1,
            sys.f_set(n)
                .iter()
                .map(|g| MarkedElement::new(g.clone(), 1)),
        ));
    }
    let mut c = Vec::new();
    for n in 1..=horizon {
        let mut edges = EdgeSet::new(sys.dim(), 1);
        for g in sys.c_set(n).iter() {
            edges.insert(Edge::new(1, g.clone(), 1));
        }
        c.push(edges);
    }
    let sys_k = RankKSystem::new(&format!("{}-as-k1", sys.name()), sys.dim(), 1, f, c);
    match sys.measure_cert() {
        MeasureCert::Finite(v) => sys_k.with_finite_measure(v.clone()),
        _ => sys_k,
    }
}
