//! Exact-arithmetic toolkit for `(C,F)` dynamical systems.
//!
//! A `(C,F)` system is built from two sequences of finite subsets of a group
//! `G = Z^d`: tower shapes `F_0, F_1, ...` and placement offset sets
//! `C_1, C_2, ...`.  The pair determines a measure-preserving action of `G`
//! on a locally compact Cantor space together with a canonical σ-finite
//! measure, generalizing classical cutting-and-stacking constructions.
//! This crate stores finite-horizon prefixes of such data and computes,
//! with exact rational arithmetic throughout:
//!
//! * validation of the combinatorial conditions the construction requires,
//!   for both rank-one systems ([`rankone`]) and marked-alphabet systems of
//!   finite rank ([`rankk`]);
//! * exact cylinder measures, refinements and telescoping;
//! * certified correlation sums `μ(A ∩ T_k B)` and normalized window sums
//!   used to diagnose weak rational ergodicity ([`dynamics`]);
//! * invariant-measure solving for finite-rank systems with certified
//!   unique-ergodicity via cone contraction ([`rankk::solve_invariant_measure`]);
//! * partial-rigidity time searches and the associated castle diagnostics
//!   ([`rigidity`]);
//! * ordered Bratteli diagram export with a Vershik successor oracle
//!   ([`bratteli`]).
//!
//! Every depth-truncated quantity is returned as a [`certified::CertifiedValue`],
//! a closed rational interval guaranteed to contain the true value of the
//! infinite system under any admissible extension of the stored prefix;
//! quantities that are exact at finite depth come back with `lo == hi`.
//!
//! No floating point is used anywhere in the computational paths.

pub mod bratteli;
pub mod catalog;
pub mod certified;
pub mod dynamics;
pub mod group;
pub mod rankk;
pub mod rankone;
pub mod rigidity;

pub use certified::CertifiedValue;
pub use group::{GroupElement, GroupSet};
pub use rankk::RankKSystem;
pub use rankone::{Cylinder, RankOneSystem};
