//! Ordered Bratteli diagrams for spacer-free finite-rank systems over `Z`,
//! with a Vershik successor map and an oracle checking it against the
//! underlying `(C,F)`-action.
//!
//! The diagram of a system has one vertex per tower at each level; the
//! edges into vertex `j` at level `n` are the placements `C_n^{., j}`,
//! linearly ordered by their offsets.  A finite path picks one edge per
//! level; paths correspond bijectively to depth-`L` tower positions, and
//! the adic successor (increment the first non-maximal edge, reset
//! everything below it to the minimal path) corresponds to moving one level
//! up the tower, with the top-of-tower carry resolved at the first level
//! that is not order-maximal.

use crate::group::GroupElement;
use crate::rankk::{Edge, EdgeSet, MarkedSet, RankKSystem};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BratteliError {
    #[error("system has spacers at stage {0}; export requires a tiling castle")]
    SpacersPresent(usize),
    #[error("diagram is malformed: {0}")]
    Malformed(String),
    #[error("path is malformed: {0}")]
    BadPath(String),
    #[error(transparent)]
    RankK(#[from] crate::rankk::RankKError),
}

/// One edge of an ordered Bratteli diagram: vertices are 1-based tower
/// indices, `rank` is the position of the edge in the linear order of the
/// edges into `target` (0-based, contiguous).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BratteliEdge {
    pub src: usize,
    pub tgt: usize,
    pub rank: usize,
}

/// An ordered Bratteli diagram with `k` vertices per level.  `levels[m]`
/// holds the edges between level `m` and level `m + 1` vertices
/// (`m = 0..N-1`); the root level (one edge from the root to each vertex)
/// is implicit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedBratteliDiagram {
    pub k: usize,
    pub levels: Vec<Vec<BratteliEdge>>,
}

impl OrderedBratteliDiagram {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Edge indices into `target` at level `m`, sorted by rank.
    fn incoming(&self, m: usize, target: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.levels[m].len())
            .filter(|&e| self.levels[m][e].tgt == target)
            .collect();
        v.sort_by_key(|&e| self.levels[m][e].rank);
        v
    }

    /// Checks that the order ranks into each vertex form `0..indegree`.
    pub fn well_ordered(&self) -> Result<(), BratteliError> {
        for (m, _level) in self.levels.iter().enumerate() {
            for j in 1..=self.k {
                let inc = self.incoming(m, j);
                if inc.is_empty() {
                    return Err(BratteliError::Malformed(format!(
                        "vertex {} at level {} has no incoming edges",
                        j,
                        m + 1
                    )));
                }
                for (expect, &e) in inc.iter().enumerate() {
                    if self.levels[m][e].rank != expect {
                        return Err(BratteliError::Malformed(format!(
                            "ranks into vertex {} at level {} are not contiguous",
                            j,
                            m + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// JSON serialization (schema: `{k, levels: [{edges: [{src,tgt,rank}]}]}`).
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Level<'a> {
            edges: &'a Vec<BratteliEdge>,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            k: usize,
            levels: Vec<Level<'a>>,
        }
        let doc = Doc {
            k: self.k,
            levels: self.levels.iter().map(|edges| Level { edges }).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("diagram serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BratteliError> {
        #[derive(Deserialize)]
        struct Level {
            edges: Vec<BratteliEdge>,
        }
        #[derive(Deserialize)]
        struct Doc {
            k: usize,
            levels: Vec<Level>,
        }
        let doc: Doc = serde_json::from_str(text)
            .map_err(|e| BratteliError::Malformed(format!("json: {}", e)))?;
        let diag = OrderedBratteliDiagram {
            k: doc.k,
            levels: doc.levels.into_iter().map(|l| l.edges).collect(),
        };
        diag.well_ordered()?;
        Ok(diag)
    }

    /// GraphViz rendering with deterministic edge identifiers
    /// `(level, target, rank)`.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph bratteli {\n  rankdir=TB;\n  root [shape=point];\n");
        for j in 1..=self.k {
            let _ = writeln!(s, "  v0_{j} [label=\"{j}\"];");
            let _ = writeln!(s, "  root -> v0_{j};");
        }
        for (m, level) in self.levels.iter().enumerate() {
            let _ = &level;
            for j in 1..=self.k {
                let _ = writeln!(s, "  v{}_{j} [label=\"{j}\"];", m + 1);
            }
            for e in level {
                let _ = writeln!(
                    s,
                    "  v{}_{} -> v{}_{} [label=\"{}\"];",
                    m, e.src, m + 1, e.tgt, e.rank
                );
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Export of a system: the ordered diagram plus the offset of each edge
/// (aligned with `diagram.levels`), which ties paths back to tower
/// positions.
#[derive(Clone, Debug)]
pub struct BratteliExport {
    pub diagram: OrderedBratteliDiagram,
    pub offsets: Vec<Vec<BigInt>>,
    pub heights: Vec<Vec<BigInt>>,
}

/// Exports a spacer-free finite-rank system over `Z`: edges at level `n`
/// are the placements `C_n`, ordered within each target by offset.
pub fn export(sys: &RankKSystem) -> Result<BratteliExport, BratteliError> {
    let view = sys.castle_view()?;
    for n in 1..=sys.horizon() {
        if !view.no_spacers_at(n) {
            return Err(BratteliError::SpacersPresent(n));
        }
    }
    let k = sys.rank();
    let mut levels = Vec::new();
    let mut offsets = Vec::new();
    for n in 1..=sys.horizon() {
        let mut edges = Vec::new();
        let mut offs = Vec::new();
        for j in 1..=k {
            for (rank, e) in sys.c_set(n).into_target(j).into_iter().enumerate() {
                edges.push(BratteliEdge {
                    src: e.source,
                    tgt: j,
                    rank,
                });
                offs.push(e.offset.as_scalar().clone());
            }
        }
        levels.push(edges);
        offsets.push(offs);
    }
    Ok(BratteliExport {
        diagram: OrderedBratteliDiagram { k, levels },
        offsets,
        heights: view.heights,
    })
}

/// A finite adic path: the level-0 vertex plus one edge index per level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdicPath {
    pub start: usize,
    /// `edges[m]` indexes into `diagram.levels[m]`.
    pub edges: Vec<usize>,
}

impl AdicPath {
    fn validate(&self, diag: &OrderedBratteliDiagram) -> Result<(), BratteliError> {
        if self.start < 1 || self.start > diag.k {
            return Err(BratteliError::BadPath("start vertex out of range".into()));
        }
        let mut v = self.start;
        for (m, &e) in self.edges.iter().enumerate() {
            let edge = diag
                .levels
                .get(m)
                .and_then(|l| l.get(e))
                .ok_or_else(|| BratteliError::BadPath(format!("edge index {} at level {}", e, m)))?;
            if edge.src != v {
                return Err(BratteliError::BadPath(format!(
                    "edge at level {} starts at {}, path is at {}",
                    m, edge.src, v
                )));
            }
            v = edge.tgt;
        }
        Ok(())
    }

    pub fn end_vertex(&self, diag: &OrderedBratteliDiagram) -> usize {
        match self.edges.last() {
            Some(&e) => diag.levels[self.edges.len() - 1][e].tgt,
            None => self.start,
        }
    }
}

/// Result of the Vershik successor map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Successor {
    Path(AdicPath),
    /// Every edge of the path is order-maximal.
    Maximal,
}

/// The minimal path of given depth ending at `vertex`: rank-0 edges chosen
/// top-down.
pub fn minimal_path_to(
    diag: &OrderedBratteliDiagram,
    depth: usize,
    vertex: usize,
) -> Result<AdicPath, BratteliError> {
    let mut edges = vec![0usize; depth];
    let mut v = vertex;
    for m in (0..depth).rev() {
        let inc = diag.incoming(m, v);
        let e = *inc
            .first()
            .ok_or_else(|| BratteliError::Malformed(format!("no edges into {} at level {}", v, m)))?;
        edges[m] = e;
        v = diag.levels[m][e].src;
    }
    Ok(AdicPath { start: v, edges })
}

/// Standard adic successor: replace the first non-maximal edge by its order
/// successor and reset everything below to the minimal path consistent with
/// connectivity.
pub fn vershik_successor(
    diag: &OrderedBratteliDiagram,
    path: &AdicPath,
) -> Result<Successor, BratteliError> {
    path.validate(diag)?;
    for m in 0..path.edges.len() {
        let e = path.edges[m];
        let edge = &diag.levels[m][e];
        let inc = diag.incoming(m, edge.tgt);
        if edge.rank + 1 < inc.len() {
            let succ_edge = inc[edge.rank + 1];
            let mut below = minimal_path_to(diag, m, diag.levels[m][succ_edge].src)?;
            below.edges.push(succ_edge);
            below.edges.extend_from_slice(&path.edges[m + 1..]);
            return Ok(Successor::Path(below));
        }
    }
    Ok(Successor::Maximal)
}

/// Reconstructs `(C,F)` data from an ordered diagram: offsets are prefix
/// sums of the stacked source heights along each target's order.
pub fn to_cf(diag: &OrderedBratteliDiagram, name: &str) -> Result<RankKSystem, BratteliError> {
    diag.well_ordered()?;
    let k = diag.k;
    let mut heights = vec![BigInt::one(); k];
    let mut f = vec![MarkedSet::zero_base(1, k)];
    let mut c = Vec::new();
    for (m, _) in diag.levels.iter().enumerate() {
        let mut edges = EdgeSet::new(1, k);
        let mut new_heights = vec![BigInt::zero(); k];
        for j in 1..=k {
            let mut cursor = BigInt::zero();
            for &e in &diag.incoming(m, j) {
                let src = diag.levels[m][e].src;
                edges.insert(Edge::new(src, GroupElement::new(vec![cursor.clone()]), j));
                cursor += &heights[src - 1];
            }
            new_heights[j - 1] = cursor;
        }
        c.push(edges);
        heights = new_heights;
        f.push(MarkedSet::intervals(k, &heights));
    }
    Ok(RankKSystem::new(name, 1, k, f, c))
}

/// Position `(tower, level)` of a path under the `(C,F)` correspondence.
pub fn path_position(export: &BratteliExport, path: &AdicPath) -> (usize, BigInt) {
    let mut pos = BigInt::zero();
    for (m, &e) in path.edges.iter().enumerate() {
        pos += &export.offsets[m][e];
    }
    (path.end_vertex(&export.diagram), pos)
}

/// The path of a depth-`L` position, via greedy block decomposition.
pub fn position_path(
    export: &BratteliExport,
    depth: usize,
    tower: usize,
    position: &BigInt,
) -> Result<AdicPath, BratteliError> {
    let diag = &export.diagram;
    let mut edges = vec![0usize; depth];
    let mut v = tower;
    let mut pos = position.clone();
    for m in (0..depth).rev() {
        let inc = diag.incoming(m, v);
        let mut found = None;
        for &e in &inc {
            let off = &export.offsets[m][e];
            let src = diag.levels[m][e].src;
            let h = &export.heights[m][src - 1];
            if &pos >= off && pos < off + h {
                found = Some((e, off.clone(), src));
                break;
            }
        }
        let (e, off, src) = found.ok_or_else(|| {
            BratteliError::BadPath(format!("position {} not covered at level {}", pos, m))
        })?;
        edges[m] = e;
        pos -= off;
        v = src;
    }
    Ok(AdicPath { start: v, edges })
}

/// Exhaustive check that the Vershik successor matches the `(C,F)`-action
/// `T_1` on every depth-`L` position: moving up one level inside a tower
/// corresponds to the adic successor, and the tower tops are exactly the
/// order-maximal paths.
pub fn equivalence_oracle(
    sys: &RankKSystem,
    export: &BratteliExport,
    depth: usize,
) -> Result<usize, Box<AdicPath>> {
    let diag = &export.diagram;
    let mut checked = 0usize;
    for tower in 1..=sys.rank() {
        let h = export.heights[depth][tower - 1].clone();
        let mut pos = BigInt::zero();
        while pos < h {
            let path = position_path(export, depth, tower, &pos).map_err(|_| {
                Box::new(AdicPath {
                    start: tower,
                    edges: vec![],
                })
            })?;
            let succ = vershik_successor(diag, &path).map_err(|_| Box::new(path.clone()))?;
            let expected = if &pos + 1 < h {
                let next = position_path(export, depth, tower, &(&pos + 1))
                    .map_err(|_| Box::new(path.clone()))?;
                Successor::Path(next)
            } else {
                Successor::Maximal
            };
            if succ != expected {
                return Err(Box::new(path));
            }
            checked += 1;
            pos += 1;
        }
    }
    Ok(checked)
}
