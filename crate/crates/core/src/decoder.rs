//! Minimum-weight matching decoder over plaquette syndromes.
//!
//! Each primal qubit is an edge between two plaquettes, or between a plaquette
//! and the top or bottom boundary. Matching paths never pass through a
//! boundary node. A correction flips the logical parity once for every defect
//! matched to the top boundary.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Node};
use crate::matching::{BoundaryMatching, Partner};

/// Syndromes up to this size are matched by exhaustive search.
pub const EXHAUSTIVE_LIMIT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    /// Unit weights: plain Manhattan-distance matching.
    Mwpm,
    /// Soft path weights for short separations, calibrated hard weights beyond.
    Hybrid,
    /// Soft path weights everywhere.
    Soft,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 3] = [DecoderKind::Mwpm, DecoderKind::Hybrid, DecoderKind::Soft];

    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Mwpm => "mwpm",
            DecoderKind::Hybrid => "hybrid",
            DecoderKind::Soft => "soft",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown decoder '{s}'")))
    }
}

/// `-ln(p / (1 - p))`, the per-edge weight for a flip probability `p`.
pub fn hard_weight(p_e: f64) -> Result<f64> {
    if !(p_e > 0.0 && p_e < 0.5) {
        return Err(Error::InvalidErrorRate(p_e));
    }
    Ok(-(p_e / (1.0 - p_e)).ln())
}

/// Which boundary a defect is matched to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Top,
    Bottom,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Correction {
    /// Per syndrome defect: partner defect position in the syndrome list, or
    /// `None` when matched to a boundary.
    pub partners: Vec<Option<usize>>,
    pub sides: Vec<Option<Side>>,
    pub cost: f64,
    /// Odd number of top-boundary matches.
    pub top_parity: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decoder {
    kind: DecoderKind,
    hard: f64,
    exhaustive_limit: usize,
}

impl Decoder {
    pub fn mwpm() -> Self {
        Self { kind: DecoderKind::Mwpm, hard: 1.0, exhaustive_limit: EXHAUSTIVE_LIMIT }
    }

    pub fn soft() -> Self {
        Self { kind: DecoderKind::Soft, hard: 1.0, exhaustive_limit: EXHAUSTIVE_LIMIT }
    }

    /// Hybrid decoder with hard weights from the calibrated flip rate `p_e`.
    pub fn hybrid(p_e: f64) -> Result<Self> {
        Ok(Self { kind: DecoderKind::Hybrid, hard: hard_weight(p_e)?, exhaustive_limit: EXHAUSTIVE_LIMIT })
    }

    /// Decoder of the given kind; `p_e` is only read by the hybrid kind.
    pub fn of_kind(kind: DecoderKind, p_e: Option<f64>) -> Result<Self> {
        match kind {
            DecoderKind::Mwpm => Ok(Self::mwpm()),
            DecoderKind::Soft => Ok(Self::soft()),
            DecoderKind::Hybrid => {
                let p = p_e.ok_or_else(|| Error::Config("hybrid decoder needs a calibrated p_e".into()))?;
                Self::hybrid(p)
            }
        }
    }

    pub fn with_exhaustive_limit(mut self, limit: usize) -> Self {
        self.exhaustive_limit = limit;
        self
    }

    pub fn kind(&self) -> DecoderKind {
        self.kind
    }

    pub fn hard_weight(&self) -> f64 {
        self.hard
    }

    /// Matching costs for the given defects. `weights` has one entry per primal.
    pub fn costs(&self, lattice: &Lattice, syndrome: &[usize], weights: &[f64]) -> (BoundaryMatching, Vec<Side>) {
        let n = syndrome.len();
        let mut pair = vec![vec![0.0; n]; n];
        let mut boundary = vec![0.0; n];
        let mut sides = vec![Side::Top; n];
        let cutoff = (lattice.distance() as f64).log2();
        for (a, &p) in syndrome.iter().enumerate() {
            let paths = match self.kind {
                DecoderKind::Mwpm => None,
                _ => Some(shortest_paths(lattice, p, weights)),
            };
            let (hop_top, hop_bot) = lattice.boundary_hops(p);
            let pick = |hops: usize, soft: Option<f64>| match (self.kind, soft) {
                (DecoderKind::Mwpm, _) => hops as f64,
                (DecoderKind::Hybrid, Some(s)) if hops as f64 <= cutoff => s,
                (DecoderKind::Hybrid, _) => hops as f64 * self.hard,
                (DecoderKind::Soft, s) => s.expect("soft paths computed"),
            };
            let top = pick(hop_top, paths.as_ref().map(|d| d.top));
            let bot = pick(hop_bot, paths.as_ref().map(|d| d.bottom));
            if bot < top {
                boundary[a] = bot;
                sides[a] = Side::Bottom;
            } else {
                boundary[a] = top;
            }
            for (b, &q) in syndrome.iter().enumerate().skip(a + 1) {
                let hops = lattice.manhattan(p, q);
                let w = pick(hops, paths.as_ref().map(|d| d.plaquette[q]));
                pair[a][b] = w;
                pair[b][a] = w;
            }
        }
        (BoundaryMatching { pair, boundary }, sides)
    }

    pub fn decode(&self, lattice: &Lattice, syndrome: &[usize], weights: &[f64]) -> Result<Correction> {
        if weights.len() != lattice.primal().len() {
            return Err(Error::Config(format!(
                "expected {} edge weights, got {}",
                lattice.primal().len(),
                weights.len()
            )));
        }
        let (problem, best_side) = self.costs(lattice, syndrome, weights);
        let solution = problem.solve(self.exhaustive_limit)?;
        let cost = problem.cost(&solution);
        let mut partners = Vec::with_capacity(solution.len());
        let mut sides = Vec::with_capacity(solution.len());
        let mut top_parity = false;
        for (a, p) in solution.iter().enumerate() {
            match *p {
                Partner::Node(b) => {
                    partners.push(Some(b));
                    sides.push(None);
                }
                Partner::Boundary => {
                    partners.push(None);
                    sides.push(Some(best_side[a]));
                    top_parity ^= best_side[a] == Side::Top;
                }
            }
        }
        Ok(Correction { partners, sides, cost, top_parity })
    }
}

/// Soft shortest-path distances from one plaquette.
#[derive(Clone, Debug, PartialEq)]
pub struct Distances {
    pub plaquette: Vec<f64>,
    pub top: f64,
    pub bottom: f64,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over plaquettes with per-primal edge weights; boundary nodes are
/// sinks only.
pub fn shortest_paths(lattice: &Lattice, source: usize, weights: &[f64]) -> Distances {
    let n = lattice.num_plaquettes();
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut top_edge = vec![f64::INFINITY; n];
    let mut bottom_edge = vec![f64::INFINITY; n];
    for (e, &(a, b)) in lattice.edges().iter().enumerate() {
        let w = weights[e];
        match (a, b) {
            (Node::Plaquette(p), Node::Plaquette(q)) => {
                adjacency[p].push((q, w));
                adjacency[q].push((p, w));
            }
            (Node::Top, Node::Plaquette(p)) | (Node::Plaquette(p), Node::Top) => {
                top_edge[p] = top_edge[p].min(w);
            }
            (Node::Bottom, Node::Plaquette(p)) | (Node::Plaquette(p), Node::Bottom) => {
                bottom_edge[p] = bottom_edge[p].min(w);
            }
            _ => unreachable!("edges always touch a plaquette"),
        }
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adjacency[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    let exit = |edge: &[f64]| (0..n).map(|p| dist[p] + edge[p]).fold(f64::INFINITY, f64::min);
    Distances { top: exit(&top_edge), bottom: exit(&bottom_edge), plaquette: dist }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::Sign;
    use crate::lattice::evaluate;

    #[test]
    fn hard_weight_range() {
        assert!(hard_weight(0.0).is_err());
        assert!(hard_weight(0.5).is_err());
        assert!((hard_weight(0.1).unwrap() - 9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unit_dijkstra_is_manhattan() {
        let l = Lattice::new(5).unwrap();
        let w = vec![1.0; l.primal().len()];
        for p in 0..l.num_plaquettes() {
            let d = shortest_paths(&l, p, &w);
            for q in 0..l.num_plaquettes() {
                assert_eq!(d.plaquette[q], l.manhattan(p, q) as f64);
            }
            let (t, b) = l.boundary_hops(p);
            assert_eq!(d.top, t as f64);
            assert_eq!(d.bottom, b as f64);
        }
    }

    #[test]
    fn single_flips_are_corrected() {
        for d in [3, 5, 7] {
            let l = Lattice::new(d).unwrap();
            let n = l.primal().len();
            let w = vec![1.0; n];
            let hybrid = Decoder::hybrid(0.05).unwrap();
            for dec in [Decoder::mwpm(), Decoder::soft(), hybrid] {
                for e in 0..n {
                    let mut f = vec![false; n];
                    f[e] = true;
                    let (_, _, err) = evaluate(&l, &f, &w, &dec).unwrap();
                    assert!(!err, "L={d} edge {e} {:?}", dec.kind());
                }
            }
        }
    }

    #[test]
    fn spanning_chain_is_uncorrectable() {
        let l = Lattice::new(3).unwrap();
        let n = l.primal().len();
        let mut f = vec![false; n];
        for (e, &q) in l.primal().iter().enumerate() {
            let s = l.sites()[q];
            if s.col == 0 && s.row % 2 == 0 {
                f[e] = true;
            }
        }
        assert_eq!(l.logical_parity(&f), Sign::Minus);
        let (syn, _, err) = evaluate(&l, &f, &vec![1.0; n], &Decoder::mwpm()).unwrap();
        assert!(syn.is_empty());
        assert!(err);
    }

    #[test]
    fn soft_weights_steer_matching() {
        // Two defects in the middle row of a distance-5 patch; a cheap path to
        // the boundary makes matching both to it preferable.
        let l = Lattice::new(5).unwrap();
        let n = l.primal().len();
        let mut w = vec![5.0; n];
        let p = l.plaquette_from_coords(0, 1);
        let q = l.plaquette_from_coords(0, 2);
        for (e, &(a, b)) in l.edges().iter().enumerate() {
            if matches!((a, b), (Node::Top, Node::Plaquette(x)) if x == p || x == q) {
                w[e] = 0.1;
            }
        }
        let c = Decoder::soft().decode(&l, &[p, q], &w).unwrap();
        assert_eq!(c.partners, vec![None, None]);
        assert!(!c.top_parity);
        let c = Decoder::mwpm().decode(&l, &[p, q], &w).unwrap();
        assert_eq!(c.partners, vec![Some(1), Some(0)]);
    }

    #[test]
    fn names_round_trip() {
        for k in DecoderKind::ALL {
            assert_eq!(k.name().parse::<DecoderKind>().unwrap(), k);
        }
    }
}
