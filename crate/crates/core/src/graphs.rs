//! Thresholded, geometric and pseudo-geometric graphs, and the degree-based
//! vertex and star counts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{euclid_unchecked, pseudo_dist_unchecked};
use crate::scores::{ScoreMatrix, SymmetricMatrix};

/// Undirected simple graph on `p` vertices with a bit-packed adjacency
/// matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleGraph {
    p: usize,
    words: usize,
    bits: Vec<u64>,
    degrees: Vec<usize>,
}

impl SimpleGraph {
    pub fn empty(p: usize) -> Self {
        let words = p.div_ceil(64).max(1);
        Self {
            p,
            words,
            bits: vec![0; words * p],
            degrees: vec![0; p],
        }
    }

    pub fn complete(p: usize) -> Self {
        let mut g = Self::empty(p);
        for i in 0..p {
            for j in i + 1..p {
                g.insert(i, j);
            }
        }
        g
    }

    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(p);
        for &(i, j) in edges {
            if i >= p || j >= p {
                return Err(Error::param("edge", format!("({i},{j})"), "vertex out of range"));
            }
            if i == j {
                return Err(Error::param("edge", format!("({i},{j})"), "self loops are not allowed"));
            }
            if !g.has_edge(i, j) {
                g.insert(i, j);
            }
        }
        Ok(g)
    }

    fn insert(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
        self.bits[j * self.words + i / 64] |= 1 << (i % 64);
        self.degrees[i] += 1;
        self.degrees[j] += 1;
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn edge_count(&self) -> usize {
        self.degrees.iter().sum::<usize>() / 2
    }

    /// Edges `(i, j)` with `i < j` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.p).flat_map(move |i| (i + 1..self.p).filter(move |&j| self.has_edge(i, j)).map(move |j| (i, j)))
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&j| self.has_edge(i, j))
    }

    fn from_pair_rule(p: usize, mut edge: impl FnMut(usize, usize) -> bool) -> Self {
        let mut g = Self::empty(p);
        for i in 0..p {
            for j in i + 1..p {
                if edge(i, j) {
                    g.insert(i, j);
                }
            }
        }
        g
    }
}

/// Edge `(i, j)` whenever `|psi_ij| >= rho`.
pub fn threshold_graph(psi: &SymmetricMatrix, rho: f64) -> Result<SimpleGraph> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::param("rho", rho, "threshold must lie in [0, 1)"));
    }
    let m = psi.as_matrix();
    Ok(SimpleGraph::from_pair_rule(psi.dim(), |i, j| m[(i, j)].abs() >= rho))
}

fn check_dims<P: AsRef<[f64]>>(points: &[P]) -> Result<()> {
    if let Some(first) = points.first() {
        let d = first.as_ref().len();
        if let Some(bad) = points.iter().position(|v| v.as_ref().len() != d) {
            return Err(Error::Dimension(format!(
                "point {bad} has dimension {}, expected {d}",
                points[bad].as_ref().len()
            )));
        }
    }
    Ok(())
}

/// Edge whenever `min(|v_i - v_j|, |v_i + v_j|) <= r`.
pub fn pseudo_geometric_graph<P: AsRef<[f64]>>(points: &[P], r: f64) -> Result<SimpleGraph> {
    check_dims(points)?;
    Ok(SimpleGraph::from_pair_rule(points.len(), |i, j| {
        pseudo_dist_unchecked(points[i].as_ref(), points[j].as_ref()) <= r
    }))
}

/// Pseudo-geometric graph on the columns of a score matrix.
pub fn score_graph(scores: &ScoreMatrix, r: f64) -> SimpleGraph {
    SimpleGraph::from_pair_rule(scores.cols(), |i, j| {
        pseudo_dist_unchecked(scores.column(i), scores.column(j)) <= r
    })
}

/// Edge whenever `|v_i - v_j| <= r`.
pub fn geometric_graph<P: AsRef<[f64]>>(points: &[P], r: f64) -> Result<SimpleGraph> {
    check_dims(points)?;
    Ok(SimpleGraph::from_pair_rule(points.len(), |i, j| {
        euclid_unchecked(points[i].as_ref(), points[j].as_ref()) <= r
    }))
}

/// Star count, exact-degree count and at-least-degree count for one `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CountStatistics {
    pub delta: usize,
    /// `sum_i C(deg(i), delta)`; twice the edge count when `delta = 1`.
    pub n_e: u64,
    /// Vertices of degree exactly `delta`.
    pub n_v_exact: u64,
    /// Vertices of degree at least `delta`.
    pub n_v_atleast: u64,
}

/// Which count a caller wants out of [`CountStatistics`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    StarCount,
    DegreeExact,
    DegreeAtLeast,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::StarCount, Statistic::DegreeExact, Statistic::DegreeAtLeast];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::StarCount => "n_e",
            Statistic::DegreeExact => "n_v_exact",
            Statistic::DegreeAtLeast => "n_v_atleast",
        }
    }
}

impl CountStatistics {
    pub fn get(&self, stat: Statistic) -> u64 {
        match stat {
            Statistic::StarCount => self.n_e,
            Statistic::DegreeExact => self.n_v_exact,
            Statistic::DegreeAtLeast => self.n_v_atleast,
        }
    }
}

fn binomial(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    u64::try_from(c).ok()
}

/// `sum_i C(deg(i), delta)` for any `delta >= 1`, zero once `delta >= p`.
pub fn star_count(g: &SimpleGraph, delta: usize) -> Result<u64> {
    if delta == 0 {
        return Err(Error::param("delta", delta, "must be at least 1"));
    }
    g.degrees().iter().try_fold(0u64, |acc, &d| {
        binomial(d, delta)
            .and_then(|c| acc.checked_add(c))
            .ok_or(Error::Overflow("star count"))
    })
}

pub fn count_statistics(g: &SimpleGraph, delta: usize) -> Result<CountStatistics> {
    if delta == 0 || delta + 1 > g.p() {
        return Err(Error::param("delta", delta, "must lie in 1..=p-1"));
    }
    let degrees = g.degrees();
    Ok(CountStatistics {
        delta,
        n_e: star_count(g, delta)?,
        n_v_exact: degrees.iter().filter(|&&d| d == delta).count() as u64,
        n_v_atleast: degrees.iter().filter(|&&d| d >= delta).count() as u64,
    })
}

/// Checks `N_E(delta) - (delta+1) N_E(delta+1) <= N_V_exact <= N_V_atleast
/// <= N_E(delta)`, taking `N_E(p) = 0`.
pub fn portmanteau_holds(g: &SimpleGraph, counts: &CountStatistics) -> Result<bool> {
    let next = star_count(g, counts.delta + 1)? as i128;
    let lower = counts.n_e as i128 - (counts.delta as i128 + 1) * next;
    Ok(lower <= counts.n_v_exact as i128
        && counts.n_v_exact <= counts.n_v_atleast
        && counts.n_v_atleast <= counts.n_e)
}

/// Vertices adjacent to every other vertex; the one-vertex graph has one.
pub fn count_universal(g: &SimpleGraph) -> usize {
    let target = g.p().saturating_sub(1);
    g.degrees().iter().filter(|&&d| d == target).count()
}
