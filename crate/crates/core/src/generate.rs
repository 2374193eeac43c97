//! Synthetic road networks used as fixtures and benchmark stand-ins.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::road_graph::{Edge, RoadGraph};

/// Side of the square the euclidean family scatters points in, in meters.
pub const EUCLIDEAN_SIDE: f64 = 10_000.0;
const NEIGHBOURS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Path `0 - 1 - ... - (k-1)` with unit weights.
    Line,
    /// `k x k` lattice, vertex `r * k + c`, unit weights.
    Grid,
    /// `k` uniform points joined to their nearest neighbours.
    Euclidean,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Line => "line",
            Family::Grid => "grid",
            Family::Euclidean => "euclidean",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(Family::Line),
            "grid" => Ok(Family::Grid),
            "euclidean" => Ok(Family::Euclidean),
            other => Err(Error::validation(format!(
                "unknown graph family {other:?} (expected line, grid or euclidean)"
            ))),
        }
    }
}

/// Generates a graph of the given family. `seed` only matters for
/// [`Family::Euclidean`].
pub fn generate(family: Family, size: usize, seed: u64) -> Result<RoadGraph> {
    if size == 0 {
        return Err(Error::validation("graph size must be at least 1"));
    }
    match family {
        Family::Line => line(size),
        Family::Grid => grid(size),
        Family::Euclidean => euclidean(size, seed).map(|(g, _)| g),
    }
}

fn unit(u: usize, v: usize) -> Edge {
    Edge {
        u: u as u64,
        v: v as u64,
        weight: 1.0,
    }
}

fn line(k: usize) -> Result<RoadGraph> {
    RoadGraph::new(0..k as u64, (1..k).map(|i| unit(i - 1, i)))
}

fn grid(k: usize) -> Result<RoadGraph> {
    let mut edges = Vec::with_capacity(2 * k * (k - 1));
    for r in 0..k {
        for c in 0..k {
            let id = r * k + c;
            if c + 1 < k {
                edges.push(unit(id, id + 1));
            }
            if r + 1 < k {
                edges.push(unit(id, id + k));
            }
        }
    }
    RoadGraph::new(0..(k * k) as u64, edges)
}

/// Points plus the graph over them. Each point links to its nearest
/// neighbours; leftover components are stitched together by their shortest
/// connecting segment, so the result is connected.
pub fn euclidean(k: usize, seed: u64) -> Result<(RoadGraph, Vec<(f64, f64)>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(f64, f64)> = (0..k)
        .map(|_| {
            (
                rng.random_range(0.0..EUCLIDEAN_SIDE),
                rng.random_range(0.0..EUCLIDEAN_SIDE),
            )
        })
        .collect();
    let dist = |a: usize, b: usize| {
        let (p, q) = (points[a], points[b]);
        ((p.0 - q.0).hypot(p.1 - q.1) * 1000.0).round() / 1000.0
    };

    let mut pairs = std::collections::BTreeSet::new();
    for a in 0..k {
        let mut others: Vec<usize> = (0..k).filter(|&b| b != a).collect();
        others.sort_by(|&x, &y| dist(a, x).total_cmp(&dist(a, y)).then(x.cmp(&y)));
        for &b in others.iter().take(NEIGHBOURS) {
            pairs.insert((a.min(b), a.max(b)));
        }
    }

    let mut components = UnionFind::new(k);
    for &(a, b) in &pairs {
        components.union(a, b);
    }
    while components.count > 1 {
        let root = components.find(0);
        let (inside, outside): (Vec<usize>, Vec<usize>) =
            (0..k).partition(|&v| components.find(v) == root);
        let (a, b) = inside
            .iter()
            .flat_map(|&a| outside.iter().map(move |&b| (a, b)))
            .min_by(|&(a, b), &(c, d)| dist(a, b).total_cmp(&dist(c, d)))
            .expect("two components are both nonempty");
        pairs.insert((a.min(b), a.max(b)));
        components.union(a, b);
    }

    let edges = pairs.into_iter().map(|(a, b)| Edge {
        u: a as u64,
        v: b as u64,
        weight: dist(a, b),
    });
    Ok((RoadGraph::new(0..k as u64, edges)?, points))
}

struct UnionFind {
    parent: Vec<usize>,
    count: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            count: n,
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
            self.count -= 1;
        }
    }
}
