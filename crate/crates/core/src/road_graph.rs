//! Road networks and the depot/destination distance matrix.
//!
//! Graphs are undirected with nonnegative edge weights in meters. The canonical
//! ingest format is a CSV edge list (`u,v,weight`), optionally with a header row
//! and `#` comment lines.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = u64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub weight: f64,
}

/// Weighted undirected road network.
#[derive(Clone, Debug, Default)]
pub struct RoadGraph {
    ids: Vec<VertexId>,
    index: HashMap<VertexId, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
    edges: Vec<Edge>,
}

impl RoadGraph {
    /// Builds a graph from an explicit vertex set plus edges. Edge endpoints
    /// missing from `vertices` are added.
    pub fn new(
        vertices: impl IntoIterator<Item = VertexId>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self> {
        let edges: Vec<Edge> = edges.into_iter().collect();
        let mut ids: BTreeSet<VertexId> = vertices.into_iter().collect();
        for e in &edges {
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(Error::validation(format!(
                    "edge ({}, {}) has invalid weight {}",
                    e.u, e.v, e.weight
                )));
            }
            ids.insert(e.u);
            ids.insert(e.v);
        }
        let ids: Vec<VertexId> = ids.into_iter().collect();
        let index: HashMap<VertexId, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut adjacency = vec![Vec::new(); ids.len()];
        for e in &edges {
            if e.u == e.v {
                continue;
            }
            let (a, b) = (index[&e.u], index[&e.v]);
            adjacency[a].push((b, e.weight));
            adjacency[b].push((a, e.weight));
        }
        Ok(RoadGraph {
            ids,
            index,
            adjacency,
            edges,
        })
    }

    pub fn from_edges(edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        Self::new(std::iter::empty(), edges)
    }

    pub fn num_vertices(&self) -> usize {
        self.ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Vertex ids in ascending order.
    pub fn vertices(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.index.contains_key(&v)
    }

    /// Lightest edge weight between `u` and `v`, in either direction.
    pub fn edge_weight(&self, u: VertexId, v: VertexId) -> Option<f64> {
        let (a, b) = (*self.index.get(&u)?, *self.index.get(&v)?);
        self.adjacency[a]
            .iter()
            .filter(|&&(t, _)| t == b)
            .map(|&(_, w)| w)
            .min_by(f64::total_cmp)
    }

    fn require(&self, v: VertexId) -> Result<usize> {
        self.index
            .get(&v)
            .copied()
            .ok_or_else(|| Error::validation(format!("vertex {v} is not in the graph")))
    }

    /// Dijkstra over dense indices; unreachable entries are `INFINITY`.
    fn dijkstra(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.ids.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Frontier {
            dist: 0.0,
            node: source,
        });
        while let Some(Frontier { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &(next, w) in &self.adjacency[node] {
                let candidate = d + w;
                if candidate < dist[next] {
                    dist[next] = candidate;
                    heap.push(Frontier {
                        dist: candidate,
                        node: next,
                    });
                }
            }
        }
        dist
    }

    /// Writes the graph back out as a headed edge-list CSV. Isolated vertices
    /// are emitted as zero-weight self-loops so they survive a round trip.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::from("u,v,weight\n");
        let mut touched = vec![false; self.ids.len()];
        for e in &self.edges {
            touched[self.index[&e.u]] = true;
            touched[self.index[&e.v]] = true;
            out.push_str(&format!("{},{},{}\n", e.u, e.v, e.weight));
        }
        for (i, &id) in self.ids.iter().enumerate() {
            if !touched[i] {
                out.push_str(&format!("{id},{id},0\n"));
            }
        }
        out
    }
}

#[derive(Copy, Clone, Debug)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // Reversed so the max-heap pops the closest vertex first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Parses an edge-list CSV (`u,v,weight`). Blank lines and lines starting
/// with `#` are ignored; a non-numeric first row is treated as a header.
pub fn load_graph(source: &str) -> Result<RoadGraph> {
    let mut edges = Vec::new();
    let mut seen_record = false;
    for (idx, raw) in source.lines().enumerate() {
        let line = idx as u64 + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if !std::mem::replace(&mut seen_record, true)
            && fields.iter().all(|f| f.parse::<f64>().is_err())
        {
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields (u,v,weight), found {}", fields.len()),
            });
        }
        let vertex = |field: &str| {
            field.parse::<VertexId>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid vertex id {field:?}"),
            })
        };
        let u = vertex(fields[0])?;
        let v = vertex(fields[1])?;
        let weight: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid weight {:?}", fields[2]),
        })?;
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::validation(format!(
                "line {line}: edge ({u}, {v}) has negative or non-finite weight {weight}"
            )));
        }
        edges.push(Edge { u, v, weight });
    }
    RoadGraph::from_edges(edges)
}

pub fn load_graph_file(path: impl AsRef<Path>) -> Result<RoadGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_graph(&text)
}

/// Exact single-source shortest-path distances. Unreachable vertices are
/// absent from the result.
pub fn shortest_distances(g: &RoadGraph, source: VertexId) -> Result<BTreeMap<VertexId, f64>> {
    let src = g.require(source)?;
    Ok(g
        .dijkstra(src)
        .into_iter()
        .enumerate()
        .filter(|(_, d)| d.is_finite())
        .map(|(i, d)| (g.ids[i], d))
        .collect())
}

/// Subgraph induced by the `k` vertices nearest to `origin`.
///
/// Unreachable vertices are always dropped. Ties at equal distance go to the
/// lower vertex id; `origin` itself is always kept.
pub fn crop_to_nearest(g: &RoadGraph, origin: VertexId, k: usize) -> Result<RoadGraph> {
    if k == 0 {
        return Err(Error::validation("crop size k must be at least 1"));
    }
    let src = g.require(origin)?;
    let dist = g.dijkstra(src);
    let mut ranked: Vec<usize> = (0..g.ids.len()).filter(|&i| dist[i].is_finite()).collect();
    ranked.sort_by(|&a, &b| {
        (a != src)
            .cmp(&(b != src))
            .then(dist[a].total_cmp(&dist[b]))
            .then(g.ids[a].cmp(&g.ids[b]))
    });
    ranked.truncate(k);
    let kept: BTreeSet<VertexId> = ranked.iter().map(|&i| g.ids[i]).collect();
    let edges = g
        .edges
        .iter()
        .filter(|e| kept.contains(&e.u) && kept.contains(&e.v))
        .copied();
    RoadGraph::new(kept.iter().copied(), edges)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// No return leg: the dummy destination sits at distance zero from everything.
    #[default]
    LastMile,
    /// The vehicle returns to the depot: the dummy destination is the depot.
    RoutingGame,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::LastMile => "last-mile",
            Mode::RoutingGame => "routing-game",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last-mile" => Ok(Mode::LastMile),
            "routing-game" => Ok(Mode::RoutingGame),
            other => Err(Error::validation(format!("unknown mode {other:?}"))),
        }
    }
}

/// Pairwise distances over the depot (index 0), destinations `1..=n` and the
/// dummy destination `n+1`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceMatrix {
    mode: Mode,
    n: usize,
    delta: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from the `(n+1) x (n+1)` block over depot and
    /// destinations; the dummy row and column are derived from `mode`.
    ///
    /// Entries must be finite, nonnegative and symmetric with a zero diagonal.
    /// The triangle inequality is only checked when `validate` is set.
    pub fn from_rows(rows: &[Vec<f64>], mode: Mode, validate: bool) -> Result<Self> {
        let size = rows.len();
        if size < 2 {
            return Err(Error::validation(
                "distance matrix needs the depot and at least one destination",
            ));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != size) {
            return Err(Error::validation(format!(
                "distance matrix row {bad} has {} entries, expected {size}",
                rows[bad].len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::validation(format!(
                        "distance ({i}, {j}) = {d} is negative or non-finite"
                    )));
                }
                if i == j && d != 0.0 {
                    return Err(Error::validation(format!(
                        "self-distance of index {i} must be 0, got {d}"
                    )));
                }
                let back = rows[j][i];
                if (d - back).abs() > 1e-9 * d.abs().max(back.abs()).max(1.0) {
                    return Err(Error::validation(format!(
                        "distance matrix is not symmetric at ({i}, {j}): {d} vs {back}"
                    )));
                }
            }
        }
        let n = size - 1;
        let dim = n + 2;
        let mut delta = vec![0.0; dim * dim];
        for i in 0..=n {
            for j in 0..=n {
                delta[i * dim + j] = rows[i][j];
            }
        }
        let matrix = DistanceMatrix { mode, n, delta }.with_dummy();
        if validate {
            matrix.check_triangle_inequality()?;
        }
        Ok(matrix)
    }

    fn with_dummy(mut self) -> Self {
        let dim = self.n + 2;
        let dummy = self.n + 1;
        for i in 0..dim {
            let d = match self.mode {
                Mode::LastMile => 0.0,
                Mode::RoutingGame if i == dummy => 0.0,
                Mode::RoutingGame => self.delta[i * dim],
            };
            self.delta[i * dim + dummy] = d;
            self.delta[dummy * dim + i] = d;
        }
        self
    }

    /// Same distances with the dummy destination rebuilt for `mode`.
    pub fn with_mode(&self, mode: Mode) -> Self {
        if mode == self.mode {
            return self.clone();
        }
        DistanceMatrix {
            mode,
            n: self.n,
            delta: self.delta.clone(),
        }
        .with_dummy()
    }

    /// Passenger count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Side length, `n + 2`.
    pub fn size(&self) -> usize {
        self.n + 2
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.delta[i * (self.n + 2) + j]
    }

    /// Index of the dummy destination, `n + 1`.
    pub fn dummy(&self) -> usize {
        self.n + 1
    }

    /// The `(n+1) x (n+1)` block over depot and destinations.
    pub fn real_rows(&self) -> Vec<Vec<f64>> {
        (0..=self.n)
            .map(|i| (0..=self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Delta values, row-major over all `n + 2` indices.
    pub fn as_slice(&self) -> &[f64] {
        &self.delta
    }

    /// Renumbers destinations so that new passenger `k` (1-based) is old
    /// passenger `order[k - 1]`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n + 1];
        if order.len() != self.n
            || order
                .iter()
                .any(|&p| p == 0 || p > self.n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::validation(format!(
                "{order:?} is not a permutation of 1..={}",
                self.n
            )));
        }
        let map: Vec<usize> = std::iter::once(0).chain(order.iter().copied()).collect();
        let rows: Vec<Vec<f64>> = map
            .iter()
            .map(|&a| map.iter().map(|&b| self.get(a, b)).collect())
            .collect();
        DistanceMatrix::from_rows(&rows, self.mode, false)
    }

    pub fn check_triangle_inequality(&self) -> Result<()> {
        for a in 0..=self.n {
            for b in 0..=self.n {
                for c in 0..=self.n {
                    let direct = self.get(a, c);
                    let via = self.get(a, b) + self.get(b, c);
                    if direct > via + 1e-9 * direct.max(1.0) {
                        return Err(Error::validation(format!(
                            "triangle inequality fails: d({a},{c}) = {direct} > d({a},{b}) + d({b},{c}) = {via}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("distance matrix serializes")
    }

    /// Parses the `{mode, n, delta}` export. The dummy row and column must be
    /// consistent with `mode`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            mode: Mode,
            n: usize,
            delta: Vec<f64>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        let dim = raw.n + 2;
        if raw.delta.len() != dim * dim {
            return Err(Error::validation(format!(
                "delta has {} entries, expected {} for n = {}",
                raw.delta.len(),
                dim * dim,
                raw.n
            )));
        }
        let rows: Vec<Vec<f64>> = (0..=raw.n)
            .map(|i| raw.delta[i * dim..i * dim + raw.n + 1].to_vec())
            .collect();
        let matrix = DistanceMatrix::from_rows(&rows, raw.mode, false)?;
        if matrix.delta != raw.delta {
            return Err(Error::validation(format!(
                "dummy row/column does not match {} mode",
                raw.mode
            )));
        }
        Ok(matrix)
    }
}

/// Distance matrix over `depot` and `destinations` (in drop-off order) using
/// shortest-path distances in `g`.
pub fn build_distance_matrix(
    g: &RoadGraph,
    depot: VertexId,
    destinations: &[VertexId],
    mode: Mode,
) -> Result<DistanceMatrix> {
    if destinations.is_empty() {
        return Err(Error::validation("at least one destination is required"));
    }
    let stops: Vec<usize> = std::iter::once(depot)
        .chain(destinations.iter().copied())
        .map(|v| g.require(v))
        .collect::<Result<_>>()?;
    let from_depot = g.dijkstra(stops[0]);
    if let Some(&bad) = destinations
        .iter()
        .zip(&stops[1..])
        .find(|(_, &idx)| !from_depot[idx].is_finite())
        .map(|(v, _)| v)
    {
        return Err(Error::validation(format!(
            "destination {bad} is unreachable from depot {depot}"
        )));
    }

    let mut runs: HashMap<usize, Vec<f64>> = HashMap::new();
    runs.insert(stops[0], from_depot);
    let size = stops.len();
    let mut rows = vec![vec![0.0; size]; size];
    for a in 0..size {
        let dist = runs
            .entry(stops[a])
            .or_insert_with(|| g.dijkstra(stops[a]));
        let row: Vec<f64> = stops[a + 1..].iter().map(|&b| dist[b]).collect();
        for (offset, d) in row.into_iter().enumerate() {
            let b = a + 1 + offset;
            rows[a][b] = d;
            rows[b][a] = d;
        }
    }
    DistanceMatrix::from_rows(&rows, mode, false)
}
