use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::PointCloud;
use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::manifold::{Kind, Manifold, Point};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub length: f64,
}

/// Undirected graph on a point cloud with geodesic edge lengths.
/// Invariants: connected, `0 < length < r_M`, edges stored once with `i < j`.
#[derive(Clone, Debug)]
pub struct Graph {
    pub manifold: Manifold,
    pub points: Vec<Point>,
    pub edges: Vec<Edge>,
    /// Per-vertex `(neighbor, length)` sorted by neighbor index.
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub k: usize,
    /// Largest edge length.
    pub h: f64,
}

impl Graph {
    /// Builds a graph from explicit edges, checking the invariants.
    pub fn from_edges(manifold: &Manifold, points: Vec<Point>, mut edges: Vec<Edge>, k: usize) -> Result<Self> {
        let n = points.len();
        for e in edges.iter_mut() {
            if e.i == e.j || e.i >= n || e.j >= n {
                return Err(Error::InvalidInput(format!("bad edge ({}, {})", e.i, e.j)));
            }
            if !(e.length > 0.0) || !e.length.is_finite() {
                return Err(Error::InvalidInput(format!("edge ({}, {}) has length {}", e.i, e.j, e.length)));
            }
            if e.i > e.j {
                std::mem::swap(&mut e.i, &mut e.j);
            }
        }
        edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
        edges.dedup_by(|a, b| a.i == b.i && a.j == b.j);
        let mut neighbors = vec![Vec::new(); n];
        for e in &edges {
            neighbors[e.i].push((e.j, e.length));
            neighbors[e.j].push((e.i, e.length));
        }
        for list in neighbors.iter_mut() {
            list.sort_by_key(|(j, _)| *j);
        }
        let h = edges.iter().fold(0.0, |a: f64, e| a.max(e.length));
        let g = Self { manifold: manifold.clone(), points, edges, neighbors, k, h };
        let sizes = g.component_sizes();
        if sizes.len() > 1 {
            return Err(Error::Disconnected { components: sizes.len(), sizes });
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Sizes of connected components, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut sizes = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![s];
            let mut size = 0;
            while let Some(v) = stack.pop() {
                size += 1;
                for &(w, _) in &self.neighbors[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}

/// Cheap distance proxy used to pre-filter neighbor candidates.
fn proxy(m: &Manifold, p: &Point, q: &Point) -> f64 {
    match m.kind() {
        Kind::Cusp | Kind::Tube => {
            let mid = Point::new((&p.coords + &q.coords) * 0.5);
            let d = &q.coords - &p.coords;
            (d.transpose() * m.metric_matrix(&mid) * &d)[(0, 0)].sqrt()
        }
        _ => m.distance(p, q).value,
    }
}

fn key_cmp(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Symmetric k-nearest-neighbor graph with geodesic edge lengths.
///
/// Candidates are pre-filtered by a chart-coordinate proxy and ranked by
/// exact geodesic length, ties broken by vertex index. Edges with length
/// at least the working radius at either end are dropped with a warning.
pub fn build_graph(cloud: &PointCloud, k: usize) -> Result<Graph> {
    let m = &cloud.manifold;
    let n = cloud.len();
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let exact_proxy = m.has_closed_form();
    let pool = if exact_proxy { k } else { 2 * k + 2 };
    let mut edges = Vec::with_capacity(n * k);
    let mut dropped = 0usize;
    for i in 0..n {
        let p = &cloud.points[i];
        let mut cand: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (proxy(m, p, &cloud.points[j]), j)).collect();
        let take = pool.min(cand.len());
        if take == 0 {
            continue;
        }
        if take < cand.len() {
            cand.select_nth_unstable_by(take - 1, key_cmp);
            cand.truncate(take);
        }
        let mut exact: Vec<(f64, usize)> = if exact_proxy {
            cand
        } else {
            cand.into_iter()
                .filter_map(|(_, j)| {
                    let d = m.distance(p, &cloud.points[j]);
                    d.exact.then_some((d.value, j))
                })
                .collect()
        };
        exact.sort_by(key_cmp);
        exact.truncate(k);
        for (len, j) in exact {
            let limit = m.working_radius_at(p).min(m.working_radius_at(&cloud.points[j]));
            if !(len > 0.0) || len >= limit {
                dropped += 1;
                continue;
            }
            edges.push(Edge { i: i.min(j), j: i.max(j), length: len });
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} candidate edges with zero length or length >= r_M");
    }
    Graph::from_edges(m, cloud.points.clone(), edges, k)
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(graph: &Graph, sources: &[usize]) -> Vec<f64> {
    dijkstra_within(graph, sources, None)
}

fn dijkstra_within(graph: &Graph, sources: &[usize], allowed: Option<&[bool]>) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Item(0.0, s));
    }
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, len) in &graph.neighbors[v] {
            if allowed.is_some_and(|a| !a[w]) {
                continue;
            }
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Item(nd, w));
            }
        }
    }
    dist
}

/// Multi-source shortest-path distances; 0 on the sources.
pub fn graph_distance(graph: &Graph, sources: &[usize]) -> Result<DiscreteField> {
    if sources.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    if let Some(&s) = sources.iter().find(|&&s| s >= graph.len()) {
        return Err(Error::InvalidInput(format!("source {s} is not a vertex")));
    }
    Ok(DiscreteField::new(dijkstra(graph, sources)))
}

/// Shortest-path distances along paths that stay in `allowed`; `+inf` at
/// vertices that cannot be reached that way.
pub fn graph_distance_within(graph: &Graph, sources: &[usize], allowed: &[bool]) -> Result<DiscreteField> {
    if allowed.len() != graph.len() {
        return Err(Error::InvalidInput("mask length differs from vertex count".into()));
    }
    if sources.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    if let Some(&s) = sources.iter().find(|&&s| s >= graph.len() || !allowed[s]) {
        return Err(Error::InvalidInput(format!("source {s} is not an allowed vertex")));
    }
    Ok(DiscreteField::new(dijkstra_within(graph, sources, Some(allowed))))
}

/// Full shortest-path matrix, capped at `4e6` entries.
pub fn all_pairs_distances(graph: &Graph) -> Result<Vec<Vec<f64>>> {
    let n = graph.len();
    if n * n > 4_000_000 {
        return Err(Error::Precondition(format!("{n}^2 vertex pairs exceed the cap of 4e6")));
    }
    Ok((0..n).map(|s| dijkstra(graph, &[s])).collect())
}
