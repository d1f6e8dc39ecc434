//! Undirected graphs: construction from generators or edge lists, topological
//! statistics, and the leading adjacency eigenvalue.

mod eigen;
mod generate;

pub use eigen::{leading_eigenvalue, leading_eigenvalue_seeded, POWER_ITERATION_MAX_ITER};
pub use generate::{configuration_model, power_law_degrees, Generator};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// Immutable simple undirected graph: no self-loops, no duplicate edges,
/// node ids in `[0, n)`. Neighbor lists are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from an edge iterator, rejecting self-loops, duplicate
    /// edges, and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut adj = vec![Vec::new(); n];
        let mut edge_count = 0usize;
        for (u, v) in edges {
            if u == v {
                return Err(Error::invalid(format!("self-loop at node {u}")));
            }
            if u as usize >= n || v as usize >= n {
                return Err(Error::invalid(format!("edge ({u},{v}) out of range for n={n}")));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::invalid(format!("duplicate edge ({u},{v})")));
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
            edge_count += 1;
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Self { adj, edge_count })
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.adj[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn average_degree(&self) -> f64 {
        if self.adj.is_empty() {
            return 0.0;
        }
        2.0 * self.edge_count as f64 / self.adj.len() as f64
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&(v as u32)).is_ok()
    }

    /// Edges as `(u, v)` pairs with `u < v`, in node order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, nbrs)| {
            nbrs.iter()
                .filter(move |&&v| (u as u32) < v)
                .map(move |&v| (u as u32, v))
        })
    }

    /// Writes the edge list in the same text format [`load_edgelist`] reads.
    pub fn write_edgelist<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    /// Connected components as lists of node ids.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let n = self.node_count();
        let mut comp = vec![usize::MAX; n];
        let mut out: Vec<Vec<u32>> = Vec::new();
        let mut queue = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start as u32];
            comp[start] = id;
            queue.push(start as u32);
            while let Some(u) = queue.pop() {
                for &v in self.neighbors(u as usize) {
                    if comp[v as usize] == usize::MAX {
                        comp[v as usize] = id;
                        members.push(v);
                        queue.push(v);
                    }
                }
            }
            out.push(members);
        }
        out
    }
}

/// Topological statistics in the shape of the toolkit's graph reports.
/// Diameter and average path length are computed on the largest connected
/// component; density is `2|E|/(n(n−1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub components: usize,
    pub largest_component: usize,
    pub lambda_a: f64,
    pub diameter: usize,
    pub transitivity: f64,
    pub density: f64,
    pub avg_path_length: f64,
}

impl GraphStats {
    pub const CSV_HEADER: &'static str =
        "graph,nodes,edges,lambda_a,diameter,transitivity,density,avg_path_length,components";

    pub fn csv_row(&self, name: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            name,
            self.nodes,
            self.edges,
            self.lambda_a,
            self.diameter,
            self.transitivity,
            self.density,
            self.avg_path_length,
            self.components
        )
    }
}

/// Computes [`GraphStats`]. The leading eigenvalue uses power iteration at
/// tolerance 1e-8. Errors on the zero-node graph.
pub fn stats(graph: &Graph) -> Result<GraphStats> {
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::invalid("stats of an empty graph"));
    }
    let components = graph.components();
    let largest = components.iter().max_by_key(|c| c.len()).expect("n > 0");

    let (diameter, avg_path_length) = bfs_metrics(graph, largest);
    let density = if n < 2 {
        0.0
    } else {
        2.0 * graph.edge_count() as f64 / (n as f64 * (n - 1) as f64)
    };

    Ok(GraphStats {
        nodes: n,
        edges: graph.edge_count(),
        components: components.len(),
        largest_component: largest.len(),
        lambda_a: leading_eigenvalue(graph, 1e-8)?,
        diameter,
        transitivity: transitivity(graph),
        density,
        avg_path_length,
    })
}

/// Global transitivity: 3·triangles / paths-of-length-2.
pub fn transitivity(graph: &Graph) -> f64 {
    let wedges: u64 = (0..graph.node_count())
        .map(|v| {
            let d = graph.degree(v) as u64;
            d * d.saturating_sub(1) / 2
        })
        .sum();
    if wedges == 0 {
        return 0.0;
    }
    // Each triangle contributes one common neighbor to each of its 3 edges,
    // so the sum below equals 3 × (triangle count).
    let mut closed: u64 = 0;
    for (u, v) in graph.edges() {
        closed += sorted_intersection_len(graph.neighbors(u as usize), graph.neighbors(v as usize));
    }
    closed as f64 / wedges as f64
}

fn sorted_intersection_len(a: &[u32], b: &[u32]) -> u64 {
    let mut i = 0;
    let mut j = 0;
    let mut count = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Diameter and mean shortest-path length over one component via BFS from
/// every member. A single-node component reports (0, 0).
fn bfs_metrics(graph: &Graph, component: &[u32]) -> (usize, f64) {
    if component.len() < 2 {
        return (0, 0.0);
    }
    let n = graph.node_count();
    let mut dist = vec![u32::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    let mut diameter = 0u32;
    let mut total: u64 = 0;
    for &source in component {
        for &v in component {
            dist[v as usize] = u32::MAX;
        }
        dist[source as usize] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &v in graph.neighbors(u as usize) {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        for &v in component {
            let d = dist[v as usize];
            diameter = diameter.max(d);
            total += d as u64;
        }
    }
    let pairs = component.len() as u64 * (component.len() as u64 - 1);
    (diameter as usize, total as f64 / pairs as f64)
}

/// Outcome of reading an edge-list file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgelistReport {
    pub nodes: usize,
    pub edges: usize,
    /// Self-loop and duplicate lines dropped.
    pub dropped: usize,
}

/// Reads a whitespace-separated `u v` edge list (`#` comments allowed).
/// Node labels are arbitrary tokens, relabeled to `[0, n)` in order of first
/// appearance. Duplicate and self-loop lines are dropped and counted.
pub fn load_edgelist(path: impl AsRef<Path>) -> Result<(Graph, EdgelistReport)> {
    let file = std::fs::File::open(path)?;
    parse_edgelist(std::io::BufReader::new(file))
}

/// [`load_edgelist`] over any reader.
pub fn parse_edgelist<R: BufRead>(reader: R) -> Result<(Graph, EdgelistReport)> {
    let mut labels: HashMap<String, u32> = HashMap::new();
    let intern = |token: &str, labels: &mut HashMap<String, u32>| -> u32 {
        if let Some(&id) = labels.get(token) {
            return id;
        }
        let id = labels.len() as u32;
        labels.insert(token.to_string(), id);
        id
    };

    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    let mut dropped = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (Some(a), Some(b)) = (tokens.next(), tokens.next()) else {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 'u v', got '{trimmed}'"),
            });
        };
        let u = intern(a, &mut labels);
        let v = intern(b, &mut labels);
        if u == v || !seen.insert((u.min(v), u.max(v))) {
            dropped += 1;
            continue;
        }
        edges.push((u, v));
    }
    let n = labels.len();
    let graph = Graph::from_edges(n, edges)?;
    let report = EdgelistReport { nodes: n, edges: graph.edge_count(), dropped };
    Ok((graph, report))
}
