//! Leading adjacency eigenvalue via power iteration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::error::{Error, Result};

pub const POWER_ITERATION_MAX_ITER: usize = 10_000;

/// Start-vector seed used by [`leading_eigenvalue`]; fixed so results are
/// reproducible without threading a seed through every caller.
const START_VECTOR_SEED: u64 = 0x5eed_cafe;

/// Spectral radius λ_A of the adjacency matrix.
///
/// Power iteration runs on the shifted operator A + I so bipartite spectra
/// (where −λ_A ties λ_A in magnitude) still converge to the top eigenvalue.
/// Iteration stops when successive Rayleigh estimates differ by at most
/// `tol`; exceeding [`POWER_ITERATION_MAX_ITER`] is an error.
pub fn leading_eigenvalue(graph: &Graph, tol: f64) -> Result<f64> {
    leading_eigenvalue_seeded(graph, tol, START_VECTOR_SEED)
}

/// [`leading_eigenvalue`] with an explicit start-vector seed.
pub fn leading_eigenvalue_seeded(graph: &Graph, tol: f64, seed: u64) -> Result<f64> {
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::invalid("leading eigenvalue of an empty graph"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be > 0"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
    normalize(&mut v);

    let mut w = vec![0.0; n];
    let mut prev = f64::INFINITY;
    for iter in 0..POWER_ITERATION_MAX_ITER {
        // w = (A + I)·v
        for u in 0..n {
            let mut acc = v[u];
            for &nb in graph.neighbors(u) {
                acc += v[nb as usize];
            }
            w[u] = acc;
        }
        // Rayleigh quotient of the shifted operator (v is unit).
        let shifted: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let lambda = shifted - 1.0;
        if iter > 0 && (lambda - prev).abs() <= tol {
            return Ok(lambda);
        }
        prev = lambda;
        std::mem::swap(&mut v, &mut w);
        normalize(&mut v);
    }
    Err(Error::NoConvergence { max_iter: POWER_ITERATION_MAX_ITER })
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Generator;
    use nalgebra::DMatrix;

    /// Dense symmetric eigensolver oracle, independent of power iteration.
    fn dense_lambda(graph: &Graph) -> f64 {
        let n = graph.node_count();
        let a = DMatrix::<f64>::from_fn(n, n, |i, j| {
            if i != j && graph.has_edge(i, j) {
                1.0
            } else {
                0.0
            }
        });
        a.symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n as u32 {
            for v in (u + 1)..n as u32 {
                edges.push((u, v));
            }
        }
        Graph::from_edges(n, edges).unwrap()
    }

    fn star(n: usize) -> Graph {
        Graph::from_edges(n, (1..n as u32).map(|v| (0, v))).unwrap()
    }

    #[test]
    fn complete_graph_spectrum() {
        for n in [2, 5, 20] {
            let lambda = leading_eigenvalue(&complete(n), 1e-10).unwrap();
            assert!((lambda - (n as f64 - 1.0)).abs() < 1e-8, "K_{n}: {lambda}");
        }
    }

    #[test]
    fn star_graph_spectrum() {
        // Star on n nodes has λ = sqrt(n−1); also a bipartite stress test.
        for n in [5, 17, 50] {
            let g = star(n);
            let lambda = leading_eigenvalue(&g, 1e-10).unwrap();
            assert!((lambda - ((n - 1) as f64).sqrt()).abs() < 1e-7, "star {n}: {lambda}");
            assert!((lambda - dense_lambda(&g)).abs() < 1e-7);
        }
    }

    #[test]
    fn single_node_and_edgeless() {
        let g = Graph::from_edges(1, []).unwrap();
        assert!(leading_eigenvalue(&g, 1e-10).unwrap().abs() < 1e-12);
        let g = Graph::from_edges(4, []).unwrap();
        assert!(leading_eigenvalue(&g, 1e-10).unwrap().abs() < 1e-12);
    }

    #[test]
    fn empty_graph_is_invalid() {
        let g = Graph::from_edges(0, []).unwrap();
        assert!(leading_eigenvalue(&g, 1e-10).is_err());
    }

    #[test]
    fn matches_dense_oracle_on_random_graphs() {
        for seed in 0..25u64 {
            let n = 5 + (seed as usize * 7) % 46;
            let m = (n * (n - 1) / 2).min(2 * n);
            let g = Generator::ErdosRenyi { n, edges: m }.generate(seed).unwrap();
            let pi = leading_eigenvalue(&g, 1e-12).unwrap();
            let dense = dense_lambda(&g);
            assert!((pi - dense).abs() < 1e-6, "seed {seed}: {pi} vs {dense}");
        }
    }

    #[test]
    fn average_degree_lower_bounds_lambda() {
        for seed in 0..10u64 {
            let g = Generator::ErdosRenyi { n: 60, edges: 150 }.generate(seed).unwrap();
            let lambda = leading_eigenvalue(&g, 1e-10).unwrap();
            assert!(g.average_degree() <= lambda + 1e-6);
            assert!(lambda <= g.max_degree() as f64 + 1e-6);
        }
    }
}
