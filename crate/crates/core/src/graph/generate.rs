//! Synthetic graph generators: Erdős–Rényi G(n,m), Barabási–Albert,
//! Watts–Strogatz, and the (erased) configuration model, including a
//! power-law degree sequence for scale-free graphs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use super::Graph;
use crate::error::{Error, Result};

/// A generator specification; `generate(seed)` is deterministic in the seed.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// G(n, m): exactly `edges` edges chosen uniformly.
    ErdosRenyi { n: usize, edges: usize },
    /// Preferential attachment adding `attach` edges per new node.
    BarabasiAlbert { n: usize, attach: usize },
    /// Ring lattice of even degree `ring_degree` with rewiring probability.
    WattsStrogatz { n: usize, ring_degree: usize, rewire_prob: f64 },
    /// Erased configuration model over an explicit degree sequence.
    Configuration { degrees: Vec<usize> },
    /// Erased configuration model over a power-law degree sequence
    /// P(d) ∝ d^(−exponent) on [min_degree, ⌊√n⌋].
    PowerLaw { n: usize, exponent: f64, min_degree: usize },
}

impl Generator {
    pub fn generate(&self, seed: u64) -> Result<Graph> {
        match self {
            Generator::ErdosRenyi { n, edges } => erdos_renyi_gnm(*n, *edges, seed),
            Generator::BarabasiAlbert { n, attach } => barabasi_albert(*n, *attach, seed),
            Generator::WattsStrogatz { n, ring_degree, rewire_prob } => {
                watts_strogatz(*n, *ring_degree, *rewire_prob, seed)
            }
            Generator::Configuration { degrees } => configuration_model(degrees, seed),
            Generator::PowerLaw { n, exponent, min_degree } => {
                let degrees = power_law_degrees(*n, *exponent, *min_degree, seed)?;
                configuration_model(&degrees, seed.wrapping_add(1))
            }
        }
    }
}

fn pair_key(n: usize, u: usize, v: usize) -> u64 {
    let (a, b) = (u.min(v), u.max(v));
    a as u64 * n as u64 + b as u64
}

/// G(n, m): samples exactly `m` distinct edges uniformly. Dense requests
/// (m > half of all pairs) sample the complement instead.
pub fn erdos_renyi_gnm(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::invalid("graph needs at least one node"));
    }
    let max_edges = n * (n - 1) / 2;
    if m > max_edges {
        return Err(Error::invalid(format!("{m} edges exceed the {max_edges} possible")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if m * 2 <= max_edges {
        let mut chosen = HashSet::with_capacity(m);
        let mut edges = Vec::with_capacity(m);
        while edges.len() < m {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u == v {
                continue;
            }
            if chosen.insert(pair_key(n, u, v)) {
                edges.push((u.min(v) as u32, u.max(v) as u32));
            }
        }
        Graph::from_edges(n, edges)
    } else {
        // Sample the pairs to exclude.
        let exclude_count = max_edges - m;
        let mut excluded = HashSet::with_capacity(exclude_count);
        while excluded.len() < exclude_count {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u == v {
                continue;
            }
            excluded.insert(pair_key(n, u, v));
        }
        let mut edges = Vec::with_capacity(m);
        for u in 0..n {
            for v in (u + 1)..n {
                if !excluded.contains(&pair_key(n, u, v)) {
                    edges.push((u as u32, v as u32));
                }
            }
        }
        Graph::from_edges(n, edges)
    }
}

/// Barabási–Albert preferential attachment: starts from `attach` isolated
/// nodes; each new node connects to `attach` distinct existing nodes chosen
/// with probability proportional to degree. Yields `attach·(n − attach)`
/// edges.
pub fn barabasi_albert(n: usize, attach: usize, seed: u64) -> Result<Graph> {
    if attach == 0 || attach >= n {
        return Err(Error::invalid("attachment count must satisfy 1 <= attach < n"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(attach * (n - attach));
    // Every edge endpoint appears once here, so uniform sampling from the
    // list is degree-proportional sampling.
    let mut repeated: Vec<u32> = Vec::with_capacity(2 * attach * (n - attach));
    let mut targets: Vec<u32> = (0..attach as u32).collect();
    for source in attach as u32..n as u32 {
        for &t in &targets {
            edges.push((source, t));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat(source).take(attach));
        let mut next = HashSet::with_capacity(attach);
        while next.len() < attach {
            next.insert(repeated[rng.random_range(0..repeated.len())]);
        }
        targets = next.into_iter().collect();
        targets.sort_unstable();
    }
    Graph::from_edges(n, edges)
}

/// Watts–Strogatz small world: ring lattice where each node joins its
/// `ring_degree`/2 nearest neighbors on each side, then each lattice edge is
/// rewired with probability `rewire_prob` to a uniformly chosen new endpoint
/// (skipping self-loops and duplicates).
pub fn watts_strogatz(n: usize, ring_degree: usize, rewire_prob: f64, seed: u64) -> Result<Graph> {
    if ring_degree % 2 != 0 || ring_degree == 0 {
        return Err(Error::invalid("ring degree must be even and positive"));
    }
    if ring_degree >= n {
        return Err(Error::invalid("ring degree must be < n"));
    }
    if !(0.0..=1.0).contains(&rewire_prob) {
        return Err(Error::invalid("rewire probability must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<HashSet<u32>> = vec![HashSet::new(); n];
    let connect = |adj: &mut Vec<HashSet<u32>>, u: usize, v: usize| {
        adj[u].insert(v as u32);
        adj[v].insert(u as u32);
    };
    for j in 1..=ring_degree / 2 {
        for u in 0..n {
            connect(&mut adj, u, (u + j) % n);
        }
    }
    for j in 1..=ring_degree / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.random::<f64>() >= rewire_prob {
                continue;
            }
            if adj[u].len() >= n - 1 {
                continue; // already connected to everyone
            }
            let w = loop {
                let w = rng.random_range(0..n);
                if w != u && !adj[u].contains(&(w as u32)) {
                    break w;
                }
            };
            adj[u].remove(&(v as u32));
            adj[v].remove(&(u as u32));
            connect(&mut adj, u, w);
        }
    }
    let mut edges = Vec::new();
    for (u, nbrs) in adj.iter().enumerate() {
        for &v in nbrs {
            if (u as u32) < v {
                edges.push((u as u32, v));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Erdős–Gallai graphicality test (assumes an even degree sum was already
/// checked).
fn is_graphical(sorted_desc: &[usize]) -> bool {
    let n = sorted_desc.len();
    let mut prefix = 0u64;
    for k in 1..=n {
        prefix += sorted_desc[k - 1] as u64;
        let tail: u64 = sorted_desc[k..]
            .iter()
            .map(|&d| d.min(k) as u64)
            .sum();
        if prefix > k as u64 * (k as u64 - 1) + tail {
            return false;
        }
    }
    true
}

/// Erased configuration model: stubs are matched uniformly, then self-loops
/// and parallel edges are removed, so realized degrees can fall slightly
/// below the requested ones. Rejects non-graphical sequences.
pub fn configuration_model(degrees: &[usize], seed: u64) -> Result<Graph> {
    let n = degrees.len();
    if n == 0 {
        return Err(Error::invalid("degree sequence is empty"));
    }
    if degrees.iter().any(|&d| d >= n) {
        return Err(Error::invalid("a degree exceeds n − 1"));
    }
    let total: usize = degrees.iter().sum();
    if total % 2 != 0 {
        return Err(Error::invalid("degree sequence has an odd sum"));
    }
    let mut sorted: Vec<usize> = degrees.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    if !is_graphical(&sorted) {
        return Err(Error::invalid("degree sequence is not graphical"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<u32> = Vec::with_capacity(total);
    for (node, &d) in degrees.iter().enumerate() {
        stubs.extend(std::iter::repeat(node as u32).take(d));
    }
    stubs.shuffle(&mut rng);

    let mut seen = HashSet::new();
    let mut edges = Vec::with_capacity(total / 2);
    for pair in stubs.chunks_exact(2) {
        let (u, v) = (pair[0], pair[1]);
        if u == v {
            continue;
        }
        if seen.insert((u.min(v), u.max(v))) {
            edges.push((u, v));
        }
    }
    Graph::from_edges(n, edges)
}

/// Power-law degree sequence: degrees drawn from P(d) ∝ d^(−exponent) on
/// [min_degree, ⌊√n⌋], with one degree bumped when the sum comes out odd.
pub fn power_law_degrees(
    n: usize,
    exponent: f64,
    min_degree: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::invalid("need at least two nodes"));
    }
    if min_degree == 0 {
        return Err(Error::invalid("minimum degree must be >= 1"));
    }
    let max_degree = ((n as f64).sqrt().floor() as usize).max(min_degree);
    let weights: Vec<f64> =
        (min_degree..=max_degree).map(|d| (d as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degrees = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u = rng.random::<f64>() * total;
        let mut chosen = max_degree;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                chosen = min_degree + i;
                break;
            }
            u -= w;
        }
        degrees.push(chosen);
    }
    if degrees.iter().sum::<usize>() % 2 != 0 {
        degrees[0] += 1;
    }
    Ok(degrees)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{stats, transitivity};

    #[test]
    fn er_exact_edge_count_and_density() {
        let g = erdos_renyi_gnm(1000, 5054, 7).unwrap();
        assert_eq!(g.edge_count(), 5054);
        let s = stats(&g).unwrap();
        assert!((s.density - 2.0 * 5054.0 / (1000.0 * 999.0)).abs() < 1e-15);
        assert!((s.density - 0.01).abs() < 2e-3);
    }

    #[test]
    fn er_dense_request_uses_complement() {
        let g = erdos_renyi_gnm(40, 700, 3).unwrap();
        assert_eq!(g.edge_count(), 700);
        // The full clique is reachable too.
        let g = erdos_renyi_gnm(30, 435, 3).unwrap();
        assert_eq!(g.edge_count(), 435);
        assert_eq!(g.max_degree(), 29);
    }

    #[test]
    fn er_rejects_impossible_edge_count() {
        assert!(erdos_renyi_gnm(10, 46, 0).is_err());
    }

    #[test]
    fn ba_edge_count_matches_attachment() {
        // 1000 nodes, attach 10 → 9900 edges → mean degree 19.8.
        let g = barabasi_albert(1000, 10, 11).unwrap();
        assert_eq!(g.edge_count(), 9900);
        assert!((g.average_degree() - 19.8).abs() < 1e-12);
    }

    #[test]
    fn ws_unrewired_is_regular_ring_with_known_transitivity() {
        let g = watts_strogatz(10, 4, 0.0, 0).unwrap();
        assert!((0..10).all(|u| g.degree(u) == 4));
        // Closed form 3(k−2)/(4(k−2)+4) at k = 4 gives 1/2.
        assert!((transitivity(&g) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ws_rewired_keeps_edge_count() {
        let g = watts_strogatz(100, 6, 0.3, 5).unwrap();
        assert_eq!(g.edge_count(), 300);
    }

    #[test]
    fn configuration_model_respects_even_graphical_sequences() {
        let degrees = vec![3, 3, 2, 2, 2, 2];
        let g = configuration_model(&degrees, 5).unwrap();
        // Erased model can lose edges but never gains them.
        assert!(g.edge_count() <= 7);
        assert!(g.node_count() == 6);
    }

    #[test]
    fn configuration_model_rejects_bad_sequences() {
        assert!(configuration_model(&[1, 1, 1], 0).is_err()); // odd sum
        assert!(configuration_model(&[3, 1], 0).is_err()); // d > n−1
        assert!(configuration_model(&[4, 4, 1, 1, 1, 1], 0).is_err()); // fails Erdős–Gallai
    }

    #[test]
    fn power_law_sequence_is_bounded_and_even() {
        let degrees = power_law_degrees(1000, 2.5, 1, 9).unwrap();
        assert_eq!(degrees.len(), 1000);
        assert_eq!(degrees.iter().sum::<usize>() % 2, 0);
        assert!(degrees.iter().all(|&d| (1..=32).contains(&d)));
        let g = Generator::PowerLaw { n: 1000, exponent: 2.5, min_degree: 1 }
            .generate(9)
            .unwrap();
        assert!(g.edge_count() > 0);
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let specs = [
            Generator::ErdosRenyi { n: 200, edges: 800 },
            Generator::BarabasiAlbert { n: 120, attach: 3 },
            Generator::WattsStrogatz { n: 80, ring_degree: 4, rewire_prob: 0.2 },
            Generator::PowerLaw { n: 150, exponent: 2.5, min_degree: 1 },
        ];
        for spec in specs {
            let a = spec.generate(21).unwrap();
            let b = spec.generate(21).unwrap();
            assert_eq!(a, b, "{spec:?}");
            let c = spec.generate(22).unwrap();
            assert!(a != c || a.edge_count() == 0, "{spec:?} ignored the seed");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn er_stats_are_well_formed(
                n in 5usize..60,
                seed in 0u64..1000,
                fill in 0.05f64..0.9,
            ) {
                let max = n * (n - 1) / 2;
                let m = ((max as f64 * fill) as usize).max(1);
                let g = erdos_renyi_gnm(n, m, seed).unwrap();
                prop_assert_eq!(g.edge_count(), m);
                let s = stats(&g).unwrap();
                prop_assert!((0.0..=1.0).contains(&s.density));
                prop_assert!((0.0..=1.0).contains(&s.transitivity));
                prop_assert!(g.average_degree() <= s.lambda_a + 1e-6);
                if s.components == 1 && n >= 2 {
                    prop_assert!(s.avg_path_length >= 1.0);
                }
            }
        }
    }
}
