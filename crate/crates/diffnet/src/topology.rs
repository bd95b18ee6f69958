//! Agent networks and the weight matrices used by the diffusion protocols.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{DiffnetError, Result};
use crate::rng;

const CONNECTIVITY_RETRY_CAP: usize = 10_000;

/// Static undirected connected communication graph over `n_agents` nodes.
///
/// Edges are stored as ordered pairs `(k, l)` with `k < l`; agents are
/// indexed `0..N-1` internally (1-based only in display output).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    n_agents: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Network {
    /// Build a network from an explicit edge list, validating indices,
    /// self-loops and connectivity. Zero-degree agents are allowed here
    /// (single-agent graphs, hand-built test networks) as long as the
    /// graph as a whole is connected.
    pub fn new(n_agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_agents == 0 {
            return Err(DiffnetError::InvalidNetwork(
                "network needs at least one agent".into(),
            ));
        }
        let mut set = BTreeSet::new();
        for (k, l) in edges {
            if k == l {
                return Err(DiffnetError::InvalidNetwork(format!(
                    "self-loop at agent {k}"
                )));
            }
            if k >= n_agents || l >= n_agents {
                return Err(DiffnetError::InvalidNetwork(format!(
                    "edge ({k}, {l}) out of range for {n_agents} agents"
                )));
            }
            set.insert((k.min(l), k.max(l)));
        }
        let net = Network {
            n_agents,
            edges: set,
        };
        if !net.is_connected() {
            return Err(DiffnetError::InvalidNetwork("graph is not connected".into()));
        }
        Ok(net)
    }

    /// Erdős–Rényi draw rejected until connected; deterministic given seed.
    pub fn generate_random_connected(
        n_agents: usize,
        edge_probability: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(edge_probability > 0.0 && edge_probability < 1.0) {
            return Err(DiffnetError::EdgeProbability(edge_probability));
        }
        if n_agents == 0 {
            return Err(DiffnetError::InvalidNetwork(
                "network needs at least one agent".into(),
            ));
        }
        let mut rng = rng::shared_stream(seed, rng::purpose::TOPOLOGY);
        for _ in 0..CONNECTIVITY_RETRY_CAP {
            let mut edges = BTreeSet::new();
            for k in 0..n_agents {
                for l in (k + 1)..n_agents {
                    if rng.random::<f64>() < edge_probability {
                        edges.insert((k, l));
                    }
                }
            }
            let candidate = Network { n_agents, edges };
            if candidate.is_connected() {
                return Ok(candidate);
            }
        }
        Err(DiffnetError::ConnectivityRetriesExhausted(
            CONNECTIVITY_RETRY_CAP,
        ))
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, k: usize, l: usize) -> bool {
        k != l && self.edges.contains(&(k.min(l), k.max(l)))
    }

    /// Neighbors of `k`, excluding `k` itself.
    pub fn neighbors(&self, k: usize) -> Vec<usize> {
        (0..self.n_agents).filter(|&l| self.has_edge(k, l)).collect()
    }

    pub fn degree(&self, k: usize) -> usize {
        (0..self.n_agents).filter(|&l| self.has_edge(k, l)).count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_agents).map(|k| self.degree(k)).max().unwrap_or(0)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_agents];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(k) = queue.pop() {
            for l in self.neighbors(k) {
                if !seen[l] {
                    seen[l] = true;
                    queue.push(l);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Edge-list text format: first line `N`, then one `k l` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.n_agents);
        for (k, l) in &self.edges {
            let _ = writeln!(out, "{k} {l}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let n: usize = lines
            .next()
            .ok_or_else(|| DiffnetError::InvalidNetwork("empty edge list".into()))?
            .trim()
            .parse()
            .map_err(|_| DiffnetError::InvalidNetwork("bad agent count line".into()))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let k: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| DiffnetError::InvalidNetwork(format!("bad edge line: {line}")))?;
            let l: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| DiffnetError::InvalidNetwork(format!("bad edge line: {line}")))?;
            edges.push((k, l));
        }
        Network::new(n, edges)
    }
}

/// Left-stochastic combination weights constrained to the graph: entry
/// `(l, k)` is the weight agent `k` puts on the estimate received from `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    n: usize,
    a: Vec<f64>, // row-major, a[l * n + k] = A_{lk}
}

impl MixingMatrix {
    pub fn from_entries(n: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(DiffnetError::DimensionMismatch {
                expected: n * n,
                got: a.len(),
            });
        }
        let m = MixingMatrix { n, a };
        for k in 0..n {
            let col: f64 = (0..n).map(|l| m.get(l, k)).sum();
            if (col - 1.0).abs() > 1e-9 {
                return Err(DiffnetError::InvalidConfig(format!(
                    "mixing column {k} sums to {col}, expected 1"
                )));
            }
        }
        if m.a.iter().any(|&v| v < 0.0) {
            return Err(DiffnetError::InvalidConfig(
                "mixing matrix has negative entries".into(),
            ));
        }
        Ok(m)
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    /// `A_{lk}`: weight from `l` into `k`.
    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.a[l * self.n + k]
    }

    /// Row-major CSV, one row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for l in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|k| self.get(l, k).to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// `A_{lk} = 1/(deg_max+1)` on edges, diagonal `1 - deg_k/(deg_max+1)`.
pub fn max_degree_weights(net: &Network) -> MixingMatrix {
    let n = net.n_agents();
    let denom = (net.max_degree() + 1) as f64;
    let mut a = vec![0.0; n * n];
    for k in 0..n {
        for l in 0..n {
            if net.has_edge(l, k) {
                a[l * n + k] = 1.0 / denom;
            }
        }
        a[k * n + k] = 1.0 - net.degree(k) as f64 / denom;
    }
    MixingMatrix { n, a }
}

/// Identity mixing models non-cooperating agents.
pub fn identity_mixing(n_agents: usize) -> MixingMatrix {
    let mut a = vec![0.0; n_agents * n_agents];
    for k in 0..n_agents {
        a[k * n_agents + k] = 1.0;
    }
    MixingMatrix { n: n_agents, a }
}

/// Multitask similarity weights ρ: row-stochastic over neighbors, zero
/// diagonal. Zero-degree agents get an all-zero row (their penalty vanishes).
#[derive(Debug, Clone, PartialEq)]
pub struct TaskWeights {
    n: usize,
    rho: Vec<f64>, // row-major, rho[k * n + l] = ρ_{kl}
}

impl TaskWeights {
    pub fn n_agents(&self) -> usize {
        self.n
    }

    /// `ρ_{kl}`: weight agent `k` puts on its similarity to `l`.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.rho[k * self.n + l]
    }
}

/// Uniform regularization coefficients: `ρ_{kl} = 1/deg_k` on edges.
pub fn uniform_task_weights(net: &Network) -> TaskWeights {
    let n = net.n_agents();
    let mut rho = vec![0.0; n * n];
    for k in 0..n {
        let deg = net.degree(k);
        if deg == 0 {
            // Hand-built network with an isolated agent: penalty vanishes.
            eprintln!("warning: agent {k} has no neighbors, multitask weights row is zero");
            continue;
        }
        for l in net.neighbors(k) {
            rho[k * n + l] = 1.0 / deg as f64;
        }
    }
    TaskWeights { n, rho }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent breadth-first connectivity oracle.
    fn bfs_connected(n: usize, edges: &[(usize, usize)]) -> bool {
        let mut adj = vec![vec![]; n];
        for &(k, l) in edges {
            adj[k].push(l);
            adj[l].push(k);
        }
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(k) = queue.pop_front() {
            for &l in &adj[k] {
                if !seen[l] {
                    seen[l] = true;
                    queue.push_back(l);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn path3() -> Network {
        Network::new(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn single_agent_is_connected_with_no_edges() {
        let net = Network::generate_random_connected(1, 0.2, 99).unwrap();
        assert_eq!(net.n_agents(), 1);
        assert_eq!(net.n_edges(), 0);
    }

    #[test]
    fn two_agents_always_get_the_single_edge() {
        let net = Network::generate_random_connected(2, 0.5, 3).unwrap();
        assert_eq!(net.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn generated_nine_agent_graph_is_connected_per_bfs_oracle() {
        let net = Network::generate_random_connected(9, 0.2, 42).unwrap();
        let edges: Vec<_> = net.edges().collect();
        assert!(bfs_connected(9, &edges));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = Network::generate_random_connected(12, 0.3, 7).unwrap();
        let b = Network::generate_random_connected(12, 0.3, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_edge_probability() {
        assert!(Network::generate_random_connected(3, 0.0, 1).is_err());
        assert!(Network::generate_random_connected(3, 1.0, 1).is_err());
        assert!(Network::generate_random_connected(3, -0.5, 1).is_err());
    }

    #[test]
    fn rejects_self_loops_and_disconnected_graphs() {
        assert!(Network::new(3, [(0, 0)]).is_err());
        assert!(Network::new(3, [(0, 1)]).is_err()); // agent 2 isolated
        assert!(Network::new(3, [(0, 5)]).is_err());
    }

    #[test]
    fn max_degree_weights_on_path_graph() {
        let a = max_degree_weights(&path3());
        // deg_max = 2, off-diagonal connected entries 1/3
        assert!((a.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.get(1, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.get(0, 2), 0.0);
        assert!((a.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((a.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.get(2, 2) - 2.0 / 3.0).abs() < 1e-15);
        for k in 0..3 {
            let col: f64 = (0..3).map(|l| a.get(l, k)).sum();
            assert!((col - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn max_degree_weights_single_agent() {
        let net = Network::new(1, []).unwrap();
        let a = max_degree_weights(&net);
        assert_eq!(a.get(0, 0), 1.0);
    }

    #[test]
    fn max_degree_weights_complete_graph() {
        let net = Network::new(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let a = max_degree_weights(&net);
        for l in 0..4 {
            for k in 0..4 {
                assert!((a.get(l, k) - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_mixing_shapes() {
        let a = identity_mixing(1);
        assert_eq!(a.get(0, 0), 1.0);
        let a = identity_mixing(3);
        for l in 0..3 {
            for k in 0..3 {
                assert_eq!(a.get(l, k), if l == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn uniform_task_weights_on_path_graph() {
        let rho = uniform_task_weights(&path3());
        assert!((rho.get(1, 0) - 0.5).abs() < 1e-15);
        assert!((rho.get(1, 2) - 0.5).abs() < 1e-15);
        assert!((rho.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((rho.get(2, 1) - 1.0).abs() < 1e-15);
        assert_eq!(rho.get(0, 0), 0.0);
        assert_eq!(rho.get(0, 2), 0.0);
    }

    #[test]
    fn uniform_task_weights_complete_triangle() {
        let net = Network::new(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let rho = uniform_task_weights(&net);
        for k in 0..3 {
            for l in 0..3 {
                let expect = if k == l { 0.0 } else { 0.5 };
                assert!((rho.get(k, l) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn uniform_task_weights_single_agent_is_zero() {
        let net = Network::new(1, []).unwrap();
        let rho = uniform_task_weights(&net);
        assert_eq!(rho.get(0, 0), 0.0);
    }

    #[test]
    fn edge_list_round_trip() {
        let net = Network::generate_random_connected(7, 0.4, 11).unwrap();
        let text = net.to_edge_list();
        let back = Network::from_edge_list(&text).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn mixing_matrix_csv_has_n_rows() {
        let a = max_degree_weights(&path3());
        let csv = a.to_csv();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn random_graphs_satisfy_mixing_invariants() {
        for trial in 0..200u64 {
            let n = 2 + (trial as usize * 7) % 29;
            let net = Network::generate_random_connected(n, 0.3, 1000 + trial).unwrap();
            let a = max_degree_weights(&net);
            for k in 0..n {
                let col: f64 = (0..n).map(|l| a.get(l, k)).sum();
                assert!((col - 1.0).abs() < 1e-12, "column {k} sums to {col}");
                for l in 0..n {
                    assert!(a.get(l, k) >= 0.0);
                    assert_eq!(a.get(l, k), a.get(k, l));
                    if l != k && !net.has_edge(l, k) {
                        assert_eq!(a.get(l, k), 0.0);
                    }
                }
            }
            let rho = uniform_task_weights(&net);
            for k in 0..n {
                if net.degree(k) >= 1 {
                    let row: f64 = (0..n).map(|l| rho.get(k, l)).sum();
                    assert!((row - 1.0).abs() < 1e-12);
                }
                assert_eq!(rho.get(k, k), 0.0);
            }
        }
    }
}
