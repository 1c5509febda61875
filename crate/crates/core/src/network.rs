//! Qudit networks: vertices joined by antiferromagnetic exchange couplings.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

/// Weighted graph on `num_vertices` qudits. Vertices are 0-based; the JSON
/// form is 1-based. Edges are kept normalized: `i < j`, sorted, unique.
#[derive(Debug, Clone, PartialEq)]
pub struct QuditNetwork {
    num_vertices: usize,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    num_qudits: usize,
    edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Chain,
    Ring,
    Star,
    Complete,
    RandomConnected,
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "chain" => Topology::Chain,
            "ring" => Topology::Ring,
            "star" => Topology::Star,
            "complete" => Topology::Complete,
            "random" | "random_connected" | "random-connected" => Topology::RandomConnected,
            other => return Err(Error::Validation(format!("unknown topology {other:?}"))),
        })
    }
}

impl QuditNetwork {
    /// Build from 0-based `(i, j, J)` triples.
    pub fn new(
        num_vertices: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if num_vertices == 0 {
            return Err(Error::Validation(
                "network needs at least one vertex".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (a, b, coupling) in edges {
            if a >= num_vertices || b >= num_vertices {
                return Err(Error::Validation(format!(
                    "edge ({}, {}) references a vertex outside 1..={num_vertices}",
                    a + 1,
                    b + 1
                )));
            }
            if a == b {
                return Err(Error::Validation(format!("self-loop on vertex {}", a + 1)));
            }
            if !coupling.is_finite() || coupling <= 0.0 {
                return Err(Error::Validation(format!(
                    "coupling {coupling} on edge ({}, {}): antiferromagnetic required (J > 0)",
                    a + 1,
                    b + 1
                )));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((i, j)) {
                return Err(Error::Validation(format!(
                    "duplicate edge ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
            out.push(Edge { i, j, coupling });
        }
        out.sort_by_key(|e| (e.i, e.j));
        Ok(Self {
            num_vertices,
            edges: out,
        })
    }

    /// Network whose couplings may have either sign. Only used to show that
    /// the antiferromagnetic requirement matters.
    #[doc(hidden)]
    pub fn new_unchecked_signs(num_vertices: usize, edges: Vec<(usize, usize, f64)>) -> Self {
        let mut edges: Vec<Edge> = edges
            .into_iter()
            .map(|(a, b, coupling)| Edge {
                i: a.min(b),
                j: a.max(b),
                coupling,
            })
            .collect();
        edges.sort_by_key(|e| (e.i, e.j));
        Self {
            num_vertices,
            edges,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_coupling(&self) -> f64 {
        self.edges.iter().map(|e| e.coupling).sum()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let (i, j) = (i.min(j), i.max(j));
        self.edges.iter().any(|e| e.i == i && e.j == j)
    }

    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        let mut seen = vec![false; self.num_vertices];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.num_vertices
    }

    /// Same graph with every coupling replaced by a draw from `(0, max]`.
    pub fn with_random_couplings<R: Rng + ?Sized>(&self, max: f64, rng: &mut R) -> Self {
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let u: f64 = rng.random();
                Edge {
                    coupling: max * (1.0 - u),
                    ..*e
                }
            })
            .collect();
        Self {
            num_vertices: self.num_vertices,
            edges,
        }
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("network JSON: {e}")))?;
        let mut edges = Vec::with_capacity(file.edges.len());
        for (i, j, coupling) in file.edges {
            if i == 0 || j == 0 {
                return Err(Error::Validation("vertex indices are 1-based".into()));
            }
            edges.push((i - 1, j - 1, coupling));
        }
        Self::new(file.num_qudits, edges)
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            num_qudits: self.num_vertices,
            edges: self
                .edges
                .iter()
                .map(|e| (e.i + 1, e.j + 1, e.coupling))
                .collect(),
        };
        serde_json::to_string(&file).expect("network serializes")
    }
}

/// Standard graph families with uniform coupling `coupling`.
///
/// `RandomConnected` draws a uniform labelled spanning tree (Prüfer sequence)
/// and then adds each remaining pair independently with probability 1/2.
pub fn make_topology(kind: Topology, n: usize, coupling: f64, seed: u64) -> Result<QuditNetwork> {
    let min = if kind == Topology::Ring { 3 } else { 2 };
    if n < min {
        return domain(format!("{kind:?} needs at least {min} vertices, got {n}"));
    }
    let pairs: Vec<(usize, usize)> = match kind {
        Topology::Chain => (0..n - 1).map(|i| (i, i + 1)).collect(),
        Topology::Ring => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        Topology::Star => (1..n).map(|i| (0, i)).collect(),
        Topology::Complete => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        Topology::RandomConnected => {
            random_connected_pairs(n, &mut ChaCha8Rng::seed_from_u64(seed))
        }
    };
    QuditNetwork::new(n, pairs.into_iter().map(|(i, j)| (i, j, coupling)))
}

fn random_connected_pairs<R: Rng>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut tree = BTreeSet::new();
    if n == 2 {
        tree.insert((0, 1));
    } else {
        let prufer: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
        let mut degree = vec![1usize; n];
        for &v in &prufer {
            degree[v] += 1;
        }
        for &v in &prufer {
            let leaf = (0..n)
                .find(|&u| degree[u] == 1)
                .expect("a leaf always exists");
            tree.insert((leaf.min(v), leaf.max(v)));
            degree[leaf] -= 1;
            degree[v] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
        tree.insert((rest[0], rest[1]));
    }
    let mut pairs: Vec<(usize, usize)> = tree.iter().copied().collect();
    for i in 0..n {
        for j in i + 1..n {
            if !tree.contains(&(i, j)) && rng.random_bool(0.5) {
                pairs.push((i, j));
            }
        }
    }
    pairs.shuffle(rng);
    pairs
}
