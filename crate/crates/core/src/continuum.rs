//! Epsilon-chain connectivity over a memory distance matrix.
//!
//! Two memories are chained when their distance is at most ε; connected
//! components of the resulting graph are the discrete surrogate for
//! connected, path-connected continua. On a finite graph the two notions
//! coincide, so a single component search certifies both.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::spaces::{pairwise_distance_matrix, DistanceMatrix, Memory, MemoryMetricConfig};

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(len: usize) -> UnionFind {
        UnionFind {
            parent: (0..len).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut x = x;
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Undirected ε-neighborhood graph over memory ids.
#[derive(Debug, Clone)]
pub struct EpsilonGraph {
    epsilon: f64,
    node_ids: Vec<String>,
    neighbors: Vec<Vec<usize>>,
}

impl EpsilonGraph {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    fn index_of(&self, id: &str) -> Result<usize> {
        self.node_ids
            .iter()
            .position(|n| n == id)
            .ok_or_else(|| CoreError::UnknownId(id.to_string()))
    }
}

/// Partition of the graph into ε-chain components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumReport {
    pub epsilon: f64,
    /// Components as id sets, each sorted lexicographically, components
    /// ordered by their smallest id. Canonical regardless of input order.
    pub components: Vec<Vec<String>>,
    #[serde(rename = "single_continuum")]
    pub is_single_continuum: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_paths: Option<Vec<WitnessPath>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessPath {
    pub from: String,
    pub to: String,
    pub path: Vec<String>,
}

/// Outcome of a shortest-path query.
#[derive(Debug, Clone, PartialEq)]
pub enum PathOutcome {
    Path(Vec<String>),
    NoPath,
}

/// Build the ε-neighborhood graph: edge (i, j) exactly when `D[i][j] <= ε`.
pub fn build_epsilon_graph(d: &DistanceMatrix, epsilon: f64) -> Result<EpsilonGraph> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "epsilon",
            reason: format!("chain radius must be a positive finite real, got {epsilon}"),
        });
    }
    let n = d.len();
    for i in 0..n {
        if d.get(i, i) != 0.0 {
            return Err(CoreError::NonzeroDiagonal(i));
        }
        for j in (i + 1)..n {
            if d.get(i, j) != d.get(j, i) {
                return Err(CoreError::AsymmetricMatrix { i, j });
            }
        }
    }
    let mut neighbors = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if d.get(i, j) <= epsilon {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    // Neighbor lists come out sorted by construction.
    Ok(EpsilonGraph {
        epsilon,
        node_ids: d.ids().to_vec(),
        neighbors,
    })
}

/// Connected components via union-find, returned in canonical order.
pub fn connected_components(g: &EpsilonGraph) -> ContinuumReport {
    let n = g.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for &j in g.neighbors(i) {
            if j > i {
                uf.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for i in 0..n {
        let root = uf.find(i);
        groups.entry(root).or_default().push(g.node_ids[i].clone());
    }
    let mut components: Vec<Vec<String>> = groups.into_values().collect();
    for c in &mut components {
        c.sort();
    }
    components.sort_by(|a, b| a[0].cmp(&b[0]));
    let is_single = components.len() == 1;
    ContinuumReport {
        epsilon: g.epsilon,
        components,
        is_single_continuum: is_single,
        witness_paths: None,
    }
}

/// Hop-shortest path from `a` to `b`; among equally short paths the
/// lexicographically smallest id sequence wins. Node ids are assumed
/// unique within one graph.
pub fn witness_path(g: &EpsilonGraph, a: &str, b: &str) -> Result<PathOutcome> {
    let start = g.index_of(a)?;
    let goal = g.index_of(b)?;
    if start == goal {
        return Ok(PathOutcome::Path(vec![g.node_ids[start].clone()]));
    }

    // BFS from the goal gives, for every node, the remaining hop count;
    // walking greedily from the start by smallest id among neighbors one
    // hop closer yields the lexicographically smallest shortest path.
    let n = g.len();
    let mut dist_to_goal = vec![usize::MAX; n];
    dist_to_goal[goal] = 0;
    let mut queue = std::collections::VecDeque::from([goal]);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if dist_to_goal[v] == usize::MAX {
                dist_to_goal[v] = dist_to_goal[u] + 1;
                queue.push_back(v);
            }
        }
    }
    if dist_to_goal[start] == usize::MAX {
        return Ok(PathOutcome::NoPath);
    }

    let mut path = vec![g.node_ids[start].clone()];
    let mut current = start;
    while current != goal {
        let next = g
            .neighbors(current)
            .iter()
            .copied()
            .filter(|&v| dist_to_goal[v] + 1 == dist_to_goal[current])
            .min_by(|&x, &y| g.node_ids[x].cmp(&g.node_ids[y]))
            .expect("a node on a shortest path always has a closer neighbor");
        path.push(g.node_ids[next].clone());
        current = next;
    }
    Ok(PathOutcome::Path(path))
}

/// Condition 1 check: do the memories form a single ε-chain continuum?
pub fn check_condition_1(
    memories: &[Memory],
    cfg: &MemoryMetricConfig,
    epsilon: f64,
) -> Result<ContinuumReport> {
    let d = pairwise_distance_matrix(memories, cfg)?;
    let g = build_epsilon_graph(&d, epsilon)?;
    Ok(connected_components(&g))
}

/// Smallest ε at which the whole set becomes one component: the largest
/// edge on a minimum spanning tree of the distance matrix (0 for a single
/// node). Prim's algorithm on the dense matrix.
pub fn minimal_connecting_epsilon(d: &DistanceMatrix) -> f64 {
    let n = d.len();
    if n <= 1 {
        return 0.0;
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<f64> = (0..n).map(|j| d.get(0, j)).collect();
    in_tree[0] = true;
    best[0] = f64::INFINITY;
    let mut max_edge = 0.0;
    for _ in 1..n {
        let mut pick = usize::MAX;
        let mut pick_dist = f64::INFINITY;
        for j in 0..n {
            if !in_tree[j] && best[j] < pick_dist {
                pick = j;
                pick_dist = best[j];
            }
        }
        in_tree[pick] = true;
        if pick_dist > max_edge {
            max_edge = pick_dist;
        }
        for j in 0..n {
            if !in_tree[j] && d.get(pick, j) < best[j] {
                best[j] = d.get(pick, j);
            }
        }
    }
    max_edge
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Memory;

    fn line_memories(gaps: &[f64]) -> Vec<Memory> {
        // Memories on a time line with the given consecutive gaps.
        let mut t = 0.0;
        let mut out = vec![Memory::new("n0", 0.0, vec![0.0], 0.0)];
        for (i, g) in gaps.iter().enumerate() {
            t += g;
            out.push(Memory::new(format!("n{}", i + 1), t, vec![0.0], 0.0));
        }
        out
    }

    fn matrix_of(memories: &[Memory]) -> DistanceMatrix {
        pairwise_distance_matrix(memories, &MemoryMetricConfig::default()).unwrap()
    }

    #[test]
    fn collinear_points_link_only_within_epsilon() {
        let d = matrix_of(&line_memories(&[1.0, 1.0]));
        let g = build_epsilon_graph(&d, 1.5).unwrap();
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(1, 2));
        assert!(!g.has_edge(0, 2)); // distance 2.0 > 1.5
    }

    #[test]
    fn tiny_epsilon_gives_edgeless_graph_and_huge_epsilon_complete() {
        let d = matrix_of(&line_memories(&[1.0, 1.0]));
        let g = build_epsilon_graph(&d, 0.5).unwrap();
        assert!((0..3).all(|i| g.neighbors(i).is_empty()));
        let g = build_epsilon_graph(&d, 2.0).unwrap();
        assert!((0..3).all(|i| g.neighbors(i).len() == 2));
    }

    #[test]
    fn nonpositive_epsilon_rejected() {
        let d = matrix_of(&line_memories(&[1.0]));
        assert!(build_epsilon_graph(&d, 0.0).is_err());
        assert!(build_epsilon_graph(&d, -1.0).is_err());
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let d = DistanceMatrix::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![0.0, 1.0], vec![2.0, 0.0]],
        )
        .unwrap();
        assert!(matches!(
            build_epsilon_graph(&d, 1.0),
            Err(CoreError::AsymmetricMatrix { i: 0, j: 1 })
        ));
    }

    #[test]
    fn chain_is_one_component() {
        let d = matrix_of(&line_memories(&[1.0, 1.0]));
        let g = build_epsilon_graph(&d, 1.0).unwrap();
        let report = connected_components(&g);
        assert_eq!(report.components.len(), 1);
        assert!(report.is_single_continuum);
        assert_eq!(report.components[0], vec!["n0", "n1", "n2"]);
    }

    #[test]
    fn gap_splits_into_two_components() {
        let d = matrix_of(&line_memories(&[1.0, 5.0, 1.0]));
        let g = build_epsilon_graph(&d, 1.5).unwrap();
        let report = connected_components(&g);
        assert_eq!(report.components.len(), 2);
        assert!(!report.is_single_continuum);
    }

    #[test]
    fn single_node_is_a_continuum() {
        let d = matrix_of(&line_memories(&[]));
        let g = build_epsilon_graph(&d, 1.0).unwrap();
        let report = connected_components(&g);
        assert!(report.is_single_continuum);
        assert_eq!(report.components, vec![vec!["n0".to_string()]]);
    }

    #[test]
    fn witness_path_on_chain() {
        let d = matrix_of(&line_memories(&[1.0, 1.0]));
        let g = build_epsilon_graph(&d, 1.0).unwrap();
        match witness_path(&g, "n0", "n2").unwrap() {
            PathOutcome::Path(p) => assert_eq!(p, vec!["n0", "n1", "n2"]),
            PathOutcome::NoPath => panic!("expected a path"),
        }
    }

    #[test]
    fn witness_path_trivial_and_missing() {
        let d = matrix_of(&line_memories(&[5.0]));
        let g = build_epsilon_graph(&d, 1.0).unwrap();
        assert_eq!(
            witness_path(&g, "n0", "n0").unwrap(),
            PathOutcome::Path(vec!["n0".to_string()])
        );
        assert_eq!(witness_path(&g, "n0", "n1").unwrap(), PathOutcome::NoPath);
        assert!(matches!(
            witness_path(&g, "n0", "zzz"),
            Err(CoreError::UnknownId(_))
        ));
    }

    #[test]
    fn witness_path_prefers_lexicographically_smaller_branch() {
        // Diamond: a - b - z and a - c - z, both length 2; [a, b, z] wins.
        let ids: Vec<String> = ["a", "b", "c", "z"].iter().map(|s| s.to_string()).collect();
        let big = 10.0;
        let rows = [
            vec![0.0, 1.0, 1.0, big],
            vec![1.0, 0.0, big, 1.0],
            vec![1.0, big, 0.0, 1.0],
            vec![big, 1.0, 1.0, 0.0],
        ];
        let d = DistanceMatrix::from_rows(ids, &rows).unwrap();
        let g = build_epsilon_graph(&d, 1.0).unwrap();
        match witness_path(&g, "a", "z").unwrap() {
            PathOutcome::Path(p) => assert_eq!(p, vec!["a", "b", "z"]),
            PathOutcome::NoPath => panic!("expected a path"),
        }
    }

    #[test]
    fn condition_1_detects_gap() {
        let memories = line_memories(&[1.0, 1.0, 1.0]);
        let cfg = MemoryMetricConfig::default();
        assert!(check_condition_1(&memories, &cfg, 1.0).unwrap().is_single_continuum);
        assert!(!check_condition_1(&memories, &cfg, 0.5).unwrap().is_single_continuum);
        let single = &memories[..1];
        assert!(check_condition_1(single, &cfg, 0.5).unwrap().is_single_continuum);
    }

    #[test]
    fn minimal_epsilon_is_largest_mst_edge() {
        // Gaps 1, 3, 2: the set connects exactly at eps = 3.
        let d = matrix_of(&line_memories(&[1.0, 3.0, 2.0]));
        let eps = minimal_connecting_epsilon(&d);
        assert!((eps - 3.0).abs() < 1e-12);
        let g = build_epsilon_graph(&d, eps).unwrap();
        assert!(connected_components(&g).is_single_continuum);
        let g = build_epsilon_graph(&d, eps * 0.999).unwrap();
        assert!(!connected_components(&g).is_single_continuum);
    }

    #[test]
    fn minimal_epsilon_of_single_node_is_zero() {
        let d = matrix_of(&line_memories(&[]));
        assert_eq!(minimal_connecting_epsilon(&d), 0.0);
    }

    #[test]
    fn report_serializes_with_expected_keys() {
        let d = matrix_of(&line_memories(&[1.0]));
        let g = build_epsilon_graph(&d, 2.0).unwrap();
        let report = connected_components(&g);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"epsilon\""));
        assert!(json.contains("\"components\""));
        assert!(json.contains("\"single_continuum\""));
        assert!(!json.contains("witness_paths"));
    }
}
