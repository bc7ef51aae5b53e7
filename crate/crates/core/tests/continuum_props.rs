//! Component detection checked against an independent O(n^3)
//! transitive-closure oracle, plus ordering and nesting properties.
#![allow(clippy::needless_range_loop)] // index loops keep the oracle transliterations obvious

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfid_core::continuum::{
    build_epsilon_graph, check_condition_1, connected_components, minimal_connecting_epsilon,
};
use selfid_core::spaces::{DistanceMatrix, Memory, MemoryMetricConfig};

fn random_distance_matrix(rng: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = rng.random_range(0.05..2.0);
            rows[i][j] = d;
            rows[j][i] = d;
        }
    }
    let ids = (0..n).map(|i| format!("v{i:02}")).collect();
    DistanceMatrix::from_rows(ids, &rows).unwrap()
}

/// Oracle: reflexive-transitive closure of the adjacency relation; each
/// node is labeled by the smallest index it can reach.
fn closure_labels(d: &DistanceMatrix, epsilon: f64) -> Vec<usize> {
    let n = d.len();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
        for j in 0..n {
            if i != j && d.get(i, j) <= epsilon {
                reach[i][j] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    (0..n)
        .map(|i| (0..n).find(|&j| reach[i][j]).unwrap())
        .collect()
}

fn component_labels(d: &DistanceMatrix, epsilon: f64) -> Vec<usize> {
    let g = build_epsilon_graph(d, epsilon).unwrap();
    let report = connected_components(&g);
    let mut labels = vec![usize::MAX; d.len()];
    for component in &report.components {
        let indices: Vec<usize> = component
            .iter()
            .map(|id| d.ids().iter().position(|x| x == id).unwrap())
            .collect();
        let min = *indices.iter().min().unwrap();
        for i in indices {
            labels[i] = min;
        }
    }
    labels
}

#[test]
fn components_match_transitive_closure_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..400 {
        let n = rng.random_range(1..=8);
        let d = random_distance_matrix(&mut rng, n);
        let epsilon = rng.random_range(0.05..2.0);
        assert_eq!(
            component_labels(&d, epsilon),
            closure_labels(&d, epsilon),
            "trial {trial} with n = {n}, epsilon = {epsilon}"
        );
    }
}

#[test]
fn larger_epsilon_coarsens_the_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..300 {
        let n = rng.random_range(2..=8);
        let d = random_distance_matrix(&mut rng, n);
        let e1 = rng.random_range(0.05..1.0);
        let e2 = e1 + rng.random_range(0.0..1.0);
        let fine = component_labels(&d, e1);
        let coarse = component_labels(&d, e2);
        // Same fine label must imply same coarse label.
        for i in 0..n {
            for j in 0..n {
                if fine[i] == fine[j] {
                    assert_eq!(coarse[i], coarse[j]);
                }
            }
        }
    }
}

#[test]
fn partition_is_independent_of_memory_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let cfg = MemoryMetricConfig::default();
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let mut memories: Vec<Memory> = (0..n)
            .map(|i| {
                Memory::new(
                    format!("m{i:02}"),
                    rng.random_range(-5.0..5.0),
                    vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)],
                    rng.random_range(0.0..10.0),
                )
            })
            .collect();
        let epsilon = rng.random_range(0.5..6.0);
        let before = check_condition_1(&memories, &cfg, epsilon).unwrap();
        // Deterministic reversal plus a seeded swap shuffle.
        memories.reverse();
        for _ in 0..n {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            memories.swap(a, b);
        }
        let after = check_condition_1(&memories, &cfg, epsilon).unwrap();
        assert_eq!(before.components, after.components);
    }
}

#[test]
fn minimal_connecting_epsilon_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let d = random_distance_matrix(&mut rng, n);
        let reported = minimal_connecting_epsilon(&d);

        // Brute force: smallest pairwise-distance value at which the
        // graph becomes one component.
        let mut edges: Vec<f64> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push(d.get(i, j));
            }
        }
        edges.sort_by(f64::total_cmp);
        let brute = edges
            .iter()
            .copied()
            .find(|&e| {
                let g = build_epsilon_graph(&d, e).unwrap();
                connected_components(&g).is_single_continuum
            })
            .unwrap();
        assert!(
            (reported - brute).abs() <= 1e-12 * (1.0 + brute),
            "reported {reported} vs brute {brute}"
        );

        let g = build_epsilon_graph(&d, reported).unwrap();
        assert!(connected_components(&g).is_single_continuum);
    }
}
