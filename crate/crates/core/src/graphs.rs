//! Small-graph enumeration and random graphs.

use std::collections::BTreeSet;

use rand::Rng;

use crate::model::Graph;
use crate::rng::StreamRng;

/// All connected graphs on `n` vertices, one representative per isomorphism
/// class. Practical up to `n = 6`.
pub fn connected_graphs(n: usize) -> Vec<Graph> {
    assert!(n >= 1 && n <= 7, "enumeration is only practical for n <= 7");
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect();
    let perms = permutations(n);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let mut deg = vec![0usize; n];
        for &(u, v) in &edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        // every class has a labelling with nonincreasing degrees
        if deg.windows(2).any(|w| w[0] < w[1]) {
            continue;
        }
        let canon = canonical_mask(n, &edges, &deg, &perms);
        if !seen.insert(canon) {
            continue;
        }
        let g = Graph::new(n, edges).expect("valid edges");
        if g.is_connected() {
            out.push(g);
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    heap_permute(n, &mut p, &mut out);
    out
}

fn heap_permute(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(p.clone());
        return;
    }
    for i in 0..k {
        heap_permute(k - 1, p, out);
        let j = if k % 2 == 0 { i } else { 0 };
        p.swap(j, k - 1);
    }
}

fn canonical_mask(n: usize, edges: &[(usize, usize)], deg: &[usize], perms: &[Vec<usize>]) -> u64 {
    let bit = |u: usize, v: usize| {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        a * n + b
    };
    perms
        .iter()
        .filter(|p| (0..n).all(|i| deg[p[i]] == deg[i]))
        .map(|p| {
            edges
                .iter()
                .fold(0u64, |m, &(u, v)| m | 1u64 << bit(p[u], p[v]))
        })
        .min()
        .unwrap_or(0)
}

/// Random graph with a root (vertex 0) of degree exactly `root_degree`, and
/// every other vertex of degree at most `max_degree` once the root is removed.
/// `extra` further vertices are attached at random, each with up to two edges.
pub fn random_rooted_graph(
    rng: &mut StreamRng,
    root_degree: usize,
    max_degree: usize,
    extra: usize,
) -> Graph {
    let n = 1 + root_degree + extra;
    let mut edges: Vec<(usize, usize)> = (1..=root_degree).map(|v| (0, v)).collect();
    let mut deg = vec![0usize; n];
    let mut present = BTreeSet::new();
    let mut try_add = |u: usize, v: usize, deg: &mut Vec<usize>, edges: &mut Vec<(usize, usize)>| {
        let e = (u.min(v), u.max(v));
        if u != v && deg[u] < max_degree && deg[v] < max_degree && present.insert(e) {
            deg[u] += 1;
            deg[v] += 1;
            edges.push(e);
        }
    };
    let others = n - 1;
    if others >= 2 {
        let attempts = rng.random_range(0..=others);
        for _ in 0..attempts {
            let u = 1 + rng.random_range(0..others);
            let v = 1 + rng.random_range(0..others);
            try_add(u, v, &mut deg, &mut edges);
        }
        for w in root_degree + 1..n {
            let links = rng.random_range(1..=2);
            for _ in 0..links {
                let u = 1 + rng.random_range(0..others);
                try_add(u, w, &mut deg, &mut edges);
            }
        }
    }
    Graph::new(n, edges).expect("valid edges")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn connected_graph_counts() {
        let counts: Vec<usize> = (1..=6).map(|n| connected_graphs(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 6, 21, 112]);
    }

    #[test]
    fn rooted_graph_degrees() {
        for i in 0..50 {
            let mut rng = stream(5, i);
            let g = random_rooted_graph(&mut rng, 4, 4, 3);
            assert_eq!(g.degree(0), 4);
            let (rest, _) = g.remove_vertex(0);
            assert!(rest.max_degree() <= 4);
            assert_eq!(g.n(), 8);
        }
    }
}
