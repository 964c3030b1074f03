//! Greedy graph coloring of the grain adjacency graph.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    /// Color of each vertex.
    pub colors: Vec<usize>,
    pub count: usize,
}

/// Welsh–Powell ordering (descending degree, ties by index), then each vertex
/// takes the smallest color unused by its already-colored neighbours.
///
/// `adjacency[v]` lists the neighbours of `v`; the relation is symmetrized
/// here so callers may pass one-sided lists.
pub fn color_grains(adjacency: &[Vec<usize>]) -> Coloring {
    let n = adjacency.len();
    let mut adj: Vec<Vec<usize>> = adjacency.to_vec();
    for (v, list) in adjacency.iter().enumerate() {
        for &u in list {
            if u != v && !adj[u].contains(&v) {
                adj[u].push(v);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| adj[*b].len().cmp(&adj[*a].len()).then(a.cmp(b)));
    let mut colors = vec![usize::MAX; n];
    let mut count = 0;
    let mut used = Vec::new();
    for &v in &order {
        used.clear();
        used.resize(count + 1, false);
        for &u in &adj[v] {
            if u != v && colors[u] != usize::MAX {
                used[colors[u]] = true;
            }
        }
        let c = used.iter().position(|b| !b).unwrap_or(count);
        colors[v] = c;
        count = count.max(c + 1);
    }
    Coloring { colors, count }
}

/// True when no edge joins two vertices of the same color.
pub fn is_valid_coloring(adjacency: &[Vec<usize>], colors: &[usize]) -> bool {
    adjacency
        .iter()
        .enumerate()
        .all(|(v, list)| list.iter().all(|&u| u == v || colors[u] != colors[v]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn disjoint_grains_share_one_color() {
        let c = color_grains(&[vec![], vec![]]);
        assert_eq!(c.count, 1);
        assert_eq!(c.colors, vec![0, 0]);
    }

    #[test]
    fn triangle_needs_three() {
        let adj = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        let c = color_grains(&adj);
        assert_eq!(c.count, 3);
        assert!(is_valid_coloring(&adj, &c.colors));
    }

    #[test]
    fn one_sided_lists_are_symmetrized() {
        let adj = vec![vec![1], vec![], vec![0, 1]];
        let c = color_grains(&adj);
        let sym = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        assert!(is_valid_coloring(&sym, &c.colors));
    }

    proptest! {
        #[test]
        fn random_graphs_are_properly_colored(edges in proptest::collection::vec((0usize..30, 0usize..30), 0..120)) {
            let mut adj = vec![Vec::new(); 30];
            for (a, b) in edges {
                if a != b {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
            let c = color_grains(&adj);
            prop_assert!(is_valid_coloring(&adj, &c.colors));
            let max_deg = adj.iter().map(Vec::len).max().unwrap_or(0);
            prop_assert!(c.count <= max_deg + 1);
        }
    }
}
