//! Random walk corpus generation over the triple store.

use alloc::vec::Vec;

use rand::Rng;

use crate::graph::{NodeId, RelId, TripleStore};

use super::rng_from_seed;

/// One token of a walk sequence. Walks alternate node and relation tokens:
/// node, relation, node, ...
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkToken {
    Node(NodeId),
    Relation(RelId),
}

/// For every node, `walks_per_node` random walks of at most `depth` edge
/// hops, choosing uniformly among outgoing edges and stopping early at sinks.
/// An isolated node yields a length-1 walk.
pub fn generate_walks(
    store: &TripleStore,
    depth: usize,
    walks_per_node: usize,
    seed: u64,
) -> Vec<Vec<WalkToken>> {
    let mut out_edges: Vec<Vec<(RelId, NodeId)>> = alloc::vec![Vec::new(); store.node_count()];
    for t in store.triples() {
        out_edges[t.head.0 as usize].push((t.relation, t.tail));
    }

    let mut rng = rng_from_seed(seed);
    let mut corpus = Vec::with_capacity(store.node_count() * walks_per_node);
    for start in store.node_ids() {
        for _ in 0..walks_per_node {
            let mut walk = Vec::with_capacity(2 * depth + 1);
            walk.push(WalkToken::Node(start));
            let mut current = start;
            for _ in 0..depth {
                let edges = &out_edges[current.0 as usize];
                if edges.is_empty() {
                    break;
                }
                let (rel, next) = edges[rng.gen_range(0..edges.len())];
                walk.push(WalkToken::Relation(rel));
                walk.push(WalkToken::Node(next));
                current = next;
            }
            corpus.push(walk);
        }
    }
    corpus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TripleFormat;

    #[test]
    fn single_edge_single_walk() {
        let store = TripleStore::parse("a\tp\tb", TripleFormat::Tsv).unwrap();
        let corpus = generate_walks(&store, 2, 1, 0);
        let a = store.node("a").unwrap();
        let b = store.node("b").unwrap();
        let p = store.relation("p").unwrap();
        // Walk from a crosses the only edge and then stops at the sink b.
        assert_eq!(
            corpus[0],
            alloc::vec![WalkToken::Node(a), WalkToken::Relation(p), WalkToken::Node(b)]
        );
        // Walk from b stops immediately.
        assert_eq!(corpus[1], alloc::vec![WalkToken::Node(b)]);
    }

    #[test]
    fn star_edges_sampled_uniformly() {
        let store = TripleStore::parse("a\tp\tb\na\tp\tc\na\tp\td", TripleFormat::Tsv).unwrap();
        let walks_per_node = 300;
        let corpus = generate_walks(&store, 1, walks_per_node, 11);
        let mut counts = [0usize; 3];
        for walk in &corpus {
            if walk.len() == 3 && walk[0] == WalkToken::Node(store.node("a").unwrap()) {
                match walk[2] {
                    WalkToken::Node(n) if n == store.node("b").unwrap() => counts[0] += 1,
                    WalkToken::Node(n) if n == store.node("c").unwrap() => counts[1] += 1,
                    WalkToken::Node(n) if n == store.node("d").unwrap() => counts[2] += 1,
                    _ => panic!("unexpected walk end"),
                }
            }
        }
        let total: usize = counts.iter().sum();
        assert_eq!(total, walks_per_node);

        // Chi-squared goodness of fit against uniform, 2 degrees of freedom:
        // p = exp(-x/2); require p > 0.01, i.e. x < 9.21.
        let expected = total as f64 / 3.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 9.21, "chi2 = {chi2}, counts = {counts:?}");
    }
}
