//! Shared semantic aspects of an entity pair: the disjoint common ancestors
//! of the two annotation sets.
//!
//! A common ancestor is a class subsuming at least one annotation class of
//! each entity. The disjoint common ancestors are the minimal elements of
//! that set under subsumption — the classes kept are pairwise incomparable
//! (an antichain). With the reflexive closure, a class shared directly by
//! both entities qualifies.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::bitset::BitSet;
use crate::graph::{AnnotationMap, GraphError, NodeId, OntologyGraph};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AspectError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("entity node {} has no annotations", (.0).0)]
    NotAnnotated(NodeId),
    #[error("annotation set is empty")]
    EmptyClassSet,
}

/// The shared semantic aspects of one entity pair, ordered most specific
/// first (fewest subsumed classes, ties broken by node id).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AspectSet {
    pub pair: (NodeId, NodeId),
    pub aspects: Vec<NodeId>,
}

impl AspectSet {
    /// True when the pair shares no ancestry at all (e.g. entities under
    /// disjoint roots). Such pairs stay representable downstream as the zero
    /// vector.
    pub fn is_empty(&self) -> bool {
        self.aspects.is_empty()
    }

    pub fn len(&self) -> usize {
        self.aspects.len()
    }
}

fn union_of_closures(g: &OntologyGraph, classes: &BTreeSet<NodeId>) -> Result<BitSet, AspectError> {
    if classes.is_empty() {
        return Err(AspectError::EmptyClassSet);
    }
    let mut bits = BitSet::new(g.class_count());
    for &c in classes {
        let local = g.local(c)?;
        bits.union_with(g.closure_bits(local as usize));
    }
    Ok(bits)
}

fn common_ancestor_bits(
    g: &OntologyGraph,
    c1: &BTreeSet<NodeId>,
    c2: &BTreeSet<NodeId>,
) -> Result<BitSet, AspectError> {
    let mut bits = union_of_closures(g, c1)?;
    bits.intersect_with(&union_of_closures(g, c2)?);
    Ok(bits)
}

/// All classes subsuming at least one class of each set:
/// (⋃ ancestors(C1)) ∩ (⋃ ancestors(C2)). May be empty when the entities
/// live under disjoint roots.
pub fn common_ancestors(
    g: &OntologyGraph,
    c1: &BTreeSet<NodeId>,
    c2: &BTreeSet<NodeId>,
) -> Result<BTreeSet<NodeId>, AspectError> {
    let bits = common_ancestor_bits(g, c1, c2)?;
    Ok(bits.iter().map(|local| g.global(local)).collect())
}

/// The minimal elements of `common_ancestors(c1, c2)` under subsumption:
/// a class is kept iff no *other* common ancestor is strictly below it.
/// The result is an antichain, ordered most specific first.
pub fn disjoint_common_ancestors(
    g: &OntologyGraph,
    c1: &BTreeSet<NodeId>,
    c2: &BTreeSet<NodeId>,
) -> Result<Vec<NodeId>, AspectError> {
    let common = common_ancestor_bits(g, c1, c2)?;

    // Everything strictly above some common ancestor is non-minimal.
    let mut dominated = BitSet::new(g.class_count());
    for local in common.iter() {
        let mut strict = g.closure_bits(local).clone();
        strict.remove(local);
        dominated.union_with(&strict);
    }

    let mut minimal = common;
    minimal.difference_with(&dominated);

    let mut aspects: Vec<NodeId> = minimal.iter().map(|local| g.global(local)).collect();
    aspects.sort_unstable_by_key(|&c| {
        (
            g.descendant_count(c).expect("minimal element is a class"),
            c,
        )
    });
    Ok(aspects)
}

/// Aspect set for an annotated entity pair.
pub fn aspects_for_pair(
    g: &OntologyGraph,
    annotations: &AnnotationMap,
    e1: NodeId,
    e2: NodeId,
) -> Result<AspectSet, AspectError> {
    let c1 = annotations.classes_of(e1).ok_or(AspectError::NotAnnotated(e1))?;
    let c2 = annotations.classes_of(e2).ok_or(AspectError::NotAnnotated(e2))?;
    Ok(AspectSet {
        pair: (e1, e2),
        aspects: disjoint_common_ancestors(g, c1, c2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_ontology, TripleFormat, TripleStore};
    use alloc::string::{String, ToString};

    fn fixture(text: &str) -> (TripleStore, OntologyGraph) {
        let store = TripleStore::parse(text, TripleFormat::Tsv).unwrap();
        let g = build_ontology(&store, store.relation("sub").unwrap()).unwrap();
        (store, g)
    }

    fn set(store: &TripleStore, names: &[&str]) -> BTreeSet<NodeId> {
        names.iter().map(|n| store.node(n).unwrap()).collect()
    }

    fn sorted_names(store: &TripleStore, ids: impl IntoIterator<Item = NodeId>) -> Vec<String> {
        let mut v: Vec<String> = ids.into_iter().map(|id| store.node_name(id).to_string()).collect();
        v.sort();
        v
    }

    // Toy hierarchy: A1 ⊑ A ⊑ R, A2 ⊑ A, B1 ⊑ B ⊑ R.
    const TOY: &str = "A1\tsub\tA\nA\tsub\tR\nA2\tsub\tA\nB1\tsub\tB\nB\tsub\tR";

    #[test]
    fn common_ancestors_toy() {
        let (store, g) = fixture(TOY);
        let got = common_ancestors(&g, &set(&store, &["A1", "B1"]), &set(&store, &["A2", "B1"])).unwrap();
        assert_eq!(sorted_names(&store, got), ["A", "B", "B1", "R"]);
    }

    #[test]
    fn common_ancestors_identical_singletons() {
        let (store, g) = fixture("X\tsub\tR");
        let c = set(&store, &["X"]);
        let got = common_ancestors(&g, &c, &c).unwrap();
        assert_eq!(sorted_names(&store, got), ["R", "X"]);
    }

    #[test]
    fn disjoint_roots_share_nothing() {
        let (store, g) = fixture("A1\tsub\tR1\nB1\tsub\tR2");
        let got = common_ancestors(&g, &set(&store, &["A1"]), &set(&store, &["B1"])).unwrap();
        assert!(got.is_empty());
        let dca = disjoint_common_ancestors(&g, &set(&store, &["A1"]), &set(&store, &["B1"])).unwrap();
        assert!(dca.is_empty());
    }

    #[test]
    fn dca_filters_subsumers() {
        let (store, g) = fixture(TOY);
        let got =
            disjoint_common_ancestors(&g, &set(&store, &["A1", "B1"]), &set(&store, &["A2", "B1"])).unwrap();
        assert_eq!(sorted_names(&store, got), ["A", "B1"]);
    }

    #[test]
    fn dca_self_is_most_specific() {
        let (store, g) = fixture("X\tsub\tR");
        let c = set(&store, &["X"]);
        let got = disjoint_common_ancestors(&g, &c, &c).unwrap();
        assert_eq!(sorted_names(&store, got), ["X"]);
    }

    // GO-style subgraph: two proteins share a specific molecular function and
    // sit in sibling cellular components; the shared aspects are the function
    // plus the component classes' common parent.
    #[test]
    fn dca_go_style_subgraph() {
        let text = "\
calcium ion binding\tsub\tion binding
ion binding\tsub\tbinding
binding\tsub\tmolecular_function
plasma membrane\tsub\tcellular anatomical entity
cytoplasm\tsub\tcellular anatomical entity
cellular anatomical entity\tsub\tcellular_component";
        let (store, g) = fixture(text);
        let c1 = set(&store, &["calcium ion binding", "plasma membrane"]);
        let c2 = set(&store, &["calcium ion binding", "cytoplasm"]);
        let got = disjoint_common_ancestors(&g, &c1, &c2).unwrap();
        assert_eq!(
            sorted_names(&store, got),
            ["calcium ion binding", "cellular anatomical entity"]
        );
    }

    #[test]
    fn dca_is_symmetric() {
        let (store, g) = fixture(TOY);
        let c1 = set(&store, &["A1", "B1"]);
        let c2 = set(&store, &["A2", "B1"]);
        assert_eq!(
            disjoint_common_ancestors(&g, &c1, &c2).unwrap(),
            disjoint_common_ancestors(&g, &c2, &c1).unwrap()
        );
    }

    #[test]
    fn aspects_ordered_specific_first() {
        // B1 subsumes only itself; A subsumes A1, A2 and itself.
        let (store, g) = fixture(TOY);
        let got =
            disjoint_common_ancestors(&g, &set(&store, &["A1", "B1"]), &set(&store, &["A2", "B1"])).unwrap();
        assert_eq!(store.node_name(got[0]), "B1");
        assert_eq!(store.node_name(got[1]), "A");
    }

    #[test]
    fn pair_lookup_requires_annotations() {
        let (mut store, g) = fixture(TOY);
        let map = crate::graph::load_annotations("e1\tA1", &mut store, &g).unwrap();
        let e1 = store.node("e1").unwrap();
        let stranger = store.intern_node("e2");
        assert_eq!(
            aspects_for_pair(&g, &map, e1, stranger),
            Err(AspectError::NotAnnotated(stranger))
        );
    }
}
