//! Pair representations: aggregated shared-aspect class embeddings, or the
//! entity-vector baseline (element-wise product of the two entity vectors).

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::aspects::{aspects_for_pair, AspectError, AspectSet};
use crate::embed::{EmbedError, EmbeddingTable};
use crate::graph::{AnnotationMap, NodeId, OntologyGraph};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PairRepError {
    #[error("vectors of mixed lengths (expected {expected}, found {found})")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Aspects(#[from] AspectError),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

/// Element-wise operator used to fold a set of vectors into one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregateOp {
    Average,
    Hadamard,
    Sum,
}

impl AggregateOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            AggregateOp::Average => "average",
            AggregateOp::Hadamard => "hadamard",
            AggregateOp::Sum => "sum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "average" => Some(AggregateOp::Average),
            "hadamard" => Some(AggregateOp::Hadamard),
            "sum" => Some(AggregateOp::Sum),
            _ => None,
        }
    }
}

/// How a pair vector was produced.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    /// Aggregated shared-aspect class embeddings; carries the exact aspect
    /// set that was used.
    Aspects(AspectSet),
    /// Element-wise product of the two entity vectors.
    Entities,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairVector {
    pub pair: (NodeId, NodeId),
    pub vector: Vec<f64>,
    pub provenance: Provenance,
    /// Set when the pair shares no ancestry; the vector is then all zeros.
    pub empty_aspects: bool,
}

/// Fold `vectors` element-wise. The empty set aggregates to the zero vector
/// of length `dimension` regardless of the operator.
pub fn aggregate(op: AggregateOp, dimension: usize, vectors: &[&[f64]]) -> Result<Vec<f64>, PairRepError> {
    for v in vectors {
        if v.len() != dimension {
            return Err(PairRepError::DimensionMismatch { expected: dimension, found: v.len() });
        }
    }
    if vectors.is_empty() {
        return Ok(vec![0.0; dimension]);
    }
    let mut out = match op {
        AggregateOp::Hadamard => vec![1.0; dimension],
        _ => vec![0.0; dimension],
    };
    for v in vectors {
        for (o, x) in out.iter_mut().zip(*v) {
            match op {
                AggregateOp::Hadamard => *o *= x,
                _ => *o += x,
            }
        }
    }
    if op == AggregateOp::Average {
        let n = vectors.len() as f64;
        for o in out.iter_mut() {
            *o /= n;
        }
    }
    Ok(out)
}

/// Element-wise absolute difference of two vectors; the two-entity variant of
/// the L1 combination.
pub fn l1_combine(a: &[f64], b: &[f64]) -> Result<Vec<f64>, PairRepError> {
    if a.len() != b.len() {
        return Err(PairRepError::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect())
}

/// Represent a pair by folding the embeddings of its shared aspect classes
/// with `op`. Pairs with no shared ancestry get the zero vector and the
/// `empty_aspects` flag instead of being rejected.
pub fn represent_pair_aspects(
    pair: (NodeId, NodeId),
    annotations: &AnnotationMap,
    graph: &OntologyGraph,
    table: &EmbeddingTable,
    op: AggregateOp,
) -> Result<PairVector, PairRepError> {
    let aspects = aspects_for_pair(graph, annotations, pair.0, pair.1)?;
    let vector = aggregate_aspects(&aspects, table, op)?;
    Ok(PairVector {
        pair,
        empty_aspects: aspects.is_empty(),
        provenance: Provenance::Aspects(aspects),
        vector,
    })
}

/// Fold the embeddings of an already-computed aspect set.
pub fn aggregate_aspects(
    aspects: &AspectSet,
    table: &EmbeddingTable,
    op: AggregateOp,
) -> Result<Vec<f64>, PairRepError> {
    let vectors: Vec<&[f64]> = aspects
        .aspects
        .iter()
        .map(|&c| table.node_vector(c))
        .collect::<Result<_, _>>()?;
    aggregate(op, table.dimension(), &vectors)
}

/// The entity-vector baseline: element-wise product of the two entity
/// embeddings.
pub fn represent_pair_entities(
    pair: (NodeId, NodeId),
    table: &EmbeddingTable,
) -> Result<PairVector, PairRepError> {
    let v1 = table.node_vector(pair.0)?;
    let v2 = table.node_vector(pair.1)?;
    let vector = aggregate(AggregateOp::Hadamard, table.dimension(), &[v1, v2])?;
    Ok(PairVector {
        pair,
        vector,
        provenance: Provenance::Entities,
        empty_aspects: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingMethod;
    use crate::graph::{build_ontology, load_annotations, TripleFormat, TripleStore};

    #[test]
    fn average_of_two() {
        let got = aggregate(AggregateOp::Average, 2, &[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(got, vec![2.0, 3.0]);
    }

    #[test]
    fn hadamard_of_two() {
        let got = aggregate(AggregateOp::Hadamard, 2, &[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(got, vec![3.0, 8.0]);
    }

    #[test]
    fn sum_of_two() {
        let got = aggregate(AggregateOp::Sum, 2, &[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(got, vec![4.0, 6.0]);
    }

    #[test]
    fn empty_aggregates_to_zero() {
        for op in [AggregateOp::Average, AggregateOp::Hadamard, AggregateOp::Sum] {
            assert_eq!(aggregate(op, 3, &[]).unwrap(), vec![0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn mixed_lengths_rejected() {
        let err = aggregate(AggregateOp::Average, 2, &[&[1.0, 2.0], &[1.0]]).unwrap_err();
        assert_eq!(err, PairRepError::DimensionMismatch { expected: 2, found: 1 });
    }

    #[test]
    fn l1_combine_by_hand() {
        assert_eq!(l1_combine(&[1.0, 5.0], &[4.0, 2.0]).unwrap(), vec![3.0, 3.0]);
    }

    fn toy_world() -> (TripleStore, OntologyGraph, AnnotationMap) {
        let mut store =
            TripleStore::parse("A1\tsub\tA\nA\tsub\tR\nA2\tsub\tA\nB1\tsub\tB\nB\tsub\tR\nX1\tsub\tQ", TripleFormat::Tsv)
                .unwrap();
        let g = build_ontology(&store, store.relation("sub").unwrap()).unwrap();
        let ann = load_annotations(
            "e1\tA1\ne1\tB1\ne2\tA2\ne2\tB1\ne3\tX1",
            &mut store,
            &g,
        )
        .unwrap();
        (store, g, ann)
    }

    fn diag_table(store: &TripleStore) -> EmbeddingTable {
        // Node i gets the i-th standard basis vector scaled by i+1.
        let n = store.node_count();
        let mut vecs = vec![0.0; n * n];
        for i in 0..n {
            vecs[i * n + i] = (i + 1) as f64;
        }
        EmbeddingTable::from_parts(EmbeddingMethod::Walk, n, vecs, vec![], None, 0)
    }

    #[test]
    fn aspect_representation_averages_class_embeddings() {
        let (store, g, ann) = toy_world();
        // Aspects of (e1, e2) are {B1, A}; give them hand vectors.
        let a = store.node("A").unwrap();
        let b1 = store.node("B1").unwrap();
        let n = store.node_count();
        let mut vecs = vec![0.0; n * 2];
        vecs[a.0 as usize * 2] = 1.0; // A = [1, 0]
        vecs[b1.0 as usize * 2 + 1] = 1.0; // B1 = [0, 1]
        let table = EmbeddingTable::from_parts(EmbeddingMethod::Walk, 2, vecs, vec![], None, 0);

        let e1 = store.node("e1").unwrap();
        let e2 = store.node("e2").unwrap();
        let pv = represent_pair_aspects((e1, e2), &ann, &g, &table, AggregateOp::Average).unwrap();
        assert_eq!(pv.vector, vec![0.5, 0.5]);
        assert!(!pv.empty_aspects);
        match &pv.provenance {
            Provenance::Aspects(set) => assert_eq!(set.len(), 2),
            _ => panic!("expected aspect provenance"),
        }
    }

    #[test]
    fn singleton_aspect_is_identity() {
        let got = aggregate(AggregateOp::Average, 2, &[&[2.0, 3.0]]).unwrap();
        assert_eq!(got, vec![2.0, 3.0]);
    }

    #[test]
    fn no_shared_ancestry_flags_zero_vector() {
        let (store, g, ann) = toy_world();
        let table = diag_table(&store);
        let e1 = store.node("e1").unwrap();
        let e3 = store.node("e3").unwrap();
        let pv = represent_pair_aspects((e1, e3), &ann, &g, &table, AggregateOp::Average).unwrap();
        assert!(pv.empty_aspects);
        assert!(pv.vector.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn entity_baseline_is_elementwise_product() {
        let table = EmbeddingTable::from_parts(
            EmbeddingMethod::Walk,
            2,
            vec![1.0, 2.0, 3.0, 4.0],
            vec![],
            None,
            0,
        );
        let pv = represent_pair_entities((NodeId(0), NodeId(1)), &table).unwrap();
        assert_eq!(pv.vector, vec![3.0, 8.0]);
    }

    #[test]
    fn ones_vector_is_baseline_identity() {
        let table = EmbeddingTable::from_parts(
            EmbeddingMethod::Walk,
            2,
            vec![1.5, -2.0, 1.0, 1.0],
            vec![],
            None,
            0,
        );
        let pv = represent_pair_entities((NodeId(0), NodeId(1)), &table).unwrap();
        assert_eq!(pv.vector, vec![1.5, -2.0]);
    }

    #[test]
    fn zero_vector_absorbs_baseline() {
        let table = EmbeddingTable::from_parts(
            EmbeddingMethod::Walk,
            2,
            vec![0.0, 0.0, 3.0, 4.0],
            vec![],
            None,
            0,
        );
        let pv = represent_pair_entities((NodeId(0), NodeId(1)), &table).unwrap();
        assert_eq!(pv.vector, vec![0.0, 0.0]);
    }

    #[test]
    fn aspect_representation_is_symmetric() {
        let (store, g, ann) = toy_world();
        let table = diag_table(&store);
        let e1 = store.node("e1").unwrap();
        let e2 = store.node("e2").unwrap();
        let fwd = represent_pair_aspects((e1, e2), &ann, &g, &table, AggregateOp::Average).unwrap();
        let rev = represent_pair_aspects((e2, e1), &ann, &g, &table, AggregateOp::Average).unwrap();
        assert_eq!(fwd.vector, rev.vector);
    }

    #[test]
    fn missing_embedding_is_an_error() {
        let (store, g, ann) = toy_world();
        // Table shorter than the node count: entity vectors missing.
        let table = EmbeddingTable::from_parts(EmbeddingMethod::Walk, 2, vec![0.0, 0.0], vec![], None, 0);
        let e1 = store.node("e1").unwrap();
        let e2 = store.node("e2").unwrap();
        assert!(matches!(
            represent_pair_aspects((e1, e2), &ann, &g, &table, AggregateOp::Average),
            Err(PairRepError::Embedding(EmbedError::MissingNode(_)))
        ));
        assert!(matches!(
            represent_pair_entities((e1, e2), &table),
            Err(PairRepError::Embedding(EmbedError::MissingNode(_)))
        ));
    }

    #[test]
    fn leave_one_out_matches_closed_form() {
        // Removing x from an n-vector average equals (n*v - x) / (n - 1).
        let vectors: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..3).map(|k| (i * 3 + k) as f64 * 0.371 - 1.0).collect())
            .collect();
        let refs: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
        let full = aggregate(AggregateOp::Average, 3, &refs).unwrap();
        let n = vectors.len() as f64;
        for drop in 0..vectors.len() {
            let kept: Vec<&[f64]> = refs
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, v)| *v)
                .collect();
            let direct = aggregate(AggregateOp::Average, 3, &kept).unwrap();
            for k in 0..3 {
                let closed = (n * full[k] - vectors[drop][k]) / (n - 1.0);
                assert!((direct[k] - closed).abs() < 1e-9);
            }
        }
    }
}
