//! Perturbation explanations for pair predictions.
//!
//! An aspect is *necessary* when removing it from the aggregated pair
//! representation flips the predicted class, and *sufficient* when its
//! embedding alone reproduces the predicted class. Explanations never touch
//! the embedding table or the model: representations are recomposed from the
//! fixed class vectors, so no retraining happens.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::aspects::{aspects_for_pair, AspectError, AspectSet};
use crate::classify::{ClassifierModel, ClassifyError, Prediction};
use crate::embed::EmbeddingTable;
use crate::graph::{AnnotationMap, NodeId, OntologyGraph, TripleStore};
use crate::pairrep::{aggregate, AggregateOp, PairRepError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExplainError {
    #[error(transparent)]
    Aspects(#[from] AspectError),
    #[error(transparent)]
    Representation(#[from] PairRepError),
    #[error(transparent)]
    Classifier(#[from] ClassifyError),
}

impl From<crate::embed::EmbedError> for ExplainError {
    fn from(e: crate::embed::EmbedError) -> Self {
        ExplainError::Representation(PairRepError::Embedding(e))
    }
}

/// Per-aspect outcome of the two perturbations.
#[derive(Clone, Debug, PartialEq)]
pub struct AspectRecord {
    pub class: NodeId,
    /// Prediction when this aspect is the only one considered.
    pub solo: Prediction,
    /// Prediction when this aspect is removed from the aggregate.
    pub ablated: Prediction,
    pub necessary: bool,
    pub sufficient: bool,
}

/// Full explanation for one pair, with the enriched predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct Explanation {
    pub pair: (NodeId, NodeId),
    pub aspects: AspectSet,
    /// Prediction on the aggregate of all shared aspects.
    pub global: Prediction,
    /// One record per aspect, in aspect order.
    pub per_aspect: Vec<AspectRecord>,
    /// Prediction on the aggregate of the sufficient aspects only; absent
    /// when none are sufficient.
    pub all_sufficient: Option<Prediction>,
    /// Prediction on the aggregate with every necessary aspect removed;
    /// absent when none are necessary.
    pub without_necessary: Option<Prediction>,
}

impl Explanation {
    pub fn empty_aspects(&self) -> bool {
        self.aspects.is_empty()
    }

    pub fn necessary_classes(&self) -> Vec<NodeId> {
        self.per_aspect.iter().filter(|r| r.necessary).map(|r| r.class).collect()
    }

    pub fn sufficient_classes(&self) -> Vec<NodeId> {
        self.per_aspect.iter().filter(|r| r.sufficient).map(|r| r.class).collect()
    }

    pub fn necessary_len(&self) -> usize {
        self.per_aspect.iter().filter(|r| r.necessary).count()
    }

    pub fn sufficient_len(&self) -> usize {
        self.per_aspect.iter().filter(|r| r.sufficient).count()
    }
}

fn embeddings_of<'t>(
    aspects: &AspectSet,
    table: &'t EmbeddingTable,
) -> Result<Vec<&'t [f64]>, ExplainError> {
    aspects
        .aspects
        .iter()
        .map(|&c| table.node_vector(c).map_err(ExplainError::from))
        .collect()
}

fn predict_aggregate(
    model: &ClassifierModel,
    op: AggregateOp,
    dimension: usize,
    vectors: &[&[f64]],
) -> Result<Prediction, ExplainError> {
    let v = aggregate(op, dimension, vectors).map_err(ExplainError::from)?;
    model.predict(&v).map_err(ExplainError::from)
}

/// Aspects whose removal flips the predicted class. With a single aspect, the
/// ablated representation is the empty aggregate, i.e. the zero vector.
pub fn necessary_aspects(
    table: &EmbeddingTable,
    model: &ClassifierModel,
    aspects: &AspectSet,
    op: AggregateOp,
) -> Result<Vec<NodeId>, ExplainError> {
    let vectors = embeddings_of(aspects, table)?;
    let global = predict_aggregate(model, op, table.dimension(), &vectors)?;
    let mut out = Vec::new();
    for (i, &class) in aspects.aspects.iter().enumerate() {
        let kept: Vec<&[f64]> = vectors
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| *v)
            .collect();
        let ablated = predict_aggregate(model, op, table.dimension(), &kept)?;
        if ablated.class != global.class {
            out.push(class);
        }
    }
    Ok(out)
}

/// Aspects whose solo prediction equals the global predicted class.
pub fn sufficient_aspects(
    table: &EmbeddingTable,
    model: &ClassifierModel,
    aspects: &AspectSet,
    op: AggregateOp,
) -> Result<Vec<NodeId>, ExplainError> {
    let vectors = embeddings_of(aspects, table)?;
    let global = predict_aggregate(model, op, table.dimension(), &vectors)?;
    let mut out = Vec::new();
    for (i, &class) in aspects.aspects.iter().enumerate() {
        let solo = model.predict(vectors[i]).map_err(ExplainError::from)?;
        if solo.class == global.class {
            out.push(class);
        }
    }
    Ok(out)
}

/// Assemble the full explanation for an annotated pair.
pub fn explanation_report(
    pair: (NodeId, NodeId),
    table: &EmbeddingTable,
    model: &ClassifierModel,
    annotations: &AnnotationMap,
    graph: &OntologyGraph,
    op: AggregateOp,
) -> Result<Explanation, ExplainError> {
    let aspects = aspects_for_pair(graph, annotations, pair.0, pair.1)?;
    explanation_for_aspects(pair, aspects, table, model, op)
}

/// As [`explanation_report`] but for an aspect set computed by the caller.
pub fn explanation_for_aspects(
    pair: (NodeId, NodeId),
    aspects: AspectSet,
    table: &EmbeddingTable,
    model: &ClassifierModel,
    op: AggregateOp,
) -> Result<Explanation, ExplainError> {
    let dimension = table.dimension();
    let vectors = embeddings_of(&aspects, table)?;
    let global = predict_aggregate(model, op, dimension, &vectors)?;

    let mut per_aspect = Vec::with_capacity(aspects.len());
    for (i, &class) in aspects.aspects.iter().enumerate() {
        let solo = model.predict(vectors[i]).map_err(ExplainError::from)?;
        let kept: Vec<&[f64]> = vectors
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| *v)
            .collect();
        let ablated = predict_aggregate(model, op, dimension, &kept)?;
        per_aspect.push(AspectRecord {
            class,
            solo,
            ablated,
            necessary: ablated.class != global.class,
            sufficient: solo.class == global.class,
        });
    }

    let sufficient_vectors: Vec<&[f64]> = per_aspect
        .iter()
        .zip(&vectors)
        .filter(|(r, _)| r.sufficient)
        .map(|(_, v)| *v)
        .collect();
    let all_sufficient = if sufficient_vectors.is_empty() {
        None
    } else {
        Some(predict_aggregate(model, op, dimension, &sufficient_vectors)?)
    };

    let any_necessary = per_aspect.iter().any(|r| r.necessary);
    let without_necessary = if !any_necessary {
        None
    } else {
        let kept: Vec<&[f64]> = per_aspect
            .iter()
            .zip(&vectors)
            .filter(|(r, _)| !r.necessary)
            .map(|(_, v)| *v)
            .collect();
        Some(predict_aggregate(model, op, dimension, &kept)?)
    };

    Ok(Explanation {
        pair,
        aspects,
        global,
        per_aspect,
        all_sufficient,
        without_necessary,
    })
}

// ---------------------------------------------------------------------------
// JSON schema (one object per pair); field names are a stable interface.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionJson {
    pub class: u8,
    pub likelihood: f64,
}

impl From<Prediction> for PredictionJson {
    fn from(p: Prediction) -> Self {
        PredictionJson { class: p.class, likelihood: p.likelihood }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AspectJson {
    pub class_id: String,
    pub label: String,
    pub solo: PredictionJson,
    pub ablated: PredictionJson,
    pub necessary: bool,
    pub sufficient: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationJson {
    pub pair: [String; 2],
    pub global: PredictionJson,
    pub aspects: Vec<AspectJson>,
    pub all_sufficient: Option<PredictionJson>,
    pub without_necessary: Option<PredictionJson>,
    pub empty_aspects: bool,
}

/// Display label for an identifier: the fragment after the last `#` or `/`
/// when the identifier is IRI-shaped, otherwise the identifier itself.
pub fn display_label(identifier: &str) -> &str {
    identifier
        .rsplit(['#', '/'])
        .next()
        .filter(|s| !s.is_empty())
        .unwrap_or(identifier)
}

impl ExplanationJson {
    pub fn from_explanation(explanation: &Explanation, store: &TripleStore) -> Self {
        let name = |id: NodeId| store.node_name(id).to_string();
        ExplanationJson {
            pair: [name(explanation.pair.0), name(explanation.pair.1)],
            global: explanation.global.into(),
            aspects: explanation
                .per_aspect
                .iter()
                .map(|r| AspectJson {
                    class_id: name(r.class),
                    label: display_label(store.node_name(r.class)).to_string(),
                    solo: r.solo.into(),
                    ablated: r.ablated.into(),
                    necessary: r.necessary,
                    sufficient: r.sufficient,
                })
                .collect(),
            all_sufficient: explanation.all_sufficient.map(Into::into),
            without_necessary: explanation.without_necessary.map(Into::into),
            empty_aspects: explanation.empty_aspects(),
        }
    }
}
