//! Vector representations of knowledge-graph nodes.
//!
//! Four trainers share one table layout: a translational method (TransE-style,
//! score −‖h + r − t‖₂), a relation-hyperplane variant (TransH-style), a
//! bilinear-diagonal method (DistMult-style, score Σᵢ hᵢrᵢtᵢ) and a random-walk
//! skip-gram method with no triple score. Scores are uniformly
//! higher-is-better; the three triple methods minimize the margin ranking loss
//! `max(0, margin + score(neg) − score(pos))` by mini-batch SGD, the walk
//! method trains skip-gram with negative sampling over a walk corpus and keeps
//! the node-token vectors.

mod margin;
mod skipgram;
mod walks;

pub use margin::{
    margin_ranking_loss, margin_sample_gradients, margin_sample_loss, score_vector_gradients,
    score_vectors, ScoreGradients,
};
pub use skipgram::{sgns_loss_gradients, train_skipgram};
pub use walks::{generate_walks, WalkToken};

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, RelId, Triple, TripleStore};
use crate::numeric;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMethod {
    /// Relations as translations; score −‖h + r − t‖₂.
    Translational,
    /// Translation on a relation-specific hyperplane; entities are projected
    /// along the unit normal before translating.
    Hyperplane,
    /// Diagonal bilinear product; score Σᵢ hᵢ rᵢ tᵢ.
    BilinearDiagonal,
    /// Random walks + skip-gram; has no triple score.
    Walk,
}

impl EmbeddingMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            EmbeddingMethod::Translational => "translational",
            EmbeddingMethod::Hyperplane => "hyperplane",
            EmbeddingMethod::BilinearDiagonal => "bilinear-diagonal",
            EmbeddingMethod::Walk => "walk",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "translational" => Some(EmbeddingMethod::Translational),
            "hyperplane" => Some(EmbeddingMethod::Hyperplane),
            "bilinear-diagonal" | "bilinear" => Some(EmbeddingMethod::BilinearDiagonal),
            "walk" => Some(EmbeddingMethod::Walk),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EmbedError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("node {} has no embedding", (.0).0)]
    MissingNode(NodeId),
    #[error("relation {} has no parameters", (.0).0)]
    MissingRelation(RelId),
    #[error("the walk method has no triple score")]
    UnsupportedOperation,
    #[error("no corruption candidate differs from the original triple")]
    SamplingExhausted,
    #[error("cannot train on an empty store")]
    EmptyStore,
}

/// Training hyperparameters. The walk fields only matter for the walk method,
/// `margin` only for the triple methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dimension: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub negatives_per_positive: usize,
    pub batch_size: usize,
    pub walk_depth: usize,
    pub walks_per_node: usize,
    pub window_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dimension: 100,
            epochs: 100,
            learning_rate: 0.01,
            margin: 1.0,
            negatives_per_positive: 5,
            batch_size: 32,
            walk_depth: 4,
            walks_per_node: 100,
            window_size: 5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let positive = [
            ("dimension", self.dimension),
            ("epochs", self.epochs),
            ("negatives_per_positive", self.negatives_per_positive),
            ("batch_size", self.batch_size),
            ("walk_depth", self.walk_depth),
            ("walks_per_node", self.walks_per_node),
            ("window_size", self.window_size),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(EmbedError::InvalidConfig(alloc::format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(EmbedError::InvalidConfig("learning_rate must be > 0".into()));
        }
        if !(self.margin >= 0.0) {
            return Err(EmbedError::InvalidConfig("margin must be >= 0".into()));
        }
        Ok(())
    }
}

/// Trained node and relation vectors. Node vectors are indexed by dense node
/// id; the hyperplane method additionally carries one unit normal per
/// relation.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    method: EmbeddingMethod,
    dimension: usize,
    node_vectors: Vec<f64>,
    node_count: usize,
    relation_vectors: Vec<f64>,
    relation_count: usize,
    normals: Option<Vec<f64>>,
    seed: u64,
}

impl EmbeddingTable {
    /// Assemble a table from raw parts; lengths must be consistent with
    /// `dimension`. Used by trainers, persistence and tests.
    pub fn from_parts(
        method: EmbeddingMethod,
        dimension: usize,
        node_vectors: Vec<f64>,
        relation_vectors: Vec<f64>,
        normals: Option<Vec<f64>>,
        seed: u64,
    ) -> Self {
        assert!(dimension > 0);
        assert_eq!(node_vectors.len() % dimension, 0);
        assert_eq!(relation_vectors.len() % dimension, 0);
        if let Some(n) = &normals {
            assert_eq!(n.len(), relation_vectors.len());
        }
        let node_count = node_vectors.len() / dimension;
        let relation_count = relation_vectors.len() / dimension;
        EmbeddingTable {
            method,
            dimension,
            node_vectors,
            node_count,
            relation_vectors,
            relation_count,
            normals,
            seed,
        }
    }

    pub fn method(&self) -> EmbeddingMethod {
        self.method
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn relation_count(&self) -> usize {
        self.relation_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn node_vector(&self, id: NodeId) -> Result<&[f64], EmbedError> {
        let i = id.0 as usize;
        if i >= self.node_count {
            return Err(EmbedError::MissingNode(id));
        }
        Ok(&self.node_vectors[i * self.dimension..(i + 1) * self.dimension])
    }

    pub fn relation_vector(&self, id: RelId) -> Result<&[f64], EmbedError> {
        let i = id.0 as usize;
        if i >= self.relation_count {
            return Err(EmbedError::MissingRelation(id));
        }
        Ok(&self.relation_vectors[i * self.dimension..(i + 1) * self.dimension])
    }

    pub fn normal(&self, id: RelId) -> Result<Option<&[f64]>, EmbedError> {
        match &self.normals {
            None => Ok(None),
            Some(normals) => {
                let i = id.0 as usize;
                if i >= self.relation_count {
                    return Err(EmbedError::MissingRelation(id));
                }
                Ok(Some(&normals[i * self.dimension..(i + 1) * self.dimension]))
            }
        }
    }

    /// Plausibility score of a triple; higher is more plausible. The walk
    /// method has none.
    pub fn score_triple(&self, head: NodeId, relation: RelId, tail: NodeId) -> Result<f64, EmbedError> {
        if self.method == EmbeddingMethod::Walk {
            return Err(EmbedError::UnsupportedOperation);
        }
        let h = self.node_vector(head)?;
        let t = self.node_vector(tail)?;
        let r = self.relation_vector(relation)?;
        let w = self.normal(relation)?;
        Ok(score_vectors(self.method, h, r, t, w))
    }

    /// Raw bits of every parameter, for determinism checks.
    pub fn parameter_bits(&self) -> impl Iterator<Item = u64> + '_ {
        self.node_vectors
            .iter()
            .chain(self.relation_vectors.iter())
            .chain(self.normals.iter().flatten())
            .map(|v| v.to_bits())
    }
}

/// Replace the head or tail (fair coin) of `triple` with a uniformly chosen
/// candidate. Never returns the original triple; if neither side can change,
/// sampling is exhausted.
pub fn negative_corrupt<R: Rng>(
    triple: Triple,
    candidates: &[NodeId],
    rng: &mut R,
) -> Result<Triple, EmbedError> {
    if candidates.is_empty() {
        return Err(EmbedError::SamplingExhausted);
    }
    let corrupt_head = rng.gen_bool(0.5);
    for &side_head in &[corrupt_head, !corrupt_head] {
        let current = if side_head { triple.head } else { triple.tail };
        let usable = candidates.iter().filter(|&&c| c != current).count();
        if usable == 0 {
            continue;
        }
        let mut pick = rng.gen_range(0..usable);
        for &c in candidates {
            if c == current {
                continue;
            }
            if pick == 0 {
                return Ok(if side_head {
                    Triple { head: c, ..triple }
                } else {
                    Triple { tail: c, ..triple }
                });
            }
            pick -= 1;
        }
    }
    Err(EmbedError::SamplingExhausted)
}

/// Train a table over the full store with the given method. Deterministic for
/// a fixed config (the seed drives initialization, shuffling and sampling).
pub fn train_embeddings(
    store: &TripleStore,
    method: EmbeddingMethod,
    config: &TrainConfig,
) -> Result<EmbeddingTable, EmbedError> {
    train_embeddings_traced(store, method, config).map(|(table, _)| table)
}

/// Like [`train_embeddings`] but also reports the mean training loss per
/// epoch.
pub fn train_embeddings_traced(
    store: &TripleStore,
    method: EmbeddingMethod,
    config: &TrainConfig,
) -> Result<(EmbeddingTable, Vec<f64>), EmbedError> {
    config.validate()?;
    if store.node_count() == 0 {
        return Err(EmbedError::EmptyStore);
    }
    match method {
        EmbeddingMethod::Walk => skipgram::train_walk_method(store, config),
        _ => margin::train_margin_method(store, method, config),
    }
}

/// Uniform init in [−6/√d, 6/√d], the usual convention for translational
/// models; used by every trainer.
pub(crate) fn init_uniform<R: Rng>(rng: &mut R, count: usize, dimension: usize) -> Vec<f64> {
    let bound = 6.0 / numeric::sqrt(dimension as f64);
    (0..count * dimension).map(|_| rng.gen_range(-bound..bound)).collect()
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn shuffled_indices<R: Rng>(rng: &mut R, len: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    order
}
