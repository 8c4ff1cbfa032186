//! Triple scoring functions, their gradients, and the shared margin-ranking
//! trainer for the translational, hyperplane and bilinear-diagonal methods.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{NodeId, TripleStore};
use crate::numeric::{dot, l2_norm, normalize, sqrt};

use super::{
    init_uniform, negative_corrupt, rng_from_seed, shuffled_indices, EmbedError, EmbeddingMethod,
    EmbeddingTable, TrainConfig,
};

// Distance gradients blow up as the distance approaches zero; below this the
// triple is treated as already perfect and contributes no gradient.
const MIN_DISTANCE: f64 = 1e-12;

/// Score a triple from raw vectors; higher is more plausible. The hyperplane
/// method requires `normal`.
pub fn score_vectors(
    method: EmbeddingMethod,
    head: &[f64],
    relation: &[f64],
    tail: &[f64],
    normal: Option<&[f64]>,
) -> f64 {
    match method {
        EmbeddingMethod::Translational => {
            let sq: f64 = head
                .iter()
                .zip(relation)
                .zip(tail)
                .map(|((h, r), t)| {
                    let d = h + r - t;
                    d * d
                })
                .sum();
            -sqrt(sq)
        }
        EmbeddingMethod::Hyperplane => {
            let w = normal.expect("hyperplane method requires a normal");
            let wa = dot(w, head) - dot(w, tail);
            let sq: f64 = head
                .iter()
                .zip(tail)
                .zip(relation)
                .zip(w)
                .map(|(((h, t), d), wk)| {
                    let delta = (h - t) - wa * wk + d;
                    delta * delta
                })
                .sum();
            -sqrt(sq)
        }
        EmbeddingMethod::BilinearDiagonal => head
            .iter()
            .zip(relation)
            .zip(tail)
            .map(|((h, r), t)| h * r * t)
            .sum(),
        EmbeddingMethod::Walk => panic!("walk method has no triple score"),
    }
}

/// Partial derivatives of the triple score with respect to each parameter
/// vector. `normal` is populated for the hyperplane method only.
#[derive(Clone, Debug)]
pub struct ScoreGradients {
    pub head: Vec<f64>,
    pub relation: Vec<f64>,
    pub tail: Vec<f64>,
    pub normal: Option<Vec<f64>>,
}

/// Score plus analytic gradients; checked against central finite differences
/// in the test suite.
pub fn score_vector_gradients(
    method: EmbeddingMethod,
    head: &[f64],
    relation: &[f64],
    tail: &[f64],
    normal: Option<&[f64]>,
) -> (f64, ScoreGradients) {
    let dim = head.len();
    match method {
        EmbeddingMethod::Translational => {
            let delta: Vec<f64> = head
                .iter()
                .zip(relation)
                .zip(tail)
                .map(|((h, r), t)| h + r - t)
                .collect();
            let n = l2_norm(&delta);
            let score = -n;
            let scale = if n > MIN_DISTANCE { 1.0 / n } else { 0.0 };
            let g: Vec<f64> = delta.iter().map(|d| -d * scale).collect();
            let grads = ScoreGradients {
                head: g.clone(),
                relation: g,
                tail: delta.iter().map(|d| d * scale).collect(),
                normal: None,
            };
            (score, grads)
        }
        EmbeddingMethod::Hyperplane => {
            let w = normal.expect("hyperplane method requires a normal");
            let a: Vec<f64> = head.iter().zip(tail).map(|(h, t)| h - t).collect();
            let wa = dot(w, &a);
            let delta: Vec<f64> = a
                .iter()
                .zip(w)
                .zip(relation)
                .map(|((ak, wk), dk)| ak - wa * wk + dk)
                .collect();
            let n = l2_norm(&delta);
            let score = -n;
            let scale = if n > MIN_DISTANCE { 1.0 / n } else { 0.0 };
            let wd = dot(w, &delta);
            // d s / d h_k = -(delta_k - (w . delta) w_k) / n, tail is opposite.
            let head_grad: Vec<f64> = delta
                .iter()
                .zip(w)
                .map(|(dk, wk)| -(dk - wd * wk) * scale)
                .collect();
            let grads = ScoreGradients {
                tail: head_grad.iter().map(|g| -g).collect(),
                relation: delta.iter().map(|dk| -dk * scale).collect(),
                normal: Some(
                    (0..dim)
                        .map(|k| (wd * a[k] + wa * delta[k]) * scale)
                        .collect(),
                ),
                head: head_grad,
            };
            (score, grads)
        }
        EmbeddingMethod::BilinearDiagonal => {
            let score = score_vectors(method, head, relation, tail, None);
            let grads = ScoreGradients {
                head: relation.iter().zip(tail).map(|(r, t)| r * t).collect(),
                relation: head.iter().zip(tail).map(|(h, t)| h * t).collect(),
                tail: head.iter().zip(relation).map(|(h, r)| h * r).collect(),
                normal: None,
            };
            (score, grads)
        }
        EmbeddingMethod::Walk => panic!("walk method has no triple score"),
    }
}

/// `max(0, margin + score(neg) − score(pos))` with higher-is-better scores.
pub fn margin_ranking_loss(margin: f64, positive_score: f64, negative_score: f64) -> f64 {
    (margin + negative_score - positive_score).max(0.0)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Param {
    Node(u32),
    Relation(u32),
    Normal(u32),
}

struct Params {
    dimension: usize,
    nodes: Vec<f64>,
    relations: Vec<f64>,
    normals: Option<Vec<f64>>,
}

impl Params {
    fn slice(&self, p: Param) -> &[f64] {
        let d = self.dimension;
        match p {
            Param::Node(i) => &self.nodes[i as usize * d..(i as usize + 1) * d],
            Param::Relation(i) => &self.relations[i as usize * d..(i as usize + 1) * d],
            Param::Normal(i) => {
                let n = self.normals.as_ref().expect("no normals");
                &n[i as usize * d..(i as usize + 1) * d]
            }
        }
    }

    fn slice_mut(&mut self, p: Param) -> &mut [f64] {
        let d = self.dimension;
        match p {
            Param::Node(i) => &mut self.nodes[i as usize * d..(i as usize + 1) * d],
            Param::Relation(i) => &mut self.relations[i as usize * d..(i as usize + 1) * d],
            Param::Normal(i) => {
                let n = self.normals.as_mut().expect("no normals");
                &mut n[i as usize * d..(i as usize + 1) * d]
            }
        }
    }
}

fn accumulate(acc: &mut BTreeMap<Param, Vec<f64>>, dim: usize, param: Param, grad: &[f64], sign: f64) {
    let entry = acc.entry(param).or_insert_with(|| vec![0.0; dim]);
    for (a, g) in entry.iter_mut().zip(grad) {
        *a += sign * g;
    }
}

pub(super) fn train_margin_method(
    store: &TripleStore,
    method: EmbeddingMethod,
    config: &TrainConfig,
) -> Result<(EmbeddingTable, Vec<f64>), EmbedError> {
    let dim = config.dimension;
    let mut rng = rng_from_seed(config.seed);

    let mut params = Params {
        dimension: dim,
        nodes: init_uniform(&mut rng, store.node_count(), dim),
        relations: init_uniform(&mut rng, store.relation_count(), dim),
        normals: match method {
            EmbeddingMethod::Hyperplane => {
                let mut normals = init_uniform(&mut rng, store.relation_count(), dim);
                for chunk in normals.chunks_mut(dim) {
                    normalize(chunk);
                }
                Some(normals)
            }
            _ => None,
        },
    };

    let candidates: Vec<NodeId> = store.node_ids().collect();
    let triples = store.triples();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let order = shuffled_indices(&mut rng, triples.len());
        let mut loss_sum = 0.0;
        let mut sample_count = 0usize;

        for batch in order.chunks(config.batch_size) {
            let mut acc: BTreeMap<Param, Vec<f64>> = BTreeMap::new();
            for &ti in batch {
                let pos = triples[ti];
                for _ in 0..config.negatives_per_positive {
                    let neg = negative_corrupt(pos, &candidates, &mut rng)?;
                    let loss = step_gradients(&params, method, pos, neg, config.margin, &mut acc);
                    loss_sum += loss;
                    sample_count += 1;
                }
            }

            let scale = config.learning_rate / (batch.len() * config.negatives_per_positive) as f64;
            for (param, grad) in &acc {
                let slice = params.slice_mut(*param);
                for (x, g) in slice.iter_mut().zip(grad) {
                    *x -= scale * g;
                }
                if let Param::Normal(_) = param {
                    normalize(slice);
                }
            }
        }

        if method == EmbeddingMethod::Translational {
            for chunk in params.nodes.chunks_mut(dim) {
                normalize(chunk);
            }
        }
        epoch_losses.push(if sample_count > 0 { loss_sum / sample_count as f64 } else { 0.0 });
    }

    let table = EmbeddingTable::from_parts(
        method,
        dim,
        params.nodes,
        params.relations,
        params.normals,
        config.seed,
    );
    Ok((table, epoch_losses))
}

/// Accumulate d loss / d params for one (positive, negative) sample into
/// `acc`; returns the sample loss. Gradients for parameters shared between
/// the positive and the corrupted triple add up.
fn step_gradients(
    params: &Params,
    method: EmbeddingMethod,
    pos: crate::graph::Triple,
    neg: crate::graph::Triple,
    margin: f64,
    acc: &mut BTreeMap<Param, Vec<f64>>,
) -> f64 {
    let dim = params.dimension;
    let normal_of = |rel: u32| -> Option<&[f64]> {
        params.normals.as_ref().map(|_| params.slice(Param::Normal(rel)))
    };

    let (pos_score, pos_grads) = score_vector_gradients(
        method,
        params.slice(Param::Node(pos.head.0)),
        params.slice(Param::Relation(pos.relation.0)),
        params.slice(Param::Node(pos.tail.0)),
        normal_of(pos.relation.0),
    );
    let (neg_score, neg_grads) = score_vector_gradients(
        method,
        params.slice(Param::Node(neg.head.0)),
        params.slice(Param::Relation(neg.relation.0)),
        params.slice(Param::Node(neg.tail.0)),
        normal_of(neg.relation.0),
    );

    let loss = margin_ranking_loss(margin, pos_score, neg_score);
    if loss > 0.0 {
        // d loss = d score(neg) − d score(pos)
        accumulate(acc, dim, Param::Node(pos.head.0), &pos_grads.head, -1.0);
        accumulate(acc, dim, Param::Relation(pos.relation.0), &pos_grads.relation, -1.0);
        accumulate(acc, dim, Param::Node(pos.tail.0), &pos_grads.tail, -1.0);
        if let Some(g) = &pos_grads.normal {
            accumulate(acc, dim, Param::Normal(pos.relation.0), g, -1.0);
        }
        accumulate(acc, dim, Param::Node(neg.head.0), &neg_grads.head, 1.0);
        accumulate(acc, dim, Param::Relation(neg.relation.0), &neg_grads.relation, 1.0);
        accumulate(acc, dim, Param::Node(neg.tail.0), &neg_grads.tail, 1.0);
        if let Some(g) = &neg_grads.normal {
            accumulate(acc, dim, Param::Normal(neg.relation.0), g, 1.0);
        }
    }
    loss
}

/// Loss and flat parameter gradients for one (positive, negative) sample over
/// an explicit parameter snapshot. Exposed for finite-difference checking.
pub fn margin_sample_loss(
    method: EmbeddingMethod,
    dimension: usize,
    nodes: &[f64],
    relations: &[f64],
    normals: Option<&[f64]>,
    pos: (u32, u32, u32),
    neg: (u32, u32, u32),
    margin: f64,
) -> f64 {
    let node = |i: u32| &nodes[i as usize * dimension..(i as usize + 1) * dimension];
    let rel = |i: u32| &relations[i as usize * dimension..(i as usize + 1) * dimension];
    let normal = |i: u32| normals.map(|n| &n[i as usize * dimension..(i as usize + 1) * dimension]);
    let s_pos = score_vectors(method, node(pos.0), rel(pos.1), node(pos.2), normal(pos.1));
    let s_neg = score_vectors(method, node(neg.0), rel(neg.1), node(neg.2), normal(neg.1));
    margin_ranking_loss(margin, s_pos, s_neg)
}

/// Analytic gradients matching [`margin_sample_loss`], flattened into node /
/// relation / normal buffers of the same shape as the inputs.
#[allow(clippy::too_many_arguments)]
pub fn margin_sample_gradients(
    method: EmbeddingMethod,
    dimension: usize,
    nodes: &[f64],
    relations: &[f64],
    normals: Option<&[f64]>,
    pos: (u32, u32, u32),
    neg: (u32, u32, u32),
    margin: f64,
) -> (f64, Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
    let params = Params {
        dimension,
        nodes: nodes.to_vec(),
        relations: relations.to_vec(),
        normals: normals.map(|n| n.to_vec()),
    };
    let mut acc = BTreeMap::new();
    let to_triple = |(h, r, t): (u32, u32, u32)| crate::graph::Triple {
        head: NodeId(h),
        relation: crate::graph::RelId(r),
        tail: NodeId(t),
    };
    let loss = step_gradients(&params, method, to_triple(pos), to_triple(neg), margin, &mut acc);

    let mut node_grads = vec![0.0; nodes.len()];
    let mut rel_grads = vec![0.0; relations.len()];
    let mut normal_grads = normals.map(|n| vec![0.0; n.len()]);
    for (param, grad) in acc {
        match param {
            Param::Node(i) => {
                node_grads[i as usize * dimension..(i as usize + 1) * dimension].copy_from_slice(&grad)
            }
            Param::Relation(i) => {
                rel_grads[i as usize * dimension..(i as usize + 1) * dimension].copy_from_slice(&grad)
            }
            Param::Normal(i) => {
                let buf = normal_grads.as_mut().expect("normal gradient without normals");
                buf[i as usize * dimension..(i as usize + 1) * dimension].copy_from_slice(&grad)
            }
        }
    }
    (loss, node_grads, rel_grads, normal_grads)
}
