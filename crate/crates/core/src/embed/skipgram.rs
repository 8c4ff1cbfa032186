//! Skip-gram with negative sampling over the walk corpus.
//!
//! Nodes and relations share one token vocabulary (node tokens first, then
//! relation tokens); after training, the input vectors of node tokens become
//! the node embeddings and those of relation tokens the relation vectors.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::graph::TripleStore;
use crate::numeric::{log_sigmoid, sigmoid};

use super::{generate_walks, init_uniform, rng_from_seed, EmbedError, EmbeddingTable, TrainConfig, WalkToken};

/// SGNS loss for one (center, context) pair with sampled negatives:
/// `-log σ(v·u_ctx) − Σ log σ(−v·u_neg)`. Returns the loss together with the
/// gradients for the center input vector, the context output vector and each
/// negative output vector.
pub fn sgns_loss_gradients(
    center: &[f64],
    context_out: &[f64],
    negatives_out: &[&[f64]],
) -> (f64, Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let dim = center.len();
    let pos_score = crate::numeric::dot(center, context_out);
    let mut loss = -log_sigmoid(pos_score);

    // d/dx of -log sigma(x) is sigma(x) - 1.
    let pos_coeff = sigmoid(pos_score) - 1.0;
    let mut center_grad: Vec<f64> = context_out.iter().map(|u| pos_coeff * u).collect();
    let context_grad: Vec<f64> = center.iter().map(|v| pos_coeff * v).collect();

    let mut negative_grads = Vec::with_capacity(negatives_out.len());
    for neg in negatives_out {
        let neg_score = crate::numeric::dot(center, neg);
        loss -= log_sigmoid(-neg_score);
        let neg_coeff = sigmoid(neg_score); // d/dx of -log sigma(-x)
        for k in 0..dim {
            center_grad[k] += neg_coeff * neg[k];
        }
        negative_grads.push(center.iter().map(|v| neg_coeff * v).collect());
    }
    (loss, center_grad, context_grad, negative_grads)
}

fn token_of(node_count: usize, token: WalkToken) -> usize {
    match token {
        WalkToken::Node(n) => n.0 as usize,
        WalkToken::Relation(r) => node_count + r.0 as usize,
    }
}

/// Cumulative unigram^0.75 table for negative sampling.
struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    fn new(counts: &[usize]) -> Self {
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut total = 0.0;
        for &c in counts {
            total += libm::pow(c as f64, 0.75);
            cumulative.push(total);
        }
        NegativeSampler { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("empty vocabulary");
        let x = rng.gen_range(0.0..total);
        self.cumulative.partition_point(|&c| c <= x)
    }
}

/// Train skip-gram over token sequences drawn from a vocabulary of `vocab`
/// tokens. Returns the input vectors (the embeddings kept downstream), the
/// context output vectors, and the mean loss per epoch.
pub fn train_skipgram(
    sequences: &[Vec<usize>],
    vocab: usize,
    config: &TrainConfig,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dim = config.dimension;
    let mut counts = vec![0usize; vocab];
    for seq in sequences {
        for &t in seq {
            counts[t] += 1;
        }
    }
    // Tokens never visited still get a slot so sampling covers the vocabulary.
    for c in counts.iter_mut() {
        if *c == 0 {
            *c = 1;
        }
    }
    let sampler = NegativeSampler::new(&counts);

    let mut rng = rng_from_seed(config.seed.wrapping_add(1));
    let mut input = init_uniform(&mut rng, vocab, dim);
    let mut output = vec![0.0; vocab * dim];

    let lr = config.learning_rate;
    let window = config.window_size;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut pair_count = 0usize;
        for seq in sequences {
            for (i, &center) in seq.iter().enumerate() {
                let lo = i.saturating_sub(window);
                let hi = (i + window + 1).min(seq.len());
                for j in lo..hi {
                    if j == i {
                        continue;
                    }
                    let context = seq[j];
                    let negatives: Vec<usize> = (0..config.negatives_per_positive)
                        .map(|_| sampler.sample(&mut rng))
                        .collect();

                    let center_vec = input[center * dim..(center + 1) * dim].to_vec();
                    let context_vec = output[context * dim..(context + 1) * dim].to_vec();
                    let negative_vecs: Vec<Vec<f64>> = negatives
                        .iter()
                        .map(|&n| output[n * dim..(n + 1) * dim].to_vec())
                        .collect();
                    let negative_refs: Vec<&[f64]> =
                        negative_vecs.iter().map(|v| v.as_slice()).collect();

                    let (loss, g_center, g_context, g_negs) =
                        sgns_loss_gradients(&center_vec, &context_vec, &negative_refs);
                    loss_sum += loss;
                    pair_count += 1;

                    for k in 0..dim {
                        input[center * dim + k] -= lr * g_center[k];
                        output[context * dim + k] -= lr * g_context[k];
                    }
                    for (&n, g) in negatives.iter().zip(&g_negs) {
                        for k in 0..dim {
                            output[n * dim + k] -= lr * g[k];
                        }
                    }
                }
            }
        }
        epoch_losses.push(if pair_count > 0 { loss_sum / pair_count as f64 } else { 0.0 });
    }
    (input, output, epoch_losses)
}

pub(super) fn train_walk_method(
    store: &TripleStore,
    config: &TrainConfig,
) -> Result<(EmbeddingTable, Vec<f64>), EmbedError> {
    let node_count = store.node_count();
    let vocab = node_count + store.relation_count();
    let dim = config.dimension;

    let corpus = generate_walks(store, config.walk_depth, config.walks_per_node, config.seed);
    let sequences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|walk| walk.iter().map(|&t| token_of(node_count, t)).collect())
        .collect();

    let (input, _, epoch_losses) = train_skipgram(&sequences, vocab, config);

    let node_vectors = input[..node_count * dim].to_vec();
    let relation_vectors = input[node_count * dim..].to_vec();
    let table = EmbeddingTable::from_parts(
        super::EmbeddingMethod::Walk,
        dim,
        node_vectors,
        relation_vectors,
        None,
        config.seed,
    );
    Ok((table, epoch_losses))
}
