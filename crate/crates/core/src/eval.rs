//! Cross-validated evaluation: negative sampling, stratified folds,
//! precision/recall/weighted-F1, the Wilcoxon signed-rank test, and the two
//! explanation-effectiveness ablations.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aspects::aspects_for_pair;
use crate::classify::ClassifierModel;
use crate::embed::{rng_from_seed, EmbeddingTable};
use crate::explain::ExplainError;
use crate::graph::{AnnotationMap, NodeId, OntologyGraph};
use crate::numeric::{normal_two_sided, sqrt};
use crate::pairrep::{aggregate, AggregateOp};
use crate::Explanation;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("input lengths differ")]
    LengthMismatch,
    #[error("empty input")]
    EmptyInput,
    #[error("k must be at least 2")]
    TooFewFolds,
    #[error("class {class} has {count} members, fewer than k = {k}")]
    ClassTooSmall { class: u8, count: usize, k: usize },
    #[error("requested {requested} negative pairs but only {available} candidates exist")]
    SamplingExhausted { requested: usize, available: usize },
    #[error("duplicate unordered pair ({})-({})", (.0).0, (.1).0)]
    DuplicatePair(NodeId, NodeId),
    #[error("entity node {} is not annotated", (.0).0)]
    UnannotatedEntity(NodeId),
}

/// One labelled entity pair; `label` is 1 for a related pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub e1: NodeId,
    pub e2: NodeId,
    pub label: u8,
}

fn unordered(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Labelled pairs plus a provenance note (source file, sampling seed).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairDataset {
    pub pairs: Vec<LabeledPair>,
    pub provenance: String,
}

impl PairDataset {
    /// Validates that unordered pairs are unique and both entities of every
    /// pair are annotated.
    pub fn new(
        pairs: Vec<LabeledPair>,
        provenance: String,
        annotations: &AnnotationMap,
    ) -> Result<Self, EvalError> {
        let mut seen = BTreeSet::new();
        for p in &pairs {
            if !seen.insert(unordered(p.e1, p.e2)) {
                return Err(EvalError::DuplicatePair(p.e1, p.e2));
            }
            for e in [p.e1, p.e2] {
                if !annotations.contains(e) {
                    return Err(EvalError::UnannotatedEntity(e));
                }
            }
        }
        Ok(PairDataset { pairs, provenance })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.pairs.iter().map(|p| p.label).collect()
    }
}

/// Sample `n` distinct unordered pairs over `entities`, uniformly at random,
/// excluding self-pairs and anything in `positives`.
pub fn sample_negative_pairs(
    entities: &[NodeId],
    positives: &[(NodeId, NodeId)],
    n: usize,
    seed: u64,
) -> Result<Vec<(NodeId, NodeId)>, EvalError> {
    let pool: Vec<NodeId> = {
        let set: BTreeSet<NodeId> = entities.iter().copied().collect();
        set.into_iter().collect()
    };
    let m = pool.len();
    let forbidden: BTreeSet<(NodeId, NodeId)> = positives
        .iter()
        .filter(|(a, b)| a != b)
        .map(|&(a, b)| unordered(a, b))
        .filter(|(a, b)| pool.binary_search(a).is_ok() && pool.binary_search(b).is_ok())
        .collect();
    let total = m * m.saturating_sub(1) / 2;
    let available = total - forbidden.len();
    if n > available {
        return Err(EvalError::SamplingExhausted { requested: n, available });
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let mut rng = rng_from_seed(seed);
    // Enumerate when the candidate space is small; otherwise rejection-sample.
    if total <= 100_000 {
        let mut candidates: Vec<(NodeId, NodeId)> = Vec::with_capacity(available);
        for i in 0..m {
            for j in i + 1..m {
                let pair = (pool[i], pool[j]);
                if !forbidden.contains(&pair) {
                    candidates.push(pair);
                }
            }
        }
        candidates.shuffle(&mut rng);
        candidates.truncate(n);
        Ok(candidates)
    } else {
        let mut drawn = BTreeSet::new();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let a = pool[rng.gen_range(0..m)];
            let b = pool[rng.gen_range(0..m)];
            if a == b {
                continue;
            }
            let pair = unordered(a, b);
            if forbidden.contains(&pair) || !drawn.insert(pair) {
                continue;
            }
            out.push(pair);
        }
        Ok(out)
    }
}

/// Split indices into `k` disjoint folds with per-class counts differing by
/// at most one across folds. Deterministic for a fixed seed. A class present
/// in the dataset needs at least 2 members so that it reaches both a test
/// fold and a training complement; a class with fewer members than folds
/// simply skips some folds.
pub fn stratified_kfold(
    dataset: &PairDataset,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::TooFewFolds);
    }
    let labels = dataset.labels();
    let mut rng = rng_from_seed(seed);
    let mut folds: Vec<Vec<usize>> = alloc::vec![Vec::new(); k];
    // The fold cursor runs on across classes so fold sizes stay balanced.
    let mut cursor = 0usize;
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() == 1 {
            return Err(EvalError::ClassTooSmall { class, count: members.len(), k });
        }
        members.shuffle(&mut rng);
        for index in members {
            folds[cursor % k].push(index);
            cursor += 1;
        }
    }
    for fold in folds.iter_mut() {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Precision and recall for the positive class, weighted F1 across both
/// classes, and per-class supports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub weighted_f1: f64,
    pub support_positive: usize,
    pub support_negative: usize,
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Confusion-matrix metrics with the zero-division convention: an undefined
/// component metric is 0.
pub fn compute_metrics(predictions: &[u8], labels: &[u8]) -> Result<Metrics, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch);
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }

    let mut f1 = [0.0f64; 2];
    let mut support = [0usize; 2];
    let mut positive_precision = 0.0;
    let mut positive_recall = 0.0;
    for class in [0u8, 1u8] {
        let tp = predictions
            .iter()
            .zip(labels)
            .filter(|(&p, &l)| p == class && l == class)
            .count() as f64;
        let predicted = predictions.iter().filter(|&&p| p == class).count() as f64;
        let actual = labels.iter().filter(|&&l| l == class).count() as f64;
        let precision = safe_div(tp, predicted);
        let recall = safe_div(tp, actual);
        f1[class as usize] = safe_div(2.0 * precision * recall, precision + recall);
        support[class as usize] = actual as usize;
        if class == 1 {
            positive_precision = precision;
            positive_recall = recall;
        }
    }

    let total = (support[0] + support[1]) as f64;
    Ok(Metrics {
        precision: positive_precision,
        recall: positive_recall,
        weighted_f1: (support[0] as f64 * f1[0] + support[1] as f64 * f1[1]) / total,
        support_positive: support[1],
        support_negative: support[0],
    })
}

/// Midranks of the absolute values, plus the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].abs().partial_cmp(&values[j].abs()).expect("non-finite diff"));
    let mut ranks = alloc::vec![0.0; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[order[j]].abs() == values[order[i]].abs() {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0; // average of ranks i+1 ..= j
        for &idx in &order[i..j] {
            ranks[idx] = mid;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

const WILCOXON_EXACT_LIMIT: usize = 12;

/// Two-sided Wilcoxon signed-rank test for paired samples. Zero differences
/// are dropped; if every difference is zero the test carries no signal and
/// p = 1. Exact by enumeration of all 2^n sign assignments for n ≤ 12, normal
/// approximation with tie correction above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch);
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(1.0);
    }

    let (ranks, ties) = midranks(&diffs);
    let w_observed: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    let p = if n <= WILCOXON_EXACT_LIMIT {
        let assignments = 1u64 << n;
        let mut at_most = 0u64;
        let mut at_least = 0u64;
        for mask in 0..assignments {
            let w: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            if w <= w_observed + 1e-9 {
                at_most += 1;
            }
            if w >= w_observed - 1e-9 {
                at_least += 1;
            }
        }
        2.0 * at_most.min(at_least) as f64 / assignments as f64
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_sum: f64 = ties
            .iter()
            .map(|&t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_sum / 48.0;
        let z = ((w_observed - mean).abs() - 0.5).max(0.0) / sqrt(variance);
        normal_two_sided(z)
    };
    Ok(p.clamp(f64::MIN_POSITIVE, 1.0))
}

/// Ablation scenario of the effectiveness analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    WithoutNecessary,
    OnlySufficient,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::WithoutNecessary => "without-necessary",
            Scenario::OnlySufficient => "only-sufficient",
        }
    }
}

/// Metric differences between an ablated and the global representation,
/// computed on the selected subset only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaMetrics {
    pub delta_precision: f64,
    pub delta_recall: f64,
    pub delta_weighted_f1: f64,
    pub subset_size: usize,
    pub scenario: Scenario,
}

struct PairContext {
    label: u8,
    global_class: u8,
    aspect_classes: Vec<NodeId>,
    solo_classes: Vec<u8>,
    ablated_classes: Vec<u8>,
}

fn pair_context(
    pair: &LabeledPair,
    table: &EmbeddingTable,
    model: &ClassifierModel,
    annotations: &AnnotationMap,
    graph: &OntologyGraph,
    op: AggregateOp,
) -> Result<PairContext, ExplainError> {
    let aspects = aspects_for_pair(graph, annotations, pair.e1, pair.e2)?;
    let explanation =
        crate::explain::explanation_for_aspects((pair.e1, pair.e2), aspects, table, model, op)?;
    Ok(PairContext {
        label: pair.label,
        global_class: explanation.global.class,
        aspect_classes: explanation.aspects.aspects.clone(),
        solo_classes: explanation.per_aspect.iter().map(|r| r.solo.class).collect(),
        ablated_classes: explanation.per_aspect.iter().map(|r| r.ablated.class).collect(),
    })
}

fn predict_subset(
    table: &EmbeddingTable,
    model: &ClassifierModel,
    op: AggregateOp,
    classes: &[NodeId],
) -> Result<u8, ExplainError> {
    let vectors: Vec<&[f64]> = classes
        .iter()
        .map(|&c| table.node_vector(c))
        .collect::<Result<_, _>>()
        .map_err(ExplainError::from)?;
    let v = aggregate(op, table.dimension(), &vectors)
        .map_err(ExplainError::from)?;
    Ok(model.predict(&v).map_err(ExplainError::from)?.class)
}

/// Necessary-scenario effectiveness: on the correctly predicted pairs,
/// re-predict with every necessary aspect removed and report the metric
/// drop against the global representation (which is perfect on this subset
/// by construction, so every delta is ≤ 0). `None` when no pair is
/// correctly predicted.
pub fn effectiveness_necessary(
    test_pairs: &[LabeledPair],
    table: &EmbeddingTable,
    model: &ClassifierModel,
    annotations: &AnnotationMap,
    graph: &OntologyGraph,
    op: AggregateOp,
) -> Result<Option<DeltaMetrics>, ExplainError> {
    let mut labels = Vec::new();
    let mut global_preds = Vec::new();
    let mut ablated_preds = Vec::new();
    for pair in test_pairs {
        let ctx = pair_context(pair, table, model, annotations, graph, op)?;
        if ctx.global_class != ctx.label {
            continue;
        }
        // Keep the aspects whose single removal does not flip the class.
        let kept: Vec<NodeId> = ctx
            .aspect_classes
            .iter()
            .zip(&ctx.ablated_classes)
            .filter(|(_, &ablated)| ablated == ctx.global_class)
            .map(|(&c, _)| c)
            .collect();
        let ablated = if kept.len() == ctx.aspect_classes.len() {
            ctx.global_class // nothing necessary: the ablation is the identity
        } else {
            predict_subset(table, model, op, &kept)?
        };
        labels.push(ctx.label);
        global_preds.push(ctx.global_class);
        ablated_preds.push(ablated);
    }
    if labels.is_empty() {
        return Ok(None);
    }
    let global = compute_metrics(&global_preds, &labels).expect("nonempty subset");
    let ablated = compute_metrics(&ablated_preds, &labels).expect("nonempty subset");
    Ok(Some(DeltaMetrics {
        delta_precision: ablated.precision - global.precision,
        delta_recall: ablated.recall - global.recall,
        delta_weighted_f1: ablated.weighted_f1 - global.weighted_f1,
        subset_size: labels.len(),
        scenario: Scenario::WithoutNecessary,
    }))
}

/// Sufficient-scenario effectiveness: on the incorrectly predicted pairs,
/// re-predict with only the truth-aligned aspects (those whose solo
/// prediction equals the ground-truth label) and report the metric gain over
/// the global representation, which scores zero on this subset.
/// `None` when no pair is mispredicted.
pub fn effectiveness_sufficient(
    test_pairs: &[LabeledPair],
    table: &EmbeddingTable,
    model: &ClassifierModel,
    annotations: &AnnotationMap,
    graph: &OntologyGraph,
    op: AggregateOp,
) -> Result<Option<DeltaMetrics>, ExplainError> {
    let mut labels = Vec::new();
    let mut ablated_preds = Vec::new();
    for pair in test_pairs {
        let ctx = pair_context(pair, table, model, annotations, graph, op)?;
        if ctx.global_class == ctx.label {
            continue;
        }
        let kept: Vec<NodeId> = ctx
            .aspect_classes
            .iter()
            .zip(&ctx.solo_classes)
            .filter(|(_, &solo)| solo == ctx.label)
            .map(|(&c, _)| c)
            .collect();
        labels.push(ctx.label);
        ablated_preds.push(predict_subset(table, model, op, &kept)?);
    }
    if labels.is_empty() {
        return Ok(None);
    }
    let ablated = compute_metrics(&ablated_preds, &labels).expect("nonempty subset");
    // Global metrics are identically zero here: every pair is mispredicted.
    Ok(Some(DeltaMetrics {
        delta_precision: ablated.precision,
        delta_recall: ablated.recall,
        delta_weighted_f1: ablated.weighted_f1,
        subset_size: labels.len(),
        scenario: Scenario::OnlySufficient,
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExplanationKind {
    Necessary,
    Sufficient,
}

/// Average and population standard deviation of explanation lengths.
pub fn explanation_length_stats(
    explanations: &[Explanation],
    kind: ExplanationKind,
) -> Result<(f64, f64), EvalError> {
    if explanations.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let lengths: Vec<f64> = explanations
        .iter()
        .map(|e| match kind {
            ExplanationKind::Necessary => e.necessary_len() as f64,
            ExplanationKind::Sufficient => e.sufficient_len() as f64,
        })
        .collect();
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let variance = lengths.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
    Ok((mean, sqrt(variance)))
}

/// Median of a sample; the midpoint convention for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value"));
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}
