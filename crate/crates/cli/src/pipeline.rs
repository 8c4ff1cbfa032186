//! The experiment pipeline. Each stage reads the run configuration plus the
//! artifacts of earlier stages from the output directory and writes its own;
//! `run_experiment` simply executes the stages in order, so composing them
//! one subcommand at a time yields identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use semrel_core::aspects::aspects_for_pair;
use semrel_core::classify::{train_classifier, ClassifierModel};
use semrel_core::embed::train_embeddings;
use semrel_core::eval::{
    compute_metrics, effectiveness_necessary, effectiveness_sufficient, median,
    sample_negative_pairs, stratified_kfold, wilcoxon_signed_rank, DeltaMetrics, LabeledPair,
    Metrics, PairDataset,
};
use semrel_core::explain::{explanation_report, ExplanationJson};
use semrel_core::graph::{build_ontology, load_annotations, AnnotationMap, NodeId, OntologyGraph, TripleStore};
use semrel_core::pairrep::{aggregate_aspects, represent_pair_entities};

use crate::config::{stage_seed, RunConfig};
use crate::formats::{self, FormatError, PredictionRow};

#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}`: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub message: String,
}

fn err_in<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError { stage, message: e.to_string() }
}

impl From<FormatError> for PipelineError {
    fn from(e: FormatError) -> Self {
        PipelineError { stage: "io", message: e.to_string() }
    }
}

// ---------------------------------------------------------------------------
// Shared state loading
// ---------------------------------------------------------------------------

pub struct World {
    pub store: TripleStore,
    pub graph: OntologyGraph,
    pub annotations: AnnotationMap,
    pub dataset: PairDataset,
}

fn store_dir(config: &RunConfig) -> PathBuf {
    config.output_dir.join("store")
}

/// Rebuild the in-memory state from the ingest artifacts.
pub fn load_world(config: &RunConfig) -> Result<World, PipelineError> {
    let dir = store_dir(config);
    let store = formats::read_store(&dir)?;
    let subclass = store
        .relation(&config.subclass_relation)
        .ok_or_else(|| PipelineError {
            stage: "ingest",
            message: format!("subclass relation `{}` not in store", config.subclass_relation),
        })?;
    let graph = build_ontology(&store, subclass).map_err(err_in("ingest"))?;
    let annotations = formats::read_annotation_ids(&dir.join("annotations.tsv"))?;
    let dataset = formats::read_pairs(&dir.join("pairs.tsv"), "store/pairs.tsv")?;
    Ok(World { store, graph, annotations, dataset })
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Parse the input files, build the ontology, resolve the pair sets (sampling
/// negatives when none are given) and write the interned snapshot.
pub fn stage_ingest(config: &RunConfig) -> Result<(), PipelineError> {
    const STAGE: &str = "ingest";
    let text = formats::read_to_string(&config.ontology)?;
    let format = config.triple_format().map_err(err_in(STAGE))?;
    let mut store = TripleStore::parse(&text, format).map_err(err_in(STAGE))?;

    let subclass = store.relation(&config.subclass_relation).ok_or_else(|| PipelineError {
        stage: STAGE,
        message: format!(
            "subclass relation `{}` does not occur in {}",
            config.subclass_relation,
            config.ontology.display()
        ),
    })?;
    let graph = build_ontology(&store, subclass).map_err(err_in(STAGE))?;

    let ann_text = formats::read_to_string(&config.annotations)?;
    let annotations = load_annotations(&ann_text, &mut store, &graph).map_err(err_in(STAGE))?;
    store.add_annotation_edges(&annotations, &config.annotation_relation);

    let resolve = |store: &TripleStore, name: &str| -> Result<NodeId, PipelineError> {
        store.node(name).filter(|&id| annotations.contains(id)).ok_or_else(|| PipelineError {
            stage: STAGE,
            message: format!("pair entity `{name}` is not an annotated entity"),
        })
    };

    let mut pairs: Vec<LabeledPair> = Vec::new();
    let positive_names = formats::read_pair_names(&config.positive_pairs)?;
    for (a, b) in &positive_names {
        pairs.push(LabeledPair { e1: resolve(&store, a)?, e2: resolve(&store, b)?, label: 1 });
    }

    let sampled;
    match &config.negative_pairs {
        Some(path) => {
            sampled = false;
            for (a, b) in formats::read_pair_names(path)? {
                pairs.push(LabeledPair { e1: resolve(&store, &a)?, e2: resolve(&store, &b)?, label: 0 });
            }
        }
        None => {
            sampled = true;
            let entities: Vec<NodeId> = {
                let set: std::collections::BTreeSet<NodeId> =
                    pairs.iter().flat_map(|p| [p.e1, p.e2]).collect();
                set.into_iter().collect()
            };
            let positives: Vec<(NodeId, NodeId)> = pairs.iter().map(|p| (p.e1, p.e2)).collect();
            let drawn = sample_negative_pairs(
                &entities,
                &positives,
                positives.len(),
                stage_seed(config.seed, "negatives"),
            )
            .map_err(err_in(STAGE))?;
            for (a, b) in drawn {
                pairs.push(LabeledPair { e1: a, e2: b, label: 0 });
            }
        }
    }

    let provenance = format!(
        "positives={} negatives_sampled={sampled} seed={}",
        positive_names.len(),
        config.seed
    );
    let dataset = PairDataset::new(pairs, provenance, &annotations).map_err(err_in(STAGE))?;

    let dir = store_dir(config);
    formats::write_store(&dir, &store)?;
    formats::write_annotation_ids(&dir.join("annotations.tsv"), &annotations)?;
    formats::write_pairs(&dir.join("pairs.tsv"), &dataset)?;
    Ok(())
}

/// Train node embeddings over the full graph (classes, entities and
/// annotation edges) and persist them.
pub fn stage_embed(config: &RunConfig) -> Result<(), PipelineError> {
    const STAGE: &str = "embed";
    let world = load_world(config)?;
    let method = config.method().map_err(err_in(STAGE))?;
    let table = train_embeddings(&world.store, method, &config.train_config()).map_err(err_in(STAGE))?;
    formats::write_embeddings(
        &config.output_dir.join("embeddings.tsv"),
        &config.output_dir.join("embeddings.meta"),
        &table,
        &world.store,
    )?;
    Ok(())
}

/// Compute shared aspects and both pair representations for every pair.
pub fn stage_represent(config: &RunConfig) -> Result<(), PipelineError> {
    const STAGE: &str = "represent";
    let world = load_world(config)?;
    let table = formats::read_embeddings(
        &config.output_dir.join("embeddings.tsv"),
        &config.output_dir.join("embeddings.meta"),
        &world.store,
    )?;
    let op = config.aggregate_op().map_err(err_in(STAGE))?;

    let mut aspect_rows = Vec::with_capacity(world.dataset.len());
    let mut aspect_features = Vec::with_capacity(world.dataset.len());
    let mut entity_features = Vec::with_capacity(world.dataset.len());
    for (id, pair) in world.dataset.pairs.iter().enumerate() {
        let aspects =
            aspects_for_pair(&world.graph, &world.annotations, pair.e1, pair.e2).map_err(err_in(STAGE))?;
        let vector = aggregate_aspects(&aspects, &table, op).map_err(err_in(STAGE))?;
        aspect_rows.push((
            id,
            aspects
                .aspects
                .iter()
                .map(|&c| world.store.node_name(c).to_string())
                .collect::<Vec<_>>(),
        ));
        aspect_features.push((id, vector, pair.label));

        let baseline = represent_pair_entities((pair.e1, pair.e2), &table).map_err(err_in(STAGE))?;
        entity_features.push((id, baseline.vector, pair.label));
    }

    formats::write_aspects(&config.output_dir.join("aspects.tsv"), &aspect_rows)?;
    fn as_refs(rows: &[(usize, Vec<f64>, u8)]) -> Vec<(usize, &[f64], u8)> {
        rows.iter().map(|(i, v, l)| (*i, v.as_slice(), *l)).collect()
    }
    formats::write_features(
        &config.output_dir.join("features_aspects.csv"),
        &as_refs(&aspect_features),
    )?;
    formats::write_features(
        &config.output_dir.join("features_entities.csv"),
        &as_refs(&entity_features),
    )?;
    Ok(())
}

fn model_path(config: &RunConfig, representation: &str, fold: usize) -> PathBuf {
    config.output_dir.join(format!("model_{representation}_fold_{fold}.json"))
}

/// Stratified k-fold training: one classifier per fold and representation,
/// plus per-pair test predictions.
pub fn stage_train(config: &RunConfig) -> Result<(), PipelineError> {
    const STAGE: &str = "train";
    let world = load_world(config)?;
    let aspects = formats::read_features(&config.output_dir.join("features_aspects.csv"))?;
    let entities = formats::read_features(&config.output_dir.join("features_entities.csv"))?;
    let aspect_rows = formats::read_aspect_rows(&config.output_dir.join("aspects.tsv"))?;
    let kind = config.classifier_kind().map_err(err_in(STAGE))?;
    let clf_config = config.classifier_config();

    let folds = stratified_kfold(&world.dataset, config.folds, stage_seed(config.seed, "folds"))
        .map_err(err_in(STAGE))?;

    let mut rows: Vec<PredictionRow> = Vec::with_capacity(world.dataset.len());
    for (fold_index, test) in folds.iter().enumerate() {
        let test_set: std::collections::BTreeSet<usize> = test.iter().copied().collect();
        let train_rows = |features: &formats::FeatureRows| -> (Vec<Vec<f64>>, Vec<u8>) {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for (id, vector, label) in &features.rows {
                if !test_set.contains(id) {
                    x.push(vector.clone());
                    y.push(*label);
                }
            }
            (x, y)
        };

        let (ax, ay) = train_rows(&aspects);
        let aspects_model = train_classifier(
            &ax,
            &ay,
            kind,
            &clf_config,
            stage_seed(config.seed, &format!("model-aspects-{fold_index}")),
        )
        .map_err(err_in(STAGE))?;
        let (ex, ey) = train_rows(&entities);
        let entities_model = train_classifier(
            &ex,
            &ey,
            kind,
            &clf_config,
            stage_seed(config.seed, &format!("model-entities-{fold_index}")),
        )
        .map_err(err_in(STAGE))?;

        formats::write_model(&model_path(config, "aspects", fold_index), &aspects_model)?;
        formats::write_model(&model_path(config, "entities", fold_index), &entities_model)?;

        for &id in test {
            let pair = &world.dataset.pairs[id];
            let aspect_pred = aspects_model.predict(&aspects.rows[id].1).map_err(err_in(STAGE))?;
            let entity_pred = entities_model.predict(&entities.rows[id].1).map_err(err_in(STAGE))?;
            rows.push(PredictionRow {
                pair_id: id,
                entity1: world.store.node_name(pair.e1).to_string(),
                entity2: world.store.node_name(pair.e2).to_string(),
                label: pair.label,
                fold: fold_index,
                aspects_class: aspect_pred.class,
                aspects_likelihood: aspect_pred.likelihood,
                entities_class: entity_pred.class,
                entities_likelihood: entity_pred.likelihood,
                empty_aspects: aspect_rows
                    .get(id)
                    .map(|(_, classes)| classes.is_empty())
                    .unwrap_or(false),
            });
        }
    }
    rows.sort_by_key(|r| r.pair_id);
    formats::write_predictions(&config.output_dir.join("predictions.csv"), &rows)?;
    Ok(())
}

/// One explanation per pair, produced by the fold model that predicted it.
pub fn stage_explain(config: &RunConfig) -> Result<(), PipelineError> {
    const STAGE: &str = "explain";
    let world = load_world(config)?;
    let table = formats::read_embeddings(
        &config.output_dir.join("embeddings.tsv"),
        &config.output_dir.join("embeddings.meta"),
        &world.store,
    )?;
    let op = config.aggregate_op().map_err(err_in(STAGE))?;
    let predictions = formats::read_predictions(&config.output_dir.join("predictions.csv"))?;

    let mut models: BTreeMap<usize, ClassifierModel> = BTreeMap::new();
    let mut explanations = Vec::with_capacity(predictions.len());
    for row in &predictions {
        let model = match models.entry(row.fold) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(formats::read_model(&model_path(config, "aspects", row.fold))?)
            }
        };
        let pair = &world.dataset.pairs[row.pair_id];
        let explanation = explanation_report(
            (pair.e1, pair.e2),
            &table,
            model,
            &world.annotations,
            &world.graph,
            op,
        )
        .map_err(err_in(STAGE))?;
        explanations.push(ExplanationJson::from_explanation(&explanation, &world.store));
    }
    formats::write_explanations(&config.output_dir.join("explanations.json"), &explanations)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub per_fold: Vec<Metrics>,
    pub median_precision: f64,
    pub median_recall: f64,
    pub median_weighted_f1: f64,
}

fn representation_report(per_fold: Vec<Metrics>) -> RepresentationReport {
    let pick = |f: fn(&Metrics) -> f64| -> f64 {
        median(&per_fold.iter().map(f).collect::<Vec<_>>())
    };
    RepresentationReport {
        median_precision: pick(|m| m.precision),
        median_recall: pick(|m| m.recall),
        median_weighted_f1: pick(|m| m.weighted_f1),
        per_fold,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectivenessReport {
    /// One entry per fold; `null` where the fold's subset was empty.
    pub per_fold: Vec<Option<DeltaMetrics>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LengthStats {
    pub average: f64,
    pub std_dev: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub seed: u64,
    pub folds: usize,
    pub embedding_method: String,
    pub classifier: String,
    pub aggregation: String,
    /// The sufficient-scenario ablation keeps aspects whose solo prediction
    /// matches the ground-truth label.
    pub sufficient_effectiveness_key: String,
    pub aspects: RepresentationReport,
    pub baseline: RepresentationReport,
    /// Two-sided signed-rank p over per-fold weighted F1, aspects vs baseline.
    pub wilcoxon_p_weighted_f1: f64,
    pub without_necessary: EffectivenessReport,
    pub only_sufficient: EffectivenessReport,
    pub length_necessary: LengthStats,
    pub length_sufficient: LengthStats,
}

fn length_stats_from_json(explanations: &[ExplanationJson], necessary: bool) -> LengthStats {
    let lengths: Vec<f64> = explanations
        .iter()
        .map(|e| {
            e.aspects
                .iter()
                .filter(|a| if necessary { a.necessary } else { a.sufficient })
                .count() as f64
        })
        .collect();
    let n = lengths.len().max(1) as f64;
    let average = lengths.iter().sum::<f64>() / n;
    let variance = lengths.iter().map(|l| (l - average) * (l - average)).sum::<f64>() / n;
    LengthStats { average, std_dev: variance.sqrt() }
}

/// Fold-level metrics for both representations, the signed-rank comparison,
/// the two effectiveness ablations and the explanation length statistics.
pub fn stage_evaluate(config: &RunConfig) -> Result<(), PipelineError> {
    const STAGE: &str = "evaluate";
    let world = load_world(config)?;
    let table = formats::read_embeddings(
        &config.output_dir.join("embeddings.tsv"),
        &config.output_dir.join("embeddings.meta"),
        &world.store,
    )?;
    let op = config.aggregate_op().map_err(err_in(STAGE))?;
    let predictions = formats::read_predictions(&config.output_dir.join("predictions.csv"))?;
    let explanations = formats::read_explanations(&config.output_dir.join("explanations.json"))?;

    let fold_count = predictions.iter().map(|r| r.fold + 1).max().unwrap_or(0);
    let mut aspects_folds = Vec::with_capacity(fold_count);
    let mut entities_folds = Vec::with_capacity(fold_count);
    let mut without_necessary = Vec::with_capacity(fold_count);
    let mut only_sufficient = Vec::with_capacity(fold_count);

    for fold in 0..fold_count {
        let rows: Vec<&PredictionRow> = predictions.iter().filter(|r| r.fold == fold).collect();
        let labels: Vec<u8> = rows.iter().map(|r| r.label).collect();
        let aspect_preds: Vec<u8> = rows.iter().map(|r| r.aspects_class).collect();
        let entity_preds: Vec<u8> = rows.iter().map(|r| r.entities_class).collect();
        aspects_folds.push(compute_metrics(&aspect_preds, &labels).map_err(err_in(STAGE))?);
        entities_folds.push(compute_metrics(&entity_preds, &labels).map_err(err_in(STAGE))?);

        let test_pairs: Vec<LabeledPair> =
            rows.iter().map(|r| world.dataset.pairs[r.pair_id]).collect();
        let model = formats::read_model(&model_path(config, "aspects", fold))?;
        without_necessary.push(
            effectiveness_necessary(&test_pairs, &table, &model, &world.annotations, &world.graph, op)
                .map_err(err_in(STAGE))?,
        );
        only_sufficient.push(
            effectiveness_sufficient(&test_pairs, &table, &model, &world.annotations, &world.graph, op)
                .map_err(err_in(STAGE))?,
        );
    }

    let aspects_report = representation_report(aspects_folds);
    let entities_report = representation_report(entities_folds);
    let wilcoxon_p = wilcoxon_signed_rank(
        &aspects_report.per_fold.iter().map(|m| m.weighted_f1).collect::<Vec<_>>(),
        &entities_report.per_fold.iter().map(|m| m.weighted_f1).collect::<Vec<_>>(),
    )
    .map_err(err_in(STAGE))?;

    let report = MetricsReport {
        config_hash: config.hash(),
        seed: config.seed,
        folds: config.folds,
        embedding_method: config.embedding.method.clone(),
        classifier: config.classifier.kind.clone(),
        aggregation: config.aggregation.clone(),
        sufficient_effectiveness_key: "true-label".to_string(),
        aspects: aspects_report,
        baseline: entities_report,
        wilcoxon_p_weighted_f1: wilcoxon_p,
        without_necessary: EffectivenessReport { per_fold: without_necessary },
        only_sufficient: EffectivenessReport { per_fold: only_sufficient },
        length_necessary: length_stats_from_json(&explanations, true),
        length_sufficient: length_stats_from_json(&explanations, false),
    };
    formats::write_json(&config.output_dir.join("metrics.json"), &report)?;
    formats::write_string(&config.output_dir.join("metrics.csv"), &metrics_csv(&report))?;
    Ok(())
}

/// Flat CSV mirroring the performance / effectiveness / length tables.
fn metrics_csv(report: &MetricsReport) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("table,row,metric,value\n");
    for (name, rep) in [("aspects", &report.aspects), ("baseline", &report.baseline)] {
        writeln!(out, "performance,{name},precision_median,{}", rep.median_precision).unwrap();
        writeln!(out, "performance,{name},recall_median,{}", rep.median_recall).unwrap();
        writeln!(out, "performance,{name},weighted_f1_median,{}", rep.median_weighted_f1).unwrap();
    }
    writeln!(out, "performance,comparison,wilcoxon_p_weighted_f1,{}", report.wilcoxon_p_weighted_f1)
        .unwrap();
    for (name, eff) in [
        ("without_necessary", &report.without_necessary),
        ("only_sufficient", &report.only_sufficient),
    ] {
        let defined: Vec<&DeltaMetrics> = eff.per_fold.iter().flatten().collect();
        if defined.is_empty() {
            continue;
        }
        let med = |f: fn(&DeltaMetrics) -> f64| median(&defined.iter().map(|d| f(d)).collect::<Vec<_>>());
        writeln!(out, "effectiveness,{name},delta_precision_median,{}", med(|d| d.delta_precision)).unwrap();
        writeln!(out, "effectiveness,{name},delta_recall_median,{}", med(|d| d.delta_recall)).unwrap();
        writeln!(out, "effectiveness,{name},delta_f1_median,{}", med(|d| d.delta_weighted_f1)).unwrap();
    }
    for (name, stats) in [
        ("necessary", &report.length_necessary),
        ("sufficient", &report.length_sufficient),
    ] {
        writeln!(out, "length,{name},average,{}", stats.average).unwrap();
        writeln!(out, "length,{name},std_dev,{}", stats.std_dev).unwrap();
    }
    out
}

// ---------------------------------------------------------------------------
// Full run and manifest
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub crate_versions: BTreeMap<String, String>,
    pub complete: bool,
    pub failed_stage: Option<String>,
    pub artifacts: Vec<String>,
}

pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

const STAGE_ORDER: [(&str, fn(&RunConfig) -> Result<(), PipelineError>); 6] = [
    ("ingest", stage_ingest),
    ("embed", stage_embed),
    ("represent", stage_represent),
    ("train", stage_train),
    ("explain", stage_explain),
    ("evaluate", stage_evaluate),
];

fn manifest_skeleton(config: &RunConfig) -> Manifest {
    let version = env!("CARGO_PKG_VERSION").to_string();
    Manifest {
        format_version: 1,
        config_hash: config.hash(),
        seed: config.seed,
        crate_versions: BTreeMap::from([
            ("semrel-core".to_string(), version.clone()),
            ("semrel-cli".to_string(), version),
        ]),
        complete: false,
        failed_stage: None,
        artifacts: Vec::new(),
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), PipelineError> {
    formats::write_json(&dir.join("manifest.json"), manifest)?;
    Ok(())
}

/// Run every stage in order. On failure the manifest is left with
/// `complete = false` and the failing stage recorded.
pub fn run_experiment(config: &RunConfig) -> Result<RunArtifacts, PipelineError> {
    let mut manifest = manifest_skeleton(config);
    write_manifest(&config.output_dir, &manifest)?;

    for (name, stage) in STAGE_ORDER {
        if let Err(e) = stage(config) {
            manifest.failed_stage = Some(name.to_string());
            write_manifest(&config.output_dir, &manifest)?;
            return Err(e);
        }
    }

    manifest.complete = true;
    manifest.artifacts = vec![
        "store/nodes.tsv".into(),
        "store/relations.tsv".into(),
        "store/triples.tsv".into(),
        "store/annotations.tsv".into(),
        "store/pairs.tsv".into(),
        "embeddings.tsv".into(),
        "embeddings.meta".into(),
        "aspects.tsv".into(),
        "features_aspects.csv".into(),
        "features_entities.csv".into(),
        "predictions.csv".into(),
        "explanations.json".into(),
        "metrics.json".into(),
        "metrics.csv".into(),
    ];
    for fold in 0..config.folds {
        manifest.artifacts.push(format!("model_aspects_fold_{fold}.json"));
        manifest.artifacts.push(format!("model_entities_fold_{fold}.json"));
    }
    write_manifest(&config.output_dir, &manifest)?;
    Ok(RunArtifacts { output_dir: config.output_dir.clone(), manifest })
}
