//! Reading and writing of every run artifact. Floats are written with Rust's
//! shortest round-trip formatting, so reading a file back reproduces the
//! exact values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use semrel_core::classify::ClassifierModel;
use semrel_core::embed::{EmbeddingMethod, EmbeddingTable};
use semrel_core::eval::{LabeledPair, PairDataset};
use semrel_core::explain::ExplanationJson;
use semrel_core::graph::{AnnotationMap, NodeId, RelId, Triple, TripleStore};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("node `{0}` has no embedding")]
    UnknownNode(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

pub fn read_to_string(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_string(path: &Path, contents: &str) -> Result<(), FormatError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_string(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Interned store snapshot: nodes.tsv / relations.tsv / triples.tsv
// ---------------------------------------------------------------------------

pub fn write_store(dir: &Path, store: &TripleStore) -> Result<(), FormatError> {
    let mut nodes = String::new();
    for id in store.node_ids() {
        writeln!(nodes, "{}\t{}", id.0, store.node_name(id)).unwrap();
    }
    write_string(&dir.join("nodes.tsv"), &nodes)?;

    let mut relations = String::new();
    for r in 0..store.relation_count() {
        writeln!(relations, "{r}\t{}", store.relation_name(RelId(r as u32))).unwrap();
    }
    write_string(&dir.join("relations.tsv"), &relations)?;

    let mut triples = String::new();
    for t in store.triples() {
        writeln!(triples, "{}\t{}\t{}", t.head.0, t.relation.0, t.tail.0).unwrap();
    }
    write_string(&dir.join("triples.tsv"), &triples)
}

pub fn read_store(dir: &Path) -> Result<TripleStore, FormatError> {
    let mut store = TripleStore::new();
    let nodes_path = dir.join("nodes.tsv");
    for (idx, line) in read_to_string(&nodes_path)?.lines().enumerate() {
        let name = line.split('\t').nth(1).ok_or_else(|| FormatError::Malformed {
            path: nodes_path.clone(),
            line: idx + 1,
            message: "expected `id\\tname`".into(),
        })?;
        store.intern_node(name);
    }
    let rel_path = dir.join("relations.tsv");
    for (idx, line) in read_to_string(&rel_path)?.lines().enumerate() {
        let name = line.split('\t').nth(1).ok_or_else(|| FormatError::Malformed {
            path: rel_path.clone(),
            line: idx + 1,
            message: "expected `id\\tname`".into(),
        })?;
        store.intern_relation(name);
    }
    let triples_path = dir.join("triples.tsv");
    for (idx, line) in read_to_string(&triples_path)?.lines().enumerate() {
        let mut fields = line.split('\t').map(|f| f.parse::<u32>());
        match (fields.next(), fields.next(), fields.next()) {
            (Some(Ok(h)), Some(Ok(r)), Some(Ok(t))) => store.add_triple(Triple {
                head: NodeId(h),
                relation: RelId(r),
                tail: NodeId(t),
            }),
            _ => {
                return Err(FormatError::Malformed {
                    path: triples_path.clone(),
                    line: idx + 1,
                    message: "expected three integer ids".into(),
                })
            }
        }
    }
    Ok(store)
}

pub fn write_annotation_ids(path: &Path, map: &AnnotationMap) -> Result<(), FormatError> {
    let mut text = String::new();
    for (entity, classes) in map.iter() {
        for class in classes {
            writeln!(text, "{}\t{}", entity.0, class.0).unwrap();
        }
    }
    write_string(path, &text)
}

pub fn read_annotation_ids(path: &Path) -> Result<AnnotationMap, FormatError> {
    let mut map = AnnotationMap::new();
    for (idx, line) in read_to_string(path)?.lines().enumerate() {
        let mut fields = line.split('\t').map(|f| f.parse::<u32>());
        match (fields.next(), fields.next()) {
            (Some(Ok(e)), Some(Ok(c))) => map.insert(NodeId(e), NodeId(c)),
            _ => {
                return Err(FormatError::Malformed {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: "expected two integer ids".into(),
                })
            }
        }
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// Labelled pairs: pair_id \t e1 \t e2 \t label
// ---------------------------------------------------------------------------

pub fn write_pairs(path: &Path, dataset: &PairDataset) -> Result<(), FormatError> {
    let mut text = String::new();
    for (i, p) in dataset.pairs.iter().enumerate() {
        writeln!(text, "{i}\t{}\t{}\t{}", p.e1.0, p.e2.0, p.label).unwrap();
    }
    write_string(path, &text)
}

pub fn read_pairs(path: &Path, provenance: &str) -> Result<PairDataset, FormatError> {
    let mut pairs = Vec::new();
    for (idx, line) in read_to_string(path)?.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let parsed = (|| -> Option<LabeledPair> {
            Some(LabeledPair {
                e1: NodeId(fields.get(1)?.parse().ok()?),
                e2: NodeId(fields.get(2)?.parse().ok()?),
                label: fields.get(3)?.parse().ok()?,
            })
        })();
        match parsed {
            Some(p) => pairs.push(p),
            None => {
                return Err(FormatError::Malformed {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: "expected `pair_id\\te1\\te2\\tlabel`".into(),
                })
            }
        }
    }
    Ok(PairDataset { pairs, provenance: provenance.to_string() })
}

/// Input pair list: `entity\tentity` names, one pair per line.
pub fn read_pair_names(path: &Path) -> Result<Vec<(String, String)>, FormatError> {
    let mut out = Vec::new();
    for (idx, raw) in read_to_string(path)?.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(FormatError::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "expected `entity\\tentity`".into(),
            });
        }
        out.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Embedding persistence: node \t v1 v2 ... vd, plus a small meta header
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub method: String,
    pub dimension: usize,
    pub seed: u64,
}

pub fn write_embeddings(
    tsv_path: &Path,
    meta_path: &Path,
    table: &EmbeddingTable,
    store: &TripleStore,
) -> Result<(), FormatError> {
    let mut text = String::new();
    for id in store.node_ids() {
        let vector = table.node_vector(id).expect("table covers the store");
        write!(text, "{}\t", store.node_name(id)).unwrap();
        for (k, v) in vector.iter().enumerate() {
            if k > 0 {
                text.push(' ');
            }
            write!(text, "{v}").unwrap();
        }
        text.push('\n');
    }
    write_string(tsv_path, &text)?;
    write_json(
        meta_path,
        &EmbeddingMeta {
            method: table.method().as_str().to_string(),
            dimension: table.dimension(),
            seed: table.seed(),
        },
    )
}

/// Rebuild a node-vector table against the store's id assignment. Relation
/// parameters are not persisted; the loaded table serves representation and
/// explanation, not triple scoring.
pub fn read_embeddings(
    tsv_path: &Path,
    meta_path: &Path,
    store: &TripleStore,
) -> Result<EmbeddingTable, FormatError> {
    let meta: EmbeddingMeta = read_json(meta_path)?;
    let method = EmbeddingMethod::parse(&meta.method).ok_or_else(|| FormatError::Malformed {
        path: meta_path.to_path_buf(),
        line: 1,
        message: format!("unknown method `{}`", meta.method),
    })?;

    let mut by_name: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (idx, line) in read_to_string(tsv_path)?.lines().enumerate() {
        let malformed = |message: &str| FormatError::Malformed {
            path: tsv_path.to_path_buf(),
            line: idx + 1,
            message: message.into(),
        };
        let (name, rest) = line.split_once('\t').ok_or_else(|| malformed("expected `node\\tvalues`"))?;
        let vector: Vec<f64> = rest
            .split(' ')
            .map(|v| v.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| malformed("bad float"))?;
        if vector.len() != meta.dimension {
            return Err(malformed("wrong vector length"));
        }
        by_name.insert(name.to_string(), vector);
    }

    let mut node_vectors = Vec::with_capacity(store.node_count() * meta.dimension);
    for id in store.node_ids() {
        let name = store.node_name(id);
        let vector = by_name
            .get(name)
            .ok_or_else(|| FormatError::UnknownNode(name.to_string()))?;
        node_vectors.extend_from_slice(vector);
    }
    Ok(EmbeddingTable::from_parts(
        method,
        meta.dimension,
        node_vectors,
        Vec::new(),
        None,
        meta.seed,
    ))
}

// ---------------------------------------------------------------------------
// Feature matrix: pair_id, f0..f{d-1}, label
// ---------------------------------------------------------------------------

pub fn write_features(path: &Path, rows: &[(usize, &[f64], u8)]) -> Result<(), FormatError> {
    let dimension = rows.first().map_or(0, |(_, v, _)| v.len());
    let mut text = String::from("pair_id");
    for k in 0..dimension {
        write!(text, ",f{k}").unwrap();
    }
    text.push_str(",label\n");
    for (id, vector, label) in rows {
        write!(text, "{id}").unwrap();
        for v in vector.iter() {
            write!(text, ",{v}").unwrap();
        }
        writeln!(text, ",{label}").unwrap();
    }
    write_string(path, &text)
}

pub struct FeatureRows {
    pub rows: Vec<(usize, Vec<f64>, u8)>,
    pub dimension: usize,
}

pub fn read_features(path: &Path) -> Result<FeatureRows, FormatError> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| FormatError::Malformed {
        path: path.to_path_buf(),
        line: 1,
        message: "missing header".into(),
    })?;
    let dimension = header.split(',').count().saturating_sub(2);
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let malformed = |message: &str| FormatError::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            message: message.into(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dimension + 2 {
            return Err(malformed("wrong column count"));
        }
        let id: usize = fields[0].parse().map_err(|_| malformed("bad pair id"))?;
        let vector: Vec<f64> = fields[1..=dimension]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| malformed("bad float"))?;
        let label: u8 = fields[dimension + 1].parse().map_err(|_| malformed("bad label"))?;
        rows.push((id, vector, label));
    }
    Ok(FeatureRows { rows, dimension })
}

// ---------------------------------------------------------------------------
// Predictions: one row per pair with both representations' outputs
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub pair_id: usize,
    pub entity1: String,
    pub entity2: String,
    pub label: u8,
    pub fold: usize,
    pub aspects_class: u8,
    pub aspects_likelihood: f64,
    pub entities_class: u8,
    pub entities_likelihood: f64,
    pub empty_aspects: bool,
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<(), FormatError> {
    let mut text = String::from(
        "pair_id,entity1,entity2,label,fold,aspects_class,aspects_likelihood,entities_class,entities_likelihood,empty_aspects\n",
    );
    for r in rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{}",
            r.pair_id,
            r.entity1,
            r.entity2,
            r.label,
            r.fold,
            r.aspects_class,
            r.aspects_likelihood,
            r.entities_class,
            r.entities_likelihood,
            r.empty_aspects
        )
        .unwrap();
    }
    write_string(path, &text)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, FormatError> {
    let text = read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let malformed = |message: &str| FormatError::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            message: message.into(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(malformed("wrong column count"));
        }
        rows.push(PredictionRow {
            pair_id: f[0].parse().map_err(|_| malformed("bad pair id"))?,
            entity1: f[1].to_string(),
            entity2: f[2].to_string(),
            label: f[3].parse().map_err(|_| malformed("bad label"))?,
            fold: f[4].parse().map_err(|_| malformed("bad fold"))?,
            aspects_class: f[5].parse().map_err(|_| malformed("bad class"))?,
            aspects_likelihood: f[6].parse().map_err(|_| malformed("bad likelihood"))?,
            entities_class: f[7].parse().map_err(|_| malformed("bad class"))?,
            entities_likelihood: f[8].parse().map_err(|_| malformed("bad likelihood"))?,
            empty_aspects: f[9].parse().map_err(|_| malformed("bad flag"))?,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Classifier model container
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: ClassifierModel,
}

pub fn write_model(path: &Path, model: &ClassifierModel) -> Result<(), FormatError> {
    write_json(path, &ModelFile { format_version: 1, model: model.clone() })
}

pub fn read_model(path: &Path) -> Result<ClassifierModel, FormatError> {
    let file: ModelFile = read_json(path)?;
    Ok(file.model)
}

// ---------------------------------------------------------------------------
// Aspects batch export: pair_id \t aspect class names...
// ---------------------------------------------------------------------------

pub fn write_aspects(
    path: &Path,
    rows: &[(usize, Vec<String>)],
) -> Result<(), FormatError> {
    let mut text = String::new();
    for (id, classes) in rows {
        write!(text, "{id}").unwrap();
        for c in classes {
            write!(text, "\t{c}").unwrap();
        }
        text.push('\n');
    }
    write_string(path, &text)
}

pub fn read_aspect_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>, FormatError> {
    let mut rows = Vec::new();
    for (idx, line) in read_to_string(path)?.lines().enumerate() {
        let mut fields = line.split('\t');
        let id: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| FormatError::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "expected a pair id".into(),
            })?;
        rows.push((id, fields.map(str::to_string).collect()));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Explanations
// ---------------------------------------------------------------------------

pub fn write_explanations(path: &Path, explanations: &[ExplanationJson]) -> Result<(), FormatError> {
    write_json(path, &explanations)
}

pub fn read_explanations(path: &Path) -> Result<Vec<ExplanationJson>, FormatError> {
    read_json(path)
}
