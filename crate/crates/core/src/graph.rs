//! Triple ingestion, the ontology DAG with its ancestor closure, and entity
//! annotations.
//!
//! Node and relation identifiers are strings interned to dense integer ids in
//! first-seen order; the string table stays with the store so ids can be
//! resolved back. Only the designated subclass relation contributes to the
//! class hierarchy; all other triples stay in the store (they matter for graph
//! walks, not for subsumption).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;

/// Dense identifier of an interned node (entity or ontology class).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

/// Dense identifier of an interned relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: NodeId,
    pub relation: RelId,
    pub tail: NodeId,
}

/// Input serialization of a triple file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripleFormat {
    /// `head\trelation\ttail`, one triple per line, no header.
    Tsv,
    /// N-Triples restricted to IRI terms: `<h> <r> <t> .` per line.
    NTriplesSubset,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: expected 3 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: empty field")]
    EmptyField { line: usize },
    #[error("line {line}: malformed N-Triples statement")]
    Malformed { line: usize },
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("relation id {0} not present in the store")]
    UnknownRelation(u32),
    #[error("subclass cycle involving class `{0}`")]
    Cycle(String),
    #[error("class node {} not part of the ontology", (.0).0)]
    NotAClass(NodeId),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AnnotationError {
    #[error("line {line}: expected `entity\\tclass`")]
    Malformed { line: usize },
    #[error("line {line}: class `{class}` is not in the ontology")]
    UnknownClass { line: usize, class: String },
}

/// Interned nodes, relations and deduplicated triples.
#[derive(Clone, Debug, Default)]
pub struct TripleStore {
    node_names: Vec<String>,
    node_index: BTreeMap<String, NodeId>,
    relation_names: Vec<String>,
    relation_index: BTreeMap<String, RelId>,
    triples: Vec<Triple>,
    seen: BTreeSet<(u32, u32, u32)>,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse a triple file. Blank lines are skipped; in the N-Triples format,
    /// lines starting with `#` are comments. An empty input yields an empty
    /// store.
    pub fn parse(source: &str, format: TripleFormat) -> Result<Self, ParseError> {
        let mut store = TripleStore::new();
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let text = raw.trim_end_matches('\r');
            if text.trim().is_empty() {
                continue;
            }
            match format {
                TripleFormat::Tsv => {
                    let fields: Vec<&str> = text.split('\t').collect();
                    if fields.len() != 3 {
                        return Err(ParseError::FieldCount {
                            line,
                            found: fields.len(),
                        });
                    }
                    if fields.iter().any(|f| f.is_empty()) {
                        return Err(ParseError::EmptyField { line });
                    }
                    store.add_triple_names(fields[0], fields[1], fields[2]);
                }
                TripleFormat::NTriplesSubset => {
                    if text.trim_start().starts_with('#') {
                        continue;
                    }
                    let (h, r, t) =
                        parse_ntriples_line(text).ok_or(ParseError::Malformed { line })?;
                    store.add_triple_names(h, r, t);
                }
            }
        }
        Ok(store)
    }

    pub fn intern_node(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.node_index.get(name) {
            return id;
        }
        let id = NodeId(self.node_names.len() as u32);
        self.node_names.push(name.to_string());
        self.node_index.insert(name.to_string(), id);
        id
    }

    pub fn intern_relation(&mut self, name: &str) -> RelId {
        if let Some(&id) = self.relation_index.get(name) {
            return id;
        }
        let id = RelId(self.relation_names.len() as u32);
        self.relation_names.push(name.to_string());
        self.relation_index.insert(name.to_string(), id);
        id
    }

    /// Intern all three terms and add the triple unless already present.
    pub fn add_triple_names(&mut self, head: &str, relation: &str, tail: &str) -> Triple {
        let triple = Triple {
            head: self.intern_node(head),
            relation: self.intern_relation(relation),
            tail: self.intern_node(tail),
        };
        self.add_triple(triple);
        triple
    }

    pub fn add_triple(&mut self, t: Triple) {
        if self.seen.insert((t.head.0, t.relation.0, t.tail.0)) {
            self.triples.push(t);
        }
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.node_index.get(name).copied()
    }

    pub fn relation(&self, name: &str) -> Option<RelId> {
        self.relation_index.get(name).copied()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.node_names[id.0 as usize]
    }

    pub fn relation_name(&self, id: RelId) -> &str {
        &self.relation_names[id.0 as usize]
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_names.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_names.len() as u32).map(NodeId)
    }

    /// Materialize annotation assertions as triples so embedding training
    /// sees entities connected to the classes describing them.
    pub fn add_annotation_edges(&mut self, map: &AnnotationMap, relation: &str) -> RelId {
        let rel = self.intern_relation(relation);
        for (&entity, classes) in map.iter() {
            for &class in classes {
                self.add_triple(Triple {
                    head: entity,
                    relation: rel,
                    tail: class,
                });
            }
        }
        rel
    }
}

fn parse_ntriples_line(text: &str) -> Option<(&str, &str, &str)> {
    let mut rest = text.trim();
    let mut terms = [""; 3];
    for slot in terms.iter_mut() {
        rest = rest.strip_prefix('<')?;
        let end = rest.find('>')?;
        *slot = &rest[..end];
        if slot.is_empty() {
            return None;
        }
        rest = rest[end + 1..].trim_start();
    }
    let rest = rest.strip_prefix('.')?;
    rest.trim().is_empty().then_some((terms[0], terms[1], terms[2]))
}

/// The subsumption DAG over ontology classes with a precomputed
/// reflexive-transitive ancestor closure per class.
#[derive(Clone, Debug)]
pub struct OntologyGraph {
    /// Local class index -> global node id, in first-seen order.
    classes: Vec<NodeId>,
    class_index: BTreeMap<NodeId, u32>,
    /// Child -> parents, local indices.
    parents: Vec<Vec<u32>>,
    /// Reflexive-transitive ancestors per class, local indices.
    closure: Vec<BitSet>,
    /// Classes subsumed by each class (reflexive), used as the specificity
    /// measure: fewer descendants = more specific.
    descendant_counts: Vec<u32>,
    roots: Vec<NodeId>,
    subclass_relation: RelId,
}

/// Build the class hierarchy from every triple carrying `subclass_relation`.
/// A triple `(a, subclass, b)` reads "a is subsumed by b". Multiple roots are
/// permitted; a cycle among subclass edges is an error.
pub fn build_ontology(store: &TripleStore, subclass_relation: RelId) -> Result<OntologyGraph, GraphError> {
    if subclass_relation.0 as usize >= store.relation_count() {
        return Err(GraphError::UnknownRelation(subclass_relation.0));
    }

    let mut classes: Vec<NodeId> = Vec::new();
    let mut class_index: BTreeMap<NodeId, u32> = BTreeMap::new();
    let intern = |node: NodeId, classes: &mut Vec<NodeId>, index: &mut BTreeMap<NodeId, u32>| {
        *index.entry(node).or_insert_with(|| {
            classes.push(node);
            classes.len() as u32 - 1
        })
    };

    let mut edges: Vec<(u32, u32)> = Vec::new();
    for t in store.triples() {
        if t.relation == subclass_relation {
            let child = intern(t.head, &mut classes, &mut class_index);
            let parent = intern(t.tail, &mut classes, &mut class_index);
            edges.push((child, parent));
        }
    }

    let n = classes.len();
    let mut parents: Vec<Vec<u32>> = alloc::vec![Vec::new(); n];
    let mut children: Vec<Vec<u32>> = alloc::vec![Vec::new(); n];
    for &(child, parent) in &edges {
        if !parents[child as usize].contains(&parent) {
            parents[child as usize].push(parent);
            children[parent as usize].push(child);
        }
    }

    // Kahn's algorithm from the roots down: a class is ready once every
    // parent's closure is complete.
    let mut pending: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: Vec<u32> = (0..n as u32).filter(|&c| pending[c as usize] == 0).collect();
    let mut closure: Vec<BitSet> = alloc::vec![BitSet::new(n); n];
    let mut processed = 0usize;
    let mut head = 0usize;
    while head < queue.len() {
        let c = queue[head] as usize;
        head += 1;
        processed += 1;
        let mut bits = BitSet::new(n);
        bits.insert(c);
        for &p in &parents[c] {
            bits.union_with(&closure[p as usize]);
        }
        closure[c] = bits;
        for &child in &children[c] {
            pending[child as usize] -= 1;
            if pending[child as usize] == 0 {
                queue.push(child);
            }
        }
    }
    if processed < n {
        let culprit = (0..n).find(|&c| pending[c] > 0).expect("unprocessed class");
        return Err(GraphError::Cycle(store.node_name(classes[culprit]).to_string()));
    }

    let mut descendant_counts = alloc::vec![0u32; n];
    for bits in &closure {
        for ancestor in bits.iter() {
            descendant_counts[ancestor] += 1;
        }
    }

    let roots = (0..n)
        .filter(|&c| parents[c].is_empty())
        .map(|c| classes[c])
        .collect();

    Ok(OntologyGraph {
        classes,
        class_index,
        parents,
        closure,
        descendant_counts,
        roots,
        subclass_relation,
    })
}

impl OntologyGraph {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[NodeId] {
        &self.classes
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn subclass_relation(&self) -> RelId {
        self.subclass_relation
    }

    pub fn contains(&self, class: NodeId) -> bool {
        self.class_index.contains_key(&class)
    }

    pub(crate) fn local(&self, class: NodeId) -> Result<u32, GraphError> {
        self.class_index.get(&class).copied().ok_or(GraphError::NotAClass(class))
    }

    pub(crate) fn global(&self, local: usize) -> NodeId {
        self.classes[local]
    }

    pub(crate) fn closure_bits(&self, local: usize) -> &BitSet {
        &self.closure[local]
    }

    /// Direct parents of a class (one subclass edge up).
    pub fn parents(&self, class: NodeId) -> Result<Vec<NodeId>, GraphError> {
        let local = self.local(class)?;
        Ok(self.parents[local as usize].iter().map(|&p| self.classes[p as usize]).collect())
    }

    /// Reflexive-transitive ancestors of `class`, ascending by node id.
    /// Always contains `class` itself.
    pub fn ancestors(&self, class: NodeId) -> Result<Vec<NodeId>, GraphError> {
        let local = self.local(class)?;
        let mut out: Vec<NodeId> = self.closure[local as usize]
            .iter()
            .map(|c| self.classes[c])
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Reflexive subsumption test: `a` ⊑ `b`.
    pub fn is_subclass_of(&self, a: NodeId, b: NodeId) -> Result<bool, GraphError> {
        let la = self.local(a)?;
        let lb = self.local(b)?;
        Ok(self.closure[la as usize].contains(lb as usize))
    }

    /// Number of classes subsumed by `class`, itself included.
    pub fn descendant_count(&self, class: NodeId) -> Result<u32, GraphError> {
        let local = self.local(class)?;
        Ok(self.descendant_counts[local as usize])
    }
}

/// Entity -> set of ontology classes describing it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotationMap {
    entries: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl AnnotationMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entity: NodeId, class: NodeId) {
        self.entries.entry(entity).or_default().insert(class);
    }

    pub fn classes_of(&self, entity: NodeId) -> Option<&BTreeSet<NodeId>> {
        self.entries.get(&entity)
    }

    pub fn contains(&self, entity: NodeId) -> bool {
        self.entries.contains_key(&entity)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &BTreeSet<NodeId>)> {
        self.entries.iter()
    }
}

/// Load `entity\tclass` lines, interning entities into the store and
/// validating every class against the ontology. Duplicate lines collapse to
/// set semantics; an entity cannot end up with zero classes by construction.
pub fn load_annotations(
    source: &str,
    store: &mut TripleStore,
    graph: &OntologyGraph,
) -> Result<AnnotationMap, AnnotationError> {
    let mut map = AnnotationMap::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim_end_matches('\r');
        if text.trim().is_empty() {
            continue;
        }
        let mut fields = text.split('\t');
        let (entity, class) = match (fields.next(), fields.next(), fields.next()) {
            (Some(e), Some(c), None) if !e.is_empty() && !c.is_empty() => (e, c),
            _ => return Err(AnnotationError::Malformed { line }),
        };
        let class_id = store
            .node(class)
            .filter(|&id| graph.contains(id))
            .ok_or_else(|| AnnotationError::UnknownClass {
                line,
                class: class.to_string(),
            })?;
        let entity_id = store.intern_node(entity);
        map.insert(entity_id, class_id);
    }
    Ok(map)
}
