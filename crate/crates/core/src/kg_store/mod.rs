//! Offline KG snapshot: an indexed triple store serving `instance_of` types,
//! forward one-hop neighbors and label lookups.
//!
//! A snapshot is immutable once built; every collection it hands out is
//! sorted by id so downstream rankings are deterministic.

mod ids;
mod ingest;

use std::collections::{BTreeMap, BTreeSet};

pub use ids::{EntityId, PropertyId, Triple};
pub use ingest::{ingest_snapshot, parse_labels, parse_triples, read_snapshot, IngestConfig, IngestStats};

use crate::linking::normalize_label;

/// Fallback language for [`KgSnapshot::lookup_label`].
pub const DEFAULT_LANGUAGE: &str = "en";

static NO_TYPES: BTreeSet<EntityId> = BTreeSet::new();

#[derive(Debug, Clone, PartialEq)]
pub struct KgSnapshot {
    instance_of: PropertyId,
    edges: BTreeMap<EntityId, Vec<(PropertyId, EntityId)>>,
    types: BTreeMap<EntityId, BTreeSet<EntityId>>,
    labels: BTreeMap<(EntityId, String), String>,
    aliases: BTreeMap<EntityId, Vec<String>>,
    label_index: BTreeMap<String, BTreeSet<EntityId>>,
    property_labels: BTreeMap<PropertyId, String>,
    known: BTreeSet<EntityId>,
    triple_count: usize,
}

impl KgSnapshot {
    pub fn builder(instance_of: PropertyId) -> SnapshotBuilder {
        SnapshotBuilder::new(instance_of)
    }

    /// The property treated as `instance_of` (P31 by default).
    pub fn instance_of(&self) -> &PropertyId {
        &self.instance_of
    }

    /// Types of `entity`; empty for unknown or untyped entities.
    pub fn get_types(&self, entity: &EntityId) -> &BTreeSet<EntityId> {
        self.types.get(entity).unwrap_or(&NO_TYPES)
    }

    /// All outgoing edges of `entity` (including `instance_of` edges and
    /// self-loops), sorted by (property, object).
    pub fn get_forward_neighbors(&self, entity: &EntityId) -> &[(PropertyId, EntityId)] {
        self.edges.get(entity).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Primary label in `language`, falling back to English. Aliases are
    /// never returned.
    pub fn lookup_label(&self, entity: &EntityId, language: &str) -> Option<&str> {
        let key = (entity.clone(), language.to_owned());
        self.labels
            .get(&key)
            .or_else(|| {
                if language == DEFAULT_LANGUAGE {
                    None
                } else {
                    self.labels.get(&(entity.clone(), DEFAULT_LANGUAGE.to_owned()))
                }
            })
            .map(String::as_str)
    }

    pub fn aliases(&self, entity: &EntityId) -> &[String] {
        self.aliases.get(entity).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Entities whose label (any language) or alias normalizes to the same
    /// key as `surface`.
    pub fn resolve_label(&self, surface: &str) -> &BTreeSet<EntityId> {
        self.label_index.get(&normalize_label(surface)).unwrap_or(&NO_TYPES)
    }

    pub fn property_label(&self, property: &PropertyId) -> Option<&str> {
        self.property_labels.get(property).map(String::as_str)
    }

    /// Whether `entity` occurs anywhere in the snapshot (as subject, object,
    /// or labelled entity).
    pub fn contains(&self, entity: &EntityId) -> bool {
        self.known.contains(entity)
    }

    pub fn entity_count(&self) -> usize {
        self.known.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triple_count
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.edges.iter().flat_map(|(s, out)| {
            out.iter()
                .map(move |(p, o)| Triple::new(s.clone(), p.clone(), o.clone()))
        })
    }

    pub fn labels(&self) -> impl Iterator<Item = (&EntityId, &str, &str)> {
        self.labels
            .iter()
            .map(|((e, lang), text)| (e, lang.as_str(), text.as_str()))
    }

    pub fn all_aliases(&self) -> impl Iterator<Item = (&EntityId, &str)> {
        self.aliases
            .iter()
            .flat_map(|(e, list)| list.iter().map(move |a| (e, a.as_str())))
    }

    pub fn property_labels(&self) -> impl Iterator<Item = (&PropertyId, &str)> {
        self.property_labels.iter().map(|(p, l)| (p, l.as_str()))
    }
}

/// Accumulates triples and labels, then builds the indices in one pass.
#[derive(Debug)]
pub struct SnapshotBuilder {
    instance_of: PropertyId,
    triples: BTreeSet<Triple>,
    labels: BTreeMap<(EntityId, String), String>,
    aliases: BTreeMap<EntityId, BTreeSet<String>>,
    property_labels: BTreeMap<PropertyId, String>,
    duplicate_triples: usize,
}

impl SnapshotBuilder {
    pub fn new(instance_of: PropertyId) -> Self {
        Self {
            instance_of,
            triples: BTreeSet::new(),
            labels: BTreeMap::new(),
            aliases: BTreeMap::new(),
            property_labels: BTreeMap::new(),
            duplicate_triples: 0,
        }
    }

    /// Returns `false` when the triple was already present.
    pub fn add_triple(&mut self, triple: Triple) -> bool {
        let fresh = self.triples.insert(triple);
        if !fresh {
            self.duplicate_triples += 1;
        }
        fresh
    }

    /// First label for an (entity, language) pair wins.
    pub fn add_label(&mut self, entity: EntityId, language: impl Into<String>, text: impl Into<String>) {
        self.labels
            .entry((entity, language.into()))
            .or_insert_with(|| text.into());
    }

    pub fn add_alias(&mut self, entity: EntityId, text: impl Into<String>) {
        self.aliases.entry(entity).or_default().insert(text.into());
    }

    /// First label for a property wins.
    pub fn add_property_label(&mut self, property: PropertyId, text: impl Into<String>) {
        self.property_labels.entry(property).or_insert_with(|| text.into());
    }

    pub fn duplicate_triples(&self) -> usize {
        self.duplicate_triples
    }

    pub fn build(self) -> KgSnapshot {
        let mut edges: BTreeMap<EntityId, Vec<(PropertyId, EntityId)>> = BTreeMap::new();
        let mut types: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
        let mut known = BTreeSet::new();
        let triple_count = self.triples.len();

        // BTreeSet<Triple> iterates in (subject, property, object) order, so
        // every adjacency list comes out sorted.
        for triple in self.triples {
            if triple.property == self.instance_of {
                types
                    .entry(triple.subject.clone())
                    .or_default()
                    .insert(triple.object.clone());
            }
            known.insert(triple.subject.clone());
            known.insert(triple.object.clone());
            edges
                .entry(triple.subject)
                .or_default()
                .push((triple.property, triple.object));
        }

        let mut label_index: BTreeMap<String, BTreeSet<EntityId>> = BTreeMap::new();
        let mut index = |entity: &EntityId, text: &str| {
            let key = normalize_label(text);
            if !key.is_empty() {
                label_index.entry(key).or_default().insert(entity.clone());
            }
        };
        for ((entity, _), text) in &self.labels {
            index(entity, text);
            known.insert(entity.clone());
        }
        for (entity, list) in &self.aliases {
            for alias in list {
                index(entity, alias);
            }
            known.insert(entity.clone());
        }

        KgSnapshot {
            instance_of: self.instance_of,
            edges,
            types,
            labels: self.labels,
            aliases: self
                .aliases
                .into_iter()
                .map(|(e, set)| (e, set.into_iter().collect()))
                .collect(),
            label_index,
            property_labels: self.property_labels,
            known,
            triple_count,
        }
    }
}
