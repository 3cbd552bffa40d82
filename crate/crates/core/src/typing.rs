//! Expected answer type inference from the model's own candidates.
//!
//! Types (`instance_of` objects) of the linked candidates are ranked by how
//! many distinct candidates carry them. The top-k types form the core of the
//! answer type set; any other observed type whose label embedding is close
//! enough to one of the top-k labels joins it.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::kg_store::{EntityId, KgSnapshot, DEFAULT_LANGUAGE};
use crate::linking::LinkedCandidate;

pub const DEFAULT_TOP_K: usize = 3;
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeFrequency {
    #[serde(rename = "type")]
    pub type_id: EntityId,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypingConfig {
    pub top_k: usize,
    /// A non-top type joins when its similarity to some top type is
    /// strictly greater than this.
    pub similarity_threshold: f64,
    /// Language used to look up type labels.
    pub language: String,
}

impl Default for TypingConfig {
    fn default() -> Self {
        Self {
            top_k: DEFAULT_TOP_K,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            language: DEFAULT_LANGUAGE.to_owned(),
        }
    }
}

impl TypingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::Config("top-k must be at least 1".into()));
        }
        if self.similarity_threshold.is_nan() {
            return Err(Error::Config("similarity threshold is NaN".into()));
        }
        Ok(())
    }
}

/// The expected answer types T for one question.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnswerTypeSet {
    pub question_id: String,
    pub types: BTreeSet<EntityId>,
    pub top_k: usize,
    pub threshold: f64,
}

impl AnswerTypeSet {
    pub fn empty(question_id: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            types: BTreeSet::new(),
            top_k: DEFAULT_TOP_K,
            threshold: DEFAULT_SIMILARITY_THRESHOLD,
        }
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

/// Counts, per type, the distinct model-originated candidates carrying it.
/// Neighbor-only candidates (no t2t index) are ignored. Sorted by count
/// descending, then type id ascending.
pub fn count_type_frequencies(snapshot: &KgSnapshot, lm_candidates: &[LinkedCandidate]) -> Vec<TypeFrequency> {
    let entities: BTreeSet<&EntityId> = lm_candidates
        .iter()
        .filter(|c| c.t2t_index.is_some())
        .map(|c| &c.entity)
        .collect();
    let mut counts: BTreeMap<&EntityId, usize> = BTreeMap::new();
    for entity in entities {
        for t in snapshot.get_types(entity) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut freqs: Vec<TypeFrequency> = counts
        .into_iter()
        .map(|(t, count)| TypeFrequency {
            type_id: t.clone(),
            count,
        })
        .collect();
    freqs.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.type_id.cmp(&b.type_id)));
    freqs
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeSelection {
    pub types: AnswerTypeSet,
    /// Similarity lookups where both types had labels but an embedding was
    /// missing.
    pub embedding_misses: usize,
}

/// Builds T from frequencies sorted as by [`count_type_frequencies`].
pub fn select_answer_types(
    question_id: &str,
    freqs: &[TypeFrequency],
    table: &EmbeddingTable,
    snapshot: &KgSnapshot,
    config: &TypingConfig,
) -> TypeSelection {
    let split = config.top_k.min(freqs.len());
    let (top, rest) = freqs.split_at(split);
    let mut types: BTreeSet<EntityId> = top.iter().map(|f| f.type_id.clone()).collect();
    let mut misses = 0;

    let top_labels: Vec<&str> = top
        .iter()
        .filter_map(|f| snapshot.lookup_label(&f.type_id, &config.language))
        .collect();
    for candidate in rest {
        let Some(label) = snapshot.lookup_label(&candidate.type_id, &config.language) else {
            continue;
        };
        let similar = top_labels
            .iter()
            .any(|top_label| match table.similarity(label, top_label) {
                Some(sim) => sim > config.similarity_threshold,
                None => {
                    misses += 1;
                    false
                }
            });
        if similar {
            types.insert(candidate.type_id.clone());
        }
    }

    TypeSelection {
        types: AnswerTypeSet {
            question_id: question_id.to_owned(),
            types,
            top_k: config.top_k,
            threshold: config.similarity_threshold,
        },
        embedding_misses: misses,
    }
}
