//! Label normalization, candidate-to-entity linking and neighbor expansion.

use std::collections::{BTreeSet, HashMap};

use unicode_normalization::UnicodeNormalization;

use crate::candidates_io::CandidateList;
use crate::kg_store::{EntityId, KgSnapshot, PropertyId};

/// NFC, trim, drop one trailing `.`, lowercase.
pub fn normalize_label(s: &str) -> String {
    let nfc: String = s.nfc().collect();
    let trimmed = nfc.trim();
    let undotted = trimmed.strip_suffix('.').unwrap_or(trimmed).trim_end();
    undotted.to_lowercase()
}

/// A KG entity in a question's candidate pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkedCandidate {
    pub entity: EntityId,
    /// The model output that linked to this entity; `None` for neighbors.
    pub surface: Option<String>,
    /// Index in the candidate list; `None` for neighbor-only candidates.
    pub t2t_index: Option<usize>,
    /// Properties connecting a question entity to this candidate.
    pub via_properties: BTreeSet<PropertyId>,
}

impl LinkedCandidate {
    pub fn from_model(entity: EntityId, surface: impl Into<String>, t2t_index: usize) -> Self {
        Self {
            entity,
            surface: Some(surface.into()),
            t2t_index: Some(t2t_index),
            via_properties: BTreeSet::new(),
        }
    }

    pub fn from_neighbor(entity: EntityId, property: PropertyId) -> Self {
        Self {
            entity,
            surface: None,
            t2t_index: None,
            via_properties: [property].into(),
        }
    }

    pub fn is_neighbor(&self) -> bool {
        !self.via_properties.is_empty()
    }

    fn merge(&mut self, other: LinkedCandidate) {
        match (self.t2t_index, other.t2t_index) {
            (Some(mine), Some(theirs)) if theirs < mine => {
                self.t2t_index = Some(theirs);
                self.surface = other.surface;
            }
            (None, Some(_)) => {
                self.t2t_index = other.t2t_index;
                self.surface = other.surface;
            }
            _ => {}
        }
        self.via_properties.extend(other.via_properties);
    }
}

/// The candidates scored for one question, unique by entity.
#[derive(Debug, Clone, Default)]
pub struct CandidatePool {
    pub question_id: String,
    linked: Vec<LinkedCandidate>,
    positions: HashMap<EntityId, usize>,
}

impl PartialEq for CandidatePool {
    fn eq(&self, other: &Self) -> bool {
        self.question_id == other.question_id && self.linked == other.linked
    }
}

impl CandidatePool {
    pub fn new(question_id: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            ..Self::default()
        }
    }

    pub fn from_linked(question_id: impl Into<String>, linked: impl IntoIterator<Item = LinkedCandidate>) -> Self {
        let mut pool = Self::new(question_id);
        for candidate in linked {
            pool.insert(candidate);
        }
        pool
    }

    /// Adds `candidate`, merging with an existing entry for the same entity:
    /// the smaller t2t index and the union of via-properties survive.
    pub fn insert(&mut self, candidate: LinkedCandidate) {
        match self.positions.get(&candidate.entity) {
            Some(&pos) => self.linked[pos].merge(candidate),
            None => {
                self.positions.insert(candidate.entity.clone(), self.linked.len());
                self.linked.push(candidate);
            }
        }
    }

    pub fn get(&self, entity: &EntityId) -> Option<&LinkedCandidate> {
        self.positions.get(entity).map(|&pos| &self.linked[pos])
    }

    pub fn candidates(&self) -> &[LinkedCandidate] {
        &self.linked
    }

    pub fn len(&self) -> usize {
        self.linked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linked.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkOutcome {
    pub linked: Vec<LinkedCandidate>,
    /// Candidate strings that resolved to no entity.
    pub dropped: usize,
}

/// Resolves every candidate string to KG entities. Ambiguous labels fan out
/// to all matches; an entity reached by several strings keeps the first
/// index.
pub fn link_candidates(snapshot: &KgSnapshot, clist: &CandidateList) -> LinkOutcome {
    let mut out = LinkOutcome::default();
    let mut seen = BTreeSet::new();
    for (index, surface) in clist.candidates.iter().enumerate() {
        let matches = snapshot.resolve_label(surface);
        if matches.is_empty() {
            out.dropped += 1;
            continue;
        }
        for entity in matches {
            if seen.insert(entity.clone()) {
                out.linked
                    .push(LinkedCandidate::from_model(entity.clone(), surface.clone(), index));
            }
        }
    }
    out
}

/// Adds every forward one-hop neighbor of the question entities to `pool`,
/// recording the connecting properties. Neighbor sets of several question
/// entities are unioned.
pub fn expand_with_neighbors(
    snapshot: &KgSnapshot,
    mut pool: CandidatePool,
    question_entities: &BTreeSet<EntityId>,
) -> CandidatePool {
    for entity in question_entities {
        for (property, object) in snapshot.get_forward_neighbors(entity) {
            pool.insert(LinkedCandidate::from_neighbor(object.clone(), property.clone()));
        }
    }
    pool
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::kg_store::Triple;

    fn e(s: &str) -> EntityId {
        s.parse().unwrap()
    }

    fn p(s: &str) -> PropertyId {
        s.parse().unwrap()
    }

    fn snapshot() -> KgSnapshot {
        let mut b = KgSnapshot::builder(p("P31"));
        for (s, pr, o) in [
            ("Q2071524", "P19", "Q999"),
            ("Q2071524", "P20", "Q3806"),
            ("Q2071524", "P31", "Q5"),
            ("Q2071524", "P937", "Q999"),
            ("Q999", "P31", "Q515"),
        ] {
            b.add_triple(Triple::parse(s, pr, o).unwrap());
        }
        b.add_label(e("Q216033"), "en", "Konami");
        b.add_label(e("Q999"), "en", "Ingolstadt");
        b.add_label(e("Q3806"), "en", "Tübingen");
        b.add_label(e("Q1"), "en", "Mercury");
        b.add_label(e("Q2"), "en", "Mercury");
        b.build()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_label("Yes."), "yes");
        assert_eq!(normalize_label("  Paris "), "paris");
        assert_eq!(normalize_label(""), "");
        assert_eq!(normalize_label("St. Louis."), "st. louis");
        assert_eq!(normalize_label("Dots.."), "dots.");
        // decomposed ü (u + combining diaeresis) composes to the NFC form
        assert_eq!(normalize_label("Tu\u{308}bingen"), normalize_label("Tübingen"));
    }

    #[test]
    fn links_known_label() {
        let clist = CandidateList::new("q", "Who published neo contra?", ["Konami"]);
        let out = link_candidates(&snapshot(), &clist);
        assert_eq!(out.linked, [LinkedCandidate::from_model(e("Q216033"), "Konami", 0)]);
        assert_eq!(out.dropped, 0);
    }

    #[test]
    fn unknown_label_is_dropped() {
        let clist = CandidateList::new("q", "?", ["qwxzzqk"]);
        let out = link_candidates(&snapshot(), &clist);
        assert!(out.linked.is_empty());
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn ambiguous_label_fans_out() {
        let clist = CandidateList::new("q", "?", ["Venus", "mercury."]);
        let out = link_candidates(&snapshot(), &clist);
        let got: Vec<_> = out.linked.iter().map(|c| (c.entity.as_str(), c.t2t_index)).collect();
        assert_eq!(got, [("Q1", Some(1)), ("Q2", Some(1))]);
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn first_resolution_wins() {
        let clist = CandidateList::new("q", "?", ["Ingolstadt.", "ingolstadt"]);
        let out = link_candidates(&snapshot(), &clist);
        assert_eq!(out.linked.len(), 1);
        assert_eq!(out.linked[0].t2t_index, Some(0));
        assert_eq!(out.linked[0].surface.as_deref(), Some("Ingolstadt."));
    }

    #[test]
    fn expansion_adds_neighbors_with_properties() {
        let kg = snapshot();
        let qents: BTreeSet<_> = [e("Q2071524")].into();
        let pool = expand_with_neighbors(&kg, CandidatePool::new("q"), &qents);
        let ingolstadt = pool.get(&e("Q999")).unwrap();
        assert_eq!(ingolstadt.via_properties, [p("P19"), p("P937")].into());
        assert_eq!(ingolstadt.t2t_index, None);
        assert_eq!(pool.len(), 3);
        // the question entity itself is not a neighbor
        assert!(pool.get(&e("Q2071524")).is_none());
    }

    #[test]
    fn empty_question_entities_leave_pool_unchanged() {
        let kg = snapshot();
        let clist = CandidateList::new("q", "?", ["Konami"]);
        let pool = CandidatePool::from_linked("q", link_candidates(&kg, &clist).linked);
        let expanded = expand_with_neighbors(&kg, pool.clone(), &BTreeSet::new());
        assert_eq!(expanded, pool);
    }

    #[test]
    fn overlap_keeps_both_signals() {
        let kg = snapshot();
        let clist = CandidateList::new("q", "?", ["Munich", "Ingolstadt"]);
        let pool = CandidatePool::from_linked("q", link_candidates(&kg, &clist).linked);
        let pool = expand_with_neighbors(&kg, pool, &[e("Q2071524")].into());
        let c = pool.get(&e("Q999")).unwrap();
        assert_eq!(c.t2t_index, Some(1));
        assert_eq!(c.surface.as_deref(), Some("Ingolstadt"));
        assert!(c.via_properties.contains(&p("P19")));
        assert_eq!(pool.candidates().iter().filter(|c| c.entity == e("Q999")).count(), 1);
    }

    #[test]
    fn merge_keeps_smallest_index() {
        let mut pool = CandidatePool::new("q");
        pool.insert(LinkedCandidate::from_model(e("Q1"), "b", 4));
        pool.insert(LinkedCandidate::from_model(e("Q1"), "a", 2));
        pool.insert(LinkedCandidate::from_model(e("Q1"), "c", 7));
        let c = pool.get(&e("Q1")).unwrap();
        assert_eq!(c.t2t_index, Some(2));
        assert_eq!(c.surface.as_deref(), Some("a"));
    }

    fn random_kg() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
        prop::collection::vec((0u8..12, 0u8..4, 0u8..12), 0..40)
    }

    fn build(edges: &[(u8, u8, u8)]) -> KgSnapshot {
        let mut b = KgSnapshot::builder(p("P31"));
        for &(s, pr, o) in edges {
            b.add_triple(Triple::new(
                e(&format!("Q{s}")),
                p(&format!("P{pr}")),
                e(&format!("Q{o}")),
            ));
            b.add_label(e(&format!("Q{o}")), "en", format!("label {}", o % 5));
        }
        b.build()
    }

    proptest! {
        #[test]
        fn expansion_is_idempotent_and_monotone(
            edges in random_kg(),
            qents in prop::collection::btree_set(0u8..12, 0..4),
            labels in prop::collection::vec(0u8..7, 1..8),
        ) {
            let kg = build(&edges);
            let qents: BTreeSet<EntityId> = qents.iter().map(|q| e(&format!("Q{q}"))).collect();
            let clist = CandidateList::new("q", "?", labels.iter().map(|l| format!("label {l}")));
            let base = CandidatePool::from_linked("q", link_candidates(&kg, &clist).linked);
            let once = expand_with_neighbors(&kg, base.clone(), &qents);
            let twice = expand_with_neighbors(&kg, once.clone(), &qents);
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.len() >= base.len());
            let all_present = qents.iter().all(|q| {
                kg.get_forward_neighbors(q).iter().all(|(_, o)| base.get(o).is_some())
            });
            prop_assert_eq!(once.len() == base.len(), all_present);
            for c in once.candidates() {
                prop_assert!(c.t2t_index.is_some() || c.is_neighbor());
                if let Some(i) = c.t2t_index {
                    prop_assert!(i < clist.len());
                }
            }
        }
    }
}
