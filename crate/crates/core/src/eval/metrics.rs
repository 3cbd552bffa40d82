use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::EvalRecord;
use crate::kg_store::{EntityId, KgSnapshot};
use crate::linking::LinkedCandidate;
use crate::scoring::RankedAnswer;
use crate::typing::AnswerTypeSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionResult {
    pub question_id: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_questions: usize,
    pub correct: usize,
    pub hit_at_1: f64,
    pub type_accuracy: Option<f64>,
    pub candidate_type_match_rate: Option<f64>,
    pub link_drop_count: usize,
    pub embedding_miss_count: usize,
    pub gold_missing_count: usize,
    /// Sorted by question id.
    pub per_question: Vec<QuestionResult>,
}

/// A question is correct iff it has a top answer that is one of its gold
/// answers. Questions without an answer count as misses.
pub fn hit_at_1(records: &[EvalRecord], answers: &BTreeMap<String, RankedAnswer>) -> EvalReport {
    let mut per_question: Vec<QuestionResult> = records
        .iter()
        .map(|rec| {
            let correct = answers
                .get(&rec.question_id)
                .and_then(|a| a.top.as_ref())
                .is_some_and(|top| rec.gold_answers.contains(top));
            QuestionResult {
                question_id: rec.question_id.clone(),
                correct,
            }
        })
        .collect();
    per_question.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    let correct = per_question.iter().filter(|q| q.correct).count();
    let n = per_question.len();
    EvalReport {
        n_questions: n,
        correct,
        hit_at_1: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        type_accuracy: None,
        candidate_type_match_rate: None,
        link_drop_count: 0,
        embedding_miss_count: 0,
        gold_missing_count: 0,
        per_question,
    }
}

/// Questions none of whose gold answers occur in the snapshot.
pub fn gold_missing_count(records: &[EvalRecord], snapshot: &KgSnapshot) -> usize {
    records
        .iter()
        .filter(|r| !r.gold_answers.iter().any(|g| snapshot.contains(g)))
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeAccuracy {
    pub questions: usize,
    pub questions_matched: usize,
    /// Share of questions whose T intersects the gold answer types.
    pub type_accuracy: f64,
    pub candidates: usize,
    pub candidates_matched: usize,
    /// Share of model candidates (all questions pooled) whose types
    /// intersect the gold answer types.
    pub candidate_type_match_rate: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// The gold type set of a question is the union of its gold answers'
/// `instance_of` types; an untyped gold matches nothing.
pub fn type_accuracy(
    records: &[EvalRecord],
    type_sets: &BTreeMap<String, AnswerTypeSet>,
    lm_candidates: &BTreeMap<String, Vec<LinkedCandidate>>,
    snapshot: &KgSnapshot,
) -> TypeAccuracy {
    let mut questions_matched = 0;
    let mut candidates = 0;
    let mut candidates_matched = 0;
    for rec in records {
        let gold_types: BTreeSet<&EntityId> = rec.gold_answers.iter().flat_map(|g| snapshot.get_types(g)).collect();
        let predicted = type_sets.get(&rec.question_id);
        if predicted.is_some_and(|t| t.types.iter().any(|t| gold_types.contains(t))) {
            questions_matched += 1;
        }
        for cand in lm_candidates.get(&rec.question_id).into_iter().flatten() {
            candidates += 1;
            if snapshot.get_types(&cand.entity).iter().any(|t| gold_types.contains(t)) {
                candidates_matched += 1;
            }
        }
    }
    TypeAccuracy {
        questions: records.len(),
        questions_matched,
        type_accuracy: ratio(questions_matched, records.len()),
        candidates,
        candidates_matched,
        candidate_type_match_rate: ratio(candidates_matched, candidates),
    }
}
