//! Per-question orchestration: link, expand, type, rank.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::candidates_io::{CandidateList, QuestionEntities};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::kg_store::{EntityId, KgSnapshot};
use crate::linking::{expand_with_neighbors, link_candidates, CandidatePool, LinkedCandidate};
use crate::scoring::{RankedAnswer, Scorer, ScoringConfig};
use crate::typing::{count_type_frequencies, select_answer_types, AnswerTypeSet, TypingConfig};

/// Which candidates enter the scored pool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolSource {
    /// Linked model candidates only.
    LmOnly,
    /// Forward neighbors of the question entities only.
    NeighboursOnly,
    /// Both.
    #[default]
    Full,
}

impl std::str::FromStr for PoolSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PoolSource::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown pool source {s:?}")))
    }
}

impl PoolSource {
    pub const ALL: [PoolSource; 3] = [PoolSource::LmOnly, PoolSource::NeighboursOnly, PoolSource::Full];

    pub fn name(self) -> &'static str {
        match self {
            PoolSource::LmOnly => "lm-only",
            PoolSource::NeighboursOnly => "neighbours-only",
            PoolSource::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub typing: TypingConfig,
    pub scoring: ScoringConfig,
    pub source: PoolSource,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

/// Everything derived for one question before scoring. Typing always uses
/// the model candidates, whatever the pool source.
#[derive(Debug, Clone)]
pub struct PreparedQuestion {
    pub clist: CandidateList,
    pub lm_linked: Vec<LinkedCandidate>,
    pub link_drops: usize,
    pub answer_types: AnswerTypeSet,
    pub typing_misses: usize,
    question_entities: BTreeSet<EntityId>,
}

impl PreparedQuestion {
    pub fn pool(&self, snapshot: &KgSnapshot, source: PoolSource) -> CandidatePool {
        let qid = &self.clist.question_id;
        match source {
            PoolSource::LmOnly => CandidatePool::from_linked(qid.clone(), self.lm_linked.iter().cloned()),
            PoolSource::NeighboursOnly => {
                expand_with_neighbors(snapshot, CandidatePool::new(qid.clone()), &self.question_entities)
            }
            PoolSource::Full => expand_with_neighbors(
                snapshot,
                CandidatePool::from_linked(qid.clone(), self.lm_linked.iter().cloned()),
                &self.question_entities,
            ),
        }
    }

    pub fn question_entities(&self) -> &BTreeSet<EntityId> {
        &self.question_entities
    }
}

#[derive(Debug, Clone)]
pub struct QuestionOutcome {
    pub answer: RankedAnswer,
    pub answer_types: AnswerTypeSet,
    pub lm_linked: Vec<LinkedCandidate>,
    pub link_drops: usize,
    pub embedding_misses: usize,
    pub pool_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub questions: usize,
    pub link_drop_count: usize,
    pub embedding_miss_count: usize,
    pub questions_without_entities: usize,
    pub empty_rankings: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// In candidate-file order.
    pub outcomes: Vec<QuestionOutcome>,
    pub stats: RunStats,
}

impl RunOutput {
    pub fn answers(&self) -> BTreeMap<String, RankedAnswer> {
        self.outcomes
            .iter()
            .map(|o| (o.answer.question_id.clone(), o.answer.clone()))
            .collect()
    }

    pub fn type_sets(&self) -> BTreeMap<String, AnswerTypeSet> {
        self.outcomes
            .iter()
            .map(|o| (o.answer.question_id.clone(), o.answer_types.clone()))
            .collect()
    }

    pub fn lm_candidates(&self) -> BTreeMap<String, Vec<LinkedCandidate>> {
        self.outcomes
            .iter()
            .map(|o| (o.answer.question_id.clone(), o.lm_linked.clone()))
            .collect()
    }
}

pub struct Pipeline<'a> {
    pub snapshot: &'a KgSnapshot,
    pub table: &'a EmbeddingTable,
    pub config: &'a PipelineConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(snapshot: &'a KgSnapshot, table: &'a EmbeddingTable, config: &'a PipelineConfig) -> Result<Self> {
        config.typing.validate()?;
        config.scoring.weights.validate()?;
        Ok(Self {
            snapshot,
            table,
            config,
        })
    }

    pub fn prepare(&self, clist: &CandidateList, question_entities: &BTreeSet<EntityId>) -> PreparedQuestion {
        let link = link_candidates(self.snapshot, clist);
        let freqs = count_type_frequencies(self.snapshot, &link.linked);
        let selection = select_answer_types(
            &clist.question_id,
            &freqs,
            self.table,
            self.snapshot,
            &self.config.typing,
        );
        PreparedQuestion {
            clist: clist.clone(),
            lm_linked: link.linked,
            link_drops: link.dropped,
            answer_types: selection.types,
            typing_misses: selection.embedding_misses,
            question_entities: question_entities.clone(),
        }
    }

    pub fn rank_prepared(
        &self,
        prepared: &PreparedQuestion,
        scoring: &ScoringConfig,
        source: PoolSource,
    ) -> (RankedAnswer, usize, usize) {
        let pool = prepared.pool(self.snapshot, source);
        let scorer = Scorer {
            snapshot: self.snapshot,
            table: self.table,
            config: scoring,
        };
        let mut misses = 0;
        let answer = scorer.rank(&pool, &prepared.answer_types, &prepared.clist, &mut misses);
        (answer, misses, pool.len())
    }

    pub fn run_question(&self, clist: &CandidateList, question_entities: &BTreeSet<EntityId>) -> QuestionOutcome {
        let prepared = self.prepare(clist, question_entities);
        let (answer, misses, pool_size) = self.rank_prepared(&prepared, &self.config.scoring, self.config.source);
        QuestionOutcome {
            answer,
            answer_types: prepared.answer_types,
            lm_linked: prepared.lm_linked,
            link_drops: prepared.link_drops,
            embedding_misses: prepared.typing_misses + misses,
            pool_size,
        }
    }

    /// Runs every candidate list; questions missing from `entities` get no
    /// neighbor expansion.
    pub fn run(
        &self,
        candidates: &[CandidateList],
        entities: &BTreeMap<String, QuestionEntities>,
    ) -> Result<RunOutput> {
        let empty = BTreeSet::new();
        let outcomes = self.install(|| {
            candidates
                .par_iter()
                .map(|clist| {
                    let qents = entities.get(&clist.question_id).map(|q| &q.entities).unwrap_or(&empty);
                    self.run_question(clist, qents)
                })
                .collect::<Vec<_>>()
        })?;
        let stats = RunStats {
            questions: outcomes.len(),
            link_drop_count: outcomes.iter().map(|o| o.link_drops).sum(),
            embedding_miss_count: outcomes.iter().map(|o| o.embedding_misses).sum(),
            questions_without_entities: candidates
                .iter()
                .filter(|c| entities.get(&c.question_id).is_none_or(|q| q.entities.is_empty()))
                .count(),
            empty_rankings: outcomes.iter().filter(|o| o.answer.top.is_none()).count(),
        };
        Ok(RunOutput { outcomes, stats })
    }

    /// Runs `work` on a pool of `config.threads` workers (or the global pool).
    pub fn install<T: Send>(&self, work: impl FnOnce() -> T + Send) -> Result<T> {
        run_in_pool(self.config.threads, work)
    }
}

pub(crate) fn run_in_pool<T: Send>(threads: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(work()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
    }
}
