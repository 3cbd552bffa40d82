//! Hit@1 over every (pool source, score mask) combination: three pool
//! sources by four single-score masks plus all scores, 15 cells.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{hit_at_1, EvalRecord};
use crate::candidates_io::{CandidateList, QuestionEntities};
use crate::embeddings::EmbeddingTable;
use crate::error::Result;
use crate::kg_store::{EntityId, KgSnapshot};
use crate::pipeline::{run_in_pool, Pipeline, PipelineConfig, PoolSource, PreparedQuestion};
use crate::scoring::{RankedAnswer, ScoreKind, ScoreMask, ScoreWeights, ScoringConfig, T2tMode};
use crate::typing::TypingConfig;

pub struct AblationConfig<'a> {
    pub records: &'a [EvalRecord],
    pub candidates: &'a [CandidateList],
    pub entities: &'a BTreeMap<String, QuestionEntities>,
    pub snapshot: &'a KgSnapshot,
    pub table: &'a EmbeddingTable,
    pub typing: TypingConfig,
    pub weights: ScoreWeights,
    pub t2t_mode: T2tMode,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationCell {
    pub source: PoolSource,
    pub scores: String,
    #[serde(skip)]
    pub mask: ScoreMask,
    pub correct: usize,
    pub n_questions: usize,
    pub hit_at_1: f64,
}

/// Column order: each single score, then all scores.
pub fn ablation_columns() -> [ScoreMask; 5] {
    [
        ScoreMask::only(ScoreKind::Type),
        ScoreMask::only(ScoreKind::Neighbour),
        ScoreMask::only(ScoreKind::T2t),
        ScoreMask::only(ScoreKind::Property),
        ScoreMask::all(),
    ]
}

/// Cells in row-major order: sources as in [`PoolSource::ALL`], columns as
/// in [`ablation_columns`].
pub fn run_ablation(config: &AblationConfig<'_>) -> Result<Vec<AblationCell>> {
    let base = PipelineConfig {
        typing: config.typing.clone(),
        scoring: ScoringConfig {
            weights: config.weights,
            mask: ScoreMask::all(),
            t2t_mode: config.t2t_mode,
        },
        source: PoolSource::Full,
        threads: None,
    };
    let pipeline = Pipeline::new(config.snapshot, config.table, &base)?;
    let empty = BTreeSet::<EntityId>::new();

    run_in_pool(config.threads, || {
        let prepared: Vec<PreparedQuestion> = config
            .candidates
            .par_iter()
            .map(|clist| {
                let qents = config
                    .entities
                    .get(&clist.question_id)
                    .map(|q| &q.entities)
                    .unwrap_or(&empty);
                pipeline.prepare(clist, qents)
            })
            .collect();

        let grid: Vec<(PoolSource, ScoreMask)> = PoolSource::ALL
            .iter()
            .flat_map(|s| ablation_columns().map(|m| (*s, m)))
            .collect();
        grid.into_iter()
            .map(|(source, mask)| {
                let scoring = ScoringConfig {
                    mask,
                    ..base.scoring.clone()
                };
                let answers: BTreeMap<String, RankedAnswer> = prepared
                    .par_iter()
                    .map(|p| {
                        let (answer, _, _) = pipeline.rank_prepared(p, &scoring, source);
                        (answer.question_id.clone(), answer)
                    })
                    .collect();
                let report = hit_at_1(config.records, &answers);
                AblationCell {
                    source,
                    scores: mask.label(),
                    mask,
                    correct: report.correct,
                    n_questions: report.n_questions,
                    hit_at_1: report.hit_at_1,
                }
            })
            .collect()
    })
}

fn row_title(source: PoolSource) -> &'static str {
    match source {
        PoolSource::LmOnly => "Only initial candidates (text-to-text)",
        PoolSource::NeighboursOnly => "Only question neighbours candidates",
        PoolSource::Full => "Full answer candidates set",
    }
}

/// Fixed-width table of Hit@1 percentages, one row per pool source.
pub fn render_ablation_table(cells: &[AblationCell]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<40}{:>10}{:>11}{:>10}{:>10}{:>12}",
        "Hit@1 (%)", "Type", "Neighbour", "T2T", "Property", "All scores"
    );
    for source in PoolSource::ALL {
        let _ = write!(out, "{:<40}", row_title(source));
        for (i, mask) in ablation_columns().iter().enumerate() {
            let width = [10, 11, 10, 10, 12][i];
            match cells.iter().find(|c| c.source == source && c.mask == *mask) {
                Some(c) => {
                    let _ = write!(out, "{:>width$.2}", c.hit_at_1 * 100.0);
                }
                None => {
                    let _ = write!(out, "{:>width$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
