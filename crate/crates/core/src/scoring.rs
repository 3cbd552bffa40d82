//! Candidate scoring and ranking.
//!
//! Each candidate gets four component scores:
//!
//! - type: |types(c) ∩ T| / |T|, 0 when T is empty
//! - neighbour: 1 when the candidate is a forward neighbor of a question entity
//! - t2t: position in the model's candidate list, best beam highest
//! - property: best cosine between a connecting property's label and the question
//!
//! and the final score is their weighted sum. Ranking is by final score
//! descending, ties by entity id ascending.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::candidates_io::CandidateList;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::kg_store::{EntityId, KgSnapshot};
use crate::linking::{CandidatePool, LinkedCandidate};
use crate::typing::AnswerTypeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Type,
    Neighbour,
    T2t,
    Property,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 4] = [
        ScoreKind::Type,
        ScoreKind::Neighbour,
        ScoreKind::T2t,
        ScoreKind::Property,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Type => "type",
            ScoreKind::Neighbour => "neighbour",
            ScoreKind::T2t => "t2t",
            ScoreKind::Property => "property",
        }
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "type" => Ok(ScoreKind::Type),
            "neighbour" | "neighbor" => Ok(ScoreKind::Neighbour),
            "t2t" => Ok(ScoreKind::T2t),
            "property" => Ok(ScoreKind::Property),
            other => Err(Error::Config(format!("unknown score {other:?}"))),
        }
    }
}

/// Set of enabled scores. Disabled scores contribute 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScoreMask([bool; 4]);

impl ScoreMask {
    pub const fn all() -> Self {
        Self([true; 4])
    }

    pub fn only(kind: ScoreKind) -> Self {
        let mut mask = [false; 4];
        mask[kind as usize] = true;
        Self(mask)
    }

    pub fn enabled(&self, kind: ScoreKind) -> bool {
        self.0[kind as usize]
    }

    pub fn label(&self) -> String {
        if *self == Self::all() {
            return "all".to_owned();
        }
        ScoreKind::ALL
            .iter()
            .filter(|k| self.enabled(**k))
            .map(|k| k.name())
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl Default for ScoreMask {
    fn default() -> Self {
        Self::all()
    }
}

impl FromIterator<ScoreKind> for ScoreMask {
    fn from_iter<I: IntoIterator<Item = ScoreKind>>(iter: I) -> Self {
        let mut mask = [false; 4];
        for kind in iter {
            mask[kind as usize] = true;
        }
        Self(mask)
    }
}

impl FromStr for ScoreMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(Self::all());
        }
        let mask: ScoreMask = s
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<ScoreKind>>>()?
            .into_iter()
            .collect();
        if mask.0.iter().all(|on| !on) {
            return Err(Error::Config("no scores enabled".into()));
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreWeights {
    pub type_weight: f64,
    pub neighbour: f64,
    pub t2t: f64,
    pub property: f64,
}

impl ScoreWeights {
    pub fn new(type_weight: f64, neighbour: f64, t2t: f64, property: f64) -> Result<Self> {
        let w = Self {
            type_weight,
            neighbour,
            t2t,
            property,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.type_weight, self.neighbour, self.t2t, self.property];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("score weights must be finite and non-negative".into()));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(Error::Config("at least one score weight must be positive".into()));
        }
        Ok(())
    }

    pub fn get(&self, kind: ScoreKind) -> f64 {
        match kind {
            ScoreKind::Type => self.type_weight,
            ScoreKind::Neighbour => self.neighbour,
            ScoreKind::T2t => self.t2t,
            ScoreKind::Property => self.property,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            type_weight: self.type_weight * factor,
            neighbour: self.neighbour * factor,
            t2t: self.t2t * factor,
            property: self.property * factor,
        }
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            type_weight: 1.0,
            neighbour: 1.0,
            t2t: 1.0,
            property: 1.0,
        }
    }
}

/// Parses `type,neighbour,t2t,property` weights, e.g. `1,1,0.5,1`.
impl FromStr for ScoreWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad weight {p:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let [t, n, b, p] = parts.as_slice() else {
            return Err(Error::Config(format!("expected 4 weights, got {}", parts.len())));
        };
        Self::new(*t, *n, *b, *p)
    }
}

/// Direction of the text-to-text score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum T2tMode {
    /// (|C| - index) / |C|: the top beam scores 1.
    #[default]
    Inverted,
    /// index / |C|, as literally written; the top beam scores 0.
    Literal,
}

impl FromStr for T2tMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverted" => Ok(T2tMode::Inverted),
            "literal" => Ok(T2tMode::Literal),
            other => Err(Error::Config(format!("unknown t2t score mode {other:?}"))),
        }
    }
}

impl fmt::Display for T2tMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            T2tMode::Inverted => "inverted",
            T2tMode::Literal => "literal",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoringConfig {
    pub weights: ScoreWeights,
    pub mask: ScoreMask,
    pub t2t_mode: T2tMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredCandidate {
    pub entity: EntityId,
    pub s_type: f64,
    pub s_neighbour: f64,
    pub s_t2t: f64,
    pub s_property: f64,
    pub s_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedAnswer {
    pub question_id: String,
    pub top: Option<EntityId>,
    pub ranking: Vec<ScoredCandidate>,
}

pub fn score_type(candidate_types: &BTreeSet<EntityId>, answer_types: &AnswerTypeSet) -> f64 {
    if answer_types.is_empty() {
        return 0.0;
    }
    let shared = candidate_types.intersection(&answer_types.types).count();
    shared as f64 / answer_types.len() as f64
}

pub fn score_neighbour(candidate: &LinkedCandidate) -> f64 {
    if candidate.is_neighbor() {
        1.0
    } else {
        0.0
    }
}

/// `list_size` is |C|; candidates without a t2t index score 0.
pub fn score_t2t(candidate: &LinkedCandidate, list_size: usize, mode: T2tMode) -> f64 {
    match candidate.t2t_index {
        Some(index) if list_size > 0 => {
            let size = list_size as f64;
            match mode {
                T2tMode::Inverted => (list_size.saturating_sub(index)) as f64 / size,
                T2tMode::Literal => index as f64 / size,
            }
        }
        _ => 0.0,
    }
}

/// Best similarity between the question and the label of any property
/// connecting a question entity to the candidate.
pub fn score_property(
    candidate: &LinkedCandidate,
    question_text: &str,
    snapshot: &KgSnapshot,
    table: &EmbeddingTable,
) -> f64 {
    property_score_counted(candidate, question_text, snapshot, table, &mut 0)
}

fn property_score_counted(
    candidate: &LinkedCandidate,
    question_text: &str,
    snapshot: &KgSnapshot,
    table: &EmbeddingTable,
    misses: &mut usize,
) -> f64 {
    candidate
        .via_properties
        .iter()
        .map(|p| match snapshot.property_label(p) {
            Some(label) => table.similarity(label, question_text).unwrap_or_else(|| {
                *misses += 1;
                0.0
            }),
            None => 0.0,
        })
        .reduce(f64::max)
        .unwrap_or(0.0)
}

/// Scores a whole pool against T. Embedding misses from property scoring
/// are added to `misses`.
pub struct Scorer<'a> {
    pub snapshot: &'a KgSnapshot,
    pub table: &'a EmbeddingTable,
    pub config: &'a ScoringConfig,
}

impl Scorer<'_> {
    pub fn score(
        &self,
        candidate: &LinkedCandidate,
        answer_types: &AnswerTypeSet,
        clist: &CandidateList,
        misses: &mut usize,
    ) -> ScoredCandidate {
        let mask = self.config.mask;
        let w = &self.config.weights;
        let s_type = if mask.enabled(ScoreKind::Type) {
            score_type(self.snapshot.get_types(&candidate.entity), answer_types)
        } else {
            0.0
        };
        let s_neighbour = if mask.enabled(ScoreKind::Neighbour) {
            score_neighbour(candidate)
        } else {
            0.0
        };
        let s_t2t = if mask.enabled(ScoreKind::T2t) {
            score_t2t(candidate, clist.len(), self.config.t2t_mode)
        } else {
            0.0
        };
        let s_property = if mask.enabled(ScoreKind::Property) {
            property_score_counted(candidate, &clist.question_text, self.snapshot, self.table, misses)
        } else {
            0.0
        };
        let s_final = w.type_weight * s_type + w.neighbour * s_neighbour + w.t2t * s_t2t + w.property * s_property;
        ScoredCandidate {
            entity: candidate.entity.clone(),
            s_type,
            s_neighbour,
            s_t2t,
            s_property,
            s_final,
        }
    }

    pub fn rank(
        &self,
        pool: &CandidatePool,
        answer_types: &AnswerTypeSet,
        clist: &CandidateList,
        misses: &mut usize,
    ) -> RankedAnswer {
        let mut ranking: Vec<ScoredCandidate> = pool
            .candidates()
            .iter()
            .map(|c| self.score(c, answer_types, clist, misses))
            .collect();
        ranking.sort_by(compare_scored);
        RankedAnswer {
            question_id: pool.question_id.clone(),
            top: ranking.first().map(|c| c.entity.clone()),
            ranking,
        }
    }
}

/// Final score descending, then entity id ascending.
pub fn compare_scored(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.s_final.total_cmp(&a.s_final).then_with(|| a.entity.cmp(&b.entity))
}

/// Ranks every candidate of `pool`. The question text is taken from `clist`.
pub fn rank_candidates(
    pool: &CandidatePool,
    answer_types: &AnswerTypeSet,
    clist: &CandidateList,
    snapshot: &KgSnapshot,
    table: &EmbeddingTable,
    config: &ScoringConfig,
) -> RankedAnswer {
    Scorer {
        snapshot,
        table,
        config,
    }
    .rank(pool, answer_types, clist, &mut 0)
}

fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    // "-0.000000" and "0.000000" must not differ between runs
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_owned()
    } else {
        s
    }
}

/// Writes one prediction as a JSONL line with 6-decimal floats.
pub fn write_prediction(out: &mut impl Write, answer: &RankedAnswer) -> io::Result<()> {
    let quote = |s: &str| serde_json::to_string(s).expect("string serializes");
    write!(out, "{{\"question_id\":{},\"top\":", quote(&answer.question_id))?;
    match &answer.top {
        Some(top) => write!(out, "{}", quote(top.as_str()))?,
        None => write!(out, "null")?,
    }
    write!(out, ",\"ranking\":[")?;
    for (i, c) in answer.ranking.iter().enumerate() {
        if i > 0 {
            write!(out, ",")?;
        }
        write!(
            out,
            "{{\"entity\":{},\"s_type\":{},\"s_neighbour\":{},\"s_t2t\":{},\"s_property\":{},\"s_final\":{}}}",
            quote(c.entity.as_str()),
            fixed6(c.s_type),
            fixed6(c.s_neighbour),
            fixed6(c.s_t2t),
            fixed6(c.s_property),
            fixed6(c.s_final),
        )?;
    }
    writeln!(out, "]}}")
}

pub fn write_predictions<'a>(
    out: &mut impl Write,
    answers: impl IntoIterator<Item = &'a RankedAnswer>,
) -> io::Result<()> {
    for answer in answers {
        write_prediction(out, answer)?;
    }
    Ok(())
}
