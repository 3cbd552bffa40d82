//! Candidate lists produced by a text-to-text model, and the question
//! entities found by an external linker. Both are JSONL files.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg_store::EntityId;

/// Provenance of a candidate list. Carried through, never used for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beams: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity_penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

/// One question's ranked answer labels; index 0 is the top beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub question_id: String,
    pub question_text: String,
    pub candidates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<GenerationMeta>,
}

impl CandidateList {
    /// Builds a list, collapsing repeated beams onto their first index.
    pub fn new(
        question_id: impl Into<String>,
        question_text: impl Into<String>,
        candidates: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        let mut list = Self {
            question_id: question_id.into(),
            question_text: question_text.into(),
            candidates: candidates.into_iter().map(Into::into).collect(),
            meta: None,
        };
        list.dedup();
        list
    }

    fn dedup(&mut self) {
        let mut seen = HashSet::new();
        self.candidates.retain(|c| seen.insert(c.clone()));
    }

    /// |C|
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn index_of(&self, candidate: &str) -> Option<usize> {
        self.candidates.iter().position(|c| c == candidate)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionEntities {
    pub question_id: String,
    pub entities: BTreeSet<EntityId>,
}

pub fn load_candidates(path: &Path) -> Result<Vec<CandidateList>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_candidates(BufReader::new(file), path)
}

pub fn parse_candidates(reader: impl BufRead, path: &Path) -> Result<Vec<CandidateList>> {
    let mut ids = HashSet::new();
    let mut out = Vec::new();
    for_each_record(reader, path, |line_no, mut list: CandidateList| {
        if list.candidates.is_empty() {
            return Err(Error::malformed(path, line_no, "empty candidate list"));
        }
        if !ids.insert(list.question_id.clone()) {
            return Err(Error::malformed(
                path,
                line_no,
                format!("duplicate question_id {:?}", list.question_id),
            ));
        }
        list.dedup();
        out.push(list);
        Ok(())
    })?;
    Ok(out)
}

pub fn load_question_entities(path: &Path) -> Result<BTreeMap<String, QuestionEntities>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_question_entities(BufReader::new(file), path)
}

pub fn parse_question_entities(reader: impl BufRead, path: &Path) -> Result<BTreeMap<String, QuestionEntities>> {
    let mut out = BTreeMap::new();
    for_each_record(reader, path, |line_no, rec: QuestionEntities| {
        if out.contains_key(&rec.question_id) {
            return Err(Error::malformed(
                path,
                line_no,
                format!("duplicate question_id {:?}", rec.question_id),
            ));
        }
        out.insert(rec.question_id.clone(), rec);
        Ok(())
    })?;
    Ok(out)
}

fn for_each_record<T: for<'de> Deserialize<'de>>(
    reader: impl BufRead,
    path: &Path,
    mut handle: impl FnMut(usize, T) -> Result<()>,
) -> Result<()> {
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::malformed(path, line_no, e.to_string()))?;
        handle(line_no, record)?;
    }
    Ok(())
}
