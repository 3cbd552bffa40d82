//! Benchmark files normalized into [`EvalRecord`]s.
//!
//! - `sqwd-tsv`: `subject<TAB>property<TAB>object<TAB>question` rows; the
//!   question id is `sqwd-<n>` for the n-th data row (1-based).
//! - `rubq-json`: RuBQ 2.0 JSON array; only entity answers are kept.
//! - `mintaka-json`: Mintaka JSON array; generic questions with entity
//!   answers, optionally restricted to one-hop questions.
//! - `generic-jsonl`: one [`EvalRecord`] per line.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::kg_store::{EntityId, KgSnapshot, PropertyId};

const WIKIDATA_ENTITY: &str = "http://www.wikidata.org/entity/";
const WIKIDATA_DIRECT: &str = "http://www.wikidata.org/prop/direct/";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub question_text: String,
    pub gold_answers: BTreeSet<EntityId>,
    #[serde(default)]
    pub question_entities: BTreeSet<EntityId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_property: Option<PropertyId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    SqwdTsv,
    RubqJson,
    MintakaJson,
    GenericJsonl,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqwd-tsv" => Ok(Self::SqwdTsv),
            "rubq-json" => Ok(Self::RubqJson),
            "mintaka-json" => Ok(Self::MintakaJson),
            "generic-jsonl" => Ok(Self::GenericJsonl),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<EvalRecord>,
    /// Records dropped by format rules (no entity answer, not one-hop, ...).
    pub skipped: usize,
}

pub fn load_dataset(path: &Path, format: DatasetFormat, snapshot: Option<&KgSnapshot>) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path, format, snapshot)
}

/// Records only; see [`load_dataset`] for the skip count.
pub fn normalize_dataset(path: &Path, format: DatasetFormat, snapshot: Option<&KgSnapshot>) -> Result<Vec<EvalRecord>> {
    load_dataset(path, format, snapshot).map(|d| d.records)
}

pub fn parse_dataset(text: &str, path: &Path, format: DatasetFormat, snapshot: Option<&KgSnapshot>) -> Result<Dataset> {
    let dataset = match format {
        DatasetFormat::SqwdTsv => parse_sqwd(text, path)?,
        DatasetFormat::GenericJsonl => parse_generic(text, path)?,
        DatasetFormat::RubqJson => parse_rubq(text, path)?,
        DatasetFormat::MintakaJson => parse_mintaka(text, path, snapshot)?,
    };
    let mut ids = BTreeSet::new();
    for rec in &dataset.records {
        if !ids.insert(rec.question_id.as_str()) {
            return Err(Error::Config(format!(
                "{}: duplicate question id {:?}",
                path.display(),
                rec.question_id
            )));
        }
    }
    Ok(dataset)
}

fn parse_sqwd(text: &str, path: &Path) -> Result<Dataset> {
    let mut out = Dataset::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        let [subject, property, object, question] = fields.as_slice() else {
            return Err(Error::malformed(
                path,
                line_no,
                "expected subject, property, object, question",
            ));
        };
        let bad = |e: Error| Error::malformed(path, line_no, e.to_string());
        let n = out.records.len() + 1;
        out.records.push(EvalRecord {
            question_id: format!("sqwd-{n}"),
            question_text: question.trim().to_owned(),
            gold_answers: [EntityId::new(*object).map_err(bad)?].into(),
            question_entities: [EntityId::new(*subject).map_err(bad)?].into(),
            gold_property: Some(PropertyId::new(*property).map_err(bad)?),
        });
    }
    Ok(out)
}

fn parse_generic(text: &str, path: &Path) -> Result<Dataset> {
    let mut out = Dataset::default();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EvalRecord = serde_json::from_str(line).map_err(|e| Error::malformed(path, idx + 1, e.to_string()))?;
        if rec.gold_answers.is_empty() {
            return Err(Error::malformed(path, idx + 1, "empty gold_answers"));
        }
        out.records.push(rec);
    }
    Ok(out)
}

fn json_array(text: &str, path: &Path) -> Result<Vec<Value>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Array(items)) => Ok(items),
        Ok(_) => Err(Error::malformed(path, 1, "expected a JSON array of records")),
        Err(e) => Err(Error::malformed(path, e.line(), e.to_string())),
    }
}

/// Strips a Wikidata entity URI (or `wd:` prefix) down to its id.
fn entity_from_uri(value: &str) -> Option<EntityId> {
    let id = value
        .strip_prefix(WIKIDATA_ENTITY)
        .or_else(|| value.strip_prefix("wd:"))
        .unwrap_or(value);
    if id.starts_with('Q') && id[1..].chars().all(|c| c.is_ascii_digit()) && id.len() > 1 {
        EntityId::new(id).ok()
    } else {
        None
    }
}

fn property_from_uri(value: &str) -> Option<PropertyId> {
    let id = value
        .strip_prefix(WIKIDATA_DIRECT)
        .or_else(|| value.strip_prefix("wdt:"))
        .unwrap_or(value);
    if id.starts_with('P') && id.len() > 1 && id[1..].chars().all(|c| c.is_ascii_digit()) {
        PropertyId::new(id).ok()
    } else {
        None
    }
}

fn id_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_rubq(text: &str, path: &Path) -> Result<Dataset> {
    let mut out = Dataset::default();
    for (idx, item) in json_array(text, path)?.into_iter().enumerate() {
        let record_no = idx + 1;
        let malformed = |reason: &str| Error::malformed(path, record_no, format!("record {record_no}: {reason}"));
        let question_id = item
            .get("uid")
            .and_then(id_string)
            .ok_or_else(|| malformed("missing uid"))?;
        let question_text = item
            .get("question_eng")
            .or_else(|| item.get("question_text"))
            .and_then(Value::as_str)
            .ok_or_else(|| malformed("missing question text"))?
            .to_owned();
        let gold_answers: BTreeSet<EntityId> = item
            .get("answers")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed("missing answers"))?
            .iter()
            .filter_map(|a| a.get("value").and_then(Value::as_str))
            .filter_map(entity_from_uri)
            .collect();
        if gold_answers.is_empty() {
            out.skipped += 1;
            continue;
        }
        let question_entities = item
            .get("question_uris")
            .and_then(Value::as_array)
            .map(|uris| {
                uris.iter()
                    .filter_map(Value::as_str)
                    .filter_map(entity_from_uri)
                    .collect()
            })
            .unwrap_or_default();
        let gold_property = item.get("question_props").and_then(Value::as_array).and_then(|props| {
            props.iter().find_map(|p| {
                let value = p.get("value").and_then(Value::as_str).or_else(|| p.as_str())?;
                property_from_uri(value)
            })
        });
        out.records.push(EvalRecord {
            question_id,
            question_text,
            gold_answers,
            question_entities,
            gold_property,
        });
    }
    Ok(out)
}

fn parse_mintaka(text: &str, path: &Path, snapshot: Option<&KgSnapshot>) -> Result<Dataset> {
    let mut out = Dataset::default();
    for (idx, item) in json_array(text, path)?.into_iter().enumerate() {
        let record_no = idx + 1;
        let malformed = |reason: &str| Error::malformed(path, record_no, format!("record {record_no}: {reason}"));
        let question_id = item
            .get("id")
            .and_then(id_string)
            .ok_or_else(|| malformed("missing id"))?;
        let question_text = item
            .get("question")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed("missing question"))?
            .to_owned();
        let generic = item
            .get("complexityType")
            .and_then(Value::as_str)
            .is_none_or(|c| c == "generic");
        let answer = item.get("answer").ok_or_else(|| malformed("missing answer"))?;
        let entity_answer = answer
            .get("answerType")
            .and_then(Value::as_str)
            .is_none_or(|t| t == "entity");
        let gold_answers: BTreeSet<EntityId> = answer
            .get("answer")
            .and_then(Value::as_array)
            .map(|list| {
                list.iter()
                    .filter_map(|a| a.get("name").and_then(Value::as_str))
                    .filter_map(entity_from_uri)
                    .collect()
            })
            .unwrap_or_default();
        let question_entities: BTreeSet<EntityId> = item
            .get("questionEntity")
            .and_then(Value::as_array)
            .map(|list| {
                list.iter()
                    .filter(|q| {
                        q.get("entityType")
                            .and_then(Value::as_str)
                            .is_none_or(|t| t == "entity")
                    })
                    .filter_map(|q| q.get("name").and_then(Value::as_str))
                    .filter_map(entity_from_uri)
                    .collect()
            })
            .unwrap_or_default();
        if !generic || !entity_answer || gold_answers.is_empty() {
            out.skipped += 1;
            continue;
        }
        if let Some(kg) = snapshot {
            let one_hop = question_entities.iter().any(|q| {
                kg.get_forward_neighbors(q)
                    .iter()
                    .any(|(_, o)| gold_answers.contains(o))
            });
            if !one_hop {
                out.skipped += 1;
                continue;
            }
        }
        out.records.push(EvalRecord {
            question_id,
            question_text,
            gold_answers,
            question_entities,
            gold_property: None,
        });
    }
    Ok(out)
}
