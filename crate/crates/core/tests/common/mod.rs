//! Brute-force reference implementation used by the integration tests.
//!
//! It reads the raw fixture files itself and recomputes linking, answer
//! types and every score with plain loops over flat lists, sharing no code
//! with the library beyond the NFC tables.

#![allow(dead_code)]

pub mod random;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use unicode_normalization::UnicodeNormalization;

pub fn fixture(parts: &[&str]) -> PathBuf {
    let mut path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    for p in parts {
        path.push(p);
    }
    path
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.splitn(4, '\t').map(str::to_owned).collect())
        .collect()
}

#[derive(Debug, Default, Clone)]
pub struct OracleKg {
    pub triples: Vec<(String, String, String)>,
    /// (entity, language, text); first row per (entity, language) counts.
    pub labels: Vec<(String, String, String)>,
    pub aliases: Vec<(String, String)>,
    pub property_labels: Vec<(String, String)>,
    pub vectors: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone)]
pub struct OracleQuestion {
    pub id: String,
    pub text: String,
    pub candidates: Vec<String>,
    pub entities: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub top_k: usize,
    pub threshold: f64,
    pub weights: [f64; 4],
    pub inverted: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            top_k: 3,
            threshold: 0.6,
            weights: [1.0; 4],
            inverted: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleScore {
    pub entity: String,
    pub s_type: f64,
    pub s_neighbour: f64,
    pub s_t2t: f64,
    pub s_property: f64,
    pub s_final: f64,
}

pub fn load_kg(dir: &Path) -> OracleKg {
    let mut kg = OracleKg::default();
    for r in rows(&dir.join("triples.tsv")) {
        let r: Vec<String> = r.join("\t").split('\t').map(str::to_owned).collect();
        kg.triples.push((r[0].clone(), r[1].clone(), r[2].clone()));
    }
    for r in rows(&dir.join("labels.tsv")) {
        match r[1].as_str() {
            "label" => kg.labels.push((r[0].clone(), r[2].clone(), r[3].clone())),
            "alias" => kg.aliases.push((r[0].clone(), r[3].clone())),
            "plabel" => kg.property_labels.push((r[0].clone(), r[3].clone())),
            other => panic!("kind {other}"),
        }
    }
    let text = fs::read_to_string(dir.join("embeddings.tsv")).unwrap();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let (key, nums) = line.rsplit_once('\t').unwrap();
        let v = nums.split(',').map(|x| x.trim().parse().unwrap()).collect();
        kg.vectors.push((key.to_owned(), v));
    }
    kg
}

pub fn load_questions(dir: &Path, entities_file: Option<&str>) -> Vec<OracleQuestion> {
    let mut ents: BTreeMap<String, Vec<String>> = BTreeMap::new();
    if let Some(name) = entities_file {
        for line in fs::read_to_string(dir.join(name)).unwrap().lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let list = v["entities"]
                .as_array()
                .unwrap()
                .iter()
                .map(|e| e.as_str().unwrap().to_owned())
                .collect();
            ents.insert(v["question_id"].as_str().unwrap().to_owned(), list);
        }
    }
    fs::read_to_string(dir.join("candidates.jsonl"))
        .unwrap()
        .lines()
        .map(|line| {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let id = v["question_id"].as_str().unwrap().to_owned();
            OracleQuestion {
                entities: ents.get(&id).cloned().unwrap_or_default(),
                id,
                text: v["question_text"].as_str().unwrap().to_owned(),
                candidates: v["candidates"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|c| c.as_str().unwrap().to_owned())
                    .collect(),
            }
        })
        .collect()
}

pub fn norm(s: &str) -> String {
    let s: String = s.nfc().collect();
    let mut s = s.trim();
    if let Some(stripped) = s.strip_suffix('.') {
        s = stripped;
    }
    s.trim_end().to_lowercase()
}

pub fn cos(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    let (na, nb) = (f64::sqrt(na), f64::sqrt(nb));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

impl OracleKg {
    fn vector(&self, key: &str) -> Option<&[f64]> {
        self.vectors.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_slice())
    }

    pub fn sim(&self, a: &str, b: &str) -> Option<f64> {
        cos(self.vector(a)?, self.vector(b)?)
    }

    pub fn types_of(&self, e: &str) -> BTreeSet<String> {
        self.triples
            .iter()
            .filter(|(s, p, _)| s == e && p == "P31")
            .map(|(_, _, o)| o.clone())
            .collect()
    }

    pub fn label(&self, e: &str) -> Option<&str> {
        self.labels
            .iter()
            .find(|(x, lang, _)| x == e && lang == "en")
            .map(|(_, _, t)| t.as_str())
    }

    pub fn property_label(&self, p: &str) -> Option<&str> {
        self.property_labels
            .iter()
            .find(|(x, _)| x == p)
            .map(|(_, t)| t.as_str())
    }

    pub fn knows(&self, e: &str) -> bool {
        self.triples.iter().any(|(s, _, o)| s == e || o == e)
            || self.labels.iter().any(|(x, _, _)| x == e)
            || self.aliases.iter().any(|(x, _)| x == e)
    }

    /// Entities any of whose labels or aliases normalize to `surface`'s key.
    pub fn resolve(&self, surface: &str) -> BTreeSet<String> {
        let key = norm(surface);
        let mut out = BTreeSet::new();
        if key.is_empty() {
            return out;
        }
        let mut seen_pairs = BTreeSet::new();
        for (e, lang, t) in &self.labels {
            // only the first label per (entity, language) is kept
            if seen_pairs.insert((e.clone(), lang.clone())) && norm(t) == key {
                out.insert(e.clone());
            }
        }
        for (e, t) in &self.aliases {
            if norm(t) == key {
                out.insert(e.clone());
            }
        }
        out
    }

    /// (entity, first candidate index) for every linked model output.
    pub fn link(&self, candidates: &[String]) -> (Vec<(String, usize)>, usize) {
        let mut distinct: Vec<&String> = Vec::new();
        for c in candidates {
            if !distinct.contains(&c) {
                distinct.push(c);
            }
        }
        let mut linked: Vec<(String, usize)> = Vec::new();
        let mut dropped = 0;
        for (i, c) in distinct.iter().enumerate() {
            let hits = self.resolve(c);
            if hits.is_empty() {
                dropped += 1;
            }
            for e in hits {
                if !linked.iter().any(|(x, _)| *x == e) {
                    linked.push((e, i));
                }
            }
        }
        (linked, dropped)
    }

    pub fn answer_types(&self, linked: &[(String, usize)], config: &OracleConfig) -> BTreeSet<String> {
        let mut counts: Vec<(String, usize)> = Vec::new();
        for (e, _) in linked {
            for t in self.types_of(e) {
                match counts.iter_mut().find(|(x, _)| *x == t) {
                    Some(slot) => slot.1 += 1,
                    None => counts.push((t, 1)),
                }
            }
        }
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let k = config.top_k.min(counts.len());
        let mut out: BTreeSet<String> = counts[..k].iter().map(|(t, _)| t.clone()).collect();
        for (t, _) in &counts[k..] {
            let Some(l) = self.label(t) else { continue };
            for (top, _) in &counts[..k] {
                let Some(tl) = self.label(top) else { continue };
                if self.sim(l, tl).is_some_and(|s| s > config.threshold) {
                    out.insert(t.clone());
                }
            }
        }
        out
    }

    /// Scores and sorts the full pool of `q`.
    pub fn rank(&self, q: &OracleQuestion, config: &OracleConfig) -> (BTreeSet<String>, Vec<OracleScore>) {
        let (linked, _) = self.link(&q.candidates);
        let types = self.answer_types(&linked, config);
        let scores = self.rank_given(q, &types, config);
        (types, scores)
    }

    /// Scores and sorts the full pool of `q` against a given T.
    pub fn rank_given(&self, q: &OracleQuestion, types: &BTreeSet<String>, config: &OracleConfig) -> Vec<OracleScore> {
        let (linked, _) = self.link(&q.candidates);
        let mut distinct = q.candidates.clone();
        let mut seen = BTreeSet::new();
        distinct.retain(|c| seen.insert(c.clone()));
        let size = distinct.len() as f64;

        let mut pool: BTreeMap<String, (Option<usize>, BTreeSet<String>)> = BTreeMap::new();
        for (e, i) in &linked {
            pool.insert(e.clone(), (Some(*i), BTreeSet::new()));
        }
        for qe in &q.entities {
            for (s, p, o) in &self.triples {
                if s == qe {
                    pool.entry(o.clone())
                        .or_insert((None, BTreeSet::new()))
                        .1
                        .insert(p.clone());
                }
            }
        }

        let w = config.weights;
        let mut scores: Vec<OracleScore> = pool
            .into_iter()
            .map(|(e, (idx, props))| {
                let s_type = if types.is_empty() {
                    0.0
                } else {
                    self.types_of(&e).intersection(types).count() as f64 / types.len() as f64
                };
                let s_neighbour = if props.is_empty() { 0.0 } else { 1.0 };
                let s_t2t = match idx {
                    Some(i) if config.inverted => (size - i as f64) / size,
                    Some(i) => i as f64 / size,
                    None => 0.0,
                };
                let mut best: Option<f64> = None;
                for p in &props {
                    let s = self.property_label(p).and_then(|l| self.sim(l, &q.text)).unwrap_or(0.0);
                    best = Some(best.map_or(s, |b: f64| b.max(s)));
                }
                let s_property = best.unwrap_or(0.0);
                let s_final = w[0] * s_type + w[1] * s_neighbour + w[2] * s_t2t + w[3] * s_property;
                OracleScore {
                    entity: e,
                    s_type,
                    s_neighbour,
                    s_t2t,
                    s_property,
                    s_final,
                }
            })
            .collect();
        scores.sort_by(|a, b| b.s_final.partial_cmp(&a.s_final).unwrap().then(a.entity.cmp(&b.entity)));
        scores
    }
}

pub fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// (question id, gold answers) from a generic JSONL dataset.
pub fn load_gold(path: &Path) -> Vec<(String, BTreeSet<String>)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|line| {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let gold = v["gold_answers"]
                .as_array()
                .unwrap()
                .iter()
                .map(|g| g.as_str().unwrap().to_owned())
                .collect();
            (v["question_id"].as_str().unwrap().to_owned(), gold)
        })
        .collect()
}

/// (questions whose T meets a gold type, model candidates whose types meet
/// a gold type, model candidates).
pub fn type_eval_counts(
    kg: &OracleKg,
    questions: &[OracleQuestion],
    gold: &[(String, BTreeSet<String>)],
    config: &OracleConfig,
) -> (usize, usize, usize) {
    let (mut q_hit, mut c_hit, mut c_all) = (0, 0, 0);
    for (id, answers) in gold {
        let q = questions.iter().find(|q| &q.id == id).unwrap();
        let gold_types: BTreeSet<String> = answers.iter().flat_map(|a| kg.types_of(a)).collect();
        let (linked, _) = kg.link(&q.candidates);
        let t = kg.answer_types(&linked, config);
        if t.iter().any(|x| gold_types.contains(x)) {
            q_hit += 1;
        }
        for (e, _) in &linked {
            c_all += 1;
            if kg.types_of(e).iter().any(|x| gold_types.contains(x)) {
                c_hit += 1;
            }
        }
    }
    (q_hit, c_hit, c_all)
}

pub fn hits(
    kg: &OracleKg,
    questions: &[OracleQuestion],
    gold: &[(String, BTreeSet<String>)],
    config: &OracleConfig,
) -> usize {
    gold.iter()
        .filter(|(id, answers)| {
            let q = questions.iter().find(|q| &q.id == id).unwrap();
            let (_, ranking) = kg.rank(q, config);
            ranking.first().is_some_and(|top| answers.contains(&top.entity))
        })
        .count()
}

/// Library-side loading of a fixture directory.
pub struct Loaded {
    pub snapshot: act_core::kg_store::KgSnapshot,
    pub table: act_core::embeddings::EmbeddingTable,
    pub candidates: Vec<act_core::candidates_io::CandidateList>,
    pub entities: BTreeMap<String, act_core::candidates_io::QuestionEntities>,
}

pub fn load_library(dir: &Path) -> Loaded {
    use act_core::kg_store::{ingest_snapshot, IngestConfig};
    let (snapshot, _) = ingest_snapshot(
        &dir.join("triples.tsv"),
        &dir.join("labels.tsv"),
        &IngestConfig::default(),
    )
    .unwrap();
    Loaded {
        snapshot,
        table: act_core::embeddings::load_embeddings(&dir.join("embeddings.tsv")).unwrap(),
        candidates: act_core::candidates_io::load_candidates(&dir.join("candidates.jsonl")).unwrap(),
        entities: act_core::candidates_io::load_question_entities(&dir.join("entities.jsonl")).unwrap(),
    }
}

impl Loaded {
    pub fn run(&self, config: &act_core::pipeline::PipelineConfig) -> act_core::pipeline::RunOutput {
        act_core::pipeline::Pipeline::new(&self.snapshot, &self.table, config)
            .unwrap()
            .run(&self.candidates, &self.entities)
            .unwrap()
    }
}
