//! Seeded random ranking instances, described as raw facts so that the
//! oracle and the library each build their own view of them.

use std::collections::BTreeSet;

use rand::Rng;

use act_core::candidates_io::CandidateList;
use act_core::embeddings::EmbeddingTable;
use act_core::kg_store::{EntityId, KgSnapshot, PropertyId, Triple};
use act_core::linking::{expand_with_neighbors, link_candidates, CandidatePool};
use act_core::scoring::{rank_candidates, RankedAnswer, ScoreMask, ScoreWeights, ScoringConfig, T2tMode};
use act_core::typing::AnswerTypeSet;

use super::{OracleConfig, OracleKg, OracleQuestion, OracleScore};

#[derive(Debug, Clone)]
pub struct Instance {
    pub kg: OracleKg,
    pub question: OracleQuestion,
    pub types: BTreeSet<String>,
    pub config: OracleConfig,
}

fn vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().any(|x| *x != 0.0) {
            return v;
        }
    }
}

fn surface(rng: &mut impl Rng, name: &str) -> String {
    match rng.random_range(0..6) {
        0 => name.to_uppercase(),
        1 => format!("{name}."),
        2 => format!("  {name} "),
        _ => name.to_owned(),
    }
}

pub fn instance(rng: &mut impl Rng) -> Instance {
    let mut kg = OracleKg::default();
    let n_entities = rng.random_range(3..25);
    let n_types = rng.random_range(1..7);
    let n_props = rng.random_range(1..7);
    let dim = rng.random_range(2..9);
    let entity = |i: usize| format!("Q{}", i + 1);
    let type_id = |i: usize| format!("Q{}", 1000 + i);
    let prop = |i: usize| format!("P{}", i + 1);

    // Fewer names than entities, so some labels are ambiguous.
    let names: Vec<String> = (0..(n_entities * 4 / 5).max(1)).map(|i| format!("name {i}")).collect();
    for i in 0..n_entities {
        for t in 0..n_types {
            if rng.random_bool(0.3) {
                kg.triples.push((entity(i), "P31".into(), type_id(t)));
            }
        }
        if rng.random_bool(0.85) {
            let name = names[rng.random_range(0..names.len())].clone();
            kg.labels.push((entity(i), "en".into(), name));
        }
        if rng.random_bool(0.15) {
            let name = names[rng.random_range(0..names.len())].clone();
            kg.labels.push((entity(i), "de".into(), name));
        }
        if rng.random_bool(0.25) {
            let name = names[rng.random_range(0..names.len())].clone();
            kg.aliases.push((entity(i), name));
        }
    }
    for t in 0..n_types {
        if rng.random_bool(0.8) {
            kg.labels.push((type_id(t), "en".into(), format!("type {t}")));
        }
    }
    for p in 0..n_props {
        if rng.random_bool(0.85) {
            kg.property_labels.push((prop(p), format!("property {p}")));
            if rng.random_bool(0.85) {
                kg.vectors.push((format!("property {p}"), vector(rng, dim)));
            }
        }
    }
    kg.property_labels.push(("P31".into(), "instance of".into()));
    kg.vectors.push(("instance of".into(), vector(rng, dim)));

    let question_text = "what is it?".to_owned();
    if rng.random_bool(0.95) {
        kg.vectors.push((question_text.clone(), vector(rng, dim)));
    }

    let mut question_entities = vec!["Q0".to_owned()];
    if rng.random_bool(0.3) {
        question_entities.push(entity(rng.random_range(0..n_entities)));
    }
    for qe in question_entities.clone() {
        for _ in 0..rng.random_range(0..9) {
            let o = entity(rng.random_range(0..n_entities));
            kg.triples.push((qe.clone(), prop(rng.random_range(0..n_props)), o));
        }
        if rng.random_bool(0.3) {
            kg.triples
                .push((qe, "P31".into(), type_id(rng.random_range(0..n_types))));
        }
    }
    for _ in 0..rng.random_range(0..10) {
        let s = entity(rng.random_range(0..n_entities));
        let o = entity(rng.random_range(0..n_entities));
        kg.triples.push((s, prop(rng.random_range(0..n_props)), o));
    }
    let mut seen = BTreeSet::new();
    kg.triples.retain(|t| seen.insert(t.clone()));

    let mut candidates = Vec::new();
    for _ in 0..rng.random_range(1..16) {
        if rng.random_bool(0.15) {
            candidates.push(format!("unknown {}", rng.random_range(0..5)));
        } else {
            let name = &names[rng.random_range(0..names.len())];
            candidates.push(surface(rng, name));
        }
    }

    let mut types: BTreeSet<String> = (0..n_types).filter(|_| rng.random_bool(0.4)).map(type_id).collect();
    if rng.random_bool(0.1) {
        types.insert("Q99999".into());
    }

    let config = OracleConfig {
        weights: [0; 4].map(|_| rng.random_range(0.0..2.0)),
        inverted: rng.random_bool(0.8),
        ..OracleConfig::default()
    };

    Instance {
        kg,
        question: OracleQuestion {
            id: "random".into(),
            text: question_text,
            candidates,
            entities: question_entities,
        },
        types,
        config,
    }
}

fn e(s: &str) -> EntityId {
    EntityId::new(s).unwrap()
}

impl Instance {
    pub fn oracle(&self) -> Vec<OracleScore> {
        self.kg.rank_given(&self.question, &self.types, &self.config)
    }

    pub fn weights(&self) -> ScoreWeights {
        let [a, b, c, d] = self.config.weights;
        ScoreWeights {
            type_weight: a,
            neighbour: b,
            t2t: c,
            property: d,
        }
    }

    /// The library's view of the instance.
    pub fn build(&self) -> Built {
        let mut builder = KgSnapshot::builder(PropertyId::new("P31").unwrap());
        for (s, p, o) in &self.kg.triples {
            builder.add_triple(Triple::parse(s, p, o).unwrap());
        }
        for (id, lang, text) in &self.kg.labels {
            builder.add_label(e(id), lang.as_str(), text.as_str());
        }
        for (id, text) in &self.kg.aliases {
            builder.add_alias(e(id), text.as_str());
        }
        for (p, text) in &self.kg.property_labels {
            builder.add_property_label(PropertyId::new(p.as_str()).unwrap(), text.as_str());
        }
        let q = &self.question;
        let mut answer_types = AnswerTypeSet::empty(q.id.as_str());
        answer_types.types = self.types.iter().map(|s| e(s)).collect();
        Built {
            snapshot: builder.build(),
            table: EmbeddingTable::from_rows(self.kg.vectors.iter().cloned()).unwrap(),
            clist: CandidateList::new(q.id.as_str(), q.text.as_str(), q.candidates.iter().cloned()),
            question_entities: q.entities.iter().map(|s| e(s)).collect(),
            answer_types,
        }
    }

    pub fn scoring(&self, weights: ScoreWeights, mask: ScoreMask) -> ScoringConfig {
        ScoringConfig {
            weights,
            mask,
            t2t_mode: if self.config.inverted {
                T2tMode::Inverted
            } else {
                T2tMode::Literal
            },
        }
    }

    /// Ranks the full pool through the library with the given weights.
    pub fn library(&self, weights: ScoreWeights) -> RankedAnswer {
        let built = self.build();
        let pool = built.full_pool();
        built.rank(&pool, &self.scoring(weights, ScoreMask::all()))
    }
}

pub struct Built {
    pub snapshot: KgSnapshot,
    pub table: EmbeddingTable,
    pub clist: CandidateList,
    pub question_entities: BTreeSet<EntityId>,
    pub answer_types: AnswerTypeSet,
}

impl Built {
    pub fn lm_pool(&self) -> CandidatePool {
        let linked = link_candidates(&self.snapshot, &self.clist).linked;
        CandidatePool::from_linked(self.clist.question_id.as_str(), linked)
    }

    pub fn full_pool(&self) -> CandidatePool {
        expand_with_neighbors(&self.snapshot, self.lm_pool(), &self.question_entities)
    }

    pub fn rank(&self, pool: &CandidatePool, config: &ScoringConfig) -> RankedAnswer {
        rank_candidates(
            pool,
            &self.answer_types,
            &self.clist,
            &self.snapshot,
            &self.table,
            config,
        )
    }
}

/// First disagreement between a library ranking and the oracle, if any.
pub fn compare(answer: &RankedAnswer, oracle: &[OracleScore]) -> Option<String> {
    if answer.ranking.len() != oracle.len() {
        return Some(format!("pool size {} vs oracle {}", answer.ranking.len(), oracle.len()));
    }
    for (i, (got, want)) in answer.ranking.iter().zip(oracle).enumerate() {
        let same = got.entity.as_str() == want.entity
            && got.s_type == want.s_type
            && got.s_neighbour == want.s_neighbour
            && got.s_t2t == want.s_t2t
            && got.s_property == want.s_property
            && got.s_final == want.s_final;
        if !same {
            return Some(format!("rank {i}: library {got:?} vs oracle {want:?}"));
        }
    }
    None
}
