//! Building a [`KgSnapshot`] from a Wikidata-style SPARQL endpoint.
//!
//! Only the facts a run needs are fetched: label lookups for every
//! candidate string, forward edges of the question entities, `instance_of`
//! types and labels of everything reached. Responses are cached on disk by
//! query hash, so a second run over the same inputs sends no requests.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::candidates_io::{CandidateList, QuestionEntities};
use crate::error::{Error, Result};
use crate::kg_store::{EntityId, KgSnapshot, PropertyId, Triple, DEFAULT_LANGUAGE};

pub const ENTITY_PREFIX: &str = "http://www.wikidata.org/entity/";
pub const DIRECT_PREFIX: &str = "http://www.wikidata.org/prop/direct/";
const BATCH: usize = 50;
const MAX_ATTEMPTS: u32 = 4;

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub cache_dir: PathBuf,
    /// Upper bound on requests per second. Must be positive.
    pub qps: f64,
    pub timeout: Duration,
    pub language: String,
    pub instance_of: PropertyId,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            endpoint: endpoint.into(),
            cache_dir: cache_dir.into(),
            qps: 5.0,
            timeout: Duration::from_secs(60),
            language: DEFAULT_LANGUAGE.to_owned(),
            instance_of: PropertyId::new("P31").expect("static id"),
        }
    }
}

/// One result row: variable name to bound value.
pub type Row = BTreeMap<String, String>;

#[derive(Deserialize)]
struct SparqlResponse {
    results: SparqlResults,
}

#[derive(Deserialize)]
struct SparqlResults {
    bindings: Vec<BTreeMap<String, SparqlValue>>,
}

#[derive(Deserialize)]
struct SparqlValue {
    value: String,
}

pub struct RemoteKg {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    next_slot: Mutex<Instant>,
    cache_lock: Mutex<()>,
    requests: AtomicUsize,
}

impl RemoteKg {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if !(config.qps.is_finite() && config.qps > 0.0) {
            return Err(Error::Config(format!("qps must be positive, got {}", config.qps)));
        }
        fs::create_dir_all(&config.cache_dir).map_err(|e| Error::io(&config.cache_dir, e))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .user_agent(concat!("act/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| Error::Remote(e.to_string()))?;
        Ok(Self {
            config,
            client,
            next_slot: Mutex::new(Instant::now()),
            cache_lock: Mutex::new(()),
            requests: AtomicUsize::new(0),
        })
    }

    /// HTTP requests actually sent, cache hits excluded.
    pub fn requests_sent(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn cache_path(&self, query: &str) -> PathBuf {
        let digest = Sha256::digest(query.as_bytes());
        self.config.cache_dir.join(format!("{}.json", hex::encode(digest)))
    }

    /// Runs a SELECT query, reading from and writing to the cache.
    pub fn select(&self, query: &str) -> Result<Vec<Row>> {
        let path = self.cache_path(query);
        if let Ok(text) = fs::read_to_string(&path) {
            match serde_json::from_str::<Vec<Row>>(&text) {
                Ok(rows) => return Ok(rows),
                Err(e) => log::warn!("{}: ignoring corrupt cache entry: {e}", path.display()),
            }
        }
        let rows = self.fetch(query)?;
        self.store(&path, &rows)?;
        Ok(rows)
    }

    fn store(&self, path: &Path, rows: &[Row]) -> Result<()> {
        let _guard = self.cache_lock.lock().unwrap_or_else(|p| p.into_inner());
        let tmp = path.with_extension("tmp");
        let body = serde_json::to_string(rows).expect("rows serialize");
        fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    fn throttle(&self) {
        let interval = Duration::from_secs_f64(1.0 / self.config.qps);
        let mut slot = self.next_slot.lock().unwrap_or_else(|p| p.into_inner());
        let now = Instant::now();
        if *slot > now {
            thread::sleep(*slot - now);
        }
        *slot = Instant::now() + interval;
    }

    fn fetch(&self, query: &str) -> Result<Vec<Row>> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.throttle();
            self.requests.fetch_add(1, Ordering::Relaxed);
            let outcome = self
                .client
                .post(&self.config.endpoint)
                .header(reqwest::header::ACCEPT, "application/sparql-results+json")
                .form(&[("query", query)])
                .send();
            let retryable = match outcome {
                Ok(resp) if resp.status().is_success() => {
                    let text = resp.text().map_err(|e| Error::Remote(e.to_string()))?;
                    let parsed: SparqlResponse =
                        serde_json::from_str(&text).map_err(|e| Error::Remote(format!("bad SPARQL JSON: {e}")))?;
                    return Ok(parsed
                        .results
                        .bindings
                        .into_iter()
                        .map(|b| b.into_iter().map(|(k, v)| (k, v.value)).collect())
                        .collect());
                }
                Ok(resp) => {
                    let status = resp.status();
                    if status.as_u16() == 429 || status.is_server_error() {
                        format!("HTTP {status}")
                    } else {
                        return Err(Error::Remote(format!("HTTP {status}")));
                    }
                }
                Err(e) if e.is_timeout() || e.is_connect() => e.to_string(),
                Err(e) => return Err(Error::Remote(e.to_string())),
            };
            if attempt >= MAX_ATTEMPTS {
                return Err(Error::Remote(format!(
                    "giving up after {attempt} attempts: {retryable}"
                )));
            }
            log::warn!("retrying SPARQL query ({retryable})");
            thread::sleep(Duration::from_millis(250 << attempt));
        }
    }

    /// Snapshot holding everything needed to rank `candidates`.
    pub fn materialize(
        &self,
        candidates: &[CandidateList],
        entities: &BTreeMap<String, QuestionEntities>,
    ) -> Result<KgSnapshot> {
        let lang = &self.config.language;
        let p31 = &self.config.instance_of;
        let mut builder = KgSnapshot::builder(p31.clone());

        let surfaces: BTreeSet<&str> = candidates
            .iter()
            .flat_map(|c| c.candidates.iter().map(String::as_str))
            .collect();
        let mut reached = BTreeSet::new();
        for surface in surfaces {
            for row in self.select(&label_search_query(surface, lang))? {
                if let Some(item) = row.get("item").and_then(|v| entity_of(v)) {
                    builder.add_alias(item.clone(), surface);
                    reached.insert(item);
                }
            }
        }

        let question_entities: BTreeSet<EntityId> =
            entities.values().flat_map(|q| q.entities.iter().cloned()).collect();
        let mut properties = BTreeSet::new();
        for entity in &question_entities {
            reached.insert(entity.clone());
            for row in self.select(&forward_edges_query(entity))? {
                let (Some(p), Some(o)) = (
                    row.get("p").and_then(|v| property_of(v)),
                    row.get("o").and_then(|v| entity_of(v)),
                ) else {
                    continue;
                };
                builder.add_triple(Triple::new(entity.clone(), p.clone(), o.clone()));
                properties.insert(p);
                reached.insert(o);
            }
        }

        let mut labelled = reached.clone();
        for chunk in chunks(&reached) {
            for row in self.select(&types_query(chunk, p31))? {
                let (Some(item), Some(ty)) = (
                    row.get("item").and_then(|v| entity_of(v)),
                    row.get("type").and_then(|v| entity_of(v)),
                ) else {
                    continue;
                };
                builder.add_triple(Triple::new(item, p31.clone(), ty.clone()));
                labelled.insert(ty);
            }
        }

        for chunk in chunks(&labelled) {
            for row in self.select(&labels_query(chunk, lang))? {
                if let (Some(item), Some(label)) = (row.get("item").and_then(|v| entity_of(v)), row.get("label")) {
                    builder.add_label(item, lang.as_str(), label.as_str());
                }
            }
        }

        for chunk in chunks(&properties) {
            for row in self.select(&labels_query(chunk, lang))? {
                if let (Some(prop), Some(label)) =
                    (row.get("item").and_then(|v| property_entity_of(v)), row.get("label"))
                {
                    builder.add_property_label(prop, label.as_str());
                }
            }
        }

        Ok(builder.build())
    }
}

fn chunks<T>(set: &BTreeSet<T>) -> impl Iterator<Item = Vec<&T>> {
    let all: Vec<&T> = set.iter().collect();
    let owned: Vec<Vec<&T>> = all.chunks(BATCH).map(<[&T]>::to_vec).collect();
    owned.into_iter()
}

fn entity_of(uri: &str) -> Option<EntityId> {
    let local = uri.strip_prefix(ENTITY_PREFIX)?;
    local.starts_with('Q').then(|| EntityId::new(local).ok()).flatten()
}

fn property_of(uri: &str) -> Option<PropertyId> {
    PropertyId::new(uri.strip_prefix(DIRECT_PREFIX)?).ok()
}

fn property_entity_of(uri: &str) -> Option<PropertyId> {
    let local = uri.strip_prefix(ENTITY_PREFIX)?;
    local.starts_with('P').then(|| PropertyId::new(local).ok()).flatten()
}

/// SPARQL string literal with the characters that need escaping escaped.
pub fn sparql_literal(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for ch in text.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn label_search_query(surface: &str, lang: &str) -> String {
    let lit = format!("{}@{lang}", sparql_literal(surface));
    format!(
        "PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>\n\
         PREFIX skos: <http://www.w3.org/2004/02/skos/core#>\n\
         SELECT DISTINCT ?item WHERE {{ {{ ?item rdfs:label {lit} }} UNION {{ ?item skos:altLabel {lit} }} }}"
    )
}

pub fn forward_edges_query(entity: &EntityId) -> String {
    format!(
        "SELECT ?p ?o WHERE {{ <{ENTITY_PREFIX}{entity}> ?p ?o . \
         FILTER(STRSTARTS(STR(?p), \"{DIRECT_PREFIX}\")) \
         FILTER(STRSTARTS(STR(?o), \"{ENTITY_PREFIX}Q\")) }}"
    )
}

fn values(ids: &[&impl std::fmt::Display]) -> String {
    ids.iter()
        .map(|id| format!("<{ENTITY_PREFIX}{id}>"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn types_query(ids: Vec<&EntityId>, instance_of: &PropertyId) -> String {
    format!(
        "SELECT ?item ?type WHERE {{ VALUES ?item {{ {} }} ?item <{DIRECT_PREFIX}{instance_of}> ?type }}",
        values(&ids)
    )
}

pub fn labels_query<T: std::fmt::Display>(ids: Vec<&T>, lang: &str) -> String {
    format!(
        "PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>\n\
         SELECT ?item ?label WHERE {{ VALUES ?item {{ {} }} ?item rdfs:label ?label . \
         FILTER(LANG(?label) = \"{lang}\") }}",
        values(&ids)
    )
}
