//! Triples/labels file parsing and the canonical snapshot document.

use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EntityId, KgSnapshot, PropertyId, SnapshotBuilder, Triple};
use crate::error::{Error, Result};

const SNAPSHOT_FORMAT: &str = "act-kg-snapshot";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub instance_of: PropertyId,
    /// Count and skip malformed lines instead of aborting.
    pub skip_malformed: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            instance_of: PropertyId::new("P31").expect("static id"),
            skip_malformed: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub triples: usize,
    pub duplicate_triples: usize,
    pub label_rows: usize,
    pub skipped_lines: usize,
}

pub fn ingest_snapshot(
    triples_path: &Path,
    labels_path: &Path,
    config: &IngestConfig,
) -> Result<(KgSnapshot, IngestStats)> {
    let mut builder = KgSnapshot::builder(config.instance_of.clone());
    let mut stats = IngestStats::default();
    let triples = open(triples_path)?;
    parse_triples(triples, triples_path, config, &mut builder, &mut stats)?;
    let labels = open(labels_path)?;
    parse_labels(labels, labels_path, config, &mut builder, &mut stats)?;
    stats.duplicate_triples = builder.duplicate_triples();
    let snapshot = builder.build();
    stats.triples = snapshot.triple_count();
    Ok((snapshot, stats))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Feeds `subject<TAB>property<TAB>object` lines into `builder`.
pub fn parse_triples(
    reader: impl BufRead,
    path: &Path,
    config: &IngestConfig,
    builder: &mut SnapshotBuilder,
    stats: &mut IngestStats,
) -> Result<()> {
    for_each_line(reader, path, config, stats, |line| {
        let fields: Vec<&str> = line.split('\t').collect();
        let [s, p, o] = fields.as_slice() else {
            return Err(format!("expected 3 tab-separated fields, found {}", fields.len()));
        };
        let triple = Triple::parse(s, p, o).map_err(|e| e.to_string())?;
        builder.add_triple(triple);
        Ok(())
    })
}

/// Feeds `entity<TAB>kind<TAB>language<TAB>text` lines into `builder`.
pub fn parse_labels(
    reader: impl BufRead,
    path: &Path,
    config: &IngestConfig,
    builder: &mut SnapshotBuilder,
    stats: &mut IngestStats,
) -> Result<()> {
    let mut rows = 0;
    for_each_line(reader, path, config, stats, |line| {
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        let [id, kind, lang, text] = fields.as_slice() else {
            return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
        };
        if text.trim().is_empty() {
            return Err("empty label text".to_owned());
        }
        match *kind {
            "label" => {
                if lang.is_empty() || *lang == "-" {
                    return Err("primary labels need a language code".to_owned());
                }
                let entity = EntityId::new(*id).map_err(|e| e.to_string())?;
                builder.add_label(entity, *lang, *text);
            }
            "alias" => {
                let entity = EntityId::new(*id).map_err(|e| e.to_string())?;
                builder.add_alias(entity, *text);
            }
            "plabel" => {
                let property = PropertyId::new(*id).map_err(|e| e.to_string())?;
                builder.add_property_label(property, *text);
            }
            other => return Err(format!("unknown label kind {other:?}")),
        }
        rows += 1;
        Ok(())
    })?;
    stats.label_rows += rows;
    Ok(())
}

fn for_each_line(
    reader: impl BufRead,
    path: &Path,
    config: &IngestConfig,
    stats: &mut IngestStats,
    mut handle: impl FnMut(&str) -> std::result::Result<(), String>,
) -> Result<()> {
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if let Err(reason) = handle(line) {
            if config.skip_malformed {
                log::warn!("{}:{line_no}: skipped: {reason}", path.display());
                stats.skipped_lines += 1;
            } else {
                return Err(Error::malformed(path, line_no, reason));
            }
        }
    }
    Ok(())
}

/// Canonical serialized form of a snapshot. Every list is sorted, so two
/// snapshots built from the same facts serialize to identical bytes.
#[derive(Debug, Serialize, Deserialize)]
struct SnapshotDocument {
    format: String,
    version: u32,
    instance_of: PropertyId,
    triples: Vec<(EntityId, PropertyId, EntityId)>,
    labels: Vec<(EntityId, String, String)>,
    aliases: Vec<(EntityId, String)>,
    property_labels: Vec<(PropertyId, String)>,
}

impl KgSnapshot {
    pub fn to_json(&self) -> String {
        let doc = SnapshotDocument {
            format: SNAPSHOT_FORMAT.to_owned(),
            version: SNAPSHOT_VERSION,
            instance_of: self.instance_of.clone(),
            triples: self.triples().map(|t| (t.subject, t.property, t.object)).collect(),
            labels: self
                .labels()
                .map(|(e, lang, text)| (e.clone(), lang.to_owned(), text.to_owned()))
                .collect(),
            aliases: self.all_aliases().map(|(e, a)| (e.clone(), a.to_owned())).collect(),
            property_labels: self.property_labels().map(|(p, l)| (p.clone(), l.to_owned())).collect(),
        };
        serde_json::to_string(&doc).expect("snapshot document serializes")
    }

    pub fn from_json(json: &str) -> std::result::Result<Self, serde_json::Error> {
        let doc: SnapshotDocument = serde_json::from_str(json)?;
        if doc.format != SNAPSHOT_FORMAT || doc.version != SNAPSHOT_VERSION {
            return Err(serde::de::Error::custom(format!(
                "unsupported snapshot format {:?} v{}",
                doc.format, doc.version
            )));
        }
        let mut b = KgSnapshot::builder(doc.instance_of);
        for (s, p, o) in doc.triples {
            b.add_triple(Triple::new(s, p, o));
        }
        for (e, lang, text) in doc.labels {
            b.add_label(e, lang, text);
        }
        for (e, alias) in doc.aliases {
            b.add_alias(e, alias);
        }
        for (p, label) in doc.property_labels {
            b.add_property_label(p, label);
        }
        Ok(b.build())
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut json = self.to_json();
        json.push('\n');
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// Reads a snapshot written by [`KgSnapshot::write_to`].
pub fn read_snapshot(path: &Path) -> Result<KgSnapshot> {
    let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    KgSnapshot::from_json(&json).map_err(|e| Error::malformed(path, e.line(), e.to_string()))
}
