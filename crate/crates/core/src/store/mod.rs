//! The annotation corpus: registered images with their feature descriptors,
//! and the annotation records physicians attach to them.
//!
//! An image may carry any number of records (several physicians, or the same
//! physician at different times). Images are keyed by id and deduplicated by
//! the hash of their original file bytes.

mod persist;

pub use persist::{load_corpus, save_corpus, CorpusLayout, FORMAT_VERSION};

use crate::image::{ExtractionParams, FeatureDescriptor};
use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown image '{0}'")]
    UnknownImage(String),
    #[error("invalid record: {field}: {reason}")]
    InvalidRecord { field: &'static str, reason: String },
    #[error("image id '{image_id}' is already registered with different content")]
    IdConflict { image_id: String },
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error("{location}: {field}: {message}")]
    Schema {
        location: String,
        field: String,
        message: String,
    },
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::UnknownImage(_) => "UNKNOWN_IMAGE",
            StoreError::InvalidRecord { .. } => "INVALID_RECORD",
            StoreError::IdConflict { .. } => "ID_CONFLICT",
            StoreError::Io { .. } => "IO_ERROR",
            StoreError::Schema { .. } => "SCHEMA_ERROR",
        }
    }

    fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        StoreError::InvalidRecord {
            field,
            reason: reason.into(),
        }
    }
}

/// One row of the annotation table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub specialty: String,
    pub class_name: String,
    pub sub_class: String,
    pub keywords: Vec<String>,
    pub physician_id: String,
    #[serde(with = "rfc3339_seconds")]
    pub created_at: DateTime<Utc>,
}

impl AnnotationRecord {
    /// Field rules enforced by [`Store::add_annotation`].
    pub fn validate(&self) -> Result<(), StoreError> {
        validate_image_id(&self.image_id)?;
        if self.specialty.trim().is_empty() {
            return Err(StoreError::invalid("specialty", "must not be blank"));
        }
        if self.physician_id.trim().is_empty() {
            return Err(StoreError::invalid("physician_id", "must not be blank"));
        }
        if self.keywords.is_empty() {
            return Err(StoreError::invalid("keywords", "at least one keyword is required"));
        }
        if let Some(i) = self.keywords.iter().position(|k| k.trim().is_empty()) {
            return Err(StoreError::invalid("keywords", format!("keyword {i} is blank")));
        }
        for (field, value) in [
            ("specialty", &self.specialty),
            ("class_name", &self.class_name),
            ("sub_class", &self.sub_class),
            ("physician_id", &self.physician_id),
        ] {
            if value.contains(['\n', '\r']) {
                return Err(StoreError::invalid(field, "must be a single line"));
            }
        }
        Ok(())
    }

    fn matches(&self, filter: &CorpusFilter) -> bool {
        same_label(&self.specialty, &filter.specialty)
            && filter
                .class_name
                .as_deref()
                .is_none_or(|c| same_label(&self.class_name, c))
            && filter
                .sub_class
                .as_deref()
                .is_none_or(|s| same_label(&self.sub_class, s))
    }

    /// Whether this record and `other` name the same `(class, sub-class)`.
    pub fn same_class(&self, other: &AnnotationRecord) -> bool {
        same_label(&self.class_name, &other.class_name) && same_label(&self.sub_class, &other.sub_class)
    }
}

/// Current UTC time truncated to whole seconds.
pub fn now_seconds() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(0)
}

/// Splits a comma-separated keyword list into trimmed, non-empty phrases.
pub fn split_keywords(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Taxonomy labels compare case-insensitively after trimming.
pub fn same_label(a: &str, b: &str) -> bool {
    label_key(a) == label_key(b)
}

fn label_key(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Hex SHA-256 of raw file bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Id given to images that arrive without a usable name.
pub fn fresh_image_id(content_hash: &str) -> String {
    format!("img-{}", &content_hash[..content_hash.len().min(12)])
}

/// Image ids double as file names in the corpus directory.
pub fn validate_image_id(id: &str) -> Result<(), StoreError> {
    if id.is_empty() || id.len() > 200 {
        return Err(StoreError::invalid("image_id", "must be 1 to 200 characters"));
    }
    if id.starts_with('.') {
        return Err(StoreError::invalid("image_id", "must not start with '.'"));
    }
    if let Some(c) = id
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-')))
    {
        return Err(StoreError::invalid(
            "image_id",
            format!("character {c:?} not allowed (use A-Z a-z 0-9 . _ -)"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageEntry {
    pub image_id: String,
    pub descriptor: FeatureDescriptor,
    pub source_path: String,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusFilter {
    pub specialty: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_class: Option<String>,
}

impl CorpusFilter {
    pub fn specialty(specialty: impl Into<String>) -> Self {
        CorpusFilter {
            specialty: specialty.into(),
            class_name: None,
            sub_class: None,
        }
    }

    pub fn with_class(mut self, class_name: impl Into<String>) -> Self {
        self.class_name = Some(class_name.into());
        self
    }

    pub fn with_sub_class(mut self, sub_class: impl Into<String>) -> Self {
        self.sub_class = Some(sub_class.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Registration {
    Added,
    Duplicate(String),
}

/// A registered image together with every record attached to it.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub entry: &'a ImageEntry,
    pub records: &'a [AnnotationRecord],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialtyNode {
    pub name: String,
    pub classes: Vec<ClassNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassNode {
    pub name: String,
    pub sub_classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store {
    extraction: ExtractionParams,
    images: BTreeMap<String, ImageEntry>,
    /// records grouped per image, each group in insertion order
    annotations: BTreeMap<String, Vec<AnnotationRecord>>,
    /// global insertion order as (image_id, index within its group)
    record_order: Vec<(String, usize)>,
    by_hash: HashMap<String, String>,
}

impl Default for Store {
    fn default() -> Self {
        Store::new(ExtractionParams::default())
    }
}

impl Store {
    pub fn new(extraction: ExtractionParams) -> Self {
        Store {
            extraction,
            images: BTreeMap::new(),
            annotations: BTreeMap::new(),
            record_order: Vec::new(),
            by_hash: HashMap::new(),
        }
    }

    /// Extraction configuration every descriptor in this corpus was built with.
    pub fn extraction(&self) -> &ExtractionParams {
        &self.extraction
    }

    pub fn fingerprint(&self) -> String {
        self.extraction.fingerprint()
    }

    pub fn image_count(&self) -> usize {
        self.images.len()
    }

    pub fn record_count(&self) -> usize {
        self.record_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageEntry> {
        self.images.get(image_id)
    }

    /// Images in id order.
    pub fn images(&self) -> impl Iterator<Item = &ImageEntry> {
        self.images.values()
    }

    /// Records in the order they were added.
    pub fn records(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.record_order
            .iter()
            .map(|(id, i)| &self.annotations[id][*i])
    }

    pub fn find_by_hash(&self, hash: &str) -> Option<&ImageEntry> {
        self.by_hash.get(hash).and_then(|id| self.images.get(id))
    }

    pub fn register_image(&mut self, entry: ImageEntry) -> Result<Registration, StoreError> {
        validate_image_id(&entry.image_id)?;
        if entry.descriptor.points.is_empty() {
            return Err(StoreError::invalid("descriptor", "feature point set is empty"));
        }
        if let Some(existing) = self.by_hash.get(&entry.content_hash) {
            return Ok(Registration::Duplicate(existing.clone()));
        }
        if self.images.contains_key(&entry.image_id) {
            return Err(StoreError::IdConflict {
                image_id: entry.image_id,
            });
        }
        self.by_hash
            .insert(entry.content_hash.clone(), entry.image_id.clone());
        self.images.insert(entry.image_id.clone(), entry);
        Ok(Registration::Added)
    }

    pub fn add_annotation(&mut self, mut record: AnnotationRecord) -> Result<&AnnotationRecord, StoreError> {
        record.created_at = record.created_at.trunc_subsecs(0);
        record.validate()?;
        if !self.images.contains_key(&record.image_id) {
            return Err(StoreError::UnknownImage(record.image_id));
        }
        let group = self.annotations.entry(record.image_id.clone()).or_default();
        if group
            .iter()
            .any(|r| r.physician_id == record.physician_id && r.created_at == record.created_at)
        {
            return Err(StoreError::invalid(
                "created_at",
                format!(
                    "'{}' already annotated this image at {}",
                    record.physician_id,
                    rfc3339_seconds::format(&record.created_at)
                ),
            ));
        }
        self.record_order.push((record.image_id.clone(), group.len()));
        group.push(record);
        Ok(group.last().expect("just pushed"))
    }

    pub fn annotations_for(&self, image_id: &str) -> Result<&[AnnotationRecord], StoreError> {
        if !self.images.contains_key(image_id) {
            return Err(StoreError::UnknownImage(image_id.to_owned()));
        }
        Ok(self
            .annotations
            .get(image_id)
            .map(Vec::as_slice)
            .unwrap_or(&[]))
    }

    /// Images with at least one record matching every set field of `filter`,
    /// in image id order. Each candidate carries all of its records.
    pub fn query_candidates(&self, filter: &CorpusFilter) -> Vec<Candidate<'_>> {
        self.annotations
            .iter()
            .filter(|(_, records)| records.iter().any(|r| r.matches(filter)))
            .map(|(id, records)| Candidate {
                entry: &self.images[id],
                records,
            })
            .collect()
    }

    /// Specialty → class → sub-class hierarchy of every record, sorted
    /// case-insensitively. Each label is shown as first recorded.
    pub fn specialty_tree(&self) -> Vec<SpecialtyNode> {
        type Classes = BTreeMap<String, (String, BTreeMap<String, String>)>;
        let mut tree: BTreeMap<String, (String, Classes)> = BTreeMap::new();
        for r in self.records() {
            let (_, classes) = tree
                .entry(label_key(&r.specialty))
                .or_insert_with(|| (r.specialty.trim().to_owned(), BTreeMap::new()));
            let (_, subs) = classes
                .entry(label_key(&r.class_name))
                .or_insert_with(|| (r.class_name.trim().to_owned(), BTreeMap::new()));
            subs.entry(label_key(&r.sub_class))
                .or_insert_with(|| r.sub_class.trim().to_owned());
        }
        tree.into_values()
            .map(|(name, classes)| SpecialtyNode {
                name,
                classes: classes
                    .into_values()
                    .map(|(name, subs)| ClassNode {
                        name,
                        sub_classes: subs.into_values().collect(),
                    })
                    .collect(),
            })
            .collect()
    }

    /// Copy of this store without `image_id` and its records.
    pub fn without_image(&self, image_id: &str) -> Store {
        let mut out = Store::new(self.extraction);
        for entry in self.images.values().filter(|e| e.image_id != image_id) {
            out.by_hash
                .insert(entry.content_hash.clone(), entry.image_id.clone());
            out.images.insert(entry.image_id.clone(), entry.clone());
        }
        for record in self.records().filter(|r| r.image_id != image_id) {
            let group = out.annotations.entry(record.image_id.clone()).or_default();
            out.record_order.push((record.image_id.clone(), group.len()));
            group.push(record.clone());
        }
        out
    }
}

pub(crate) mod rfc3339_seconds {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn format(t: &DateTime<Utc>) -> String {
        t.to_rfc3339_opts(SecondsFormat::Secs, true)
    }

    pub fn parse(s: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
        DateTime::parse_from_rfc3339(s).map(|t| t.with_timezone(&Utc))
    }

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}
