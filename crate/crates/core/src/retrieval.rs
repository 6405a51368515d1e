//! Similarity search over the annotated corpus and keyword suggestion.
//!
//! A query descriptor is compared against every candidate passing the
//! [`CorpusFilter`]; the `top_k` nearest are returned, each flagged as accepted
//! when its distance is within the preset threshold. Accepted results then
//! vote for their keywords with weight `1 / (1 + distance)`.

use crate::geometry::{self, DistanceGrid, GeometryError, NormKind, PointSet};
use crate::image::FeatureDescriptor;
use crate::store::{now_seconds, AnnotationRecord, Candidate, CorpusFilter, Store, StoreError};
use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("query descriptor fingerprint {found} does not match corpus fingerprint {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("no corpus image matches specialty '{specialty}'{}", describe_filter(.class_name, .sub_class))]
    EmptyCorpus {
        specialty: String,
        class_name: Option<String>,
        sub_class: Option<String>,
    },
    #[error("class '{class_name}' of specialty '{specialty}' has {count} image(s); leave-one-out needs at least 2")]
    InsufficientData {
        specialty: String,
        class_name: String,
        count: usize,
    },
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn describe_filter(class_name: &Option<String>, sub_class: &Option<String>) -> String {
    match (class_name, sub_class) {
        (None, None) => String::new(),
        (Some(c), None) => format!(", class '{c}'"),
        (None, Some(s)) => format!(", sub-class '{s}'"),
        (Some(c), Some(s)) => format!(", class '{c}', sub-class '{s}'"),
    }
}

impl RetrievalError {
    pub fn code(&self) -> &'static str {
        match self {
            RetrievalError::FingerprintMismatch { .. } => "FINGERPRINT_MISMATCH",
            RetrievalError::EmptyCorpus { .. } => "EMPTY_CORPUS",
            RetrievalError::InsufficientData { .. } => "INSUFFICIENT_DATA",
            RetrievalError::InvalidConfig(_) => "INVALID_CONFIG",
            RetrievalError::Store(e) => e.code(),
            RetrievalError::Geometry(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceVariant {
    Hausdorff,
    #[default]
    ModifiedHausdorff,
}

impl DistanceVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceVariant::Hausdorff => "hausdorff",
            DistanceVariant::ModifiedHausdorff => "modified_hausdorff",
        }
    }
}

impl fmt::Display for DistanceVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "h" | "hausdorff" => Ok(DistanceVariant::Hausdorff),
            "mh" | "modified_hausdorff" | "modified-hausdorff" => Ok(DistanceVariant::ModifiedHausdorff),
            other => Err(format!("unknown distance variant '{other}' (expected mh or h)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub variant: DistanceVariant,
    pub norm: NormKind,
    pub top_k: usize,
    /// Largest distance, in normalised-image pixels, at which a candidate counts as a match.
    pub acceptance_threshold: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            variant: DistanceVariant::ModifiedHausdorff,
            norm: NormKind::Euclidean,
            top_k: 5,
            acceptance_threshold: 8.0,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.top_k == 0 {
            return Err(RetrievalError::InvalidConfig("top_k must be at least 1".into()));
        }
        if !(self.acceptance_threshold >= 0.0 && self.acceptance_threshold.is_finite()) {
            return Err(RetrievalError::InvalidConfig(
                "acceptance_threshold must be a finite non-negative number".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub image_id: String,
    pub distance: f64,
    pub accepted: bool,
    pub annotations: Vec<AnnotationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordVote {
    pub keyword: String,
    pub score: f64,
    pub supporters: Vec<String>,
}

/// Ranked results plus the keyword votes they produce; the wire form shared
/// by the HTTP API and the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub results: Vec<QueryResult>,
    pub votes: Vec<KeywordVote>,
}

/// Directed distance from `from` to `to`, read off `to_grid` when one is given.
fn directed_distance(
    from: &PointSet,
    to: &PointSet,
    to_grid: Option<&DistanceGrid>,
    variant: DistanceVariant,
    norm: NormKind,
) -> Result<f64, GeometryError> {
    match (variant, to_grid) {
        (DistanceVariant::Hausdorff, Some(g)) => geometry::directed_hausdorff_fast(from, g),
        (DistanceVariant::Hausdorff, None) => geometry::directed_hausdorff(from, to, norm),
        (DistanceVariant::ModifiedHausdorff, Some(g)) => geometry::modified_directed_hausdorff_fast(from, g),
        (DistanceVariant::ModifiedHausdorff, None) => geometry::modified_directed_hausdorff(from, to, norm),
    }
}

/// Scores candidates against one query, reusing a distance grid of the query.
///
/// The grid and exhaustive routes give bit-identical values, so the choice
/// between them per direction is purely a cost decision.
struct Scorer<'q> {
    query: &'q PointSet,
    grid: DistanceGrid,
    variant: DistanceVariant,
    norm: NormKind,
}

impl<'q> Scorer<'q> {
    fn new(
        query: &'q FeatureDescriptor,
        candidates: &[Candidate<'_>],
        config: &RetrievalConfig,
    ) -> Result<Self, GeometryError> {
        let mut width = query.source_width.max(query.points.extent().0);
        let mut height = query.source_height.max(query.points.extent().1);
        for c in candidates {
            let d = &c.entry.descriptor;
            let (w, h) = d.points.extent();
            width = width.max(d.source_width).max(w);
            height = height.max(d.source_height).max(h);
        }
        let grid = DistanceGrid::build(&query.points, width, height, config.norm)?;
        Ok(Scorer {
            query: &query.points,
            grid,
            variant: config.variant,
            norm: config.norm,
        })
    }

    fn distance(&self, candidate: &PointSet) -> Result<f64, GeometryError> {
        let cells = self.grid.width() as usize * self.grid.height() as usize;
        let to_candidate = if self.query.len().saturating_mul(candidate.len()) > 4 * cells {
            let grid = DistanceGrid::build(candidate, self.grid.width(), self.grid.height(), self.norm)?;
            directed_distance(self.query, candidate, Some(&grid), self.variant, self.norm)?
        } else {
            directed_distance(self.query, candidate, None, self.variant, self.norm)?
        };
        let to_query = directed_distance(candidate, self.query, Some(&self.grid), self.variant, self.norm)?;
        Ok(to_candidate.max(to_query))
    }
}

/// Distance between two descriptors under the configured variant and norm.
pub fn descriptor_distance(
    a: &FeatureDescriptor,
    b: &FeatureDescriptor,
    config: &RetrievalConfig,
) -> Result<f64, RetrievalError> {
    let (pa, pb) = (&a.points, &b.points);
    Ok(match config.variant {
        DistanceVariant::Hausdorff => geometry::hausdorff(pa, pb, config.norm)?,
        DistanceVariant::ModifiedHausdorff => geometry::modified_hausdorff(pa, pb, config.norm)?,
    })
}

pub fn query_similar(
    query: &FeatureDescriptor,
    filter: &CorpusFilter,
    store: &Store,
    config: &RetrievalConfig,
) -> Result<Vec<QueryResult>, RetrievalError> {
    rank_candidates(query, filter, store, config, None)
}

fn rank_candidates(
    query: &FeatureDescriptor,
    filter: &CorpusFilter,
    store: &Store,
    config: &RetrievalConfig,
    exclude: Option<&str>,
) -> Result<Vec<QueryResult>, RetrievalError> {
    config.validate()?;
    let expected = store.fingerprint();
    if query.params_fingerprint != expected {
        return Err(RetrievalError::FingerprintMismatch {
            expected,
            found: query.params_fingerprint.clone(),
        });
    }
    let candidates: Vec<Candidate<'_>> = store
        .query_candidates(filter)
        .into_iter()
        .filter(|c| Some(c.entry.image_id.as_str()) != exclude)
        .collect();
    if candidates.is_empty() {
        return Err(RetrievalError::EmptyCorpus {
            specialty: filter.specialty.clone(),
            class_name: filter.class_name.clone(),
            sub_class: filter.sub_class.clone(),
        });
    }
    if let Some(c) = candidates
        .iter()
        .find(|c| c.entry.descriptor.params_fingerprint != expected)
    {
        return Err(RetrievalError::FingerprintMismatch {
            expected,
            found: c.entry.descriptor.params_fingerprint.clone(),
        });
    }

    let scorer = Scorer::new(query, &candidates, config)?;
    let mut scored = candidates
        .par_iter()
        .map(|c| scorer.distance(&c.entry.descriptor.points).map(|d| (d, *c)))
        .collect::<Result<Vec<_>, _>>()?;
    scored.sort_by(|(da, a), (db, b)| {
        da.total_cmp(db)
            .then_with(|| a.entry.image_id.cmp(&b.entry.image_id))
    });
    scored.truncate(config.top_k);

    Ok(scored
        .into_iter()
        .map(|(distance, c)| QueryResult {
            image_id: c.entry.image_id.clone(),
            distance,
            accepted: distance <= config.acceptance_threshold,
            annotations: c.records.to_vec(),
        })
        .collect())
}

/// Keyword suggestions from the accepted results, highest score first.
///
/// Each accepted image supports each of its distinct keywords once, however
/// many of its records repeat the keyword.
pub fn vote_keywords(results: &[QueryResult]) -> Vec<KeywordVote> {
    let mut votes: Vec<KeywordVote> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for result in results.iter().filter(|r| r.accepted) {
        let weight = 1.0 / (1.0 + result.distance);
        let mut seen: Vec<&str> = Vec::new();
        for keyword in result.annotations.iter().flat_map(|r| &r.keywords) {
            let keyword = keyword.trim();
            if keyword.is_empty() || seen.contains(&keyword) {
                continue;
            }
            seen.push(keyword);
            let slot = *index.entry(keyword.to_owned()).or_insert_with(|| {
                votes.push(KeywordVote {
                    keyword: keyword.to_owned(),
                    score: 0.0,
                    supporters: Vec::new(),
                });
                votes.len() - 1
            });
            votes[slot].score += weight;
            votes[slot].supporters.push(result.image_id.clone());
        }
    }
    votes.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.keyword.cmp(&b.keyword)));
    votes
}

/// [`query_similar`] followed by [`vote_keywords`].
pub fn search(
    query: &FeatureDescriptor,
    filter: &CorpusFilter,
    store: &Store,
    config: &RetrievalConfig,
) -> Result<QueryResponse, RetrievalError> {
    let results = query_similar(query, filter, store, config)?;
    let votes = vote_keywords(&results);
    Ok(QueryResponse { results, votes })
}

/// Copies the taxonomy and keywords of `selected` onto `new_image_id`.
///
/// The selected image's most recent record is the source. `edited_keywords`,
/// when given, replaces its keywords verbatim.
pub fn propagate_annotation(
    store: &mut Store,
    selected: &str,
    new_image_id: &str,
    physician_id: &str,
    edited_keywords: Option<Vec<String>>,
) -> Result<AnnotationRecord, RetrievalError> {
    propagate_annotation_at(store, selected, new_image_id, physician_id, edited_keywords, now_seconds())
}

pub fn propagate_annotation_at(
    store: &mut Store,
    selected: &str,
    new_image_id: &str,
    physician_id: &str,
    edited_keywords: Option<Vec<String>>,
    created_at: DateTime<Utc>,
) -> Result<AnnotationRecord, RetrievalError> {
    let source = store
        .annotations_for(selected)?
        .last()
        .cloned()
        .ok_or_else(|| StoreError::InvalidRecord {
            field: "selected_image_id",
            reason: format!("image '{selected}' has no annotations to propagate"),
        })?;
    if store.image(new_image_id).is_none() {
        return Err(StoreError::UnknownImage(new_image_id.to_owned()).into());
    }
    let record = AnnotationRecord {
        image_id: new_image_id.to_owned(),
        specialty: source.specialty,
        class_name: source.class_name,
        sub_class: source.sub_class,
        keywords: edited_keywords.unwrap_or(source.keywords),
        physician_id: physician_id.to_owned(),
        created_at,
    };
    Ok(store.add_annotation(record)?.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub specialty: String,
    pub class_name: String,
    pub correct: usize,
    pub total: usize,
    /// Percentage in `[0, 100]`.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub variant: DistanceVariant,
    pub norm: NormKind,
    pub top_k: usize,
    pub acceptance_threshold: f64,
    pub classes: Vec<ClassAccuracy>,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    /// Accepted results summed over every held-out query.
    pub accepted_results: usize,
}

fn class_key(r: &AnnotationRecord) -> (String, String) {
    (r.specialty.trim().to_lowercase(), r.class_name.trim().to_lowercase())
}

fn percent(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

/// Leave-one-out evaluation of annotation transfer.
///
/// Each annotated image is held out and queried against the rest of its
/// specialty. The query counts as correct when the top-ranked result is
/// accepted and shares the held-out image's `(class, sub-class)`, taken from
/// its first record. Accuracy is reported per `(specialty, class)` and overall.
pub fn evaluate_leave_one_out(store: &Store, config: &RetrievalConfig) -> Result<EvaluationReport, RetrievalError> {
    config.validate()?;
    let mut held_out: Vec<(&str, &AnnotationRecord)> = Vec::new();
    for entry in store.images() {
        if let Some(first) = store.annotations_for(&entry.image_id)?.first() {
            held_out.push((&entry.image_id, first));
        }
    }

    // case-folded (specialty, class) → tally, in key order
    let mut tallies: BTreeMap<(String, String), ClassAccuracy> = BTreeMap::new();
    for (_, r) in &held_out {
        tallies
            .entry(class_key(r))
            .or_insert_with(|| ClassAccuracy {
                specialty: r.specialty.trim().to_owned(),
                class_name: r.class_name.trim().to_owned(),
                correct: 0,
                total: 0,
                accuracy: 0.0,
            })
            .total += 1;
    }
    if let Some(c) = tallies.values().find(|c| c.total < 2) {
        return Err(RetrievalError::InsufficientData {
            specialty: c.specialty.clone(),
            class_name: c.class_name.clone(),
            count: c.total,
        });
    }

    let outcomes = held_out
        .par_iter()
        .map(|(id, reference)| {
            let query = &store.image(id).expect("held-out image is registered").descriptor;
            let filter = CorpusFilter::specialty(reference.specialty.clone());
            let results = rank_candidates(query, &filter, store, config, Some(id))?;
            let correct = results
                .first()
                .is_some_and(|top| top.accepted && top.annotations.iter().any(|r| r.same_class(reference)));
            let accepted = results.iter().filter(|r| r.accepted).count();
            Ok((correct, accepted))
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;

    let mut accepted_results = 0;
    for ((_, reference), (correct, accepted)) in held_out.iter().zip(&outcomes) {
        let tally = tallies.get_mut(&class_key(reference)).expect("tallied above");
        tally.correct += usize::from(*correct);
        accepted_results += accepted;
    }
    let mut classes: Vec<ClassAccuracy> = tallies.into_values().collect();
    for c in &mut classes {
        c.accuracy = percent(c.correct, c.total);
    }
    let correct = classes.iter().map(|c| c.correct).sum();
    let total = classes.iter().map(|c| c.total).sum();
    Ok(EvaluationReport {
        variant: config.variant,
        norm: config.norm,
        top_k: config.top_k,
        acceptance_threshold: config.acceptance_threshold,
        classes,
        correct,
        total,
        accuracy: percent(correct, total),
        accepted_results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::image::ExtractionParams;
    use crate::store::{content_hash, ImageEntry};
    use chrono::TimeZone;

    fn descriptor(points: &[(u32, u32)]) -> FeatureDescriptor {
        FeatureDescriptor {
            points: points.iter().map(|&(x, y)| Point::new(x, y)).collect(),
            source_width: 32,
            source_height: 32,
            params_fingerprint: ExtractionParams::default().fingerprint(),
        }
    }

    fn add(store: &mut Store, id: &str, points: &[(u32, u32)], class: &str, keywords: &[&str]) {
        store
            .register_image(ImageEntry {
                image_id: id.into(),
                descriptor: descriptor(points),
                source_path: id.into(),
                content_hash: content_hash(id.as_bytes()),
            })
            .unwrap();
        store
            .add_annotation(AnnotationRecord {
                image_id: id.into(),
                specialty: "Digestion".into(),
                class_name: class.into(),
                sub_class: "X".into(),
                keywords: keywords.iter().map(|k| k.to_string()).collect(),
                physician_id: "dr".into(),
                created_at: Utc.timestamp_opt(1_600_000_000, 0).unwrap(),
            })
            .unwrap();
    }

    fn result(id: &str, distance: f64, accepted: bool, keywords: &[&[&str]]) -> QueryResult {
        QueryResult {
            image_id: id.into(),
            distance,
            accepted,
            annotations: keywords
                .iter()
                .enumerate()
                .map(|(i, ks)| AnnotationRecord {
                    image_id: id.into(),
                    specialty: "S".into(),
                    class_name: "C".into(),
                    sub_class: "X".into(),
                    keywords: ks.iter().map(|k| k.to_string()).collect(),
                    physician_id: format!("dr{i}"),
                    created_at: Utc.timestamp_opt(0, 0).unwrap(),
                })
                .collect(),
        }
    }

    #[test]
    fn identity_ranks_first_and_ties_break_by_id() {
        let mut store = Store::default();
        add(&mut store, "c", &[(5, 5), (6, 5)], "A", &["k"]);
        add(&mut store, "b", &[(5, 9), (6, 9)], "A", &["k"]);
        add(&mut store, "a", &[(5, 1), (6, 1)], "A", &["k"]);
        let query = descriptor(&[(5, 5), (6, 5)]);
        let results = query_similar(&query, &CorpusFilter::specialty("digestion"), &store, &RetrievalConfig::default()).unwrap();
        assert_eq!(results[0].image_id, "c");
        assert_eq!(results[0].distance, 0.0);
        assert!(results[0].accepted);
        // a and b are both 4 rows away
        assert_eq!(results[1].distance, results[2].distance);
        assert_eq!(results[1].image_id, "a");
        assert_eq!(results[2].image_id, "b");
    }

    #[test]
    fn top_k_and_threshold_gating() {
        let mut store = Store::default();
        add(&mut store, "near", &[(1, 1)], "A", &["k"]);
        add(&mut store, "far", &[(30, 30)], "A", &["k"]);
        let query = descriptor(&[(1, 2)]);
        let config = RetrievalConfig { top_k: 1, ..Default::default() };
        let results = query_similar(&query, &CorpusFilter::specialty("Digestion"), &store, &config).unwrap();
        assert_eq!(results.len(), 1);
        let config = RetrievalConfig { acceptance_threshold: 0.5, ..Default::default() };
        let results = query_similar(&query, &CorpusFilter::specialty("Digestion"), &store, &config).unwrap();
        assert!(results.iter().all(|r| !r.accepted));
        assert!(vote_keywords(&results).is_empty());
    }

    #[test]
    fn empty_corpus_and_fingerprint_errors() {
        let mut store = Store::default();
        add(&mut store, "a", &[(1, 1)], "A", &["k"]);
        let query = descriptor(&[(1, 1)]);
        let err = query_similar(&query, &CorpusFilter::specialty("Neuro"), &store, &RetrievalConfig::default()).unwrap_err();
        assert_eq!(err.code(), "EMPTY_CORPUS");
        let mut foreign = query.clone();
        foreign.params_fingerprint = "0000".into();
        let err = query_similar(&foreign, &CorpusFilter::specialty("Digestion"), &store, &RetrievalConfig::default()).unwrap_err();
        assert_eq!(err.code(), "FINGERPRINT_MISMATCH");
        let bad = RetrievalConfig { top_k: 0, ..Default::default() };
        assert_eq!(
            query_similar(&query, &CorpusFilter::specialty("Digestion"), &store, &bad).unwrap_err().code(),
            "INVALID_CONFIG"
        );
    }

    #[test]
    fn scorer_matches_direct_distance() {
        let mut store = Store::default();
        let many: Vec<(u32, u32)> = (0..30).flat_map(|x| (0..30).map(move |y| (x, y))).filter(|(x, y)| (x * 7 + y * 3) % 5 == 0).collect();
        add(&mut store, "dense", &many, "A", &["k"]);
        add(&mut store, "sparse", &[(3, 4), (20, 20)], "A", &["k"]);
        let query = descriptor(&many[..many.len() / 2]);
        for variant in [DistanceVariant::Hausdorff, DistanceVariant::ModifiedHausdorff] {
            let config = RetrievalConfig { variant, top_k: 10, ..Default::default() };
            let results = query_similar(&query, &CorpusFilter::specialty("Digestion"), &store, &config).unwrap();
            for r in results {
                let direct = descriptor_distance(&query, &store.image(&r.image_id).unwrap().descriptor, &config).unwrap();
                assert_eq!(r.distance.to_bits(), direct.to_bits());
            }
        }
    }

    #[test]
    fn voting_examples() {
        let results = [result("a", 0.0, true, &[&["k1", "k2"]])];
        let votes = vote_keywords(&results);
        assert_eq!(votes.len(), 2);
        assert!(votes.iter().all(|v| v.score == 1.0));
        assert_eq!(votes[0].keyword, "k1");

        let results = [result("a", 0.0, true, &[&["k1"]]), result("b", 1.0, true, &[&["k1", "k2"]])];
        let votes = vote_keywords(&results);
        assert_eq!(votes[0].keyword, "k1");
        assert_eq!(votes[0].score, 1.5);
        assert_eq!(votes[0].supporters, ["a", "b"]);
        assert_eq!(votes[1].keyword, "k2");
        assert_eq!(votes[1].score, 0.5);

        let results = [result("a", 0.0, false, &[&["k1"]])];
        assert!(vote_keywords(&results).is_empty());
    }

    #[test]
    fn repeated_keyword_across_physicians_counts_once() {
        let results = [result("a", 1.0, true, &[&["k1", "k2"], &["k1"]])];
        let votes = vote_keywords(&results);
        assert_eq!(votes[0].keyword, "k1");
        assert_eq!(votes[0].score, 0.5);
        assert_eq!(votes[0].supporters, ["a"]);
    }

    #[test]
    fn propagation() {
        let mut store = Store::default();
        add(&mut store, "ABD003.jpg", &[(1, 1)], "ABDOMINAL", &["Diarrhea for three days. Abdominal pain."]);
        store
            .register_image(ImageEntry {
                image_id: "new.pgm".into(),
                descriptor: descriptor(&[(2, 2)]),
                source_path: "new.pgm".into(),
                content_hash: content_hash(b"new"),
            })
            .unwrap();
        let t = Utc.timestamp_opt(1_700_000_000, 0).unwrap();
        let r = propagate_annotation_at(&mut store, "ABD003.jpg", "new.pgm", "dr-x", None, t).unwrap();
        assert_eq!(r.keywords, ["Diarrhea for three days. Abdominal pain."]);
        assert_eq!(r.class_name, "ABDOMINAL");
        assert_eq!(r.physician_id, "dr-x");

        let edited = vec!["edited".to_string()];
        let r = propagate_annotation_at(&mut store, "ABD003.jpg", "new.pgm", "dr-y", Some(edited.clone()), t).unwrap();
        assert_eq!(r.keywords, edited);

        let err = propagate_annotation(&mut store, "missing", "new.pgm", "dr", None).unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_IMAGE");
        let err = propagate_annotation(&mut store, "ABD003.jpg", "missing", "dr", None).unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_IMAGE");
        let err = propagate_annotation(&mut store, "ABD003.jpg", "new.pgm", "dr", Some(vec![])).unwrap_err();
        assert_eq!(err.code(), "INVALID_RECORD");
    }

    #[test]
    fn leave_one_out_with_duplicates_is_perfect() {
        let mut store = Store::default();
        for (i, class) in ["A", "B", "C"].iter().enumerate() {
            let pts = [(i as u32 * 9, 3), (i as u32 * 9 + 2, 7)];
            add(&mut store, &format!("{class}1"), &pts, class, &["k"]);
            add(&mut store, &format!("{class}2"), &pts, class, &["k"]);
        }
        let report = evaluate_leave_one_out(&store, &RetrievalConfig::default()).unwrap();
        assert_eq!(report.total, 6);
        assert_eq!(report.correct, 6);
        assert_eq!(report.accuracy, 100.0);
        assert_eq!(report.classes.len(), 3);
        assert!(report.classes.iter().all(|c| c.total == 2 && c.accuracy == 100.0));
    }

    #[test]
    fn leave_one_out_needs_two_per_class() {
        let mut store = Store::default();
        add(&mut store, "a1", &[(1, 1)], "A", &["k"]);
        add(&mut store, "a2", &[(1, 2)], "A", &["k"]);
        add(&mut store, "lonely", &[(9, 9)], "B", &["k"]);
        match evaluate_leave_one_out(&store, &RetrievalConfig::default()).unwrap_err() {
            RetrievalError::InsufficientData { class_name, count, .. } => {
                assert_eq!(class_name, "B");
                assert_eq!(count, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn variant_parsing_and_wire_names() {
        assert_eq!("mh".parse::<DistanceVariant>().unwrap(), DistanceVariant::ModifiedHausdorff);
        assert_eq!("H".parse::<DistanceVariant>().unwrap(), DistanceVariant::Hausdorff);
        assert!("x".parse::<DistanceVariant>().is_err());
        assert_eq!(serde_json::to_string(&DistanceVariant::ModifiedHausdorff).unwrap(), "\"modified_hausdorff\"");
    }
}
