//! On-disk corpus layout.
//!
//! ```text
//! <root>/corpus.hannot          index: header line, then one JSON object per line
//! <root>/descriptors/<id>.pts   "width height", then one "x y" pair per line, (y, x) order
//! <root>/blobs/<sha256>         original image bytes, content-addressed
//! ```
//!
//! The index header is `{"format":"hannot/1","extraction":{...}}`. Image lines
//! come next, sorted by id, followed by annotation lines in insertion order.
//! Keys are written in a fixed order, so saving the same store twice yields
//! identical bytes.

use super::{rfc3339_seconds, AnnotationRecord, ImageEntry, Store, StoreError};
use crate::geometry::{Point, PointSet};
use crate::image::{ExtractionParams, FeatureDescriptor};
use serde::Serialize;
use serde_json::{Map, Value};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: &str = "hannot/1";
const INDEX_FILE: &str = "corpus.hannot";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusLayout {
    root: PathBuf,
}

impl CorpusLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CorpusLayout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index_path(&self) -> PathBuf {
        self.root.join(INDEX_FILE)
    }

    pub fn descriptor_path(&self, image_id: &str) -> PathBuf {
        self.root.join("descriptors").join(format!("{image_id}.pts"))
    }

    pub fn blob_path(&self, content_hash: &str) -> PathBuf {
        self.root.join("blobs").join(content_hash)
    }

    pub fn exists(&self) -> bool {
        self.index_path().is_file()
    }

    /// Stores raw image bytes under their content hash; a no-op when present.
    pub fn write_blob(&self, content_hash: &str, bytes: &[u8]) -> Result<PathBuf, StoreError> {
        let path = self.blob_path(content_hash);
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        Ok(path)
    }

    pub fn read_blob(&self, content_hash: &str) -> Result<Vec<u8>, StoreError> {
        let path = self.blob_path(content_hash);
        fs::read(&path).map_err(|e| io_error(&path, e))
    }
}

fn io_error(path: &Path, e: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

#[derive(Serialize)]
struct HeaderLine<'a> {
    format: &'a str,
    extraction: &'a ExtractionParams,
}

#[derive(Serialize)]
struct ImageLine<'a> {
    kind: &'static str,
    image_id: &'a str,
    source_path: &'a str,
    content_hash: &'a str,
    params_fingerprint: &'a str,
    point_count: usize,
}

#[derive(Serialize)]
struct AnnotationLine<'a> {
    kind: &'static str,
    #[serde(flatten)]
    record: &'a AnnotationRecord,
}

pub fn encode_points(descriptor: &FeatureDescriptor) -> String {
    let mut out = format!("{} {}\n", descriptor.source_width, descriptor.source_height);
    for p in descriptor.points.iter() {
        let _ = writeln!(out, "{} {}", p.x, p.y);
    }
    out
}

pub fn save_corpus(store: &Store, root: impl AsRef<Path>) -> Result<(), StoreError> {
    let layout = CorpusLayout::new(root.as_ref());
    fs::create_dir_all(layout.root()).map_err(|e| io_error(layout.root(), e))?;

    let mut index = String::new();
    index.push_str(&json_line(&HeaderLine {
        format: FORMAT_VERSION,
        extraction: store.extraction(),
    }));
    for entry in store.images() {
        let pts_path = layout.descriptor_path(&entry.image_id);
        let pts = encode_points(&entry.descriptor);
        if fs::read(&pts_path).ok().as_deref() != Some(pts.as_bytes()) {
            write_atomic(&pts_path, pts.as_bytes())?;
        }
        index.push_str(&json_line(&ImageLine {
            kind: "image",
            image_id: &entry.image_id,
            source_path: &entry.source_path,
            content_hash: &entry.content_hash,
            params_fingerprint: &entry.descriptor.params_fingerprint,
            point_count: entry.descriptor.points.len(),
        }));
    }
    for record in store.records() {
        index.push_str(&json_line(&AnnotationLine {
            kind: "annotation",
            record,
        }));
    }
    write_atomic(&layout.index_path(), index.as_bytes())
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("corpus lines serialize");
    s.push('\n');
    s
}

struct LineFields<'a> {
    location: String,
    map: &'a Map<String, Value>,
}

impl<'a> LineFields<'a> {
    fn error(&self, field: &str, message: impl Into<String>) -> StoreError {
        StoreError::Schema {
            location: self.location.clone(),
            field: field.to_owned(),
            message: message.into(),
        }
    }

    fn value(&self, field: &str) -> Result<&'a Value, StoreError> {
        self.map
            .get(field)
            .ok_or_else(|| self.error(field, "missing field"))
    }

    fn string(&self, field: &str) -> Result<String, StoreError> {
        self.value(field)?
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| self.error(field, "expected a string"))
    }

    fn count(&self, field: &str) -> Result<u64, StoreError> {
        self.value(field)?
            .as_u64()
            .ok_or_else(|| self.error(field, "expected a non-negative integer"))
    }

    fn strings(&self, field: &str) -> Result<Vec<String>, StoreError> {
        self.value(field)?
            .as_array()
            .ok_or_else(|| self.error(field, "expected an array of strings"))?
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| self.error(field, "expected an array of strings"))
            })
            .collect()
    }
}

fn parse_points(path: &Path, text: &str, fingerprint: String) -> Result<FeatureDescriptor, StoreError> {
    let schema = |line: usize, field: &str, message: &str| StoreError::Schema {
        location: format!("{}:{line}", path.display()),
        field: field.to_owned(),
        message: message.to_owned(),
    };
    let pair = |line: usize, s: &str, field: &str| -> Result<(u32, u32), StoreError> {
        let mut it = s.split_ascii_whitespace().map(str::parse::<u32>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
            _ => Err(schema(line, field, "expected two non-negative integers")),
        }
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (width, height) = match lines.next() {
        Some((n, l)) => pair(n, l, "dimensions")?,
        None => return Err(schema(1, "dimensions", "empty descriptor file")),
    };
    let mut points = Vec::new();
    for (n, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let (x, y) = pair(n, l, "point")?;
        if x >= width || y >= height {
            return Err(schema(n, "point", "outside the descriptor dimensions"));
        }
        points.push(Point::new(x, y));
    }
    let points = PointSet::from_sorted(points)
        .ok_or_else(|| schema(0, "point", "points not strictly sorted by (y, x)"))?;
    if points.is_empty() {
        return Err(schema(2, "point", "descriptor has no points"));
    }
    Ok(FeatureDescriptor {
        points,
        source_width: width,
        source_height: height,
        params_fingerprint: fingerprint,
    })
}

pub fn load_corpus(root: impl AsRef<Path>) -> Result<Store, StoreError> {
    let layout = CorpusLayout::new(root.as_ref());
    let index_path = layout.index_path();
    let text = fs::read_to_string(&index_path).map_err(|e| io_error(&index_path, e))?;

    let mut store: Option<Store> = None;
    for (i, line) in text.lines().enumerate() {
        let location = format!("{}:{}", index_path.display(), i + 1);
        let value: Value = serde_json::from_str(line).map_err(|e| StoreError::Schema {
            location: location.clone(),
            field: "line".into(),
            message: format!("not a JSON object: {e}"),
        })?;
        let map = value.as_object().ok_or_else(|| StoreError::Schema {
            location: location.clone(),
            field: "line".into(),
            message: "not a JSON object".into(),
        })?;
        let fields = LineFields { location, map };

        let Some(store) = store.as_mut() else {
            let format = fields.string("format")?;
            if format != FORMAT_VERSION {
                return Err(fields.error("format", format!("unsupported corpus format '{format}'")));
            }
            let extraction: ExtractionParams = serde_json::from_value(fields.value("extraction")?.clone())
                .map_err(|e| fields.error("extraction", e.to_string()))?;
            extraction
                .validate()
                .map_err(|e| fields.error("extraction", e.to_string()))?;
            store = Some(Store::new(extraction));
            continue;
        };

        match fields.string("kind")?.as_str() {
            "image" => {
                let image_id = fields.string("image_id")?;
                let source_path = fields.string("source_path")?;
                let content_hash = fields.string("content_hash")?;
                let fingerprint = fields.string("params_fingerprint")?;
                let point_count = fields.count("point_count")?;
                let pts_path = layout.descriptor_path(&image_id);
                let pts = fs::read_to_string(&pts_path).map_err(|e| io_error(&pts_path, e))?;
                let descriptor = parse_points(&pts_path, &pts, fingerprint)?;
                if descriptor.points.len() as u64 != point_count {
                    return Err(fields.error(
                        "point_count",
                        format!("descriptor file holds {} points", descriptor.points.len()),
                    ));
                }
                let entry = ImageEntry {
                    image_id,
                    descriptor,
                    source_path,
                    content_hash,
                };
                match store.register_image(entry) {
                    Ok(super::Registration::Added) => {}
                    Ok(super::Registration::Duplicate(prior)) => {
                        return Err(fields.error("content_hash", format!("duplicates image '{prior}'")))
                    }
                    Err(e) => return Err(fields.error("image_id", e.to_string())),
                }
            }
            "annotation" => {
                let created = fields.string("created_at")?;
                let record = AnnotationRecord {
                    image_id: fields.string("image_id")?,
                    specialty: fields.string("specialty")?,
                    class_name: fields.string("class_name")?,
                    sub_class: fields.string("sub_class")?,
                    keywords: fields.strings("keywords")?,
                    physician_id: fields.string("physician_id")?,
                    created_at: rfc3339_seconds::parse(&created)
                        .map_err(|e| fields.error("created_at", e.to_string()))?,
                };
                store.add_annotation(record).map_err(|e| match e {
                    StoreError::InvalidRecord { field, reason } => fields.error(field, reason),
                    other => fields.error("image_id", other.to_string()),
                })?;
            }
            other => return Err(fields.error("kind", format!("unknown record kind '{other}'"))),
        }
    }
    store.ok_or_else(|| StoreError::Schema {
        location: format!("{}:1", index_path.display()),
        field: "format".into(),
        message: "missing header line".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::content_hash;
    use chrono::{TimeZone, Utc};

    fn sample_store() -> Store {
        let mut store = Store::default();
        for (i, id) in ["b.pgm", "a.pgm", "c.pgm"].into_iter().enumerate() {
            store
                .register_image(ImageEntry {
                    image_id: id.into(),
                    descriptor: FeatureDescriptor {
                        points: PointSet::new(vec![Point::new(i as u32, 0), Point::new(3, 4)]),
                        source_width: 10,
                        source_height: 6,
                        params_fingerprint: store.fingerprint(),
                    },
                    source_path: format!("in/{id}"),
                    content_hash: content_hash(id.as_bytes()),
                })
                .unwrap();
            store
                .add_annotation(AnnotationRecord {
                    image_id: id.into(),
                    specialty: "Digestion".into(),
                    class_name: "ABDOMINAL".into(),
                    sub_class: "ABSCESS".into(),
                    keywords: vec!["Diarrhea \"for\" three days".into(), "défense".into()],
                    physician_id: format!("dr-{i}"),
                    created_at: Utc.timestamp_opt(1_700_000_000 + i as i64, 0).unwrap(),
                })
                .unwrap();
        }
        store
    }

    #[test]
    fn empty_store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        save_corpus(&Store::default(), dir.path()).unwrap();
        assert_eq!(load_corpus(dir.path()).unwrap(), Store::default());
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let store = sample_store();
        save_corpus(&store, dir.path()).unwrap();
        let first = fs::read(CorpusLayout::new(dir.path()).index_path()).unwrap();
        let loaded = load_corpus(dir.path()).unwrap();
        assert_eq!(loaded, store);
        save_corpus(&loaded, dir.path()).unwrap();
        let second = fs::read(CorpusLayout::new(dir.path()).index_path()).unwrap();
        assert_eq!(first, second);

        let text = String::from_utf8(first).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with(r#"{"format":"hannot/1","#));
        assert!(lines[1].starts_with(r#"{"kind":"image","image_id":"a.pgm""#));
        assert!(lines[4].starts_with(r#"{"kind":"annotation","image_id":"b.pgm","specialty":"Digestion","class_name""#));
        assert!(lines[4].ends_with(r#""physician_id":"dr-0","created_at":"2023-11-14T22:13:20Z"}"#));
        let pts = fs::read_to_string(CorpusLayout::new(dir.path()).descriptor_path("a.pgm")).unwrap();
        assert_eq!(pts, "10 6\n1 0\n3 4\n");
    }

    #[test]
    fn missing_specialty_names_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        save_corpus(&sample_store(), dir.path()).unwrap();
        let index = CorpusLayout::new(dir.path()).index_path();
        let text = fs::read_to_string(&index).unwrap();
        let broken: Vec<String> = text
            .lines()
            .enumerate()
            .map(|(i, l)| if i == 5 { l.replace(r#""specialty":"Digestion","#, "") } else { l.to_owned() })
            .collect();
        fs::write(&index, broken.join("\n")).unwrap();
        match load_corpus(dir.path()).unwrap_err() {
            StoreError::Schema { location, field, .. } => {
                assert!(location.ends_with(":6"), "{location}");
                assert_eq!(field, "specialty");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_inputs_are_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let index = CorpusLayout::new(dir.path()).index_path();
        assert_eq!(load_corpus(dir.path()).unwrap_err().code(), "IO_ERROR");
        for bad in [
            "",
            "{\"format\":\"hannot/2\",\"extraction\":{}}",
            "not json",
            "{\"format\":\"hannot/1\",\"extraction\":{\"max_dimension\":256,\"edge_threshold\":\"otsu\",\"max_points\":4096}}\n{\"kind\":\"mystery\"}",
            "{\"format\":\"hannot/1\",\"extraction\":{\"max_dimension\":256,\"edge_threshold\":\"otsu\",\"max_points\":4096}}\n{\"kind\":\"annotation\",\"image_id\":\"x\",\"specialty\":\"s\",\"class_name\":\"c\",\"sub_class\":\"s\",\"keywords\":[\"k\"],\"physician_id\":\"p\",\"created_at\":\"2020-01-01T00:00:00Z\"}",
        ] {
            fs::write(&index, bad).unwrap();
            assert_eq!(load_corpus(dir.path()).unwrap_err().code(), "SCHEMA_ERROR", "{bad}");
        }
    }

    #[test]
    fn corrupt_descriptor_file() {
        let dir = tempfile::tempdir().unwrap();
        save_corpus(&sample_store(), dir.path()).unwrap();
        let pts = CorpusLayout::new(dir.path()).descriptor_path("a.pgm");
        fs::write(&pts, "10 6\n3 4\n0 0\n").unwrap();
        assert_eq!(load_corpus(dir.path()).unwrap_err().code(), "SCHEMA_ERROR");
        fs::write(&pts, "10 6\n0 0\n30 4\n").unwrap();
        assert_eq!(load_corpus(dir.path()).unwrap_err().code(), "SCHEMA_ERROR");
    }

    #[test]
    fn blobs_are_content_addressed() {
        let dir = tempfile::tempdir().unwrap();
        let layout = CorpusLayout::new(dir.path());
        let hash = content_hash(b"bytes");
        let path = layout.write_blob(&hash, b"bytes").unwrap();
        assert!(path.ends_with(&hash));
        assert_eq!(layout.read_blob(&hash).unwrap(), b"bytes");
    }
}
