//! HTTP/JSON facade over the annotation corpus.
//!
//! One process owns the corpus directory. Reads share a lock on the in-memory
//! store; mutations are serialized and flushed to disk before they answer.

mod error;

pub use error::{status_for, ApiError, ErrorBody};

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hannot_core::image::{describe_bytes, media_type, ExtractionParams};
use hannot_core::retrieval::{propagate_annotation, search, DistanceVariant, QueryResponse, RetrievalConfig};
use hannot_core::store::{
    content_hash, fresh_image_id, load_corpus, save_corpus, AnnotationRecord, CorpusFilter, CorpusLayout, ImageEntry,
    Registration, SpecialtyNode, Store, StoreError,
};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

pub const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

struct Inner {
    layout: CorpusLayout,
    store: RwLock<Store>,
    /// Held across a mutation and its flush.
    writer: Mutex<()>,
    dirty: AtomicBool,
}

/// Shared handle to the served corpus.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

impl Service {
    /// Loads the corpus at `root`, or creates an empty one with `params`.
    pub fn open_or_create(root: impl Into<PathBuf>, params: ExtractionParams) -> Result<Service, StoreError> {
        let layout = CorpusLayout::new(root);
        let store = if layout.exists() {
            load_corpus(layout.root())?
        } else {
            let store = Store::new(params);
            save_corpus(&store, layout.root())?;
            store
        };
        Ok(Service::with_store(layout, store))
    }

    pub fn with_store(layout: CorpusLayout, store: Store) -> Service {
        Service {
            inner: Arc::new(Inner {
                layout,
                store: RwLock::new(store),
                writer: Mutex::new(()),
                dirty: AtomicBool::new(false),
            }),
        }
    }

    pub fn is_dirty(&self) -> bool {
        self.inner.dirty.load(Ordering::SeqCst)
    }

    /// Writes the store if a mutation has not reached disk yet.
    pub fn flush_if_dirty(&self) -> Result<bool, StoreError> {
        let _w = self.inner.writer.lock().unwrap_or_else(|e| e.into_inner());
        if !self.is_dirty() {
            return Ok(false);
        }
        self.flush_locked()?;
        Ok(true)
    }

    fn flush_locked(&self) -> Result<(), StoreError> {
        save_corpus(&self.read(), self.inner.layout.root())?;
        self.inner.dirty.store(false, Ordering::SeqCst);
        Ok(())
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Store> {
        self.inner.store.read().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `f` on the store under the writer lock, then flushes.
    fn mutate<T>(&self, f: impl FnOnce(&mut Store) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let _w = self.inner.writer.lock().unwrap_or_else(|e| e.into_inner());
        let out = {
            let mut store = self.inner.store.write().unwrap_or_else(|e| e.into_inner());
            f(&mut store)?
        };
        self.inner.dirty.store(true, Ordering::SeqCst);
        self.flush_locked()?;
        Ok(out)
    }

    /// Read-only access for callers embedding the service.
    pub fn with_store_ref<T>(&self, f: impl FnOnce(&Store) -> T) -> T {
        f(&self.read())
    }
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/api/images", post(upload_image))
        .route("/api/images/{id}/annotations", get(image_annotations))
        .route("/api/images/{id}/raw", get(raw_image))
        .route("/api/query", post(query))
        .route("/api/annotations", post(annotate))
        .route("/api/specialties", get(specialties))
        .fallback(|| async { ApiError::new("NOT_FOUND", "no such endpoint") })
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(service)
}

/// CPU-bound and lock-holding work stays off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadResponse {
    pub image_id: String,
    pub point_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplicate_of: Option<String>,
}

async fn upload_image(State(svc): State<Service>, mut multipart: Multipart) -> Result<Response, ApiError> {
    let mut upload = None;
    while let Some(field) = multipart.next_field().await? {
        if field.name() == Some("file") || (upload.is_none() && field.file_name().is_some()) {
            let name = field.file_name().unwrap_or("upload").to_owned();
            upload = Some((name, field.bytes().await?));
        }
    }
    let (file_name, bytes) = upload.ok_or_else(|| ApiError::bad_request("multipart field 'file' is required"))?;

    let (status, body) = blocking(move || {
        let hash = content_hash(&bytes);
        if let Some(existing) = svc.read().find_by_hash(&hash) {
            return Ok((StatusCode::OK, duplicate(existing)));
        }
        let params = *svc.read().extraction();
        let descriptor = describe_bytes(&bytes, &params)?;
        svc.mutate(|store| {
            let entry = ImageEntry {
                image_id: fresh_image_id(&hash),
                descriptor,
                source_path: file_name,
                content_hash: hash.clone(),
            };
            svc.inner.layout.write_blob(&hash, &bytes)?;
            let image_id = entry.image_id.clone();
            match store.register_image(entry)? {
                Registration::Added => {
                    let point_count = store.image(&image_id).map_or(0, |e| e.descriptor.point_count());
                    Ok((
                        StatusCode::CREATED,
                        UploadResponse {
                            image_id,
                            point_count,
                            duplicate_of: None,
                        },
                    ))
                }
                // raced with an identical upload
                Registration::Duplicate(id) => Ok((StatusCode::OK, duplicate(store.image(&id).expect("registered")))),
            }
        })
    })
    .await?;
    Ok((status, Json(body)).into_response())
}

fn duplicate(existing: &ImageEntry) -> UploadResponse {
    UploadResponse {
        image_id: existing.image_id.clone(),
        point_count: existing.descriptor.point_count(),
        duplicate_of: Some(existing.image_id.clone()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub image_id: String,
    pub specialty: String,
    #[serde(default)]
    pub class_name: Option<String>,
    #[serde(default)]
    pub sub_class: Option<String>,
    /// `mh` or `h`; the long snake_case names are accepted too.
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub top_k: Option<usize>,
    #[serde(default)]
    pub threshold: Option<f64>,
}

impl QueryRequest {
    pub fn config(&self) -> Result<RetrievalConfig, ApiError> {
        let mut config = RetrievalConfig::default();
        if let Some(v) = &self.variant {
            config.variant = v.parse::<DistanceVariant>().map_err(ApiError::bad_request)?;
        }
        if let Some(k) = self.top_k {
            config.top_k = k;
        }
        if let Some(t) = self.threshold {
            config.acceptance_threshold = t;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn filter(&self) -> CorpusFilter {
        CorpusFilter {
            specialty: self.specialty.clone(),
            class_name: self.class_name.clone(),
            sub_class: self.sub_class.clone(),
        }
    }
}

async fn query(
    State(svc): State<Service>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Json<QueryResponse>, ApiError> {
    let Json(req) = body?;
    let config = req.config()?;
    let response = blocking(move || {
        let store = svc.read();
        let entry = store
            .image(&req.image_id)
            .ok_or_else(|| StoreError::UnknownImage(req.image_id.clone()))?;
        Ok(search(&entry.descriptor, &req.filter(), &store, &config)?)
    })
    .await?;
    Ok(Json(response))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotateRequest {
    pub image_id: String,
    pub selected_image_id: String,
    pub physician_id: String,
    #[serde(default)]
    pub keywords: Option<Vec<String>>,
}

async fn annotate(
    State(svc): State<Service>,
    body: Result<Json<AnnotateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<AnnotationRecord>), ApiError> {
    let Json(req) = body?;
    let record = blocking(move || {
        svc.mutate(|store| {
            Ok(propagate_annotation(
                store,
                &req.selected_image_id,
                &req.image_id,
                &req.physician_id,
                req.keywords,
            )?)
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(record)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialtiesResponse {
    pub specialties: Vec<SpecialtyNode>,
}

async fn specialties(State(svc): State<Service>) -> Json<SpecialtiesResponse> {
    Json(SpecialtiesResponse {
        specialties: svc.read().specialty_tree(),
    })
}

async fn image_annotations(
    State(svc): State<Service>,
    Path(id): Path<String>,
) -> Result<Json<Vec<AnnotationRecord>>, ApiError> {
    Ok(Json(svc.read().annotations_for(&id)?.to_vec()))
}

async fn raw_image(State(svc): State<Service>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let bytes = blocking(move || {
        let hash = svc
            .read()
            .image(&id)
            .map(|e| e.content_hash.clone())
            .ok_or(StoreError::UnknownImage(id))?;
        Ok(svc.inner.layout.read_blob(&hash)?)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, media_type(&bytes))], bytes).into_response())
}
