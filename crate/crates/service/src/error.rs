use axum::extract::multipart::MultipartError;
use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use hannot_core::geometry::GeometryError;
use hannot_core::image::ImageError;
use hannot_core::retrieval::RetrievalError;
use hannot_core::store::StoreError;
use serde::{Deserialize, Serialize};

/// Wire form of every failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

/// HTTP status for each error code; anything unlisted is a server fault.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "BAD_REQUEST" | "FORMAT_ERROR" | "INVALID_CONFIG" | "INVALID_PARAMS" => StatusCode::BAD_REQUEST,
        "UNKNOWN_IMAGE" | "EMPTY_CORPUS" | "NOT_FOUND" => StatusCode::NOT_FOUND,
        "FINGERPRINT_MISMATCH" | "ID_CONFLICT" => StatusCode::CONFLICT,
        "NO_FEATURES" | "DEGENERATE_IMAGE" | "INVALID_RECORD" | "INSUFFICIENT_DATA" | "EMPTY_SET"
        | "OUT_OF_BOUNDS" => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl ApiError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status: status_for(code),
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new("BAD_REQUEST", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new("INTERNAL", message)
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }

    pub fn code(&self) -> &'static str {
        self.code
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            // messages carry filesystem paths
            StoreError::Io { .. } | StoreError::Schema { .. } => {
                tracing::error!("corpus storage failure: {e}");
                ApiError::new(e.code(), "corpus storage failure")
            }
            _ => ApiError::new(e.code(), e.to_string()),
        }
    }
}

impl From<ImageError> for ApiError {
    fn from(e: ImageError) -> Self {
        match e {
            ImageError::Io { .. } => {
                tracing::error!("image read failure: {e}");
                ApiError::new(e.code(), "image read failure")
            }
            _ => ApiError::new(e.code(), e.to_string()),
        }
    }
}

impl From<GeometryError> for ApiError {
    fn from(e: GeometryError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

impl From<RetrievalError> for ApiError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Store(e) => e.into(),
            RetrievalError::Geometry(e) => e.into(),
            e => ApiError::new(e.code(), e.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<MultipartError> for ApiError {
    fn from(e: MultipartError) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.to_owned(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}
