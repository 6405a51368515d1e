//! Content-based retrieval and semi-automatic annotation of images using
//! Hausdorff-family distances between edge-point sets.
//!
//! The flow is: decode an image, extract its edge points
//! ([`image::describe`]), rank the annotated images of the chosen specialty
//! by distance ([`retrieval::query_similar`]), suggest keywords by weighted
//! voting, and copy the annotations of the image a reviewer picks onto the
//! new one ([`retrieval::propagate_annotation`]).

pub mod geometry;
pub mod image;
pub mod retrieval;
pub mod store;
pub mod synth;

pub use geometry::{NormKind, Point, PointSet};
pub use image::{ExtractionParams, FeatureDescriptor};
pub use retrieval::{DistanceVariant, QueryResponse, RetrievalConfig};
pub use store::{AnnotationRecord, CorpusFilter, ImageEntry, Store};
