//! Building blocks for authoring reproducible, map-grounded QA datasets:
//! provider adapters behind one schema, a secret-free response cache,
//! context rendering, QA authoring and canonical dataset export.

pub mod adapters;
pub mod cache;
pub mod canonical;
pub mod config;
pub mod context;
pub mod dataset;
pub mod fixture;
pub mod gateway;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod polyline;
pub mod qa;
pub mod scenario;
pub mod template;

pub use model::{haversine_distance, validate_place, LatLng, Place, ProviderId, RouteResult, ToolKind, TravelMode};
