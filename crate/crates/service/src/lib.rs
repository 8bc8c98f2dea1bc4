//! HTTP annotator service and command line over `geoqa-core`.

pub mod api;
pub mod cli;
pub mod setup;
pub mod studio;
