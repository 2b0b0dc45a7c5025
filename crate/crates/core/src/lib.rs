pub mod charts;
pub mod cluster;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod geojson;
pub mod ingest;
pub mod ini;
pub mod kselect;
pub mod matrix;
pub mod pipeline;
pub mod preprocess;
pub mod profile;
pub mod seed;
pub mod synthetic;
pub mod validate;
