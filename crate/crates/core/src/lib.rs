//! Reusable learning object pipeline: import heterogeneous collections,
//! curate their schema and documents, export IMS CP and SCORM 1.2 packages.

pub mod curation;
pub mod export;
pub mod import;
pub mod model;
pub mod ops;
pub mod store;
mod zipio;
