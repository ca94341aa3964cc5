//! File plumbing and text rendering for the analysis library: edge-list
//! loading, significant-digit formatting, CSV matrices, and DOT export.

pub mod io;
pub mod render;
