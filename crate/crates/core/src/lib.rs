//! Object-level image editing toolkit: edit compilation into affine
//! transforms, mask geometry, pluggable model backends, benchmark dataset
//! generation and stage-wise IoU evaluation.

pub mod backends;
pub mod compositor;
pub mod dataset;
pub mod editops;
pub mod evalreport;
pub mod geometry;
pub mod llmproto;
pub mod pipeline;
pub mod util;
