//! Affine algebra, binary masks, warping and IoU.
//!
//! Everything here is a pure value type or a pure function.

mod affine;
mod bbox;
mod mask;

pub use affine::{about_anchor, compose, AffineTransform, Point, SINGULAR_EPS};
pub use bbox::{bbox_iou, BoundingBox};
pub use mask::{bbox_of_mask, mask_iou, source_pixel, warp_mask, BinaryMask};
pub(crate) use mask::check_dims;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("singular transform (|det| = {det:e})")]
    SingularTransform { det: f64 },
    #[error("mask dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("mask is empty")]
    EmptyMask,
    #[error("invalid bounding box {0:?}")]
    InvalidBox(BoundingBox),
    #[error("bit count {actual} does not match {expected}")]
    BitCount { expected: usize, actual: usize },
    #[error("mask pixel ({x}, {y}) has value {value}; only 0 and 255 are allowed")]
    NonBinaryPixel { x: u32, y: u32, value: u8 },
    #[error("mask image must be single-channel 8-bit, got {0}")]
    NotSingleChannel(String),
    #[error("mask io: {0}")]
    Io(String),
}
