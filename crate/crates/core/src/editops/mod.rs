//! Edit-instruction model and the deterministic instruction → transform
//! compiler.

mod compile;
mod grammar;
mod op;

pub use compile::compile;
pub use grammar::{parse_instruction, parse_instruction_with_target, ObjectRef, ParsedInstruction};
pub use op::{categorize, EditCategory, EditOp, ObjectGeometry};

use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EditError {
    #[error("invalid edit: {0}")]
    InvalidOp(String),
    #[error("edit would make the transform degenerate (|det| = {det:e})")]
    DegenerateScale { det: f64 },
    #[error("object has zero size")]
    ZeroSizeObject,
    #[error("box {bbox:?} is outside the {width}x{height} image")]
    OutOfImage {
        bbox: BoundingBox,
        width: u32,
        height: u32,
    },
    #[error("cannot parse instruction at {span:?} ({fragment:?}): {reason}")]
    UnparsableInstruction {
        span: (usize, usize),
        fragment: String,
        reason: String,
    },
}
