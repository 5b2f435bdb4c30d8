//! Prompt construction for the grounding and reasoning models, and strict
//! parsing of their replies. Wire formats are documented in `protocol.md`.

mod grounding;
mod reasoner;
mod templates;

pub use grounding::{
    build_grounding_prompt, parse_grounding_reply, render_grounding_reply, Detection,
    GroundingReply, SceneDescriptions,
};
pub use reasoner::{
    build_reasoner_prompt, parse_reasoner_reply, render_reasoner_reply, CandidateBox,
    ReasonerReply, BOTTOM_ROW_TOL, ID_END, ID_START, MATRIX_END, MATRIX_START,
};
pub use templates::{PromptTemplates, DEFAULT_TEMPLATE_VERSION};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("edit instruction is empty")]
    EmptyInstruction,
    #[error("no candidate objects to reason about")]
    NoCandidateObjects,
    #[error("unknown prompt template version {0:?}")]
    UnknownTemplateVersion(String),
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("reply lacks descriptions: {0:?}")]
    MissingDescriptions(Vec<String>),
    #[error("reply lacks a complete <MSTART>...<MEND> block")]
    MissingMatrixTokens,
    #[error("reply lacks a complete <ISTART>...<IEND> block")]
    MissingIdTokens,
    #[error("matrix block holds {found} numbers; expected 6 or 9")]
    WrongNumberCount { found: usize },
    #[error("matrix bottom row {0:?} is not (0, 0, 1)")]
    BadBottomRow([f64; 3]),
    #[error("matrix has a non-finite coefficient")]
    NonFiniteCoefficient,
    #[error("object id {0:?} is not a non-negative integer")]
    InvalidId(String),
}
