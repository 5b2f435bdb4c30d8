//! Service boundary for the four model-backed stages (grounding, refinement,
//! reasoning, drawing) plus the detector used to score edited images.
//!
//! Every stage has an HTTP client and at least one in-process
//! implementation; the in-process ones return ground truth (or an exact
//! compiler result) so the whole pipeline runs offline and deterministically.

mod config;
mod http;
mod oracle;
pub mod stub;
pub mod wire;

use std::collections::BTreeMap;

use image::RgbImage;

pub use config::{BackendConfig, BackendSet, BackendsConfig, DetectorSpec, DrawerSpec, GrounderSpec, HttpSettings, ReasonerSpec, RefinerSpec};
pub use http::{HttpClient, HttpDetector, HttpDrawer, HttpGrounder, HttpReasoner, HttpRefiner};
pub use oracle::{
    resolve_target, CompilerReasoner, FixedMaskDetector, JitterGrounder, OracleDetector,
    OracleGrounder, OracleRefiner, PassthroughDrawer, PerturbedReasoner, ReferenceDrawer,
};

use crate::editops::{EditError, EditOp};
use crate::geometry::{AffineTransform, BinaryMask, BoundingBox, GeometryError};
use crate::llmproto::{CandidateBox, Detection, GroundingReply, ProtocolError, ReasonerReply, SceneDescriptions};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("object {0} not found")]
    ObjectNotFound(u32),
    #[error("no candidate matches target {0:?}")]
    TargetNotResolved(String),
    #[error("backend needs ground truth, but the frame carries none")]
    MissingGroundTruth,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("bad response payload: {0}")]
    BadPayload(String),
}

/// One annotated object of the frame's image.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthObject {
    pub object_id: u32,
    pub class_label: String,
    pub mask: BinaryMask,
    pub bbox: BoundingBox,
}

/// Annotations an oracle backend may read.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub objects: Vec<TruthObject>,
    /// Index into `objects` of the edited object.
    pub target: usize,
    pub op: EditOp,
    pub transform: AffineTransform,
}

impl GroundTruth {
    pub fn target_object(&self) -> &TruthObject {
        &self.objects[self.target]
    }
}

/// Inputs shared by every stage call for one sample.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub sample_id: &'a str,
    pub image: &'a RgbImage,
    pub instruction: &'a str,
    pub truth: Option<&'a GroundTruth>,
}

impl<'a> Frame<'a> {
    fn truth(&self) -> Result<&'a GroundTruth, BackendError> {
        self.truth.ok_or(BackendError::MissingGroundTruth)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub backend: String,
    pub config_hash: String,
}

/// Output of a drawer.
#[derive(Debug, Clone, PartialEq)]
pub struct EditedImage {
    pub pixels: RgbImage,
    pub provenance: Provenance,
    /// Where the drawer placed the object, when it knows.
    pub object_mask: Option<BinaryMask>,
}

/// A refined object: its mask and the box around it.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedObject {
    pub mask: BinaryMask,
    pub bbox: BoundingBox,
}

/// Everything the drawer receives.
#[derive(Debug, Clone, Copy)]
pub struct DrawRequest<'a> {
    pub before: &'a BinaryMask,
    pub after: &'a BinaryMask,
    pub background_prompt: &'a str,
    pub generation_prompt: &'a str,
    pub transform: &'a AffineTransform,
}

pub trait Grounder: Send + Sync {
    fn name(&self) -> String;
    fn ground(&self, frame: &Frame) -> Result<GroundingReply, BackendError>;
}

pub trait Refiner: Send + Sync {
    fn name(&self) -> String;
    fn refine(
        &self,
        frame: &Frame,
        detections: &[Detection],
    ) -> Result<BTreeMap<u32, RefinedObject>, BackendError>;
}

pub trait Reasoner: Send + Sync {
    fn name(&self) -> String;
    fn reason(
        &self,
        frame: &Frame,
        scene: &SceneDescriptions,
        candidates: &[CandidateBox],
    ) -> Result<ReasonerReply, BackendError>;
}

pub trait Drawer: Send + Sync {
    fn name(&self) -> String;
    fn draw(&self, frame: &Frame, request: &DrawRequest) -> Result<EditedImage, BackendError>;
}

/// Segments one object of an edited image, for final-stage scoring.
pub trait Detector: Send + Sync {
    fn name(&self) -> String;
    fn detect(
        &self,
        frame: &Frame,
        edited: &EditedImage,
        class_label: &str,
    ) -> Result<BinaryMask, BackendError>;
}

pub(crate) fn require_nonempty_image(image: &RgbImage) -> Result<(), BackendError> {
    if image.width() == 0 || image.height() == 0 {
        return Err(BackendError::InvalidRequest("empty image".into()));
    }
    Ok(())
}
