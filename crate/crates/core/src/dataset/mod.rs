//! Benchmark generation from VOC-format instance annotations: ingest,
//! filtering, transform sampling, instruction paraphrases and the sample
//! manifest.

mod filter;
mod generate;
mod manifest;
pub mod synth;
mod templates;
mod voc;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backends::{GroundTruth, TruthObject};
use crate::editops::{EditCategory, EditError, EditOp};
use crate::geometry::{AffineTransform, BinaryMask, BoundingBox, GeometryError};

pub use filter::{filter_instances, DropReason, FilterOutcome};
pub use generate::{bucket_difficulty, generate, verify_sample, GenerationConfig};
pub use manifest::{load_manifest, write_manifest, Manifest, ManifestSample, SCHEMA_VERSION};
pub use templates::{display_name, render_template, FORMS_PER_KIND};
pub use voc::ingest_voc;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("malformed annotation {path}: {reason}")]
    MalformedAnnotation { path: PathBuf, reason: String },
    #[error("no instance mask for image {0}")]
    MissingMask(String),
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("no usable transform for image {0} after bounded resampling")]
    ExhaustedResampling(String),
    #[error("sample {sample_id} violates an invariant: {reason}")]
    InvariantViolated { sample_id: String, reason: String },
    #[error("unsupported manifest schema version {0}")]
    UnsupportedSchema(u32),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Edit(#[from] EditError),
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, e: impl fmt::Display) -> Self {
        DatasetError::Io {
            path: path.into(),
            reason: e.to_string(),
        }
    }
}

/// One annotated object instance of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceInstance {
    pub image_id: String,
    pub image_ref: PathBuf,
    /// 1-based instance id of the VOC object mask; also the object id used
    /// by backends.
    pub instance_index: u32,
    pub class_label: String,
    pub truncated: bool,
    pub gt_mask: BinaryMask,
    /// Always `bbox_of_mask(gt_mask)`.
    pub gt_bbox: BoundingBox,
    pub image_width: u32,
    pub image_height: u32,
}

impl SourceInstance {
    pub fn area_fraction(&self) -> f64 {
        self.gt_mask.count() as f64 / (self.image_width as f64 * self.image_height as f64)
    }

    pub fn truth_object(&self) -> TruthObject {
        TruthObject {
            object_id: self.instance_index,
            class_label: self.class_label.clone(),
            mask: self.gt_mask.clone(),
            bbox: self.gt_bbox,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(&self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Difficulty::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown difficulty {s:?}"))
    }
}

/// A benchmark sample: instruction, target object, and the ground-truth
/// edit with its before/after masks.
#[derive(Debug, Clone, PartialEq)]
pub struct EditSample {
    pub sample_id: String,
    pub instance: SourceInstance,
    /// Other kept objects of the same image.
    pub distractors: Vec<SourceInstance>,
    pub instruction_text: String,
    pub canonical_op: EditOp,
    pub gt_transform: AffineTransform,
    pub gt_mask_after: BinaryMask,
    pub category: EditCategory,
    pub iou_before_after: f64,
    pub difficulty: Difficulty,
    pub seed: u64,
}

impl EditSample {
    /// Annotations in the shape oracle backends consume, ordered by object id.
    pub fn ground_truth(&self) -> GroundTruth {
        let mut objects: Vec<TruthObject> = std::iter::once(&self.instance)
            .chain(&self.distractors)
            .map(SourceInstance::truth_object)
            .collect();
        objects.sort_by_key(|o| o.object_id);
        let target = objects
            .iter()
            .position(|o| o.object_id == self.instance.instance_index)
            .expect("target is among the objects");
        GroundTruth {
            objects,
            target,
            op: self.canonical_op.clone(),
            transform: self.gt_transform,
        }
    }
}
