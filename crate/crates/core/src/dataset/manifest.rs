use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{verify_sample, DatasetError, Difficulty, EditSample, FilterOutcome, GenerationConfig, SourceInstance};
use crate::editops::{EditCategory, EditOp};
use crate::geometry::{bbox_of_mask, AffineTransform, BinaryMask};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub object_id: u32,
    pub class_label: String,
    /// `[x_min, y_min, x_max, y_max]`, pixel-edge coordinates.
    pub bbox: [f64; 4],
    pub truncated: bool,
    /// Mask file relative to the manifest directory.
    pub mask: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSample {
    pub sample_id: String,
    pub image_id: String,
    pub image_path: String,
    pub image_width: u32,
    pub image_height: u32,
    pub instruction: String,
    pub op: EditOp,
    pub op_kind: String,
    /// `[a11, a12, a13, a21, a22, a23]`.
    pub transform: [f64; 6],
    pub category: EditCategory,
    pub difficulty: Difficulty,
    pub iou_before_after: f64,
    pub seed: u64,
    pub target: ManifestObject,
    pub distractors: Vec<ManifestObject>,
    pub mask_before: String,
    pub mask_after: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub images_kept: usize,
    pub instances_kept: usize,
    pub dropped: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config: GenerationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSummary>,
    pub samples: Vec<ManifestSample>,
}

impl Manifest {
    pub fn sample(&self, id: &str) -> Option<&ManifestSample> {
        self.samples
            .binary_search_by(|s| s.sample_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.samples[i])
    }
}

fn object_mask_file(inst: &SourceInstance) -> String {
    format!("masks/{}_obj{}.png", inst.image_id, inst.instance_index)
}

fn manifest_object(inst: &SourceInstance) -> ManifestObject {
    let b = inst.gt_bbox;
    ManifestObject {
        object_id: inst.instance_index,
        class_label: inst.class_label.clone(),
        bbox: [b.x_min, b.y_min, b.x_max, b.y_max],
        truncated: inst.truncated,
        mask: object_mask_file(inst),
    }
}

/// Writes `manifest.json` plus 0/255 mask PNGs into `dir`; returns the
/// manifest path. Samples are written in sample-id order.
pub fn write_manifest(
    dir: &Path,
    samples: &[EditSample],
    cfg: &GenerationConfig,
    filter: Option<&FilterOutcome>,
) -> Result<PathBuf, DatasetError> {
    let masks = dir.join("masks");
    std::fs::create_dir_all(&masks).map_err(|e| DatasetError::io(&masks, e))?;
    let mut sorted: Vec<&EditSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let mut entries = Vec::with_capacity(sorted.len());
    let mut written = std::collections::BTreeSet::new();
    for s in sorted {
        for inst in std::iter::once(&s.instance).chain(&s.distractors) {
            let rel = object_mask_file(inst);
            if written.insert(rel.clone()) {
                inst.gt_mask.save_png(dir.join(&rel))?;
            }
        }
        let after = format!("masks/{}_after.png", s.sample_id);
        s.gt_mask_after.save_png(dir.join(&after))?;
        entries.push(ManifestSample {
            sample_id: s.sample_id.clone(),
            image_id: s.instance.image_id.clone(),
            image_path: s.instance.image_ref.to_string_lossy().into_owned(),
            image_width: s.instance.image_width,
            image_height: s.instance.image_height,
            instruction: s.instruction_text.clone(),
            op: s.canonical_op.clone(),
            op_kind: s.canonical_op.kind().to_string(),
            transform: s.gt_transform.coefficients(),
            category: s.category,
            difficulty: s.difficulty,
            iou_before_after: s.iou_before_after,
            seed: s.seed,
            target: manifest_object(&s.instance),
            distractors: s.distractors.iter().map(manifest_object).collect(),
            mask_before: object_mask_file(&s.instance),
            mask_after: after,
        });
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        filter: filter.map(|f| FilterSummary {
            images_kept: f.images_kept(),
            instances_kept: f.kept.len(),
            dropped: f.dropped.iter().map(|(r, n)| (r.to_string(), *n)).collect(),
        }),
        samples: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("serializable");
    std::fs::write(&path, text + "\n").map_err(|e| DatasetError::io(&path, e))?;
    Ok(path)
}

/// Reads a manifest and rebuilds its samples, re-checking every invariant.
/// `path` may name the manifest file or its directory.
pub fn load_manifest(path: &Path) -> Result<(Manifest, Vec<EditSample>), DatasetError> {
    let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let text = std::fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| DatasetError::io(&path, e))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(DatasetError::UnsupportedSchema(manifest.schema_version));
    }
    let mut cache: BTreeMap<String, BinaryMask> = BTreeMap::new();
    let mut load = |rel: &str| -> Result<BinaryMask, DatasetError> {
        if let Some(m) = cache.get(rel) {
            return Ok(m.clone());
        }
        let m = BinaryMask::load_png(dir.join(rel))?;
        cache.insert(rel.to_string(), m.clone());
        Ok(m)
    };
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for ms in &manifest.samples {
        let mut instance = |o: &ManifestObject| -> Result<SourceInstance, DatasetError> {
            let mask = load(&o.mask)?;
            if mask.dims() != (ms.image_width, ms.image_height) {
                return Err(DatasetError::InvariantViolated {
                    sample_id: ms.sample_id.clone(),
                    reason: format!("mask {} has the wrong size", o.mask),
                });
            }
            Ok(SourceInstance {
                image_id: ms.image_id.clone(),
                image_ref: PathBuf::from(&ms.image_path),
                instance_index: o.object_id,
                class_label: o.class_label.clone(),
                truncated: o.truncated,
                gt_bbox: bbox_of_mask(&mask)?,
                gt_mask: mask,
                image_width: ms.image_width,
                image_height: ms.image_height,
            })
        };
        let target = instance(&ms.target)?;
        let distractors = ms.distractors.iter().map(&mut instance).collect::<Result<Vec<_>, _>>()?;
        let sample = EditSample {
            sample_id: ms.sample_id.clone(),
            instance: target,
            distractors,
            instruction_text: ms.instruction.clone(),
            canonical_op: ms.op.clone(),
            gt_transform: AffineTransform::from_coefficients(ms.transform),
            gt_mask_after: load(&ms.mask_after)?,
            category: ms.category,
            iou_before_after: ms.iou_before_after,
            difficulty: ms.difficulty,
            seed: ms.seed,
        };
        verify_sample(&sample, &manifest.config)?;
        samples.push(sample);
    }
    Ok((manifest, samples))
}
