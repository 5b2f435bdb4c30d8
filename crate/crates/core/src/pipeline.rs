//! The editing pipeline: ground, refine, reason, draw, then segment the
//! edited image so the final stage can be scored.
//!
//! A run is a list of [`SampleRecord`]s plus the rasters they reference.
//! Stage failures are recorded per sample and never abort the run; stages
//! downstream of a failure are recorded as failed too. [`PipelineRun::write`]
//! stores everything under one directory (`run.json` and PNG artifacts) and
//! [`PipelineRun::load`] reads it back for scoring.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::backends::stub::{CannedReplies, CannedReply};
use crate::backends::wire::{encode_mask, encode_rgb};
use crate::backends::{resolve_target, BackendSet, DrawRequest, Frame, HttpDetector, RefinedObject};
use crate::dataset::EditSample;
use crate::editops::parse_instruction_with_target;
use crate::evalreport::{
    attach, score_detected, score_grounding, score_refinement, score_transformation, EvalError, RawRow, RunInfo,
    SampleInfo, Stage, StageResult,
};
use crate::geometry::{bbox_iou, warp_mask, AffineTransform, BinaryMask, BoundingBox, GeometryError};
use crate::llmproto::{render_grounding_reply, CandidateBox, Detection, SceneDescriptions};
use crate::util::normalize_label;

pub const RUN_FILE: &str = "run.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("image {path}: {reason}")]
    Image { path: PathBuf, reason: String },
    #[error("run has no record for sample {0}")]
    MissingSample(String),
    #[error("sample {0} is not in the manifest")]
    UnknownSample(String),
    #[error("run references missing artifact {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn io_err(path: &Path, e: impl fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Last stage to run. `Draw` also segments the edited image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopAfter {
    Ground,
    Refine,
    Reason,
    Draw,
}

impl StopAfter {
    /// Scored stages this setting produces.
    pub fn stages(&self) -> &'static [Stage] {
        match self {
            StopAfter::Ground => &Stage::ALL[..1],
            StopAfter::Refine => &Stage::ALL[..2],
            StopAfter::Reason => &Stage::ALL[..3],
            StopAfter::Draw => &Stage::ALL,
        }
    }
}

impl FromStr for StopAfter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ground" => Ok(StopAfter::Ground),
            "refine" => Ok(StopAfter::Refine),
            "reason" => Ok(StopAfter::Reason),
            "draw" | "all" => Ok(StopAfter::Draw),
            _ => Err(format!("unknown stage {s:?}; expected all, ground, refine, reason or draw")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Error(String),
}

impl<T> Outcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Error(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingRecord {
    pub detections: Vec<Detection>,
    pub descriptions: SceneDescriptions,
    pub warnings: Vec<String>,
    /// Detection scored against the annotated target: same class, best box
    /// overlap. `None` scores the full image.
    pub target: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedRecord {
    pub object_id: u32,
    pub class_label: String,
    pub bbox: BoundingBox,
    pub mask: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub objects: Vec<RefinedRecord>,
    pub target: Option<u32>,
    /// Nothing was grounded, so the refiner was prompted with a full-image
    /// box labelled with the instruction's object phrase.
    pub full_image_prompt: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningRecord {
    /// Object id the reasoner replied with.
    pub reply_target: u32,
    /// Object actually edited; differs when the reply named an unknown id
    /// and the instruction's object phrase picked a candidate instead.
    pub object_id: u32,
    pub id_fallback: bool,
    pub transform: AffineTransform,
    pub raw_text: String,
    pub warnings: Vec<String>,
    pub after_mask: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawingRecord {
    pub image: String,
    pub backend: String,
    pub config_hash: String,
    pub object_mask: Option<String>,
    pub class_label: String,
    /// Mask the detector segmented from the edited image.
    pub detection: Outcome<String>,
}

/// What happened to one sample. A `None` stage was not requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub grounding: Option<Outcome<GroundingRecord>>,
    pub refinement: Option<Outcome<RefinementRecord>>,
    pub reasoning: Option<Outcome<ReasoningRecord>>,
    pub drawing: Option<Outcome<DrawingRecord>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Mask(BinaryMask),
    Image(RgbImage),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunFile {
    info: RunInfo,
    stop_after: StopAfter,
    records: Vec<SampleRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub info: RunInfo,
    pub stop_after: StopAfter,
    /// Sorted by sample id.
    pub records: Vec<SampleRecord>,
    /// Rasters keyed by their path relative to the run directory.
    pub artifacts: BTreeMap<String, Artifact>,
}

fn upstream(stage: &str) -> String {
    format!("skipped: {stage} failed")
}

fn pick_target(detections: &[Detection], class_label: &str, gt: &BoundingBox) -> Option<u32> {
    let want = normalize_label(class_label);
    let mut best: Option<(f64, u32)> = None;
    for d in detections.iter().filter(|d| normalize_label(&d.class_label) == want) {
        let iou = bbox_iou(&d.bbox, gt);
        if best.is_none_or(|(b, _)| iou > b) {
            best = Some((iou, d.object_id));
        }
    }
    best.map(|(_, id)| id)
}

fn object_phrase(instruction: &str) -> String {
    parse_instruction_with_target(instruction)
        .map(|p| p.target)
        .unwrap_or_else(|_| instruction.to_string())
}

struct SampleRunner<'a> {
    sample: &'a EditSample,
    backends: &'a BackendSet,
    artifacts: Vec<(String, Artifact)>,
}

impl SampleRunner<'_> {
    fn path(&self, name: &str) -> String {
        format!("artifacts/{}/{name}.png", self.sample.sample_id)
    }

    fn store_mask(&mut self, name: &str, m: BinaryMask) -> String {
        let p = self.path(name);
        self.artifacts.push((p.clone(), Artifact::Mask(m)));
        p
    }

    fn store_image(&mut self, name: &str, img: RgbImage) -> String {
        let p = self.path(name);
        self.artifacts.push((p.clone(), Artifact::Image(img)));
        p
    }

    fn run(&mut self, image: &RgbImage, stop: StopAfter) -> SampleRecord {
        let s = self.sample;
        let truth = s.ground_truth();
        let frame = Frame {
            sample_id: &s.sample_id,
            image,
            instruction: &s.instruction_text,
            truth: Some(&truth),
        };
        let mut rec = SampleRecord {
            sample_id: s.sample_id.clone(),
            grounding: None,
            refinement: None,
            reasoning: None,
            drawing: None,
        };

        let grounding = match self.backends.grounder.ground(&frame) {
            Ok(reply) => GroundingRecord {
                target: pick_target(&reply.detections, &s.instance.class_label, &s.instance.gt_bbox),
                detections: reply.detections,
                descriptions: reply.descriptions,
                warnings: reply.warnings,
            },
            Err(e) => {
                rec.grounding = Some(Outcome::Error(e.to_string()));
                return self.skip_after(rec, stop, "grounding");
            }
        };
        rec.grounding = Some(Outcome::Ok(grounding.clone()));
        if stop == StopAfter::Ground {
            return rec;
        }

        let (detections, target, full_image_prompt) = if grounding.detections.is_empty() {
            let (w, h) = image.dimensions();
            let full = BoundingBox::full_image(w, h);
            let det = Detection {
                bbox: full,
                point: full.center(),
                class_label: object_phrase(&s.instruction_text),
                object_id: 0,
            };
            (vec![det], Some(0), true)
        } else {
            (grounding.detections.clone(), grounding.target, false)
        };
        let refined = match self.backends.refiner.refine(&frame, &detections) {
            Ok(r) => r,
            Err(e) => {
                rec.refinement = Some(Outcome::Error(e.to_string()));
                return self.skip_after(rec, stop, "refinement");
            }
        };
        let labels: BTreeMap<u32, &str> = detections.iter().map(|d| (d.object_id, d.class_label.as_str())).collect();
        let candidates: Vec<CandidateBox> = refined
            .iter()
            .map(|(id, o)| CandidateBox {
                object_id: *id,
                bbox: o.bbox,
                class_label: labels.get(id).copied().unwrap_or_default().to_string(),
            })
            .collect();
        let objects = refined
            .iter()
            .map(|(id, o)| RefinedRecord {
                object_id: *id,
                class_label: labels.get(id).copied().unwrap_or_default().to_string(),
                bbox: o.bbox,
                mask: self.store_mask(&format!("refined_{id}"), o.mask.clone()),
            })
            .collect();
        rec.refinement = Some(Outcome::Ok(RefinementRecord {
            objects,
            target,
            full_image_prompt,
        }));
        if stop == StopAfter::Refine {
            return rec;
        }

        let reasoning = self.reason(&frame, &grounding.descriptions, &candidates, &refined);
        let (object, after, t) = match reasoning {
            Ok((r, after)) => {
                let picked = (r.object_id, after, r.transform);
                rec.reasoning = Some(Outcome::Ok(r));
                picked
            }
            Err(e) => {
                rec.reasoning = Some(Outcome::Error(e));
                return self.skip_after(rec, stop, "reasoning");
            }
        };
        if stop == StopAfter::Reason {
            return rec;
        }

        let before = &refined[&object].mask;
        let request = DrawRequest {
            before,
            after: &after,
            background_prompt: &grounding.descriptions.background_prompt,
            generation_prompt: &grounding.descriptions.generation_prompt,
            transform: &t,
        };
        let edited = match self.backends.drawer.draw(&frame, &request) {
            Ok(e) => e,
            Err(e) => {
                rec.drawing = Some(Outcome::Error(e.to_string()));
                return rec;
            }
        };
        let class_label = labels.get(&object).copied().unwrap_or_default().to_string();
        let detection = match self.backends.detector.detect(&frame, &edited, &class_label) {
            Ok(m) => Outcome::Ok(self.store_mask("detected", m)),
            Err(e) => Outcome::Error(e.to_string()),
        };
        let object_mask = edited.object_mask.map(|m| self.store_mask("placed", m));
        rec.drawing = Some(Outcome::Ok(DrawingRecord {
            image: self.store_image("edited", edited.pixels),
            backend: edited.provenance.backend,
            config_hash: edited.provenance.config_hash,
            object_mask,
            class_label,
            detection,
        }));
        rec
    }

    fn reason(
        &mut self,
        frame: &Frame,
        scene: &SceneDescriptions,
        candidates: &[CandidateBox],
        refined: &BTreeMap<u32, RefinedObject>,
    ) -> Result<(ReasoningRecord, BinaryMask), String> {
        let reply = self
            .backends
            .reasoner
            .reason(frame, scene, candidates)
            .map_err(|e| e.to_string())?;
        let (object_id, id_fallback) = if refined.contains_key(&reply.target_id) {
            (reply.target_id, false)
        } else {
            let phrase = object_phrase(frame.instruction);
            let c = resolve_target(&phrase, candidates)
                .map_err(|e| format!("reasoner chose unknown object {}; {e}", reply.target_id))?;
            log::warn!(
                "{}: reasoner chose unknown object {}, using {} from the instruction",
                frame.sample_id,
                reply.target_id,
                c.object_id
            );
            (c.object_id, true)
        };
        let after = warp_mask(&refined[&object_id].mask, &reply.transform).map_err(|e| e.to_string())?;
        let rec = ReasoningRecord {
            reply_target: reply.target_id,
            object_id,
            id_fallback,
            transform: reply.transform,
            raw_text: reply.raw_text,
            warnings: reply.warnings,
            after_mask: self.store_mask("after", after.clone()),
        };
        Ok((rec, after))
    }

    fn skip_after(&self, mut rec: SampleRecord, stop: StopAfter, failed: &str) -> SampleRecord {
        if stop >= StopAfter::Refine && rec.refinement.is_none() {
            rec.refinement = Some(Outcome::Error(upstream(failed)));
        }
        if stop >= StopAfter::Reason && rec.reasoning.is_none() {
            rec.reasoning = Some(Outcome::Error(upstream(failed)));
        }
        if stop >= StopAfter::Draw && rec.drawing.is_none() {
            rec.drawing = Some(Outcome::Error(upstream(failed)));
        }
        rec
    }
}

/// Loads a sample's source image as RGB.
pub fn load_image(path: &Path) -> Result<RgbImage, PipelineError> {
    image::open(path).map(|i| i.to_rgb8()).map_err(|e| PipelineError::Image {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Runs one sample on an already loaded image.
pub fn run_sample(
    sample: &EditSample,
    image: &RgbImage,
    backends: &BackendSet,
    stop: StopAfter,
) -> (SampleRecord, Vec<(String, Artifact)>) {
    let mut runner = SampleRunner {
        sample,
        backends,
        artifacts: Vec::new(),
    };
    let rec = runner.run(image, stop);
    (rec, runner.artifacts)
}

/// Runs every sample in parallel. Only unreadable source images are hard
/// errors.
pub fn run_pipeline(
    samples: &[EditSample],
    backends: &BackendSet,
    info: RunInfo,
    stop: StopAfter,
) -> Result<PipelineRun, PipelineError> {
    let outputs = samples
        .par_iter()
        .map(|s| {
            let image = load_image(&s.instance.image_ref)?;
            if image.dimensions() != (s.instance.image_width, s.instance.image_height) {
                return Err(PipelineError::Image {
                    path: s.instance.image_ref.clone(),
                    reason: format!(
                        "is {:?}, manifest says {}x{}",
                        image.dimensions(),
                        s.instance.image_width,
                        s.instance.image_height
                    ),
                });
            }
            Ok(run_sample(s, &image, backends, stop))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut records = Vec::with_capacity(outputs.len());
    let mut artifacts = BTreeMap::new();
    for (rec, arts) in outputs {
        records.push(rec);
        artifacts.extend(arts);
    }
    records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(PipelineRun {
        info,
        stop_after: stop,
        records,
        artifacts,
    })
}

impl SampleRecord {
    fn artifact_paths(&self) -> Vec<&str> {
        let mut out = Vec::new();
        if let Some(Outcome::Ok(r)) = &self.refinement {
            out.extend(r.objects.iter().map(|o| o.mask.as_str()));
        }
        if let Some(Outcome::Ok(r)) = &self.reasoning {
            out.push(r.after_mask.as_str());
        }
        if let Some(Outcome::Ok(d)) = &self.drawing {
            out.push(d.image.as_str());
            out.extend(d.object_mask.as_deref());
            if let Outcome::Ok(p) = &d.detection {
                out.push(p.as_str());
            }
        }
        out
    }
}

impl PipelineRun {
    pub fn mask(&self, path: &str) -> Result<&BinaryMask, PipelineError> {
        match self.artifacts.get(path) {
            Some(Artifact::Mask(m)) => Ok(m),
            _ => Err(PipelineError::MissingArtifact(path.to_string())),
        }
    }

    pub fn image(&self, path: &str) -> Result<&RgbImage, PipelineError> {
        match self.artifacts.get(path) {
            Some(Artifact::Image(i)) => Ok(i),
            _ => Err(PipelineError::MissingArtifact(path.to_string())),
        }
    }

    pub fn record(&self, sample_id: &str) -> Option<&SampleRecord> {
        self.records
            .binary_search_by(|r| r.sample_id.as_str().cmp(sample_id))
            .ok()
            .map(|i| &self.records[i])
    }

    /// Writes `run.json` and every artifact under `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, PipelineError> {
        for (rel, art) in &self.artifacts {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
            }
            match art {
                Artifact::Mask(m) => fs::write(&path, m.encode_png()).map_err(|e| io_err(&path, e))?,
                Artifact::Image(i) => fs::write(&path, encode_png_rgb(i)).map_err(|e| io_err(&path, e))?,
            }
        }
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let file = RunFile {
            info: self.info.clone(),
            stop_after: self.stop_after,
            records: self.records.clone(),
        };
        let path = dir.join(RUN_FILE);
        let text = serde_json::to_string_pretty(&file).expect("run record serializes");
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// Reads a run directory written by [`PipelineRun::write`].
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(RUN_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let file: RunFile = serde_json::from_str(&text).map_err(|e| io_err(&path, e))?;
        let mut artifacts = BTreeMap::new();
        for rec in &file.records {
            for rel in rec.artifact_paths() {
                let p = dir.join(rel);
                let art = if rel.ends_with("/edited.png") {
                    Artifact::Image(load_image(&p)?)
                } else {
                    Artifact::Mask(BinaryMask::load_png(&p)?)
                };
                artifacts.insert(rel.to_string(), art);
            }
        }
        let mut records = file.records;
        records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        Ok(Self {
            info: file.info,
            stop_after: file.stop_after,
            records,
            artifacts,
        })
    }

    /// Scores every requested stage of every sample. Every sample of
    /// `samples` must have a record and vice versa.
    pub fn score(&self, samples: &[EditSample]) -> Result<Vec<StageResult>, PipelineError> {
        let by_id: BTreeMap<&str, &EditSample> = samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
        if let Some(r) = self.records.iter().find(|r| !by_id.contains_key(r.sample_id.as_str())) {
            return Err(PipelineError::UnknownSample(r.sample_id.clone()));
        }
        let results: Vec<Vec<StageResult>> = samples
            .par_iter()
            .map(|s| {
                let rec = self
                    .record(&s.sample_id)
                    .ok_or_else(|| PipelineError::MissingSample(s.sample_id.clone()))?;
                self.score_record(s, rec)
            })
            .collect::<Result<_, _>>()?;
        let mut flat: Vec<StageResult> = results.into_iter().flatten().collect();
        flat.sort_by(|a, b| (&a.sample_id, a.stage).cmp(&(&b.sample_id, b.stage)));
        Ok(flat)
    }

    fn score_record(&self, s: &EditSample, rec: &SampleRecord) -> Result<Vec<StageResult>, PipelineError> {
        let id = s.sample_id.as_str();
        let gt = &s.instance.gt_mask;
        let t = &s.gt_transform;
        let mut out = Vec::new();
        let failed = |stage, e: &str| StageResult::failed(id, stage, e);
        let geometry = |stage, r: Result<StageResult, EvalError>| r.unwrap_or_else(|e| StageResult::failed(id, stage, e));
        match &rec.grounding {
            Some(Outcome::Ok(g)) => {
                let bbox = g
                    .target
                    .and_then(|t| g.detections.iter().find(|d| d.object_id == t))
                    .map(|d| &d.bbox);
                out.push(score_grounding(
                    id,
                    bbox,
                    &s.instance.gt_bbox,
                    s.instance.image_width,
                    s.instance.image_height,
                ));
            }
            Some(Outcome::Error(e)) => out.push(failed(Stage::Grounding, e)),
            None => {}
        }
        match &rec.refinement {
            Some(Outcome::Ok(r)) => {
                let mask = match r.target.and_then(|t| r.objects.iter().find(|o| o.object_id == t)) {
                    Some(o) => Some(self.mask(&o.mask)?),
                    None => None,
                };
                out.push(geometry(Stage::Refinement, score_refinement(id, mask, gt)));
            }
            Some(Outcome::Error(e)) => out.push(failed(Stage::Refinement, e)),
            None => {}
        }
        match &rec.reasoning {
            Some(Outcome::Ok(r)) => {
                let after = self.mask(&r.after_mask)?;
                out.push(geometry(Stage::Transformation, score_transformation(id, after, gt, t)));
            }
            Some(Outcome::Error(e)) => out.push(failed(Stage::Transformation, e)),
            None => {}
        }
        match &rec.drawing {
            Some(Outcome::Ok(d)) => match &d.detection {
                Outcome::Ok(p) => out.push(geometry(Stage::FinalEdit, score_detected(id, self.mask(p)?, gt, t))),
                Outcome::Error(e) => out.push(failed(Stage::FinalEdit, e)),
            },
            Some(Outcome::Error(e)) => out.push(failed(Stage::FinalEdit, e)),
            None => {}
        }
        Ok(out)
    }

    /// Scores the run and attaches category, bucket and run metadata.
    pub fn raw_rows(&self, samples: &[EditSample]) -> Result<Vec<RawRow>, PipelineError> {
        let results = self.score(samples)?;
        Ok(attach(&results, &SampleInfo::index(samples), &self.info)?)
    }

    /// Replies an HTTP stub needs to replay this run: one per endpoint and
    /// sample, keyed by the request ids the HTTP backends send. Failed
    /// stages get no reply, so the stub answers them with 404.
    pub fn canned_replies(&self) -> Result<CannedReplies, PipelineError> {
        let mut replies = CannedReplies::default();
        for rec in &self.records {
            let id = rec.sample_id.as_str();
            if let Some(Outcome::Ok(g)) = &rec.grounding {
                let reply = render_grounding_reply(&g.detections, &g.descriptions);
                replies.insert("/ground", id, CannedReply::Single(json!({ "reply": reply })));
            }
            if let Some(Outcome::Ok(r)) = &rec.refinement {
                let objects = r
                    .objects
                    .iter()
                    .map(|o| Ok(json!({ "object_id": o.object_id, "mask_b64": encode_mask(self.mask(&o.mask)?) })))
                    .collect::<Result<Vec<_>, PipelineError>>()?;
                replies.insert("/refine", id, CannedReply::Single(json!({ "objects": objects })));
            }
            if let Some(Outcome::Ok(r)) = &rec.reasoning {
                replies.insert("/reason", id, CannedReply::Single(json!({ "reply": r.raw_text })));
            }
            if let Some(Outcome::Ok(d)) = &rec.drawing {
                let mut body = json!({ "image_b64": encode_rgb(self.image(&d.image)?) });
                if let Some(p) = &d.object_mask {
                    body["object_mask_b64"] = json!(encode_mask(self.mask(p)?));
                }
                replies.insert("/draw", id, CannedReply::Single(body));
                if let Outcome::Ok(p) = &d.detection {
                    let objects = json!([{ "object_id": 0, "mask_b64": encode_mask(self.mask(p)?) }]);
                    replies.insert(
                        "/refine",
                        &HttpDetector::request_id(id),
                        CannedReply::Single(json!({ "objects": objects })),
                    );
                }
            }
        }
        Ok(replies)
    }
}

fn encode_png_rgb(img: &RgbImage) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .expect("in-memory PNG encode");
    buf.into_inner()
}
