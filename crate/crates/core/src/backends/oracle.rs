use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    require_nonempty_image, BackendError, Detector, DrawRequest, Drawer, EditedImage, Frame,
    Grounder, GroundTruth, Provenance, Reasoner, RefinedObject, Refiner,
};
use crate::compositor::{composite, Filler};
use crate::editops::{compile, parse_instruction_with_target, ObjectGeometry};
use crate::geometry::{bbox_of_mask, AffineTransform, BinaryMask, BoundingBox};
use crate::llmproto::{
    render_reasoner_reply, CandidateBox, Detection, GroundingReply, ReasonerReply,
    SceneDescriptions,
};
use crate::util::{normalize_label, stable_seed};

/// Returns the annotated objects of the frame as detections.
#[derive(Debug, Clone, Default)]
pub struct OracleGrounder;

impl Grounder for OracleGrounder {
    fn name(&self) -> String {
        "oracle-grounder".into()
    }

    fn ground(&self, frame: &Frame) -> Result<GroundingReply, BackendError> {
        require_nonempty_image(frame.image)?;
        let truth = frame.truth()?;
        let detections = truth
            .objects
            .iter()
            .map(|o| Detection {
                bbox: o.bbox,
                point: o.mask.interior_point().unwrap_or_else(|| o.bbox.center()),
                class_label: o.class_label.clone(),
                object_id: o.object_id,
            })
            .collect();
        Ok(GroundingReply {
            detections,
            descriptions: describe(truth, frame.instruction),
            warnings: Vec::new(),
        })
    }
}

fn describe(truth: &GroundTruth, instruction: &str) -> SceneDescriptions {
    let labels: Vec<&str> = truth.objects.iter().map(|o| o.class_label.as_str()).collect();
    let target = truth.target_object();
    let scene = format!("An image showing {}.", join_with_and(&labels));
    let relationships = if truth.objects.len() == 1 {
        format!("The {} is the only object.", target.class_label)
    } else {
        let c = target.bbox.center();
        truth
            .objects
            .iter()
            .filter(|o| o.object_id != target.object_id)
            .map(|o| {
                let oc = o.bbox.center();
                let (dx, dy) = (oc.x - c.x, oc.y - c.y);
                let rel = if dx.abs() >= dy.abs() {
                    if dx > 0.0 { "left of" } else { "right of" }
                } else if dy > 0.0 {
                    "above"
                } else {
                    "below"
                };
                format!("The {} is {} the {}.", target.class_label, rel, o.class_label)
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    SceneDescriptions {
        scene,
        relationships,
        background_prompt: format!("The background behind the {}.", target.class_label),
        generation_prompt: format!("A photo of the {} after the edit: {}", target.class_label, instruction.trim()),
    }
}

fn join_with_and(items: &[&str]) -> String {
    let with_article: Vec<String> = items.iter().map(|s| format!("a {s}")).collect();
    match with_article.len() {
        0 => "nothing".into(),
        1 => with_article[0].clone(),
        n => format!("{} and {}", with_article[..n - 1].join(", "), with_article[n - 1]),
    }
}

/// Oracle grounding with Gaussian noise on every box edge.
#[derive(Debug, Clone)]
pub struct JitterGrounder {
    pub sigma_px: f64,
    pub seed: u64,
}

impl Grounder for JitterGrounder {
    fn name(&self) -> String {
        format!("jitter-grounder(sigma={})", self.sigma_px)
    }

    fn ground(&self, frame: &Frame) -> Result<GroundingReply, BackendError> {
        let mut reply = OracleGrounder.ground(frame)?;
        if self.sigma_px == 0.0 {
            return Ok(reply);
        }
        let noise = Normal::new(0.0, self.sigma_px.abs())
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(self.seed, frame.sample_id));
        let (w, h) = frame.image.dimensions();
        for det in &mut reply.detections {
            let b = det.bbox;
            let jittered = BoundingBox {
                x_min: b.x_min + noise.sample(&mut rng),
                y_min: b.y_min + noise.sample(&mut rng),
                x_max: b.x_max + noise.sample(&mut rng),
                y_max: b.y_max + noise.sample(&mut rng),
            }
            .clamp_to(w, h);
            if let Ok(nb) = jittered {
                det.bbox = nb;
                if !nb.contains(det.point) {
                    det.point = nb.center();
                }
            }
        }
        Ok(reply)
    }
}

/// Returns the annotated mask of the object whose class matches each detection.
#[derive(Debug, Clone, Default)]
pub struct OracleRefiner;

impl Refiner for OracleRefiner {
    fn name(&self) -> String {
        "oracle-refiner".into()
    }

    fn refine(
        &self,
        frame: &Frame,
        detections: &[Detection],
    ) -> Result<BTreeMap<u32, RefinedObject>, BackendError> {
        if detections.is_empty() {
            return Err(BackendError::InvalidRequest("no detections to refine".into()));
        }
        let truth = frame.truth()?;
        let mut out = BTreeMap::new();
        for det in detections {
            let want = normalize_label(&det.class_label);
            let obj = truth
                .objects
                .iter()
                .find(|o| normalize_label(&o.class_label) == want)
                .ok_or(BackendError::ObjectNotFound(det.object_id))?;
            out.insert(
                det.object_id,
                RefinedObject {
                    bbox: bbox_of_mask(&obj.mask)?,
                    mask: obj.mask.clone(),
                },
            );
        }
        Ok(out)
    }
}

/// Picks the candidate an object phrase refers to: exact class match, then a
/// class contained in the phrase, then the only candidate.
pub fn resolve_target<'a>(
    phrase: &str,
    candidates: &'a [CandidateBox],
) -> Result<&'a CandidateBox, BackendError> {
    let want = normalize_label(phrase);
    if let Some(c) = candidates
        .iter()
        .find(|c| normalize_label(&c.class_label) == want)
    {
        return Ok(c);
    }
    let contained: Vec<&CandidateBox> = candidates
        .iter()
        .filter(|c| {
            let label = normalize_label(&c.class_label);
            !label.is_empty() && want.contains(&label)
        })
        .collect();
    match (contained.as_slice(), candidates) {
        ([one], _) => Ok(one),
        ([], [only]) => Ok(only),
        _ => Err(BackendError::TargetNotResolved(phrase.to_string())),
    }
}

/// Exact reasoning: parses the canonical grammar and compiles the edit
/// against the chosen candidate's box.
#[derive(Debug, Clone, Default)]
pub struct CompilerReasoner;

impl CompilerReasoner {
    fn solve(
        &self,
        frame: &Frame,
        candidates: &[CandidateBox],
    ) -> Result<(u32, AffineTransform), BackendError> {
        if candidates.is_empty() {
            return Err(BackendError::InvalidRequest("no candidate objects".into()));
        }
        let parsed = parse_instruction_with_target(frame.instruction)?;
        let target = resolve_target(&parsed.target, candidates)?;
        let (w, h) = frame.image.dimensions();
        let geom = ObjectGeometry::new(target.bbox, w, h)?;
        Ok((target.object_id, compile(&parsed.op, &geom)?))
    }
}

impl Reasoner for CompilerReasoner {
    fn name(&self) -> String {
        "compiler-reasoner".into()
    }

    fn reason(
        &self,
        frame: &Frame,
        _scene: &SceneDescriptions,
        candidates: &[CandidateBox],
    ) -> Result<ReasonerReply, BackendError> {
        let (id, t) = self.solve(frame, candidates)?;
        Ok(ReasonerReply {
            target_id: id,
            transform: t,
            raw_text: render_reasoner_reply(id, &t),
            warnings: Vec::new(),
        })
    }
}

/// The compiler's answer with a per-sample relative error on the whole
/// displacement: `T' = I + (1 + e)(T - I)`, `e ~ N(0, sigma)`. Errors grow
/// with the size of the edit, like numeric slips of a language model.
#[derive(Debug, Clone)]
pub struct PerturbedReasoner {
    pub relative_sigma: f64,
    pub seed: u64,
}

impl Reasoner for PerturbedReasoner {
    fn name(&self) -> String {
        format!("perturbed-reasoner(sigma={})", self.relative_sigma)
    }

    fn reason(
        &self,
        frame: &Frame,
        _scene: &SceneDescriptions,
        candidates: &[CandidateBox],
    ) -> Result<ReasonerReply, BackendError> {
        let (id, t) = CompilerReasoner.solve(frame, candidates)?;
        let noise = Normal::new(0.0, self.relative_sigma.abs())
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(self.seed, frame.sample_id));
        let k = 1.0 + noise.sample(&mut rng);
        let i = AffineTransform::identity().coefficients();
        let mut c = t.coefficients();
        for (v, base) in c.iter_mut().zip(i) {
            *v = base + k * (*v - base);
        }
        let mut perturbed = AffineTransform::from_coefficients(c);
        if !perturbed.is_invertible() {
            perturbed = t;
        }
        Ok(ReasonerReply {
            target_id: id,
            transform: perturbed,
            raw_text: render_reasoner_reply(id, &perturbed),
            warnings: Vec::new(),
        })
    }
}

/// Pixel-space drawer backed by the reference compositor.
#[derive(Debug, Clone, Default)]
pub struct ReferenceDrawer {
    pub filler: Filler,
    pub seed: u64,
}

impl Drawer for ReferenceDrawer {
    fn name(&self) -> String {
        format!("reference-drawer/{}", self.filler.name())
    }

    fn draw(&self, frame: &Frame, req: &DrawRequest) -> Result<EditedImage, BackendError> {
        if req.before.dims() != frame.image.dimensions() || req.after.dims() != req.before.dims() {
            return Err(BackendError::InvalidRequest("mask and image dimensions differ".into()));
        }
        if req.before.is_empty() {
            return Ok(EditedImage {
                pixels: frame.image.clone(),
                provenance: Provenance {
                    backend: self.name(),
                    config_hash: format!("seed={}", self.seed),
                },
                object_mask: Some(req.after.clone()),
            });
        }
        let seed = stable_seed(self.seed, frame.sample_id);
        let mut out = composite(frame.image, req.before, req.transform, seed, self.filler)
            .map_err(|e| match e {
                crate::compositor::CompositeError::Geometry(g) => BackendError::Geometry(g),
                other => BackendError::InvalidRequest(other.to_string()),
            })?;
        out.provenance.backend = self.name();
        Ok(out)
    }
}

/// Returns the input untouched and reports the object where it was.
#[derive(Debug, Clone, Default)]
pub struct PassthroughDrawer;

impl Drawer for PassthroughDrawer {
    fn name(&self) -> String {
        "passthrough-drawer".into()
    }

    fn draw(&self, frame: &Frame, req: &DrawRequest) -> Result<EditedImage, BackendError> {
        Ok(EditedImage {
            pixels: frame.image.clone(),
            provenance: Provenance {
                backend: self.name(),
                config_hash: String::new(),
            },
            object_mask: Some(req.before.clone()),
        })
    }
}

/// Reads the object placement the drawer reported.
#[derive(Debug, Clone, Default)]
pub struct OracleDetector;

impl Detector for OracleDetector {
    fn name(&self) -> String {
        "oracle-detector".into()
    }

    fn detect(
        &self,
        _frame: &Frame,
        edited: &EditedImage,
        _class_label: &str,
    ) -> Result<BinaryMask, BackendError> {
        edited
            .object_mask
            .clone()
            .ok_or_else(|| BackendError::BadPayload("drawer reported no object mask".into()))
    }
}

/// Always returns the same mask.
#[derive(Debug, Clone)]
pub struct FixedMaskDetector(pub BinaryMask);

impl Detector for FixedMaskDetector {
    fn name(&self) -> String {
        "fixed-mask-detector".into()
    }

    fn detect(&self, _: &Frame, _: &EditedImage, _: &str) -> Result<BinaryMask, BackendError> {
        Ok(self.0.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::TruthObject;
    use crate::editops::{EditError, EditOp};
    use crate::geometry::{bbox_iou, mask_iou, warp_mask};
    use image::{Rgb, RgbImage};

    fn truth() -> GroundTruth {
        let cat = BinaryMask::rect(120, 80, 10, 20, 40, 50);
        let dog = BinaryMask::rect(120, 80, 70, 10, 110, 60);
        GroundTruth {
            objects: vec![
                TruthObject {
                    object_id: 0,
                    class_label: "cat".into(),
                    bbox: bbox_of_mask(&cat).unwrap(),
                    mask: cat,
                },
                TruthObject {
                    object_id: 1,
                    class_label: "dog".into(),
                    bbox: bbox_of_mask(&dog).unwrap(),
                    mask: dog,
                },
            ],
            target: 0,
            op: EditOp::Move { dx: -150.0, dy: 0.0 },
            transform: AffineTransform::translate(-150.0, 0.0),
        }
    }

    fn frame<'a>(img: &'a RgbImage, t: &'a GroundTruth, instr: &'a str) -> Frame<'a> {
        Frame {
            sample_id: "s0",
            image: img,
            instruction: instr,
            truth: Some(t),
        }
    }

    #[test]
    fn oracle_grounding_matches_truth() {
        let img = RgbImage::new(120, 80);
        let t = truth();
        let r = OracleGrounder.ground(&frame(&img, &t, "move the cat left by 150px")).unwrap();
        assert_eq!(r.detections.len(), 2);
        assert_eq!(bbox_iou(&r.detections[0].bbox, &t.objects[0].bbox), 1.0);
        for d in &r.detections {
            assert!(d.bbox.contains(d.point));
        }
        assert!(r.descriptions.relationships.contains("cat is left of the dog"));
        let j = JitterGrounder { sigma_px: 0.0, seed: 9 }
            .ground(&frame(&img, &t, "move the cat left by 150px"))
            .unwrap();
        assert_eq!(j, r);
        let j = JitterGrounder { sigma_px: 4.0, seed: 9 }
            .ground(&frame(&img, &t, "move the cat left by 150px"))
            .unwrap();
        assert_ne!(j.detections, r.detections);
    }

    #[test]
    fn oracle_refiner_contract() {
        let img = RgbImage::new(120, 80);
        let t = truth();
        let f = frame(&img, &t, "x");
        let dets = OracleGrounder.ground(&f).unwrap().detections;
        let refined = OracleRefiner.refine(&f, &dets).unwrap();
        for (id, r) in &refined {
            assert_eq!(r.bbox, bbox_of_mask(&r.mask).unwrap());
            assert_eq!(mask_iou(&r.mask, &t.objects[*id as usize].mask).unwrap(), 1.0);
        }
        let mut ghost = dets[0].clone();
        ghost.class_label = "unicorn".into();
        ghost.object_id = 9;
        assert!(matches!(
            OracleRefiner.refine(&f, &[ghost]),
            Err(BackendError::ObjectNotFound(9))
        ));
    }

    fn candidates(t: &GroundTruth) -> Vec<CandidateBox> {
        t.objects
            .iter()
            .map(|o| CandidateBox {
                object_id: o.object_id,
                bbox: o.bbox,
                class_label: o.class_label.clone(),
            })
            .collect()
    }

    #[test]
    fn compiler_reasoner() {
        let img = RgbImage::new(120, 80);
        let t = truth();
        let r = CompilerReasoner
            .reason(&frame(&img, &t, "move the cat left by 150px"), &SceneDescriptions::default(), &candidates(&t))
            .unwrap();
        assert_eq!(r.target_id, 0);
        assert_eq!(r.transform, AffineTransform::translate(-150.0, 0.0));
        let r = CompilerReasoner
            .reason(&frame(&img, &t, "flip the dog vertically"), &SceneDescriptions::default(), &candidates(&t))
            .unwrap();
        assert_eq!(r.target_id, 1);

        let err = CompilerReasoner
            .reason(
                &frame(&img, &t, "move the cat so it sits next to the dog"),
                &SceneDescriptions::default(),
                &candidates(&t),
            )
            .unwrap_err();
        assert!(matches!(err, BackendError::Edit(EditError::UnparsableInstruction { .. })));
    }

    #[test]
    fn resolve_target_rules() {
        let c = candidates(&truth());
        assert_eq!(resolve_target("dog", &c).unwrap().object_id, 1);
        assert_eq!(resolve_target("small brown dog", &c).unwrap().object_id, 1);
        assert!(resolve_target("horse", &c).is_err());
        assert_eq!(resolve_target("horse", &c[..1]).unwrap().object_id, 0);
    }

    #[test]
    fn perturbed_reasoner_is_deterministic_and_scaled() {
        let img = RgbImage::new(120, 80);
        let t = truth();
        let pr = PerturbedReasoner { relative_sigma: 0.2, seed: 3 };
        let f = frame(&img, &t, "move the cat right by 50px");
        let a = pr.reason(&f, &SceneDescriptions::default(), &candidates(&t)).unwrap();
        let b = pr.reason(&f, &SceneDescriptions::default(), &candidates(&t)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.transform.a11, 1.0);
        assert_ne!(a.transform.a13, 50.0);
        assert_eq!(a.transform.a23, 0.0);
    }

    #[test]
    fn reference_drawer_cases() {
        let mut img = RgbImage::from_pixel(120, 80, Rgb([1, 2, 3]));
        img.put_pixel(15, 25, Rgb([250, 0, 0]));
        let t = truth();
        let f = frame(&img, &t, "x");
        let empty = BinaryMask::empty(120, 80);
        let d = ReferenceDrawer::default();
        let id = AffineTransform::identity();
        let same = |m: &'_ BinaryMask| -> EditedImage {
            d.draw(
                &f,
                &DrawRequest {
                    before: m,
                    after: m,
                    background_prompt: "b",
                    generation_prompt: "g",
                    transform: &id,
                },
            )
            .unwrap()
        };
        assert_eq!(same(&empty).pixels, img);
        let m = &t.objects[0].mask;
        assert_eq!(same(m).pixels, img);

        let shift = AffineTransform::translate(30.0, 0.0);
        let after = warp_mask(m, &shift).unwrap();
        let out = d
            .draw(
                &f,
                &DrawRequest {
                    before: m,
                    after: &after,
                    background_prompt: "",
                    generation_prompt: "",
                    transform: &shift,
                },
            )
            .unwrap();
        assert_eq!(out.pixels.get_pixel(45, 25), &Rgb([250, 0, 0]));
        assert_eq!(out.object_mask.as_ref(), Some(&after));
        assert_eq!(OracleDetector.detect(&f, &out, "cat").unwrap(), after);
    }
}
